import json
import math

import numpy as np
import pytest

import vqrng

PI_100 = "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000"


def test_detector_numbers():
    u_m = vqrng.dbm_to_density(-48.35, 2e6)
    u_e = vqrng.dbm_to_density(-58.8, 2e6)
    i_q = vqrng.shot_current_density(1e-3)
    r_f = vqrng.equivalent_transimpedance(u_m, u_e, i_q)
    assert u_m == pytest.approx(6.05e-7, rel=5e-3)
    assert r_f == pytest.approx(2.28e4, rel=1e-2)
    assert vqrng.nep(1e-4, 0.9) == pytest.approx(8.89e-12, rel=5e-3)


def test_generate_is_deterministic_and_chunkable():
    model = vqrng.DetectorModel()
    m1, e1 = vqrng.generate(model, 20000)
    m2, _ = vqrng.generate(model, 10000, start=10000)
    assert m1.dtype == np.float64 and m1.shape == (20000,)
    np.testing.assert_array_equal(m1[10000:], m2)
    assert np.std(m1) > np.std(e1) > 0


def test_quantize_and_dsp():
    codes = vqrng.quantize(np.array([0.0, 1.0, -1.0]), 12, 0.16)
    assert codes.tolist() == [0, 2047, -2048]
    x = np.random.default_rng(1).standard_normal(1 << 16)
    f, p, rbw = vqrng.welch_psd(x, 1.0, 1024)
    assert np.sum(p) * rbw == pytest.approx(np.var(x), rel=0.03)
    rho = vqrng.autocorrelation(x, 4)
    assert rho[0] == 1.0 and abs(rho[1]) < 0.02
    m = vqrng.moments(x)
    assert m["kurtosis"] == pytest.approx(3.0, abs=0.1)
    taps = vqrng.design_lowpass(0.1, 1.0, 31)
    assert len(vqrng.apply_fir(x, taps)) == len(x) - 30


def test_entropy():
    assert vqrng.avg_min_entropy(1.0, 0.0, 1, 1.0) == 1.0
    sq = 0.0393
    se = sq * 10 ** (-7.34 / 20)
    ha = vqrng.avg_min_entropy(sq, se, 12, 0.16)
    hw = vqrng.worst_min_entropy(sq, se, 12, 0.16)
    assert 0 <= hw <= ha <= 12
    ha_curve, hw_curve = vqrng.sweep_range(sq, se, 12, [3.0, 4.0, 5.0])
    assert len(ha_curve) == 3 and np.all(hw_curve <= ha_curve)
    opt = vqrng.optimal_range(sq, se, 12, "avg")
    assert opt["ratio"] == pytest.approx(4.07, rel=0.2)
    assert vqrng.extractable_rate(9.9, 6.25e9) == pytest.approx(61.875e9)


def test_extract_and_tests():
    assert vqrng.output_length(4096 * 12, 9.9, 12, 2.0**-50) == 40450
    # T[r][c] = seed[r - c + n - 1]
    out = vqrng.toeplitz_extract(np.array([1, 1, 0, 0]), np.array([1, 0, 1, 1, 0]), 4, 2)
    assert out.tolist() == [0, 1]
    pi = np.array([int(c) for c in PI_100], dtype=np.uint8)
    assert vqrng.monobit_p(pi) == pytest.approx(0.109599, abs=1e-6)
    bits = np.random.default_rng(2).integers(0, 2, 200000, dtype=np.uint8)
    report = json.loads(vqrng.run_battery(bits, 100000))
    assert report["sequences"] == 2
    assert all(0.0 <= p <= 1.0 for t in report["tests"] for p in t["p_values"])


def test_errors_raise():
    with pytest.raises(vqrng.VqrngError):
        vqrng.equivalent_transimpedance(1e-7, 2e-7, 1e-11)
    with pytest.raises(vqrng.VqrngError):
        vqrng.run_pipeline("no.such_key = 1", "")


def test_pipeline(tmp_path):
    cfg = "\n".join(
        [
            "simulate.samples = 262144",
            "simulate.lpf_band_qcnr_db = 9.51",
            "equalize.taps = 257",
            "entropy.sweep_step = 0.25",
            "test.sequence_len = 20000",
            "test.max_sequences = 10",
        ]
    )
    summary = json.loads(vqrng.run_pipeline(cfg, str(tmp_path)))
    assert summary["entropy"]["h_worst"] <= summary["entropy"]["h_avg"]
    assert (tmp_path / "sweep.csv").exists()
    assert "simulate.sigma_q" in vqrng.repro_paper_config()
    assert not math.isnan(summary["detector"]["qcnr_pre_db"])
