"""Command line behaviour: exit codes, determinism and stage composability."""
import filecmp
import json
import os
import subprocess
from pathlib import Path

import pytest

CLI = os.environ.get("VQRNG_CLI", "vqrng")

SMALL = [
    "-s", "simulate.samples=262144",
    "-s", "simulate.lpf_band_qcnr_db=9.51",
    "-s", "equalize.taps=257",
    "-s", "entropy.sweep_step=0.25",
    "-s", "test.sequence_len=20000",
    "-s", "test.max_sequences=10",
]


def run(*args, cwd=None):
    return subprocess.run([CLI, *args], cwd=cwd, capture_output=True, text=True)


def same_tree(a: Path, b: Path):
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors, mismatch + errors


def test_usage_error():
    assert run().returncode != 0
    assert run("bogus").returncode != 0


def test_stage_exit_codes(tmp_path):
    r = run("pipeline", "-s", "nope.key=1", "-o", str(tmp_path))
    assert r.returncode == 2 and "config:" in r.stderr
    r = run("characterize", "-o", str(tmp_path / "empty"))
    assert r.returncode == 4 and "characterize:" in r.stderr and "measured.vqt" in r.stderr
    r = run("pipeline", *SMALL, "-s", "input.measured=/nonexistent/m.vqt", "-s",
            "input.electronic=/nonexistent/e.vqt", "-o", str(tmp_path / "x"))
    assert r.returncode == 4 and "input.measured" in r.stderr
    r = run("pipeline", "--stages", "extract", "-o", str(tmp_path / "y"))
    assert r.returncode == 7 and "extract:" in r.stderr


def test_pipeline_deterministic_across_threads_and_composable(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    r = run("pipeline", *SMALL, "--seed", "5", "-j", "4", "-o", str(a))
    assert r.returncode == 0, r.stderr
    summary = json.loads(r.stdout)
    assert summary["seed"] == 5
    assert run("pipeline", *SMALL, "--seed", "5", "-j", "1", "-o", str(b)).returncode == 0
    same_tree(a, b)

    # one subcommand per stage, same intermediate files
    for sub in ["simulate", "characterize", "equalize"]:
        r = run(sub, *SMALL, "--seed", "5", "-o", str(c))
        assert r.returncode == 0, r.stderr
    for stage in ["entropy", "extract", "test"]:
        r = run("pipeline", "--stages", stage, *SMALL, "--seed", "5", "-o", str(c))
        assert r.returncode == 0, r.stderr
    same_tree(a, c)


def test_standalone_tools(tmp_path):
    r = run("entropy", "--sigma-q", "0.0393", "--sigma-e", "0.0169", "--bits", "12", "--range", "0.16",
            "--sample-rate", "6.25e9")
    assert r.returncode == 0, r.stderr
    e = json.loads(r.stdout)
    assert 0 <= e["h_worst"] <= e["h_avg"] <= 12

    r = run("sweep", "--sigma-q", "0.0393", "--sigma-e", "0.0169", "--step", "0.5", "--csv", str(tmp_path / "s.csv"))
    assert r.returncode == 0, r.stderr
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert len(lines) == 1 + 20

    r = run("optimize", "--sigma-q", "0.0393", "--sigma-e", "0.0169", "--objective", "worst")
    assert r.returncode == 0 and json.loads(r.stdout)["ratio"] > 1

    sim = run("simulate", "--sigma-q", "39.3", "--qcnr", "9.51", "--count", "200000", "--bits", "12", "--range",
              "160", "--measured", "m.vqt", "--electronic", "e.vqt", "--digitized", "d.vqt", cwd=tmp_path)
    assert sim.returncode == 0, sim.stderr
    assert (tmp_path / "d.vqt").stat().st_size == 31 + 2 * 200000

    eq = run("equalize", "--input", "m.vqt", "--f-eq", "3e9", "--taps", "513", "-o", "eq", cwd=tmp_path)
    assert eq.returncode == 0, eq.stderr
    assert abs(json.loads(eq.stdout)["rho1_post"]) < 0.01
    for name in ["equalized.vqt", "psd_pre.csv", "psd_post.csv", "autocorrelation.csv", "moments.csv"]:
        assert (tmp_path / "eq" / name).exists()

    raw = tmp_path / "raw.bin"
    raw.write_bytes(os.urandom(4096 * 12 // 8 * 40))
    r = run("extract", "--input", str(raw), "--output", str(tmp_path / "out.bin"), "--seed", "9", "--n-in", "49152",
            "--h-min", "9.9", "--bits-per-sample", "12")
    assert r.returncode == 0, r.stderr
    side = json.loads((tmp_path / "out.bin.json").read_text())
    assert side["blocks"] == 40 and side["m_out"] == 40450 and side["discarded_bits"] == 0
    assert "throughput_bits_per_s" in side

    zeros = tmp_path / "zeros.bin"
    zeros.write_bytes(bytes(25000))
    r = run("test", "--input", str(zeros), "--sequence-len", "100000")
    assert r.returncode == 8

    r = run("characterize", "--measured-psd", str(tmp_path / "eq" / "psd_pre.csv"), "--electronic-psd",
            str(tmp_path / "eq" / "psd_post.csv"))
    assert r.returncode in (0, 4)
