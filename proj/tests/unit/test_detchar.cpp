#include <cmath>

#include "doctest.h"
#include "vqrng/detchar.hpp"
#include "vqrng/dsp.hpp"
#include "vqrng/error.hpp"
#include "vqrng/noisesim.hpp"
#include "vqrng/philox.hpp"

using namespace vqrng;
using namespace vqrng::detchar;
using doctest::Approx;

namespace {

NoiseTrace white_trace(std::size_t n, double sigma, std::uint64_t seed, std::uint32_t stream) {
  NoiseTrace t;
  t.sample_rate = 1.0;
  t.samples.resize(n);
  for (std::size_t i = 0; i < n; i += 2) {
    const auto z = normal_pair(Philox4x32::block({static_cast<std::uint32_t>(i), 0, stream, 0}, Philox4x32::key_from(seed)));
    t.samples[i] = sigma * z[0];
    if (i + 1 < n) t.samples[i + 1] = sigma * z[1];
  }
  return t;
}

Spectrum tone_spectrum(double floor_dbm, double tone_dbm, double f_tone) {
  Spectrum s;
  s.unit = SpectrumUnit::DbmPerRbw;
  s.rbw = 1e6;
  for (int i = 0; i <= 4000; ++i) {
    const double f = i * 1e6;
    s.frequencies.push_back(f);
    s.values.push_back(std::abs(f - f_tone) < 0.5e6 ? tone_dbm : floor_dbm);
  }
  return s;
}

}  // namespace

TEST_CASE("detector characterization numbers") {
  CHECK(dbm_to_density(-48.35, 2e6, 50) == Approx(6.05e-7).epsilon(0.005));
  CHECK(dbm_to_density(-58.8, 2e6, 50) == Approx(1.82e-7).epsilon(0.005));
  CHECK(density_to_dbm(6.05e-7, 2e6, 50) == Approx(-48.35).epsilon(0.01 / 48.35));
  CHECK(std::abs(density_to_dbm(1.82e-7, 2e6, 50) + 58.8) < 0.05);
  CHECK(density_to_dbm(6.05e-6, 2e6, 50) - density_to_dbm(6.05e-7, 2e6, 50) == Approx(20.0).epsilon(1e-12));

  CHECK(shot_current_density(1e-3) == Approx(2.53e-11).epsilon(0.005));
  CHECK(shot_current_density(0.0) == 0.0);
  CHECK(shot_current_density(1e-4) == Approx(8.005e-12).epsilon(1e-3));

  CHECK(equivalent_transimpedance(6.05e-7, 1.82e-7, 2.53e-11) == Approx(2.28e4).epsilon(0.01));
  CHECK(equivalent_transimpedance(6.05e-7, 0.0, 2.53e-11) == 6.05e-7 / 2.53e-11);
  CHECK(equivalent_transimpedance(1.82e-7, 1.82e-7, 2.53e-11) == 0.0);
  CHECK_THROWS_WITH_AS(equivalent_transimpedance(1e-7, 2e-7, 1e-11), "electronic noise exceeds measured noise", Error);

  CHECK(qcnr_from_variances(8.93, 1.0) == Approx(9.51).epsilon(0.001));
  CHECK(qcnr_from_variances(2.0, 2.0) == 0.0);
  CHECK(qcnr_from_variances(10.0, 1.0) == Approx(10.0));

  const double nep_w = nep(1e-4, 0.9);
  CHECK(nep_w >= 8.85e-12);
  CHECK(nep_w <= 8.90e-12);
  CHECK(nep(0.0, 0.9) == 0.0);
  CHECK(nep(1e-4, 1.8) == Approx(nep_w / 2));

  CHECK(equivalent_electronic_current(1.82e-7, 2.28e4) == Approx(0.995e-4).epsilon(0.02));
  CHECK(equivalent_electronic_current(0.0, 2.28e4) == 0.0);
  for (double I : {1e-6, 1e-4, 3e-3}) {
    const double r_f = 1.7e4;
    CHECK(equivalent_electronic_current(shot_current_density(I) * r_f, r_f) == Approx(I).epsilon(1e-12));
  }
}

TEST_CASE("conversion properties") {
  for (double p = -120.0; p <= 20.0; p += 0.37) {
    const double back = density_to_dbm(dbm_to_density(p, 2e6, 50), 2e6, 50);
    CHECK(std::abs(back - p) <= 1e-12 * std::abs(p) + 1e-12);
  }
  double prev = 0.0;
  for (double I = 1e-6; I < 1e-1; I *= 1.7) {
    const double i = shot_current_density(I);
    CHECK(i > prev);
    CHECK(shot_current_density(4 * I) == 2 * i);
    prev = i;
  }
  for (double u : {1e-9, 3.3e-7, 2e-5}) CHECK(equivalent_transimpedance(u, 0.0, 2.53e-11) * 2.53e-11 == Approx(u).epsilon(1e-15));
}

TEST_CASE("qcnr from traces") {
  const auto q = white_trace(1 << 20, 3.0, 1, 0);
  const auto e = white_trace(1 << 20, 1.0, 1, 1);
  NoiseTrace m = q;
  for (std::size_t i = 0; i < m.size(); ++i) m.samples[i] += e.samples[i];
  CHECK(qcnr_from_traces(m, e, 0.3) == Approx(10 * std::log10(9.0)).epsilon(0.01));
  CHECK_THROWS_WITH_AS(qcnr_from_traces(e, e, 0.3), doctest::Contains("quantum variance"), Error);

  noisesim::DetectorModel model;
  model.electronic_f3db = 3.5e9;
  model = noisesim::with_lpf_band_qcnr(model, 9.51, 2.4e9);
  const auto t = noisesim::generate(model, 4000000);
  CHECK(std::abs(qcnr_from_traces(t.measured, t.electronic, 2.4e9) - 9.51) < 0.2);
}

TEST_CASE("3 dB bandwidth") {
  noisesim::DetectorModel m;
  m.sigma_e = 0.0;
  const auto two = dsp::welch_psd(noisesim::generate_measured(m, 0, 4000000));
  CHECK(bandwidth_3db(two) == Approx(2.4e9).epsilon(0.05));

  m.shape = noisesim::ResponseShape::SinglePole;
  m.f3db = 1e9;
  const auto one = dsp::welch_psd(noisesim::generate_measured(m, 0, 4000000));
  CHECK(bandwidth_3db(one) == Approx(1e9).epsilon(0.05));

  CHECK_THROWS_WITH_AS(bandwidth_3db(tone_spectrum(-80, -80, 2e9)), "no 3 dB point", Error);
}

TEST_CASE("cmrr") {
  CHECK(cmrr_from_spectra(tone_spectrum(-90, -70, 1e9), tone_spectrum(-90, -35, 1e9), 1e9) == Approx(35.0).epsilon(0.5 / 35));
  CHECK(cmrr_from_spectra(tone_spectrum(-90, -60, 2e9), tone_spectrum(-90, -35, 2e9), 2e9) == Approx(25.0).epsilon(0.5 / 25));
  // the tone drifted by two bins
  CHECK(cmrr_from_spectra(tone_spectrum(-90, -60, 2e9), tone_spectrum(-90, -35, 2.002e9), 2e9) == Approx(25.0).epsilon(0.5 / 25));
  const auto s = tone_spectrum(-90, -50, 1e9);
  CHECK(cmrr_from_spectra(s, s, 1e9) == 0.0);
}

TEST_CASE("characterization chain recovers programmed parameters") {
  for (double qcnr : {6.0, 9.51, 14.0}) {
    for (double f3 : {1.5e9, 2.4e9}) {
      noisesim::DetectorModel model;
      model.f3db = f3;
      model.seed = static_cast<std::uint64_t>(qcnr * 100 + f3 / 1e8);
      model = noisesim::with_lpf_band_qcnr(model, qcnr, 2.4e9);
      const auto t = noisesim::generate(model, 4000000);
      const auto r = characterize(t.measured, t.electronic, 2.4e9);
      CHECK(std::abs(r.qcnr - qcnr) < 0.2);
      CHECK(r.f_3dB == Approx(f3).epsilon(0.05));
      CHECK_NOTHROW(r.validate());
      CHECK(r.u_Q == Approx(std::sqrt(r.u_M * r.u_M - r.u_E * r.u_E)));
      CHECK(r.R_F * r.i_Q == Approx(r.u_Q));
    }
  }
}

TEST_CASE("characterize from flat reference-level spectra") {
  auto m = tone_spectrum(-48.35, -48.35, 0);
  auto e = tone_spectrum(-58.8, -58.8, 0);
  m.rbw = e.rbw = 2e6;
  // detector roll-off above 2.4 GHz so a 3 dB point exists
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.frequencies[i] > 2.4e9) m.values[i] = -60.0;
  const auto r = characterize(m, e);
  CHECK(r.u_M == Approx(6.05e-7).epsilon(0.005));
  CHECK(r.u_E == Approx(1.82e-7).epsilon(0.005));
  CHECK(r.R_F == Approx(2.28e4).epsilon(0.01));
  CHECK(r.I_E == Approx(1e-4).epsilon(0.02));
  // u_M/u_E gap of 10.45 dB, quantum part after subtracting u_E
  CHECK(r.qcnr == Approx(10 * std::log10(std::pow(10.0, 1.045) - 1.0)).epsilon(1e-6));
  CHECK(r.f_3dB == Approx(2.4e9).epsilon(0.01));
  CHECK_THROWS_WITH_AS(characterize(e, m), "electronic noise exceeds measured noise", Error);
}
