#include <cmath>

#include "doctest.h"
#include "vqrng/dsp.hpp"
#include "vqrng/error.hpp"
#include "vqrng/noisesim.hpp"
#include "vqrng/parallel.hpp"

using namespace vqrng;
using noisesim::Component;
using noisesim::DetectorModel;

TEST_CASE("generation is deterministic and chunk-order independent") {
  DetectorModel m;
  m.seed = 77;
  const std::size_t n = 1000000;
  const auto whole = noisesim::generate_measured(m, 0, 2 * n);
  const auto a = noisesim::generate_measured(m, 0, n);
  const auto b = noisesim::generate_measured(m, n, n);
  REQUIRE(whole.size() == 2 * n);
  CHECK(std::equal(a.samples.begin(), a.samples.end(), whole.samples.begin()));
  CHECK(std::equal(b.samples.begin(), b.samples.end(), whole.samples.begin() + n));

  // unaligned window straddling a chunk boundary
  const auto w = noisesim::generate_measured(m, noisesim::kChunkSamples - 1234, 5000);
  CHECK(std::equal(w.samples.begin(), w.samples.end(), whole.samples.begin() + (noisesim::kChunkSamples - 1234)));

  set_thread_count(1);
  const auto single = noisesim::generate(m, 300000);
  set_thread_count(4);
  const auto multi = noisesim::generate(m, 300000);
  set_thread_count(0);
  CHECK(single.measured.samples == multi.measured.samples);
  CHECK(single.electronic.samples == multi.electronic.samples);

  auto other = m;
  other.seed = 78;
  CHECK(noisesim::generate_measured(other, 0, 10).samples[0] != a.samples[0]);
}

TEST_CASE("measured equals quantum plus electronic") {
  DetectorModel m;
  const auto q = noisesim::generate_component(m, Component::Quantum, 500, 1000);
  const auto e = noisesim::generate_component(m, Component::Electronic, 500, 1000);
  const auto t = noisesim::generate(m, 1500);
  for (std::size_t i = 0; i < 1000; ++i) {
    CHECK(t.measured.samples[500 + i] == doctest::Approx(q.samples[i] + e.samples[i]).epsilon(1e-12));
    CHECK(t.electronic.samples[500 + i] == e.samples[i]);
  }
}

TEST_CASE("sample std follows the model") {
  DetectorModel m;
  const auto t = noisesim::generate(m, 10000000);
  const double expect = std::hypot(m.sigma_q, m.sigma_e);
  CHECK(std::sqrt(dsp::variance(t.measured.samples)) == doctest::Approx(expect).epsilon(0.02));
  CHECK(std::sqrt(dsp::variance(t.electronic.samples)) == doctest::Approx(m.sigma_e).epsilon(0.02));

  m.sigma_e = 0.0;
  const auto q = noisesim::generate_measured(m, 0, 2000000);
  CHECK(dsp::variance(q.samples) == doctest::Approx(m.sigma_q * m.sigma_q).epsilon(0.02));
  CHECK(m.programmed_qcnr_db() == INFINITY);
}

TEST_CASE("welch psd of each component matches the model response") {
  DetectorModel m;
  m.electronic_f3db = 3.5e9;
  for (auto c : {Component::Quantum, Component::Electronic}) {
    const auto t = noisesim::generate_component(m, c, 0, 10000000);
    const auto psd = dsp::welch_psd(t, {.segment_len = 4096});
    // reference level from the lowest bins
    const double sigma = c == Component::Quantum ? m.sigma_q : m.sigma_e;
    double norm = 0.0;
    for (std::size_t i = 0; i < psd.size(); ++i) norm += m.power_response(psd.frequencies[i], c) * psd.rbw;
    const double dc = sigma * sigma / norm;
    const double f3 = c == Component::Quantum ? m.f3db : m.electronic_f3db;
    // the finite coloring FIR smooths the brick wall at f_lpf
    const double top = std::min(f3, 0.9 * m.f_lpf);
    for (std::size_t i = 0; i < psd.size(); ++i) {
      const double f = psd.frequencies[i];
      if (f < 0.05 * f3 || f > top) continue;
      const double ratio = psd.values[i] / (dc * m.power_response(f, c));
      CHECK(std::abs(10 * std::log10(ratio)) < 1.0);
    }
  }
  CHECK(m.power_response(m.f3db, Component::Quantum) == doctest::Approx(0.5));
  CHECK(m.power_response(3e9, Component::Electronic) == doctest::Approx(1.0 / std::pow(1.0 + std::pow(3.0 / 3.5, 2) * (std::sqrt(2.0) - 1.0), 2)));
  CHECK(m.power_response(m.f_lpf * 1.001, Component::Quantum) == 0.0);
}

TEST_CASE("coloring taps have unit energy") {
  DetectorModel m;
  for (auto c : {Component::Quantum, Component::Electronic}) {
    const auto h = noisesim::coloring_taps(m, c);
    CHECK(h.size() == m.filter_taps);
    double e = 0.0;
    for (double v : h) e += v * v;
    CHECK(e == doctest::Approx(1.0));
  }
}

TEST_CASE("lpf band qcnr calibration") {
  DetectorModel m;
  m.electronic_f3db = 3.5e9;
  const auto cal = noisesim::with_lpf_band_qcnr(m, 9.51, 2.4e9);
  CHECK(noisesim::lpf_band_qcnr_db(cal, 2.4e9) == doctest::Approx(9.51).epsilon(1e-6));
  CHECK(cal.sigma_q == m.sigma_q);
  // wider electronic band: more electronic power survives outside the LPF
  CHECK(cal.programmed_qcnr_db() < 9.51);
}

TEST_CASE("model validation") {
  DetectorModel m;
  CHECK_NOTHROW(m.validate());
  auto bad = m;
  bad.sigma_q = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = m;
  bad.f_lpf = 3.2e9;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = m;
  bad.filter_taps = 1024;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(noisesim::generate(m, 0), Error);
}

TEST_CASE("quantize") {
  AdcConfig adc{12, 0.16};
  CHECK(noisesim::quantize(0.0, adc) == 0);
  CHECK(noisesim::quantize(1.0, adc) == 2047);
  CHECK(noisesim::quantize(-1.0, adc) == -2048);
  CHECK(noisesim::quantize(-adc.bin_width() * 0.5, adc) == -1);
  CHECK(noisesim::quantize(0.16, adc) == 2047);
  CHECK(noisesim::quantize(-0.16, adc) == -2048);

  NoiseTrace t{{0.0, 1.0, -1.0, 0.1}, 1.0, ""};
  const auto d = noisesim::adc_quantize(t, adc);
  CHECK(d.codes == std::vector<std::int16_t>{0, 2047, -2048, static_cast<std::int16_t>(std::floor((0.1 + 0.16) / adc.bin_width()) - 2048)});
  CHECK(d.saturation_count == 2);

  // monotone on a dense sweep
  std::int16_t prev = noisesim::quantize(-0.2, adc);
  bool monotone = true;
  for (double v = -0.2; v <= 0.2; v += 1e-6) {
    const auto c = noisesim::quantize(v, adc);
    monotone = monotone && c >= prev;
    prev = c;
  }
  CHECK(monotone);

  // bin center dequantizes back to its own code
  for (int code = -2048; code < 2048; code += 97) CHECK(noisesim::quantize(adc.bin_center(code), adc) == code);
}
