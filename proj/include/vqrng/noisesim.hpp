#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vqrng/sigio.hpp"

namespace vqrng::noisesim {

enum class ResponseShape { SinglePole, TwoPole };

enum class Component { Quantum, Electronic };

// Generative model of the balanced homodyne detector output.
//
// sigma_q / sigma_e are the full-band standard deviations of the two noise
// components. Both are shaped by a low-pass response whose -3 dB point is
// f3db (electronic_f3db for the electronic part when non-zero) and cut by a
// brick wall at f_lpf.
struct DetectorModel {
  double sigma_q = 0.0393;
  double sigma_e = 0.013148994701634727;  // 9.51 dB below sigma_q
  double f3db = 2.4e9;
  double electronic_f3db = 0.0;  // 0: same response as the quantum noise
  double f_lpf = 3.12e9;
  ResponseShape shape = ResponseShape::TwoPole;
  double sample_rate = 6.25e9;
  std::uint64_t seed = 1;
  std::size_t filter_taps = 1023;  // coloring FIR length (odd)

  void validate() const;
  // 20 log10(sigma_q / sigma_e); +inf when sigma_e == 0.
  double programmed_qcnr_db() const;
  // |H(f)|^2 of one component, 1 at DC, including the f_lpf brick wall.
  double power_response(double f, Component c) const;
};

struct TracePair {
  NoiseTrace measured;    // quantum + electronic
  NoiseTrace electronic;  // electronic only (same realisation as in measured)
};

// Samples [0, count) of both outputs.
TracePair generate(const DetectorModel& model, std::size_t count);

// Samples [start, start + count) of one output. Sample i depends only on
// (seed, i): generate_measured(m, 0, 2N) equals the concatenation of
// generate_measured(m, 0, N) and generate_measured(m, N, N).
NoiseTrace generate_measured(const DetectorModel& model, std::uint64_t start, std::size_t count);
NoiseTrace generate_electronic(const DetectorModel& model, std::uint64_t start, std::size_t count);
NoiseTrace generate_component(const DetectorModel& model, Component c, std::uint64_t start, std::size_t count);

// White Gaussian substream length; chunk k draws from a Philox substream
// keyed by (seed, k).
inline constexpr std::uint64_t kChunkSamples = std::uint64_t{1} << 20;

// Coloring filter of one component (unit output variance for unit-variance
// white input).
std::vector<double> coloring_taps(const DetectorModel& model, Component c);

// code = clamp(floor((v + S)/delta), 0, 2^n - 1) - 2^(n-1)
std::int16_t quantize(double v, const AdcConfig& adc);
DigitizedTrace adc_quantize(const NoiseTrace& trace, const AdcConfig& adc);

// QCNR that a bandwidth-matched measurement (both traces through
// dsp::design_lowpass(f_cut, rate, taps)) is expected to report.
double lpf_band_qcnr_db(const DetectorModel& model, double f_cut, std::size_t lpf_taps = 255);

// Copy of `model` with sigma_e chosen so lpf_band_qcnr_db(...) == qcnr_db.
DetectorModel with_lpf_band_qcnr(DetectorModel model, double qcnr_db, double f_cut, std::size_t lpf_taps = 255);

}  // namespace vqrng::noisesim
