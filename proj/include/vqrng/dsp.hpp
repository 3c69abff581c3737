#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqrng/sigio.hpp"

namespace vqrng::dsp {

struct FirFilter {
  std::vector<double> taps;
  std::string description;
  double group_delay = 0.0;  // samples; (len-1)/2 for the linear-phase designs here

  void validate() const;
  std::size_t size() const { return taps.size(); }
  // |H(f)| for a filter run at `sample_rate`.
  double magnitude(double f, double sample_rate) const;
};

struct WelchOptions {
  std::size_t segment_len = std::size_t{1} << 14;
  double overlap = 0.5;
  // When set, segment_len is replaced by the power of two whose bin spacing
  // is closest to this resolution bandwidth.
  std::optional<double> rbw_target;
};

// One-sided Hann-windowed averaged periodogram in V^2/Hz, each segment
// mean-removed. rbw of the result is the bin spacing fs / segment_len.
Spectrum welch_psd(std::span<const double> samples, double sample_rate, const WelchOptions& opt = {});
Spectrum welch_psd(const NoiseTrace& trace, const WelchOptions& opt = {});

// Linear-phase Hamming-windowed sinc, odd length, unit DC gain, cutoff tuned
// so that |H(f_c)| = -3 dB (or all-pass when that needs a cutoff past Nyquist).
FirFilter design_lowpass(double f_c, double sample_rate, std::size_t taps);

struct EqualizerOptions {
  std::size_t taps = 1025;
  double floor_db = -40.0;   // relative to the median passband PSD
  double sample_rate = 0.0;  // 0: twice the highest PSD frequency
};

// Zero-phase whitening filter |G(f)| ~ 1/sqrt(max(psd, floor)) up to f_eq,
// raised-cosine roll-off to zero over f_eq/20 above it. When that roll-off
// would reach Nyquist the filter keeps whitening up to Nyquist instead.
// Normalised to unit mean gain over (0, f_eq].
FirFilter design_equalizer(const Spectrum& psd, double f_eq, const EqualizerOptions& opt = {});

// Linear convolution, (len-1)/2 edge samples trimmed on each side so output
// sample i is centred on input sample i + (len-1)/2.
std::vector<double> apply_fir(std::span<const double> x, const FirFilter& filt);
NoiseTrace apply_fir(const NoiseTrace& trace, const FirFilter& filt);

// Full linear convolution of two tap sets (filter cascade).
FirFilter cascade(const FirFilter& a, const FirFilter& b);

// Normalised autocorrelation rho(0..max_lag) of the mean-removed sequence,
// lag-k sum divided by (N - k). rho(0) == 1.
std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag);
std::vector<double> autocorrelation(const NoiseTrace& trace, std::size_t max_lag);
std::vector<double> autocorrelation(const DigitizedTrace& trace, std::size_t max_lag);

struct Moments {
  double mean = 0.0;
  double std = 0.0;  // population (1/N)
  double skewness = 0.0;
  double kurtosis = 0.0;  // non-excess; Gaussian -> 3
};

Moments moments(std::span<const double> x);
Moments moments(const NoiseTrace& trace);

double mean(std::span<const double> x);
// Population variance (1/N).
double variance(std::span<const double> x);

}  // namespace vqrng::dsp
