#include "vqrng/dsp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fft.hpp"
#include "vqrng/error.hpp"
#include "vqrng/parallel.hpp"

namespace vqrng::dsp {

using std::numbers::pi;

namespace {

constexpr std::size_t kReduceBlock = std::size_t{1} << 16;

// Blocked sum with a fixed partition, so the result does not depend on the
// worker count.
template <class F>
double blocked_sum(std::size_t n, F&& term_range) {
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kReduceBlock, hi = std::min(n, lo + kReduceBlock);
    partial[b] = term_range(lo, hi);
  });
  return std::accumulate(partial.begin(), partial.end(), 0.0);
}

std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n == 1) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(pi * x) / (pi * x); }

std::vector<double> windowed_sinc(double cutoff, double fs, std::size_t taps) {
  const auto w = hamming(taps);
  const double c = static_cast<double>(taps - 1) / 2.0;
  const double fc = cutoff / fs;  // cycles/sample
  std::vector<double> h(taps);
  for (std::size_t i = 0; i < taps; ++i) h[i] = 2.0 * fc * sinc(2.0 * fc * (static_cast<double>(i) - c)) * w[i];
  const double dc = std::accumulate(h.begin(), h.end(), 0.0);
  for (auto& v : h) v /= dc;
  return h;
}

}  // namespace

void FirFilter::validate() const {
  if (taps.empty()) throw Error("fir filter has no taps");
  for (double t : taps)
    if (!std::isfinite(t)) throw Error("fir filter has a non-finite tap");
}

double FirFilter::magnitude(double f, double sample_rate) const {
  double re = 0.0, im = 0.0;
  const double w = 2.0 * pi * f / sample_rate;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double ph = w * (static_cast<double>(i) - group_delay);
    re += taps[i] * std::cos(ph);
    im -= taps[i] * std::sin(ph);
  }
  return std::hypot(re, im);
}

// ---------------------------------------------------------------------------
// Welch

Spectrum welch_psd(std::span<const double> x, double fs, const WelchOptions& opt) {
  if (!(fs > 0.0)) throw Error("welch: sample rate must be positive");
  if (opt.overlap < 0.0 || opt.overlap > 0.9) throw Error("welch: overlap must be in [0, 0.9]");
  std::size_t L = opt.segment_len;
  if (opt.rbw_target) {
    if (!(*opt.rbw_target > 0.0)) throw Error("welch: rbw target must be positive");
    const double ideal = std::log2(fs / *opt.rbw_target);
    L = std::size_t{1} << static_cast<unsigned>(std::max(1.0, std::round(ideal)));
  }
  if (L < 2) throw Error("welch: segment length must be at least 2");
  if (x.size() < L) throw Error("welch: trace shorter than one segment");

  const std::size_t step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(L * (1.0 - opt.overlap))));
  const std::size_t segments = (x.size() - L) / step + 1;
  const std::size_t bins = L / 2 + 1;

  std::vector<double> win(L);
  double u = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    win[i] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(L)));
    u += win[i] * win[i];
  }

  const auto& plan = fft::Plan::get(L);
  constexpr std::size_t kGroup = 32;
  const std::size_t groups = (segments + kGroup - 1) / kGroup;
  std::vector<std::vector<double>> partial(groups);
  parallel_for(groups, [&](std::size_t g) {
    fft::RealBuffer buf(L);
    fft::ComplexBuffer spec(bins);
    std::vector<double> acc(bins, 0.0);
    const std::size_t s_end = std::min(segments, (g + 1) * kGroup);
    for (std::size_t s = g * kGroup; s < s_end; ++s) {
      const double* seg = x.data() + s * step;
      const double m = std::accumulate(seg, seg + L, 0.0) / static_cast<double>(L);
      for (std::size_t i = 0; i < L; ++i) buf[i] = (seg[i] - m) * win[i];
      plan.forward(buf, spec);
      for (std::size_t k = 0; k < bins; ++k) acc[k] += std::norm(spec[k]);
    }
    partial[g] = std::move(acc);
  });

  Spectrum out;
  out.unit = SpectrumUnit::V2PerHz;
  out.rbw = fs / static_cast<double>(L);
  out.frequencies.resize(bins);
  out.values.assign(bins, 0.0);
  for (const auto& p : partial)
    for (std::size_t k = 0; k < bins; ++k) out.values[k] += p[k];
  const double scale = 1.0 / (fs * u * static_cast<double>(segments));
  for (std::size_t k = 0; k < bins; ++k) {
    out.frequencies[k] = static_cast<double>(k) * out.rbw;
    const bool edge = (k == 0) || (L % 2 == 0 && k == L / 2);
    out.values[k] *= (edge ? 1.0 : 2.0) * scale;
  }
  return out;
}

Spectrum welch_psd(const NoiseTrace& trace, const WelchOptions& opt) {
  return welch_psd(trace.samples, trace.sample_rate, opt);
}

// ---------------------------------------------------------------------------
// Filter design

FirFilter design_lowpass(double f_c, double fs, std::size_t taps) {
  if (!(fs > 0.0)) throw Error("lowpass: sample rate must be positive");
  if (!(f_c > 0.0) || !(f_c < fs / 2.0)) throw Error("lowpass: cutoff must be in (0, fs/2)");
  if (taps == 0 || taps % 2 == 0) throw Error("lowpass: tap count must be odd");

  FirFilter filt;
  filt.group_delay = static_cast<double>(taps - 1) / 2.0;
  const double target = 1.0 / std::sqrt(2.0);
  auto gain_at_fc = [&](double cutoff) {
    filt.taps = windowed_sinc(cutoff, fs, taps);
    return filt.magnitude(f_c, fs);
  };

  double lo = f_c * 0.5, hi = fs / 2.0;
  if (gain_at_fc(hi) >= target) {
    // The -3 dB point is reachable; |H(f_c)| grows with the design cutoff.
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (gain_at_fc(mid) < target ? lo : hi) = mid;
    }
    gain_at_fc(0.5 * (lo + hi));
  }
  filt.description = "lowpass fc=" + format_double(f_c) + " Hz taps=" + std::to_string(taps);
  return filt;
}

FirFilter design_equalizer(const Spectrum& psd_in, double f_eq, const EqualizerOptions& opt) {
  psd_in.validate();
  const std::size_t taps = opt.taps;
  if (taps == 0 || taps % 2 == 0) throw Error("equalizer: tap count must be odd");
  if (!(f_eq > 0.0)) throw Error("equalizer: f_eq must be positive");
  if (psd_in.frequencies.back() < f_eq) throw Error("equalizer: psd span does not reach f_eq");
  if (psd_in.size() < 3) throw Error("equalizer: psd has too few points");

  const double fs = opt.sample_rate > 0.0 ? opt.sample_rate : 2.0 * psd_in.frequencies.back();
  if (!(f_eq < fs / 2.0)) throw Error("equalizer: f_eq must be below Nyquist");

  Spectrum psd = psd_in;
  psd.values = psd_in.linear_power();
  psd.unit = SpectrumUnit::V2PerHz;
  // The DC bin of a mean-removed estimate is meaningless; extend bin 1 down.
  if (psd.frequencies.front() == 0.0) psd.values.front() = psd.values[1];

  std::vector<double> passband;
  for (std::size_t i = 0; i < psd.size(); ++i)
    if (psd.frequencies[i] > 0.0 && psd.frequencies[i] <= f_eq) passband.push_back(psd.values[i]);
  if (passband.empty()) throw Error("equalizer: psd has no points in (0, f_eq]");
  std::nth_element(passband.begin(), passband.begin() + static_cast<std::ptrdiff_t>(passband.size() / 2),
                   passband.end());
  const double median = passband[passband.size() / 2];
  if (!(median > 0.0)) throw Error("equalizer: psd is zero over the passband");
  const double floor = median * std::pow(10.0, opt.floor_db / 10.0);

  const double transition = f_eq / 20.0;
  const bool rolloff = f_eq + transition < fs / 2.0;

  const std::size_t n = std::max<std::size_t>(fft::next_pow2(8 * taps), 8192);
  const auto& plan = fft::Plan::get(n);
  fft::ComplexBuffer target(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    double a = 1.0 / std::sqrt(std::max(psd.value_at(f), floor));
    if (rolloff && f > f_eq) a *= f >= f_eq + transition ? 0.0 : 0.5 * (1.0 + std::cos(pi * (f - f_eq) / transition));
    target[k] = a;
  }
  fft::RealBuffer impulse(n);
  plan.inverse(target, impulse);

  FirFilter filt;
  filt.group_delay = static_cast<double>(taps - 1) / 2.0;
  filt.taps.resize(taps);
  const auto w = hamming(taps);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(taps / 2);
  for (std::ptrdiff_t i = -half; i <= half; ++i) {
    const std::size_t src = static_cast<std::size_t>((i + static_cast<std::ptrdiff_t>(n)) % static_cast<std::ptrdiff_t>(n));
    filt.taps[static_cast<std::size_t>(i + half)] = impulse[src] / static_cast<double>(n) * w[static_cast<std::size_t>(i + half)];
  }

  // Unit mean gain over the passband, measured on the realised response.
  double sum = 0.0;
  std::size_t count = 0;
  const std::size_t grid = 2048;
  for (std::size_t k = 1; k <= grid; ++k) {
    sum += filt.magnitude(f_eq * static_cast<double>(k) / grid, fs);
    ++count;
  }
  const double g = sum / static_cast<double>(count);
  for (auto& t : filt.taps) t /= g;
  filt.description = "equalizer f_eq=" + format_double(f_eq) + " Hz taps=" + std::to_string(taps) +
                     " floor=" + format_double(opt.floor_db) + " dB";
  return filt;
}

// ---------------------------------------------------------------------------
// Filtering

std::vector<double> apply_fir(std::span<const double> x, const FirFilter& filt) {
  filt.validate();
  const std::size_t L = filt.size();
  if (x.size() < L) throw Error("apply_fir: trace shorter than the filter");
  const std::size_t nout = x.size() - L + 1;
  std::vector<double> y(nout);
  const auto& h = filt.taps;

  if (L <= 48) {
    constexpr std::size_t kBlock = 1 << 15;
    parallel_for((nout + kBlock - 1) / kBlock, [&](std::size_t b) {
      const std::size_t hi = std::min(nout, (b + 1) * kBlock);
      for (std::size_t i = b * kBlock; i < hi; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < L; ++k) acc += h[k] * x[i + L - 1 - k];
        y[i] = acc;
      }
    });
    return y;
  }

  // Overlap-save on a fixed block grid.
  const std::size_t n = std::max<std::size_t>(fft::next_pow2(8 * L), 4096);
  const std::size_t block = n - L + 1;
  const auto& plan = fft::Plan::get(n);
  fft::ComplexBuffer hf(n / 2 + 1);
  {
    fft::RealBuffer hr(n);
    for (std::size_t k = 0; k < L; ++k) hr[k] = h[k];
    plan.forward(hr, hf);
  }
  const double scale = 1.0 / static_cast<double>(n);
  parallel_for((nout + block - 1) / block, [&](std::size_t b) {
    fft::RealBuffer buf(n);
    fft::ComplexBuffer spec(n / 2 + 1);
    const std::size_t start = b * block;  // first input sample of this block
    const std::size_t avail = std::min(n, x.size() - start);
    for (std::size_t i = 0; i < avail; ++i) buf[i] = x[start + i];
    plan.forward(buf, spec);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= hf[k];
    plan.inverse(spec, buf);
    const std::size_t count = std::min(block, nout - start);
    for (std::size_t i = 0; i < count; ++i) y[start + i] = buf[L - 1 + i] * scale;
  });
  return y;
}

NoiseTrace apply_fir(const NoiseTrace& trace, const FirFilter& filt) {
  NoiseTrace out;
  out.samples = apply_fir(trace.samples, filt);
  out.sample_rate = trace.sample_rate;
  out.label = trace.label.empty() ? "filtered" : trace.label + "+filtered";
  return out;
}

FirFilter cascade(const FirFilter& a, const FirFilter& b) {
  a.validate();
  b.validate();
  FirFilter out;
  out.taps.assign(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out.taps[i + j] += a.taps[i] * b.taps[j];
  out.group_delay = a.group_delay + b.group_delay;
  out.description = a.description + " * " + b.description;
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

double mean(std::span<const double> x) {
  if (x.empty()) throw Error("mean of empty sequence");
  return blocked_sum(x.size(), [&](std::size_t lo, std::size_t hi) {
           double s = 0.0;
           for (std::size_t i = lo; i < hi; ++i) s += x[i];
           return s;
         }) /
         static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double m = mean(x);
  return blocked_sum(x.size(), [&](std::size_t lo, std::size_t hi) {
           double s = 0.0;
           for (std::size_t i = lo; i < hi; ++i) s += (x[i] - m) * (x[i] - m);
           return s;
         }) /
         static_cast<double>(x.size());
}

Moments moments(std::span<const double> x) {
  if (x.size() < 4) throw Error("moments: need at least 4 samples");
  Moments out;
  out.mean = mean(x);
  const std::size_t blocks = (x.size() + kReduceBlock - 1) / kReduceBlock;
  std::vector<std::array<double, 3>> partial(blocks);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kReduceBlock, hi = std::min(x.size(), lo + kReduceBlock);
    double s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = x[i] - out.mean;
      const double d2 = d * d;
      s2 += d2;
      s3 += d2 * d;
      s4 += d2 * d2;
    }
    partial[b] = {s2, s3, s4};
  });
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (const auto& p : partial) {
    m2 += p[0];
    m3 += p[1];
    m4 += p[2];
  }
  const double n = static_cast<double>(x.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw Error("moments: zero variance, skewness and kurtosis undefined");
  out.std = std::sqrt(m2);
  out.skewness = m3 / std::pow(m2, 1.5);
  out.kurtosis = m4 / (m2 * m2);
  return out;
}

Moments moments(const NoiseTrace& trace) { return moments(trace.samples); }

std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  const std::size_t N = x.size();
  if (N == 0 || max_lag * 10 >= N) throw Error("autocorrelation: max_lag must be below length/10");
  const double m = mean(x);
  const double var = variance(x);
  if (!(var > 0.0)) throw Error("autocorrelation: zero-variance trace");

  std::vector<double> sums(max_lag + 1, 0.0);
  if (N <= (std::size_t{1} << 16)) {
    for (std::size_t k = 0; k <= max_lag; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i + k < N; ++i) s += (x[i] - m) * (x[i + k] - m);
      sums[k] = s;
    }
  } else {
    // Block cross-correlation via FFT: each block of B samples against itself
    // extended by max_lag samples into the next block.
    constexpr std::size_t B = std::size_t{1} << 16;
    const std::size_t n = fft::next_pow2(B + max_lag + 1);
    const auto& plan = fft::Plan::get(n);
    const std::size_t blocks = (N + B - 1) / B;
    std::vector<std::vector<double>> partial(blocks);
    parallel_for(blocks, [&](std::size_t b) {
      fft::RealBuffer a(n), c(n);
      fft::ComplexBuffer fa(n / 2 + 1), fc(n / 2 + 1);
      const std::size_t lo = b * B;
      const std::size_t len_a = std::min(B, N - lo);
      const std::size_t len_c = std::min(B + max_lag, N - lo);
      for (std::size_t i = 0; i < len_a; ++i) a[i] = x[lo + i] - m;
      for (std::size_t i = 0; i < len_c; ++i) c[i] = x[lo + i] - m;
      plan.forward(a, fa);
      plan.forward(c, fc);
      for (std::size_t k = 0; k < fa.size(); ++k) fc[k] *= std::conj(fa[k]);
      plan.inverse(fc, c);
      std::vector<double> r(max_lag + 1);
      for (std::size_t k = 0; k <= max_lag; ++k) r[k] = c[k] / static_cast<double>(n);
      partial[b] = std::move(r);
    });
    for (const auto& p : partial)
      for (std::size_t k = 0; k <= max_lag; ++k) sums[k] += p[k];
  }

  std::vector<double> rho(max_lag + 1);
  const double denom = var;
  for (std::size_t k = 0; k <= max_lag; ++k) rho[k] = sums[k] / static_cast<double>(N - k) / denom;
  rho[0] = 1.0;
  return rho;
}

std::vector<double> autocorrelation(const NoiseTrace& trace, std::size_t max_lag) {
  return autocorrelation(trace.samples, max_lag);
}

std::vector<double> autocorrelation(const DigitizedTrace& trace, std::size_t max_lag) {
  std::vector<double> v(trace.codes.begin(), trace.codes.end());
  return autocorrelation(v, max_lag);
}

}  // namespace vqrng::dsp
