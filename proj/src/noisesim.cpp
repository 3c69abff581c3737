#include "vqrng/noisesim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fft.hpp"
#include "vqrng/dsp.hpp"
#include "vqrng/error.hpp"
#include "vqrng/parallel.hpp"
#include "vqrng/philox.hpp"

namespace vqrng::noisesim {

namespace {

// f_3dB / f_pole for the two-pole response 1/(1+(f/f_p)^2)^2.
const double kTwoPoleRatio = std::sqrt(std::sqrt(2.0) - 1.0);

double component_f3db(const DetectorModel& m, Component c) {
  return (c == Component::Electronic && m.electronic_f3db > 0.0) ? m.electronic_f3db : m.f3db;
}

std::uint32_t stream_id(Component c) { return c == Component::Quantum ? 0u : 1u; }

// Fills out[0..n) with white N(0,1) samples for global indices [first, first+n).
void white_noise(const DetectorModel& m, Component c, std::int64_t first, std::span<double> out) {
  const auto key = Philox4x32::key_from(m.seed);
  const auto sid = stream_id(c);
  const auto chunk_len = static_cast<std::int64_t>(kChunkSamples);
  std::size_t i = 0;
  while (i < out.size()) {
    const std::int64_t j = first + static_cast<std::int64_t>(i);
    const std::int64_t chunk = (j >= 0 ? j : j - chunk_len + 1) / chunk_len;
    const auto offset = static_cast<std::uint64_t>(j - chunk * chunk_len);
    const auto uchunk = static_cast<std::uint64_t>(chunk);
    const auto z = normal_pair(Philox4x32::block(
        {static_cast<std::uint32_t>(offset >> 1), static_cast<std::uint32_t>(uchunk),
         static_cast<std::uint32_t>(uchunk >> 32), sid},
        key));
    out[i++] = z[offset & 1];
    if ((offset & 1) == 0 && i < out.size()) out[i++] = z[1];
  }
}

struct ColoringKernel {
  std::size_t taps = 0;
  std::size_t fft_len = 0;
  fft::ComplexBuffer spectrum;  // FFT of the zero-padded taps
};

ColoringKernel make_kernel(const DetectorModel& m, Component c, double scale) {
  const auto h = coloring_taps(m, c);
  ColoringKernel k;
  k.taps = h.size();
  k.fft_len = std::max<std::size_t>(fft::next_pow2(16 * k.taps), 16384);
  const auto& plan = fft::Plan::get(k.fft_len);
  fft::RealBuffer padded(k.fft_len);
  for (std::size_t i = 0; i < h.size(); ++i) padded[i] = h[i] * scale;
  k.spectrum = fft::ComplexBuffer(k.fft_len / 2 + 1);
  plan.forward(padded, k.spectrum);
  return k;
}

// Colored samples for global indices [start, start+count), computed on a
// fixed block grid so every sample is independent of the requested range.
std::vector<double> colored(const DetectorModel& m, std::span<const Component> parts,
                            std::span<const double> sigmas, std::uint64_t start, std::size_t count) {
  std::vector<ColoringKernel> kernels;
  for (std::size_t p = 0; p < parts.size(); ++p) kernels.push_back(make_kernel(m, parts[p], sigmas[p]));
  const std::size_t L = kernels.front().taps;
  const std::size_t n = kernels.front().fft_len;
  const std::size_t block = n - L + 1;
  const auto half = static_cast<std::int64_t>((L - 1) / 2);
  const auto& plan = fft::Plan::get(n);
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> out(count);
  if (count == 0) return out;
  const std::uint64_t first_block = start / block;
  const std::uint64_t last_block = (start + count - 1) / block;
  parallel_for(static_cast<std::size_t>(last_block - first_block + 1), [&](std::size_t bi) {
    const std::uint64_t b = first_block + bi;
    const auto origin = static_cast<std::int64_t>(b * block);
    fft::RealBuffer w(n);
    fft::ComplexBuffer acc(n / 2 + 1), spec(n / 2 + 1);
    for (std::size_t p = 0; p < parts.size(); ++p) {
      white_noise(m, parts[p], origin - half, std::span<double>(w.data(), n));
      plan.forward(w, spec);
      const auto& hk = kernels[p].spectrum;
      if (p == 0)
        for (std::size_t k = 0; k < spec.size(); ++k) acc[k] = spec[k] * hk[k];
      else
        for (std::size_t k = 0; k < spec.size(); ++k) acc[k] += spec[k] * hk[k];
    }
    plan.inverse(acc, w);
    // Valid outputs of the circular convolution start at index L-1.
    const std::uint64_t lo = std::max<std::uint64_t>(start, b * block);
    const std::uint64_t hi = std::min<std::uint64_t>(start + count, (b + 1) * block);
    for (std::uint64_t g = lo; g < hi; ++g) out[g - start] = w[L - 1 + (g - b * block)] * inv_n;
  });
  return out;
}

NoiseTrace make_trace(std::vector<double> samples, double rate, std::string label) {
  NoiseTrace t;
  t.samples = std::move(samples);
  t.sample_rate = rate;
  t.label = std::move(label);
  return t;
}

}  // namespace

void DetectorModel::validate() const {
  if (!(sigma_q > 0.0) || !std::isfinite(sigma_q)) throw Error("detector model: sigma_q must be positive");
  if (!(sigma_e >= 0.0) || !std::isfinite(sigma_e)) throw Error("detector model: sigma_e must be non-negative");
  if (!(sample_rate > 0.0)) throw Error("detector model: sample_rate must be positive");
  if (!(f3db > 0.0) || f3db > f_lpf) throw Error("detector model: need 0 < f3db <= f_lpf");
  if (!(f_lpf < sample_rate / 2.0)) throw Error("detector model: f_lpf must be below Nyquist");
  if (electronic_f3db < 0.0) throw Error("detector model: electronic_f3db must be non-negative");
  if (filter_taps < 3 || filter_taps % 2 == 0) throw Error("detector model: filter_taps must be odd and >= 3");
}

double DetectorModel::programmed_qcnr_db() const {
  if (sigma_e == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(sigma_q / sigma_e);
}

double DetectorModel::power_response(double f, Component c) const {
  f = std::abs(f);
  if (f > f_lpf) return 0.0;
  const double f3 = component_f3db(*this, c);
  if (shape == ResponseShape::SinglePole) return 1.0 / (1.0 + (f / f3) * (f / f3));
  const double x = f * kTwoPoleRatio / f3;
  const double d = 1.0 + x * x;
  return 1.0 / (d * d);
}

std::vector<double> coloring_taps(const DetectorModel& m, Component c) {
  m.validate();
  const std::size_t L = m.filter_taps;
  const std::size_t n = std::max<std::size_t>(fft::next_pow2(8 * L), 8192);
  const auto& plan = fft::Plan::get(n);
  fft::ComplexBuffer target(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * m.sample_rate / static_cast<double>(n);
    target[k] = std::sqrt(m.power_response(f, c));
  }
  fft::RealBuffer impulse(n);
  plan.inverse(target, impulse);

  std::vector<double> h(L);
  const auto half = static_cast<std::ptrdiff_t>(L / 2);
  for (std::ptrdiff_t i = -half; i <= half; ++i) {
    const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(half + 1)));
    const auto src = static_cast<std::size_t>((i + static_cast<std::ptrdiff_t>(n)) % static_cast<std::ptrdiff_t>(n));
    h[static_cast<std::size_t>(i + half)] = impulse[src] * w;
  }
  const double energy = std::inner_product(h.begin(), h.end(), h.begin(), 0.0);
  for (auto& v : h) v /= std::sqrt(energy);
  return h;
}

NoiseTrace generate_component(const DetectorModel& m, Component c, std::uint64_t start, std::size_t count) {
  m.validate();
  const double sigma = c == Component::Quantum ? m.sigma_q : m.sigma_e;
  const Component parts[] = {c};
  const double sigmas[] = {sigma};
  return make_trace(colored(m, parts, sigmas, start, count), m.sample_rate,
                    c == Component::Quantum ? "quantum" : "electronic");
}

NoiseTrace generate_measured(const DetectorModel& m, std::uint64_t start, std::size_t count) {
  m.validate();
  const Component parts[] = {Component::Quantum, Component::Electronic};
  const double sigmas[] = {m.sigma_q, m.sigma_e};
  return make_trace(colored(m, parts, sigmas, start, count), m.sample_rate, "measured");
}

NoiseTrace generate_electronic(const DetectorModel& m, std::uint64_t start, std::size_t count) {
  return generate_component(m, Component::Electronic, start, count);
}

TracePair generate(const DetectorModel& m, std::size_t count) {
  if (count == 0) throw Error("generate: count must be positive");
  return {generate_measured(m, 0, count), generate_electronic(m, 0, count)};
}

std::int16_t quantize(double v, const AdcConfig& adc) {
  const double delta = adc.bin_width();
  const double top = static_cast<double>(adc.levels() - 1);
  const double idx = std::clamp(std::floor((v + adc.range) / delta), 0.0, top);
  return static_cast<std::int16_t>(static_cast<std::int64_t>(idx) - adc.levels() / 2);
}

DigitizedTrace adc_quantize(const NoiseTrace& trace, const AdcConfig& adc) {
  adc.validate();
  trace.validate();
  DigitizedTrace out;
  out.adc = adc;
  out.sample_rate = trace.sample_rate;
  out.codes.resize(trace.size());
  constexpr std::size_t kBlock = std::size_t{1} << 16;
  const std::size_t blocks = (trace.size() + kBlock - 1) / kBlock;
  std::vector<std::uint64_t> pinned(blocks, 0);
  const auto lo = adc.min_code(), hi = adc.max_code();
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(trace.size(), (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const auto c = quantize(trace.samples[i], adc);
      out.codes[i] = c;
      if (c == lo || c == hi) ++pinned[b];
    }
  });
  out.saturation_count = std::accumulate(pinned.begin(), pinned.end(), std::uint64_t{0});
  return out;
}

namespace {

// Variance a unit-variance component keeps after the bandwidth-matching LPF,
// from the realised coloring and LPF responses.
double lpf_fraction(const DetectorModel& m, Component c, const dsp::FirFilter& lpf) {
  const auto h = coloring_taps(m, c);
  const std::size_t n = 1 << 16;
  const auto& plan = fft::Plan::get(n);
  fft::RealBuffer a(n), b(n);
  for (std::size_t i = 0; i < h.size(); ++i) a[i] = h[i];
  for (std::size_t i = 0; i < lpf.size(); ++i) b[i] = lpf.taps[i];
  fft::ComplexBuffer fa(n / 2 + 1), fb(n / 2 + 1);
  plan.forward(a, fa);
  plan.forward(b, fb);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double wgt = (k == 0 || k == n / 2) ? 1.0 : 2.0;
    num += wgt * std::norm(fa[k]) * std::norm(fb[k]);
    den += wgt * std::norm(fa[k]);
  }
  return num / den;
}

}  // namespace

double lpf_band_qcnr_db(const DetectorModel& m, double f_cut, std::size_t lpf_taps) {
  m.validate();
  if (m.sigma_e == 0.0) return std::numeric_limits<double>::infinity();
  const auto lpf = dsp::design_lowpass(f_cut, m.sample_rate, lpf_taps);
  const double q = m.sigma_q * m.sigma_q * lpf_fraction(m, Component::Quantum, lpf);
  const double e = m.sigma_e * m.sigma_e * lpf_fraction(m, Component::Electronic, lpf);
  return 10.0 * std::log10(q / e);
}

DetectorModel with_lpf_band_qcnr(DetectorModel m, double qcnr_db, double f_cut, std::size_t lpf_taps) {
  m.validate();
  const auto lpf = dsp::design_lowpass(f_cut, m.sample_rate, lpf_taps);
  const double fq = lpf_fraction(m, Component::Quantum, lpf);
  const double fe = lpf_fraction(m, Component::Electronic, lpf);
  m.sigma_e = m.sigma_q * std::sqrt(fq / fe) * std::pow(10.0, -qcnr_db / 20.0);
  return m;
}

}  // namespace vqrng::noisesim
