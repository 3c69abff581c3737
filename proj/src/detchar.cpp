#include "vqrng/detchar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "vqrng/dsp.hpp"
#include "vqrng/error.hpp"

namespace vqrng::detchar {

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(std::string(what) + " must be finite");
}

double median_of(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  return 0.5 * (upper + *std::max_element(v.begin(), mid));
}

std::vector<double> moving_median(const std::vector<double>& x, std::size_t window) {
  const std::size_t half = window / 2;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(x.size(), i + half + 1);
    out[i] = median_of(std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(lo),
                                           x.begin() + static_cast<std::ptrdiff_t>(hi)));
  }
  return out;
}

double mean_in_band(const Spectrum& spec, const std::vector<double>& power, Band band) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec.frequencies[i] >= band.first && spec.frequencies[i] <= band.second) {
      sum += power[i];
      ++n;
    }
  }
  if (n == 0) throw Error("spectrum has no bins in the reference band");
  return sum / static_cast<double>(n);
}

}  // namespace

double dbm_to_density(double p_dbm, double rbw, double impedance) {
  require_finite(p_dbm, "power");
  if (!(rbw > 0.0)) throw Error("rbw must be positive");
  if (!(impedance > 0.0)) throw Error("impedance must be positive");
  return std::sqrt(std::pow(10.0, p_dbm / 10.0) * 1e-3 * impedance / rbw);
}

double density_to_dbm(double u, double rbw, double impedance) {
  if (!(u > 0.0)) throw Error("density must be positive");
  if (!(rbw > 0.0)) throw Error("rbw must be positive");
  if (!(impedance > 0.0)) throw Error("impedance must be positive");
  return 10.0 * std::log10(u * u * rbw / (impedance * 1e-3));
}

double shot_current_density(double photocurrent) {
  if (!(photocurrent >= 0.0)) throw Error("photocurrent must be non-negative");
  require_finite(photocurrent, "photocurrent");
  return std::sqrt(2.0 * kElectronCharge * (2.0 * photocurrent));
}

double equivalent_transimpedance(double u_m, double u_e, double i_q) {
  if (!(u_e >= 0.0)) throw Error("electronic noise density must be non-negative");
  if (u_m < u_e) throw Error("electronic noise exceeds measured noise");
  if (!(i_q > 0.0)) throw Error("shot noise current density must be positive");
  if (u_e == 0.0) return u_m / i_q;
  return std::sqrt(u_m * u_m - u_e * u_e) / i_q;
}

double qcnr_from_variances(double var_q, double var_e) {
  if (!(var_q > 0.0) || !(var_e > 0.0)) throw Error("variances must be positive");
  return 10.0 * std::log10(var_q / var_e);
}

double qcnr_from_densities(double u_m, double u_e) {
  if (!(u_e > 0.0)) throw Error("electronic noise density must be positive");
  if (!(u_m > u_e)) throw Error("electronic noise exceeds measured noise");
  return qcnr_from_variances(u_m * u_m - u_e * u_e, u_e * u_e);
}

double qcnr_from_traces(const NoiseTrace& measured, const NoiseTrace& electronic, double f_cut,
                        std::size_t lpf_taps) {
  measured.validate();
  electronic.validate();
  if (measured.sample_rate != electronic.sample_rate) throw Error("qcnr: sample rates differ");
  if (!(f_cut > 0.0) || f_cut >= measured.sample_rate / 2.0) throw Error("qcnr: f_cut must be below Nyquist");
  const auto lpf = dsp::design_lowpass(f_cut, measured.sample_rate, lpf_taps);
  const double var_m = dsp::variance(dsp::apply_fir(measured.samples, lpf));
  const double var_e = dsp::variance(dsp::apply_fir(electronic.samples, lpf));
  const double var_q = var_m - var_e;
  if (!(var_q > 0.0)) throw Error("qcnr: quantum variance is not positive");
  return qcnr_from_variances(var_q, var_e);
}

double nep(double equiv_electronic_current, double responsivity) {
  if (!(responsivity > 0.0)) throw Error("responsivity must be positive");
  return shot_current_density(equiv_electronic_current) / responsivity;
}

double equivalent_electronic_current(double u_e, double r_f) {
  if (!(r_f > 0.0)) throw Error("transimpedance must be positive");
  if (!(u_e >= 0.0)) throw Error("electronic noise density must be non-negative");
  const double i_e = u_e / r_f;
  return i_e * i_e / (4.0 * kElectronCharge);
}

double bandwidth_3db(const Spectrum& spec, Band reference_band) {
  spec.validate();
  const auto power = moving_median(spec.linear_power(), 51);
  const double threshold = mean_in_band(spec, power, reference_band) * std::pow(10.0, -0.3);
  std::size_t i = 0;
  while (i < spec.size() && spec.frequencies[i] <= reference_band.second) ++i;
  for (; i < spec.size(); ++i) {
    if (power[i] < threshold) {
      if (i == 0) return spec.frequencies[0];
      const double f0 = spec.frequencies[i - 1], f1 = spec.frequencies[i];
      const double p0 = power[i - 1], p1 = power[i];
      return f0 + (f1 - f0) * (p0 - threshold) / (p0 - p1);
    }
  }
  throw Error("no 3 dB point");
}

double cmrr_from_spectra(const Spectrum& balanced, const Spectrum& unbalanced, double f_mod) {
  balanced.validate();
  unbalanced.validate();
  auto peak = [f_mod](const Spectrum& s) {
    if (f_mod < s.frequencies.front() || f_mod > s.frequencies.back())
      throw Error("cmrr: modulation frequency outside the spectrum");
    const double half = 3.0 * s.rbw;
    const auto p = s.linear_power();
    double best = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (std::abs(s.frequencies[i] - f_mod) <= half) best = std::max(best, p[i]);
    if (best == 0.0) best = s.value_at(f_mod);
    if (!(best > 0.0)) throw Error("cmrr: no power near the modulation frequency");
    return best;
  };
  return 10.0 * std::log10(peak(unbalanced) / peak(balanced));
}

double density_in_band(const Spectrum& spec, Band band, double impedance) {
  spec.validate();
  const auto power = spec.linear_power();
  const double mean = mean_in_band(spec, power, band);
  if (spec.unit == SpectrumUnit::V2PerHz) return std::sqrt(mean);
  return dbm_to_density(10.0 * std::log10(mean), spec.rbw, impedance);
}

void DetectorReport::validate() const {
  for (double v : {u_M, u_E, u_Q, i_Q, i_E, I_Q, I_E, R_F, nep, f_3dB, responsivity})
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error("detector report: negative or non-finite field");
  if (u_M < u_E) throw Error("detector report: u_M < u_E");
}

DetectorReport characterize(const Spectrum& measured, const Spectrum& electronic, const CharacterizeOptions& opt) {
  DetectorReport r;
  r.u_M = density_in_band(measured, opt.reference_band, opt.impedance);
  r.u_E = density_in_band(electronic, opt.reference_band, opt.impedance);
  if (r.u_M < r.u_E) throw Error("electronic noise exceeds measured noise");
  r.u_Q = std::sqrt(r.u_M * r.u_M - r.u_E * r.u_E);
  r.I_Q = opt.photocurrent;
  r.i_Q = shot_current_density(opt.photocurrent);
  r.R_F = equivalent_transimpedance(r.u_M, r.u_E, r.i_Q);
  r.i_E = r.R_F > 0.0 ? r.u_E / r.R_F : 0.0;
  r.I_E = r.R_F > 0.0 ? equivalent_electronic_current(r.u_E, r.R_F) : 0.0;
  r.responsivity = opt.responsivity;
  r.nep = nep(r.I_E, opt.responsivity);
  r.qcnr = r.u_E > 0.0 ? qcnr_from_densities(r.u_M, r.u_E) : std::numeric_limits<double>::infinity();
  r.f_3dB = bandwidth_3db(measured, opt.reference_band);
  return r;
}

DetectorReport characterize(const NoiseTrace& measured, const NoiseTrace& electronic, double f_cut,
                            const CharacterizeOptions& opt) {
  auto r = characterize(dsp::welch_psd(measured), dsp::welch_psd(electronic), opt);
  r.qcnr = qcnr_from_traces(measured, electronic, f_cut);
  return r;
}

}  // namespace vqrng::detchar
