#include "vqrng/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "vqrng/dsp.hpp"
#include "vqrng/error.hpp"
#include "vqrng/parallel.hpp"

namespace vqrng::entropy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kQuadratureSpan = 10.0;  // integrate over +-10 sigma_E
constexpr int kMaxDepth = 48;

// P(a < Z < b) for Z ~ N(0, 1), accurate in both tails.
double interval_prob(double a, double b) {
  constexpr double r = std::numbers::sqrt2 / 2.0;
  if (a >= 0.0) return 0.5 * (std::erfc(a * r) - std::erfc(b * r));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * r) - std::erfc(-a * r));
  return 1.0 - 0.5 * std::erfc(-a * r) - 0.5 * std::erfc(b * r);
}

// The ADC in units of sigma_Q.
struct Grid {
  double s;      // S / sigma_Q
  double delta;  // bin width / sigma_Q
  std::int64_t bins;

  explicit Grid(const EntropyConfig& cfg)
      : s(cfg.adc.range / cfg.sigma_Q), delta(cfg.adc.bin_width() / cfg.sigma_Q), bins(cfg.adc.levels()) {}

  double lo(std::int64_t i) const { return i == 0 ? -kInf : -s + static_cast<double>(i) * delta; }
  double hi(std::int64_t i) const { return i == bins - 1 ? kInf : -s + static_cast<double>(i + 1) * delta; }
  double prob(double z, std::int64_t i) const { return interval_prob(lo(i) - z, hi(i) - z); }

  std::int64_t containing(double z) const {
    const double k = std::floor((z + s) / delta);
    if (!(k > 0.0)) return 0;
    if (k >= static_cast<double>(bins - 1)) return bins - 1;
    return static_cast<std::int64_t>(k);
  }

  // Interior bins share one width, so among them the one holding z (or a
  // neighbour at a tie) is most likely; the extremes are checked directly.
  double max_prob(double z) const {
    const std::int64_t k = containing(z);
    double best = std::max(prob(z, 0), prob(z, bins - 1));
    for (std::int64_t i = std::max<std::int64_t>(k - 1, 1); i <= std::min(k + 1, bins - 2); ++i)
      best = std::max(best, prob(z, i));
    return best;
  }
};

struct Simpson {
  const Grid& grid;
  double sigma;  // sigma_E / sigma_Q
  bool failed = false;

  double f(double z) const {
    const double u = z / sigma;
    return std::exp(-0.5 * u * u) / (sigma * std::sqrt(2.0 * std::numbers::pi)) * grid.max_prob(z);
  }

  double refine(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double err = left + right - whole;
    if (std::abs(err) <= 15.0 * tol) return left + right + err / 15.0;
    if (depth >= kMaxDepth) {
      failed = true;
      return left + right;
    }
    return refine(a, m, fa, flm, fm, left, tol / 2.0, depth + 1) +
           refine(m, b, fm, frm, fb, right, tol / 2.0, depth + 1);
  }
};

}  // namespace

void EntropyConfig::validate() const {
  adc.validate();
  if (!(sigma_Q > 0.0) || !std::isfinite(sigma_Q)) throw Error("entropy: sigma_Q must be positive");
  if (!(sigma_E >= 0.0) || !std::isfinite(sigma_E)) throw Error("entropy: sigma_E must be non-negative");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("entropy: beta must be positive");
  if (!(tolerance > 0.0) || tolerance > 1e-3) throw Error("entropy: tolerance must be in (0, 1e-3]");
}

double EntropyConfig::qcnr_db() const {
  return sigma_E > 0.0 ? 20.0 * std::log10(sigma_Q / sigma_E) : kInf;
}

void EntropyReport::validate() const {
  if (!(h_worst >= 0.0) || !(h_worst <= h_avg) || !(h_avg <= static_cast<double>(adc.bits) + 1e-12))
    throw Error("entropy report: expected 0 <= h_worst <= h_avg <= bits");
}

double bin_probability(double e, std::int64_t bin, const EntropyConfig& cfg) {
  cfg.validate();
  const Grid grid(cfg);
  if (bin < 0 || bin >= grid.bins) throw Error("entropy: bin index out of range");
  return grid.prob(e / cfg.sigma_Q, bin);
}

double max_bin_probability(double e, const EntropyConfig& cfg) {
  cfg.validate();
  return Grid(cfg).max_prob(e / cfg.sigma_Q);
}

double avg_min_entropy(const EntropyConfig& cfg) {
  cfg.validate();
  const Grid grid(cfg);
  if (cfg.sigma_E == 0.0) return -std::log2(grid.max_prob(0.0));

  const double sigma = cfg.sigma_E / cfg.sigma_Q;
  const double a = -kQuadratureSpan * sigma, b = kQuadratureSpan * sigma;
  std::vector<double> knots{a};
  for (std::int64_t i = 1; i < grid.bins; ++i) {
    const double edge = -grid.s + static_cast<double>(i) * grid.delta;
    if (edge > a && edge < b) knots.push_back(edge);
  }
  knots.push_back(b);

  Simpson simpson{grid, sigma};
  const std::size_t segments = knots.size() - 1;
  std::vector<double> fa(segments), fm(segments), whole(segments);
  double estimate = 0.0;
  for (std::size_t k = 0; k < segments; ++k) {
    const double l = knots[k], r = knots[k + 1];
    fa[k] = simpson.f(l);
    fm[k] = simpson.f(0.5 * (l + r));
    whole[k] = (r - l) / 6.0 * (fa[k] + 4.0 * fm[k] + simpson.f(r));
    estimate += whole[k];
  }
  const double total = b - a;
  double integral = 0.0;
  for (std::size_t k = 0; k < segments; ++k) {
    const double l = knots[k], r = knots[k + 1];
    const double tol = cfg.tolerance * estimate * (r - l) / total;
    integral += simpson.refine(l, r, fa[k], fm[k], simpson.f(r), whole[k], tol, 0);
  }
  if (simpson.failed || !(integral > 0.0)) throw Error("entropy: quadrature did not converge");
  // The +-10 sigma window drops ~1.5e-23 of the Gaussian mass.
  return std::clamp(-std::log2(integral), 0.0, static_cast<double>(cfg.adc.bits));
}

double worst_min_entropy(const EntropyConfig& cfg) {
  cfg.validate();
  const Grid grid(cfg);
  const double h_avg = avg_min_entropy(cfg);
  if (cfg.sigma_E == 0.0) return h_avg;

  const double bound = cfg.beta * cfg.sigma_E / cfg.sigma_Q;
  double best = std::max(grid.max_prob(-bound), grid.max_prob(bound));
  for (const double t : {-grid.s + grid.delta, grid.s - grid.delta})
    if (std::abs(t) <= bound) best = std::max(best, grid.max_prob(t));
  for (std::int64_t i = 1; i + 1 < grid.bins; ++i) {
    const double center = -grid.s + (static_cast<double>(i) + 0.5) * grid.delta;
    if (std::abs(center) <= bound) best = std::max(best, grid.max_prob(center));
  }
  return std::min(-std::log2(best), h_avg);
}

EntropyReport evaluate(const EntropyConfig& cfg, double sample_rate) {
  EntropyReport r;
  r.h_avg = avg_min_entropy(cfg);
  r.h_worst = worst_min_entropy(cfg);
  r.adc = cfg.adc;
  r.sigma_Q = cfg.sigma_Q;
  r.sigma_E = cfg.sigma_E;
  r.qcnr = cfg.qcnr_db();
  r.beta = cfg.beta;
  if (sample_rate > 0.0) {
    r.sample_rate = sample_rate;
    r.rate_avg = extractable_rate(r.h_avg, sample_rate);
    r.rate_worst = extractable_rate(r.h_worst, sample_rate);
  }
  return r;
}

double extractable_rate(double h, double sample_rate) {
  if (!(h >= 0.0)) throw Error("entropy must be non-negative");
  if (!(sample_rate >= 0.0)) throw Error("sample rate must be non-negative");
  return h * sample_rate;
}

std::vector<SweepPoint> sweep_range(double sigma_Q, double sigma_E, int bits, std::span<const double> ratios,
                                    const SweepOptions& opt) {
  if (ratios.empty()) throw Error("sweep: empty ratio list");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] > 0.0)) throw Error("sweep: ratios must be positive");
    if (i > 0 && !(ratios[i] > ratios[i - 1])) throw Error("sweep: ratios must be ascending");
  }
  std::vector<SweepPoint> curve(ratios.size());
  parallel_for(ratios.size(), [&](std::size_t i) {
    EntropyConfig cfg{sigma_Q, sigma_E, AdcConfig{bits, ratios[i] * sigma_Q}, opt.beta, opt.tolerance};
    curve[i] = {ratios[i], avg_min_entropy(cfg), worst_min_entropy(cfg)};
  });
  return curve;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& curve) {
  CsvTable t;
  t.columns = {"ratio", "h_avg", "h_worst"};
  for (const auto& p : curve) t.rows.push_back({p.ratio, p.h_avg, p.h_worst});
  write_csv(path, t);
}

std::vector<SweepPoint> read_sweep_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  if (t.columns.size() != 3) throw Error("sweep csv: expected 3 columns");
  std::vector<SweepPoint> curve;
  for (const auto& row : t.rows) curve.push_back({row[0], row[1], row[2]});
  return curve;
}

std::vector<double> ratio_grid(double lo, double hi, double step) {
  if (!(lo > 0.0) || !(hi >= lo) || !(step > 0.0)) throw Error("ratio grid: need 0 < lo <= hi, step > 0");
  std::vector<double> grid;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) grid.push_back(lo + static_cast<double>(i) * step);
  return grid;
}

bool is_unimodal(std::span<const double> values) {
  bool falling = false;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[i - 1]) falling = true;
    else if (values[i] > values[i - 1] && falling) return false;
  }
  return true;
}

Optimum optimal_range(double sigma_Q, double sigma_E, int bits, Objective objective, std::span<const double> grid,
                      const SweepOptions& opt) {
  const auto curve = sweep_range(sigma_Q, sigma_E, bits, grid, opt);
  std::vector<double> values;
  for (const auto& p : curve) values.push_back(objective == Objective::Average ? p.h_avg : p.h_worst);
  const auto best = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());

  Optimum o;
  o.objective = objective;
  o.ratio = grid[best];
  o.entropy = values[best];
  o.unimodal = is_unimodal(values);
  if (o.unimodal && grid.size() > 1) {
    auto h = [&](double ratio) {
      EntropyConfig cfg{sigma_Q, sigma_E, AdcConfig{bits, ratio * sigma_Q}, opt.beta, opt.tolerance};
      return objective == Objective::Average ? avg_min_entropy(cfg) : worst_min_entropy(cfg);
    };
    double a = grid[best > 0 ? best - 1 : 0];
    double b = grid[std::min(best + 1, grid.size() - 1)];
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double h1 = h(x1), h2 = h(x2);
    while (b - a > 1e-3) {
      if (h1 >= h2) {
        b = x2;
        x2 = x1;
        h2 = h1;
        x1 = b - g * (b - a);
        h1 = h(x1);
      } else {
        a = x1;
        x1 = x2;
        h1 = h2;
        x2 = a + g * (b - a);
        h2 = h(x2);
      }
    }
    const double x = 0.5 * (a + b);
    const double hx = h(x);
    // Only move off the grid point for a strict improvement, so flat
    // objectives keep the smallest maximising ratio.
    if (hx > o.entropy) {
      o.ratio = x;
      o.entropy = hx;
    }
  }
  o.range = o.ratio * sigma_Q;
  return o;
}

Optimum optimal_range(double sigma_Q, double sigma_E, int bits, Objective objective, const SweepOptions& opt) {
  const auto grid = ratio_grid();
  return optimal_range(sigma_Q, sigma_E, bits, objective, grid, opt);
}

namespace {

std::pair<std::vector<double>, double> samples_of(const AnyTrace& t) {
  if (const auto* a = std::get_if<NoiseTrace>(&t)) {
    a->validate();
    return {a->samples, a->sample_rate};
  }
  const auto& d = std::get<DigitizedTrace>(t);
  d.validate();
  return {d.dequantize(), d.sample_rate};
}

}  // namespace

SigmaEstimate estimate_sigmas(const AnyTrace& measured, const AnyTrace& electronic) {
  const auto [m, fm] = samples_of(measured);
  const auto [e, fe] = samples_of(electronic);
  if (fm != fe) throw Error("estimate_sigmas: sample rates differ");
  SigmaEstimate s;
  s.sigma_M = std::sqrt(dsp::variance(m));
  s.sigma_E = std::sqrt(dsp::variance(e));
  if (!(s.sigma_E < s.sigma_M)) throw Error("estimate_sigmas: electronic noise is not below measured noise");
  s.sigma_Q = std::sqrt(s.sigma_M * s.sigma_M - s.sigma_E * s.sigma_E);
  return s;
}

}  // namespace vqrng::entropy
