#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vqrng/sigio.hpp"

namespace vqrng::entropy {

struct EntropyConfig {
  double sigma_Q = 0.0393;  // volts
  double sigma_E = 0.0;     // volts
  AdcConfig adc;
  double beta = 5.0;  // worst case: |e| <= beta * sigma_E
  double tolerance = 1e-8;

  void validate() const;
  double qcnr_db() const;  // 20 log10(sigma_Q / sigma_E)
};

struct EntropyReport {
  double h_avg = 0.0;    // bits/sample
  double h_worst = 0.0;  // bits/sample
  AdcConfig adc;
  double sigma_Q = 0.0, sigma_E = 0.0;
  double qcnr = 0.0;  // dB
  double beta = 0.0;
  double sample_rate = 0.0;
  double rate_avg = 0.0, rate_worst = 0.0;  // bit/s; 0 without a sample rate

  void validate() const;
};

// P(M = bin | E = e) for the saturating ADC, bin in [0, 2^bits).
double bin_probability(double e, std::int64_t bin, const EntropyConfig& cfg);

// max_i P(M = i | E = e).
double max_bin_probability(double e, const EntropyConfig& cfg);

// -log2 E_e[max_i P(i|e)], e ~ N(0, sigma_E^2), adaptive Simpson over
// +-10 sigma_E split at every bin edge. Throws when the quadrature cannot
// reach the requested relative tolerance.
double avg_min_entropy(const EntropyConfig& cfg);

// -log2 max_{|e| <= beta sigma_E} max_i P(i|e), capped at avg_min_entropy.
double worst_min_entropy(const EntropyConfig& cfg);

EntropyReport evaluate(const EntropyConfig& cfg, double sample_rate = 0.0);

double extractable_rate(double h, double sample_rate);

struct SweepPoint {
  double ratio = 0.0;  // S / sigma_Q
  double h_avg = 0.0;
  double h_worst = 0.0;
};

struct SweepOptions {
  double beta = 5.0;
  double tolerance = 1e-8;
};

// Entropies with S = ratio * sigma_Q for each ratio (evaluated in parallel,
// returned in input order).
std::vector<SweepPoint> sweep_range(double sigma_Q, double sigma_E, int bits, std::span<const double> ratios,
                                    const SweepOptions& opt = {});
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& curve);
std::vector<SweepPoint> read_sweep_csv(const std::filesystem::path& path);

// Evenly spaced ratio grid [lo, hi] with the given step.
std::vector<double> ratio_grid(double lo = 0.5, double hi = 10.0, double step = 0.05);

// True when the sequence never rises again after it has fallen.
bool is_unimodal(std::span<const double> values);

enum class Objective { Average, Worst };

struct Optimum {
  Objective objective = Objective::Average;
  double ratio = 0.0;    // S / sigma_Q
  double range = 0.0;    // S, volts
  double entropy = 0.0;  // bits/sample
  bool unimodal = true;  // false: grid argmax returned without refinement
};

// Grid argmax refined by golden-section search to 1e-3 in the ratio. Ties go
// to the smallest ratio.
Optimum optimal_range(double sigma_Q, double sigma_E, int bits, Objective objective,
                      std::span<const double> grid, const SweepOptions& opt = {});
Optimum optimal_range(double sigma_Q, double sigma_E, int bits, Objective objective, const SweepOptions& opt = {});

struct SigmaEstimate {
  double sigma_M = 0.0, sigma_E = 0.0, sigma_Q = 0.0;
};

// Sample standard deviations; digitized traces are mapped to bin centers.
SigmaEstimate estimate_sigmas(const AnyTrace& measured, const AnyTrace& electronic);

}  // namespace vqrng::entropy
