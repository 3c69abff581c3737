#include "vqrng/rndtest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>
#include "json.hpp"

#include "fft.hpp"
#include "vqrng/error.hpp"
#include "vqrng/parallel.hpp"

namespace vqrng::rndtest {

namespace {

double igamc(double a, double x) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(a, x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void require_len(const std::vector<std::uint8_t>& bits, std::size_t n, const char* test) {
  if (bits.size() < n) throw Error(std::string(test) + ": sequence too short");
}

// Counts of every overlapping m-bit pattern, sequence wrapped around.
std::vector<std::uint32_t> pattern_counts(const std::vector<std::uint8_t>& bits, unsigned m) {
  std::vector<std::uint32_t> counts(std::size_t{1} << m, 0);
  if (m == 0) {
    counts[0] = static_cast<std::uint32_t>(bits.size());
    return counts;
  }
  const std::size_t n = bits.size();
  const std::uint32_t mask = (std::uint32_t{1} << m) - 1;
  std::uint32_t v = 0;
  for (unsigned i = 0; i + 1 < m; ++i) v = (v << 1) | bits[i];
  for (std::size_t i = m - 1; i < n + m - 1; ++i) {
    v = ((v << 1) | bits[i % n]) & mask;
    ++counts[v];
  }
  return counts;
}

double psi_sq(const std::vector<std::uint8_t>& bits, unsigned m) {
  if (m == 0) return 0.0;
  const auto counts = pattern_counts(bits, m);
  double sum = 0.0;
  for (auto c : counts) sum += static_cast<double>(c) * static_cast<double>(c);
  const double n = static_cast<double>(bits.size());
  return std::ldexp(sum, static_cast<int>(m)) / n - n;
}

struct TestDef {
  std::vector<std::string> names;
  std::size_t min_len;
  std::function<std::vector<double>(const std::vector<std::uint8_t>&)> run;
};

std::vector<TestDef> battery() {
  return {
      {{"Frequency"}, 100, [](const auto& b) { return std::vector{frequency(b)}; }},
      {{"BlockFrequency"}, 128, [](const auto& b) { return std::vector{block_frequency(b)}; }},
      {{"CumulativeSums (forward)", "CumulativeSums (reverse)"}, 100,
       [](const auto& b) { return std::vector{cusum(b, false), cusum(b, true)}; }},
      {{"Runs"}, 100, [](const auto& b) { return std::vector{runs(b)}; }},
      {{"LongestRun"}, 128, [](const auto& b) { return std::vector{longest_run(b)}; }},
      {{"FFT"}, 1000, [](const auto& b) { return std::vector{dft(b)}; }},
      // NIST length conditions: m < floor(log2 n) - 5 (ApEn), m < floor(log2 n) - 2 (serial).
      {{"ApproximateEntropy"}, std::size_t{1} << 16, [](const auto& b) { return std::vector{approximate_entropy(b)}; }},
      {{"Serial (1)", "Serial (2)"}, std::size_t{1} << 19,
       [](const auto& b) {
         const auto [p1, p2] = serial(b);
         return std::vector{p1, p2};
       }},
  };
}

}  // namespace

double frequency(const std::vector<std::uint8_t>& bits) {
  require_len(bits, 1, "frequency");
  long long s = 0;
  for (auto b : bits) s += b ? 1 : -1;
  const double n = static_cast<double>(bits.size());
  return std::erfc(std::abs(static_cast<double>(s)) / std::sqrt(2.0 * n));
}

double block_frequency(const std::vector<std::uint8_t>& bits, std::size_t block_len) {
  if (block_len == 0) throw Error("block_frequency: block length must be positive");
  const std::size_t blocks = bits.size() / block_len;
  if (blocks == 0) throw Error("block_frequency: sequence too short");
  double chi2 = 0.0;
  for (std::size_t i = 0; i < blocks; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < block_len; ++j) ones += bits[i * block_len + j];
    const double pi = static_cast<double>(ones) / static_cast<double>(block_len) - 0.5;
    chi2 += pi * pi;
  }
  chi2 *= 4.0 * static_cast<double>(block_len);
  return igamc(static_cast<double>(blocks) / 2.0, chi2 / 2.0);
}

double runs(const std::vector<std::uint8_t>& bits) {
  require_len(bits, 2, "runs");
  const double n = static_cast<double>(bits.size());
  const double pi = static_cast<double>(std::count(bits.begin(), bits.end(), 1)) / n;
  if (std::abs(pi - 0.5) >= 2.0 / std::sqrt(n)) return 0.0;
  std::size_t v = 1;
  for (std::size_t i = 1; i < bits.size(); ++i) v += bits[i] != bits[i - 1];
  const double num = std::abs(static_cast<double>(v) - 2.0 * n * pi * (1.0 - pi));
  return std::erfc(num / (2.0 * std::sqrt(2.0 * n) * pi * (1.0 - pi)));
}

double longest_run(const std::vector<std::uint8_t>& bits) {
  require_len(bits, 128, "longest_run");
  const std::size_t n = bits.size();
  std::size_t m;
  unsigned lo;
  std::vector<double> pi;
  if (n < 6272) {
    m = 8, lo = 1, pi = {0.2148, 0.3672, 0.2305, 0.1875};
  } else if (n < 750000) {
    m = 128, lo = 4, pi = {0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124};
  } else {
    m = 10000, lo = 10, pi = {0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727};
  }
  const std::size_t blocks = n / m;
  std::vector<double> v(pi.size(), 0.0);
  for (std::size_t i = 0; i < blocks; ++i) {
    unsigned run = 0, best = 0;
    for (std::size_t j = 0; j < m; ++j) {
      run = bits[i * m + j] ? run + 1 : 0;
      best = std::max(best, run);
    }
    const auto cls = std::clamp<long>(static_cast<long>(best) - static_cast<long>(lo), 0,
                                      static_cast<long>(pi.size()) - 1);
    v[static_cast<std::size_t>(cls)] += 1.0;
  }
  double chi2 = 0.0;
  const double nb = static_cast<double>(blocks);
  for (std::size_t i = 0; i < pi.size(); ++i) chi2 += (v[i] - nb * pi[i]) * (v[i] - nb * pi[i]) / (nb * pi[i]);
  return igamc(static_cast<double>(pi.size() - 1) / 2.0, chi2 / 2.0);
}

double dft(const std::vector<std::uint8_t>& bits) {
  require_len(bits, 2, "dft");
  const std::size_t n = bits.size();
  const auto& plan = fft::Plan::get(n);
  fft::RealBuffer x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = bits[i] ? 1.0 : -1.0;
  fft::ComplexBuffer s(n / 2 + 1);
  plan.forward(x, s);
  const double nd = static_cast<double>(n);
  const double threshold = std::sqrt(std::log(1.0 / 0.05) * nd);
  std::size_t below = 0;
  for (std::size_t j = 0; j < n / 2; ++j) below += std::abs(s[j]) < threshold;
  const double expected = 0.95 * nd / 2.0;
  const double d = (static_cast<double>(below) - expected) / std::sqrt(nd * 0.95 * 0.05 / 4.0);
  return std::erfc(std::abs(d) / std::numbers::sqrt2);
}

double cusum(const std::vector<std::uint8_t>& bits, bool reverse) {
  require_len(bits, 1, "cusum");
  const long long n = static_cast<long long>(bits.size());
  long long s = 0, z = 0;
  for (long long i = 0; i < n; ++i) {
    s += bits[static_cast<std::size_t>(reverse ? n - 1 - i : i)] ? 1 : -1;
    z = std::max(z, std::abs(s));
  }
  if (z == 0) return 1.0;
  const double sq = std::sqrt(static_cast<double>(n));
  const double zd = static_cast<double>(z);
  double sum1 = 0.0, sum2 = 0.0;
  for (long long k = (-n / z + 1) / 4; k <= (n / z - 1) / 4; ++k)
    sum1 += normal_cdf(static_cast<double>(4 * k + 1) * zd / sq) - normal_cdf(static_cast<double>(4 * k - 1) * zd / sq);
  for (long long k = (-n / z - 3) / 4; k <= (n / z - 1) / 4; ++k)
    sum2 += normal_cdf(static_cast<double>(4 * k + 3) * zd / sq) - normal_cdf(static_cast<double>(4 * k + 1) * zd / sq);
  return std::clamp(1.0 - sum1 + sum2, 0.0, 1.0);
}

std::pair<double, double> serial(const std::vector<std::uint8_t>& bits, unsigned m) {
  if (m < 3 || m > 24) throw Error("serial: m must be in [3, 24]");
  if (bits.size() < m) throw Error("serial: sequence too short");
  const double p0 = psi_sq(bits, m), p1 = psi_sq(bits, m - 1), p2 = psi_sq(bits, m - 2);
  const double d1 = p0 - p1, d2 = p0 - 2.0 * p1 + p2;
  return {igamc(std::ldexp(1.0, static_cast<int>(m) - 2), d1 / 2.0),
          igamc(std::ldexp(1.0, static_cast<int>(m) - 3), d2 / 2.0)};
}

double approximate_entropy(const std::vector<std::uint8_t>& bits, unsigned m) {
  if (m < 1 || m > 24) throw Error("approximate_entropy: m must be in [1, 24]");
  if (bits.size() < m + 1) throw Error("approximate_entropy: sequence too short");
  const double n = static_cast<double>(bits.size());
  auto phi = [&](unsigned k) {
    double sum = 0.0;
    for (auto c : pattern_counts(bits, k))
      if (c > 0) {
        const double p = static_cast<double>(c) / n;
        sum += p * std::log(p);
      }
    return sum;
  };
  const double apen = phi(m) - phi(m + 1);
  const double chi2 = 2.0 * n * (std::numbers::ln2 - apen);
  return igamc(std::ldexp(1.0, static_cast<int>(m) - 1), chi2 / 2.0);
}

std::vector<std::uint8_t> unpack(const BitStream& bits, std::size_t begin, std::size_t count) {
  if (begin + count > bits.size()) throw Error("unpack: range exceeds the bit stream");
  std::vector<std::uint8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = bits.get(begin + i);
  return out;
}

double monobit_p(const BitStream& bits) {
  if (bits.size() < 100) throw Error("monobit: needs at least 100 bits");
  const double n = static_cast<double>(bits.size());
  const double s = 2.0 * static_cast<double>(bits.count_ones()) - n;
  return std::erfc(std::abs(s) / std::sqrt(2.0 * n));
}

bool TestReport::all_passed() const {
  return !results.empty() && std::all_of(results.begin(), results.end(), [](const auto& r) { return r.proportion_ok; });
}

std::string TestReport::to_json() const {
  nlohmann::ordered_json j;
  j["alpha"] = alpha;
  j["sequence_len"] = sequence_len;
  j["sequences"] = sequences;
  j["proportion_band"] = {band_low, band_high};
  j["all_passed"] = all_passed();
  auto& tests = j["tests"] = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    tests.push_back({{"name", r.name},
                     {"passed", r.passed},
                     {"proportion", r.proportion},
                     {"proportion_ok", r.proportion_ok},
                     {"uniformity_p", r.uniformity_p},
                     {"p_values", r.p_values}});
  }
  j["skipped"] = skipped;
  return j.dump(2) + "\n";
}

std::string TestReport::to_text() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%zu sequences of %zu bits, alpha = %g, proportion band [%.4f, %.4f]\n",
                sequences, sequence_len, alpha, band_low, band_high);
  out += line;
  std::snprintf(line, sizeof line, "%-26s %10s %12s %12s  %s\n", "test", "passed", "proportion", "uniformity", "result");
  out += line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-26s %5zu/%-4zu %12.4f %12.6f  %s\n", r.name.c_str(), r.passed,
                  r.p_values.size(), r.proportion, r.uniformity_p, r.proportion_ok ? "PASS" : "FAIL");
    out += line;
  }
  for (const auto& s : skipped) out += "skipped: " + s + " (sequence too short)\n";
  return out;
}

TestReport run_battery(const BitStream& bits, std::size_t sequence_len, double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw Error("test: alpha must be in (0, 1)");
  if (sequence_len < 100) throw Error("test: sequence length must be at least 100 bits");
  if (bits.size() < sequence_len) throw Error("test: fewer bits than one sequence");

  TestReport report;
  report.alpha = alpha;
  report.sequence_len = sequence_len;
  report.sequences = bits.size() / sequence_len;
  const double p = 1.0 - alpha;
  const double half = 3.0 * std::sqrt(p * alpha / static_cast<double>(report.sequences));
  report.band_low = p - half;
  report.band_high = p + half;

  std::vector<TestDef> active;
  for (auto& t : battery()) {
    if (sequence_len >= t.min_len) active.push_back(std::move(t));
    else report.skipped.insert(report.skipped.end(), t.names.begin(), t.names.end());
  }
  if (active.empty()) throw Error("test: too few bits for any configured test");

  std::vector<std::vector<double>> per_seq(report.sequences);
  parallel_for(report.sequences, [&](std::size_t s) {
    const auto seq = unpack(bits, s * sequence_len, sequence_len);
    for (const auto& t : active) {
      const auto ps = t.run(seq);
      per_seq[s].insert(per_seq[s].end(), ps.begin(), ps.end());
    }
  });

  std::size_t col = 0;
  for (const auto& t : active) {
    for (const auto& name : t.names) {
      TestResult r;
      r.name = name;
      std::array<double, 10> bins{};
      for (const auto& row : per_seq) {
        const double pv = row[col];
        if (!(pv >= 0.0 && pv <= 1.0)) throw Error("test: p-value outside [0, 1] in " + name);
        r.p_values.push_back(pv);
        r.passed += pv >= alpha;
        bins[std::min<std::size_t>(static_cast<std::size_t>(pv * 10.0), 9)] += 1.0;
      }
      const double s = static_cast<double>(report.sequences);
      r.proportion = static_cast<double>(r.passed) / s;
      r.proportion_ok = r.proportion >= report.band_low && r.proportion <= report.band_high;
      double chi2 = 0.0;
      for (double b : bins) chi2 += (b - s / 10.0) * (b - s / 10.0) / (s / 10.0);
      r.uniformity_p = igamc(4.5, chi2 / 2.0);
      report.results.push_back(std::move(r));
      ++col;
    }
  }
  return report;
}

}  // namespace vqrng::rndtest
