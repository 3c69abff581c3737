#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vqrng/sigio.hpp"

namespace vqrng::rndtest {

// Single-sequence statistics. Bits are 0/1 bytes.
double frequency(const std::vector<std::uint8_t>& bits);
double block_frequency(const std::vector<std::uint8_t>& bits, std::size_t block_len = 128);
double runs(const std::vector<std::uint8_t>& bits);  // 0 when the frequency prerequisite fails
double longest_run(const std::vector<std::uint8_t>& bits);
double dft(const std::vector<std::uint8_t>& bits);
double cusum(const std::vector<std::uint8_t>& bits, bool reverse);
std::pair<double, double> serial(const std::vector<std::uint8_t>& bits, unsigned m = 16);
double approximate_entropy(const std::vector<std::uint8_t>& bits, unsigned m = 10);

// erfc(|S_n| / sqrt(2n)); needs at least 100 bits.
double monobit_p(const BitStream& bits);

std::vector<std::uint8_t> unpack(const BitStream& bits, std::size_t begin, std::size_t count);

struct TestResult {
  std::string name;
  std::vector<double> p_values;  // one per sequence
  std::size_t passed = 0;
  double proportion = 0.0;
  double uniformity_p = 0.0;  // chi^2 over 10 p-value bins
  bool proportion_ok = false;
};

struct TestReport {
  double alpha = 0.01;
  std::size_t sequence_len = 0;
  std::size_t sequences = 0;
  double band_low = 0.0, band_high = 0.0;  // (1-alpha) +- 3 sigma
  std::vector<TestResult> results;
  std::vector<std::string> skipped;  // tests whose length requirement failed

  bool all_passed() const;
  std::string to_json() const;
  std::string to_text() const;
};

// Splits `bits` into floor(len / sequence_len) sequences and runs every test
// on each. Tests needing longer sequences are skipped and listed.
TestReport run_battery(const BitStream& bits, std::size_t sequence_len = 1000000, double alpha = 0.01);

}  // namespace vqrng::rndtest
