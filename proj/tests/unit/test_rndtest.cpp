#include <cmath>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "vqrng/error.hpp"
#include "vqrng/philox.hpp"
#include "vqrng/rndtest.hpp"

using namespace vqrng;
using namespace vqrng::rndtest;
using doctest::Approx;

namespace {

// First 100 binary digits of pi (SP 800-22 worked examples).
const std::string kPi =
    "1100100100001111110110101010001000100001011010001100001000110100110001001100011001100010100010111000";

std::vector<std::uint8_t> bits(const std::string& s) {
  std::vector<std::uint8_t> v;
  for (char c : s) v.push_back(c == '1');
  return v;
}

BitStream random_stream(std::uint64_t seed, std::size_t n) {
  PhiloxStream rng(seed);
  BitStream b;
  for (std::size_t i = 0; i < n; i += 64) b.append_bits(rng.next_u64(), 64);
  return b.slice(0, n);
}

}  // namespace

// Reference p-values from an independent scipy implementation of the same
// statistics.
TEST_CASE("frequency") {
  CHECK(frequency(bits(kPi)) == Approx(0.109598583).epsilon(1e-8));
  CHECK(frequency(bits("1011010101")) == Approx(0.527089).epsilon(1e-6));
  CHECK(monobit_p(BitStream::from_string(kPi)) == Approx(0.109599).epsilon(1e-6 / 0.109599));
  std::string balanced;
  for (int i = 0; i < 50; ++i) balanced += "01";
  CHECK(monobit_p(BitStream::from_string(balanced)) == 1.0);
  CHECK(monobit_p(BitStream::from_string(std::string(100, '1'))) == Approx(std::erfc(10 / std::sqrt(2.0))));
  CHECK_THROWS_AS(monobit_p(BitStream::from_string(std::string(99, '1'))), Error);
}

TEST_CASE("block frequency") {
  CHECK(block_frequency(bits("0110011010"), 3) == Approx(0.801252).epsilon(1e-6));
  CHECK(block_frequency(bits(kPi), 10) == Approx(0.706438).epsilon(1e-6));
}

TEST_CASE("runs") {
  CHECK(runs(bits("1001101011")) == Approx(0.147232).epsilon(1e-6));
  CHECK(runs(bits(kPi)) == Approx(0.500798).epsilon(1e-6));
}

TEST_CASE("longest run of ones") {
  const std::string ex =
      "11001100000101010110110001001100111000000000001001001101010100010001001111010110100000001101011111001100111001"
      "101101100010110010";
  CHECK(longest_run(bits(ex)) == Approx(0.180598).epsilon(1e-5));
}

TEST_CASE("discrete fourier transform") {
  // numpy oracle; the printed worked example for this input counts 4 peaks
  // below threshold where its own magnitudes give 5.
  CHECK(dft(bits("1001010011")) == Approx(0.4681599).epsilon(1e-6));
  CHECK(dft(bits(kPi)) == Approx(0.6463552).epsilon(1e-6));
}

TEST_CASE("cumulative sums") {
  CHECK(cusum(bits("1011010111"), false) == Approx(0.411659).epsilon(1e-6));
  CHECK(cusum(bits(kPi), false) == Approx(0.219194).epsilon(1e-6));
  CHECK(cusum(bits(kPi), true) == Approx(0.114866).epsilon(1e-6));
}

TEST_CASE("serial") {
  const auto [p1, p2] = serial(bits("0011011101"), 3);
  CHECK(p1 == Approx(0.808792).epsilon(1e-6));
  CHECK(p2 == Approx(0.670320).epsilon(1e-6));
}

TEST_CASE("approximate entropy") {
  CHECK(approximate_entropy(bits("0100110101"), 3) == Approx(0.261961).epsilon(1e-6));
  CHECK(approximate_entropy(bits(kPi), 2) == Approx(0.235301).epsilon(1e-6));
}

TEST_CASE("battery on good bits") {
  const auto b = random_stream(1, 20 * (1 << 19));
  const auto r = run_battery(b, 1 << 19);
  CHECK(r.sequences == 20);
  CHECK(r.skipped.empty());
  REQUIRE(r.results.size() == 10);
  CHECK(r.results[0].name == "Frequency");
  CHECK(r.results[9].name == "Serial (2)");
  for (const auto& t : r.results) {
    CHECK(t.p_values.size() == 20);
    for (double p : t.p_values) CHECK((p >= 0.0 && p <= 1.0));
    CHECK(t.passed >= 18);
  }
  CHECK(r.band_low == Approx(0.99 - 3 * std::sqrt(0.99 * 0.01 / 20)));
  CHECK(r.band_high == Approx(0.99 + 3 * std::sqrt(0.99 * 0.01 / 20)));
  CHECK(r.all_passed());

  const auto again = run_battery(b, 1 << 19);
  CHECK(again.to_json() == r.to_json());
  const auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["sequences"] == 20);
  CHECK(r.to_text().find("ApproximateEntropy") != std::string::npos);
}

TEST_CASE("short sequences skip long tests") {
  const auto r = run_battery(random_stream(2, 50000), 10000);
  CHECK(r.sequences == 5);
  CHECK(r.skipped == std::vector<std::string>{"ApproximateEntropy", "Serial (1)", "Serial (2)"});
  CHECK(r.results.size() == 7);
  CHECK_THROWS_AS(run_battery(random_stream(2, 50), 100), Error);
}

TEST_CASE("battery rejects degenerate inputs") {
  const auto zeros = run_battery(BitStream(200000), 100000);
  CHECK(zeros.results[0].passed == 0);
  CHECK_FALSE(zeros.all_passed());

  BitStream alt;
  for (int i = 0; i < 200000; ++i) alt.push_back(i % 2);
  const auto r = run_battery(alt, 100000);
  for (const auto& t : r.results) {
    if (t.name == "Frequency") CHECK(t.passed == 2);
    if (t.name == "Runs") CHECK(t.passed == 0);
  }
  CHECK_FALSE(r.all_passed());

  // 52% ones: biased
  PhiloxStream rng(5);
  BitStream biased;
  for (int i = 0; i < 200000; ++i) biased.push_back(rng.next_uniform() < 0.52);
  CHECK(run_battery(biased, 100000).results[0].passed == 0);
}
