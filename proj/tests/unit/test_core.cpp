#include <atomic>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "vqrng/error.hpp"
#include "vqrng/parallel.hpp"
#include "vqrng/philox.hpp"
#include "vqrng/sigio.hpp"

using namespace vqrng;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "vqrng_unit";
  fs::create_directories(dir);
  return dir / name;
}

void spit(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("philox known answers") {
  // Random123 kat_vectors for philox4x32_10.
  using P = Philox4x32;
  CHECK(P::block({0, 0, 0, 0}, {0, 0}) == P::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(P::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        P::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(P::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        P::Counter{0xd16cfe09u, 0x94fdcceBu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("normal pair moments") {
  double s1 = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n / 2; ++i) {
    const auto z = normal_pair(Philox4x32::block({static_cast<std::uint32_t>(i), 0, 0, 7}, {1, 2}));
    for (double v : z) s1 += v, s2 += v * v;
  }
  CHECK(std::abs(s1 / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.01);
}

TEST_CASE("derived seeds differ per stream") {
  CHECK(derive_seed(1, 1) != derive_seed(1, 2));
  CHECK(derive_seed(1, 1) != derive_seed(2, 1));
  CHECK(derive_seed(5, 3) == derive_seed(5, 3));
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  for (unsigned t : {1u, 3u, 8u}) {
    set_thread_count(t);
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) {
                      if (i == 42) throw Error("boom");
                    }),
                    Error);
  }
  set_thread_count(0);
}

TEST_CASE("adc config") {
  AdcConfig adc{12, 0.16};
  CHECK(adc.levels() == 4096);
  CHECK(adc.min_code() == -2048);
  CHECK(adc.max_code() == 2047);
  CHECK(adc.bin_width() == doctest::Approx(0.32 / 4096));
  CHECK_THROWS_AS((AdcConfig{0, 1.0}.validate()), Error);
  CHECK_THROWS_AS((AdcConfig{17, 1.0}.validate()), Error);
  CHECK_THROWS_AS((AdcConfig{8, 0.0}.validate()), Error);
}

TEST_CASE("analog trace round trip") {
  NoiseTrace t{{0.001, -0.5, 3.25e-7}, 6.25e9, "measured"};
  const auto p = temp_file("analog.vqt");
  write_trace(p, t);
  const auto back = read_analog_trace(p);
  CHECK(back.samples == t.samples);
  CHECK(back.sample_rate == t.sample_rate);
  CHECK(back.label == "measured");
}

TEST_CASE("analog trace round trip property") {
  PhiloxStream rng(11);
  for (int k = 0; k < 50; ++k) {
    NoiseTrace t;
    t.sample_rate = 1e3 + rng.next_uniform() * 1e10;
    const auto n = 1 + rng.next_u64() % 300;
    for (std::uint64_t i = 0; i < n; ++i) t.samples.push_back((rng.next_uniform() - 0.5) * std::ldexp(1.0, static_cast<int>(rng.next_u64() % 40) - 20));
    t.label = std::string(rng.next_u64() % 20, 'x');
    const auto back = std::get<NoiseTrace>(decode_trace(encode_trace(t)));
    CHECK(back.samples == t.samples);
    CHECK(back.sample_rate == t.sample_rate);
    CHECK(back.label == t.label);
  }
}

TEST_CASE("digitized trace round trip with extreme codes") {
  DigitizedTrace d;
  d.adc = {12, 0.16};
  d.sample_rate = 6.25e9;
  d.codes = {-2048, 0, 2047};
  d.saturation_count = 2;
  const auto p = temp_file("digitized.vqt");
  write_trace(p, d);
  const auto back = std::get<DigitizedTrace>(read_trace(p));
  CHECK(back.codes == d.codes);
  CHECK(back.adc.bits == 12);
  CHECK(back.adc.range == 0.16);
  CHECK(back.saturation_count == 2);
}

TEST_CASE("digitized file size is header plus two bytes per sample") {
  DigitizedTrace d;
  d.adc = {12, 0.16};
  d.sample_rate = 1.0;
  d.codes.assign(1000000, 5);
  const auto p = temp_file("big.vqt");
  write_trace(p, d);
  CHECK(fs::file_size(p) == kDigitizedHeaderSize + 2 * 1000000);
}

TEST_CASE("trace read errors") {
  NoiseTrace t{std::vector<double>(100, 1.0), 1.0, ""};
  auto bytes = encode_trace(t);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_trace(bad), "bad magic", Error);

  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_AS(decode_trace(bad), Error);

  // 100 samples announced, 99 present (no label trailer).
  bad.assign(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(kAnalogHeaderSize + 99 * 8));
  CHECK_THROWS_WITH_AS(decode_trace(bad), doctest::Contains("truncated"), Error);

  DigitizedTrace d;
  d.adc = {4, 1.0};
  d.sample_rate = 1.0;
  d.codes = {1, 2, 3};
  auto db = encode_trace(d);
  db[kDigitizedHeaderSize] = 100;  // code 100 on a 4-bit ADC
  CHECK_THROWS_WITH_AS(decode_trace(db), doctest::Contains("code out of range"), Error);

  const auto p = temp_file("bad.vqt");
  spit(p, {'V', 'Q'});
  CHECK_THROWS_AS(read_trace(p), Error);
}

TEST_CASE("analog file without label trailer reads an empty label") {
  NoiseTrace t{{1.0, 2.0}, 10.0, ""};
  auto bytes = encode_trace(t);
  bytes.resize(kAnalogHeaderSize + 16);
  const auto back = std::get<NoiseTrace>(decode_trace(bytes));
  CHECK(back.samples == t.samples);
  CHECK(back.label.empty());
}

TEST_CASE("pack codes to bits") {
  DigitizedTrace d;
  d.adc = {2, 1.0};
  d.sample_rate = 1.0;
  d.codes = {0, 0, 0};
  // offset binary 0 + 2 = 0b10, LSB first -> 0 1
  CHECK(pack_codes_to_bits(d, 2).to_string() == "010101");

  DigitizedTrace one;
  one.adc = {12, 0.16};
  one.sample_rate = 1.0;
  one.codes = {-2048};
  one.saturation_count = 1;
  CHECK(pack_codes_to_bits(one, 12).size() == 12);
  CHECK(pack_codes_to_bits(one, 12).count_ones() == 0);
  CHECK_THROWS_AS(pack_codes_to_bits(one, 13), Error);
  CHECK_THROWS_AS(pack_codes_to_bits(one, 0), Error);

  DigitizedTrace many;
  many.adc = {12, 0.16};
  many.sample_rate = 1.0;
  for (int i = 0; i < 37; ++i) many.codes.push_back(static_cast<std::int16_t>(i * 101 - 1800));
  for (int b = 1; b <= 12; ++b) CHECK(pack_codes_to_bits(many, b).size() == 37u * static_cast<unsigned>(b));
}

TEST_CASE("bitstream operations") {
  auto b = BitStream::from_string("1011001110001");
  CHECK(b.size() == 13);
  CHECK(b.count_ones() == 7);
  CHECK(b.slice(3, 5).to_string() == "10011");
  b.append(BitStream::from_string("111"));
  CHECK(b.to_string() == "1011001110001111");
  std::vector<std::uint64_t> w(1);
  b.copy_words(1, w);
  CHECK(w[0] == 0b111100011100110ull);
  CHECK_THROWS_AS(BitStream::from_string("10a"), Error);
  CHECK_THROWS_AS(b.slice(10, 10), Error);

  // pad bits stay zero
  auto c = BitStream::from_string("111");
  CHECK(c.bytes()[0] == 0b111);

  const auto p = temp_file("bits.bin");
  write_bits(p, b);
  const auto back = read_bits(p);
  CHECK(back.size() == 16);
  CHECK(back == b);
}

TEST_CASE("spectrum csv round trip") {
  Spectrum s;
  s.frequencies = {0.0, 1e6, 2e6};
  s.values = {-48.35, -50.125, -58.8};
  s.unit = SpectrumUnit::DbmPerRbw;
  s.rbw = 2e6;
  const auto p = temp_file("spec.csv");
  write_spectrum_csv(p, s);
  const auto back = read_spectrum_csv(p);
  CHECK(back.frequencies == s.frequencies);
  CHECK(back.values == s.values);
  CHECK(back.unit == SpectrumUnit::DbmPerRbw);
  CHECK(back.rbw == s.rbw);

  s.unit = SpectrumUnit::V2PerHz;
  s.values = {1e-13, 3.3e-14, 1.0 / 3.0};
  write_spectrum_csv(p, s);
  const auto back2 = read_spectrum_csv(p);
  CHECK(back2.values == s.values);
  CHECK(back2.unit == SpectrumUnit::V2PerHz);
}

TEST_CASE("spectrum validation") {
  Spectrum s;
  s.frequencies = {0.0, 2.0, 1.0};
  s.values = {1, 1, 1};
  s.rbw = 1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s.frequencies = {0.0, 1.0, 2.0};
  CHECK_NOTHROW(s.validate());
  CHECK(s.value_at(1.5) == doctest::Approx(1.0));
}
