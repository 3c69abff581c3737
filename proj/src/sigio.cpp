#include "vqrng/sigio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vqrng/error.hpp"

namespace vqrng {

// ---------------------------------------------------------------------------
// Types

void AdcConfig::validate() const {
  if (bits < 1 || bits > 16) throw Error("adc bits must be in [1, 16], got " + std::to_string(bits));
  if (!(range > 0.0) || !std::isfinite(range)) throw Error("adc range must be positive and finite");
}

double AdcConfig::bin_center(std::int32_t code) const {
  const double index = static_cast<double>(code) + static_cast<double>(levels() / 2);
  return -range + (index + 0.5) * bin_width();
}

void NoiseTrace::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw Error("trace sample_rate must be positive");
  for (double v : samples)
    if (!std::isfinite(v)) throw Error("trace contains a non-finite sample");
}

void DigitizedTrace::validate() const {
  adc.validate();
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw Error("trace sample_rate must be positive");
  const auto lo = adc.min_code(), hi = adc.max_code();
  std::uint64_t pinned = 0;
  for (auto c : codes) {
    if (c < lo || c > hi) throw Error("code out of range: " + std::to_string(c));
    if (c == lo || c == hi) ++pinned;
  }
  if (pinned != saturation_count)
    throw Error("saturation_count does not match the number of extreme codes");
}

std::vector<double> DigitizedTrace::dequantize() const {
  std::vector<double> out(codes.size());
  std::transform(codes.begin(), codes.end(), out.begin(),
                 [this](std::int16_t c) { return adc.bin_center(c); });
  return out;
}

std::string_view to_string(SpectrumUnit unit) {
  return unit == SpectrumUnit::DbmPerRbw ? "dBm@RBW" : "V^2/Hz";
}

void Spectrum::validate() const {
  if (frequencies.size() != values.size()) throw Error("spectrum column lengths differ");
  if (frequencies.empty()) throw Error("spectrum is empty");
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    if (!std::isfinite(frequencies[i]) || frequencies[i] < 0.0)
      throw Error("spectrum frequencies must be finite and non-negative");
    if (i > 0 && !(frequencies[i] > frequencies[i - 1]))
      throw Error("spectrum frequencies must be strictly ascending");
    if (!std::isfinite(values[i])) throw Error("spectrum contains a non-finite value");
  }
  if (!(rbw > 0.0)) throw Error("spectrum rbw must be positive");
}

double Spectrum::value_at(double f) const {
  if (f <= frequencies.front()) return values.front();
  if (f >= frequencies.back()) return values.back();
  const auto it = std::upper_bound(frequencies.begin(), frequencies.end(), f);
  const std::size_t i = static_cast<std::size_t>(it - frequencies.begin());
  const double t = (f - frequencies[i - 1]) / (frequencies[i] - frequencies[i - 1]);
  return values[i - 1] + t * (values[i] - values[i - 1]);
}

std::vector<double> Spectrum::linear_power() const {
  if (unit == SpectrumUnit::V2PerHz) return values;
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [](double dbm) { return std::pow(10.0, dbm / 10.0); });
  return out;
}

// ---------------------------------------------------------------------------
// BitStream

BitStream::BitStream(std::size_t length_bits) : bytes_((length_bits + 7) / 8, 0), length_(length_bits) {}

BitStream BitStream::from_bytes(std::vector<std::uint8_t> bytes, std::size_t length_bits) {
  BitStream s;
  if (length_bits == static_cast<std::size_t>(-1)) length_bits = bytes.size() * 8;
  if (length_bits > bytes.size() * 8) throw Error("bit length exceeds byte buffer");
  bytes.resize((length_bits + 7) / 8);
  if (length_bits % 8 != 0) bytes.back() &= static_cast<std::uint8_t>((1u << (length_bits % 8)) - 1);
  s.bytes_ = std::move(bytes);
  s.length_ = length_bits;
  return s;
}

BitStream BitStream::from_string(std::string_view bits) {
  BitStream s;
  for (char c : bits) {
    if (c == '0' || c == '1')
      s.push_back(c == '1');
    else if (c != ' ' && c != '\n')
      throw Error("bit string may only contain 0 and 1");
  }
  return s;
}

void BitStream::set(std::size_t i, bool v) {
  const auto mask = static_cast<std::uint8_t>(1u << (i & 7));
  if (v)
    bytes_[i >> 3] |= mask;
  else
    bytes_[i >> 3] &= static_cast<std::uint8_t>(~mask);
}

void BitStream::push_back(bool v) {
  if (length_ % 8 == 0) bytes_.push_back(0);
  if (v) bytes_[length_ >> 3] |= static_cast<std::uint8_t>(1u << (length_ & 7));
  ++length_;
}

void BitStream::append_bits(std::uint64_t word, unsigned count) {
  if (count < 64) word &= (std::uint64_t{1} << count) - 1;
  while (count > 0) {
    const unsigned offset = length_ & 7;
    if (offset == 0) bytes_.push_back(0);
    const unsigned take = std::min(count, 8 - offset);
    bytes_.back() |= static_cast<std::uint8_t>((word & ((1u << take) - 1)) << offset);
    word >>= take;
    count -= take;
    length_ += take;
  }
}

void BitStream::append(const BitStream& other) {
  if (length_ % 8 == 0) {
    bytes_.insert(bytes_.end(), other.bytes_.begin(), other.bytes_.end());
    length_ += other.length_;
    return;
  }
  std::size_t i = 0;
  for (; i + 8 <= other.length_; i += 8) append_bits(other.bytes_[i / 8], 8);
  if (i < other.length_) append_bits(other.bytes_[i / 8], static_cast<unsigned>(other.length_ - i));
}

BitStream BitStream::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > length_) throw Error("bit slice out of range");
  if (begin % 8 == 0) {
    std::vector<std::uint8_t> b(bytes_.begin() + static_cast<std::ptrdiff_t>(begin / 8),
                                bytes_.begin() + static_cast<std::ptrdiff_t>((begin + count + 7) / 8));
    return from_bytes(std::move(b), count);
  }
  BitStream out;
  std::vector<std::uint64_t> words((count + 63) / 64);
  copy_words(begin, words);
  for (std::size_t w = 0; w < words.size(); ++w)
    out.append_bits(words[w], static_cast<unsigned>(std::min<std::size_t>(64, count - 64 * w)));
  return out;
}

std::size_t BitStream::count_ones() const {
  std::size_t n = 0;
  for (auto b : bytes_) n += static_cast<std::size_t>(std::popcount(b));
  return n;
}

void BitStream::copy_words(std::size_t begin, std::span<std::uint64_t> words) const {
  const std::size_t nbytes = bytes_.size();
  auto byte_at = [&](std::size_t k) -> std::uint64_t { return k < nbytes ? bytes_[k] : 0; };
  if (begin % 8 == 0) {
    const std::size_t base = begin / 8;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const std::size_t k = base + 8 * w;
      std::uint64_t v = 0;
      if (k + 8 <= nbytes) {
        std::memcpy(&v, bytes_.data() + k, 8);
        if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
      } else {
        for (int j = 0; j < 8; ++j) v |= byte_at(k + static_cast<std::size_t>(j)) << (8 * j);
      }
      words[w] = v;
    }
  } else {
    const unsigned shift = static_cast<unsigned>(begin % 8);
    const std::size_t base = begin / 8;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const std::size_t k = base + 8 * w;
      std::uint64_t v = 0;
      for (int j = 0; j < 8; ++j) v |= byte_at(k + static_cast<std::size_t>(j)) << (8 * j);
      words[w] = (v >> shift) | (byte_at(k + 8) << (64 - shift));
    }
  }
  // Mask bits past the logical end.
  for (std::size_t w = 0; w < words.size(); ++w) {
    const std::size_t first = begin + 64 * w;
    if (first >= length_)
      words[w] = 0;
    else if (length_ - first < 64)
      words[w] &= (std::uint64_t{1} << (length_ - first)) - 1;
  }
}

std::string BitStream::to_string() const {
  std::string s(length_, '0');
  for (std::size_t i = 0; i < length_; ++i)
    if (get(i)) s[i] = '1';
  return s;
}

// ---------------------------------------------------------------------------
// Trace files

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  template <class T>
  void le(T v) {
    if constexpr (std::endian::native == std::endian::big) {
      auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
      std::reverse(raw.begin(), raw.end());
      bytes(raw.data(), raw.size());
    } else {
      bytes(&v, sizeof(T));
    }
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> d) : data(d) {}
  template <class T>
  T le(const char* what) {
    if (pos + sizeof(T) > data.size()) throw Error(std::string("truncated trace: missing ") + what);
    std::array<std::uint8_t, sizeof(T)> raw;
    std::memcpy(raw.data(), data.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    pos += sizeof(T);
    return std::bit_cast<T>(raw);
  }
  std::size_t remaining() const { return data.size() - pos; }
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for reading: " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_trace(const AnyTrace& any) {
  Writer w;
  w.bytes("VQRN", 4);
  w.le<std::uint8_t>(kTraceFormatVersion);
  if (const auto* t = std::get_if<NoiseTrace>(&any)) {
    t->validate();
    if (t->label.size() > 0xFFFF) throw Error("trace label too long");
    w.le<std::uint8_t>(0);
    w.le<double>(t->sample_rate);
    w.le<std::uint64_t>(t->samples.size());
    w.out.reserve(w.out.size() + 8 * t->samples.size() + 2 + t->label.size());
    for (double v : t->samples) w.le<double>(v);
    w.le<std::uint16_t>(static_cast<std::uint16_t>(t->label.size()));
    w.bytes(t->label.data(), t->label.size());
  } else {
    const auto& d = std::get<DigitizedTrace>(any);
    d.validate();
    w.le<std::uint8_t>(1);
    w.le<double>(d.sample_rate);
    w.le<std::uint64_t>(d.codes.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(d.adc.bits));
    w.le<double>(d.adc.range);
    w.out.reserve(w.out.size() + 2 * d.codes.size());
    for (auto c : d.codes) w.le<std::int16_t>(c);
  }
  return std::move(w.out);
}

AnyTrace decode_trace(std::span<const std::uint8_t> data) {
  if (data.size() < 4 || std::memcmp(data.data(), "VQRN", 4) != 0) throw Error("bad magic");
  Reader r(data);
  r.pos = 4;
  const auto version = r.le<std::uint8_t>("version");
  if (version != kTraceFormatVersion)
    throw Error("version mismatch: file has " + std::to_string(version) + ", expected " +
                std::to_string(kTraceFormatVersion));
  const auto kind = r.le<std::uint8_t>("kind");
  const double rate = r.le<double>("sample_rate");
  const auto count = r.le<std::uint64_t>("count");

  if (kind == 0) {
    if (r.remaining() / 8 < count) throw Error("truncated trace: payload shorter than header count");
    NoiseTrace t;
    t.sample_rate = rate;
    t.samples.resize(count);
    for (auto& v : t.samples) v = r.le<double>("sample");
    if (r.remaining() > 0) {
      const auto len = r.le<std::uint16_t>("label length");
      if (r.remaining() < len) throw Error("truncated trace: label");
      t.label.assign(reinterpret_cast<const char*>(data.data() + r.pos), len);
      r.pos += len;
    }
    if (r.remaining() != 0) throw Error("trailing bytes after trace payload");
    t.validate();
    return t;
  }
  if (kind == 1) {
    DigitizedTrace d;
    d.sample_rate = rate;
    d.adc.bits = r.le<std::uint8_t>("bits");
    d.adc.range = r.le<double>("range");
    d.adc.validate();
    if (r.remaining() / 2 < count) throw Error("truncated trace: payload shorter than header count");
    if (r.remaining() != 2 * count) throw Error("trailing bytes after trace payload");
    d.codes.resize(count);
    const auto lo = d.adc.min_code(), hi = d.adc.max_code();
    for (auto& c : d.codes) {
      c = r.le<std::int16_t>("code");
      if (c < lo || c > hi) throw Error("code out of range: " + std::to_string(c));
      if (c == lo || c == hi) ++d.saturation_count;
    }
    d.validate();
    return d;
  }
  throw Error("unknown trace kind " + std::to_string(kind));
}

void write_trace(const std::filesystem::path& path, const AnyTrace& trace) {
  write_file(path, encode_trace(trace));
}
void write_trace(const std::filesystem::path& path, const NoiseTrace& trace) {
  write_trace(path, AnyTrace{trace});
}
void write_trace(const std::filesystem::path& path, const DigitizedTrace& trace) {
  write_trace(path, AnyTrace{trace});
}

AnyTrace read_trace(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_trace(bytes);
}

NoiseTrace read_analog_trace(const std::filesystem::path& path) {
  auto any = read_trace(path);
  if (auto* t = std::get_if<NoiseTrace>(&any)) return std::move(*t);
  const auto& d = std::get<DigitizedTrace>(any);
  NoiseTrace t;
  t.samples = d.dequantize();
  t.sample_rate = d.sample_rate;
  t.label = "dequantized";
  return t;
}

BitStream pack_codes_to_bits(const DigitizedTrace& trace, int bits_per_sample) {
  if (bits_per_sample < 1 || bits_per_sample > trace.adc.bits)
    throw Error("bits_per_sample must be in [1, adc.bits]");
  const std::int32_t offset = static_cast<std::int32_t>(trace.adc.levels() / 2);
  BitStream out;
  for (auto c : trace.codes)
    out.append_bits(static_cast<std::uint64_t>(c + offset), static_cast<unsigned>(bits_per_sample));
  return out;
}

void write_bits(const std::filesystem::path& path, const BitStream& bits) { write_file(path, bits.bytes()); }

BitStream read_bits(const std::filesystem::path& path) { return BitStream::from_bytes(read_file(path)); }

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\r')) --e;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) throw Error("malformed number in csv: '" + s + "'");
  return v;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot open for writing: " + path.string());
  for (std::size_t i = 0; i < table.columns.size(); ++i) f << (i ? "," : "") << table.columns[i];
  f << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) throw Error("csv row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << format_double(row[i]);
    f << '\n';
  }
  if (!f) throw Error("write failed: " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open for reading: " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(f, line)) throw Error("csv missing header: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.columns = split(line, ',');
  while (std::getline(f, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line, ',');
    if (cells.size() != t.columns.size()) throw Error("csv row width mismatch in " + path.string());
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s) {
  s.validate();
  CsvTable t;
  const std::string name = s.unit == SpectrumUnit::DbmPerRbw ? "power" : "psd";
  t.columns = {"frequency (Hz)",
               name + " (" + std::string(to_string(s.unit)) + "; rbw=" + format_double(s.rbw) + " Hz)"};
  t.rows.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) t.rows.push_back({s.frequencies[i], s.values[i]});
  write_csv(path, t);
}

Spectrum read_spectrum_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  if (t.columns.size() != 2) throw Error("spectrum csv must have two columns");
  const auto& h = t.columns[1];
  Spectrum s;
  if (h.find("dBm@RBW") != std::string::npos)
    s.unit = SpectrumUnit::DbmPerRbw;
  else if (h.find("V^2/Hz") != std::string::npos)
    s.unit = SpectrumUnit::V2PerHz;
  else
    throw Error("spectrum csv header has no recognised unit: " + h);
  const auto at = h.find("rbw=");
  if (at == std::string::npos) throw Error("spectrum csv header has no rbw: " + h);
  const auto end = h.find(" Hz", at);
  s.rbw = parse_double(h.substr(at + 4, end == std::string::npos ? std::string::npos : end - at - 4));
  for (const auto& row : t.rows) {
    s.frequencies.push_back(row[0]);
    s.values.push_back(row[1]);
  }
  s.validate();
  return s;
}

}  // namespace vqrng
