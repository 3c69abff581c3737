#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vqrng {

// Saturating ADC: 2^bits equal bins over [-range, +range), the two extreme
// bins extended to +-infinity.
struct AdcConfig {
  int bits = 12;
  double range = 0.160;  // half-range S, volts

  void validate() const;
  std::int64_t levels() const { return std::int64_t{1} << bits; }
  std::int32_t min_code() const { return -static_cast<std::int32_t>(levels() / 2); }
  std::int32_t max_code() const { return static_cast<std::int32_t>(levels() / 2 - 1); }
  double bin_width() const { return 2.0 * range / static_cast<double>(levels()); }
  // Voltage at the center of the bin holding `code`.
  double bin_center(std::int32_t code) const;
};

struct NoiseTrace {
  std::vector<double> samples;  // volts
  double sample_rate = 0.0;     // Hz
  std::string label;

  void validate() const;
  std::size_t size() const { return samples.size(); }
};

struct DigitizedTrace {
  std::vector<std::int16_t> codes;
  AdcConfig adc;
  double sample_rate = 0.0;
  std::uint64_t saturation_count = 0;

  void validate() const;
  std::size_t size() const { return codes.size(); }
  // Codes mapped back to the centers of their bins.
  std::vector<double> dequantize() const;
};

using AnyTrace = std::variant<NoiseTrace, DigitizedTrace>;

enum class SpectrumUnit { DbmPerRbw, V2PerHz };

std::string_view to_string(SpectrumUnit unit);

// One-sided power spectrum.
struct Spectrum {
  std::vector<double> frequencies;  // Hz, strictly ascending
  std::vector<double> values;
  SpectrumUnit unit = SpectrumUnit::V2PerHz;
  double rbw = 0.0;  // Hz

  void validate() const;
  std::size_t size() const { return frequencies.size(); }
  // Linearly interpolated value at f (clamped to the span).
  double value_at(double f) const;
  // Power in linear units (mW per RBW, or V^2/Hz) regardless of the tag.
  std::vector<double> linear_power() const;
};

// Packed bit sequence, LSB-first within each byte; pad bits are always zero.
class BitStream {
 public:
  BitStream() = default;
  explicit BitStream(std::size_t length_bits);
  // Takes the first `length_bits` bits of `bytes` (all of them if npos).
  static BitStream from_bytes(std::vector<std::uint8_t> bytes,
                              std::size_t length_bits = static_cast<std::size_t>(-1));
  static BitStream from_string(std::string_view zeros_and_ones);

  std::size_t size() const { return length_; }
  bool empty() const { return length_ == 0; }
  bool get(std::size_t i) const { return (bytes_[i >> 3] >> (i & 7)) & 1u; }
  void set(std::size_t i, bool v);
  void push_back(bool v);
  void append(const BitStream& other);
  // Appends the low `count` bits of `word`, LSB first.
  void append_bits(std::uint64_t word, unsigned count);
  BitStream slice(std::size_t begin, std::size_t count) const;
  std::size_t count_ones() const;

  std::span<const std::uint8_t> bytes() const { return bytes_; }
  // Bits [begin, begin + 64*words.size()) copied into 64-bit words (bit j of
  // word w is stream bit begin + 64w + j). Bits past the end read as zero.
  void copy_words(std::size_t begin, std::span<std::uint64_t> words) const;
  std::string to_string() const;

  friend bool operator==(const BitStream&, const BitStream&) = default;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t length_ = 0;
};

// Trace container: "VQRN", u8 version (1), u8 kind (0 analog, 1 digitized),
// f64 sample_rate, u64 count, then for digitized u8 bits + f64 range; payload
// f64 volts or i16 codes, all little-endian. Analog files end with a label
// trailer (u16 length + bytes); a file without the trailer reads as label "".
inline constexpr std::uint8_t kTraceFormatVersion = 1;
inline constexpr std::size_t kAnalogHeaderSize = 4 + 1 + 1 + 8 + 8;
inline constexpr std::size_t kDigitizedHeaderSize = kAnalogHeaderSize + 1 + 8;

void write_trace(const std::filesystem::path& path, const NoiseTrace& trace);
void write_trace(const std::filesystem::path& path, const DigitizedTrace& trace);
void write_trace(const std::filesystem::path& path, const AnyTrace& trace);
AnyTrace read_trace(const std::filesystem::path& path);
NoiseTrace read_analog_trace(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_trace(const AnyTrace& trace);
AnyTrace decode_trace(std::span<const std::uint8_t> data);

// Offset-binary (code + 2^(bits-1)), low `bits_per_sample` bits of each code,
// LSB first.
BitStream pack_codes_to_bits(const DigitizedTrace& trace, int bits_per_sample);

// Raw packed bytes. Reading yields 8 * file_size bits.
void write_bits(const std::filesystem::path& path, const BitStream& bits);
BitStream read_bits(const std::filesystem::path& path);

// CSV: one header line, then rows. Spectra use
//   frequency (Hz),<name> (<unit>; rbw=<Hz> Hz)
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& spectrum);
Spectrum read_spectrum_csv(const std::filesystem::path& path);

// Generic numeric table (sweep curves, autocorrelation tables).
struct CsvTable {
  std::vector<std::string> columns;  // e.g. "ratio (S/sigma_Q)"
  std::vector<std::vector<double>> rows;
};
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace vqrng
