#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vqrng/sigio.hpp"

namespace vqrng::extract {

// m_out x n_in binary Toeplitz matrix T[r][c] = seed[r - c + n_in - 1].
class ToeplitzSpec {
 public:
  ToeplitzSpec(std::size_t n_in, std::size_t m_out, BitStream seed);
  // Seed of n_in + m_out - 1 bits expanded from a 64-bit value by Philox.
  // For testing and simulation; production use needs a truly random seed.
  static ToeplitzSpec from_seed64(std::size_t n_in, std::size_t m_out, std::uint64_t seed);

  std::size_t n_in() const { return n_in_; }
  std::size_t m_out() const { return m_out_; }
  const BitStream& seed() const { return seed_; }
  const std::vector<std::uint64_t>& seed_words() const { return words_; }
  bool entry(std::size_t r, std::size_t c) const { return seed_.get(r + n_in_ - 1 - c); }

 private:
  std::size_t n_in_, m_out_;
  BitStream seed_;
  std::vector<std::uint64_t> words_;
};

// floor(n_in * h / bits_per_sample - 2 log2(1/epsilon)), clamped to [0, n_in].
std::size_t output_length(std::size_t n_in, double h_min_per_sample, double bits_per_sample, double epsilon);

enum class Kernel { Auto, Portable, Clmul };

// T x as a GF(2) polynomial product: output bit r is coefficient n_in-1+r of
// seed(z) x(z).
BitStream extract_block(const BitStream& input, const ToeplitzSpec& spec, Kernel kernel = Kernel::Auto);

struct StreamResult {
  BitStream output;
  std::size_t blocks = 0;
  std::size_t discarded_bits = 0;  // trailing partial block
};

// Fixed-seed extraction of every whole n_in block, in parallel, output in
// block order.
StreamResult extract_stream(const BitStream& input, const ToeplitzSpec& spec, Kernel kernel = Kernel::Auto);

// Input bits per second of extract_block on random data (single thread).
double measure_throughput(std::size_t n_in, std::size_t m_out, double min_seconds = 0.5,
                          Kernel kernel = Kernel::Auto);

std::string_view kernel_name(Kernel kernel);

}  // namespace vqrng::extract
