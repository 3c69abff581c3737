#include "vqrng/extract.hpp"

#include <chrono>
#include <cmath>

#include "gf2.hpp"
#include "vqrng/error.hpp"
#include "vqrng/parallel.hpp"
#include "vqrng/philox.hpp"

namespace vqrng::extract {

namespace {

std::size_t words_for(std::size_t bits) { return (bits + 63) / 64; }

void block_product(const ToeplitzSpec& spec, const std::uint64_t* x, std::uint64_t* out, Kernel kernel) {
  const auto& s = spec.seed_words();
  const std::size_t nx = words_for(spec.n_in());
  if (kernel == Kernel::Portable)
    gf2::mul_range_portable(s.data(), s.size(), x, nx, spec.n_in() - 1, spec.m_out(), out);
  else
    gf2::mul_range_clmul(s.data(), s.size(), x, nx, spec.n_in() - 1, spec.m_out(), out);
}

BitStream to_bits(const std::vector<std::uint64_t>& words, std::size_t count) {
  BitStream out;
  for (std::size_t w = 0; w * 64 < count; ++w)
    out.append_bits(words[w], static_cast<unsigned>(std::min<std::size_t>(64, count - w * 64)));
  return out;
}

}  // namespace

ToeplitzSpec::ToeplitzSpec(std::size_t n_in, std::size_t m_out, BitStream seed)
    : n_in_(n_in), m_out_(m_out), seed_(std::move(seed)) {
  if (n_in_ == 0) throw Error("toeplitz: n_in must be positive");
  if (m_out_ > n_in_) throw Error("toeplitz: m_out exceeds n_in");
  if (m_out_ == 0) throw Error("toeplitz: m_out must be positive");
  if (seed_.size() != n_in_ + m_out_ - 1) throw Error("toeplitz: seed must have n_in + m_out - 1 bits");
  words_.resize(words_for(seed_.size()));
  seed_.copy_words(0, words_);
}

ToeplitzSpec ToeplitzSpec::from_seed64(std::size_t n_in, std::size_t m_out, std::uint64_t seed) {
  if (n_in == 0 || m_out == 0) throw Error("toeplitz: n_in and m_out must be positive");
  const std::size_t len = n_in + m_out - 1;
  PhiloxStream rng(seed, 0x70e);
  BitStream bits;
  for (std::size_t done = 0; done < len; done += 64)
    bits.append_bits(rng.next_u64(), static_cast<unsigned>(std::min<std::size_t>(64, len - done)));
  return ToeplitzSpec(n_in, m_out, std::move(bits));
}

std::size_t output_length(std::size_t n_in, double h, double bits_per_sample, double epsilon) {
  if (!(bits_per_sample > 0.0)) throw Error("output_length: bits_per_sample must be positive");
  if (!(h > 0.0) || h > bits_per_sample) throw Error("output_length: need 0 < h <= bits_per_sample");
  if (!(epsilon > 0.0) || epsilon > 1.0) throw Error("output_length: need 0 < epsilon <= 1");
  const double m = std::floor(static_cast<double>(n_in) * h / bits_per_sample - 2.0 * std::log2(1.0 / epsilon));
  if (!(m > 0.0)) return 0;
  return std::min(n_in, static_cast<std::size_t>(m));
}

BitStream extract_block(const BitStream& input, const ToeplitzSpec& spec, Kernel kernel) {
  if (input.size() != spec.n_in()) throw Error("extract_block: input length does not match n_in");
  std::vector<std::uint64_t> x(words_for(spec.n_in())), y(words_for(spec.m_out()));
  input.copy_words(0, x);
  block_product(spec, x.data(), y.data(), kernel);
  return to_bits(y, spec.m_out());
}

StreamResult extract_stream(const BitStream& input, const ToeplitzSpec& spec, Kernel kernel) {
  const std::size_t n = spec.n_in(), m = spec.m_out();
  if (input.size() < n) throw Error("extract_stream: input shorter than one block");
  StreamResult result;
  result.blocks = input.size() / n;
  result.discarded_bits = input.size() % n;

  const std::size_t nx = words_for(n), ny = words_for(m);
  constexpr std::size_t kBatch = 256;
  std::vector<std::uint64_t> out_words(kBatch * ny);
  for (std::size_t first = 0; first < result.blocks; first += kBatch) {
    const std::size_t batch = std::min(kBatch, result.blocks - first);
    parallel_for(batch, [&](std::size_t k) {
      std::vector<std::uint64_t> x(nx);
      input.copy_words((first + k) * n, x);
      if (n % 64 != 0) x[nx - 1] &= (std::uint64_t{1} << (n % 64)) - 1;
      block_product(spec, x.data(), out_words.data() + k * ny, kernel);
    });
    for (std::size_t k = 0; k < batch; ++k)
      for (std::size_t w = 0; w < ny; ++w)
        result.output.append_bits(out_words[k * ny + w], static_cast<unsigned>(std::min<std::size_t>(64, m - w * 64)));
  }
  return result;
}

double measure_throughput(std::size_t n_in, std::size_t m_out, double min_seconds, Kernel kernel) {
  const auto spec = ToeplitzSpec::from_seed64(n_in, m_out, 0x5eed);
  PhiloxStream rng(0xda7a);
  constexpr std::size_t kInputs = 64;
  const std::size_t nx = words_for(n_in);
  std::vector<std::uint64_t> x(kInputs * nx), y(words_for(m_out));
  for (auto& w : x) w = rng.next_u64();
  if (n_in % 64 != 0)
    for (std::size_t k = 0; k < kInputs; ++k) x[k * nx + nx - 1] &= (std::uint64_t{1} << (n_in % 64)) - 1;

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::size_t blocks = 0;
  double elapsed = 0.0;
  std::uint64_t sink = 0;
  do {
    for (std::size_t k = 0; k < kInputs; ++k) {
      block_product(spec, x.data() + k * nx, y.data(), kernel);
      sink ^= y[0];
    }
    blocks += kInputs;
    elapsed = std::chrono::duration<double>(clock::now() - start).count();
  } while (elapsed < min_seconds);
  asm volatile("" : : "g"(sink) : "memory");
  return static_cast<double>(blocks * n_in) / elapsed;
}

std::string_view kernel_name(Kernel kernel) {
  switch (kernel) {
    case Kernel::Portable: return "portable";
    case Kernel::Clmul: return "clmul";
    case Kernel::Auto: break;
  }
  return gf2::have_clmul() ? "clmul" : "portable";
}

}  // namespace vqrng::extract
