#pragma once

#include <cstddef>
#include <cstdint>

namespace vqrng::gf2 {

bool have_clmul();

// Bits [first_bit, first_bit + count) of the carry-less product a(z) b(z),
// written to out[0 .. ceil(count/64)) with the tail of the last word zeroed.
// Word w of a holds coefficients 64w .. 64w+63, LSB first.
void mul_range_clmul(const std::uint64_t* a, std::size_t na, const std::uint64_t* b, std::size_t nb,
                     std::size_t first_bit, std::size_t count, std::uint64_t* out);
void mul_range_portable(const std::uint64_t* a, std::size_t na, const std::uint64_t* b, std::size_t nb,
                        std::size_t first_bit, std::size_t count, std::uint64_t* out);

}  // namespace vqrng::gf2
