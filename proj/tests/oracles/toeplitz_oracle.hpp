#pragma once
// Naive O(n m) Toeplitz matrix-vector product over GF(2).
#include <cstdint>
#include <vector>

namespace oracle {

inline std::vector<std::uint8_t> toeplitz(const std::vector<std::uint8_t>& seed, const std::vector<std::uint8_t>& x,
                                          std::size_t m) {
  const std::size_t n = x.size();
  std::vector<std::uint8_t> y(m, 0);
  for (std::size_t r = 0; r < m; ++r) {
    std::uint8_t acc = 0;
    for (std::size_t c = 0; c < n; ++c) acc ^= seed[r + n - 1 - c] & x[c];
    y[r] = acc;
  }
  return y;
}

}  // namespace oracle
