#include "gf2.hpp"

#include <algorithm>
#include <vector>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define VQRNG_X86 1
#endif

namespace vqrng::gf2 {

namespace {

struct U128 {
  std::uint64_t lo = 0, hi = 0;
};

U128 clmul_soft(std::uint64_t a, std::uint64_t b) {
  U128 r;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t mask = -((b >> i) & 1u);
    r.lo ^= (a << i) & mask;
    if (i > 0) r.hi ^= (a >> (64 - i)) & mask;
  }
  return r;
}

// Diagonal d collects every a_i * b_j with i + j == d.
template <class DiagonalSum>
void assemble(std::size_t na, std::size_t nb, std::size_t first_bit, std::size_t count, std::uint64_t* out,
              DiagonalSum diagonal) {
  const std::size_t words_out = (count + 63) / 64;
  std::fill(out, out + words_out, 0);
  if (count == 0 || na == 0 || nb == 0) return;
  const std::size_t w0 = first_bit / 64;
  const std::size_t w1 = (first_bit + count - 1) / 64 + 1;
  const std::size_t ndiag = na + nb - 1;
  std::vector<std::uint64_t> p(w1 - w0 + 1, 0);
  U128 prev = w0 > 0 && w0 - 1 < ndiag ? diagonal(w0 - 1) : U128{};
  for (std::size_t w = w0; w <= w1; ++w) {
    const U128 cur = w < ndiag ? diagonal(w) : U128{};
    p[w - w0] = cur.lo ^ prev.hi;
    prev = cur;
  }
  const unsigned sh = first_bit % 64;
  for (std::size_t k = 0; k < words_out; ++k)
    out[k] = sh == 0 ? p[k] : (p[k] >> sh) | (p[k + 1] << (64 - sh));
  if (count % 64 != 0) out[words_out - 1] &= (std::uint64_t{1} << (count % 64)) - 1;
}

std::size_t diag_begin(std::size_t d, std::size_t nb) { return d >= nb ? d - nb + 1 : 0; }

}  // namespace

#ifdef VQRNG_X86

bool have_clmul() {
  static const bool ok = __builtin_cpu_supports("pclmul");
  return ok;
}

namespace {

__attribute__((target("pclmul,sse4.1"))) U128 diagonal_clmul(const std::uint64_t* a, std::size_t na,
                                                              const std::uint64_t* b, std::size_t nb,
                                                              std::size_t d) {
  const std::size_t i0 = diag_begin(d, nb);
  const std::size_t i1 = std::min(d, na - 1);
  __m128i acc0 = _mm_setzero_si128(), acc1 = _mm_setzero_si128();
  std::size_t i = i0;
  // Two words of a and b per step: (a_i, a_i+1) x (b_d-i, b_d-i-1).
  for (; i + 1 <= i1; i += 2) {
    const __m128i va = _mm_loadu_si128(reinterpret_cast<const __m128i*>(a + i));
    const __m128i vb = _mm_loadu_si128(reinterpret_cast<const __m128i*>(b + (d - i - 1)));
    acc0 = _mm_xor_si128(acc0, _mm_clmulepi64_si128(va, vb, 0x01));  // a_{i+1} * b_{d-i-1}
    acc1 = _mm_xor_si128(acc1, _mm_clmulepi64_si128(va, vb, 0x10));  // a_i * b_{d-i}
  }
  if (i == i1) {
    const __m128i va = _mm_cvtsi64_si128(static_cast<long long>(a[i]));
    const __m128i vb = _mm_cvtsi64_si128(static_cast<long long>(b[d - i]));
    acc0 = _mm_xor_si128(acc0, _mm_clmulepi64_si128(va, vb, 0x00));
  }
  const __m128i acc = _mm_xor_si128(acc0, acc1);
  return {static_cast<std::uint64_t>(_mm_cvtsi128_si64(acc)),
          static_cast<std::uint64_t>(_mm_extract_epi64(acc, 1))};
}

}  // namespace

void mul_range_clmul(const std::uint64_t* a, std::size_t na, const std::uint64_t* b, std::size_t nb,
                     std::size_t first_bit, std::size_t count, std::uint64_t* out) {
  if (!have_clmul()) return mul_range_portable(a, na, b, nb, first_bit, count, out);
  assemble(na, nb, first_bit, count, out, [&](std::size_t d) { return diagonal_clmul(a, na, b, nb, d); });
}

#else

bool have_clmul() { return false; }

void mul_range_clmul(const std::uint64_t* a, std::size_t na, const std::uint64_t* b, std::size_t nb,
                     std::size_t first_bit, std::size_t count, std::uint64_t* out) {
  mul_range_portable(a, na, b, nb, first_bit, count, out);
}

#endif

void mul_range_portable(const std::uint64_t* a, std::size_t na, const std::uint64_t* b, std::size_t nb,
                        std::size_t first_bit, std::size_t count, std::uint64_t* out) {
  assemble(na, nb, first_bit, count, out, [&](std::size_t d) {
    U128 acc;
    for (std::size_t i = diag_begin(d, nb); i <= std::min(d, na - 1); ++i) {
      const U128 t = clmul_soft(a[i], b[d - i]);
      acc.lo ^= t.lo;
      acc.hi ^= t.hi;
    }
    return acc;
  });
}

}  // namespace vqrng::gf2
