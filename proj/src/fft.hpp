#pragma once

#include <complex>
#include <cstddef>
#include <memory>

namespace vqrng::fft {

struct FreeDeleter {
  void operator()(void* p) const noexcept;
};

// SIMD-aligned storage from the FFT backend. Every buffer handed to a Plan
// must come from here so the same codelets run on every thread.
template <class T>
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(std::size_t n);
  T* data() { return ptr_.get(); }
  const T* data() const { return ptr_.get(); }
  std::size_t size() const { return n_; }
  T& operator[](std::size_t i) { return ptr_[i]; }
  const T& operator[](std::size_t i) const { return ptr_[i]; }

 private:
  std::unique_ptr<T[], FreeDeleter> ptr_;
  std::size_t n_ = 0;
};

using RealBuffer = Buffer<double>;
using ComplexBuffer = Buffer<std::complex<double>>;

// Cached real-data transform pair of length n (unnormalised). Thread-safe:
// planning is serialised, execution is re-entrant.
class Plan {
 public:
  static const Plan& get(std::size_t n);

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }
  // in: n reals (preserved); out: n/2+1 complex.
  void forward(const RealBuffer& in, ComplexBuffer& out) const;
  // in: n/2+1 complex (clobbered); out: n reals, scaled by n.
  void inverse(ComplexBuffer& in, RealBuffer& out) const;

  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan();

 private:
  explicit Plan(std::size_t n);
  std::size_t n_;
  void* fwd_ = nullptr;
  void* inv_ = nullptr;
};

std::size_t next_pow2(std::size_t n);

}  // namespace vqrng::fft
