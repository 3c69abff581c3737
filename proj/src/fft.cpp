#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "vqrng/error.hpp"

namespace vqrng::fft {

void FreeDeleter::operator()(void* p) const noexcept { fftw_free(p); }

template <class T>
Buffer<T>::Buffer(std::size_t n) : ptr_(static_cast<T*>(fftw_malloc(sizeof(T) * (n ? n : 1)))), n_(n) {
  if (!ptr_) throw Error("fft buffer allocation failed");
  for (std::size_t i = 0; i < n; ++i) ptr_[i] = T{};
}

template class Buffer<double>;
template class Buffer<std::complex<double>>;

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Plan::Plan(std::size_t n) : n_(n) {
  RealBuffer r(n);
  ComplexBuffer c(n / 2 + 1);
  auto* cc = reinterpret_cast<fftw_complex*>(c.data());
  const int len = static_cast<int>(n);
  fwd_ = fftw_plan_dft_r2c_1d(len, r.data(), cc, FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_c2r_1d(len, cc, r.data(), FFTW_ESTIMATE);
  if (!fwd_ || !inv_) throw Error("fft planning failed for n=" + std::to_string(n));
}

Plan::~Plan() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(inv_));
}

const Plan& Plan::get(std::size_t n) {
  if (n < 2) throw Error("fft length must be at least 2");
  auto& mutex = planner_mutex();  // constructed before (destroyed after) the cache
  static std::map<std::size_t, std::unique_ptr<Plan>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot.reset(new Plan(n));
  return *slot;
}

void Plan::forward(const RealBuffer& in, ComplexBuffer& out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_), const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void Plan::inverse(ComplexBuffer& in, RealBuffer& out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inv_), reinterpret_cast<fftw_complex*>(in.data()),
                       out.data());
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace vqrng::fft
