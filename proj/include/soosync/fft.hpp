#pragma once

// Thin FFTW wrapper: aligned complex buffers plus a process-wide cache of
// in-place plans keyed by (size, direction).

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <utility>
#include <vector>

#include "soosync/types.hpp"

namespace soosync::fft {

template <typename T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <typename U>
  constexpr FftwAllocator(const FftwAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (auto* p = static_cast<T*>(fftw_malloc(n * sizeof(T)))) return p;
    throw std::bad_alloc();
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }

  template <typename U>
  bool operator==(const FftwAllocator<U>&) const noexcept {
    return true;
  }
};

/// Complex vector whose storage satisfies FFTW's SIMD alignment.
using AlignedVector = std::vector<Complex, FftwAllocator<Complex>>;

enum class Direction : int { Forward = FFTW_FORWARD, Inverse = FFTW_BACKWARD };

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, Direction dir) {
    const std::lock_guard lock(mutex_);
    const auto key = std::make_pair(n, static_cast<int>(dir));
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    // Planning needs a scratch array of the right alignment; FFTW_ESTIMATE
    // leaves its contents untouched.
    AlignedVector scratch(n);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), p, p, static_cast<int>(dir), FFTW_ESTIMATE);
    if (plan == nullptr) throw std::runtime_error("fftw_plan_dft_1d failed");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

}  // namespace detail

/// In-place unnormalized DFT. Inverse followed by forward scales by size().
inline void transform(AlignedVector& data, Direction dir) {
  if (data.empty()) return;
  fftw_plan plan = detail::PlanCache::instance().get(data.size(), dir);
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);  // new-array execute is thread-safe
}

inline void forward(AlignedVector& data) { transform(data, Direction::Forward); }
inline void inverse(AlignedVector& data) { transform(data, Direction::Inverse); }

/// Smallest power of two >= n.
inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace soosync::fft
