// Copyright 2026 The dcl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

namespace dcl {

using cplx = std::complex<double>;

/// Process-wide cache of FFTW plans.
///
/// Plans are created with FFTW_ESTIMATE so that the chosen algorithm, and
/// hence every floating point result, depends only on the transform shape and
/// the thread count. Plans are FFTW_UNALIGNED and are executed through the
/// new-array interface on whatever buffer the caller passes.
class FftEngine {
 public:
  static FftEngine& instance() {
    static FftEngine engine;
    return engine;
  }

  FftEngine(const FftEngine&) = delete;
  FftEngine& operator=(const FftEngine&) = delete;

  /// Caps the number of threads FFTW may use for plans created afterwards.
  void set_threads(int threads) {
    std::lock_guard lock(mutex_);
    if (threads < 1) threads = 1;
    if (threads == threads_) return;
    clear_locked();
    threads_ = threads;
    fftw_plan_with_nthreads(threads_);
  }

  int threads() const { return threads_; }

  /// Unnormalised in-place complex transform of `howmany` contiguous blocks,
  /// each a row-major array with the given dims. sign = FFTW_FORWARD/BACKWARD.
  void c2c(std::span<cplx> data, const std::vector<int>& dims, int howmany,
           int sign) {
    std::size_t block = 1;
    for (int d : dims) block *= static_cast<std::size_t>(d);
    fftw_plan plan = nullptr;
    {
      std::lock_guard lock(mutex_);
      Key key{dims, howmany, sign, 0};
      auto it = plans_.find(key);
      if (it == plans_.end()) {
        auto* buf = reinterpret_cast<fftw_complex*>(data.data());
        plan = fftw_plan_many_dft(static_cast<int>(dims.size()), dims.data(),
                                  howmany, buf, nullptr, 1,
                                  static_cast<int>(block), buf, nullptr, 1,
                                  static_cast<int>(block), sign,
                                  FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
      } else {
        plan = it->second;
      }
    }
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, buf, buf);
  }

  /// In-place real-to-half-complex transform. The buffer holds the real
  /// array with the last axis padded to 2 (dims[n-1]/2 + 1) doubles.
  void r2c_inplace(std::span<double> buf, const std::vector<int>& dims) {
    fftw_plan plan = get_inplace_plan(buf.data(), dims, +1);
    fftw_execute_dft_r2c(plan, buf.data(),
                         reinterpret_cast<fftw_complex*>(buf.data()));
  }

  /// Inverse of r2c_inplace (unnormalised).
  void c2r_inplace(std::span<double> buf, const std::vector<int>& dims) {
    fftw_plan plan = get_inplace_plan(buf.data(), dims, -1);
    fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(buf.data()),
                         buf.data());
  }

  /// In-place type-I DCT along every axis (FFTW REDFT00, unnormalised). An
  /// array of m+1 samples per axis holds an even sequence of period 2m.
  void redft00(std::span<double> buf, const std::vector<int>& dims) {
    fftw_plan plan = nullptr;
    {
      std::lock_guard lock(mutex_);
      Key key{dims, 1, 0, 3};
      auto it = plans_.find(key);
      if (it == plans_.end()) {
        std::vector<fftw_r2r_kind> kinds(dims.size(), FFTW_REDFT00);
        plan = fftw_plan_r2r(static_cast<int>(dims.size()), dims.data(),
                             buf.data(), buf.data(), kinds.data(),
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
      } else {
        plan = it->second;
      }
    }
    fftw_execute_r2r(plan, buf.data(), buf.data());
  }

  /// Number of doubles in an in-place r2c buffer.
  static std::size_t inplace_size(const std::vector<int>& dims) {
    return 2 * half_size(dims);
  }

  static std::size_t half_size(const std::vector<int>& dims) {
    std::size_t s = 1;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) s *= dims[i];
    return s * (dims.back() / 2 + 1);
  }

 private:
  using Key = std::tuple<std::vector<int>, int, int, int>;

  FftEngine() {
    fftw_init_threads();
    fftw_plan_with_nthreads(threads_);
  }
  ~FftEngine() { clear_locked(); }

  // FFTW_ESTIMATE planning leaves the arrays untouched, so the caller's
  // buffer is used directly.
  fftw_plan get_inplace_plan(double* buf, const std::vector<int>& dims,
                             int dir) {
    std::lock_guard lock(mutex_);
    Key key{dims, 1, dir, 2};
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    auto* cb = reinterpret_cast<fftw_complex*>(buf);
    const int rank = static_cast<int>(dims.size());
    fftw_plan plan =
        dir > 0 ? fftw_plan_dft_r2c(rank, dims.data(), buf, cb,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED)
                : fftw_plan_dft_c2r(rank, dims.data(), cb, buf,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  void clear_locked() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    plans_.clear();
  }

  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
  int threads_ = 1;
};

}  // namespace dcl
