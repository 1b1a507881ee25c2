#pragma once

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>

#include "micromech/grid.hpp"

namespace micromech {

namespace detail {

// FFTW planning is not thread-safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

struct PlanDeleter {
  void operator()(fftw_plan p) const noexcept {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};

using PlanPtr = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;

}  // namespace detail

using Complex = std::complex<double>;

/// Real <-> half-complex 2-D transform pair on a fixed grid.
///
/// forward() is unnormalized; inverse() divides by t1*t2, so
/// inverse(forward(x)) == x up to rounding. The half spectrum has
/// t1 x (t2/2 + 1) entries in row-major order. Plans use FFTW_ESTIMATE so
/// that results are bitwise reproducible between runs.
class RealFft2 {
 public:
  explicit RealFft2(Shape shape)
      : shape_(shape),
        half_cols_(shape.t2 / 2 + 1),
        real_(static_cast<double*>(fftw_malloc(sizeof(double) * shape.size()))),
        spec_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * shape.t1 * half_cols_))) {
    if (shape.t1 == 0 || shape.t2 == 0) throw std::invalid_argument("RealFft2: empty grid");
    if (!real_ || !spec_) throw std::bad_alloc();
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int n0 = static_cast<int>(shape.t1);
    const int n1 = static_cast<int>(shape.t2);
    fwd_.reset(fftw_plan_dft_r2c_2d(n0, n1, real_.get(), spec_.get(), FFTW_ESTIMATE));
    inv_.reset(fftw_plan_dft_c2r_2d(n0, n1, spec_.get(), real_.get(), FFTW_ESTIMATE));
    if (!fwd_ || !inv_) throw std::runtime_error("RealFft2: FFTW planning failed");
  }

  RealFft2(const RealFft2&) = delete;
  RealFft2& operator=(const RealFft2&) = delete;
  RealFft2(RealFft2&&) noexcept = default;
  RealFft2& operator=(RealFft2&&) noexcept = default;

  Shape shape() const { return shape_; }
  std::size_t half_cols() const { return half_cols_; }
  std::size_t spectral_size() const { return shape_.t1 * half_cols_; }

  void forward(std::span<const double> in, std::span<Complex> out) {
    check(in.size() == shape_.size() && out.size() == spectral_size());
    std::copy(in.begin(), in.end(), real_.get());
    fftw_execute(fwd_.get());
    const auto* s = reinterpret_cast<const Complex*>(spec_.get());
    std::copy(s, s + spectral_size(), out.begin());
  }

  void inverse(std::span<const Complex> in, std::span<double> out) {
    check(in.size() == spectral_size() && out.size() == shape_.size());
    std::copy(in.begin(), in.end(), reinterpret_cast<Complex*>(spec_.get()));
    fftw_execute(inv_.get());
    const double scale = 1.0 / static_cast<double>(shape_.size());
    std::transform(real_.get(), real_.get() + shape_.size(), out.begin(),
                   [scale](double x) { return x * scale; });
  }

 private:
  static void check(bool ok) {
    if (!ok) throw std::invalid_argument("RealFft2: buffer size mismatch");
  }

  Shape shape_;
  std::size_t half_cols_;
  std::unique_ptr<double, detail::FftwFree> real_;
  std::unique_ptr<fftw_complex, detail::FftwFree> spec_;
  detail::PlanPtr fwd_;
  detail::PlanPtr inv_;
};

}  // namespace micromech
