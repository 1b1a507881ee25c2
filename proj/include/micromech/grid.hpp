#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace micromech {

/// Pixel grid extents: t1 rows (axis x1) by t2 columns (axis x2).
struct Shape {
  std::size_t t1 = 0;
  std::size_t t2 = 0;

  constexpr std::size_t size() const { return t1 * t2; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense row-major 2-D field of T. Element (i, j) lives at i * t2 + j.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Shape shape, const T& fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
  Grid(std::size_t t1, std::size_t t2, const T& fill = T{}) : Grid(Shape{t1, t2}, fill) {}

  Shape shape() const { return shape_; }
  std::size_t rows() const { return shape_.t1; }
  std::size_t cols() const { return shape_.t2; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_.t2 + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_.t2 + j]; }
  T& operator[](std::size_t k) { return data_[k]; }
  const T& operator[](std::size_t k) const { return data_[k]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.shape() != b.shape()) throw std::invalid_argument(std::string(what) + ": grid shape mismatch");
}

}  // namespace micromech
