#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace otdebias {

using Shape = std::vector<std::size_t>;

/// Dense row-major array of doubles with an explicit shape.
///
/// Constructors reject zero extents and non-finite values, so a freshly built
/// Tensor always satisfies product(shape) == size() with finite elements.
/// Mutable access through data()/operator() is unchecked.
class Tensor {
 public:
  Tensor() = default;

  /// Tensor of the given shape with every element equal to `fill`.
  explicit Tensor(Shape shape, double fill = 0.0);

  /// Takes ownership of `data`; its length must equal the product of `shape`.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor filled(Shape shape, double fill) { return Tensor(std::move(shape), fill); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Bounds-checked access by multi-index.
  double at(std::span<const std::size_t> index) const;
  double at(std::initializer_list<std::size_t> index) const {
    return at(std::span<const std::size_t>(index.begin(), index.size()));
  }

  /// Same data, new shape with an equal element count.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Product of extents; throws ShapeError on an empty shape or a zero extent.
std::size_t checked_element_count(const Shape& shape);

/// Row-major flat offset of a multi-index.
std::size_t flatten_index(const Shape& shape, std::span<const std::size_t> index);

/// Inverse of flatten_index.
std::vector<std::size_t> unflatten_index(const Shape& shape, std::size_t flat);

}  // namespace otdebias
