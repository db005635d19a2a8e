#include "otdebias/tensor.hpp"

#include <cmath>
#include <string>

#include "otdebias/error.hpp"

namespace otdebias {

std::size_t checked_element_count(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  std::size_t n = 1;
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be >= 1");
    n *= extent;
  }
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  if (!std::isfinite(fill)) throw DataError("tensor fill value must be finite");
  data_.assign(checked_element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t n = checked_element_count(shape_);
  if (n != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape product " +
                     std::to_string(n));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw DataError("tensor elements must be finite");
  }
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range");
  return shape_[axis];
}

double Tensor::at(std::span<const std::size_t> index) const { return data_[flatten_index(shape_, index)]; }

Tensor Tensor::reshaped(Shape shape) const {
  if (checked_element_count(shape) != data_.size()) throw ShapeError("reshape changes element count");
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

std::size_t flatten_index(const Shape& shape, std::span<const std::size_t> index) {
  if (index.size() != shape.size()) throw ShapeError("index rank does not match tensor rank");
  std::size_t flat = 0;
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    if (index[axis] >= shape[axis]) throw ShapeError("index out of bounds");
    flat = flat * shape[axis] + index[axis];
  }
  return flat;
}

std::vector<std::size_t> unflatten_index(const Shape& shape, std::size_t flat) {
  const std::size_t n = checked_element_count(shape);
  if (flat >= n) throw ShapeError("flat index out of bounds");
  std::vector<std::size_t> index(shape.size());
  for (std::size_t axis = shape.size(); axis-- > 0;) {
    index[axis] = flat % shape[axis];
    flat /= shape[axis];
  }
  return index;
}

}  // namespace otdebias
