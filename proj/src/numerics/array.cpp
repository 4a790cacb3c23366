#include "avaca/array.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "avaca/error.hpp"

namespace avaca {

std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Array::Array(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("array of shape " + shape_string(shape_) + " cannot hold " +
                         std::to_string(data_.size()) + " values");
  }
  require_finite("array construction");
}

Array Array::filled(Shape shape, double value) {
  Array out(std::move(shape));
  std::fill(out.data_.begin(), out.data_.end(), value);
  out.require_finite("Array::filled");
  return out;
}

Array Array::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array({n}, std::move(values));
}

Array Array::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Array({r, c}, std::move(data));
}

std::size_t Array::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Array::rows() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_string(shape_));
  return shape_[0];
}

std::size_t Array::cols() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got shape " + shape_string(shape_));
  return shape_[1];
}

double Array::item() const {
  if (data_.size() != 1) throw DimensionError("item() on array of shape " + shape_string(shape_));
  return data_[0];
}

Array Array::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Array out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

void Array::require_finite(const std::string& context) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError(context + ": non-finite value at flat index " + std::to_string(i) + " of array " +
                         shape_string(shape_));
    }
  }
}

}  // namespace avaca
