#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace avaca {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major array of doubles. Every value is finite; constructors and
// require_finite() throw NumericError otherwise.
class Array {
 public:
  Array() = default;
  explicit Array(Shape shape);
  Array(Shape shape, std::vector<double> data);

  static Array zeros(Shape shape) { return Array(std::move(shape)); }
  static Array filled(Shape shape, double value);
  static Array scalar(double value) { return Array({1}, {value}); }
  static Array vector(std::vector<double> values);
  static Array matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> mutable_data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

  double item() const;

  // Same data, new shape of equal element count.
  Array reshaped(Shape shape) const;

  void require_finite(const std::string& context) const;

  bool operator==(const Array& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace avaca
