// SPDX-License-Identifier: Apache-2.0
#include "vstlm/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "vstlm/numerics/error.hpp"

namespace vstlm::nn {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(values.begin(), values.end()) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor " + shape_string(shape_) + " given " + std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(n * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw ShapeError("ragged matrix literal");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor(Shape{n, m}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("expected a matrix, got " + shape_string(shape_));
  return shape_[1];
}

std::span<double> Tensor::row(std::size_t r) { return {data_.data() + r * shape_[1], shape_[1]}; }

std::span<const double> Tensor::row(std::size_t r) const { return {data_.data() + r * shape_[1], shape_[1]}; }

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on " + shape_string(shape_));
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) {
    throw ShapeError("add " + shape_string(shape_) + " += " + shape_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool Tensor::identical(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("compare " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Parameter::Parameter(std::string name_, Tensor value_, ParamRole role_, bool trainable_)
    : name(std::move(name_)), value(std::move(value_)), grad(Tensor::zeros_like(value)), role(role_), trainable(trainable_) {}

std::size_t count_scalars(std::span<Parameter* const> params, bool trainable_only) {
  std::size_t n = 0;
  for (const auto* p : params) {
    if (!trainable_only || p->trainable) n += p->value.size();
  }
  return n;
}

}  // namespace vstlm::nn
