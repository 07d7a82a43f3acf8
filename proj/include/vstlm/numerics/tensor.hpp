// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace vstlm::nn {

using Shape = std::vector<std::size_t>;

/// Cache-line aligned storage. Vectorized kernels take different code paths
/// for different pointer alignments, so a fixed alignment keeps results
/// bitwise stable across allocations.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles. Rank 0 holds one scalar.
class Tensor {
 public:
  Tensor() : shape_{0} {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  /// Single value of a rank-0 or one-element tensor.
  double item() const;

  void fill(double v);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double s);

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  /// Bitwise equality of shape and every value.
  bool identical(const Tensor& other) const;

 private:
  Shape shape_;
  Storage data_;
};

/// Largest elementwise |a - b|; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

enum class ParamRole {
  kWeight,     // matrices and embedding tables; receive weight decay
  kBias,
  kGain,
  kCodebook,   // updated by EMA, never by the optimizer
};

/// A named tensor owned by a model, with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value, ParamRole role = ParamRole::kWeight, bool trainable = true);

  std::string name;
  Tensor value;
  Tensor grad;
  ParamRole role = ParamRole::kWeight;
  bool trainable = true;

  void zero_grad() { grad.fill(0.0); }
  bool decays() const { return role == ParamRole::kWeight; }
};

std::size_t count_scalars(std::span<Parameter* const> params, bool trainable_only = false);

}  // namespace vstlm::nn
