// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include "vstlm/numerics/tensor.hpp"

namespace vstlm::nn::detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline ConstMatMap mat(const Tensor& t) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

inline MatMap mat(Tensor& t) {
  return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

}  // namespace vstlm::nn::detail
