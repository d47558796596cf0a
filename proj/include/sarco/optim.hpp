#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sarco/tensor.hpp"

namespace sarco::nn {

/// A trainable tensor and the name reported in diagnostics.
template <typename Scalar>
struct ParamRef {
  std::string name;
  Tensor<Scalar>* tensor;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  std::vector<typename Tensor<Scalar>::Vector> m;
  std::vector<typename Tensor<Scalar>::Vector> v;
};

/// One bias-corrected Adam update using each parameter's grad buffer.
/// If any gradient is non-finite, nothing is updated and an ErrorKind::kNumeric
/// naming the parameter is thrown.
template <typename Scalar>
void adam_step(const std::vector<ParamRef<Scalar>>& params, AdamState<Scalar>& state,
               const AdamConfig& config);

}  // namespace sarco::nn
