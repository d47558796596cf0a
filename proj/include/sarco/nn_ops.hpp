#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sarco/tensor.hpp"

namespace sarco::nn {

// Forward/backward pairs for every layer the UNet variants use. Backward
// functions take the forward inputs (or cached argmax indices) and the
// upstream gradient, and return gradients; they never mutate parameters.
// All max-type reductions break ties toward the first index.

template <typename Scalar>
struct Conv2dGrads {
  Tensor<Scalar> input;  // empty when not requested
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

/// Stride-1 cross-correlation with zero "same" padding.
/// x: [N, Cin, H, W], weight: [Cout, Cin, kh, kw] (odd kh, kw), bias: [Cout].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias);

template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                                    const Tensor<Scalar>& grad_out, bool need_input_grad = true);

enum class BnMode { kTrain, kInfer };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename Scalar>
struct BatchNorm {
  using Vector = typename Tensor<Scalar>::Vector;
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
  Vector running_mean;
  Vector running_var;

  static BatchNorm make(Index channels) {
    return {Tensor<Scalar>::constant({channels}, Scalar(1)), Tensor<Scalar>({channels}),
            Vector::Zero(channels), Vector::Ones(channels)};
  }
};

template <typename Scalar>
struct BatchNormCache {
  typename Tensor<Scalar>::Vector mean;
  typename Tensor<Scalar>::Vector inv_std;
};

template <typename Scalar>
struct BatchNormGrads {
  Tensor<Scalar> input;
  typename Tensor<Scalar>::Vector gamma;
  typename Tensor<Scalar>::Vector beta;
};

/// Per-channel normalisation over (N, H, W). Train mode uses batch statistics
/// (biased variance) and updates running stats with momentum 0.1 (unbiased
/// variance); infer mode uses the running stats.
template <typename Scalar>
Tensor<Scalar> batchnorm2d(const Tensor<Scalar>& x, BatchNorm<Scalar>& bn, BnMode mode,
                           BatchNormCache<Scalar>* cache = nullptr);

/// Running-statistics normalisation; does not touch `bn`.
template <typename Scalar>
Tensor<Scalar> batchnorm2d_infer(const Tensor<Scalar>& x, const BatchNorm<Scalar>& bn);

/// Backward of train-mode batch norm.
template <typename Scalar>
BatchNormGrads<Scalar> batchnorm2d_backward(const Tensor<Scalar>& x, const BatchNorm<Scalar>& bn,
                                            const BatchNormCache<Scalar>& cache,
                                            const Tensor<Scalar>& grad_out);

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x);
/// `x` may be either the relu input or its output; only the sign is used.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out);

template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax;  // flat input offsets, one per output element
};

/// 2x2 stride-2 max pooling. Odd H or W is padded right/bottom with -inf, so
/// the output is ceil(H/2) x ceil(W/2).
template <typename Scalar>
PoolResult<Scalar> maxpool2d(const Tensor<Scalar>& x);

/// Scatters the upstream gradient to the recorded argmax positions.
template <typename Scalar>
Tensor<Scalar> max_backward(const Shape& input_shape, const std::vector<Index>& argmax,
                            const Tensor<Scalar>& grad_out);

template <typename Scalar>
Tensor<Scalar> upsample_nearest(const Tensor<Scalar>& x, Index factor = 2);
template <typename Scalar>
Tensor<Scalar> upsample_nearest_backward(const Tensor<Scalar>& grad_out, Index factor = 2);

/// Channel concatenation of [N, Ca, H, W] and [N, Cb, H, W].
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> split_channels(const Tensor<Scalar>& grad_out,
                                                         Index channels_a);

/// out[n, c, h] = max_w x[n, c, h, w].
template <typename Scalar>
PoolResult<Scalar> global_horizontal_maxpool(const Tensor<Scalar>& x);

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x);
/// Uses the sigmoid output `y`.
template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& grad_out);

/// Softmax along axis 1 of [N, K, H, W].
template <typename Scalar>
Tensor<Scalar> softmax_channels(const Tensor<Scalar>& logits);

template <typename Scalar>
struct LossResult {
  Scalar value;
  Tensor<Scalar> grad;
};

/// Mean squared error over all elements.
template <typename Scalar>
LossResult<Scalar> mse_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target);

/// Mean softmax cross-entropy; labels hold N*H*W class indices in NHW order.
/// With class weights the mean is weighted: sum(w_y * nll) / sum(w_y).
template <typename Scalar>
LossResult<Scalar> softmax_ce_loss(const Tensor<Scalar>& logits, const Eigen::ArrayXi& labels,
                                   const std::vector<double>& class_weights = {});

}  // namespace sarco::nn
