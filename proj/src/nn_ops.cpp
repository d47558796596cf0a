#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "sarco/nn_ops.hpp"

namespace sarco::nn {

namespace {

template <typename Scalar>
using RowMatrix = typename Tensor<Scalar>::RowMatrix;

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw Error(ErrorKind::kDimension, std::string(op) + ": expected rank " + std::to_string(rank) +
                                           " tensor, got " + shape_string(shape));
  }
}

// Band of output rows [r0, r1): cols[(c*kh + i)*kw + j][(h - r0)*W + w] =
// x[c, h + i - ph, w + j - pw], zero outside the image.
template <typename Scalar>
void im2col(const Scalar* x, Index channels, Index height, Index width, Index kh, Index kw, Index r0,
            Index r1, Scalar* cols) {
  const Index ph = kh / 2;
  const Index pw = kw / 2;
  const Index band = (r1 - r0) * width;
  for (Index c = 0; c < channels; ++c) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        Scalar* dst = cols + ((c * kh + i) * kw + j) * band;
        const Index w_begin = std::max<Index>(0, pw - j);
        const Index w_end = std::min<Index>(width, width + pw - j);
        for (Index h = r0; h < r1; ++h) {
          Scalar* out = dst + (h - r0) * width;
          const Index sh = h + i - ph;
          if (sh < 0 || sh >= height || w_begin >= w_end) {
            std::fill(out, out + width, Scalar(0));
            continue;
          }
          const Scalar* src = x + (c * height + sh) * width + (j - pw);
          std::fill(out, out + w_begin, Scalar(0));
          std::copy(src + w_begin, src + w_end, out + w_begin);
          std::fill(out + w_end, out + width, Scalar(0));
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Scalar* cols, Index channels, Index height, Index width, Index kh, Index kw, Index r0,
            Index r1, Scalar* x) {
  const Index ph = kh / 2;
  const Index pw = kw / 2;
  const Index band = (r1 - r0) * width;
  for (Index c = 0; c < channels; ++c) {
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        const Scalar* src_row = cols + ((c * kh + i) * kw + j) * band;
        const Index w_begin = std::max<Index>(0, pw - j);
        const Index w_end = std::min<Index>(width, width + pw - j);
        for (Index h = r0; h < r1; ++h) {
          const Index sh = h + i - ph;
          if (sh < 0 || sh >= height) continue;
          Scalar* dst = x + (c * height + sh) * width + (j - pw);
          const Scalar* src = src_row + (h - r0) * width;
          for (Index w = w_begin; w < w_end; ++w) dst[w] += src[w];
        }
      }
    }
  }
}

// Rows per im2col band, sized so the column buffer stays cache resident.
Index band_rows(Index k, Index width) {
  constexpr Index kBandValues = Index{1} << 16;
  return std::max<Index>(1, kBandValues / (k * width));
}

template <typename Scalar>
void check_conv_shapes(const Tensor<Scalar>& x, const Tensor<Scalar>& weight) {
  require_rank(x.shape(), 4, "conv2d input");
  require_rank(weight.shape(), 4, "conv2d weight");
  if (weight.dim(1) != x.dim(1)) {
    throw Error(ErrorKind::kDimension,
                "conv2d: channel axis (1) mismatch: input has " + std::to_string(x.dim(1)) +
                    " channels, kernel expects " + std::to_string(weight.dim(1)));
  }
  if (weight.dim(2) % 2 == 0 || weight.dim(3) % 2 == 0) {
    throw Error(ErrorKind::kDimension, "conv2d: kernel axes (2, 3) must be odd for same padding");
  }
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias) {
  check_conv_shapes(x, weight);
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (bias.size() != cout) {
    throw Error(ErrorKind::kDimension, "conv2d: bias axis (0) length " + std::to_string(bias.size()) +
                                           " != output channels " + std::to_string(cout));
  }
  const Index k = cin * kh * kw;
  const Index hw = h * w;
  Eigen::Map<const RowMatrix<Scalar>> wmat(weight.data().data(), cout, k);
  Tensor<Scalar> y({n, cout, h, w});
  RowMatrix<Scalar> cols;
  const bool pointwise = kh == 1 && kw == 1;
  const Index rows = band_rows(k, w);
  for (Index s = 0; s < n; ++s) {
    auto out = y.sample(s);
    if (pointwise) {
      out.noalias() = wmat * x.sample(s);
    } else {
      for (Index r0 = 0; r0 < h; r0 += rows) {
        const Index r1 = std::min(h, r0 + rows);
        cols.resize(k, (r1 - r0) * w);
        im2col(x.data().data() + s * cin * hw, cin, h, w, kh, kw, r0, r1, cols.data());
        out.middleCols(r0 * w, (r1 - r0) * w).noalias() = wmat * cols;
      }
    }
    out.colwise() += bias.data();
  }
  return y;
}

template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                                    const Tensor<Scalar>& grad_out, bool need_input_grad) {
  check_conv_shapes(x, weight);
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (grad_out.shape() != Shape{n, cout, h, w}) {
    throw Error(ErrorKind::kDimension, "conv2d_backward: gradient shape " +
                                           shape_string(grad_out.shape()) + " does not match output");
  }
  const Index k = cin * kh * kw;
  const Index hw = h * w;
  Eigen::Map<const RowMatrix<Scalar>> wmat(weight.data().data(), cout, k);

  Conv2dGrads<Scalar> g;
  g.weight = Tensor<Scalar>(weight.shape());
  g.bias = Tensor<Scalar>({cout});
  if (need_input_grad) g.input = Tensor<Scalar>(x.shape());
  Eigen::Map<RowMatrix<Scalar>> dw(g.weight.data().data(), cout, k);

  const bool pointwise = kh == 1 && kw == 1;
  RowMatrix<Scalar> cols;
  RowMatrix<Scalar> dcols;
  const Index rows = band_rows(k, w);
  for (Index s = 0; s < n; ++s) {
    const auto dy = grad_out.sample(s);
    g.bias.data() += dy.rowwise().sum();
    if (pointwise) {
      dw.noalias() += dy * x.sample(s).transpose();
      if (need_input_grad) g.input.sample(s).noalias() = wmat.transpose() * dy;
      continue;
    }
    for (Index r0 = 0; r0 < h; r0 += rows) {
      const Index r1 = std::min(h, r0 + rows);
      const auto dy_band = dy.middleCols(r0 * w, (r1 - r0) * w);
      cols.resize(k, (r1 - r0) * w);
      im2col(x.data().data() + s * cin * hw, cin, h, w, kh, kw, r0, r1, cols.data());
      dw.noalias() += dy_band * cols.transpose();
      if (need_input_grad) {
        dcols.noalias() = wmat.transpose() * dy_band;
        col2im(dcols.data(), cin, h, w, kh, kw, r0, r1, g.input.data().data() + s * cin * hw);
      }
    }
  }
  return g;
}

template <typename Scalar>
Tensor<Scalar> batchnorm2d(const Tensor<Scalar>& x, BatchNorm<Scalar>& bn, BnMode mode,
                           BatchNormCache<Scalar>* cache) {
  require_rank(x.shape(), 4, "batchnorm2d");
  const Index n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (bn.gamma.size() != c) {
    throw Error(ErrorKind::kDimension, "batchnorm2d: channel axis (1) mismatch");
  }
  using Vector = typename Tensor<Scalar>::Vector;
  const Index m = n * hw;
  Vector mean(c), inv_std(c);
  if (mode == BnMode::kTrain) {
    if (m < 2) {
      throw Error(ErrorKind::kDegenerateBatch,
                  "batchnorm2d: train mode needs more than one value per channel (N*H*W = 1)");
    }
    for (Index ch = 0; ch < c; ++ch) {
      Scalar sum = 0;
      for (Index s = 0; s < n; ++s) sum += x.sample(s).row(ch).sum();
      const Scalar mu = sum / Scalar(m);
      Scalar sq = 0;
      for (Index s = 0; s < n; ++s) sq += (x.sample(s).row(ch).array() - mu).square().sum();
      const Scalar var = sq / Scalar(m);
      mean[ch] = mu;
      inv_std[ch] = Scalar(1) / std::sqrt(var + Scalar(kBatchNormEps));
      const Scalar unbiased = sq / Scalar(m - 1);
      bn.running_mean[ch] = Scalar(1 - kBatchNormMomentum) * bn.running_mean[ch] +
                            Scalar(kBatchNormMomentum) * mu;
      bn.running_var[ch] = Scalar(1 - kBatchNormMomentum) * bn.running_var[ch] +
                           Scalar(kBatchNormMomentum) * unbiased;
    }
  } else {
    mean = bn.running_mean;
    inv_std = (bn.running_var.array() + Scalar(kBatchNormEps)).rsqrt().matrix();
  }
  Tensor<Scalar> y(x.shape());
  const Vector scale = bn.gamma.data().cwiseProduct(inv_std);
  const Vector shift = bn.beta.data() - scale.cwiseProduct(mean);
  for (Index s = 0; s < n; ++s) {
    auto out = y.sample(s);
    out.noalias() = scale.asDiagonal() * x.sample(s);
    out.colwise() += shift;
  }
  if (cache) {
    cache->mean = std::move(mean);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> batchnorm2d_infer(const Tensor<Scalar>& x, const BatchNorm<Scalar>& bn) {
  BatchNorm<Scalar> view{bn.gamma, bn.beta, bn.running_mean, bn.running_var};
  return batchnorm2d(x, view, BnMode::kInfer);
}

template <typename Scalar>
BatchNormGrads<Scalar> batchnorm2d_backward(const Tensor<Scalar>& x, const BatchNorm<Scalar>& bn,
                                            const BatchNormCache<Scalar>& cache,
                                            const Tensor<Scalar>& grad_out) {
  require_rank(x.shape(), 4, "batchnorm2d_backward");
  const Index n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const Index m = n * hw;
  BatchNormGrads<Scalar> g;
  g.input = Tensor<Scalar>(x.shape());
  g.gamma.setZero(c);
  g.beta.setZero(c);
  for (Index ch = 0; ch < c; ++ch) {
    const Scalar mu = cache.mean[ch];
    const Scalar is = cache.inv_std[ch];
    Scalar dgamma = 0, dbeta = 0;
    for (Index s = 0; s < n; ++s) {
      const auto dy = grad_out.sample(s).row(ch).array();
      const auto xhat = (x.sample(s).row(ch).array() - mu) * is;
      dbeta += dy.sum();
      dgamma += (dy * xhat).sum();
    }
    g.gamma[ch] = dgamma;
    g.beta[ch] = dbeta;
    const Scalar k = bn.gamma[ch] * is / Scalar(m);
    for (Index s = 0; s < n; ++s) {
      const auto dy = grad_out.sample(s).row(ch).array();
      const auto xhat = (x.sample(s).row(ch).array() - mu) * is;
      g.input.sample(s).row(ch).array() = k * (Scalar(m) * dy - dbeta - xhat * dgamma);
    }
  }
  return g;
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.data().cwiseMax(Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out) {
  return Tensor<Scalar>(
      x.shape(), (x.data().array() > Scalar(0)).select(grad_out.data().array(), Scalar(0)).matrix());
}

template <typename Scalar>
PoolResult<Scalar> maxpool2d(const Tensor<Scalar>& x) {
  require_rank(x.shape(), 4, "maxpool2d");
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index oh = (h + 1) / 2, ow = (w + 1) / 2;
  PoolResult<Scalar> r{Tensor<Scalar>({n, c, oh, ow}), std::vector<Index>(n * c * oh * ow)};
  const Scalar* in = x.data().data();
  Scalar* out = r.output.data().data();
  Index o = 0;
  for (Index plane = 0; plane < n * c; ++plane) {
    const Index base = plane * h * w;
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j, ++o) {
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        Index arg = base + (2 * i) * w + 2 * j;
        for (Index di = 0; di < 2; ++di) {
          const Index hi = 2 * i + di;
          if (hi >= h) break;
          for (Index dj = 0; dj < 2; ++dj) {
            const Index wj = 2 * j + dj;
            if (wj >= w) break;
            const Index off = base + hi * w + wj;
            if (in[off] > best) {
              best = in[off];
              arg = off;
            }
          }
        }
        out[o] = best;
        r.argmax[o] = arg;
      }
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> max_backward(const Shape& input_shape, const std::vector<Index>& argmax,
                            const Tensor<Scalar>& grad_out) {
  Tensor<Scalar> dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += grad_out[static_cast<Index>(i)];
  return dx;
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest(const Tensor<Scalar>& x, Index factor) {
  require_rank(x.shape(), 4, "upsample_nearest");
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index oh = h * factor, ow = w * factor;
  Tensor<Scalar> y({n, c, oh, ow});
  const Scalar* in = x.data().data();
  Scalar* out = y.data().data();
  for (Index plane = 0; plane < n * c; ++plane) {
    for (Index i = 0; i < oh; ++i) {
      const Scalar* src = in + (plane * h + i / factor) * w;
      Scalar* dst = out + (plane * oh + i) * ow;
      for (Index j = 0; j < ow; ++j) dst[j] = src[j / factor];
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest_backward(const Tensor<Scalar>& grad_out, Index factor) {
  require_rank(grad_out.shape(), 4, "upsample_nearest_backward");
  const Index n = grad_out.dim(0), c = grad_out.dim(1), oh = grad_out.dim(2), ow = grad_out.dim(3);
  const Index h = oh / factor, w = ow / factor;
  Tensor<Scalar> dx({n, c, h, w});
  const Scalar* in = grad_out.data().data();
  Scalar* out = dx.data().data();
  for (Index plane = 0; plane < n * c; ++plane) {
    for (Index i = 0; i < oh; ++i) {
      const Scalar* src = in + (plane * oh + i) * ow;
      Scalar* dst = out + (plane * h + i / factor) * w;
      for (Index j = 0; j < ow; ++j) dst[j / factor] += src[j];
    }
  }
  return dx;
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_rank(a.shape(), 4, "concat_channels");
  require_rank(b.shape(), 4, "concat_channels");
  for (std::size_t axis : {0u, 2u, 3u}) {
    if (a.dim(axis) != b.dim(axis)) {
      throw Error(ErrorKind::kDimension, "concat_channels: axis " + std::to_string(axis) +
                                             " mismatch " + shape_string(a.shape()) + " vs " +
                                             shape_string(b.shape()));
    }
  }
  const Index n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor<Scalar> y({n, ca + cb, a.dim(2), a.dim(3)});
  for (Index s = 0; s < n; ++s) {
    auto out = y.sample(s);
    out.topRows(ca) = a.sample(s);
    out.bottomRows(cb) = b.sample(s);
  }
  return y;
}

template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> split_channels(const Tensor<Scalar>& grad_out,
                                                         Index channels_a) {
  const Index n = grad_out.dim(0), c = grad_out.dim(1), h = grad_out.dim(2), w = grad_out.dim(3);
  Tensor<Scalar> a({n, channels_a, h, w});
  Tensor<Scalar> b({n, c - channels_a, h, w});
  for (Index s = 0; s < n; ++s) {
    a.sample(s) = grad_out.sample(s).topRows(channels_a);
    b.sample(s) = grad_out.sample(s).bottomRows(c - channels_a);
  }
  return {std::move(a), std::move(b)};
}

template <typename Scalar>
PoolResult<Scalar> global_horizontal_maxpool(const Tensor<Scalar>& x) {
  require_rank(x.shape(), 4, "global_horizontal_maxpool");
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  PoolResult<Scalar> r{Tensor<Scalar>({n, c, h}), std::vector<Index>(n * c * h)};
  const Scalar* in = x.data().data();
  for (Index row = 0; row < n * c * h; ++row) {
    const Scalar* src = in + row * w;
    Index arg = 0;
    for (Index j = 1; j < w; ++j) {
      if (src[j] > src[arg]) arg = j;
    }
    r.output[row] = src[arg];
    r.argmax[row] = row * w + arg;
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.data().unaryExpr([](Scalar v) {
    return v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v)) : std::exp(v) / (Scalar(1) + std::exp(v));
  }));
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& grad_out) {
  return Tensor<Scalar>(
      y.shape(),
      (grad_out.data().array() * y.data().array() * (Scalar(1) - y.data().array())).matrix());
}

template <typename Scalar>
Tensor<Scalar> softmax_channels(const Tensor<Scalar>& logits) {
  require_rank(logits.shape(), 4, "softmax_channels");
  Tensor<Scalar> p(logits.shape());
  for (Index s = 0; s < logits.dim(0); ++s) {
    const auto z = logits.sample(s);
    auto out = p.sample(s);
    const auto zmax = z.colwise().maxCoeff().eval();
    out = (z.rowwise() - zmax).array().exp().matrix();
    const auto denom = out.colwise().sum().eval();
    out.array().rowwise() /= denom.array();
  }
  return p;
}

template <typename Scalar>
LossResult<Scalar> mse_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (pred.shape() != target.shape()) {
    throw Error(ErrorKind::kDimension, "mse_loss: shape mismatch " + shape_string(pred.shape()) +
                                           " vs " + shape_string(target.shape()));
  }
  const auto diff = (pred.data() - target.data()).eval();
  const Scalar count = Scalar(pred.size());
  return {diff.squaredNorm() / count, Tensor<Scalar>(pred.shape(), Scalar(2) * diff / count)};
}

template <typename Scalar>
LossResult<Scalar> softmax_ce_loss(const Tensor<Scalar>& logits, const Eigen::ArrayXi& labels,
                                   const std::vector<double>& class_weights) {
  require_rank(logits.shape(), 4, "softmax_ce_loss");
  const Index n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  const Index hw = h * w;
  if (labels.size() != n * hw) {
    throw Error(ErrorKind::kDimension, "softmax_ce_loss: expected " + std::to_string(n * hw) +
                                           " labels, got " + std::to_string(labels.size()));
  }
  if (!class_weights.empty() && static_cast<Index>(class_weights.size()) != k) {
    throw Error(ErrorKind::kDimension, "softmax_ce_loss: class weight count != classes");
  }
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      const Index s = i / hw, r = (i % hw) / w, c = i % w;
      throw Error(ErrorKind::kLabel, "softmax_ce_loss: label " + std::to_string(labels[i]) +
                                         " out of range [0," + std::to_string(k) + ") at (n=" +
                                         std::to_string(s) + ", h=" + std::to_string(r) +
                                         ", w=" + std::to_string(c) + ")");
    }
  }
  Tensor<Scalar> grad = softmax_channels(logits);
  Scalar total = 0;
  Scalar weight_sum = 0;
  for (Index s = 0; s < n; ++s) {
    const auto z = logits.sample(s);
    auto g = grad.sample(s);
    for (Index p = 0; p < hw; ++p) {
      const int y = labels[s * hw + p];
      const Scalar wy = class_weights.empty() ? Scalar(1) : Scalar(class_weights[y]);
      const Scalar zmax = z.col(p).maxCoeff();
      const Scalar lse = zmax + std::log((z.col(p).array() - zmax).exp().sum());
      total += wy * (lse - z(y, p));
      weight_sum += wy;
      g(y, p) -= Scalar(1);
      g.col(p) *= wy;
    }
  }
  if (!(weight_sum > 0)) throw Error(ErrorKind::kNumeric, "softmax_ce_loss: zero total weight");
  grad.data() /= weight_sum;
  return {total / weight_sum, std::move(grad)};
}

#define SARCO_INSTANTIATE_NN(S)                                                                 \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);              \
  template Conv2dGrads<S> conv2d_backward(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, \
                                          bool);                                                \
  template Tensor<S> batchnorm2d(const Tensor<S>&, BatchNorm<S>&, BnMode, BatchNormCache<S>*);  \
  template Tensor<S> batchnorm2d_infer(const Tensor<S>&, const BatchNorm<S>&);                 \
  template BatchNormGrads<S> batchnorm2d_backward(const Tensor<S>&, const BatchNorm<S>&,        \
                                                  const BatchNormCache<S>&, const Tensor<S>&);  \
  template Tensor<S> relu(const Tensor<S>&);                                                    \
  template Tensor<S> relu_backward(const Tensor<S>&, const Tensor<S>&);                         \
  template PoolResult<S> maxpool2d(const Tensor<S>&);                                           \
  template Tensor<S> max_backward(const Shape&, const std::vector<Index>&, const Tensor<S>&);   \
  template Tensor<S> upsample_nearest(const Tensor<S>&, Index);                                 \
  template Tensor<S> upsample_nearest_backward(const Tensor<S>&, Index);                        \
  template Tensor<S> concat_channels(const Tensor<S>&, const Tensor<S>&);                       \
  template std::pair<Tensor<S>, Tensor<S>> split_channels(const Tensor<S>&, Index);             \
  template PoolResult<S> global_horizontal_maxpool(const Tensor<S>&);                           \
  template Tensor<S> sigmoid(const Tensor<S>&);                                                 \
  template Tensor<S> sigmoid_backward(const Tensor<S>&, const Tensor<S>&);                      \
  template Tensor<S> softmax_channels(const Tensor<S>&);                                        \
  template LossResult<S> mse_loss(const Tensor<S>&, const Tensor<S>&);                          \
  template LossResult<S> softmax_ce_loss(const Tensor<S>&, const Eigen::ArrayXi&,               \
                                         const std::vector<double>&);

SARCO_INSTANTIATE_NN(float)
SARCO_INSTANTIATE_NN(double)

#undef SARCO_INSTANTIATE_NN

}  // namespace sarco::nn
