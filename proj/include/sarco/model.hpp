#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sarco/nn_ops.hpp"
#include "sarco/optim.hpp"
#include "sarco/tensor.hpp"

namespace sarco {

enum class HeadKind { kHeatmap1d, kSegmentation };

std::string_view to_string(HeadKind head);
HeadKind parse_head(std::string_view name);

/// Declarative UNet description. Level l has base_channels * 2^l channels; the
/// bottleneck sits below the last encoder level.
struct ModelSpec {
  int levels = 3;
  int base_channels = 16;
  int convs_per_block = 2;
  HeadKind head = HeadKind::kHeatmap1d;
  int num_classes = 4;
  int input_channels = 1;

  void validate() const;
  int output_channels() const { return head == HeadKind::kHeatmap1d ? 1 : num_classes; }
  /// Spatial dims fed to the network must be multiples of this.
  Index size_multiple() const { return Index{1} << levels; }
  bool operator==(const ModelSpec&) const = default;
};

/// One convolutional unit: conv, then (optionally) batch norm and ReLU.
template <typename Scalar>
struct LayerParams {
  std::string name;
  Tensor<Scalar> weight;  // [out, in, kh, kw]
  Tensor<Scalar> bias;    // [out]
  bool has_batchnorm = true;
  nn::BatchNorm<Scalar> bn;
};

template <typename Scalar>
struct ForwardTrace {
  struct Unit {
    Tensor<Scalar> input;
    Tensor<Scalar> conv_out;
    nn::BatchNormCache<Scalar> cache;
  };
  std::vector<Unit> units;
  std::vector<Shape> pool_shapes;
  std::vector<std::vector<Index>> pool_argmax;
  Tensor<Scalar> head_input;
  Shape head_shape;
  std::vector<Index> row_argmax;
  Tensor<Scalar> output;
};

template <typename Scalar>
class Model {
 public:
  Model() = default;
  Model(ModelSpec spec, std::uint64_t seed, std::vector<LayerParams<Scalar>> layers);

  const ModelSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<LayerParams<Scalar>>& layers() const { return layers_; }
  std::vector<LayerParams<Scalar>>& layers() { return layers_; }
  Index parameter_count() const;

  /// x: [N, C, H, W] with H, W multiples of 2^levels. Returns [N, 1, H]
  /// post-sigmoid confidences (heatmap head) or [N, K, H, W] logits
  /// (segmentation head). Train mode updates batch-norm running statistics
  /// and, if `trace` is given, records what `backward` needs.
  Tensor<Scalar> forward(const Tensor<Scalar>& x, nn::BnMode mode,
                         ForwardTrace<Scalar>* trace = nullptr);
  /// Inference-mode forward; safe to call concurrently.
  Tensor<Scalar> predict(const Tensor<Scalar>& x) const;

  /// Accumulates parameter gradients for d(loss)/d(output) = grad_output.
  void backward(const ForwardTrace<Scalar>& trace, const Tensor<Scalar>& grad_output);

  std::vector<nn::ParamRef<Scalar>> parameters();
  void zero_grad();

  template <typename Other>
  Model<Other> cast() const {
    std::vector<LayerParams<Other>> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) {
      LayerParams<Other> o;
      o.name = l.name;
      o.weight = l.weight.template cast<Other>();
      o.bias = l.bias.template cast<Other>();
      o.has_batchnorm = l.has_batchnorm;
      if (l.has_batchnorm) {
        o.bn = {l.bn.gamma.template cast<Other>(), l.bn.beta.template cast<Other>(),
                l.bn.running_mean.template cast<Other>(), l.bn.running_var.template cast<Other>()};
      }
      out.push_back(std::move(o));
    }
    return Model<Other>(spec_, seed_, std::move(out));
  }

 private:
  Tensor<Scalar> run(const Tensor<Scalar>& x, bool train, ForwardTrace<Scalar>* trace) const;
  Tensor<Scalar> run_unit(std::size_t index, Tensor<Scalar> x, bool train,
                          ForwardTrace<Scalar>* trace) const;
  Tensor<Scalar> unit_backward(std::size_t index, const ForwardTrace<Scalar>& trace,
                               const Tensor<Scalar>& grad);

  ModelSpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<LayerParams<Scalar>> layers_;
};

/// Initial heatmap head bias: sigmoid(-4) ~ 0.018.
inline constexpr double kHeatmapPriorLogit = -4.0;

/// He-normal conv weights, zero biases (the heatmap head bias starts at
/// kHeatmapPriorLogit), gamma = 1 / beta = 0, drawn from a generator seeded
/// with `seed`.
template <typename Scalar>
Model<Scalar> build_unet(const ModelSpec& spec, std::uint64_t seed);

/// Binary weight file (little-endian, 32-bit float payloads) plus a text
/// sidecar `<path>.manifest` echoing the spec.
template <typename Scalar>
void save_weights(const Model<Scalar>& model, const std::filesystem::path& path);

template <typename Scalar>
Model<Scalar> load_weights(const std::filesystem::path& path);

inline constexpr std::uint32_t kWeightFormatVersion = 1;

}  // namespace sarco
