#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "sarco/model.hpp"

namespace sarco {

std::string_view to_string(HeadKind head) {
  return head == HeadKind::kHeatmap1d ? "heatmap1d" : "segmentation";
}

HeadKind parse_head(std::string_view name) {
  if (name == "heatmap1d") return HeadKind::kHeatmap1d;
  if (name == "segmentation") return HeadKind::kSegmentation;
  throw Error(ErrorKind::kArgument, "unknown head '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (levels < 1) throw Error(ErrorKind::kPrecondition, "model.levels must be >= 1");
  if (levels > 8) throw Error(ErrorKind::kPrecondition, "model.levels must be <= 8");
  if (base_channels < 1) throw Error(ErrorKind::kPrecondition, "model.base_channels must be >= 1");
  if (convs_per_block < 1) throw Error(ErrorKind::kPrecondition, "model.convs_per_block must be >= 1");
  if (input_channels < 1) throw Error(ErrorKind::kPrecondition, "model.input_channels must be >= 1");
  if (head == HeadKind::kSegmentation && num_classes < 2) {
    throw Error(ErrorKind::kPrecondition, "segmentation head needs at least 2 classes");
  }
}

namespace {

// Layer order: enc{l}.{u} for every level, mid.{u}, then per decoder level
// (deepest first) up{l} followed by dec{l}.{u}, and finally the head.
struct Layout {
  std::size_t levels;
  std::size_t per_block;

  std::size_t enc(std::size_t l, std::size_t u) const { return l * per_block + u; }
  std::size_t mid(std::size_t u) const { return levels * per_block + u; }
  std::size_t up(std::size_t l) const {
    return (levels + 1) * per_block + (levels - 1 - l) * (1 + per_block);
  }
  std::size_t dec(std::size_t l, std::size_t u) const { return up(l) + 1 + u; }
  std::size_t head() const { return (levels + 1) * per_block + levels * (1 + per_block); }
};

Layout layout_of(const ModelSpec& spec) {
  return {static_cast<std::size_t>(spec.levels), static_cast<std::size_t>(spec.convs_per_block)};
}

Index channels_at(const ModelSpec& spec, std::size_t level) {
  return Index{spec.base_channels} << level;
}

struct LayerShape {
  std::string name;
  Index out, in, kernel;
  bool batchnorm;
};

std::vector<LayerShape> layer_shapes(const ModelSpec& spec) {
  const auto lay = layout_of(spec);
  std::vector<LayerShape> shapes(lay.head() + 1);
  const auto L = lay.levels;
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t u = 0; u < lay.per_block; ++u) {
      const Index in = u > 0 ? channels_at(spec, l) : (l == 0 ? spec.input_channels : channels_at(spec, l - 1));
      shapes[lay.enc(l, u)] = {"enc" + std::to_string(l) + "." + std::to_string(u), channels_at(spec, l), in, 3, true};
    }
  }
  for (std::size_t u = 0; u < lay.per_block; ++u) {
    const Index in = u > 0 ? channels_at(spec, L) : channels_at(spec, L - 1);
    shapes[lay.mid(u)] = {"mid." + std::to_string(u), channels_at(spec, L), in, 3, true};
  }
  for (std::size_t l = 0; l < L; ++l) {
    shapes[lay.up(l)] = {"up" + std::to_string(l), channels_at(spec, l), channels_at(spec, l + 1), 3, true};
    for (std::size_t u = 0; u < lay.per_block; ++u) {
      const Index in = u > 0 ? channels_at(spec, l) : 2 * channels_at(spec, l);
      shapes[lay.dec(l, u)] = {"dec" + std::to_string(l) + "." + std::to_string(u), channels_at(spec, l), in, 3, true};
    }
  }
  shapes[lay.head()] = {"head", spec.output_channels(), channels_at(spec, 0), 1, false};
  return shapes;
}

}  // namespace

template <typename Scalar>
Model<Scalar>::Model(ModelSpec spec, std::uint64_t seed, std::vector<LayerParams<Scalar>> layers)
    : spec_(spec), seed_(seed), layers_(std::move(layers)) {
  spec_.validate();
  const auto shapes = layer_shapes(spec_);
  if (shapes.size() != layers_.size()) {
    throw Error(ErrorKind::kFormat, "layer count " + std::to_string(layers_.size()) +
                                        " does not match spec (" + std::to_string(shapes.size()) + ")");
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    const auto& l = layers_[i];
    if (l.weight.shape() != Shape{s.out, s.in, s.kernel, s.kernel} || l.bias.size() != s.out ||
        l.has_batchnorm != s.batchnorm || (s.batchnorm && l.bn.gamma.size() != s.out)) {
      throw Error(ErrorKind::kFormat, "layer '" + l.name + "' is inconsistent with the spec");
    }
  }
}

template <typename Scalar>
Index Model<Scalar>::parameter_count() const {
  Index n = 0;
  for (const auto& l : layers_) {
    n += l.weight.size() + l.bias.size();
    if (l.has_batchnorm) n += 2 * l.bn.gamma.size();
  }
  return n;
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::run_unit(std::size_t index, Tensor<Scalar> x, bool train,
                                       ForwardTrace<Scalar>* trace) const {
  const auto& layer = layers_[index];
  Tensor<Scalar> z = nn::conv2d(x, layer.weight, layer.bias);
  Tensor<Scalar> y;
  nn::BatchNormCache<Scalar> cache;
  if (train) {
    // Only reached through the non-const forward(), so the object is mutable.
    auto& bn = const_cast<nn::BatchNorm<Scalar>&>(layer.bn);
    y = nn::batchnorm2d(z, bn, nn::BnMode::kTrain, &cache);
  } else {
    y = nn::batchnorm2d_infer(z, layer.bn);
  }
  y.data() = y.data().cwiseMax(Scalar(0));
  if (trace) trace->units[index] = {std::move(x), std::move(z), std::move(cache)};
  return y;
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::run(const Tensor<Scalar>& x, bool train,
                                  ForwardTrace<Scalar>* trace) const {
  if (x.rank() != 4 || x.dim(1) != spec_.input_channels) {
    throw Error(ErrorKind::kDimension, "model input must be [N, " +
                                           std::to_string(spec_.input_channels) + ", H, W], got " +
                                           shape_string(x.shape()));
  }
  const Index m = spec_.size_multiple();
  if (x.dim(2) % m != 0 || x.dim(3) % m != 0) {
    throw Error(ErrorKind::kPrecondition, "input H, W (" + std::to_string(x.dim(2)) + ", " +
                                              std::to_string(x.dim(3)) + ") must be multiples of " +
                                              std::to_string(m) + "; pad the input first");
  }
  const auto lay = layout_of(spec_);
  const auto L = lay.levels;
  if (trace) {
    *trace = ForwardTrace<Scalar>{};
    trace->units.resize(layers_.size() - 1);
  }

  std::vector<Tensor<Scalar>> skips(L);
  Tensor<Scalar> a = x;
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t u = 0; u < lay.per_block; ++u) a = run_unit(lay.enc(l, u), std::move(a), train, trace);
    auto pooled = nn::maxpool2d(a);
    if (trace) {
      trace->pool_shapes.push_back(a.shape());
      trace->pool_argmax.push_back(std::move(pooled.argmax));
    }
    skips[l] = std::move(a);
    a = std::move(pooled.output);
  }
  for (std::size_t u = 0; u < lay.per_block; ++u) a = run_unit(lay.mid(u), std::move(a), train, trace);
  for (std::size_t d = 0; d < L; ++d) {
    const std::size_t l = L - 1 - d;
    a = run_unit(lay.up(l), nn::upsample_nearest(a, 2), train, trace);
    a = nn::concat_channels(skips[l], a);
    skips[l] = Tensor<Scalar>();
    for (std::size_t u = 0; u < lay.per_block; ++u) a = run_unit(lay.dec(l, u), std::move(a), train, trace);
  }
  const auto& head = layers_[lay.head()];
  Tensor<Scalar> z = nn::conv2d(a, head.weight, head.bias);
  if (trace) trace->head_input = std::move(a);
  if (spec_.head == HeadKind::kSegmentation) return z;

  auto rows = nn::global_horizontal_maxpool(z);
  Tensor<Scalar> out = nn::sigmoid(rows.output);
  if (trace) {
    trace->head_shape = z.shape();
    trace->row_argmax = std::move(rows.argmax);
    trace->output = out;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::forward(const Tensor<Scalar>& x, nn::BnMode mode,
                                      ForwardTrace<Scalar>* trace) {
  return run(x, mode == nn::BnMode::kTrain, trace);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::predict(const Tensor<Scalar>& x) const {
  return run(x, false, nullptr);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::unit_backward(std::size_t index, const ForwardTrace<Scalar>& trace,
                                            const Tensor<Scalar>& grad) {
  auto& layer = layers_[index];
  const auto& unit = trace.units[index];
  const auto& z = unit.conv_out;
  // ReLU mask from the recomputed batch-norm output.
  Tensor<Scalar> dy(z.shape());
  for (Index s = 0; s < z.dim(0); ++s) {
    for (Index c = 0; c < z.dim(1); ++c) {
      const Scalar scale = layer.bn.gamma[c] * unit.cache.inv_std[c];
      const Scalar shift = layer.bn.beta[c] - scale * unit.cache.mean[c];
      const auto pre = (z.sample(s).row(c).array() * scale + shift);
      dy.sample(s).row(c).array() = (pre > Scalar(0)).select(grad.sample(s).row(c).array(), Scalar(0));
    }
  }
  auto bg = nn::batchnorm2d_backward(z, layer.bn, unit.cache, dy);
  layer.bn.gamma.grad() += bg.gamma;
  layer.bn.beta.grad() += bg.beta;
  auto cg = nn::conv2d_backward(unit.input, layer.weight, bg.input, index != 0);
  layer.weight.grad() += cg.weight.data();
  layer.bias.grad() += cg.bias.data();
  return std::move(cg.input);
}

template <typename Scalar>
void Model<Scalar>::backward(const ForwardTrace<Scalar>& trace, const Tensor<Scalar>& grad_output) {
  const auto lay = layout_of(spec_);
  const auto L = lay.levels;
  if (trace.units.size() != layers_.size() - 1) {
    throw Error(ErrorKind::kArgument, "backward needs a train-mode trace");
  }
  Tensor<Scalar> dz;
  if (spec_.head == HeadKind::kHeatmap1d) {
    if (grad_output.shape() != trace.output.shape()) {
      throw Error(ErrorKind::kDimension, "output gradient shape mismatch");
    }
    dz = nn::max_backward(trace.head_shape, trace.row_argmax, nn::sigmoid_backward(trace.output, grad_output));
  } else {
    dz = grad_output;
  }
  auto& head = layers_[lay.head()];
  auto hg = nn::conv2d_backward(trace.head_input, head.weight, dz, true);
  head.weight.grad() += hg.weight.data();
  head.bias.grad() += hg.bias.data();
  Tensor<Scalar> da = std::move(hg.input);

  std::vector<Tensor<Scalar>> dskips(L);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t u = lay.per_block; u-- > 0;) da = unit_backward(lay.dec(l, u), trace, da);
    auto [dskip, dup] = nn::split_channels(da, channels_at(spec_, l));
    dskips[l] = std::move(dskip);
    da = nn::upsample_nearest_backward(unit_backward(lay.up(l), trace, dup), 2);
  }
  for (std::size_t u = lay.per_block; u-- > 0;) da = unit_backward(lay.mid(u), trace, da);
  for (std::size_t l = L; l-- > 0;) {
    da = nn::max_backward(trace.pool_shapes[l], trace.pool_argmax[l], da);
    da.data() += dskips[l].data();
    for (std::size_t u = lay.per_block; u-- > 0;) da = unit_backward(lay.enc(l, u), trace, da);
  }
}

template <typename Scalar>
std::vector<nn::ParamRef<Scalar>> Model<Scalar>::parameters() {
  std::vector<nn::ParamRef<Scalar>> out;
  for (auto& l : layers_) {
    out.push_back({l.name + ".weight", &l.weight});
    out.push_back({l.name + ".bias", &l.bias});
    if (l.has_batchnorm) {
      out.push_back({l.name + ".gamma", &l.bn.gamma});
      out.push_back({l.name + ".beta", &l.bn.beta});
    }
  }
  return out;
}

template <typename Scalar>
void Model<Scalar>::zero_grad() {
  for (auto& p : parameters()) p.tensor->zero_grad();
}

template <typename Scalar>
Model<Scalar> build_unet(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<LayerParams<Scalar>> layers;
  for (const auto& s : layer_shapes(spec)) {
    LayerParams<Scalar> p;
    p.name = s.name;
    p.weight = Tensor<Scalar>({s.out, s.in, s.kernel, s.kernel});
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(s.in * s.kernel * s.kernel)));
    for (Index i = 0; i < p.weight.size(); ++i) p.weight[i] = Scalar(he(rng));
    p.bias = Tensor<Scalar>({s.out});
    // Heatmap targets are almost all zero; start the sigmoid near that prior.
    if (!s.batchnorm && spec.head == HeadKind::kHeatmap1d) p.bias.data().setConstant(Scalar(kHeatmapPriorLogit));
    p.has_batchnorm = s.batchnorm;
    if (s.batchnorm) p.bn = nn::BatchNorm<Scalar>::make(s.out);
    layers.push_back(std::move(p));
  }
  return Model<Scalar>(spec, seed, std::move(layers));
}

// ---------------------------------------------------------------------------
// Weight file I/O

namespace {

constexpr char kMagic[4] = {'S', 'R', 'C', 'W'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  template <typename Vec>
  void floats(const Vec& v) {
    for (Index i = 0; i < v.size(); ++i) f32(static_cast<float>(v[i]));
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  template <typename Vec>
  void floats(Vec& v) {
    need(4 * static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<typename Vec::Scalar>(f32());
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::kPayloadLength, "weight file truncated at byte " + std::to_string(pos_) +
                                                 " (needed " + std::to_string(n) + " more)");
    }
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename Scalar>
void save_weights(const Model<Scalar>& model, const std::filesystem::path& path) {
  const auto& spec = model.spec();
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kWeightFormatVersion);
  w.u32(static_cast<std::uint32_t>(spec.levels));
  w.u32(static_cast<std::uint32_t>(spec.base_channels));
  w.u32(static_cast<std::uint32_t>(spec.convs_per_block));
  w.u32(spec.head == HeadKind::kHeatmap1d ? 0u : 1u);
  w.u32(static_cast<std::uint32_t>(spec.num_classes));
  w.u32(static_cast<std::uint32_t>(spec.input_channels));
  w.u64(model.seed());
  w.u32(static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    w.u32(static_cast<std::uint32_t>(l.name.size()));
    w.raw(l.name.data(), l.name.size());
    for (std::size_t a = 0; a < 4; ++a) w.u32(static_cast<std::uint32_t>(l.weight.dim(a)));
    w.u8(l.has_batchnorm ? 1 : 0);
    w.floats(l.weight.data());
    w.floats(l.bias.data());
    if (l.has_batchnorm) {
      w.floats(l.bn.gamma.data());
      w.floats(l.bn.beta.data());
      w.floats(l.bn.running_mean);
      w.floats(l.bn.running_var);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path.string() + "'");

  auto manifest_path = path;
  manifest_path += ".manifest";
  std::ofstream manifest(manifest_path);
  if (!manifest) throw Error(ErrorKind::kIo, "cannot write '" + manifest_path.string() + "'");
  manifest << "format = sarco-weights\n"
           << "version = " << kWeightFormatVersion << "\n"
           << "levels = " << spec.levels << "\n"
           << "base_channels = " << spec.base_channels << "\n"
           << "convs_per_block = " << spec.convs_per_block << "\n"
           << "head = " << to_string(spec.head) << "\n"
           << "num_classes = " << spec.num_classes << "\n"
           << "input_channels = " << spec.input_channels << "\n"
           << "seed = " << model.seed() << "\n"
           << "parameters = " << model.parameter_count() << "\n";
}

template <typename Scalar>
Model<Scalar> load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  ByteReader r(std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  if (r.str(4) != std::string(kMagic, 4)) {
    throw Error(ErrorKind::kFormat, "'" + path.string() + "' is not a weight file (bad magic)");
  }
  const auto version = r.u32();
  if (version != kWeightFormatVersion) {
    throw Error(ErrorKind::kUnsupportedVersion, "unsupported weight file version " + std::to_string(version) +
                                                    " (expected " + std::to_string(kWeightFormatVersion) + ")");
  }
  ModelSpec spec;
  spec.levels = static_cast<int>(r.u32());
  spec.base_channels = static_cast<int>(r.u32());
  spec.convs_per_block = static_cast<int>(r.u32());
  const auto head = r.u32();
  if (head > 1) throw Error(ErrorKind::kFormat, "unknown head kind " + std::to_string(head));
  spec.head = head == 0 ? HeadKind::kHeatmap1d : HeadKind::kSegmentation;
  spec.num_classes = static_cast<int>(r.u32());
  spec.input_channels = static_cast<int>(r.u32());
  spec.validate();
  const auto seed = r.u64();
  const auto count = r.u32();
  if (count != layer_shapes(spec).size()) {
    throw Error(ErrorKind::kFormat, "layer count " + std::to_string(count) + " does not match spec");
  }
  std::vector<LayerParams<Scalar>> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerParams<Scalar> l;
    const auto name_len = r.u32();
    if (name_len > 256) throw Error(ErrorKind::kFormat, "implausible layer name length");
    l.name = r.str(name_len);
    Shape shape(4);
    for (auto& d : shape) {
      d = static_cast<Index>(r.u32());
      if (d <= 0 || d > 65536) throw Error(ErrorKind::kFormat, "bad kernel dims in layer '" + l.name + "'");
    }
    l.has_batchnorm = r.u8() != 0;
    l.weight = Tensor<Scalar>(shape);
    r.floats(l.weight.data());
    l.bias = Tensor<Scalar>({shape[0]});
    r.floats(l.bias.data());
    if (l.has_batchnorm) {
      l.bn = nn::BatchNorm<Scalar>::make(shape[0]);
      r.floats(l.bn.gamma.data());
      r.floats(l.bn.beta.data());
      r.floats(l.bn.running_mean);
      r.floats(l.bn.running_var);
      if ((l.bn.running_var.array() < Scalar(0)).any()) {
        throw Error(ErrorKind::kFormat, "negative running variance in layer '" + l.name + "'");
      }
    }
    layers.push_back(std::move(l));
  }
  if (!r.done()) throw Error(ErrorKind::kFormat, "trailing bytes after last layer");
  return Model<Scalar>(spec, seed, std::move(layers));
}

template class Model<float>;
template class Model<double>;
template Model<float> build_unet(const ModelSpec&, std::uint64_t);
template Model<double> build_unet(const ModelSpec&, std::uint64_t);
template void save_weights(const Model<float>&, const std::filesystem::path&);
template void save_weights(const Model<double>&, const std::filesystem::path&);
template Model<float> load_weights(const std::filesystem::path&);
template Model<double> load_weights(const std::filesystem::path&);

}  // namespace sarco
