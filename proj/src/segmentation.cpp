#include <algorithm>
#include <cmath>

#include "sarco/error.hpp"
#include "sarco/segmentation.hpp"

namespace sarco {

ImageXd preprocess_slice(const ImageXd& hu) {
  return hu.cwiseMax(-kSliceWindowHu).cwiseMin(kSliceWindowHu) / kSliceWindowHu;
}

namespace {

Index reflect(Index i, Index n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

template <typename T>
Image<T> pad_with(const Image<T>& img, const Padding& pad, bool mirror, T fill) {
  const Index rows = img.rows() + pad.top + pad.bottom;
  const Index cols = img.cols() + pad.left + pad.right;
  Image<T> out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Index sr = r - pad.top;
      const Index sc = c - pad.left;
      const bool inside = sr >= 0 && sc >= 0 && sr < img.rows() && sc < img.cols();
      if (inside) {
        out(r, c) = img(sr, sc);
      } else {
        out(r, c) = mirror ? img(reflect(sr, img.rows()), reflect(sc, img.cols())) : fill;
      }
    }
  }
  return out;
}

}  // namespace

ImageXd pad_reflect(const ImageXd& img, const Padding& pad) { return pad_with(img, pad, true, 0.0); }

LabelImage pad_labels(const LabelImage& mask, const Padding& pad) {
  return pad_with<std::uint8_t>(mask, pad, false, kBackground);
}

void check_labels(const LabelImage& mask, int num_classes) {
  for (Index r = 0; r < mask.rows(); ++r) {
    for (Index c = 0; c < mask.cols(); ++c) {
      if (mask(r, c) >= num_classes) {
        throw Error(ErrorKind::kLabel, "label " + std::to_string(mask(r, c)) + " at (" + std::to_string(r) + ", " +
                                           std::to_string(c) + ") outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  }
}

std::vector<double> inverse_frequency_weights(const std::vector<SegmentationExample>& data, int num_classes) {
  std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
  double total = 0.0;
  for (const auto& ex : data) {
    check_labels(ex.mask, num_classes);
    for (int k = 0; k < num_classes; ++k) counts[static_cast<std::size_t>(k)] += static_cast<double>((ex.mask == k).count());
    total += static_cast<double>(ex.mask.size());
  }
  std::vector<double> w(counts.size(), 1.0);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > 0.0) w[k] = total / (num_classes * counts[k]);
  }
  return w;
}

template <typename Scalar>
TrainResult<Scalar> train_segmenter(const std::vector<SegmentationExample>& data, const ModelSpec& spec,
                                    std::uint64_t init_seed, const AugmentConfig& aug, const TrainHyper& hp,
                                    const SegmentOptions& options) {
  if (data.empty()) throw Error(ErrorKind::kInsufficientData, "segmentation training set is empty");
  if (spec.head != HeadKind::kSegmentation) throw Error(ErrorKind::kPrecondition, "segmenter needs a segmentation head");
  hp.validate();
  aug.validate();
  for (const auto& ex : data) {
    if (ex.hu.rows() != ex.mask.rows() || ex.hu.cols() != ex.mask.cols()) {
      throw Error(ErrorKind::kDimension, "slice and mask dims differ");
    }
    check_labels(ex.mask, spec.num_classes);
  }
  const auto weights =
      options.class_weighting ? inverse_frequency_weights(data, spec.num_classes) : std::vector<double>{};
  TrainResult<Scalar> result{build_unet<Scalar>(spec, init_seed), {}};
  auto& model = result.model;
  nn::AdamState<Scalar> adam;
  const nn::AdamConfig adam_cfg{hp.lr};
  const Index m = spec.size_multiple();
  const auto batch = static_cast<std::size_t>(hp.batch_size);

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), hp.shuffle_seed, epoch);
    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      std::vector<SegmentationSample> samples;
      Index rows = 0;
      Index cols = 0;
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t idx = order[start + i];
        SegmentationSample s{data[idx].hu, data[idx].mask};
        if (hp.augment) s = augment_segmentation(s, aug, static_cast<std::uint64_t>(epoch), idx);
        rows = std::max(rows, s.image.rows());
        cols = std::max(cols, s.image.cols());
        samples.push_back(std::move(s));
      }
      rows = round_up(rows, m);
      cols = round_up(cols, m);
      const auto n = static_cast<Index>(count);
      Tensor<Scalar> x({n, 1, rows, cols});
      Eigen::ArrayXi labels(n * rows * cols);
      for (Index i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        const auto pad = padding_to(s.image.rows(), s.image.cols(), rows, cols);
        const ImageXd img = pad_reflect(preprocess_slice(s.image), pad);
        const LabelImage lab = pad_labels(s.mask, pad);
        for (Index r = 0; r < rows; ++r) {
          for (Index c = 0; c < cols; ++c) {
            x.at(i, 0, r, c) = Scalar(img(r, c));
            labels[(i * rows + r) * cols + c] = lab(r, c);
          }
        }
      }
      ForwardTrace<Scalar> trace;
      const auto logits = model.forward(x, nn::BnMode::kTrain, &trace);
      const auto loss = nn::softmax_ce_loss(logits, labels, weights);
      if (!std::isfinite(static_cast<double>(loss.value))) {
        throw Error(ErrorKind::kNumeric, "non-finite segmentation loss at epoch " + std::to_string(epoch) +
                                             " batch " + std::to_string(start / batch));
      }
      model.zero_grad();
      model.backward(trace, loss.grad);
      nn::adam_step(model.parameters(), adam, adam_cfg);
      result.loss.push_back(static_cast<double>(loss.value));
      epoch_loss += static_cast<double>(loss.value);
      ++steps;
    }
    if (hp.on_epoch) hp.on_epoch(epoch, epoch_loss / steps);
  }
  return result;
}

template <typename Scalar>
LabelImage predict_masks(const ImageXd& hu, const Model<Scalar>& model) {
  if (model.spec().head != HeadKind::kSegmentation) throw Error(ErrorKind::kPrecondition, "segmenter needs a segmentation head");
  const Index m = model.spec().size_multiple();
  const auto pad = padding_to(hu.rows(), hu.cols(), round_up(hu.rows(), m), round_up(hu.cols(), m));
  const ImageXd img = pad_reflect(preprocess_slice(hu), pad);
  Tensor<Scalar> x({1, 1, img.rows(), img.cols()});
  for (Index r = 0; r < img.rows(); ++r) {
    for (Index c = 0; c < img.cols(); ++c) x.at(0, 0, r, c) = Scalar(img(r, c));
  }
  const auto logits = model.predict(x);
  const Index k = logits.dim(1);
  LabelImage out(hu.rows(), hu.cols());
  for (Index r = 0; r < hu.rows(); ++r) {
    for (Index c = 0; c < hu.cols(); ++c) {
      Index best = 0;
      for (Index j = 1; j < k; ++j) {
        if (logits.at(0, j, r + pad.top, c + pad.left) > logits.at(0, best, r + pad.top, c + pad.left)) best = j;
      }
      out(r, c) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

BinaryMask class_mask(const LabelImage& mask, std::uint8_t label) { return mask == label; }

BinaryMask combined_mask(const LabelImage& mask) {
  return mask >= std::uint8_t{1} && mask <= std::uint8_t{3};
}

void write_label_pgm(const std::filesystem::path& path, const LabelImage& mask) {
  check_labels(mask);
  write_pgm(path, (mask * std::uint8_t{64}).eval());
}

LabelImage read_label_pgm(const std::filesystem::path& path) {
  const auto img = read_pgm(path);
  LabelImage out(img.rows(), img.cols());
  for (Index r = 0; r < img.rows(); ++r) {
    for (Index c = 0; c < img.cols(); ++c) {
      const auto v = img(r, c);
      if (v % 64 != 0 || v > 192) {
        throw Error(ErrorKind::kLabel, "label graymap value " + std::to_string(v) + " at (" + std::to_string(r) +
                                           ", " + std::to_string(c) + ") is not in {0, 64, 128, 192}");
      }
      out(r, c) = static_cast<std::uint8_t>(v / 64);
    }
  }
  return out;
}

template TrainResult<float> train_segmenter(const std::vector<SegmentationExample>&, const ModelSpec&, std::uint64_t,
                                            const AugmentConfig&, const TrainHyper&, const SegmentOptions&);
template TrainResult<double> train_segmenter(const std::vector<SegmentationExample>&, const ModelSpec&, std::uint64_t,
                                             const AugmentConfig&, const TrainHyper&, const SegmentOptions&);
template LabelImage predict_masks(const ImageXd&, const Model<float>&);
template LabelImage predict_masks(const ImageXd&, const Model<double>&);

}  // namespace sarco
