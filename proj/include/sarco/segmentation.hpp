#pragma once

#include <filesystem>
#include <vector>

#include "sarco/augment.hpp"
#include "sarco/detection.hpp"
#include "sarco/image.hpp"
#include "sarco/metrics.hpp"
#include "sarco/model.hpp"
#include "sarco/phantom.hpp"
#include "sarco/train.hpp"

namespace sarco {

inline constexpr double kSliceWindowHu = 250.0;

/// Axial slice in HU with its pixel spacing.
struct SliceImage {
  ImageXd hu;
  double spacing_y_mm = 1.0;
  double spacing_x_mm = 1.0;
};

/// clamp(v, -250, 250) / 250.
ImageXd preprocess_slice(const ImageXd& hu);

/// Mirror padding without repeating the edge pixel (falls back to edge
/// replication where the image is too small to mirror).
ImageXd pad_reflect(const ImageXd& img, const Padding& pad);
LabelImage pad_labels(const LabelImage& mask, const Padding& pad);

/// Throws ErrorKind::kLabel if any value is outside [0, num_classes).
void check_labels(const LabelImage& mask, int num_classes = kNumMuscleClasses);

struct SegmentationExample {
  ImageXd hu;
  LabelImage mask;
};

struct SegmentOptions {
  bool class_weighting = false;
};

/// Inverse-frequency weights total / (K * count_k); absent classes get 1.
std::vector<double> inverse_frequency_weights(const std::vector<SegmentationExample>& data, int num_classes);

template <typename Scalar>
TrainResult<Scalar> train_segmenter(const std::vector<SegmentationExample>& data, const ModelSpec& spec,
                                    std::uint64_t init_seed, const AugmentConfig& aug, const TrainHyper& hp,
                                    const SegmentOptions& options = {});

/// Per-pixel argmax over class logits; the lowest class wins ties.
template <typename Scalar>
LabelImage predict_masks(const ImageXd& hu, const Model<Scalar>& model);

BinaryMask class_mask(const LabelImage& mask, std::uint8_t label);
/// Union of labels 1..3.
BinaryMask combined_mask(const LabelImage& mask);

/// P5 export with labels scaled to {0, 64, 128, 192}; the reader inverts it.
void write_label_pgm(const std::filesystem::path& path, const LabelImage& mask);
LabelImage read_label_pgm(const std::filesystem::path& path);

}  // namespace sarco
