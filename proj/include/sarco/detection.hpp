#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sarco/augment.hpp"
#include "sarco/model.hpp"
#include "sarco/projection.hpp"
#include "sarco/train.hpp"
#include "sarco/volume.hpp"

namespace sarco {

inline constexpr double kDefaultTargetSigma = 4.0;
inline constexpr double kLowConfidence = 0.1;
inline constexpr std::int8_t kMipPadValue = -127;

/// v(r) = exp(-(r - y)^2 / (2 sigma^2)) for r in [0, height).
Eigen::ArrayXd make_target_map(double y_row, Index height, double sigma = kDefaultTargetSigma);

struct Peak {
  double row = 0.0;  // integer unless refined
  Index index = 0;
  double confidence = 0.0;
  bool low_confidence = false;
  bool ambiguous = false;  // another row ties the maximum
};

/// Global argmax (first index wins). With `refine`, a parabola through the
/// peak and its two neighbours gives a sub-row position.
Peak decode_peak(const Eigen::ArrayXd& map, bool refine = false);

struct Candidate {
  double row = 0.0;
  double confidence = 0.0;
};

/// Local maxima (strictly above the left neighbour, not below the right one)
/// reaching rel_threshold * max, then greedy suppression of anything closer
/// than min_separation_mm to a stronger peak. Sorted by confidence, highest
/// first.
std::vector<Candidate> find_candidates(const Eigen::ArrayXd& map, double rel_threshold = 0.5,
                                       double min_separation_mm = 20.0, double row_spacing_mm = 1.0);

struct Padding {
  Index top = 0;
  Index bottom = 0;
  Index left = 0;
  Index right = 0;
};

/// Symmetric padding (extra pixel at the bottom/right) reaching the given
/// target size.
Padding padding_to(Index rows, Index cols, Index target_rows, Index target_cols);
Index round_up(Index value, Index multiple);

Image8 pad_constant(const Image8& img, const Padding& pad, std::int8_t value = kMipPadValue);

struct DetectionExample {
  Image8 image;
  double row = 0.0;  // ground-truth L3 row in image coordinates
};

struct DetectOptions {
  double sigma = kDefaultTargetSigma;
  bool refine = false;
  double rel_threshold = 0.5;
  double min_separation_mm = 20.0;
};

template <typename Scalar>
TrainResult<Scalar> train_detector(const std::vector<DetectionExample>& data, const ModelSpec& spec,
                                   std::uint64_t init_seed, const AugmentConfig& aug, const TrainHyper& hp,
                                   double sigma = kDefaultTargetSigma);

/// Confidence map over the rows of an unpadded detection image.
template <typename Scalar>
Eigen::ArrayXd predict_map(const Image8& image, const Model<Scalar>& model);

struct DetectionResult {
  View view = View::kFrontal;
  double row = 0.0;
  double z_mm = 0.0;
  Index slice_index = 0;
  double confidence = 0.0;
  bool low_confidence = false;
  bool ambiguous = false;
  std::vector<Candidate> candidates;
};

/// Decodes a confidence map computed from `input` into volume coordinates.
DetectionResult decode_detection(const Eigen::ArrayXd& map, const DetectionInput& input,
                                 const DetectOptions& options = {});

template <typename Scalar>
DetectionResult predict_l3(const CtVolume& vol, const Model<Scalar>& model, View view,
                           const DetectOptions& options = {});

/// `key = value` lines: view, row, z_mm, slice_index, confidence,
/// low_confidence, ambiguous, candidates (row:confidence pairs, comma separated).
void write_detection_record(std::ostream& out, const DetectionResult& r);
DetectionResult parse_detection_record(std::istream& in);

}  // namespace sarco
