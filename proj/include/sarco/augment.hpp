#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "sarco/image.hpp"

namespace sarco {

/// Probabilities and ranges for the stochastic transforms. Jitter is in
/// pixels, which equals millimetres on the 1 mm detection grid.
struct AugmentConfig {
  double p_hflip = 0.5;
  double p_scale = 0.5;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double p_offset = 0.5;
  double offset_max = 10.0;
  double p_overexposure = 0.2;
  double p_dropout = 0.2;
  double max_region_fraction = 0.25;
  double p_affine = 0.3;
  int affine_grid = 4;
  double affine_jitter = 3.0;
  double p_subsample = 0.3;
  int subsample_min = 1;
  int subsample_max = 7;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Generator for one (epoch, sample) pair; identical inputs give identical streams.
std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index);

template <typename T>
Image<T> hflip(const Image<T>& img) {
  return img.rowwise().reverse();
}

/// Zoom about the image centre ((rows-1)/2, (cols-1)/2), keeping the original
/// size. Samples that fall outside the source take `fill`.
ImageXd scale(const ImageXd& img, double factor, double fill);
/// Nearest-neighbour variant for label masks; outside samples become 0.
LabelImage scale_mask(const LabelImage& mask, double factor);
/// Where a row coordinate lands after `scale`.
double scale_row(double row, Index rows, double factor);

/// Adds `delta` and clamps to [lo, hi].
ImageXd intensity_offset(const ImageXd& img, double delta, double lo = -127.0, double hi = 127.0);

struct Rect {
  Index row = 0;
  Index col = 0;
  Index rows = 0;
  Index cols = 0;
  bool overlaps(const Rect& o) const {
    return row < o.row + o.rows && o.row < row + rows && col < o.col + o.cols && o.col < col + cols;
  }
};

/// Random rectangle inside a rows x cols image covering at most
/// `max_fraction` of its area (and at least one pixel).
Rect sample_rect(std::mt19937_64& rng, Index rows, Index cols, double max_fraction);

ImageXd fill_region(const ImageXd& img, const Rect& region, double value);
inline ImageXd overexposure(const ImageXd& img, const Rect& region, double value = 127.0) {
  return fill_region(img, region, value);
}
inline ImageXd region_dropout(const ImageXd& img, const Rect& region, double value = -127.0) {
  return fill_region(img, region, value);
}

/// Piecewise affine warp on a grid x grid cell mesh. Each cell is split into
/// two triangles; interior control points are displaced in the source by a
/// uniform offset in [-jitter, jitter] on each axis, border points stay put.
/// Output pixels are pulled from the source through the per-triangle affine.
class PiecewiseAffine {
 public:
  PiecewiseAffine(Index rows, Index cols, int grid, double jitter, std::mt19937_64& rng);

  /// Source (row, col) for output (row, col).
  Eigen::Vector2d source_of(double row, double col) const;
  /// Output row that samples source row `row` along the centre column.
  double map_row(double row) const;

  ImageXd apply(const ImageXd& img, double fill) const;
  LabelImage apply_mask(const LabelImage& mask) const;

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

 private:
  Eigen::Vector2d node(int i, int j) const;

  Index rows_;
  Index cols_;
  int grid_;
  std::vector<Eigen::Vector2d> source_;  // (grid+1)^2 source points, row-major
};

/// Keeps rows phase, phase+f, phase+2f, ... plus the first and last rows, and
/// refills the others by linear interpolation along the vertical axis.
ImageXd vertical_subsample(const ImageXd& img, int factor, int phase = 0);

struct DetectionSample {
  ImageXd image;  // 8-bit scale, [-127, 127]
  double row = 0.0;
};

struct SegmentationSample {
  ImageXd image;  // HU
  LabelImage mask;
};

/// Full detection chain: flip, scale, piecewise affine, offset, overexposure,
/// dropout, vertical subsample, each with its own probability.
DetectionSample augment_detection(const DetectionSample& in, const AugmentConfig& cfg,
                                  std::uint64_t epoch, std::uint64_t index);

/// Geometric and intensity transforms only (flip, scale, piecewise affine,
/// offset in HU). Region and subsampling transforms are detection-only.
SegmentationSample augment_segmentation(const SegmentationSample& in, const AugmentConfig& cfg,
                                        std::uint64_t epoch, std::uint64_t index);

}  // namespace sarco
