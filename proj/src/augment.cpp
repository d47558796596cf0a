#include <algorithm>
#include <cmath>

#include "sarco/augment.hpp"
#include "sarco/error.hpp"

namespace sarco {

void AugmentConfig::validate() const {
  for (double p : {p_hflip, p_scale, p_offset, p_overexposure, p_dropout, p_affine, p_subsample}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::kPrecondition, "augment probabilities must lie in [0, 1]");
  }
  if (!(scale_min > 0.0 && scale_min <= scale_max)) {
    throw Error(ErrorKind::kPrecondition, "augment scale range must satisfy 0 < min <= max");
  }
  if (subsample_min < 1 || subsample_max > 7 || subsample_min > subsample_max) {
    throw Error(ErrorKind::kPrecondition, "augment subsample factors must lie in [1, 7]");
  }
  if (!(max_region_fraction > 0.0 && max_region_fraction <= 0.25)) {
    throw Error(ErrorKind::kPrecondition, "augment region fraction must lie in (0, 0.25]");
  }
  if (affine_grid < 1) throw Error(ErrorKind::kPrecondition, "augment affine grid must be >= 1");
  if (affine_jitter < 0.0 || offset_max < 0.0) {
    throw Error(ErrorKind::kPrecondition, "augment jitter and offset must be non-negative");
  }
}

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(epoch), hi(epoch), lo(index), hi(index)};
  return std::mt19937_64(seq);
}

namespace {

double bilinear(const ImageXd& img, double r, double c, double fill) {
  const Index rows = img.rows();
  const Index cols = img.cols();
  constexpr double kSlack = 1e-9;
  if (r < -kSlack || c < -kSlack || r > rows - 1 + kSlack || c > cols - 1 + kSlack) return fill;
  r = std::clamp(r, 0.0, static_cast<double>(rows - 1));
  c = std::clamp(c, 0.0, static_cast<double>(cols - 1));
  const Index r0 = static_cast<Index>(std::floor(r));
  const Index c0 = static_cast<Index>(std::floor(c));
  const Index r1 = std::min(r0 + 1, rows - 1);
  const Index c1 = std::min(c0 + 1, cols - 1);
  const double fr = r - r0;
  const double fc = c - c0;
  const double top = fc == 0.0 ? img(r0, c0) : img(r0, c0) * (1 - fc) + img(r0, c1) * fc;
  if (fr == 0.0) return top;
  const double bottom = fc == 0.0 ? img(r1, c0) : img(r1, c0) * (1 - fc) + img(r1, c1) * fc;
  return top * (1 - fr) + bottom * fr;
}

std::uint8_t nearest(const LabelImage& mask, double r, double c) {
  const Index ri = static_cast<Index>(std::lround(r));
  const Index ci = static_cast<Index>(std::lround(c));
  if (ri < 0 || ci < 0 || ri >= mask.rows() || ci >= mask.cols()) return 0;
  return mask(ri, ci);
}

bool coin(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

ImageXd scale(const ImageXd& img, double factor, double fill) {
  if (!(factor > 0.0)) throw Error(ErrorKind::kPrecondition, "scale factor must be positive");
  const double cr = (img.rows() - 1) / 2.0;
  const double cc = (img.cols() - 1) / 2.0;
  ImageXd out(img.rows(), img.cols());
  for (Index r = 0; r < img.rows(); ++r) {
    for (Index c = 0; c < img.cols(); ++c) {
      out(r, c) = bilinear(img, cr + (r - cr) / factor, cc + (c - cc) / factor, fill);
    }
  }
  return out;
}

LabelImage scale_mask(const LabelImage& mask, double factor) {
  if (!(factor > 0.0)) throw Error(ErrorKind::kPrecondition, "scale factor must be positive");
  const double cr = (mask.rows() - 1) / 2.0;
  const double cc = (mask.cols() - 1) / 2.0;
  LabelImage out(mask.rows(), mask.cols());
  for (Index r = 0; r < mask.rows(); ++r) {
    for (Index c = 0; c < mask.cols(); ++c) {
      out(r, c) = nearest(mask, cr + (r - cr) / factor, cc + (c - cc) / factor);
    }
  }
  return out;
}

double scale_row(double row, Index rows, double factor) {
  const double center = (rows - 1) / 2.0;
  return center + (row - center) * factor;
}

ImageXd intensity_offset(const ImageXd& img, double delta, double lo, double hi) {
  return (img + delta).cwiseMax(lo).cwiseMin(hi);
}

Rect sample_rect(std::mt19937_64& rng, Index rows, Index cols, double max_fraction) {
  const double max_area = std::max(1.0, max_fraction * static_cast<double>(rows * cols));
  std::uniform_int_distribution<Index> pick_rows(1, std::max<Index>(1, rows / 2));
  Rect r;
  r.rows = pick_rows(rng);
  const Index max_cols = std::clamp<Index>(static_cast<Index>(max_area / r.rows), 1, cols);
  r.cols = std::uniform_int_distribution<Index>(1, max_cols)(rng);
  r.row = std::uniform_int_distribution<Index>(0, rows - r.rows)(rng);
  r.col = std::uniform_int_distribution<Index>(0, cols - r.cols)(rng);
  return r;
}

ImageXd fill_region(const ImageXd& img, const Rect& region, double value) {
  if (region.row < 0 || region.col < 0 || region.rows < 0 || region.cols < 0 ||
      region.row + region.rows > img.rows() || region.col + region.cols > img.cols()) {
    throw Error(ErrorKind::kPrecondition, "region lies outside the image");
  }
  ImageXd out = img;
  out.block(region.row, region.col, region.rows, region.cols).setConstant(value);
  return out;
}

PiecewiseAffine::PiecewiseAffine(Index rows, Index cols, int grid, double jitter, std::mt19937_64& rng)
    : rows_(rows), cols_(cols), grid_(grid) {
  if (grid < 1 || rows < grid + 1 || cols < grid + 1) {
    throw Error(ErrorKind::kPrecondition, "image smaller than the warp grid");
  }
  source_.resize(static_cast<std::size_t>((grid + 1) * (grid + 1)));
  for (int i = 0; i <= grid; ++i) {
    for (int j = 0; j <= grid; ++j) {
      Eigen::Vector2d d = Eigen::Vector2d::Zero();
      // Always draw so the stream does not depend on which nodes are interior.
      const double dr = uniform(rng, -jitter, jitter);
      const double dc = uniform(rng, -jitter, jitter);
      if (i > 0 && i < grid && j > 0 && j < grid) d = {dr, dc};
      source_[static_cast<std::size_t>(i * (grid + 1) + j)] = d;
    }
  }
}

Eigen::Vector2d PiecewiseAffine::node(int i, int j) const {
  return source_[static_cast<std::size_t>(i * (grid_ + 1) + j)];
}

Eigen::Vector2d PiecewiseAffine::source_of(double row, double col) const {
  const double hr = static_cast<double>(rows_ - 1) / grid_;
  const double hc = static_cast<double>(cols_ - 1) / grid_;
  const int i = std::clamp(static_cast<int>(std::floor(row / hr)), 0, grid_ - 1);
  const int j = std::clamp(static_cast<int>(std::floor(col / hc)), 0, grid_ - 1);
  const double u = row / hr - i;
  const double v = col / hc - j;
  // Displacements are interpolated so a zero-jitter mesh is an exact identity.
  Eigen::Vector2d d;
  if (u + v <= 1.0) {
    d = node(i, j) + u * (node(i + 1, j) - node(i, j)) + v * (node(i, j + 1) - node(i, j));
  } else {
    d = node(i + 1, j + 1) + (1 - u) * (node(i, j + 1) - node(i + 1, j + 1)) +
        (1 - v) * (node(i + 1, j) - node(i + 1, j + 1));
  }
  return Eigen::Vector2d(row, col) + d;
}

double PiecewiseAffine::map_row(double row) const {
  const double cc = (cols_ - 1) / 2.0;
  auto src = [&](double r) { return source_of(r, cc).x(); };
  if (row <= src(0.0)) return 0.0;
  const double last = static_cast<double>(rows_ - 1);
  if (row >= src(last)) return last;
  // Border nodes are fixed, so the centre column spans the full row range.
  double lo = 0.0;
  double hi = last;
  for (Index r = 1; r < rows_; ++r) {
    if (src(static_cast<double>(r)) >= row) {
      lo = static_cast<double>(r - 1);
      hi = static_cast<double>(r);
      break;
    }
  }
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (src(mid) < row ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ImageXd PiecewiseAffine::apply(const ImageXd& img, double fill) const {
  if (img.rows() != rows_ || img.cols() != cols_) throw Error(ErrorKind::kDimension, "warp size mismatch");
  ImageXd out(rows_, cols_);
  for (Index r = 0; r < rows_; ++r) {
    for (Index c = 0; c < cols_; ++c) {
      const auto s = source_of(static_cast<double>(r), static_cast<double>(c));
      out(r, c) = bilinear(img, s.x(), s.y(), fill);
    }
  }
  return out;
}

LabelImage PiecewiseAffine::apply_mask(const LabelImage& mask) const {
  if (mask.rows() != rows_ || mask.cols() != cols_) throw Error(ErrorKind::kDimension, "warp size mismatch");
  LabelImage out(rows_, cols_);
  for (Index r = 0; r < rows_; ++r) {
    for (Index c = 0; c < cols_; ++c) {
      const auto s = source_of(static_cast<double>(r), static_cast<double>(c));
      out(r, c) = nearest(mask, s.x(), s.y());
    }
  }
  return out;
}

ImageXd vertical_subsample(const ImageXd& img, int factor, int phase) {
  if (factor < 1) throw Error(ErrorKind::kPrecondition, "subsample factor must be >= 1");
  if (phase < 0 || phase >= factor) throw Error(ErrorKind::kPrecondition, "subsample phase must lie in [0, factor)");
  const Index rows = img.rows();
  std::vector<Index> kept{0};
  for (Index r = phase; r < rows; r += factor) {
    if (r > kept.back()) kept.push_back(r);
  }
  if (kept.back() != rows - 1) kept.push_back(rows - 1);
  ImageXd out = img;
  for (std::size_t k = 0; k + 1 < kept.size(); ++k) {
    const Index a = kept[k];
    const Index b = kept[k + 1];
    for (Index r = a + 1; r < b; ++r) {
      const double t = static_cast<double>(r - a) / static_cast<double>(b - a);
      out.row(r) = img.row(a) * (1 - t) + img.row(b) * t;
    }
  }
  return out;
}

DetectionSample augment_detection(const DetectionSample& in, const AugmentConfig& cfg,
                                  std::uint64_t epoch, std::uint64_t index) {
  auto rng = sample_rng(cfg.seed, epoch, index);
  DetectionSample out = in;
  const Index rows = out.image.rows();
  const Index cols = out.image.cols();
  if (coin(rng, cfg.p_hflip)) out.image = hflip(out.image);
  if (coin(rng, cfg.p_scale)) {
    const double f = uniform(rng, cfg.scale_min, cfg.scale_max);
    out.image = scale(out.image, f, -127.0);
    out.row = scale_row(out.row, rows, f);
  }
  if (coin(rng, cfg.p_affine) && rows > cfg.affine_grid && cols > cfg.affine_grid) {
    PiecewiseAffine warp(rows, cols, cfg.affine_grid, cfg.affine_jitter, rng);
    out.image = warp.apply(out.image, -127.0);
    out.row = warp.map_row(out.row);
  }
  if (coin(rng, cfg.p_offset)) out.image = intensity_offset(out.image, uniform(rng, -cfg.offset_max, cfg.offset_max));
  if (coin(rng, cfg.p_overexposure)) {
    out.image = overexposure(out.image, sample_rect(rng, rows, cols, cfg.max_region_fraction));
  }
  if (coin(rng, cfg.p_dropout)) {
    out.image = region_dropout(out.image, sample_rect(rng, rows, cols, cfg.max_region_fraction));
  }
  if (coin(rng, cfg.p_subsample)) {
    const int f = std::uniform_int_distribution<int>(cfg.subsample_min, cfg.subsample_max)(rng);
    const int phase = std::uniform_int_distribution<int>(0, f - 1)(rng);
    out.image = vertical_subsample(out.image, f, phase);
  }
  out.image = out.image.round().cwiseMax(-127.0).cwiseMin(127.0);
  out.row = std::clamp(out.row, 0.0, static_cast<double>(rows - 1));
  return out;
}

SegmentationSample augment_segmentation(const SegmentationSample& in, const AugmentConfig& cfg,
                                        std::uint64_t epoch, std::uint64_t index) {
  if (in.image.rows() != in.mask.rows() || in.image.cols() != in.mask.cols()) {
    throw Error(ErrorKind::kDimension, "image and mask sizes differ");
  }
  constexpr double kAirHu = -1000.0;
  auto rng = sample_rng(cfg.seed, epoch, index);
  SegmentationSample out = in;
  const Index rows = out.image.rows();
  const Index cols = out.image.cols();
  if (coin(rng, cfg.p_hflip)) {
    out.image = hflip(out.image);
    out.mask = hflip(out.mask);
  }
  if (coin(rng, cfg.p_scale)) {
    const double f = uniform(rng, cfg.scale_min, cfg.scale_max);
    out.image = scale(out.image, f, kAirHu);
    out.mask = scale_mask(out.mask, f);
  }
  if (coin(rng, cfg.p_affine) && rows > cfg.affine_grid && cols > cfg.affine_grid) {
    PiecewiseAffine warp(rows, cols, cfg.affine_grid, cfg.affine_jitter, rng);
    out.image = warp.apply(out.image, kAirHu);
    out.mask = warp.apply_mask(out.mask);
  }
  if (coin(rng, cfg.p_offset)) {
    out.image = intensity_offset(out.image, uniform(rng, -cfg.offset_max, cfg.offset_max), -1024.0, 32767.0);
  }
  return out;
}

}  // namespace sarco
