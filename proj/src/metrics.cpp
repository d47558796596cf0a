#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "sarco/error.hpp"
#include "sarco/metrics.hpp"

namespace sarco {

SliceError slice_error(double pred_z_mm, double gt_z_mm, double slice_thickness_mm) {
  if (!(slice_thickness_mm > 0.0)) throw Error(ErrorKind::kPrecondition, "slice thickness must be positive");
  const double mm = std::abs(pred_z_mm - gt_z_mm);
  return {mm, mm / slice_thickness_mm};
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::kDimension, "dice: mask dims differ");
  }
  const auto na = a.count();
  const auto nb = b.count();
  if (na + nb == 0) return 1.0;
  const auto overlap = (a && b).count();
  return 2.0 * static_cast<double>(overlap) / static_cast<double>(na + nb);
}

double muscle_area_cm2(const BinaryMask& mask, double spacing_y_mm, double spacing_x_mm,
                       const std::optional<HuWindow>& window, const ImageXd* image) {
  if (!(spacing_y_mm > 0.0 && spacing_x_mm > 0.0)) {
    throw Error(ErrorKind::kPrecondition, "pixel spacing must be positive");
  }
  Index n = mask.count();
  if (window) {
    if (!image) throw Error(ErrorKind::kArgument, "HU window needs an image");
    if (image->rows() != mask.rows() || image->cols() != mask.cols()) {
      throw Error(ErrorKind::kDimension, "mask and image dims differ");
    }
    n = (mask && *image >= window->lo && *image <= window->hi).count();
  }
  return static_cast<double>(n) * spacing_y_mm * spacing_x_mm / 100.0;
}

double muscle_attenuation(const BinaryMask& mask, const ImageXd& image) {
  if (image.rows() != mask.rows() || image.cols() != mask.cols()) {
    throw Error(ErrorKind::kDimension, "mask and image dims differ");
  }
  const auto n = mask.count();
  if (n == 0) throw Error(ErrorKind::kUndefinedMeasure, "muscle attenuation of an empty mask");
  return mask.select(image, 0.0).sum() / static_cast<double>(n);
}

namespace {

void check_pair(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kDimension, "series lengths differ");
  if (a.size() < 2) throw Error(ErrorKind::kInsufficientData, "need at least 2 paired values");
}

double sample_sd(const Eigen::ArrayXd& d) {
  const double m = d.mean();
  return std::sqrt((d - m).square().sum() / static_cast<double>(d.size() - 1));
}

// Continued fraction for I_x(a, b) (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  throw Error(ErrorKind::kNumeric, "incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error(ErrorKind::kDomain, "incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorKind::kDomain, "incomplete beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw Error(ErrorKind::kDomain, "t distribution needs dof > 0");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

BlandAltman bland_altman(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  check_pair(a, b);
  const Eigen::ArrayXd d = a - b;
  BlandAltman out;
  out.mean_diff = d.mean();
  out.sd_diff = sample_sd(d);
  out.loa_low = out.mean_diff - 1.96 * out.sd_diff;
  out.loa_high = out.mean_diff + 1.96 * out.sd_diff;
  return out;
}

TTest paired_t_test(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  check_pair(a, b);
  const Eigen::ArrayXd d = a - b;
  TTest out;
  out.dof = static_cast<int>(d.size() - 1);
  const double mean = d.mean();
  const double sd = sample_sd(d);
  if (sd == 0.0) {
    if (mean == 0.0) return out;
    out.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
    out.p = 0.0;
    return out;
  }
  out.t = mean / (sd / std::sqrt(static_cast<double>(d.size())));
  out.p = student_t_two_sided_p(out.t, out.dof);
  return out;
}

FoldSplit kfold_split(const std::vector<std::string>& volume_ids, int k, std::uint64_t seed) {
  if (k < 1) throw Error(ErrorKind::kPrecondition, "k must be >= 1");
  if (static_cast<std::size_t>(k) > volume_ids.size()) {
    throw Error(ErrorKind::kPrecondition, "k = " + std::to_string(k) + " exceeds the number of volumes (" +
                                              std::to_string(volume_ids.size()) + ")");
  }
  auto ids = volume_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorKind::kArgument, "duplicate volume id in fold split");
  }
  ids = volume_ids;
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  FoldSplit folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < ids.size(); ++i) folds[i % folds.size()].push_back(ids[i]);
  return folds;
}

UnitSummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorKind::kInsufficientData, "cannot summarize an empty list");
  UnitSummary s;
  s.n = static_cast<int>(values.size());
  const Eigen::Map<const Eigen::ArrayXd> v(values.data(), static_cast<Index>(values.size()));
  s.mean = v.mean();
  s.sd = values.size() > 1 ? sample_sd(v) : 0.0;
  s.max = v.maxCoeff();
  s.count_gt_10 = static_cast<int>((v > 10.0).count());
  auto sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

ErrorSummary summarize_errors(const std::vector<SliceError>& errors) {
  std::vector<double> mm;
  std::vector<double> slices;
  for (const auto& e : errors) {
    mm.push_back(e.mm);
    slices.push_back(e.slices);
  }
  return {summarize(mm), summarize(slices)};
}

}  // namespace sarco
