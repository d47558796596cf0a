#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sarco/image.hpp"

namespace sarco {

struct SliceError {
  double mm = 0.0;
  double slices = 0.0;
};

/// |pred - gt| in millimetres and in (unrounded) slice units.
SliceError slice_error(double pred_z_mm, double gt_z_mm, double slice_thickness_mm);

using BinaryMask = Image<bool>;

/// 2|a n b| / (|a| + |b|); two empty masks score 1.
double dice(const BinaryMask& a, const BinaryMask& b);

struct HuWindow {
  double lo = -29.0;
  double hi = 150.0;
};

/// Foreground pixel count times sy*sx / 100. With a window, only pixels whose
/// HU lies in [lo, hi] count, which needs `image`.
double muscle_area_cm2(const BinaryMask& mask, double spacing_y_mm, double spacing_x_mm,
                       const std::optional<HuWindow>& window = std::nullopt,
                       const ImageXd* image = nullptr);

/// Mean HU over the foreground.
double muscle_attenuation(const BinaryMask& mask, const ImageXd& image);

struct BlandAltman {
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
};

/// Differences a - b, sample standard deviation, limits mean +/- 1.96 sd.
BlandAltman bland_altman(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b);

struct TTest {
  double t = 0.0;
  double p = 1.0;
  int dof = 0;
};

/// Two-sided paired t-test on a - b. Zero-variance differences give p = 1
/// for zero mean and p = 0 otherwise (t is then +/-inf).
TTest paired_t_test(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b);

/// Regularised incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
/// P(|T| > |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

using FoldSplit = std::vector<std::vector<std::string>>;

/// Seeded shuffle followed by round-robin assignment, so fold sizes differ
/// by at most one. Ids are whole volumes; slices never cross folds.
FoldSplit kfold_split(const std::vector<std::string>& volume_ids, int k, std::uint64_t seed);

struct UnitSummary {
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double max = 0.0;
  int count_gt_10 = 0;
  int n = 0;
};

UnitSummary summarize(const std::vector<double>& values);

struct ErrorSummary {
  UnitSummary mm;
  UnitSummary slices;
};

ErrorSummary summarize_errors(const std::vector<SliceError>& errors);

}  // namespace sarco
