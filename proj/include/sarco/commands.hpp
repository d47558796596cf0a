#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sarco/config.hpp"
#include "sarco/detection.hpp"
#include "sarco/phantom.hpp"

namespace sarco {

// One function per CLI subcommand. Payload files never contain timestamps,
// so identical configs give byte-identical outputs. Progress goes to `log`.

/// Writes <id>.mhd/.raw, <id>_l3_mask.pgm and manifest.txt into data.dir.
void cmd_phantom_gen(const ExperimentConfig& cfg, std::ostream& log);

/// Writes the thresholded 8-bit MIP on the 1 mm grid as a P5 graymap.
void cmd_mip(const std::filesystem::path& volume, View view, const std::filesystem::path& out_pgm);

void cmd_train_detect(const ExperimentConfig& cfg, const std::filesystem::path& weights, std::ostream& log);
void cmd_train_seg(const ExperimentConfig& cfg, const std::filesystem::path& weights, std::ostream& log);

DetectionResult cmd_detect(const std::filesystem::path& volume, const std::filesystem::path& weights, View view,
                           const DetectOptions& options);

struct SegmentRecord {
  Index slice_index = 0;
  double area_cm2 = 0.0;
  double ma_hu = 0.0;  // NaN when nothing was segmented
  std::array<double, kNumMuscleClasses> class_area_cm2{};
};

/// Segments one axial slice (the only slice of a single-slice volume unless
/// `slice` is given). Writes <prefix>_mask.pgm and the raw label volume
/// <prefix>_mask.mhd/.raw.
SegmentRecord cmd_segment(const std::filesystem::path& volume, std::optional<Index> slice,
                          const std::filesystem::path& weights, const std::filesystem::path& out_prefix,
                          bool hu_window);
void write_segment_record(std::ostream& out, const SegmentRecord& r);

/// One evaluated case. gt_area_cm2 and gt_ma_hu come from the ground-truth
/// mask on the same slice.
struct EvalRow {
  std::string id;
  View view = View::kSagittalRestricted;
  double err_mm = 0.0;
  double err_slices = 0.0;
  double dice_es = 0.0;
  double dice_psoas = 0.0;
  double dice_ra = 0.0;
  double dice_combined = 0.0;
  double area_cm2 = 0.0;
  double ma_hu = 0.0;
  double gt_area_cm2 = 0.0;
  double gt_ma_hu = 0.0;
};

struct FoldRow {
  int fold = 0;
  int n_train = 0;
  int n_test = 0;
  double median_err_mm = 0.0;
  double mean_dice_combined = 0.0;
};

void write_eval_csv(const std::filesystem::path& path, const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path);

/// k-fold cross-validation over the non-transitional cases in data.dir.
/// Writes eval.csv, folds.csv and summary.txt into out.dir.
void cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log);

/// Tables of slice errors, Dice and measurement agreement.
std::string format_report(const std::vector<EvalRow>& rows);
void cmd_report(const std::filesystem::path& csv, std::ostream& out);

}  // namespace sarco
