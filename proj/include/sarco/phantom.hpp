#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sarco/image.hpp"
#include "sarco/volume.hpp"

namespace sarco {

/// Muscle label alphabet shared with segmentation.
enum MuscleLabel : std::uint8_t { kBackground = 0, kErectorSpinae = 1, kPsoas = 2, kRectusAbdominis = 3 };
inline constexpr int kNumMuscleClasses = 4;

struct PhantomParams {
  /// Vertebrae above the sacrum; the lowest five (six when transitional)
  /// are lumbar, the rest thoracic with ribs.
  int n_vertebrae = 17;
  double spacing_min_mm = 25.0;
  double spacing_max_mm = 35.0;
  double vertebra_hu_min = 300.0;
  double vertebra_hu_max = 1200.0;
  double muscle_hu_min = 20.0;
  double muscle_hu_max = 80.0;
  double fat_hu_min = -120.0;
  double fat_hu_max = -80.0;
  double thickness_min_mm = 1.0;
  double thickness_max_mm = 7.0;
  double noise_sd_hu = 15.0;
  double transitional_probability = 0.0;
  bool force_transitional = false;
  double metal_probability = 0.0;
  /// Left/right mirrored jitter, giving a column-symmetric volume.
  bool symmetric = false;
  double fov_mm = 128.0;
  Index matrix = 128;
  /// Distance from the first slice to the first vertebra centre.
  double top_margin_min_mm = 5.0;
  double top_margin_max_mm = 20.0;

  void validate() const;
};

struct PhantomCase {
  std::string id;
  std::uint64_t seed = 0;
  CtVolume volume;
  bool transitional = false;
  double l3_z_mm = 0.0;
  Index l3_slice = 0;
  /// Both candidate centres for transitional cases, otherwise just L3.
  std::vector<double> candidate_z_mm;
  std::vector<double> vertebra_z_mm;  // superior to inferior, sacrum excluded
  double sacrum_z_mm = 0.0;
  double vertebra_spacing_mm = 0.0;   // mean gap
  LabelImage l3_mask;                 // labels at slice l3_slice
  std::array<double, kNumMuscleClasses> analytic_area_mm2{};  // ellipse formula per class
};

PhantomCase gen_phantom(std::uint64_t seed, const PhantomParams& params);

/// Seed for case `index` of a dataset drawn from master `seed`.
std::uint64_t phantom_case_seed(std::uint64_t seed, std::uint64_t index);

/// Case i uses phantom_case_seed(seed, i) and is named "ph" + zero-padded i.
std::vector<PhantomCase> gen_dataset(int n, std::uint64_t seed, const PhantomParams& params);
PhantomCase gen_dataset_case(int index, std::uint64_t seed, const PhantomParams& params);

/// Text manifest: one line per case with every ground-truth quantity.
void write_manifest(const std::vector<PhantomCase>& cases, const std::filesystem::path& path);

struct ManifestEntry {
  std::string id;
  std::uint64_t seed = 0;
  double slice_thickness_mm = 0.0;
  Index depth = 0;
  double l3_z_mm = 0.0;
  Index l3_slice = 0;
  bool transitional = false;
  std::vector<double> candidate_z_mm;
  double vertebra_spacing_mm = 0.0;
};
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
ManifestEntry manifest_entry(const PhantomCase& c);

}  // namespace sarco
