#pragma once

#include <string_view>

#include "sarco/image.hpp"
#include "sarco/volume.hpp"

namespace sarco {

enum class View { kFrontal, kSagittalRestricted };

std::string_view to_string(View view);
View parse_view(std::string_view name);

/// 2D projection of a volume. Rows run superior to inferior; columns are
/// left-right (frontal) or anterior-posterior (sagittal). Pixel values are HU
/// before `threshold_and_map_8bit` and integers in [-127, 127] after it.
struct MipImage {
  ImageXd pixels;
  double row_spacing_mm = 1.0;
  double col_spacing_mm = 1.0;
  View view = View::kFrontal;
  double source_slice_thickness_mm = 1.0;
};

/// Maximum over y: out(z, x) = max_y vol(z, y, x).
MipImage frontal_mip(const CtVolume& vol);

/// Inclusive x-index range of the restricted sagittal band:
/// [W/2 - hw/sx, W/2 + hw/sx] clamped to [0, W).
struct ColumnWindow {
  Index first = 0;
  Index last = 0;
};
ColumnWindow sagittal_window(Index width, double col_spacing_mm, double half_width_mm);

/// Maximum over x inside the central band: out(z, y) = max_{x in band} vol(z, y, x).
MipImage restricted_sagittal_mip(const CtVolume& vol, double half_width_mm = 20.0);

/// round((clamp(v, lo, hi) - lo) / (hi - lo) * 254) - 127.
double map_window_8bit(double value, double lo, double hi);

inline constexpr double kMipThresholdLowHu = 100.0;
inline constexpr double kMipThresholdHighHu = 1500.0;

/// Applies the [100, 1500] HU window and maps to [-127, 127].
MipImage threshold_and_map_8bit(const MipImage& img);

/// Bilinear resampling with corner alignment: output (r, c) samples the input
/// at (r * (rows-1)/(out_rows-1), c * (cols-1)/(out_cols-1)).
ImageXd resample_bilinear(const ImageXd& img, Index out_rows, Index out_cols);

/// Resamples onto a 1x1 mm grid of round(rows*row_spacing) x round(cols*col_spacing).
MipImage resample_to_unit(const MipImage& img);

/// Network-ready MIP plus enough geometry to map a row back to the volume.
struct DetectionInput {
  Image8 pixels;
  View view = View::kFrontal;
  Index source_depth = 0;
  double source_slice_thickness_mm = 1.0;
  /// Millimetres between consecutive output rows; close to 1 by construction.
  double row_pitch_mm = 1.0;

  double z_mm_of_row(double row) const { return row * row_pitch_mm; }
  double row_of_z_mm(double z_mm) const { return row_pitch_mm > 0.0 ? z_mm / row_pitch_mm : 0.0; }
};

/// mip -> threshold_and_map_8bit -> resample_to_unit, rounded back to 8 bit.
DetectionInput make_detection_input(const CtVolume& vol, View view);

/// Scales an 8-bit image into [-1, 1] for the network.
template <typename Scalar>
Image<Scalar> to_network_scale(const Image8& img) {
  return img.cast<Scalar>() / Scalar(127);
}

}  // namespace sarco
