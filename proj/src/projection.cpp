#include <algorithm>
#include <cmath>
#include <limits>

#include "sarco/error.hpp"
#include "sarco/projection.hpp"

namespace sarco {

std::string_view to_string(View view) {
  return view == View::kFrontal ? "frontal" : "sagittal";
}

View parse_view(std::string_view name) {
  if (name == "frontal") return View::kFrontal;
  if (name == "sagittal" || name == "sagittal-restricted") return View::kSagittalRestricted;
  throw Error(ErrorKind::kArgument, "unknown view '" + std::string(name) + "'");
}

MipImage frontal_mip(const CtVolume& vol) {
  const auto& d = vol.dims();
  MipImage out;
  out.pixels.setConstant(d.depth, d.width, -std::numeric_limits<double>::infinity());
  for (Index z = 0; z < d.depth; ++z) {
    for (Index y = 0; y < d.height; ++y) {
      const std::int16_t* row = vol.voxels().data() + vol.offset(z, y, 0);
      for (Index x = 0; x < d.width; ++x) {
        out.pixels(z, x) = std::max(out.pixels(z, x), static_cast<double>(row[x]));
      }
    }
  }
  out.row_spacing_mm = vol.spacing().z;
  out.col_spacing_mm = vol.spacing().x;
  out.view = View::kFrontal;
  out.source_slice_thickness_mm = vol.spacing().z;
  return out;
}

ColumnWindow sagittal_window(Index width, double col_spacing_mm, double half_width_mm) {
  if (!(half_width_mm > 0.0)) {
    throw Error(ErrorKind::kPrecondition, "half_width_mm must be positive");
  }
  const double center = static_cast<double>(width) / 2.0;
  const double half = half_width_mm / col_spacing_mm;
  auto first = static_cast<Index>(std::ceil(center - half));
  auto last = static_cast<Index>(std::floor(center + half));
  first = std::clamp<Index>(first, 0, width - 1);
  last = std::clamp<Index>(last, 0, width - 1);
  if (last < first) {
    // Band narrower than a pixel: fall back to the centre column.
    first = last = std::clamp<Index>(width / 2, 0, width - 1);
  }
  return {first, last};
}

MipImage restricted_sagittal_mip(const CtVolume& vol, double half_width_mm) {
  const auto& d = vol.dims();
  const auto window = sagittal_window(d.width, vol.spacing().x, half_width_mm);
  MipImage out;
  out.pixels.setConstant(d.depth, d.height, -std::numeric_limits<double>::infinity());
  for (Index z = 0; z < d.depth; ++z) {
    for (Index y = 0; y < d.height; ++y) {
      const std::int16_t* row = vol.voxels().data() + vol.offset(z, y, 0);
      double m = -std::numeric_limits<double>::infinity();
      for (Index x = window.first; x <= window.last; ++x) m = std::max(m, static_cast<double>(row[x]));
      out.pixels(z, y) = m;
    }
  }
  out.row_spacing_mm = vol.spacing().z;
  out.col_spacing_mm = vol.spacing().y;
  out.view = View::kSagittalRestricted;
  out.source_slice_thickness_mm = vol.spacing().z;
  return out;
}

double map_window_8bit(double value, double lo, double hi) {
  const double t = (std::clamp(value, lo, hi) - lo) / (hi - lo);
  return std::round(t * 254.0) - 127.0;
}

MipImage threshold_and_map_8bit(const MipImage& img) {
  MipImage out = img;
  out.pixels = img.pixels.unaryExpr(
      [](double v) { return map_window_8bit(v, kMipThresholdLowHu, kMipThresholdHighHu); });
  return out;
}

ImageXd resample_bilinear(const ImageXd& img, Index out_rows, Index out_cols) {
  if (img.size() == 0 || out_rows <= 0 || out_cols <= 0) {
    throw Error(ErrorKind::kPrecondition, "resample needs non-empty input and output");
  }
  const Index rows = img.rows();
  const Index cols = img.cols();
  const double rs = out_rows > 1 ? static_cast<double>(rows - 1) / static_cast<double>(out_rows - 1) : 0.0;
  const double cs = out_cols > 1 ? static_cast<double>(cols - 1) / static_cast<double>(out_cols - 1) : 0.0;
  ImageXd out(out_rows, out_cols);
  for (Index r = 0; r < out_rows; ++r) {
    const double sr = r * rs;
    const Index r0 = std::min<Index>(static_cast<Index>(sr), rows - 1);
    const Index r1 = std::min<Index>(r0 + 1, rows - 1);
    const double fr = sr - static_cast<double>(r0);
    for (Index c = 0; c < out_cols; ++c) {
      const double sc = c * cs;
      const Index c0 = std::min<Index>(static_cast<Index>(sc), cols - 1);
      const Index c1 = std::min<Index>(c0 + 1, cols - 1);
      const double fc = sc - static_cast<double>(c0);
      const double top = img(r0, c0) + fc * (img(r0, c1) - img(r0, c0));
      const double bottom = img(r1, c0) + fc * (img(r1, c1) - img(r1, c0));
      out(r, c) = top + fr * (bottom - top);
    }
  }
  return out;
}

MipImage resample_to_unit(const MipImage& img) {
  if (!(img.row_spacing_mm > 0.0) || !(img.col_spacing_mm > 0.0)) {
    throw Error(ErrorKind::kPrecondition, "MIP spacing must be positive");
  }
  const Index rows = std::max<Index>(1, std::llround(img.pixels.rows() * img.row_spacing_mm));
  const Index cols = std::max<Index>(1, std::llround(img.pixels.cols() * img.col_spacing_mm));
  MipImage out = img;
  if (rows == img.pixels.rows() && cols == img.pixels.cols()) {
    out.pixels = img.pixels;
  } else {
    out.pixels = resample_bilinear(img.pixels, rows, cols);
  }
  out.row_spacing_mm = 1.0;
  out.col_spacing_mm = 1.0;
  return out;
}

DetectionInput make_detection_input(const CtVolume& vol, View view) {
  const MipImage mip = view == View::kFrontal ? frontal_mip(vol) : restricted_sagittal_mip(vol);
  const MipImage unit = resample_to_unit(threshold_and_map_8bit(mip));
  DetectionInput out;
  out.pixels = unit.pixels.round().cwiseMax(-127.0).cwiseMin(127.0).cast<std::int8_t>();
  out.view = view;
  out.source_depth = vol.dims().depth;
  out.source_slice_thickness_mm = vol.spacing().z;
  const Index rows = out.pixels.rows();
  out.row_pitch_mm = rows > 1 ? static_cast<double>(vol.dims().depth - 1) * vol.spacing().z /
                                    static_cast<double>(rows - 1)
                              : 0.0;
  return out;
}

}  // namespace sarco
