#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sarco/image.hpp"

namespace sarco {

/// Voxel size in millimetres.
struct Spacing {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;

  bool operator==(const Spacing&) const = default;
};

struct Dims {
  Index depth = 0;
  Index height = 0;
  Index width = 0;

  Index count() const { return depth * height * width; }
  bool operator==(const Dims&) const = default;
};

inline constexpr std::int16_t kMinHu = -1024;

/// Axial CT stack of signed 16-bit HU values. z runs superior to inferior,
/// y anterior to posterior, x left to right; x is the fastest index.
class CtVolume {
 public:
  using Voxels = Eigen::Array<std::int16_t, Eigen::Dynamic, 1>;

  CtVolume() = default;
  /// Allocates a volume filled with `fill`.
  CtVolume(Dims dims, Spacing spacing, std::int16_t fill = kMinHu);
  CtVolume(Dims dims, Spacing spacing, Voxels voxels);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  double slice_thickness_mm() const { return spacing_.z; }

  const Voxels& voxels() const { return voxels_; }
  Voxels& voxels() { return voxels_; }

  Index offset(Index z, Index y, Index x) const {
    return (z * dims_.height + y) * dims_.width + x;
  }
  std::int16_t operator()(Index z, Index y, Index x) const { return voxels_[offset(z, y, x)]; }
  std::int16_t& operator()(Index z, Index y, Index x) { return voxels_[offset(z, y, x)]; }

  /// Copy of one axial slice as an (height x width) image.
  Image<std::int16_t> slice(Index z) const;
  void set_slice(Index z, const Image<std::int16_t>& img);

  bool operator==(const CtVolume& other) const;

 private:
  Dims dims_;
  Spacing spacing_;
  Voxels voxels_;
};

struct VolumeMeta {
  std::string path;
  double slice_thickness_mm = 0.0;
  std::array<double, 3> origin_mm{0.0, 0.0, 0.0};  // (z0, y0, x0)
};

/// Non-fatal observations about a volume, e.g. slice thickness outside the
/// 0.5-7 mm range seen in clinical data.
std::vector<std::string> volume_warnings(const CtVolume& vol);

/// Reads a MetaImage-style header plus raw little-endian int16 payload.
CtVolume load_volume(const std::filesystem::path& header_path, VolumeMeta* meta = nullptr);

/// Writes `<stem>.mhd` and `<stem>.raw` next to each other. The header is
/// written to `header_path`; the payload name is derived from it.
void save_volume(const CtVolume& vol, const std::filesystem::path& header_path,
                 const std::array<double, 3>& origin_mm = {0.0, 0.0, 0.0});

/// round(z_mm / sz) clamped to [0, D-1]; slice i sits at z = i * sz.
Index z_mm_to_slice_index(double z_mm, const CtVolume& vol);
Index z_mm_to_slice_index(double z_mm, double slice_thickness_mm, Index depth);

}  // namespace sarco
