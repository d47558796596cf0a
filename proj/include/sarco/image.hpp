#pragma once

#include <cstdint>
#include <filesystem>

#include <Eigen/Core>

namespace sarco {

using Eigen::Index;

/// Row-major 2D image; row 0 is the superior (or anterior) edge.
template <typename Scalar>
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ImageXd = Image<double>;
using Image8 = Image<std::int8_t>;
using LabelImage = Image<std::uint8_t>;

/// Writes a binary portable graymap (P5, maxval 255). Values are clamped to
/// [0, 255] after rounding.
void write_pgm(const std::filesystem::path& path, const Image<std::uint8_t>& img);
Image<std::uint8_t> read_pgm(const std::filesystem::path& path);

/// Debug export of a signed 8-bit image: [-127, 127] is shifted to [0, 254].
void write_pgm_signed8(const std::filesystem::path& path, const Image8& img);

}  // namespace sarco
