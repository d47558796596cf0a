#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "sarco/error.hpp"
#include "sarco/volume.hpp"

namespace sarco {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
std::vector<T> parse_list(const std::string& field, const std::string& value, std::size_t count) {
  std::istringstream in(value);
  std::vector<T> out;
  T v{};
  while (in >> v) out.push_back(v);
  if (!in.eof() || out.size() != count) {
    throw Error(ErrorKind::kFormat,
                "malformed header field '" + field + "': expected " + std::to_string(count) +
                    " values, got '" + value + "'");
  }
  return out;
}

void check_hu_range(const CtVolume::Voxels& voxels) {
  if (voxels.size() > 0 && voxels.minCoeff() < kMinHu) {
    throw Error(ErrorKind::kFormat, "voxel value below -1024 HU");
  }
}

}  // namespace

CtVolume::CtVolume(Dims dims, Spacing spacing, std::int16_t fill)
    : CtVolume(dims, spacing, Voxels::Constant(std::max<Index>(dims.count(), 0), fill)) {}

CtVolume::CtVolume(Dims dims, Spacing spacing, Voxels voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
  if (dims.depth <= 0 || dims.height <= 0 || dims.width <= 0) {
    throw Error(ErrorKind::kPrecondition, "volume dims must be positive");
  }
  if (!(spacing.z > 0.0) || !(spacing.y > 0.0) || !(spacing.x > 0.0)) {
    throw Error(ErrorKind::kPrecondition, "volume spacing must be strictly positive");
  }
  if (voxels_.size() != dims.count()) {
    throw Error(ErrorKind::kPrecondition, "voxel count does not match dims");
  }
  check_hu_range(voxels_);
}

Image<std::int16_t> CtVolume::slice(Index z) const {
  Image<std::int16_t> img(dims_.height, dims_.width);
  std::copy_n(voxels_.data() + offset(z, 0, 0), dims_.height * dims_.width, img.data());
  return img;
}

void CtVolume::set_slice(Index z, const Image<std::int16_t>& img) {
  if (img.rows() != dims_.height || img.cols() != dims_.width) {
    throw Error(ErrorKind::kDimension, "slice shape does not match volume");
  }
  std::copy_n(img.data(), img.size(), voxels_.data() + offset(z, 0, 0));
}

bool CtVolume::operator==(const CtVolume& other) const {
  return dims_ == other.dims_ && spacing_ == other.spacing_ &&
         (voxels_ == other.voxels_).all();
}

std::vector<std::string> volume_warnings(const CtVolume& vol) {
  std::vector<std::string> out;
  const double sz = vol.spacing().z;
  if (sz < 0.5 || sz > 7.0) {
    out.push_back("slice thickness " + format_double(sz) + " mm outside [0.5, 7] mm");
  }
  return out;
}

CtVolume load_volume(const std::filesystem::path& header_path, VolumeMeta* meta) {
  std::ifstream header(header_path);
  if (!header) {
    throw Error(ErrorKind::kIo, "cannot open header '" + header_path.string() + "'");
  }
  std::map<std::string, std::string> fields;
  std::string line;
  while (std::getline(header, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kFormat, "malformed header line '" + line + "'");
    }
    fields[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto require = [&](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorKind::kFormat, "missing header field '" + key + "'");
    return it->second;
  };

  if (parse_list<int>("NDims", require("NDims"), 1)[0] != 3) {
    throw Error(ErrorKind::kFormat, "malformed header field 'NDims': only 3 is supported");
  }
  const auto dim_size = parse_list<long long>("DimSize", require("DimSize"), 3);
  if (std::any_of(dim_size.begin(), dim_size.end(), [](long long d) { return d <= 0; })) {
    throw Error(ErrorKind::kFormat, "malformed header field 'DimSize': dims must be positive");
  }
  const auto spacing = parse_list<double>("ElementSpacing", require("ElementSpacing"), 3);
  if (std::any_of(spacing.begin(), spacing.end(), [](double s) { return !(s > 0.0); })) {
    throw Error(ErrorKind::kFormat, "malformed header field 'ElementSpacing': must be > 0");
  }
  if (require("ElementType") != "MET_SHORT") {
    throw Error(ErrorKind::kFormat, "malformed header field 'ElementType': expected MET_SHORT");
  }
  if (auto it = fields.find("ElementByteOrderMSB"); it != fields.end()) {
    if (it->second != "False" && it->second != "false") {
      throw Error(ErrorKind::kFormat, "malformed header field 'ElementByteOrderMSB': big-endian payloads are not supported");
    }
  }
  if (auto it = fields.find("CompressedData"); it != fields.end()) {
    if (it->second != "False" && it->second != "false") {
      throw Error(ErrorKind::kFormat, "malformed header field 'CompressedData': compression is not supported");
    }
  }
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  if (auto it = fields.find("Offset"); it != fields.end()) {
    const auto o = parse_list<double>("Offset", it->second, 3);
    origin = {o[2], o[1], o[0]};
  }
  const std::string& data_file = require("ElementDataFile");
  if (data_file.empty()) throw Error(ErrorKind::kFormat, "malformed header field 'ElementDataFile'");

  const Dims dims{dim_size[2], dim_size[1], dim_size[0]};
  const Spacing sp{spacing[2], spacing[1], spacing[0]};
  const auto payload_path = header_path.parent_path() / data_file;
  std::ifstream payload(payload_path, std::ios::binary);
  if (!payload) {
    throw Error(ErrorKind::kIo, "cannot open payload '" + payload_path.string() + "'");
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(payload)), std::istreambuf_iterator<char>());
  const auto expected = static_cast<std::size_t>(dims.count()) * 2;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::kTruncation, "payload '" + payload_path.string() + "' has " +
                                            std::to_string(bytes.size()) + " bytes, header declares " +
                                            std::to_string(expected));
  }
  CtVolume::Voxels voxels(dims.count());
  for (Index i = 0; i < dims.count(); ++i) {
    const auto lo = static_cast<std::uint8_t>(bytes[2 * i]);
    const auto hi = static_cast<std::uint8_t>(bytes[2 * i + 1]);
    voxels[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
  }
  if (meta) {
    meta->path = header_path.string();
    meta->slice_thickness_mm = sp.z;
    meta->origin_mm = origin;
  }
  return CtVolume(dims, sp, std::move(voxels));
}

void save_volume(const CtVolume& vol, const std::filesystem::path& header_path,
                 const std::array<double, 3>& origin_mm) {
  if (vol.dims().count() <= 0) {
    throw Error(ErrorKind::kPrecondition, "cannot save an empty volume");
  }
  auto payload_path = header_path;
  payload_path.replace_extension(".raw");
  if (payload_path == header_path) {
    throw Error(ErrorKind::kArgument, "header path must not end in .raw");
  }

  std::ofstream header(header_path, std::ios::binary);
  if (!header) throw Error(ErrorKind::kIo, "cannot write header '" + header_path.string() + "'");
  const auto& d = vol.dims();
  const auto& s = vol.spacing();
  header << "ObjectType = Image\n"
         << "NDims = 3\n"
         << "BinaryData = True\n"
         << "ElementByteOrderMSB = False\n"
         << "Offset = " << format_double(origin_mm[2]) << ' ' << format_double(origin_mm[1]) << ' '
         << format_double(origin_mm[0]) << '\n'
         << "ElementSpacing = " << format_double(s.x) << ' ' << format_double(s.y) << ' '
         << format_double(s.z) << '\n'
         << "DimSize = " << d.width << ' ' << d.height << ' ' << d.depth << '\n'
         << "ElementType = MET_SHORT\n"
         << "ElementDataFile = " << payload_path.filename().string() << '\n';
  if (!header) throw Error(ErrorKind::kIo, "failed writing header '" + header_path.string() + "'");

  std::vector<char> bytes(static_cast<std::size_t>(d.count()) * 2);
  for (Index i = 0; i < d.count(); ++i) {
    const auto u = static_cast<std::uint16_t>(vol.voxels()[i]);
    bytes[2 * i] = static_cast<char>(u & 0xFF);
    bytes[2 * i + 1] = static_cast<char>(u >> 8);
  }
  std::ofstream payload(payload_path, std::ios::binary);
  if (!payload) throw Error(ErrorKind::kIo, "cannot write payload '" + payload_path.string() + "'");
  payload.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!payload) throw Error(ErrorKind::kIo, "failed writing payload '" + payload_path.string() + "'");
}

Index z_mm_to_slice_index(double z_mm, double slice_thickness_mm, Index depth) {
  if (!(z_mm >= 0.0)) {
    throw Error(ErrorKind::kDomain, "z_mm must be non-negative, got " + format_double(z_mm));
  }
  if (!(slice_thickness_mm > 0.0) || depth <= 0) {
    throw Error(ErrorKind::kPrecondition, "invalid slice geometry");
  }
  const auto idx = static_cast<Index>(std::round(z_mm / slice_thickness_mm));
  return std::clamp<Index>(idx, 0, depth - 1);
}

Index z_mm_to_slice_index(double z_mm, const CtVolume& vol) {
  return z_mm_to_slice_index(z_mm, vol.spacing().z, vol.dims().depth);
}

}  // namespace sarco
