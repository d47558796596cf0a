#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "sarco/error.hpp"
#include "sarco/phantom.hpp"

namespace sarco {

void PhantomParams::validate() const {
  auto range = [](double lo, double hi, const char* what) {
    if (!(lo <= hi)) throw Error(ErrorKind::kPrecondition, std::string("phantom ") + what + " range is empty");
  };
  range(spacing_min_mm, spacing_max_mm, "spacing");
  range(vertebra_hu_min, vertebra_hu_max, "vertebra HU");
  range(muscle_hu_min, muscle_hu_max, "muscle HU");
  range(fat_hu_min, fat_hu_max, "fat HU");
  range(thickness_min_mm, thickness_max_mm, "slice thickness");
  range(top_margin_min_mm, top_margin_max_mm, "top margin");
  if (!(fat_hu_max < muscle_hu_min && muscle_hu_max < vertebra_hu_min)) {
    throw Error(ErrorKind::kPrecondition, "phantom HU classes must be ordered fat < muscle < bone");
  }
  if (n_vertebrae < 6) throw Error(ErrorKind::kPrecondition, "phantom needs at least 6 vertebrae");
  if (!(spacing_min_mm > 10.0)) throw Error(ErrorKind::kPrecondition, "phantom vertebra spacing must exceed 10 mm");
  if (!(thickness_min_mm > 0.0)) throw Error(ErrorKind::kPrecondition, "phantom slice thickness must be positive");
  if (!(fov_mm >= 90.0)) throw Error(ErrorKind::kPrecondition, "phantom field of view must be at least 90 mm");
  if (matrix < 32) throw Error(ErrorKind::kPrecondition, "phantom matrix must be at least 32");
  if (noise_sd_hu < 0.0) throw Error(ErrorKind::kPrecondition, "phantom noise must be non-negative");
  for (double p : {transitional_probability, metal_probability}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::kPrecondition, "phantom probabilities must lie in [0, 1]");
  }
}

namespace {

// All geometry in millimetres. In-plane y points posterior, x to the
// patient's left, both centred on the image; z runs down from slice 0.

struct Ellipse {
  double cy, cx, ry, rx;
  bool contains(double y, double x) const {
    const double dy = (y - cy) / ry;
    const double dx = (x - cx) / rx;
    return dy * dy + dx * dx <= 1.0;
  }
};

struct Ellipsoid {
  double cz, cy, cx, rz, ry, rx;
  bool contains(double z, double y, double x) const {
    const double dz = (z - cz) / rz;
    const double dy = (y - cy) / ry;
    const double dx = (x - cx) / rx;
    return dz * dz + dy * dy + dx * dx <= 1.0;
  }
  double z_lo() const { return cz - rz; }
  double z_hi() const { return cz + rz; }
};

struct Bone {
  enum class Kind { kEllipsoid, kTransverse, kRib, kRod } kind;
  Ellipsoid shape{};       // ellipsoid
  double zc = 0.0;         // transverse process / rib anchor
  double half_width = 0.0; // transverse process
  double scale = 1.0;
  double hu = 0.0;

  double z_lo() const {
    switch (kind) {
      case Kind::kEllipsoid: return shape.z_lo();
      case Kind::kTransverse: return zc - 2.5;
      case Kind::kRib: return zc + 2.0 - 2.5;
      case Kind::kRod: return shape.cz;
    }
    return 0.0;
  }
  double z_hi() const {
    switch (kind) {
      case Kind::kEllipsoid: return shape.z_hi();
      case Kind::kTransverse: return zc + 2.5;
      case Kind::kRib: return zc + 2.0 + 0.25 * 28.0 * scale + 2.5;
      case Kind::kRod: return shape.rz;
    }
    return 0.0;
  }
  bool contains(double z, double y, double x) const {
    const double s = scale;
    switch (kind) {
      case Kind::kEllipsoid:
        return shape.contains(z, y, x);
      case Kind::kTransverse:
        return std::abs(z - zc) <= 2.5 && std::abs(y - 18.0 * s) <= 1.25 * s && std::abs(x) <= half_width * s;
      case Kind::kRib: {
        const double ax = std::abs(x);
        if (ax < 12.0 * s || ax > 40.0 * s || y < 0.0 || y > 20.0 * s) return false;
        return std::abs(z - (zc + 2.0 + 0.25 * (ax - 12.0 * s))) <= 2.5;
      }
      case Kind::kRod:
        // Vertical cylinder between cz and rz (reused as z range).
        return z >= shape.cz && z <= shape.rz && std::hypot(y - shape.cy, x - shape.cx) <= shape.rx;
    }
    return false;
  }
};

struct Muscle {
  Ellipse shape;
  std::uint8_t label;
};

constexpr std::array<double, 5> kLumbarTpHalfWidth{18.0, 22.0, 30.0, 24.0, 20.0};
constexpr std::array<double, 6> kTransitionalTpHalfWidth{18.0, 22.0, 30.0, 27.0, 22.0, 20.0};

double draw(std::mt19937_64& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string case_id(int index) {
  std::string n = std::to_string(index);
  return "ph" + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n;
}

}  // namespace

PhantomCase gen_phantom(std::uint64_t seed, const PhantomParams& p) {
  p.validate();
  std::mt19937_64 rng(seed);
  PhantomCase out;
  out.seed = seed;

  // Draw order is fixed so that each seed maps to one phantom.
  const double sz = draw(rng, p.thickness_min_mm, p.thickness_max_mm);
  const double gap = draw(rng, p.spacing_min_mm, p.spacing_max_mm);
  const double s = draw(rng, 0.94, 1.06);
  const double top = draw(rng, p.top_margin_min_mm, p.top_margin_max_mm);
  const bool transitional =
      p.force_transitional || draw(rng, 0.0, 1.0) < p.transitional_probability;
  const bool metal = draw(rng, 0.0, 1.0) < p.metal_probability;
  const int n_lumbar = transitional ? 6 : 5;
  const int n_thoracic = p.n_vertebrae - 5;
  const int n_vert = n_thoracic + n_lumbar;
  out.transitional = transitional;

  double z = top;
  double gap_sum = 0.0;
  for (int k = 0; k < n_vert; ++k) {
    if (k > 0) {
      const double g = gap * draw(rng, 0.95, 1.05);
      z += g;
      gap_sum += g;
    }
    out.vertebra_z_mm.push_back(z);
  }
  out.vertebra_spacing_mm = n_vert > 1 ? gap_sum / (n_vert - 1) : gap;
  out.sacrum_z_mm = z + 0.5 * gap + 27.0;
  const double length = out.sacrum_z_mm + 25.0 + 12.0;

  std::vector<Bone> bones;
  for (int k = 0; k < n_vert; ++k) {
    const double zc = out.vertebra_z_mm[static_cast<std::size_t>(k)];
    const double hu = draw(rng, p.vertebra_hu_min, p.vertebra_hu_max);
    Bone body{Bone::Kind::kEllipsoid};
    body.shape = {zc, 8.0 * s, 0.0, 0.38 * gap, 9.0 * s, 10.0 * s};
    body.hu = hu;
    bones.push_back(body);
    Bone spinous{Bone::Kind::kEllipsoid};
    spinous.shape = {zc, 28.0 * s, 0.0, 0.3 * gap, 7.0 * s, 3.0 * s};
    spinous.hu = hu;
    bones.push_back(spinous);
    const int lumbar = k - n_thoracic;
    if (lumbar >= 0) {
      Bone tp{Bone::Kind::kTransverse};
      tp.zc = zc;
      tp.scale = s;
      tp.half_width = transitional ? kTransitionalTpHalfWidth[static_cast<std::size_t>(lumbar)]
                                   : kLumbarTpHalfWidth[static_cast<std::size_t>(lumbar)];
      tp.hu = hu;
      bones.push_back(tp);
    } else {
      Bone rib{Bone::Kind::kRib};
      rib.zc = zc;
      rib.scale = s;
      rib.hu = hu;
      bones.push_back(rib);
    }
  }
  const double sacrum_hu = draw(rng, p.vertebra_hu_min, p.vertebra_hu_max);
  Bone sacrum{Bone::Kind::kEllipsoid};
  sacrum.shape = {out.sacrum_z_mm, 8.0 * s, 0.0, 25.0, 12.0 * s, 16.0 * s};
  sacrum.hu = sacrum_hu;
  bones.push_back(sacrum);
  for (double side : {-1.0, 1.0}) {
    Bone wing{Bone::Kind::kEllipsoid};
    wing.shape = {out.sacrum_z_mm - 5.0, 2.0 * s, side * 34.0 * s, 30.0, 14.0 * s, 9.0 * s};
    wing.hu = sacrum_hu;
    bones.push_back(wing);
  }
  if (metal) {
    // Pedicle-screw style rods spanning the lumbar spine.
    const double z0 = out.vertebra_z_mm[static_cast<std::size_t>(n_thoracic)];
    for (double side : {-1.0, 1.0}) {
      Bone rod{Bone::Kind::kRod};
      rod.shape = {z0, 20.0 * s, side * 6.0 * s, out.vertebra_z_mm.back(), 1.5, 1.5};
      rod.hu = 3000.0;
      bones.push_back(rod);
    }
  }

  // L3 is the third vertebra above the sacrum; a transitional spine offers
  // the fourth as a second candidate.
  out.l3_z_mm = out.vertebra_z_mm[static_cast<std::size_t>(n_vert - 3)];
  out.candidate_z_mm = {out.l3_z_mm};
  if (transitional) out.candidate_z_mm.push_back(out.vertebra_z_mm[static_cast<std::size_t>(n_vert - 4)]);

  // Soft tissue is constant along z.
  const double fat_hu = draw(rng, p.fat_hu_min, p.fat_hu_max);
  const double visceral_hu = draw(rng, -60.0, -20.0);
  const Ellipse body_outline{0.0, 0.0, 40.0 * s, 44.0 * s};
  const Ellipse visceral{-10.0 * s, 0.0, 22.0 * s, 32.0 * s};
  struct MuscleTemplate {
    double cy, cx, ry, rx;
    std::uint8_t label;
  };
  constexpr std::array<MuscleTemplate, 3> kMuscles{{
      {29.0, 13.0, 7.0, 7.5, kErectorSpinae},
      {7.0, 19.0, 7.0, 6.0, kPsoas},
      {-34.0, 9.0, 3.5, 7.5, kRectusAbdominis},
  }};
  std::vector<Muscle> muscles;
  std::vector<double> muscle_hu;
  for (const auto& m : kMuscles) {
    double dy = 0.0, dx = 0.0, fy = 1.0, fx = 1.0;
    for (double side : {-1.0, 1.0}) {
      if (!p.symmetric || side < 0.0) {
        dy = draw(rng, -0.8, 0.8);
        dx = draw(rng, -0.8, 0.8);
        fy = draw(rng, 0.95, 1.05);
        fx = draw(rng, 0.95, 1.05);
      }
      const Ellipse e{(m.cy + dy) * s, side * (m.cx + dx) * s, m.ry * fy * s, m.rx * fx * s};
      muscles.push_back({e, m.label});
      out.analytic_area_mm2[m.label] += std::numbers::pi * e.ry * e.rx;
    }
  }
  for (std::size_t i = 0; i < muscles.size(); ++i) {
    muscle_hu.push_back(p.symmetric && i % 2 == 1 ? muscle_hu.back() : draw(rng, p.muscle_hu_min, p.muscle_hu_max));
  }

  const Index n = p.matrix;
  const double px = p.fov_mm / static_cast<double>(n);
  const double center = (n - 1) / 2.0;
  ImageXd base_hu(n, n);
  LabelImage base_label(n, n);
  for (Index iy = 0; iy < n; ++iy) {
    const double y = (iy - center) * px;
    for (Index ix = 0; ix < n; ++ix) {
      const double x = (ix - center) * px;
      double hu = -1000.0;
      std::uint8_t label = kBackground;
      if (body_outline.contains(y, x)) hu = fat_hu;
      if (visceral.contains(y, x)) hu = visceral_hu;
      for (std::size_t m = 0; m < muscles.size(); ++m) {
        if (muscles[m].shape.contains(y, x)) {
          hu = muscle_hu[m];
          label = muscles[m].label;
        }
      }
      base_hu(iy, ix) = hu;
      base_label(iy, ix) = label;
    }
  }

  const Index depth = std::max<Index>(2, static_cast<Index>(std::ceil(length / sz)));
  out.volume = CtVolume({depth, n, n}, {sz, px, px});
  out.l3_slice = z_mm_to_slice_index(out.l3_z_mm, sz, depth);
  std::normal_distribution<double> noise(0.0, p.noise_sd_hu > 0.0 ? p.noise_sd_hu : 1.0);
  const bool noisy = p.noise_sd_hu > 0.0;
  std::vector<const Bone*> active;
  for (Index iz = 0; iz < depth; ++iz) {
    const double zmm = static_cast<double>(iz) * sz;
    active.clear();
    for (const auto& b : bones) {
      if (zmm >= b.z_lo() - 1e-9 && zmm <= b.z_hi() + 1e-9) active.push_back(&b);
    }
    const bool at_l3 = iz == out.l3_slice;
    if (at_l3) out.l3_mask = base_label;
    for (Index iy = 0; iy < n; ++iy) {
      const double y = (iy - center) * px;
      for (Index ix = 0; ix < n; ++ix) {
        const double x = (ix - center) * px;
        double hu = base_hu(iy, ix);
        for (const Bone* b : active) {
          if (b->contains(zmm, y, x)) {
            hu = b->hu;
            if (at_l3) out.l3_mask(iy, ix) = kBackground;
          }
        }
        if (noisy) hu += noise(rng);
        out.volume(iz, iy, ix) = static_cast<std::int16_t>(std::clamp(std::round(hu), -1024.0, 32767.0));
      }
    }
  }
  return out;
}

std::uint64_t phantom_case_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x9e37u};
  std::mt19937_64 rng(seq);
  return rng();
}

PhantomCase gen_dataset_case(int index, std::uint64_t seed, const PhantomParams& params) {
  auto c = gen_phantom(phantom_case_seed(seed, static_cast<std::uint64_t>(index)), params);
  c.id = case_id(index);
  return c;
}

std::vector<PhantomCase> gen_dataset(int n, std::uint64_t seed, const PhantomParams& params) {
  if (n < 1) throw Error(ErrorKind::kPrecondition, "dataset size must be >= 1");
  std::vector<PhantomCase> cases;
  cases.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) cases.push_back(gen_dataset_case(i, seed, params));
  return cases;
}

ManifestEntry manifest_entry(const PhantomCase& c) {
  return {c.id, c.seed, c.volume.spacing().z, c.volume.dims().depth, c.l3_z_mm,
          c.l3_slice, c.transitional, c.candidate_z_mm, c.vertebra_spacing_mm};
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_manifest(const std::vector<PhantomCase>& cases, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << "# id seed slice_thickness_mm depth l3_z_mm l3_slice transitional vertebra_spacing_mm candidates_z_mm\n";
  for (const auto& c : cases) {
    const auto e = manifest_entry(c);
    out << e.id << ' ' << e.seed << ' ' << fmt(e.slice_thickness_mm) << ' ' << e.depth << ' ' << fmt(e.l3_z_mm)
        << ' ' << e.l3_slice << ' ' << (e.transitional ? 1 : 0) << ' ' << fmt(e.vertebra_spacing_mm) << ' ';
    for (std::size_t i = 0; i < e.candidate_z_mm.size(); ++i) out << (i ? "," : "") << fmt(e.candidate_z_mm[i]);
    out << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ManifestEntry e;
    int transitional = 0;
    std::string candidates;
    if (!(ss >> e.id >> e.seed >> e.slice_thickness_mm >> e.depth >> e.l3_z_mm >> e.l3_slice >> transitional >>
          e.vertebra_spacing_mm >> candidates)) {
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(line_no) + ": malformed manifest line");
    }
    e.transitional = transitional != 0;
    std::istringstream cs(candidates);
    std::string item;
    while (std::getline(cs, item, ',')) e.candidate_z_mm.push_back(std::stod(item));
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace sarco
