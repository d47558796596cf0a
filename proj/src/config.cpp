#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "sarco/config.hpp"
#include "sarco/error.hpp"

namespace sarco {

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema{
      {"seed", "0", "master seed; every random stream derives from it"},
      {"data.dir", "phantoms", "directory holding volumes and manifest.txt"},
      {"data.n", "90", "number of phantoms generated by phantom-gen"},
      {"out.dir", "out", "directory for weights, CSV and summaries"},
      {"view", "frontal", "detection MIP: frontal or sagittal"},
      {"phantom.n_vertebrae", "17", "vertebrae above the sacrum"},
      {"phantom.spacing_min_mm", "25", "smallest vertebra spacing"},
      {"phantom.spacing_max_mm", "35", "largest vertebra spacing"},
      {"phantom.thickness_min_mm", "1", "thinnest slice"},
      {"phantom.thickness_max_mm", "7", "thickest slice"},
      {"phantom.noise_sd_hu", "15", "additive Gaussian noise"},
      {"phantom.transitional_probability", "0.05", "chance of a sixth lumbar vertebra"},
      {"phantom.metal_probability", "0", "chance of bright metal rods"},
      {"phantom.fov_mm", "128", "in-plane field of view"},
      {"phantom.matrix", "128", "in-plane pixels per side"},
      {"model.levels", "3", "UNet depth"},
      {"model.base_channels", "16", "channels at the first level"},
      {"model.convs_per_block", "2", "conv units per block"},
      {"train.epochs", "30", "passes over the training set"},
      {"train.batch_size", "4", "samples per step"},
      {"train.lr", "0.001", "Adam learning rate"},
      {"train.augment", "true", "apply random augmentation"},
      {"train.precision", "float", "training scalar: float or double"},
      {"augment.p_hflip", "0.5", "probability of a horizontal flip"},
      {"augment.p_scale", "0.5", "probability of zooming"},
      {"augment.scale_min", "0.9", "smallest zoom factor"},
      {"augment.scale_max", "1.1", "largest zoom factor"},
      {"augment.p_offset", "0.5", "probability of an intensity offset"},
      {"augment.offset_max", "10", "largest offset (8-bit units or HU)"},
      {"augment.p_overexposure", "0.2", "probability of a saturated rectangle (detection)"},
      {"augment.p_dropout", "0.2", "probability of a blanked rectangle (detection)"},
      {"augment.max_region_fraction", "0.25", "largest rectangle area fraction"},
      {"augment.p_affine", "0.3", "probability of a piecewise affine warp"},
      {"augment.affine_grid", "4", "warp cells per side"},
      {"augment.affine_jitter", "3", "largest control point shift in pixels"},
      {"augment.p_subsample", "0.3", "probability of vertical subsampling (detection)"},
      {"augment.subsample_min", "1", "smallest subsampling factor"},
      {"augment.subsample_max", "7", "largest subsampling factor"},
      {"detect.sigma", "4", "target bump width in rows"},
      {"detect.refine", "false", "sub-row peak refinement"},
      {"detect.rel_threshold", "0.5", "candidate threshold relative to the maximum"},
      {"detect.min_separation_mm", "20", "candidate suppression radius"},
      {"segment.class_weighting", "false", "inverse-frequency class weights"},
      {"segment.hu_window", "false", "restrict area and attenuation to [-29, 150] HU"},
      {"eval.k", "3", "cross-validation folds"},
  };
  return schema;
}

Config::Config() {
  for (const auto& k : config_schema()) values_.emplace(std::string(k.key), std::string(k.default_value));
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::kUsage, "unknown config key '" + key + "'");
  it->second = value;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void Config::merge_text(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kUsage, origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (!values_.count(key)) {
      throw Error(ErrorKind::kUsage, origin + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
    }
    set(key, trim(std::string_view(body).substr(eq + 1)));
  }
}

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::kUsage, "unknown config key '" + key + "'");
  return it->second;
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::kUsage, "config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

}  // namespace

double Config::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }
int Config::get_int(const std::string& key) const { return parse_number<int>(key, get(key)); }
std::uint64_t Config::get_u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }

bool Config::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw Error(ErrorKind::kUsage, "config key '" + key + "': expected true or false, got '" + v + "'");
}

std::string Config::dump() const {
  std::string out;
  for (const auto& k : config_schema()) out += std::string(k.key) + " = " + values_.at(std::string(k.key)) + "\n";
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  // FNV-1a keeps the stream name stable across platforms, unlike std::hash.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 rng(seq);
  return rng();
}

ExperimentConfig to_experiment(const Config& cfg) {
  ExperimentConfig e;
  try {
    e.seed = cfg.get_u64("seed");
    e.data_dir = cfg.get("data.dir");
    e.out_dir = cfg.get("out.dir");
    e.data_n = cfg.get_int("data.n");
    e.view = parse_view(cfg.get("view"));

    auto& p = e.phantom;
    p.n_vertebrae = cfg.get_int("phantom.n_vertebrae");
    p.spacing_min_mm = cfg.get_double("phantom.spacing_min_mm");
    p.spacing_max_mm = cfg.get_double("phantom.spacing_max_mm");
    p.thickness_min_mm = cfg.get_double("phantom.thickness_min_mm");
    p.thickness_max_mm = cfg.get_double("phantom.thickness_max_mm");
    p.noise_sd_hu = cfg.get_double("phantom.noise_sd_hu");
    p.transitional_probability = cfg.get_double("phantom.transitional_probability");
    p.metal_probability = cfg.get_double("phantom.metal_probability");
    p.fov_mm = cfg.get_double("phantom.fov_mm");
    p.matrix = cfg.get_int("phantom.matrix");
    p.validate();

    ModelSpec spec;
    spec.levels = cfg.get_int("model.levels");
    spec.base_channels = cfg.get_int("model.base_channels");
    spec.convs_per_block = cfg.get_int("model.convs_per_block");
    e.detect_model = spec;
    e.detect_model.head = HeadKind::kHeatmap1d;
    e.segment_model = spec;
    e.segment_model.head = HeadKind::kSegmentation;
    e.segment_model.num_classes = kNumMuscleClasses;
    e.detect_model.validate();
    e.segment_model.validate();

    e.data_seed = derive_seed(e.seed, "data");
    e.init_seed = derive_seed(e.seed, "init");
    e.split_seed = derive_seed(e.seed, "split");

    TrainHyper hp;
    hp.epochs = cfg.get_int("train.epochs");
    hp.batch_size = cfg.get_int("train.batch_size");
    hp.lr = cfg.get_double("train.lr");
    hp.augment = cfg.get_bool("train.augment");
    hp.shuffle_seed = derive_seed(e.seed, "shuffle");
    hp.validate();
    e.detect_train = hp;
    e.segment_train = hp;
    const auto& precision = cfg.get("train.precision");
    if (precision == "float") {
      e.precision = Precision::kFloat;
    } else if (precision == "double") {
      e.precision = Precision::kDouble;
    } else {
      throw Error(ErrorKind::kUsage, "train.precision must be float or double");
    }

    auto& a = e.augment;
    a.p_hflip = cfg.get_double("augment.p_hflip");
    a.p_scale = cfg.get_double("augment.p_scale");
    a.scale_min = cfg.get_double("augment.scale_min");
    a.scale_max = cfg.get_double("augment.scale_max");
    a.p_offset = cfg.get_double("augment.p_offset");
    a.offset_max = cfg.get_double("augment.offset_max");
    a.p_overexposure = cfg.get_double("augment.p_overexposure");
    a.p_dropout = cfg.get_double("augment.p_dropout");
    a.max_region_fraction = cfg.get_double("augment.max_region_fraction");
    a.p_affine = cfg.get_double("augment.p_affine");
    a.affine_grid = cfg.get_int("augment.affine_grid");
    a.affine_jitter = cfg.get_double("augment.affine_jitter");
    a.p_subsample = cfg.get_double("augment.p_subsample");
    a.subsample_min = cfg.get_int("augment.subsample_min");
    a.subsample_max = cfg.get_int("augment.subsample_max");
    a.seed = derive_seed(e.seed, "augment");
    a.validate();

    e.detect.sigma = cfg.get_double("detect.sigma");
    e.detect.refine = cfg.get_bool("detect.refine");
    e.detect.rel_threshold = cfg.get_double("detect.rel_threshold");
    e.detect.min_separation_mm = cfg.get_double("detect.min_separation_mm");
    if (!(e.detect.sigma > 0.0)) throw Error(ErrorKind::kUsage, "detect.sigma must be positive");
    if (!(e.detect.rel_threshold > 0.0 && e.detect.rel_threshold < 1.0)) {
      throw Error(ErrorKind::kUsage, "detect.rel_threshold must lie in (0, 1)");
    }
    e.segment.class_weighting = cfg.get_bool("segment.class_weighting");
    e.hu_window = cfg.get_bool("segment.hu_window");
    e.folds = cfg.get_int("eval.k");
    if (e.folds < 2) throw Error(ErrorKind::kUsage, "eval.k must be >= 2");
  } catch (const Error& err) {
    // Anything wrong in the configuration is the caller's to fix.
    if (err.kind() == ErrorKind::kUsage) throw;
    throw Error(ErrorKind::kUsage, err.what());
  }
  return e;
}

}  // namespace sarco
