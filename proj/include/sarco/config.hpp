#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sarco/augment.hpp"
#include "sarco/detection.hpp"
#include "sarco/model.hpp"
#include "sarco/phantom.hpp"
#include "sarco/projection.hpp"
#include "sarco/segmentation.hpp"
#include "sarco/train.hpp"

namespace sarco {

struct ConfigKey {
  std::string_view key;
  std::string_view default_value;
  std::string_view help;
};

/// Every accepted key with its default. Anything else is rejected.
const std::vector<ConfigKey>& config_schema();

/// Flat dotted-key store. Text form is `key = value` per line; `#` starts a
/// comment; blank lines are ignored.
class Config {
 public:
  Config();

  void set(const std::string& key, const std::string& value);
  void merge_file(const std::filesystem::path& path);
  void merge_text(std::string_view text, const std::string& origin = "<text>");

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// All keys in schema order, one `key = value` line each.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
};

enum class Precision { kFloat, kDouble };

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  int data_n = 0;
  PhantomParams phantom;
  View view = View::kFrontal;
  ModelSpec detect_model;
  ModelSpec segment_model;
  TrainHyper detect_train;
  TrainHyper segment_train;
  Precision precision = Precision::kFloat;
  AugmentConfig augment;
  DetectOptions detect;
  SegmentOptions segment;
  bool hu_window = false;
  int folds = 3;
  std::uint64_t data_seed = 0;
  std::uint64_t init_seed = 0;
  std::uint64_t split_seed = 0;
};

ExperimentConfig to_experiment(const Config& cfg);

/// Named sub-stream of the master seed ("data", "init", "augment", "split",
/// "shuffle"); independent of every other name.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

}  // namespace sarco
