// sarco: phantom generation, training, inference and evaluation for L3
// slice detection and muscle segmentation.
//
// Every subcommand accepts --config FILE and --<key> VALUE for each config
// key (see docs/formats.md). Flags override the file, which overrides the
// defaults. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "sarco/commands.hpp"
#include "sarco/config.hpp"
#include "sarco/error.hpp"

namespace {

using sarco::Error;
using sarco::ErrorKind;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kArgument:
      return 1;
    case ErrorKind::kNumeric:
      return 3;
    default:
      return 2;
  }
}

// Config keys given on the command line, collected per subcommand.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "config file (key = value lines)");
    for (const auto& k : sarco::config_schema()) {
      const std::string key(k.key);
      app->add_option_function<std::string>(
          "--" + key, [this, key](const std::string& v) { values[key] = v; },
          std::string(k.help) + " [" + std::string(k.default_value) + "]")
          ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }

  sarco::ExperimentConfig resolve() const {
    sarco::Config cfg;
    if (!config_file.empty()) cfg.merge_file(config_file);
    for (const auto& [k, v] : values) cfg.set(k, v);
    return sarco::to_experiment(cfg);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"L3 slice detection and muscle segmentation on CT volumes"};
  app.require_subcommand(1);

  ConfigFlags phantom_flags, mip_flags, train_det_flags, train_seg_flags, detect_flags, segment_flags, eval_flags;

  auto* phantom = app.add_subcommand("phantom-gen", "generate synthetic volumes, L3 masks and a manifest");
  phantom_flags.attach(phantom);

  std::string mip_volume, mip_out;
  auto* mip = app.add_subcommand("mip", "write the 8-bit detection MIP of a volume");
  mip->add_option("volume", mip_volume, "volume header (.mhd)")->required();
  mip->add_option("--out", mip_out, "output graymap (.pgm)")->required();
  mip_flags.attach(mip);

  std::string train_det_weights, train_seg_weights;
  auto* train_det = app.add_subcommand("train-detect", "train the slice detector on data.dir");
  train_det->add_option("--weights", train_det_weights, "output weights (default out.dir/detect.weights)");
  train_det_flags.attach(train_det);
  auto* train_seg = app.add_subcommand("train-seg", "train the muscle segmenter on data.dir");
  train_seg->add_option("--weights", train_seg_weights, "output weights (default out.dir/segment.weights)");
  train_seg_flags.attach(train_seg);

  std::string detect_volume, detect_weights, detect_out;
  auto* detect = app.add_subcommand("detect", "locate the L3 slice in a volume");
  detect->add_option("volume", detect_volume, "volume header (.mhd)")->required();
  detect->add_option("--weights", detect_weights, "detector weights")->required();
  detect->add_option("--out", detect_out, "also write the record to this file");
  detect_flags.attach(detect);

  std::string segment_volume, segment_weights, segment_out, segment_record;
  std::optional<long> segment_slice;
  auto* segment = app.add_subcommand("segment", "segment muscles on one axial slice");
  segment->add_option("volume", segment_volume, "volume header (.mhd)")->required();
  segment->add_option("--weights", segment_weights, "segmenter weights")->required();
  segment->add_option("--slice", segment_slice, "slice index (needed for multi-slice volumes)");
  segment->add_option("--out", segment_out, "output prefix for mask files")->required();
  segment->add_option("--record", segment_record, "also write the record to this file");
  segment_flags.attach(segment);

  auto* evaluate = app.add_subcommand("evaluate", "k-fold cross-validation; writes eval.csv, folds.csv, summary.txt");
  eval_flags.attach(evaluate);

  std::string report_csv;
  auto* report = app.add_subcommand("report", "summary tables from an evaluation csv");
  report->add_option("csv", report_csv, "eval.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (phantom->parsed()) {
      sarco::cmd_phantom_gen(phantom_flags.resolve(), std::cerr);
    } else if (mip->parsed()) {
      sarco::cmd_mip(mip_volume, mip_flags.resolve().view, mip_out);
    } else if (train_det->parsed()) {
      const auto cfg = train_det_flags.resolve();
      std::filesystem::create_directories(cfg.out_dir);
      sarco::cmd_train_detect(cfg, train_det_weights.empty() ? cfg.out_dir / "detect.weights" : std::filesystem::path(train_det_weights),
                              std::cerr);
    } else if (train_seg->parsed()) {
      const auto cfg = train_seg_flags.resolve();
      std::filesystem::create_directories(cfg.out_dir);
      sarco::cmd_train_seg(cfg, train_seg_weights.empty() ? cfg.out_dir / "segment.weights" : std::filesystem::path(train_seg_weights),
                           std::cerr);
    } else if (detect->parsed()) {
      const auto cfg = detect_flags.resolve();
      const auto result = sarco::cmd_detect(detect_volume, detect_weights, cfg.view, cfg.detect);
      sarco::write_detection_record(std::cout, result);
      if (!detect_out.empty()) {
        std::ofstream out(detect_out);
        if (!out) throw Error(ErrorKind::kIo, "cannot write '" + detect_out + "'");
        sarco::write_detection_record(out, result);
      }
    } else if (segment->parsed()) {
      const auto cfg = segment_flags.resolve();
      std::optional<sarco::Index> slice;
      if (segment_slice) slice = *segment_slice;
      const auto record = sarco::cmd_segment(segment_volume, slice, segment_weights, segment_out, cfg.hu_window);
      sarco::write_segment_record(std::cout, record);
      if (!segment_record.empty()) {
        std::ofstream out(segment_record);
        if (!out) throw Error(ErrorKind::kIo, "cannot write '" + segment_record + "'");
        sarco::write_segment_record(out, record);
      }
    } else if (evaluate->parsed()) {
      sarco::cmd_evaluate(eval_flags.resolve(), std::cerr);
    } else if (report->parsed()) {
      sarco::cmd_report(report_csv, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << sarco::to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: io: " << e.what() << '\n';
    return 2;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: resource: out of memory\n";
    return 2;
  }
  return 0;
}
