#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "sarco/commands.hpp"
#include "sarco/error.hpp"
#include "sarco/metrics.hpp"
#include "sarco/segmentation.hpp"

namespace sarco {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create directory '" + dir.string() + "'");
}

fs::path volume_path(const fs::path& dir, const std::string& id) { return dir / (id + ".mhd"); }
fs::path mask_path(const fs::path& dir, const std::string& id) { return dir / (id + "_l3_mask.pgm"); }

std::vector<ManifestEntry> training_entries(const fs::path& dir) {
  std::vector<ManifestEntry> out;
  for (auto& e : read_manifest(dir / "manifest.txt")) {
    // Transitional spines have two defensible answers and are kept out.
    if (!e.transitional) out.push_back(std::move(e));
  }
  if (out.empty()) throw Error(ErrorKind::kInsufficientData, "no usable cases in '" + dir.string() + "'");
  return out;
}

struct LoadedCase {
  ManifestEntry entry;
  DetectionInput detection;
  SliceImage slice;
  LabelImage mask;
};

LoadedCase load_case(const fs::path& dir, const ManifestEntry& e, View view) {
  LoadedCase c;
  c.entry = e;
  const auto vol = load_volume(volume_path(dir, e.id));
  if (vol.dims().depth != e.depth) throw Error(ErrorKind::kFormat, e.id + ": depth disagrees with manifest");
  c.detection = make_detection_input(vol, view);
  c.slice = {vol.slice(e.l3_slice).cast<double>(), vol.spacing().y, vol.spacing().x};
  c.mask = read_label_pgm(mask_path(dir, e.id));
  if (c.mask.rows() != c.slice.hu.rows() || c.mask.cols() != c.slice.hu.cols()) {
    throw Error(ErrorKind::kDimension, e.id + ": mask and slice dims differ");
  }
  return c;
}

DetectionExample detection_example(const LoadedCase& c) {
  return {c.detection.pixels, c.detection.row_of_z_mm(c.entry.l3_z_mm)};
}

TrainHyper with_log(TrainHyper hp, std::ostream& log, const std::string& what) {
  hp.on_epoch = [&log, what](int epoch, double loss) {
    log << what << " epoch " << epoch + 1 << " loss " << fmt(loss) << std::endl;
  };
  return hp;
}

template <typename Scalar>
Model<Scalar> train_detect_model(const ExperimentConfig& cfg, const std::vector<DetectionExample>& data,
                                 std::uint64_t init_seed, std::ostream& log) {
  return train_detector<Scalar>(data, cfg.detect_model, init_seed, cfg.augment,
                                with_log(cfg.detect_train, log, "detect"), cfg.detect.sigma)
      .model;
}

template <typename Scalar>
Model<Scalar> train_seg_model(const ExperimentConfig& cfg, const std::vector<SegmentationExample>& data,
                              std::uint64_t init_seed, std::ostream& log) {
  return train_segmenter<Scalar>(data, cfg.segment_model, init_seed, cfg.augment,
                                 with_log(cfg.segment_train, log, "segment"), cfg.segment)
      .model;
}

Model<float> train_detect_any(const ExperimentConfig& cfg, const std::vector<DetectionExample>& data,
                              std::uint64_t init_seed, std::ostream& log) {
  if (cfg.precision == Precision::kDouble) return train_detect_model<double>(cfg, data, init_seed, log).cast<float>();
  return train_detect_model<float>(cfg, data, init_seed, log);
}

Model<float> train_seg_any(const ExperimentConfig& cfg, const std::vector<SegmentationExample>& data,
                           std::uint64_t init_seed, std::ostream& log) {
  if (cfg.precision == Precision::kDouble) return train_seg_model<double>(cfg, data, init_seed, log).cast<float>();
  return train_seg_model<float>(cfg, data, init_seed, log);
}

}  // namespace

void cmd_phantom_gen(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.data_n < 1) throw Error(ErrorKind::kUsage, "data.n must be >= 1");
  ensure_dir(cfg.data_dir);
  std::vector<PhantomCase> summary;
  for (int i = 0; i < cfg.data_n; ++i) {
    auto c = gen_dataset_case(i, cfg.data_seed, cfg.phantom);
    save_volume(c.volume, volume_path(cfg.data_dir, c.id));
    write_label_pgm(mask_path(cfg.data_dir, c.id), c.l3_mask);
    log << "wrote " << c.id << (c.transitional ? " (transitional)" : "") << std::endl;
    // Keep only the ground truth; the voxels are already on disk.
    c.volume = CtVolume({c.volume.dims().depth, 1, 1}, c.volume.spacing());
    summary.push_back(std::move(c));
  }
  write_manifest(summary, cfg.data_dir / "manifest.txt");
}

void cmd_mip(const fs::path& volume, View view, const fs::path& out_pgm) {
  const auto input = make_detection_input(load_volume(volume), view);
  write_pgm_signed8(out_pgm, input.pixels);
}

void cmd_train_detect(const ExperimentConfig& cfg, const fs::path& weights, std::ostream& log) {
  std::vector<DetectionExample> data;
  for (const auto& e : training_entries(cfg.data_dir)) data.push_back(detection_example(load_case(cfg.data_dir, e, cfg.view)));
  save_weights(train_detect_any(cfg, data, cfg.init_seed, log), weights);
}

void cmd_train_seg(const ExperimentConfig& cfg, const fs::path& weights, std::ostream& log) {
  std::vector<SegmentationExample> data;
  for (const auto& e : training_entries(cfg.data_dir)) {
    auto c = load_case(cfg.data_dir, e, cfg.view);
    data.push_back({std::move(c.slice.hu), std::move(c.mask)});
  }
  save_weights(train_seg_any(cfg, data, cfg.init_seed, log), weights);
}

DetectionResult cmd_detect(const fs::path& volume, const fs::path& weights, View view, const DetectOptions& options) {
  const auto model = load_weights<float>(weights);
  if (model.spec().head != HeadKind::kHeatmap1d) {
    throw Error(ErrorKind::kArgument, "'" + weights.string() + "' holds a segmentation model");
  }
  return predict_l3(load_volume(volume), model, view, options);
}

SegmentRecord cmd_segment(const fs::path& volume, std::optional<Index> slice, const fs::path& weights,
                          const fs::path& out_prefix, bool hu_window) {
  const auto model = load_weights<float>(weights);
  if (model.spec().head != HeadKind::kSegmentation) {
    throw Error(ErrorKind::kArgument, "'" + weights.string() + "' holds a detection model");
  }
  const auto vol = load_volume(volume);
  const Index z = slice.value_or(0);
  if (!slice && vol.dims().depth != 1) throw Error(ErrorKind::kUsage, "volume has several slices; pass --slice");
  if (z < 0 || z >= vol.dims().depth) throw Error(ErrorKind::kDomain, "slice index outside the volume");
  const ImageXd hu = vol.slice(z).cast<double>();
  const LabelImage mask = predict_masks(hu, model);

  SegmentRecord r;
  r.slice_index = z;
  const std::optional<HuWindow> window = hu_window ? std::optional<HuWindow>(HuWindow{}) : std::nullopt;
  const auto combined = combined_mask(mask);
  r.area_cm2 = muscle_area_cm2(combined, vol.spacing().y, vol.spacing().x, window, &hu);
  for (std::uint8_t k = 1; k < kNumMuscleClasses; ++k) {
    r.class_area_cm2[k] = muscle_area_cm2(class_mask(mask, k), vol.spacing().y, vol.spacing().x, window, &hu);
  }
  const BinaryMask measured = hu_window ? BinaryMask(combined && hu >= HuWindow{}.lo && hu <= HuWindow{}.hi) : combined;
  r.ma_hu = measured.any() ? muscle_attenuation(measured, hu) : std::numeric_limits<double>::quiet_NaN();

  if (out_prefix.has_parent_path()) ensure_dir(out_prefix.parent_path());
  write_label_pgm(out_prefix.string() + "_mask.pgm", mask);
  CtVolume labels({1, mask.rows(), mask.cols()}, {vol.spacing().z, vol.spacing().y, vol.spacing().x});
  labels.set_slice(0, mask.cast<std::int16_t>());
  save_volume(labels, out_prefix.string() + "_mask.mhd");
  return r;
}

void write_segment_record(std::ostream& out, const SegmentRecord& r) {
  out << "slice_index = " << r.slice_index << '\n'
      << "area_cm2 = " << fmt(r.area_cm2) << '\n'
      << "ma_hu = " << fmt(r.ma_hu) << '\n'
      << "area_es_cm2 = " << fmt(r.class_area_cm2[kErectorSpinae]) << '\n'
      << "area_psoas_cm2 = " << fmt(r.class_area_cm2[kPsoas]) << '\n'
      << "area_ra_cm2 = " << fmt(r.class_area_cm2[kRectusAbdominis]) << '\n';
}

// ---------------------------------------------------------------------------
// Evaluation tables

namespace {

constexpr const char* kCsvHeader =
    "id,view,err_mm,err_slices,dice_es,dice_psoas,dice_ra,dice_combined,area_cm2,ma_hu,gt_area_cm2,gt_ma_hu";

double csv_double(const std::string& s, int line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::kFormat, "csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

void write_eval_csv(const fs::path& path, const std::vector<EvalRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.id << ',' << to_string(r.view) << ',' << fmt(r.err_mm) << ',' << fmt(r.err_slices) << ','
        << fmt(r.dice_es) << ',' << fmt(r.dice_psoas) << ',' << fmt(r.dice_ra) << ',' << fmt(r.dice_combined) << ','
        << fmt(r.area_cm2) << ',' << fmt(r.ma_hu) << ',' << fmt(r.gt_area_cm2) << ',' << fmt(r.gt_ma_hu) << '\n';
  }
}

std::vector<EvalRow> read_eval_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kFormat, "'" + path.string() + "' is empty");
  // The two ground-truth columns are optional so hand-made tables still load.
  const std::string base = std::string(kCsvHeader).substr(0, std::string(kCsvHeader).find(",gt_area_cm2"));
  const bool has_gt = line == kCsvHeader;
  if (!has_gt && line != base) throw Error(ErrorKind::kFormat, "unexpected csv header '" + line + "'");
  std::vector<EvalRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != (has_gt ? 12u : 10u)) {
      throw Error(ErrorKind::kFormat, "csv line " + std::to_string(line_no) + ": wrong number of fields");
    }
    EvalRow r;
    r.id = f[0];
    r.view = parse_view(f[1]);
    double* targets[] = {&r.err_mm, &r.err_slices, &r.dice_es, &r.dice_psoas, &r.dice_ra,
                         &r.dice_combined, &r.area_cm2, &r.ma_hu, &r.gt_area_cm2, &r.gt_ma_hu};
    for (std::size_t i = 2; i < f.size(); ++i) *targets[i - 2] = csv_double(f[i], line_no);
    if (!has_gt) r.gt_area_cm2 = r.gt_ma_hu = std::numeric_limits<double>::quiet_NaN();
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

std::string summary_line(const std::string& label, const UnitSummary& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %8.2f %8.2f %8.2f %8.2f %6d\n", label.c_str(), s.mean, s.sd, s.median, s.max,
                s.count_gt_10);
  return buf;
}

std::string agreement_block(const std::string& what, const std::vector<double>& pred, const std::vector<double>& gt) {
  std::vector<double> a;
  std::vector<double> b;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (std::isfinite(pred[i]) && std::isfinite(gt[i])) {
      a.push_back(pred[i]);
      b.push_back(gt[i]);
    }
  }
  if (a.size() < 2) return what + ": not enough paired values\n";
  const Eigen::Map<const Eigen::ArrayXd> pa(a.data(), static_cast<Index>(a.size()));
  const Eigen::Map<const Eigen::ArrayXd> pb(b.data(), static_cast<Index>(b.size()));
  const auto ba = bland_altman(pa, pb);
  const auto tt = paired_t_test(pa, pb);
  std::string out = what + " (n=" + std::to_string(a.size()) + ")\n";
  out += "  mean predicted " + fixed(pa.mean(), 3) + ", mean reference " + fixed(pb.mean(), 3) + "\n";
  out += "  bland-altman mean diff " + fixed(ba.mean_diff, 4) + ", sd " + fixed(ba.sd_diff, 4) + ", limits [" +
         fixed(ba.loa_low, 4) + ", " + fixed(ba.loa_high, 4) + "]\n";
  out += "  paired t " + fixed(tt.t, 4) + ", dof " + std::to_string(tt.dof) + ", p " + fixed(tt.p, 4) + "\n";
  return out;
}

}  // namespace

std::string format_report(const std::vector<EvalRow>& rows) {
  if (rows.empty()) throw Error(ErrorKind::kInsufficientData, "no rows to report");
  std::set<std::string> views;
  std::vector<SliceError> errors;
  Eigen::ArrayXXd dice(static_cast<Index>(rows.size()), 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    views.insert(std::string(to_string(r.view)));
    errors.push_back({r.err_mm, r.err_slices});
    dice.row(static_cast<Index>(i)) << r.dice_es, r.dice_psoas, r.dice_ra, r.dice_combined;
  }
  std::string view_list;
  for (const auto& v : views) view_list += (view_list.empty() ? "" : ",") + v;

  const auto s = summarize_errors(errors);
  std::string out = "slice detection (n=" + std::to_string(rows.size()) + ", view=" + view_list + ")\n";
  out += "unit         mean      std   median      max    >10\n";
  out += summary_line("mm", s.mm);
  out += summary_line("slices", s.slices);
  out += "\nsegmentation dice      mean      std\n";
  const char* names[] = {"erector spinae", "psoas", "rectus abdominis", "combined"};
  for (Index k = 0; k < 4; ++k) {
    std::vector<double> col(dice.col(k).data(), dice.col(k).data() + dice.rows());
    const auto d = summarize(col);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-18s %8.4f %8.4f\n", names[k], d.mean, d.sd);
    out += buf;
  }
  std::vector<double> area, gt_area, ma, gt_ma;
  for (const auto& r : rows) {
    area.push_back(r.area_cm2);
    gt_area.push_back(r.gt_area_cm2);
    ma.push_back(r.ma_hu);
    gt_ma.push_back(r.gt_ma_hu);
  }
  out += "\n" + agreement_block("muscle area cm2 vs reference", area, gt_area);
  out += agreement_block("muscle attenuation HU vs reference", ma, gt_ma);
  return out;
}

void cmd_report(const fs::path& csv, std::ostream& out) { out << format_report(read_eval_csv(csv)); }

void cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log) {
  const auto entries = training_entries(cfg.data_dir);
  std::vector<LoadedCase> cases;
  std::vector<std::string> ids;
  for (const auto& e : entries) {
    cases.push_back(load_case(cfg.data_dir, e, cfg.view));
    ids.push_back(e.id);
  }
  auto find = [&](const std::string& id) -> const LoadedCase& {
    for (const auto& c : cases) {
      if (c.entry.id == id) return c;
    }
    throw Error(ErrorKind::kFormat, "unknown case '" + id + "'");
  };
  const auto folds = kfold_split(ids, cfg.folds, cfg.split_seed);
  const std::optional<HuWindow> window = cfg.hu_window ? std::optional<HuWindow>(HuWindow{}) : std::nullopt;

  std::vector<EvalRow> rows;
  std::vector<FoldRow> fold_rows;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::set<std::string> test(folds[f].begin(), folds[f].end());
    std::vector<DetectionExample> det_train;
    std::vector<SegmentationExample> seg_train;
    for (const auto& id : ids) {
      if (test.count(id)) continue;
      const auto& c = find(id);
      det_train.push_back(detection_example(c));
      seg_train.push_back({c.slice.hu, c.mask});
    }
    if (det_train.size() + test.size() != ids.size()) {
      throw Error(ErrorKind::kPrecondition, "fold " + std::to_string(f) + " leaks test volumes into training");
    }
    log << "fold " << f + 1 << "/" << folds.size() << ": " << det_train.size() << " train, " << test.size()
        << " test" << std::endl;
    const auto fold_seed = derive_seed(cfg.init_seed, "fold" + std::to_string(f));
    const auto detector = train_detect_any(cfg, det_train, fold_seed, log);
    const auto segmenter = train_seg_any(cfg, seg_train, fold_seed, log);

    std::vector<double> fold_err;
    double dice_sum = 0.0;
    for (const auto& id : folds[f]) {
      const auto& c = find(id);
      EvalRow r;
      r.id = id;
      r.view = cfg.view;
      const auto det = decode_detection(predict_map(c.detection.pixels, detector), c.detection, cfg.detect);
      const auto err = slice_error(det.z_mm, c.entry.l3_z_mm, c.entry.slice_thickness_mm);
      r.err_mm = err.mm;
      r.err_slices = err.slices;
      // Segmentation is scored on the reference L3 slice so the two stages
      // are measured independently.
      const auto pred = predict_masks(c.slice.hu, segmenter);
      r.dice_es = dice(class_mask(pred, kErectorSpinae), class_mask(c.mask, kErectorSpinae));
      r.dice_psoas = dice(class_mask(pred, kPsoas), class_mask(c.mask, kPsoas));
      r.dice_ra = dice(class_mask(pred, kRectusAbdominis), class_mask(c.mask, kRectusAbdominis));
      const auto pc = combined_mask(pred);
      const auto gc = combined_mask(c.mask);
      r.dice_combined = dice(pc, gc);
      const double sy = c.slice.spacing_y_mm;
      const double sx = c.slice.spacing_x_mm;
      r.area_cm2 = muscle_area_cm2(pc, sy, sx, window, &c.slice.hu);
      r.gt_area_cm2 = muscle_area_cm2(gc, sy, sx, window, &c.slice.hu);
      auto ma = [&](const BinaryMask& m) {
        const BinaryMask w = window ? BinaryMask(m && c.slice.hu >= window->lo && c.slice.hu <= window->hi) : m;
        return w.any() ? muscle_attenuation(w, c.slice.hu) : std::numeric_limits<double>::quiet_NaN();
      };
      r.ma_hu = ma(pc);
      r.gt_ma_hu = ma(gc);
      fold_err.push_back(r.err_mm);
      dice_sum += r.dice_combined;
      rows.push_back(std::move(r));
    }
    fold_rows.push_back({static_cast<int>(f) + 1, static_cast<int>(det_train.size()),
                         static_cast<int>(folds[f].size()), summarize(fold_err).median,
                         dice_sum / static_cast<double>(folds[f].size())});
  }
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) { return a.id < b.id; });

  ensure_dir(cfg.out_dir);
  write_eval_csv(cfg.out_dir / "eval.csv", rows);
  std::ofstream folds_out(cfg.out_dir / "folds.csv");
  if (!folds_out) throw Error(ErrorKind::kIo, "cannot write folds.csv");
  folds_out << "fold,n_train,n_test,median_err_mm,mean_dice_combined\n";
  for (const auto& f : fold_rows) {
    folds_out << f.fold << ',' << f.n_train << ',' << f.n_test << ',' << fmt(f.median_err_mm) << ','
              << fmt(f.mean_dice_combined) << '\n';
  }
  std::ofstream summary(cfg.out_dir / "summary.txt");
  if (!summary) throw Error(ErrorKind::kIo, "cannot write summary.txt");
  summary << std::to_string(cfg.folds) << "-fold cross-validation\n\n" << format_report(rows);
}

}  // namespace sarco
