// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// The phantom experiments train full-size models and take several minutes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "metric_oracles.hpp"
#include "sarco/commands.hpp"
#include "sarco/detection.hpp"
#include "sarco/metrics.hpp"
#include "sarco/phantom.hpp"
#include "sarco/projection.hpp"
#include "sarco/segmentation.hpp"

namespace fs = std::filesystem;
using namespace sarco;

namespace {

int failures = 0;
std::ostringstream transcript;

void report(bool ok, const std::string& name, const std::string& detail) {
  const std::string line = std::string(ok ? "PASS " : "FAIL ") + name + ": " + detail;
  std::cout << line << std::endl;
  transcript << line << '\n';
  failures += !ok;
}

double cpu_seconds(std::clock_t since) { return static_cast<double>(std::clock() - since) / CLOCKS_PER_SEC; }

std::string num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::vector<char> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

CtVolume random_volume(Dims dims, Spacing sp, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> hu(-1024, 3000);
  CtVolume v(dims, sp);
  for (Index i = 0; i < dims.count(); ++i) v.voxels()[i] = static_cast<std::int16_t>(hu(rng));
  return v;
}

void gradient_suite() {
  const auto t0 = std::clock();
  bool ok = true;
  std::string detail;
  for (const auto& check : test::gradcheck_suite()) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) worst = std::max(worst, check.run(1000 + seed));
    ok &= worst < 1e-4;
    detail += check.op + " " + num(worst, 2) + "; ";
  }
  const double secs = cpu_seconds(t0);
  ok &= secs < 120.0;
  report(ok, "gradient suite", detail + "20 instances per op, cpu " + num(secs) + " s");
}

void oracle_equivalence() {
  std::mt19937_64 rng(77);
  double conv_worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto xs = test::random_nchw(rng, 4, 1, 10);
    const auto x = test::random_tensor(xs, rng);
    const auto w = test::random_tensor({3, xs[1], 3, 3}, rng);
    const auto b = test::random_tensor({3}, rng);
    const auto want = test::conv2d_oracle(x, w, b);
    conv_worst = std::max(conv_worst, (nn::conv2d(x, w, b).data() - want.data()).norm() / want.data().norm());
  }
  int mip_mismatch = 0;
  for (int i = 0; i < 50; ++i) {
    const auto v = random_volume({8, 8, 8}, {1.0, 1.0, 1.0 + (i % 3)}, rng);
    const auto f = frontal_mip(v).pixels;
    const auto s = restricted_sagittal_mip(v, 4.0).pixels;
    const auto win = sagittal_window(8, v.spacing().x, 4.0);
    for (Index z = 0; z < 8; ++z)
      for (Index a = 0; a < 8; ++a) {
        double fm = -1e9, sm = -1e9;
        for (Index b = 0; b < 8; ++b) {
          fm = std::max<double>(fm, v(z, b, a));
          if (b >= win.first && b <= win.last) sm = std::max<double>(sm, v(z, a, b));
        }
        mip_mismatch += f(z, a) != fm;
        mip_mismatch += s(z, a) != sm;
      }
  }
  double stats_worst = 0.0;
  auto rel = [](double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); };
  std::normal_distribution<double> n(50, 20);
  std::bernoulli_distribution coin(0.4);
  for (int i = 0; i < 50; ++i) {
    const BinaryMask a = BinaryMask::NullaryExpr(12, 9, [&] { return coin(rng); });
    const BinaryMask b = BinaryMask::NullaryExpr(12, 9, [&] { return coin(rng); });
    stats_worst = std::max(stats_worst, rel(dice(a, b), test::oracle_dice(a, b)));
    const ImageXd img = ImageXd::NullaryExpr(12, 9, [&] { return n(rng); });
    std::vector<double> inside;
    for (Index r = 0; r < 12; ++r)
      for (Index c = 0; c < 9; ++c)
        if (a(r, c)) inside.push_back(img(r, c));
    if (!inside.empty()) stats_worst = std::max(stats_worst, rel(muscle_attenuation(a, img), test::oracle_mean(inside)));
    const Eigen::ArrayXd x = Eigen::ArrayXd::NullaryExpr(20, [&] { return n(rng); });
    const Eigen::ArrayXd y = Eigen::ArrayXd::NullaryExpr(20, [&] { return n(rng); });
    const auto ba = bland_altman(x, y), bo = test::oracle_bland_altman(x, y);
    stats_worst = std::max({stats_worst, rel(ba.mean_diff, bo.mean_diff), rel(ba.sd_diff, bo.sd_diff),
                            rel(ba.loa_low, bo.loa_low), rel(ba.loa_high, bo.loa_high)});
    const std::vector<double> v(x.data(), x.data() + x.size());
    const auto su = summarize(v);
    stats_worst = std::max({stats_worst, rel(su.mean, test::oracle_mean(v)), rel(su.sd, test::oracle_sd(v)),
                            rel(su.median, test::oracle_median(v)),
                            rel(su.max, *std::max_element(v.begin(), v.end()))});
  }
  report(conv_worst <= 1e-12 && mip_mismatch == 0 && stats_worst <= 1e-12, "oracle equivalence",
         "conv2d rel " + num(conv_worst, 2) + ", MIP mismatches " + std::to_string(mip_mismatch) +
             " over 50 volumes 8x8x8, statistics rel " + num(stats_worst, 2));
}

void exact_constants() {
  MipImage mip;
  mip.pixels.resize(1, 3);
  mip.pixels << 100, 1500, 800;
  const auto mapped = threshold_and_map_8bit(mip).pixels;
  ImageXd hu(1, 3);
  hu << -250, 250, 0;
  const auto pre = preprocess_slice(hu);
  const bool ok = mapped(0, 0) == -127.0 && mapped(0, 1) == 127.0 && mapped(0, 2) == 0.0 && pre(0, 0) == -1.0 &&
                  pre(0, 1) == 1.0 && pre(0, 2) == 0.0;
  report(ok, "exact pipeline constants",
         "threshold_and_map_8bit(100, 1500, 800) = " + num(mapped(0, 0)) + ", " + num(mapped(0, 1)) + ", " +
             num(mapped(0, 2)) + "; preprocess_slice(-250, 250) = " + num(pre(0, 0)) + ", " + num(pre(0, 1)));
}

void decode_inverse() {
  int wrong = 0;
  for (double sigma : {2.0, 4.0, 8.0})
    for (Index y = 0; y < 256; ++y) wrong += decode_peak(make_target_map(static_cast<double>(y), 256, sigma)).row != y;
  report(wrong == 0, "decode inverse", std::to_string(wrong) + " of 768 rows off (sigma 2, 4, 8)");
}

// Shared phantom experiment: 80 training and 40 held-out cases.
struct PhantomSample {
  DetectionInput detection;
  double l3_z_mm = 0.0;
  double thickness_mm = 0.0;
  double spacing_mm = 0.0;
  std::vector<double> candidates;
  ImageXd slice_hu;
  LabelImage mask;
  double spacing_yx_mm = 1.0;
  double analytic_area_cm2 = 0.0;
};

PhantomParams experiment_params() {
  PhantomParams p;
  p.n_vertebrae = 7;
  p.fov_mm = 96;
  p.matrix = 80;
  return p;
}

PhantomSample sample_of(const PhantomCase& c) {
  PhantomSample s;
  s.detection = make_detection_input(c.volume, View::kFrontal);
  s.l3_z_mm = c.l3_z_mm;
  s.thickness_mm = c.volume.spacing().z;
  s.spacing_mm = c.vertebra_spacing_mm;
  s.candidates = c.candidate_z_mm;
  s.slice_hu = c.volume.slice(c.l3_slice).cast<double>();
  s.mask = c.l3_mask;
  s.spacing_yx_mm = c.volume.spacing().y;
  for (int k = 1; k < kNumMuscleClasses; ++k) s.analytic_area_cm2 += c.analytic_area_mm2[k] / 100.0;
  return s;
}

std::vector<PhantomSample> make_samples(int n, std::uint64_t seed, const PhantomParams& p) {
  std::vector<PhantomSample> out;
  for (int i = 0; i < n; ++i) out.push_back(sample_of(gen_dataset_case(i, seed, p)));
  return out;
}

void phantom_detection(const std::vector<PhantomSample>& train, const std::vector<PhantomSample>& test,
                       const std::vector<PhantomSample>& transitional) {
  const auto t0 = std::clock();
  std::vector<DetectionExample> data;
  for (const auto& s : train) data.push_back({s.detection.pixels, s.detection.row_of_z_mm(s.l3_z_mm)});
  ModelSpec spec;  // levels 3, base 16
  TrainHyper hp;
  hp.shuffle_seed = 21;
  hp.on_epoch = [](int e, double loss) { std::cerr << "  detector epoch " << e + 1 << " loss " << loss << std::endl; };
  AugmentConfig aug;
  aug.seed = 22;
  const auto model = train_detector<float>(data, spec, 23, aug, hp).model;

  std::vector<SliceError> errors;
  int within_spacing = 0;
  for (const auto& s : test) {
    const auto r = decode_detection(predict_map(s.detection.pixels, model), s.detection);
    const auto e = slice_error(r.z_mm, s.l3_z_mm, s.thickness_mm);
    errors.push_back(e);
    within_spacing += e.mm < s.spacing_mm;
  }
  const double secs = cpu_seconds(t0);
  const auto sum = summarize_errors(errors);
  const double frac = within_spacing / static_cast<double>(test.size());
  report(sum.mm.median <= 2.0 && sum.slices.median <= 1.0 && frac >= 0.95 && secs <= 900.0, "phantom detection",
         "median " + num(sum.mm.median) + " mm / " + num(sum.slices.median) + " slices, mean " + num(sum.mm.mean) +
             " mm, max " + num(sum.mm.max) + " mm, within one spacing " + std::to_string(within_spacing) + "/" +
             std::to_string(test.size()) + ", cpu " + num(secs) + " s");

  int hit = 0;
  for (const auto& s : transitional) {
    const auto r = decode_detection(predict_map(s.detection.pixels, model), s.detection);
    bool any = false;
    for (const auto& c : r.candidates)
      for (double z : s.candidates) any |= std::abs(s.detection.z_mm_of_row(c.row) - z) <= 5.0;
    hit += any;
  }
  report(hit >= 0.9 * static_cast<double>(transitional.size()), "transitional behavior",
         std::to_string(hit) + "/" + std::to_string(transitional.size()) +
             " candidate sets within 5 mm of a true candidate");
}

void phantom_segmentation(const std::vector<PhantomSample>& train, const std::vector<PhantomSample>& test) {
  const auto t0 = std::clock();
  std::vector<SegmentationExample> data;
  for (const auto& s : train) data.push_back({s.slice_hu, s.mask});
  ModelSpec spec;
  spec.head = HeadKind::kSegmentation;
  TrainHyper hp;
  hp.epochs = 60;  // at 30 epochs boundary pixels still lean towards background
  hp.shuffle_seed = 31;
  hp.on_epoch = [](int e, double loss) { std::cerr << "  segmenter epoch " << e + 1 << " loss " << loss << std::endl; };
  AugmentConfig aug;
  aug.seed = 32;
  const auto model = train_segmenter<float>(data, spec, 33, aug, hp).model;

  double d_es = 0, d_ps = 0, d_ra = 0, d_all = 0;
  Eigen::ArrayXd predicted(static_cast<Index>(test.size())), analytic(static_cast<Index>(test.size()));
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& s = test[i];
    const auto pred = predict_masks(s.slice_hu, model);
    d_es += dice(class_mask(pred, kErectorSpinae), class_mask(s.mask, kErectorSpinae));
    d_ps += dice(class_mask(pred, kPsoas), class_mask(s.mask, kPsoas));
    d_ra += dice(class_mask(pred, kRectusAbdominis), class_mask(s.mask, kRectusAbdominis));
    d_all += dice(combined_mask(pred), combined_mask(s.mask));
    predicted[static_cast<Index>(i)] = muscle_area_cm2(combined_mask(pred), s.spacing_yx_mm, s.spacing_yx_mm);
    analytic[static_cast<Index>(i)] = s.analytic_area_cm2;
  }
  const double n = static_cast<double>(test.size());
  d_es /= n;
  d_ps /= n;
  d_ra /= n;
  d_all /= n;
  const double secs = cpu_seconds(t0);
  report(d_all >= 0.90 && std::min({d_es, d_ps, d_ra}) >= 0.85 && secs <= 900.0, "phantom segmentation",
         "Dice combined " + num(d_all) + ", erector spinae " + num(d_es) + ", psoas " + num(d_ps) +
             ", rectus abdominis " + num(d_ra) + ", cpu " + num(secs) + " s");

  const auto tt = paired_t_test(predicted, analytic);
  const auto ba = bland_altman(predicted, analytic);
  const double mean_area = 0.5 * (predicted.mean() + analytic.mean());
  const double rel = std::abs(ba.mean_diff) / mean_area;
  report(tt.p > 0.05 && rel <= 0.02, "measurement agreement",
         "paired t p = " + num(tt.p) + " (t = " + num(tt.t) + "), Bland-Altman mean diff " + num(ba.mean_diff) +
             " cm2 = " + num(100 * rel) + "% of mean area " + num(mean_area) + " cm2, limits [" + num(ba.loa_low) +
             ", " + num(ba.loa_high) + "]");
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.insert(e.path().filename().string());
  std::set<std::string> other;
  for (const auto& e : fs::directory_iterator(b)) other.insert(e.path().filename().string());
  if (names != other) return false;
  for (const auto& n : names)
    if (bytes_of(a / n) != bytes_of(b / n)) return false;
  return true;
}

void determinism_and_round_trips() {
  const fs::path root = fs::temp_directory_path() / "sarco_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::mt19937_64 rng(5);
  bool volumes = true;
  for (int i = 0; i < 10; ++i) {
    const auto v = random_volume({3 + i, 5, 4 + i}, {0.5 + i, 0.8, 0.7}, rng);
    save_volume(v, root / "v.mhd");
    const auto back = load_volume(root / "v.mhd");
    save_volume(back, root / "w.mhd");
    volumes &= back == v && bytes_of(root / "v.raw") == bytes_of(root / "w.raw");
  }

  Config cfg;
  cfg.merge_text(
      "seed = 9\ndata.n = 9\nphantom.n_vertebrae = 6\nphantom.fov_mm = 96\nphantom.matrix = 32\n"
      "phantom.thickness_min_mm = 5\nphantom.transitional_probability = 0\nmodel.levels = 2\n"
      "model.base_channels = 4\ntrain.epochs = 1\ntrain.batch_size = 4\n");
  std::ostringstream log;
  auto run = [&](const std::string& tag) {
    cfg.set("data.dir", (root / (tag + "_data")).string());
    cfg.set("out.dir", (root / (tag + "_out")).string());
    const auto e = to_experiment(cfg);
    cmd_phantom_gen(e, log);
    fs::create_directories(e.out_dir);
    cmd_train_detect(e, e.out_dir / "detect.weights", log);
    cmd_train_seg(e, e.out_dir / "segment.weights", log);
    cmd_evaluate(e, log);
    cmd_mip(e.data_dir / "ph0000.mhd", e.view, e.out_dir / "mip.pgm");
    std::ofstream det(e.out_dir / "detect.txt");
    write_detection_record(det, cmd_detect(e.data_dir / "ph0000.mhd", e.out_dir / "detect.weights", e.view, e.detect));
    std::ofstream seg(e.out_dir / "segment.txt");
    const Index slice = read_manifest(e.data_dir / "manifest.txt")[0].l3_slice;
    write_segment_record(seg, cmd_segment(e.data_dir / "ph0000.mhd", slice, e.out_dir / "segment.weights",
                                          e.out_dir / "seg", false));
  };
  run("a");
  run("b");
  const bool commands = same_tree(root / "a_data", root / "b_data") && same_tree(root / "a_out", root / "b_out");

  const auto model = load_weights<float>(root / "a_out" / "detect.weights");
  save_weights(model, root / "again.weights");
  const bool weights = bytes_of(root / "a_out" / "detect.weights") == bytes_of(root / "again.weights");
  fs::remove_all(root);
  report(volumes && commands && weights, "determinism and round-trips",
         std::string("volume round-trip ") + (volumes ? "exact" : "differs") + ", weight round-trip " +
             (weights ? "exact" : "differs") + ", repeated phantom-gen/train/evaluate/mip/detect/segment " +
             (commands ? "byte-identical" : "differ"));
}

void kfold_hygiene() {
  std::mt19937_64 rng(99);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(3, 150)(rng);
    const int k = std::uniform_int_distribution<int>(2, std::min(10, n))(rng);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("vol" + std::to_string(rng() % 1000000) + "_" + std::to_string(i));
    const auto folds = kfold_split(ids, k, rng());
    std::multiset<std::string> all;
    std::size_t lo = ids.size(), hi = 0;
    for (const auto& f : folds) {
      all.insert(f.begin(), f.end());
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    bool ok = static_cast<int>(folds.size()) == k && all == std::multiset<std::string>(ids.begin(), ids.end()) &&
              hi - lo <= 1;
    // Training set of fold f is the union of the other folds.
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const std::set<std::string> test(folds[f].begin(), folds[f].end());
      for (std::size_t g = 0; g < folds.size(); ++g)
        if (g != f)
          for (const auto& id : folds[g]) ok &= !test.count(id);
    }
    bad += !ok;
  }
  report(bad == 0, "cross-validation hygiene", std::to_string(bad) + " of 1000 random splits violate the partition");
}

}  // namespace

// An optional argument names a file that receives a copy of the report.
int main(int argc, char** argv) {
  gradient_suite();
  oracle_equivalence();
  exact_constants();
  decode_inverse();

  const auto params = experiment_params();
  auto cases = make_samples(120, 1001, [&] {
    auto p = params;
    p.transitional_probability = 0.0;
    return p;
  }());
  const std::vector<PhantomSample> train(cases.begin(), cases.begin() + 80);
  const std::vector<PhantomSample> test(cases.begin() + 80, cases.end());
  auto tparams = params;
  tparams.force_transitional = true;
  const auto transitional = make_samples(20, 2002, tparams);

  phantom_detection(train, test, transitional);
  phantom_segmentation(train, test);
  determinism_and_round_trips();
  kfold_hygiene();

  const std::string verdict = failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed";
  std::cout << verdict << std::endl;
  if (argc > 1) std::ofstream(argv[1]) << transcript.str() << verdict << '\n';
  return failures == 0 ? 0 : 1;
}
