#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "sarco/detection.hpp"
#include "sarco/error.hpp"

namespace sarco {

Eigen::ArrayXd make_target_map(double y_row, Index height, double sigma) {
  if (height < 1) throw Error(ErrorKind::kPrecondition, "target map height must be >= 1");
  if (!(sigma > 0.0)) throw Error(ErrorKind::kPrecondition, "target sigma must be positive");
  if (!(y_row >= 0.0 && y_row < static_cast<double>(height))) {
    throw Error(ErrorKind::kDomain, "target row " + std::to_string(y_row) + " outside [0, " +
                                        std::to_string(height) + ")");
  }
  const Eigen::ArrayXd r = Eigen::ArrayXd::LinSpaced(height, 0.0, static_cast<double>(height - 1));
  return (-(r - y_row).square() / (2.0 * sigma * sigma)).exp();
}

Peak decode_peak(const Eigen::ArrayXd& map, bool refine) {
  if (map.size() == 0) throw Error(ErrorKind::kPrecondition, "cannot decode an empty map");
  Peak p;
  map.maxCoeff(&p.index);  // first index on ties
  p.confidence = map[p.index];
  p.row = static_cast<double>(p.index);
  p.low_confidence = p.confidence < kLowConfidence;
  p.ambiguous = (map == p.confidence).count() > 1;
  if (refine && p.index > 0 && p.index + 1 < map.size()) {
    const double l = map[p.index - 1];
    const double c = map[p.index];
    const double r = map[p.index + 1];
    const double denom = l - 2.0 * c + r;
    if (denom < 0.0) p.row += std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
  }
  return p;
}

std::vector<Candidate> find_candidates(const Eigen::ArrayXd& map, double rel_threshold,
                                       double min_separation_mm, double row_spacing_mm) {
  if (!(rel_threshold > 0.0 && rel_threshold < 1.0)) {
    throw Error(ErrorKind::kPrecondition, "candidate threshold must lie in (0, 1)");
  }
  if (map.size() == 0) return {};
  const double threshold = rel_threshold * map.maxCoeff();
  std::vector<Candidate> maxima;
  const Index n = map.size();
  for (Index i = 0; i < n; ++i) {
    const bool above_left = i == 0 || map[i] > map[i - 1];
    const bool not_below_right = i + 1 == n || map[i] >= map[i + 1];
    if (above_left && not_below_right && map[i] >= threshold && map[i] > 0.0) {
      maxima.push_back({static_cast<double>(i), map[i]});
    }
  }
  std::stable_sort(maxima.begin(), maxima.end(),
                   [](const Candidate& a, const Candidate& b) { return a.confidence > b.confidence; });
  std::vector<Candidate> kept;
  for (const auto& m : maxima) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Candidate& k) {
      return std::abs(k.row - m.row) * row_spacing_mm < min_separation_mm;
    });
    if (!suppressed) kept.push_back(m);
  }
  return kept;
}

Index round_up(Index value, Index multiple) { return (value + multiple - 1) / multiple * multiple; }

Padding padding_to(Index rows, Index cols, Index target_rows, Index target_cols) {
  if (target_rows < rows || target_cols < cols) throw Error(ErrorKind::kPrecondition, "padding target too small");
  Padding p;
  p.top = (target_rows - rows) / 2;
  p.bottom = target_rows - rows - p.top;
  p.left = (target_cols - cols) / 2;
  p.right = target_cols - cols - p.left;
  return p;
}

Image8 pad_constant(const Image8& img, const Padding& pad, std::int8_t value) {
  Image8 out = Image8::Constant(img.rows() + pad.top + pad.bottom, img.cols() + pad.left + pad.right, value);
  out.block(pad.top, pad.left, img.rows(), img.cols()) = img;
  return out;
}

namespace {

template <typename Scalar>
void put_image(Tensor<Scalar>& x, Index n, const ImageXd& img, const Padding& pad) {
  for (Index r = 0; r < img.rows(); ++r) {
    for (Index c = 0; c < img.cols(); ++c) x.at(n, 0, r + pad.top, c + pad.left) = Scalar(img(r, c) / 127.0);
  }
}

}  // namespace

template <typename Scalar>
TrainResult<Scalar> train_detector(const std::vector<DetectionExample>& data, const ModelSpec& spec,
                                   std::uint64_t init_seed, const AugmentConfig& aug, const TrainHyper& hp,
                                   double sigma) {
  if (data.empty()) throw Error(ErrorKind::kInsufficientData, "detection training set is empty");
  if (spec.head != HeadKind::kHeatmap1d) throw Error(ErrorKind::kPrecondition, "detector needs a heatmap1d head");
  hp.validate();
  aug.validate();
  TrainResult<Scalar> result{build_unet<Scalar>(spec, init_seed), {}};
  auto& model = result.model;
  nn::AdamState<Scalar> adam;
  const nn::AdamConfig adam_cfg{hp.lr};
  const Index m = spec.size_multiple();
  const auto batch = static_cast<std::size_t>(hp.batch_size);

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), hp.shuffle_seed, epoch);
    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      std::vector<DetectionSample> samples;
      Index rows = 0;
      Index cols = 0;
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t idx = order[start + i];
        DetectionSample s{data[idx].image.cast<double>(), data[idx].row};
        if (hp.augment) s = augment_detection(s, aug, static_cast<std::uint64_t>(epoch), idx);
        rows = std::max(rows, s.image.rows());
        cols = std::max(cols, s.image.cols());
        samples.push_back(std::move(s));
      }
      rows = round_up(rows, m);
      cols = round_up(cols, m);
      auto x = Tensor<Scalar>::constant({static_cast<Index>(count), 1, rows, cols}, Scalar(-1));
      Tensor<Scalar> target({static_cast<Index>(count), 1, rows});
      for (std::size_t i = 0; i < count; ++i) {
        const auto pad = padding_to(samples[i].image.rows(), samples[i].image.cols(), rows, cols);
        put_image(x, static_cast<Index>(i), samples[i].image, pad);
        target.sample(static_cast<Index>(i)).row(0) =
            make_target_map(samples[i].row + static_cast<double>(pad.top), rows, sigma).cast<Scalar>().matrix().transpose();
      }
      ForwardTrace<Scalar> trace;
      const auto y = model.forward(x, nn::BnMode::kTrain, &trace);
      const auto loss = nn::mse_loss(y, target);
      if (!std::isfinite(static_cast<double>(loss.value))) {
        throw Error(ErrorKind::kNumeric, "non-finite detection loss at epoch " + std::to_string(epoch) +
                                             " batch " + std::to_string(start / batch));
      }
      model.zero_grad();
      model.backward(trace, loss.grad);
      nn::adam_step(model.parameters(), adam, adam_cfg);
      result.loss.push_back(static_cast<double>(loss.value));
      epoch_loss += static_cast<double>(loss.value);
      ++steps;
    }
    if (hp.on_epoch) hp.on_epoch(epoch, epoch_loss / steps);
  }
  return result;
}

template <typename Scalar>
Eigen::ArrayXd predict_map(const Image8& image, const Model<Scalar>& model) {
  if (model.spec().head != HeadKind::kHeatmap1d) throw Error(ErrorKind::kPrecondition, "detector needs a heatmap1d head");
  const Index m = model.spec().size_multiple();
  const auto pad = padding_to(image.rows(), image.cols(), round_up(image.rows(), m), round_up(image.cols(), m));
  auto x = Tensor<Scalar>::constant({1, 1, image.rows() + pad.top + pad.bottom, image.cols() + pad.left + pad.right},
                                    Scalar(-1));
  put_image(x, 0, image.cast<double>(), pad);
  const auto y = model.predict(x);
  return y.data().segment(pad.top, image.rows()).array().template cast<double>();
}

DetectionResult decode_detection(const Eigen::ArrayXd& map, const DetectionInput& input, const DetectOptions& options) {
  DetectionResult r;
  r.view = input.view;
  const auto peak = decode_peak(map, options.refine);
  r.row = peak.row;
  r.confidence = peak.confidence;
  r.low_confidence = peak.low_confidence;
  r.ambiguous = peak.ambiguous;
  r.z_mm = input.z_mm_of_row(peak.row);
  r.slice_index = z_mm_to_slice_index(r.z_mm, input.source_slice_thickness_mm, input.source_depth);
  r.candidates = find_candidates(map, options.rel_threshold, options.min_separation_mm, input.row_pitch_mm);
  return r;
}

template <typename Scalar>
DetectionResult predict_l3(const CtVolume& vol, const Model<Scalar>& model, View view, const DetectOptions& options) {
  const auto input = make_detection_input(vol, view);
  return decode_detection(predict_map(input.pixels, model), input, options);
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::kFormat, "detection record: bad value for '" + key + "'");
  }
  return v;
}

}  // namespace

void write_detection_record(std::ostream& out, const DetectionResult& r) {
  out << "view = " << to_string(r.view) << '\n'
      << "row = " << fmt(r.row) << '\n'
      << "z_mm = " << fmt(r.z_mm) << '\n'
      << "slice_index = " << r.slice_index << '\n'
      << "confidence = " << fmt(r.confidence) << '\n'
      << "low_confidence = " << (r.low_confidence ? "true" : "false") << '\n'
      << "ambiguous = " << (r.ambiguous ? "true" : "false") << '\n'
      << "candidates = ";
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    out << (i ? "," : "") << fmt(r.candidates[i].row) << ':' << fmt(r.candidates[i].confidence);
  }
  out << '\n';
}

DetectionResult parse_detection_record(std::istream& in) {
  DetectionResult r;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw Error(ErrorKind::kFormat, "detection record: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 3);
    if (key == "view") {
      r.view = parse_view(value);
    } else if (key == "row") {
      r.row = parse_double(value, key);
    } else if (key == "z_mm") {
      r.z_mm = parse_double(value, key);
    } else if (key == "slice_index") {
      r.slice_index = static_cast<Index>(parse_double(value, key));
    } else if (key == "confidence") {
      r.confidence = parse_double(value, key);
    } else if (key == "low_confidence") {
      r.low_confidence = value == "true";
    } else if (key == "ambiguous") {
      r.ambiguous = value == "true";
    } else if (key == "candidates") {
      std::istringstream items(value);
      std::string item;
      while (std::getline(items, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw Error(ErrorKind::kFormat, "detection record: bad candidate '" + item + "'");
        r.candidates.push_back({parse_double(item.substr(0, colon), key), parse_double(item.substr(colon + 1), key)});
      }
    } else {
      throw Error(ErrorKind::kFormat, "detection record: unknown key '" + key + "'");
    }
  }
  return r;
}

template TrainResult<float> train_detector(const std::vector<DetectionExample>&, const ModelSpec&, std::uint64_t,
                                           const AugmentConfig&, const TrainHyper&, double);
template TrainResult<double> train_detector(const std::vector<DetectionExample>&, const ModelSpec&, std::uint64_t,
                                            const AugmentConfig&, const TrainHyper&, double);
template Eigen::ArrayXd predict_map(const Image8&, const Model<float>&);
template Eigen::ArrayXd predict_map(const Image8&, const Model<double>&);
template DetectionResult predict_l3(const CtVolume&, const Model<float>&, View, const DetectOptions&);
template DetectionResult predict_l3(const CtVolume&, const Model<double>&, View, const DetectOptions&);

}  // namespace sarco
