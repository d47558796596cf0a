#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "sarco/augment.hpp"
#include "test_util.hpp"

namespace sarco {
namespace {

ImageXd random_image(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(-127, 127);
  return ImageXd::NullaryExpr(rows, cols, [&] { return double(u(rng)); });
}

// Blocky labels so warps have structure to move.
LabelImage block_mask(Index rows, Index cols) {
  LabelImage m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = static_cast<std::uint8_t>(((r / 5) + (c / 7)) % 3);
  m(rows / 2, cols / 2) = 3;
  return m;
}

std::set<int> labels_of(const LabelImage& m) {
  std::set<int> s;
  for (Index i = 0; i < m.size(); ++i) s.insert(m.data()[i]);
  return s;
}

TEST(Hflip, InvolutionAndPixelPosition) {
  const auto img = random_image(6, 9, 1);
  EXPECT_TRUE((hflip(hflip(img)) == img).all());
  ImageXd one = ImageXd::Zero(3, 9);
  one(1, 2) = 100;
  EXPECT_EQ(hflip(one)(1, 6), 100);
}

TEST(Scale, IdentityAndFixedCentre) {
  const auto img = random_image(12, 10, 2);
  EXPECT_TRUE((scale(img, 1.0, -127) == img).all());
  EXPECT_EQ(scale_row(7.3, 12, 1.0), 7.3);

  ImageXd dot = ImageXd::Constant(9, 9, -127);
  dot(4, 4) = 127;
  const auto z = scale(dot, 2.0, -127);
  Index r, c;
  z.maxCoeff(&r, &c);
  EXPECT_EQ(r, 4);
  EXPECT_EQ(c, 4);
  EXPECT_EQ(z(4, 4), 127);
  EXPECT_DOUBLE_EQ(scale_row(8.0, 9, 2.0), 12.0);
  EXPECT_DOUBLE_EQ(scale_row(4.0, 9, 1.1), 4.0);
}

TEST(Scale, MaskStaysLabelValued) {
  const auto m = block_mask(30, 40);
  for (double f : {0.9, 0.95, 1.03, 1.1}) {
    const auto out = scale_mask(m, f);
    const auto got = labels_of(out);
    auto allowed = labels_of(m);
    allowed.insert(0);
    EXPECT_TRUE(std::includes(allowed.begin(), allowed.end(), got.begin(), got.end())) << f;
  }
  EXPECT_TRUE((scale_mask(m, 1.0) == m).all());
}

TEST(Intensity, OffsetAndRegions) {
  const auto img = random_image(8, 8, 4);
  EXPECT_TRUE((intensity_offset(img, 0.0) == img).all());
  const auto shifted = intensity_offset(img, 50.0);
  EXPECT_LE(shifted.maxCoeff(), 127);
  EXPECT_GE(intensity_offset(img, -300.0).minCoeff(), -127);

  const auto d = region_dropout(img, {3, 4, 1, 1});
  EXPECT_EQ(d(3, 4), -127);
  EXPECT_EQ((d != img).count(), img(3, 4) == -127 ? 0 : 1);
  EXPECT_EQ(overexposure(img, {0, 0, 1, 1})(0, 0), 127);
}

TEST(Intensity, DisjointRegionsCommute) {
  std::mt19937_64 rng(5);
  int tested = 0;
  while (tested < 200) {
    const auto img = random_image(20, 16, rng());
    const Rect a = sample_rect(rng, 20, 16, 0.25);
    const Rect b = sample_rect(rng, 20, 16, 0.25);
    EXPECT_LE(a.rows * a.cols, 80);
    EXPECT_GE(a.rows * a.cols, 1);
    EXPECT_LE(a.row + a.rows, 20);
    EXPECT_LE(a.col + a.cols, 16);
    if (a.overlaps(b)) continue;
    ++tested;
    EXPECT_TRUE((region_dropout(overexposure(img, a), b) == overexposure(region_dropout(img, b), a)).all());
  }
}

TEST(PiecewiseAffine, ZeroJitterIsIdentity) {
  std::mt19937_64 rng(6);
  const PiecewiseAffine warp(40, 30, 4, 0.0, rng);
  const auto img = random_image(40, 30, 7);
  EXPECT_TRUE((warp.apply(img, -127) == img).all());
  const auto m = block_mask(40, 30);
  EXPECT_TRUE((warp.apply_mask(m) == m).all());
  EXPECT_NEAR(warp.map_row(17.25), 17.25, 1e-9);
}

TEST(PiecewiseAffine, DeterministicAndLabelPreserving) {
  const auto img = random_image(48, 36, 9);
  const auto m = block_mask(48, 36);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 r1(seed), r2(seed);
    const PiecewiseAffine a(48, 36, 4, 3.0, r1), b(48, 36, 4, 3.0, r2);
    EXPECT_TRUE((a.apply(img, -127) == b.apply(img, -127)).all());
    const auto warped = a.apply_mask(m);
    const auto got = labels_of(warped);
    const auto have = labels_of(m);
    EXPECT_TRUE(std::includes(have.begin(), have.end(), got.begin(), got.end()));
    // Rows mapped through the warp land where the warp samples them.
    for (double row : {5.0, 20.5, 40.0}) {
      const double out = a.map_row(row);
      EXPECT_NEAR(a.source_of(out, (36 - 1) / 2.0)(0), row, 1e-6);
    }
  }
}

TEST(VerticalSubsample, IdentityAndLinearFixedPoint) {
  const auto img = random_image(23, 5, 11);
  EXPECT_TRUE((vertical_subsample(img, 1) == img).all());
  ImageXd ramp(4, 1);
  ramp << 0, 10, 20, 30;
  EXPECT_TRUE(((vertical_subsample(ramp, 2) - ramp).abs() < 1e-12).all());
  ImageXd lin(31, 3);
  for (Index r = 0; r < 31; ++r) lin.row(r).setConstant(3.0 * r - 40);
  for (int f = 1; f <= 7; ++f)
    for (int phase = 0; phase < f; ++phase)
      EXPECT_LT((vertical_subsample(lin, f, phase) - lin).abs().maxCoeff(), 1e-9) << f << " " << phase;
}

TEST(VerticalSubsample, BrightRowSpreadsWithinFactor) {
  ImageXd img = ImageXd::Constant(50, 4, -127);
  img.row(21).setConstant(127);
  const auto out = vertical_subsample(img, 7, 0);
  // Closed form: rows 14..28 are a tent peaked at 21.
  Index count = 0;
  for (Index r = 0; r < 50; ++r) {
    const double d = std::abs(static_cast<double>(r - 21));
    const double want = d < 7 ? 127 - 254 * d / 7 : -127;
    EXPECT_NEAR(out(r, 0), want, 1e-9) << r;
    count += out(r, 0) > -127;
  }
  EXPECT_LE(count, 14);
  Index peak, col;
  out.maxCoeff(&peak, &col);
  EXPECT_LE(std::abs(peak - 21), 1);
}

TEST(Chains, DeterministicInRangeAndIdentityWhenDisabled) {
  DetectionSample d{random_image(64, 32, 12), 30.0};
  AugmentConfig cfg;
  cfg.seed = 4;
  cfg.p_hflip = cfg.p_scale = cfg.p_offset = cfg.p_overexposure = cfg.p_dropout = cfg.p_affine =
      cfg.p_subsample = 1.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto a = augment_detection(d, cfg, 3, i);
    const auto b = augment_detection(d, cfg, 3, i);
    EXPECT_TRUE((a.image == b.image).all());
    EXPECT_EQ(a.row, b.row);
    EXPECT_LE(a.image.maxCoeff(), 127);
    EXPECT_GE(a.image.minCoeff(), -127);
    EXPECT_TRUE((a.image == a.image.round()).all());
  }
  EXPECT_FALSE((augment_detection(d, cfg, 0, 0).image == augment_detection(d, cfg, 0, 1).image).all());

  AugmentConfig off;
  off.p_hflip = off.p_scale = off.p_offset = off.p_overexposure = off.p_dropout = off.p_affine =
      off.p_subsample = 0.0;
  const auto same = augment_detection(d, off, 0, 0);
  EXPECT_TRUE((same.image == d.image).all());
  EXPECT_EQ(same.row, d.row);

  SegmentationSample s{random_image(40, 40, 13) * 8.0, block_mask(40, 40)};
  const auto seg = augment_segmentation(s, cfg, 1, 2);
  const auto got = labels_of(seg.mask);
  auto allowed = labels_of(s.mask);
  allowed.insert(0);
  EXPECT_TRUE(std::includes(allowed.begin(), allowed.end(), got.begin(), got.end()));
  const auto seg_off = augment_segmentation(s, off, 1, 2);
  EXPECT_TRUE((seg_off.image == s.image).all());
  EXPECT_TRUE((seg_off.mask == s.mask).all());
}

TEST(Config, Validation) {
  AugmentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.p_hflip = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.subsample_max = 8;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace sarco
