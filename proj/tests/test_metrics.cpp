#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "metric_oracles.hpp"
#include "sarco/metrics.hpp"
#include "test_util.hpp"

namespace sarco {
namespace {

BinaryMask random_mask(Index r, Index c, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  return BinaryMask::NullaryExpr(r, c, [&] { return b(rng); });
}

TEST(SliceError, Examples) {
  EXPECT_EQ(slice_error(10, 10, 2).mm, 0.0);
  const auto e = slice_error(12.5, 7.5, 2.5);
  EXPECT_EQ(e.mm, 5.0);
  EXPECT_EQ(e.slices, 2.0);
  EXPECT_NEAR(slice_error(0, 9.0, 0.7875).slices, 11.43, 0.005);
  EXPECT_THROW(slice_error(0, 1, 0), Error);
}

TEST(Dice, ExamplesAndOracle) {
  BinaryMask a = BinaryMask::Zero(4, 4), b = BinaryMask::Zero(4, 4);
  EXPECT_EQ(dice(a, b), 1.0);
  a.row(0).setConstant(true);
  EXPECT_EQ(dice(a, a), 1.0);
  b.row(1).setConstant(true);
  EXPECT_EQ(dice(a, b), 0.0);
  b.setZero();
  b(0, 0) = b(0, 1) = b(1, 0) = b(1, 1) = true;
  EXPECT_EQ(dice(a, b), 0.5);
  EXPECT_THROW(dice(a, BinaryMask::Zero(3, 4)), Error);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto x = random_mask(9, 11, 0.3, rng), y = random_mask(9, 11, 0.5, rng);
    EXPECT_NEAR(dice(x, y), test::oracle_dice(x, y), 1e-12);
    EXPECT_EQ(dice(x, y), dice(y, x));
  }
}

TEST(Area, UnitsWindowAndAdditivity) {
  EXPECT_DOUBLE_EQ(muscle_area_cm2(BinaryMask::Constant(100, 100, true), 1, 1), 100.0);
  EXPECT_EQ(muscle_area_cm2(BinaryMask::Zero(5, 5), 1, 1), 0.0);
  BinaryMask m = BinaryMask::Constant(10, 10, true);
  ImageXd img = ImageXd::Constant(10, 10, 300);
  img.topRows(4).setConstant(40);
  EXPECT_DOUBLE_EQ(muscle_area_cm2(m, 1, 1, HuWindow{}, &img), 0.40);
  EXPECT_EQ(test::error_kind_of([&] { muscle_area_cm2(m, 1, 1, HuWindow{}); }), ErrorKind::kArgument);
  BinaryMask top = BinaryMask::Zero(10, 10), bottom = BinaryMask::Zero(10, 10);
  top.topRows(3).setConstant(true);
  bottom.bottomRows(5).setConstant(true);
  EXPECT_DOUBLE_EQ(muscle_area_cm2(top, 0.7, 0.8) + muscle_area_cm2(bottom, 0.7, 0.8),
                   muscle_area_cm2(BinaryMask(top || bottom), 0.7, 0.8));
}

TEST(Attenuation, Mean) {
  BinaryMask m = BinaryMask::Zero(3, 3);
  m(0, 0) = m(2, 2) = true;
  ImageXd img = ImageXd::Constant(3, 3, 50);
  EXPECT_EQ(muscle_attenuation(m, img), 50.0);
  img(0, 0) = 0;
  img(2, 2) = 100;
  EXPECT_EQ(muscle_attenuation(m, img), 50.0);
  EXPECT_EQ(test::error_kind_of([&] { muscle_attenuation(BinaryMask::Zero(3, 3), img); }),
            ErrorKind::kUndefinedMeasure);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> hu(40, 30);
  const auto r = random_mask(20, 20, 0.4, rng);
  const ImageXd x = ImageXd::NullaryExpr(20, 20, [&] { return hu(rng); });
  std::vector<double> vals;
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 20; ++j)
      if (r(i, j)) vals.push_back(x(i, j));
  EXPECT_NEAR(muscle_attenuation(r, x), test::oracle_mean(vals), 1e-12);
}

TEST(BlandAltmanStats, ExamplesAndOracle) {
  Eigen::ArrayXd a(4);
  a << 1, 2, 3, 4;
  const auto same = bland_altman(a, a);
  EXPECT_EQ(same.mean_diff, 0.0);
  EXPECT_EQ(same.sd_diff, 0.0);
  EXPECT_EQ(same.loa_low, 0.0);
  EXPECT_EQ(same.loa_high, 0.0);
  const auto off = bland_altman(a + 5, a);
  EXPECT_EQ(off.mean_diff, 5.0);
  EXPECT_EQ(off.sd_diff, 0.0);
  EXPECT_EQ(test::error_kind_of([] { bland_altman(Eigen::ArrayXd::Ones(1), Eigen::ArrayXd::Ones(1)); }),
            ErrorKind::kInsufficientData);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(100, 20);
  for (int i = 0; i < 20; ++i) {
    const Eigen::ArrayXd x = Eigen::ArrayXd::NullaryExpr(15, [&] { return n(rng); });
    const Eigen::ArrayXd y = Eigen::ArrayXd::NullaryExpr(15, [&] { return n(rng); });
    const auto got = bland_altman(x, y), want = test::oracle_bland_altman(x, y);
    EXPECT_NEAR(got.mean_diff, want.mean_diff, 1e-12 * std::max(1.0, std::abs(want.mean_diff)));
    EXPECT_NEAR(got.sd_diff, want.sd_diff, 1e-12 * want.sd_diff);
    EXPECT_NEAR(got.loa_low, want.loa_low, 1e-12 * std::abs(want.loa_low));
    const auto swapped = bland_altman(y, x);
    EXPECT_NEAR(swapped.mean_diff, -got.mean_diff, 1e-12);
    EXPECT_NEAR(swapped.loa_low, -got.loa_high, 1e-12);
  }
}

TEST(TTestStats, ZeroMeanCases) {
  Eigen::ArrayXd a(4);
  a << 3, 1, 4, 1;
  const auto same = paired_t_test(a, a);
  EXPECT_EQ(same.t, 0.0);
  EXPECT_EQ(same.p, 1.0);
  Eigen::ArrayXd d(4);
  d << 1, -1, 1, -1;
  const auto alt = paired_t_test(a + d, a);
  EXPECT_EQ(alt.t, 0.0);
  EXPECT_NEAR(alt.p, 1.0, 1e-12);
  const auto shift = paired_t_test(a + 2, a);
  EXPECT_EQ(shift.p, 0.0);
  EXPECT_TRUE(std::isinf(shift.t));
}

TEST(TTestStats, MatchesQuadratureOracle) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 25; ++i) {
    const Eigen::ArrayXd a = Eigen::ArrayXd::NullaryExpr(10, [&] { return n(rng); });
    const Eigen::ArrayXd b = a + 0.4 + 0.6 * Eigen::ArrayXd::NullaryExpr(10, [&] { return n(rng); });
    const auto r = paired_t_test(a, b);
    EXPECT_EQ(r.dof, 9);
    EXPECT_NEAR(r.p, test::quadrature_t_p(r.t, 9), 1e-8) << r.t;
  }
  for (double dof : {1.0, 3.0, 30.0, 200.0})
    for (double t : {0.1, 1.0, 2.5, 6.0}) EXPECT_NEAR(student_t_two_sided_p(t, dof), test::quadrature_t_p(t, dof), 1e-8);
  EXPECT_NEAR(incomplete_beta(2, 3, 0.4), 0.5248, 1e-12);
}

TEST(KFold, SizesPartitionAndSeeds) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("v" + std::to_string(i));
  const auto ten = kfold_split(ids, 3, 1);
  std::vector<std::size_t> sizes;
  for (const auto& f : ten) sizes.push_back(f.size());
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 4}));
  for (const auto& f : kfold_split({ids.begin(), ids.begin() + 9}, 3, 1)) EXPECT_EQ(f.size(), 3u);
  EXPECT_EQ(kfold_split(ids, 3, 7), kfold_split(ids, 3, 7));
  EXPECT_NE(kfold_split(ids, 3, 7), kfold_split(ids, 3, 8));
  std::multiset<std::string> all;
  for (const auto& f : ten) all.insert(f.begin(), f.end());
  EXPECT_EQ(all, std::multiset<std::string>(ids.begin(), ids.end()));
  EXPECT_THROW(kfold_split({"a", "b"}, 3, 0), Error);
  EXPECT_THROW(kfold_split({"a", "a", "b"}, 2, 0), Error);
}

TEST(Summaries, ExamplesAndOracle) {
  const auto s = summarize({1, 2, 3});
  EXPECT_EQ(s.mean, 2.0);
  EXPECT_EQ(s.median, 2.0);
  EXPECT_EQ(s.max, 3.0);
  EXPECT_EQ(s.count_gt_10, 0);
  EXPECT_EQ(summarize({0, 0, 12}).count_gt_10, 1);
  const auto one = summarize({4.5});
  EXPECT_EQ(one.sd, 0.0);
  EXPECT_EQ(one.mean, 4.5);
  EXPECT_EQ(one.median, 4.5);
  EXPECT_EQ(one.max, 4.5);
  EXPECT_THROW(summarize({}), Error);
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> e(0.2);
  for (int n = 2; n < 30; ++n) {
    std::vector<double> v(n);
    for (auto& x : v) x = e(rng);
    const auto got = summarize(v);
    EXPECT_NEAR(got.mean, test::oracle_mean(v), 1e-12 * got.mean);
    EXPECT_NEAR(got.sd, test::oracle_sd(v), 1e-12 * got.sd);
    EXPECT_EQ(got.median, test::oracle_median(v));
    EXPECT_EQ(got.max, *std::max_element(v.begin(), v.end()));
    EXPECT_EQ(got.count_gt_10, std::count_if(v.begin(), v.end(), [](double x) { return x > 10; }));
  }
  const auto both = summarize_errors({{5, 2}, {1, 0.4}});
  EXPECT_EQ(both.mm.median, 3.0);
  EXPECT_EQ(both.slices.max, 2.0);
}

}  // namespace
}  // namespace sarco
