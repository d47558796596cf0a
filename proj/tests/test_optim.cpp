#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "sarco/optim.hpp"
#include "test_util.hpp"

namespace sarco {
namespace {

using T = Tensor<double>;

TEST(Adam, FirstStepMovesByLearningRate) {
  T p({1});
  p.grad()[0] = 1.0;
  nn::AdamState<double> state;
  nn::adam_step<double>({{"p", &p}}, state, {.lr = 0.1});
  EXPECT_NEAR(p[0], -0.1, 1e-9);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, MatchesClosedFormOverSteps) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  T p({3});
  nn::AdamState<double> state;
  const nn::AdamConfig cfg{.lr = 0.01};
  Eigen::Vector3d theta = Eigen::Vector3d::Zero(), m = theta, v = theta;
  for (int t = 1; t <= 25; ++t) {
    const Eigen::Vector3d g(n(rng), n(rng), n(rng));
    p.grad() = g;
    nn::adam_step<double>({{"p", &p}}, state, cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g.cwiseAbs2();
    const Eigen::Vector3d mh = m / (1 - std::pow(0.9, t));
    const Eigen::Vector3d vh = v / (1 - std::pow(0.999, t));
    theta.array() -= 0.01 * mh.array() / (vh.array().sqrt() + 1e-8);
    EXPECT_LE((p.data() - theta).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  T p = T::constant({4}, 2.5);
  p.grad();
  nn::AdamState<double> state;
  nn::adam_step<double>({{"p", &p}}, state, {});
  EXPECT_TRUE((p.data().array() == 2.5).all());
}

TEST(Adam, NonFiniteGradientAbortsAndNamesLayer) {
  T a = T::constant({2}, 1.0), b = T::constant({2}, 1.0);
  a.grad()[0] = 0.5;
  b.grad()[1] = std::numeric_limits<double>::quiet_NaN();
  nn::AdamState<double> state;
  const auto msg = test::error_message_of([&] { nn::adam_step<double>({{"enc0.0.weight", &a}, {"head.bias", &b}}, state, {}); });
  EXPECT_NE(msg.find("head.bias"), std::string::npos);
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(state.step, 0);
}

TEST(Adam, Deterministic) {
  auto run = [] {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n;
    T p({5});
    nn::AdamState<double> state;
    for (int t = 0; t < 10; ++t) {
      for (Index i = 0; i < 5; ++i) p.grad()[i] = n(rng);
      nn::adam_step<double>({{"p", &p}}, state, {});
    }
    return p.data();
  };
  EXPECT_TRUE(run() == run());
}

}  // namespace
}  // namespace sarco
