#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "sarco/model.hpp"
#include "test_util.hpp"

namespace sarco {
namespace {

using T = Tensor<double>;

ModelSpec small_spec(HeadKind head) {
  ModelSpec s;
  s.levels = 2;
  s.base_channels = 8;
  s.head = head;
  return s;
}

TEST(Unet, HeatmapShapeContract) {
  const auto m = build_unet<double>(small_spec(HeadKind::kHeatmap1d), 1);
  std::mt19937_64 rng(1);
  const T out = m.predict(test::random_tensor({1, 1, 64, 32}, rng));
  EXPECT_EQ(out.shape(), (Shape{1, 1, 64}));
  EXPECT_GT(out.data().minCoeff(), 0.0);
  EXPECT_LT(out.data().maxCoeff(), 1.0);
}

TEST(Unet, SegmentationShapeContract) {
  const auto m = build_unet<double>(small_spec(HeadKind::kSegmentation), 1);
  std::mt19937_64 rng(2);
  EXPECT_EQ(m.predict(test::random_tensor({1, 1, 64, 64}, rng)).shape(), (Shape{1, 4, 64, 64}));
}

TEST(Unet, PaddingContract) {
  const auto m = build_unet<double>(small_spec(HeadKind::kSegmentation), 1);
  EXPECT_EQ(test::error_kind_of([&] { m.predict(T({1, 1, 30, 32})); }), ErrorKind::kPrecondition);
  EXPECT_EQ(test::error_kind_of([&] { m.predict(T({1, 2, 32, 32})); }), ErrorKind::kDimension);
}

TEST(Unet, SameSeedSameWeights) {
  const auto a = build_unet<double>(small_spec(HeadKind::kHeatmap1d), 7);
  const auto b = build_unet<double>(small_spec(HeadKind::kHeatmap1d), 7);
  const auto c = build_unet<double>(small_spec(HeadKind::kHeatmap1d), 8);
  ASSERT_EQ(a.layers().size(), b.layers().size());
  bool differs = false;
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    EXPECT_TRUE(a.layers()[i].weight.data() == b.layers()[i].weight.data());
    differs |= a.layers()[i].weight.data() != c.layers()[i].weight.data();
  }
  EXPECT_TRUE(differs);
}

TEST(Unet, LayerNamesFollowStructure) {
  const auto m = build_unet<double>(small_spec(HeadKind::kSegmentation), 1);
  std::vector<std::string> names;
  for (const auto& l : m.layers()) names.push_back(l.name);
  const std::vector<std::string> want{"enc0.0", "enc0.1", "enc1.0", "enc1.1", "mid.0", "mid.1",
                                      "up1",    "dec1.0", "dec1.1", "up0",    "dec0.0", "dec0.1",
                                      "head"};
  EXPECT_EQ(names, want);
  EXPECT_FALSE(m.layers().back().has_batchnorm);
  EXPECT_EQ(m.layers().back().weight.shape(), (Shape{4, 8, 1, 1}));
  EXPECT_EQ(m.layers()[4].weight.shape(), (Shape{32, 16, 3, 3}));
  EXPECT_EQ(m.layers()[7].weight.shape(), (Shape{16, 32, 3, 3}));
}

TEST(Unet, HeatmapHeadStartsAtPrior) {
  const auto m = build_unet<double>(small_spec(HeadKind::kHeatmap1d), 1);
  EXPECT_EQ(m.layers().back().bias[0], kHeatmapPriorLogit);
}

// Parameter gradients through the whole network against finite differences.
// Biases that feed a batch norm have zero true gradient and are skipped.
TEST(Unet, BackwardMatchesFiniteDifferences) {
  for (HeadKind head : {HeadKind::kHeatmap1d, HeadKind::kSegmentation}) {
    ModelSpec spec = small_spec(head);
    spec.base_channels = 2;
    spec.num_classes = 3;
    auto m = build_unet<double>(spec, 3);
    std::mt19937_64 rng(4);
    const T x = test::random_tensor({2, 1, 8, 8}, rng);
    const T probe = m.predict(x);
    const T r = test::random_tensor(probe.shape(), rng);
    ForwardTrace<double> trace;
    EXPECT_EQ(test::error_kind_of([&] { m.backward(trace, r); }), ErrorKind::kArgument);
    m.zero_grad();
    m.forward(x, nn::BnMode::kTrain, &trace);
    m.backward(trace, r);
    auto f = [&] { return test::dot(m.forward(x, nn::BnMode::kTrain), r); };
    for (auto& p : m.parameters()) {
      const bool bn_fed_bias = p.name.ends_with(".bias") && !p.name.starts_with("head");
      if (bn_fed_bias) continue;
      const auto analytic = p.tensor->grad();
      const auto numeric = test::numeric_grad(p.tensor->data(), f);
      EXPECT_LT(test::relative_error(analytic, numeric), 1e-5) << p.name;
    }
  }
}

TEST(Unet, ForwardBackwardBitReproducible) {
  auto run = [] {
    auto m = build_unet<double>(small_spec(HeadKind::kHeatmap1d), 11);
    std::mt19937_64 rng(12);
    const T x = test::random_tensor({1, 1, 16, 16}, rng);
    ForwardTrace<double> trace;
    const T y = m.forward(x, nn::BnMode::kTrain, &trace);
    m.backward(trace, T::constant(y.shape(), 1.0));
    std::vector<double> all(y.data().begin(), y.data().end());
    for (auto& p : m.parameters()) all.insert(all.end(), p.tensor->grad().begin(), p.tensor->grad().end());
    return all;
  };
  EXPECT_EQ(run(), run());
}

TEST(Weights, RoundTripIsBitExact) {
  test::TempDir dir;
  auto m = build_unet<float>(small_spec(HeadKind::kSegmentation), 5);
  m.layers()[1].bn.running_mean.setRandom();
  save_weights(m, dir / "w.bin");
  EXPECT_TRUE(std::filesystem::exists(dir / "w.bin.manifest"));
  const auto back = load_weights<float>(dir / "w.bin");
  EXPECT_EQ(back.spec(), m.spec());
  EXPECT_EQ(back.seed(), m.seed());
  for (std::size_t i = 0; i < m.layers().size(); ++i) {
    const auto& a = m.layers()[i];
    const auto& b = back.layers()[i];
    EXPECT_EQ(a.name, b.name);
    EXPECT_TRUE(a.weight.data() == b.weight.data());
    EXPECT_TRUE(a.bias.data() == b.bias.data());
    if (a.has_batchnorm) {
      EXPECT_TRUE(a.bn.gamma.data() == b.bn.gamma.data());
      EXPECT_TRUE(a.bn.running_mean == b.bn.running_mean);
      EXPECT_TRUE(a.bn.running_var == b.bn.running_var);
    }
  }
  save_weights(back, dir / "w2.bin");
  EXPECT_EQ(test::read_bytes(dir / "w.bin"), test::read_bytes(dir / "w2.bin"));
}

TEST(Weights, DoubleModelForwardSurvivesFloatStorage) {
  test::TempDir dir;
  const auto m = build_unet<double>(small_spec(HeadKind::kHeatmap1d), 6);
  save_weights(m, dir / "w.bin");
  const auto back = load_weights<double>(dir / "w.bin");
  std::mt19937_64 rng(1);
  const T x = test::random_tensor({1, 1, 32, 16}, rng);
  const T a = m.predict(x), b = back.predict(x);
  EXPECT_LE((a.data() - b.data()).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Weights, CorruptFilesAreRejected) {
  test::TempDir dir;
  save_weights(build_unet<float>(small_spec(HeadKind::kHeatmap1d), 1), dir / "w.bin");
  const auto bytes = test::read_bytes(dir / "w.bin");
  auto write = [&](const std::string& name, std::vector<char> b) {
    std::ofstream(dir / name, std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
    return dir / name;
  };
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_EQ(test::error_kind_of([&] { load_weights<float>(write("t.bin", truncated)); }),
            ErrorKind::kPayloadLength);
  auto version = bytes;
  version[4] = 9;
  EXPECT_EQ(test::error_kind_of([&] { load_weights<float>(write("v.bin", version)); }),
            ErrorKind::kUnsupportedVersion);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(test::error_kind_of([&] { load_weights<float>(write("m.bin", magic)); }), ErrorKind::kFormat);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(test::error_kind_of([&] { load_weights<float>(write("x.bin", trailing)); }), ErrorKind::kFormat);
}

}  // namespace
}  // namespace sarco
