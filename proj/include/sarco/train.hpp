#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sarco/model.hpp"

namespace sarco {

struct TrainHyper {
  int epochs = 30;
  int batch_size = 4;
  double lr = 1e-3;
  /// Seeds the per-epoch shuffle; augmentation has its own seed.
  std::uint64_t shuffle_seed = 0;
  bool augment = true;
  /// Called after every epoch with (epoch, mean loss); may be empty.
  std::function<void(int, double)> on_epoch;

  void validate() const;
};

template <typename Scalar>
struct TrainResult {
  Model<Scalar> model;
  std::vector<double> loss;  // one entry per optimiser step
};

/// Permutation of [0, n) for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

}  // namespace sarco
