#include <algorithm>
#include <numeric>
#include <random>

#include "sarco/error.hpp"
#include "sarco/train.hpp"

namespace sarco {

void TrainHyper::validate() const {
  if (epochs < 1) throw Error(ErrorKind::kPrecondition, "train.epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::kPrecondition, "train.batch_size must be >= 1");
  if (!(lr > 0.0)) throw Error(ErrorKind::kPrecondition, "train.lr must be positive");
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace sarco
