#include <cmath>

#include "sarco/optim.hpp"

namespace sarco::nn {

template <typename Scalar>
void adam_step(const std::vector<ParamRef<Scalar>>& params, AdamState<Scalar>& state,
               const AdamConfig& config) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Tensor<Scalar>::Vector::Zero(p.tensor->size()));
      state.v.push_back(Tensor<Scalar>::Vector::Zero(p.tensor->size()));
    }
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorKind::kArgument, "adam_step: parameter list changed between steps");
  }
  for (const auto& p : params) {
    if (p.tensor->has_grad() && !p.tensor->grad().allFinite()) {
      throw Error(ErrorKind::kNumeric, "non-finite gradient in layer '" + p.name + "'");
    }
  }
  ++state.step;
  const Scalar b1 = Scalar(config.beta1);
  const Scalar b2 = Scalar(config.beta2);
  const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(state.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(state.step));
  const Scalar lr = Scalar(config.lr);
  const Scalar eps = Scalar(config.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Scalar>& t = *params[i].tensor;
    if (!t.has_grad()) continue;
    const auto& g = t.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    t.data().array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

template void adam_step(const std::vector<ParamRef<float>>&, AdamState<float>&, const AdamConfig&);
template void adam_step(const std::vector<ParamRef<double>>&, AdamState<double>&, const AdamConfig&);

}  // namespace sarco::nn
