#include "byov/numerics/adam.hpp"

#include <Eigen/Core>
#include <cmath>

namespace byov::num {

template <class S>
AdamState<S> AdamState<S>::init(const std::vector<Tensor<S>>& params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const auto& p : params) {
    state.m.emplace_back(p.numel(), S(0));
    state.v.emplace_back(p.numel(), S(0));
  }
  return state;
}

template <class S>
void adam_step(std::vector<Tensor<S>>& params, AdamState<S>& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: optimizer state does not match the parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    if (state.m[i].size() != params[i].numel()) throw ContractError("adam_step: moment length mismatch");
  }
  ++state.step_count;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step_count);
  const S b1 = S(c.beta1), b2 = S(c.beta2);
  const S corr1 = S(1.0 - std::pow(c.beta1, t));
  const S corr2 = S(1.0 - std::pow(c.beta2, t));
  const S lr = S(c.lr), eps = S(c.eps);
  const S inv_corr1 = S(1) / corr1, inv_corr2 = S(1) / corr2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta_span = params[i].mutable_data();
    auto g_span = params[i].grad();
    const auto n = static_cast<Eigen::Index>(theta_span.size());
    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> theta(theta_span.data(), n);
    Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> g(g_span.data(), n);
    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> m(state.m[i].data(), n);
    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> v(state.v[i].data(), n);
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g.square();
    theta -= lr * (m * inv_corr1) / ((v * inv_corr2).sqrt() + eps);
    params[i].zero_grad();
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::vector<Tensor<float>>&, AdamState<float>&);
template void adam_step(std::vector<Tensor<double>>&, AdamState<double>&);

}  // namespace byov::num
