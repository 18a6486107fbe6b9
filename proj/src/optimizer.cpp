#include "jtanet/optimizer.hpp"

#include <cmath>

namespace jtanet {

AdamState AdamState::for_params(const ModelParams& params, double lr) {
  AdamState s;
  s.lr = lr;
  s.first_moment = zero_grads(params);
  s.second_moment = zero_grads(params);
  return s;
}

void adam_step(ModelParams& params, const GradStore& grads, AdamState& state) {
  for (const auto& g : grads.entries()) {
    const Tensor& p = params.get(g.name);
    require_shape(g.value, p.shape(), "adam_step gradient for " + g.name);
    require_shape(state.first_moment.get(g.name), p.shape(), "adam_step moment for " + g.name);
    g.value.check_finite("gradient of " + g.name);
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& g : grads.entries()) {
    Tensor& p = params.get(g.name);
    Tensor& m = state.first_moment.get(g.name);
    Tensor& v = state.second_moment.get(g.name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.value[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace jtanet
