#include "ntt/neural/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ntt::nn {

AdamState AdamState::for_store(const ParamStore& store) {
  AdamState s;
  s.m = store.zeros_like();
  s.v = store.zeros_like();
  return s;
}

void adamw_step(ParamStore& params, const Gradients& grads, AdamState& state, double lr,
                const AdamWOptions& options, const std::vector<bool>& active) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adamw_step: parameter count mismatch");
  }
  if (!active.empty() && active.size() != params.size()) {
    throw std::invalid_argument("adamw_step: mask size mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const Scalar b1 = options.beta1;
  const Scalar b2 = options.beta2;
  const Scalar bias1 = 1.0 - std::pow(options.beta1, t);
  const Scalar bias2 = 1.0 - std::pow(options.beta2, t);
  const Scalar step_lr = lr;
  const Scalar eps = options.eps;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!active.empty() && !active[i]) continue;
    Tensor& w = params.at(i);
    const Tensor& g = grads[i];
    if (g.rows() != w.rows() || g.cols() != w.cols()) {
      throw std::invalid_argument("adamw_step: shape mismatch for " + params.names()[i]);
    }
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseProduct(g);
    w *= Scalar(1.0 - lr * options.weight_decay);
    const auto m_hat = m.array() / bias1;
    const auto v_hat = v.array() / bias2;
    w.array() -= step_lr * m_hat / (v_hat.sqrt() + eps);
  }
}

double cosine_lr(std::ptrdiff_t step, const LrSchedule& schedule) {
  if (schedule.total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  const double total = static_cast<double>(schedule.total_steps);
  const double s = std::clamp(static_cast<double>(step), 0.0, total);
  return schedule.min_lr +
         0.5 * (schedule.base_lr - schedule.min_lr) * (1.0 + std::cos(std::numbers::pi * s / total));
}

}  // namespace ntt::nn
