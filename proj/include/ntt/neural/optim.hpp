#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "ntt/neural/params.hpp"

namespace ntt::nn {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moment accumulators for every parameter of a store.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;

  static AdamState for_store(const ParamStore& store);
};

/// Decoupled-weight-decay Adam with bias correction. Only parameters whose
/// entry in `active` is true are touched; an empty mask means all.
void adamw_step(ParamStore& params, const Gradients& grads, AdamState& state, double lr,
                const AdamWOptions& options = {}, const std::vector<bool>& active = {});

struct LrSchedule {
  double base_lr = 1e-4;
  double min_lr = 0.0;
  std::size_t total_steps = 1;
};

/// Cosine annealing from base_lr at step 0 to min_lr at total_steps; steps
/// outside [0, total_steps] are clamped.
double cosine_lr(std::ptrdiff_t step, const LrSchedule& schedule);

}  // namespace ntt::nn
