#pragma once

#include <functional>
#include <string>

#include "ntt/neural/params.hpp"

namespace ntt::nn {

/// Builds a scalar loss on `tape` from the current values in `store`. Must be
/// deterministic.
using LossBuilder = std::function<Var(Tape& tape, const ParamStore& store)>;

Gradients analytic_gradients(const LossBuilder& loss_fn, const ParamStore& store);

/// Central differences, one coordinate at a time.
Gradients numeric_gradients(const LossBuilder& loss_fn, const ParamStore& store,
                            double eps = 1e-5);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Worst |a - n| / max(|a|, |n|, 1e-8) over all coordinates.
GradCheckReport compare_gradients(const ParamStore& store, const Gradients& analytic,
                                  const Gradients& numeric);

GradCheckReport finite_diff_check(const LossBuilder& loss_fn, const ParamStore& store,
                                  double eps = 1e-5);

}  // namespace ntt::nn
