#include "ntt/neural/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ntt::nn {

Gradients analytic_gradients(const LossBuilder& loss_fn, const ParamStore& store) {
  Tape tape;
  const Var loss = loss_fn(tape, store);
  tape.backward(loss);
  return tape.gradients(store);
}

Gradients numeric_gradients(const LossBuilder& loss_fn, const ParamStore& store, double eps) {
  ParamStore work = store;
  Gradients out = store.zeros_like();
  auto eval = [&] {
    Tape tape;
    return loss_fn(tape, work).scalar();
  };
  for (std::size_t p = 0; p < work.size(); ++p) {
    Tensor& w = work.at(p);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const Scalar orig = w.data()[i];
      const Scalar h = eps;
      w.data()[i] = orig + h;
      const Scalar up = eval();
      w.data()[i] = orig - h;
      const Scalar down = eval();
      w.data()[i] = orig;
      out[p].data()[i] = (up - down) / (2 * h);
    }
  }
  return out;
}

GradCheckReport compare_gradients(const ParamStore& store, const Gradients& analytic,
                                  const Gradients& numeric) {
  GradCheckReport r;
  for (std::size_t p = 0; p < store.size(); ++p) {
    for (Eigen::Index i = 0; i < analytic[p].size(); ++i) {
      const Scalar a = analytic[p].data()[i];
      const Scalar n = numeric[p].data()[i];
      const auto rel = static_cast<double>(std::abs(a - n) / std::max({std::abs(a), std::abs(n), Scalar(1e-8)}));
      ++r.coordinates;
      if (rel > r.max_rel_error || r.worst_index < 0) {
        r.max_rel_error = rel;
        r.worst_param = store.names()[p];
        r.worst_index = i;
        r.analytic = static_cast<double>(a);
        r.numeric = static_cast<double>(n);
      }
    }
  }
  return r;
}

GradCheckReport finite_diff_check(const LossBuilder& loss_fn, const ParamStore& store, double eps) {
  return compare_gradients(store, analytic_gradients(loss_fn, store),
                           numeric_gradients(loss_fn, store, eps));
}

}  // namespace ntt::nn
