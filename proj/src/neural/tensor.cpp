#include "ntt/neural/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ntt/neural/params.hpp"

namespace ntt::nn {

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid() || a.tape != b.tape) {
    throw std::invalid_argument("operands must live on the same tape");
  }
  return *a.tape;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }

Scalar Var::scalar() const {
  const Tensor& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw std::invalid_argument("node is not a scalar");
  return v(0, 0);
}

Var Tape::constant(Tensor value) { return record(std::move(value), nullptr); }

Var Tape::scalar(Scalar value) {
  Tensor t(1, 1);
  t(0, 0) = value;
  return constant(std::move(t));
}

Var Tape::parameter(const ParamStore& store, std::string_view name) {
  if (store_ != nullptr && store_ != &store) {
    throw std::invalid_argument("tape already bound to another parameter store");
  }
  store_ = &store;
  const int index = static_cast<int>(store.index_of(name));
  if (auto it = param_nodes_.find(index); it != param_nodes_.end()) return {this, it->second};
  Node n;
  n.external = &store.at(static_cast<std::size_t>(index));
  n.param_index = index;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(index, id);
  return {this, id};
}

Var Tape::record(Tensor value, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(Var v) const { return node_value(nodes_.at(static_cast<std::size_t>(v.id))); }

void Tape::accumulate(Var v, const Tensor& delta) { accumulate(v.id, delta); }

void Tape::accumulate(int id, const Tensor& delta) {
  Node& n = nodes_.at(static_cast<std::size_t>(id));
  if (!n.has_grad) {
    n.grad = delta;
    n.has_grad = true;
  } else {
    n.grad += delta;
  }
}

void Tape::backward(Var loss) {
  const Tensor& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) throw std::invalid_argument("backward needs a scalar loss");
  for (auto& n : nodes_) n.has_grad = false;
  accumulate(loss.id, Tensor::Ones(1, 1));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.has_grad || !n.backward) continue;
    // Inputs always have smaller ids, so n.grad is final here.
    n.backward(*this, n.grad);
  }
}

Gradients Tape::gradients(const ParamStore& store) const {
  Gradients out = store.zeros_like();
  for (const auto& [index, id] : param_nodes_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.has_grad) out[static_cast<std::size_t>(index)] = n.grad;
  }
  return out;
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: shape mismatch");
  return t.record(av * bv, [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g * tape.value(b).transpose());
    tape.accumulate(b, tape.value(a).transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  return t.record(a.value() + b.value(), [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  return t.record(a.value() - b.value(), [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  return t.record(a.value().cwiseProduct(b.value()), [a, b](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g.cwiseProduct(tape.value(b)));
    tape.accumulate(b, g.cwiseProduct(tape.value(a)));
  });
}

Var scale(Var a, Scalar s) {
  return a.tape->record(s * a.value(),
                        [a, s](Tape& tape, const Tensor& g) { tape.accumulate(a, s * g); });
}

Var add_scalar(Var a, Scalar s) {
  return a.tape->record((a.value().array() + s).matrix(),
                        [a](Tape& tape, const Tensor& g) { tape.accumulate(a, g); });
}

Var add_row(Var a, Var r) {
  Tape& t = same_tape(a, r);
  const Tensor& av = a.value();
  const Tensor& rv = r.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Tensor out = av;
  out.rowwise() += rv.row(0);
  return t.record(std::move(out), [a, r](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g);
    tape.accumulate(r, g.colwise().sum());
  });
}

Var relu(Var a) {
  Tensor out = a.value().cwiseMax(0.0);
  return a.tape->record(std::move(out), [a](Tape& tape, const Tensor& g) {
    const Tensor& x = tape.value(a);
    tape.accumulate(a, (x.array() > 0.0).select(g, 0.0).matrix());
  });
}

Var abs(Var a) {
  return a.tape->record(a.value().cwiseAbs(), [a](Tape& tape, const Tensor& g) {
    const Tensor& x = tape.value(a);
    Tensor sign = x.unaryExpr([](Scalar v) { return Scalar(v > 0 ? 1 : (v < 0 ? -1 : 0)); });
    tape.accumulate(a, g.cwiseProduct(sign));
  });
}

Var log(Var a) {
  return a.tape->record(a.value().array().log().matrix(), [a](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g.cwiseQuotient(tape.value(a)));
  });
}

Var clamp(Var a, Scalar lo, Scalar hi) {
  Tensor out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape->record(std::move(out), [a, lo, hi](Tape& tape, const Tensor& g) {
    const Tensor& x = tape.value(a);
    tape.accumulate(a, ((x.array() >= lo) && (x.array() <= hi)).select(g, 0.0).matrix());
  });
}

Var transpose(Var a) {
  return a.tape->record(a.value().transpose(), [a](Tape& tape, const Tensor& g) {
    tape.accumulate(a, g.transpose());
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape& t = *parts[0].tape;
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.tape != &t || p.rows() != rows) throw std::invalid_argument("concat_cols: shape mismatch");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  Eigen::Index offset = 0;
  std::vector<Var> inputs(parts.begin(), parts.end());
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return t.record(std::move(out), [inputs](Tape& tape, const Tensor& g) {
    Eigen::Index off = 0;
    for (const auto& p : inputs) {
      const Eigen::Index c = tape.value(p).cols();
      tape.accumulate(p, g.middleCols(off, c));
      off += c;
    }
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Tape& t = *parts[0].tape;
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.tape != &t || p.cols() != cols) throw std::invalid_argument("concat_rows: shape mismatch");
    rows += p.rows();
  }
  Tensor out(rows, cols);
  Eigen::Index offset = 0;
  std::vector<Var> inputs(parts.begin(), parts.end());
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return t.record(std::move(out), [inputs](Tape& tape, const Tensor& g) {
    Eigen::Index off = 0;
    for (const auto& p : inputs) {
      const Eigen::Index r = tape.value(p).rows();
      tape.accumulate(p, g.middleRows(off, r));
      off += r;
    }
  });
}

Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

Var repeat_rows(Var row, Eigen::Index n) {
  const Tensor& rv = row.value();
  if (rv.rows() != 1) throw std::invalid_argument("repeat_rows: input must be a single row");
  Tensor out = rv.replicate(n, 1);
  return row.tape->record(std::move(out), [row](Tape& tape, const Tensor& g) {
    tape.accumulate(row, g.colwise().sum());
  });
}

Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count) {
  const Tensor& av = a.value();
  if (begin < 0 || count < 0 || begin + count > av.rows()) {
    throw std::invalid_argument("slice_rows: out of range");
  }
  return a.tape->record(av.middleRows(begin, count), [a, begin, count](Tape& tape, const Tensor& g) {
    const Tensor& x = tape.value(a);
    Tensor full = Tensor::Zero(x.rows(), x.cols());
    full.middleRows(begin, count) = g;
    tape.accumulate(a, full);
  });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  const Tensor& av = a.value();
  if (begin < 0 || count < 0 || begin + count > av.cols()) {
    throw std::invalid_argument("slice_cols: out of range");
  }
  return a.tape->record(av.middleCols(begin, count), [a, begin, count](Tape& tape, const Tensor& g) {
    const Tensor& x = tape.value(a);
    Tensor full = Tensor::Zero(x.rows(), x.cols());
    full.middleCols(begin, count) = g;
    tape.accumulate(a, full);
  });
}

Var gather_rows(Var a, std::span<const Eigen::Index> rows) {
  const Tensor& av = a.value();
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  Tensor out(static_cast<Eigen::Index>(idx.size()), av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= av.rows()) throw std::invalid_argument("gather_rows: out of range");
    out.row(static_cast<Eigen::Index>(i)) = av.row(idx[i]);
  }
  return a.tape->record(std::move(out), [a, idx](Tape& tape, const Tensor& g) {
    const Tensor& x = tape.value(a);
    Tensor full = Tensor::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) full.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    tape.accumulate(a, full);
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  const Tensor& av = a.value();
  if (rows * cols != av.size()) throw std::invalid_argument("reshape: size mismatch");
  Tensor out = Eigen::Map<const Tensor>(av.data(), rows, cols);
  const Eigen::Index r0 = av.rows();
  const Eigen::Index c0 = av.cols();
  return a.tape->record(std::move(out), [a, r0, c0](Tape& tape, const Tensor& g) {
    tape.accumulate(a, Eigen::Map<const Tensor>(g.data(), r0, c0));
  });
}

Tensor max_pool_rows(const Tensor& x) {
  if (x.rows() == 0) throw std::invalid_argument("max_pool_rows: no rows");
  return x.colwise().maxCoeff();
}

Var max_pool_rows(Var a) {
  const Tensor& x = a.value();
  if (x.rows() == 0) throw std::invalid_argument("max_pool_rows: no rows");
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(x.cols()), 0);
  Tensor out(1, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < x.rows(); ++r) {
      if (x(r, c) > x(best, c)) best = r;
    }
    arg[static_cast<std::size_t>(c)] = best;
    out(0, c) = x(best, c);
  }
  return a.tape->record(std::move(out), [a, arg](Tape& tape, const Tensor& g) {
    const Tensor& xv = tape.value(a);
    Tensor full = Tensor::Zero(xv.rows(), xv.cols());
    for (Eigen::Index c = 0; c < xv.cols(); ++c) full(arg[static_cast<std::size_t>(c)], c) = g(0, c);
    tape.accumulate(a, full);
  });
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.cols() == 0) throw std::invalid_argument("softmax: empty input");
  if (!logits.allFinite()) throw std::invalid_argument("softmax: non-finite logits");
  Tensor out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Var softmax_rows(Var a) {
  Tensor y = softmax_rows(a.value());
  return a.tape->record(y, [a, y](Tape& tape, const Tensor& g) {
    Tensor dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const Scalar inner = g.row(r).dot(y.row(r));
      dx.row(r) = y.row(r).cwiseProduct((g.row(r).array() - inner).matrix());
    }
    tape.accumulate(a, dx);
  });
}

Var sum(Var a) {
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(std::move(out), [a](Tape& tape, const Tensor& g) {
    const Tensor& x = tape.value(a);
    tape.accumulate(a, Tensor::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const auto n = static_cast<Scalar>(a.value().size());
  if (n == 0) throw std::invalid_argument("mean: empty input");
  return scale(sum(a), 1.0 / n);
}

}  // namespace ntt::nn
