#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace ntt::nn {

/// Element type of every tensor. The extended build (namespace ntt_xp) is
/// only used for finite-difference checks.
#ifdef NTT_EXTENDED
using Scalar = long double;
#else
using Scalar = double;
#endif

/// Dense row-major matrix. Vectors are 1 x n rows.
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ParamStore;
class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  Scalar scalar() const;
};

/// Per-parameter gradients aligned with ParamStore::names().
using Gradients = std::vector<Tensor>;

/// Records a computation for reverse-mode differentiation. A tape is used for
/// one forward/backward pass and then discarded.
class Tape {
 public:
  /// Receives the gradient of the node output and pushes contributions to
  /// inputs via Tape::accumulate.
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var scalar(Scalar value);
  /// Leaf bound to a stored parameter. Repeated calls return the same node.
  Var parameter(const ParamStore& store, std::string_view name);

  /// Records a node computed outside the built-in ops.
  Var record(Tensor value, Backward backward);

  const Tensor& value(Var v) const;
  /// Adds `delta` into the gradient of `v`; only valid inside Backward.
  void accumulate(Var v, const Tensor& delta);
  void accumulate(int id, const Tensor& delta);

  /// Backpropagates from a 1x1 node. Throws std::invalid_argument otherwise.
  void backward(Var loss);

  /// Gradient for every parameter of `store`; parameters that did not
  /// contribute get exact zeros.
  Gradients gradients(const ParamStore& store) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool has_grad = false;
    Backward backward;
    int param_index = -1;
  };

  const Tensor& node_value(const Node& n) const { return n.external ? *n.external : n.value; }

  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;
  const ParamStore* store_ = nullptr;
};

// Differentiable operations. All inputs must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, Scalar s);
Var add_scalar(Var a, Scalar s);
/// a (n x c) plus the 1 x c row `r` added to every row.
Var add_row(Var a, Var r);
Var relu(Var a);
Var abs(Var a);
Var log(Var a);
/// Elementwise clamp; the gradient is zero where the input was clipped.
Var clamp(Var a, Scalar lo, Scalar hi);
Var transpose(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);
Var concat_rows(std::span<const Var> parts);
Var concat_rows(std::initializer_list<Var> parts);
/// Repeats a 1 x c row `n` times.
Var repeat_rows(Var row, Eigen::Index n);
Var slice_rows(Var a, Eigen::Index begin, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
Var gather_rows(Var a, std::span<const Eigen::Index> rows);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
/// Column-wise maximum over rows (first row wins ties). Throws on zero rows.
Var max_pool_rows(Var a);
/// Row-wise softmax with max subtraction. Throws on non-finite input.
Var softmax_rows(Var a);
Var sum(Var a);
Var mean(Var a);

// Value-level helpers shared with the differentiable versions.
Tensor softmax_rows(const Tensor& logits);
Tensor max_pool_rows(const Tensor& x);

}  // namespace ntt::nn
