#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ntt/neural/tensor.hpp"

namespace ntt::nn {

enum class Init { fan_in_uniform, zeros };

/// Named parameters with fixed shapes. Initialization is a pure function of
/// (seed, name), so insertion order does not affect values.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Uniform init draws from +-1/sqrt(fan_in); fan_in defaults to `rows`.
  /// Throws std::invalid_argument when `name` already exists.
  Tensor& add(std::string name, Eigen::Index rows, Eigen::Index cols, Init init,
              Eigen::Index fan_in = 0);

  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::size_t index) { return values_.at(index); }
  const Tensor& at(std::size_t index) const { return values_.at(index); }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t scalar_count() const;
  std::uint64_t seed() const { return seed_; }

  Gradients zeros_like() const;

 private:
  std::uint64_t seed_;
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Affine layer parameters `<prefix>.W` (in x out) and `<prefix>.b` (1 x out),
/// both uniform in +-1/sqrt(in).
void add_linear(ParamStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index out);

/// Perceptron description: widths[0] is the input width, each further entry
/// one affine layer. Hidden layers use ReLU; the last layer is linear unless
/// `activate_output` is set.
struct MlpSpec {
  std::string prefix;
  std::vector<Eigen::Index> widths;
  bool activate_output = false;
};

void add_mlp(ParamStore& store, const MlpSpec& spec);
Var mlp_apply(Tape& tape, const ParamStore& store, const MlpSpec& spec, Var x);

/// Single-head attention projections `<prefix>.{Wq,Wk,Wv,Wo}`, each d x d.
void add_attention(ParamStore& store, const std::string& prefix, Eigen::Index d);

/// out = softmax(Q Wq (K Wk)^T / sqrt(d)) V Wv, then Wo. Throws on an empty
/// key set or mismatched widths.
Var cross_attention(Tape& tape, const ParamStore& store, const std::string& prefix, Var q, Var k,
                    Var v);

// Checkpoint: <dir>/manifest.json plus one little-endian float64 blob per
// parameter. `extra_json` (a JSON object) is stored under "extra".
void save_params(const ParamStore& store, const std::filesystem::path& dir,
                 const std::string& extra_json);
/// Loads parameters into a store that already has the expected names and
/// shapes. Returns the "extra" manifest object as a JSON string.
std::string load_params(ParamStore& store, const std::filesystem::path& dir);

}  // namespace ntt::nn
