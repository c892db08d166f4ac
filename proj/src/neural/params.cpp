#include "ntt/neural/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace ntt::nn {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Tensor& ParamStore::add(std::string name, Eigen::Index rows, Eigen::Index cols, Init init,
                        Eigen::Index fan_in) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter: " + name);
  Tensor t = Tensor::Zero(rows, cols);
  if (init == Init::fan_in_uniform) {
    std::mt19937_64 rng(seed_ ^ fnv1a(name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : rows));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  }
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(t));
  return values_.back();
}

bool ParamStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t ParamStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return it->second;
}

Tensor& ParamStore::at(std::string_view name) { return values_[index_of(name)]; }
const Tensor& ParamStore::at(std::string_view name) const { return values_[index_of(name)]; }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

Gradients ParamStore::zeros_like() const {
  Gradients g;
  g.reserve(values_.size());
  for (const auto& v : values_) g.push_back(Tensor::Zero(v.rows(), v.cols()));
  return g;
}

void add_linear(ParamStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index out) {
  store.add(prefix + ".W", in, out, Init::fan_in_uniform);
  store.add(prefix + ".b", 1, out, Init::fan_in_uniform, in);
}

void add_mlp(ParamStore& store, const MlpSpec& spec) {
  if (spec.widths.size() < 2) throw std::invalid_argument("mlp needs input and output widths");
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    add_linear(store, spec.prefix + "." + std::to_string(l), spec.widths[l], spec.widths[l + 1]);
  }
}

Var mlp_apply(Tape& tape, const ParamStore& store, const MlpSpec& spec, Var x) {
  if (x.cols() != spec.widths.front()) {
    throw std::invalid_argument(spec.prefix + ": input width mismatch");
  }
  const std::size_t layers = spec.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = spec.prefix + "." + std::to_string(l);
    x = add_row(matmul(x, tape.parameter(store, p + ".W")), tape.parameter(store, p + ".b"));
    if (l + 1 < layers || spec.activate_output) x = relu(x);
  }
  return x;
}

void add_attention(ParamStore& store, const std::string& prefix, Eigen::Index d) {
  for (const char* m : {".Wq", ".Wk", ".Wv", ".Wo"}) store.add(prefix + m, d, d, Init::fan_in_uniform);
}

Var cross_attention(Tape& tape, const ParamStore& store, const std::string& prefix, Var q, Var k,
                    Var v) {
  if (k.rows() == 0) throw std::invalid_argument("cross_attention: no keys");
  if (k.rows() != v.rows()) throw std::invalid_argument("cross_attention: key/value count mismatch");
  const Tensor& wq = store.at(prefix + ".Wq");
  if (q.cols() != wq.rows() || k.cols() != wq.rows() || v.cols() != wq.rows()) {
    throw std::invalid_argument("cross_attention: width mismatch");
  }
  const Var qp = matmul(q, tape.parameter(store, prefix + ".Wq"));
  const Var kp = matmul(k, tape.parameter(store, prefix + ".Wk"));
  const Var vp = matmul(v, tape.parameter(store, prefix + ".Wv"));
  const Scalar inv_sqrt_d = 1 / std::sqrt(static_cast<Scalar>(wq.cols()));
  const Var weights = softmax_rows(scale(matmul(qp, transpose(kp)), inv_sqrt_d));
  return matmul(matmul(weights, vp), tape.parameter(store, prefix + ".Wo"));
}

void save_params(const ParamStore& store, const std::filesystem::path& dir,
                 const std::string& extra_json) {
  static_assert(std::endian::native == std::endian::little, "checkpoint blobs are little-endian");
  std::filesystem::create_directories(dir);
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Tensor& t = store.at(i);
    const std::string file = store.names()[i] + ".bin";
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f64 = t.cast<double>();
    out.write(reinterpret_cast<const char*>(f64.data()),
              static_cast<std::streamsize>(f64.size() * sizeof(double)));
    params.push_back({{"name", store.names()[i]}, {"shape", {t.rows(), t.cols()}}, {"file", file}});
  }
  nlohmann::json manifest = {{"version", "ckpt_v1"},
                             {"seed", store.seed()},
                             {"params", params},
                             {"extra", nlohmann::json::parse(extra_json)}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

std::string load_params(ParamStore& store, const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot read manifest in " + dir.string());
  const auto manifest = nlohmann::json::parse(in);
  if (manifest.at("version") != "ckpt_v1") throw std::runtime_error("unsupported checkpoint version");
  for (const auto& p : manifest.at("params")) {
    const auto name = p.at("name").get<std::string>();
    Tensor& t = store.at(name);
    const auto rows = p.at("shape").at(0).get<Eigen::Index>();
    const auto cols = p.at("shape").at(1).get<Eigen::Index>();
    if (rows != t.rows() || cols != t.cols()) throw std::runtime_error("shape mismatch for " + name);
    std::ifstream blob(dir / p.at("file").get<std::string>(), std::ios::binary);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f64(rows, cols);
    blob.read(reinterpret_cast<char*>(f64.data()), static_cast<std::streamsize>(f64.size() * sizeof(double)));
    if (!blob) throw std::runtime_error("truncated blob for " + name);
    t = f64.cast<Scalar>();
  }
  return manifest.at("extra").dump();
}

}  // namespace ntt::nn
