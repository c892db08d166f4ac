#include "ntt/scene_tokens.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ntt/objectives.hpp"

namespace ntt {

using nn::Tensor;
using nn::Var;

namespace {

Var pad_rows(nn::Tape& tape, Var block, Eigen::Index filled, Eigen::Index total, Eigen::Index d) {
  if (filled == total) return block;
  const Var zeros = tape.constant(Tensor::Zero(total - filled, d));
  if (filled == 0) return zeros;
  return nn::concat_rows({block, zeros});
}

}  // namespace

std::vector<std::size_t> nearest_indices(const std::vector<double>& keys, std::size_t limit) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (keys.size() <= limit) return order;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  order.resize(limit);
  std::sort(order.begin(), order.end());
  return order;
}

Tensor map_element_features(const MapElement& element) {
  const auto& pts = element.geometry.points();
  Tensor f(static_cast<Eigen::Index>(pts.size() - 1), kMapFeatureWidth);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Point2 delta = pts[i + 1] - pts[i];
    const double len = norm(delta);
    if (len == 0.0) continue;
    f.row(r).setZero();
    f(r, 0) = pts[i].x / kPositionScale;
    f(r, 1) = pts[i].y / kPositionScale;
    f(r, 2) = delta.x / kPositionScale;
    f(r, 3) = delta.y / kPositionScale;
    f(r, 4) = delta.x / len;
    f(r, 5) = delta.y / len;
    f(r, 6 + static_cast<Eigen::Index>(element.kind)) = 1.0;
    ++r;
  }
  return f.topRows(r);
}

Tensor agent_features(const AgentTrack& agent) {
  Tensor f = Tensor::Zero(1, kAgentFeatureWidth);
  f(0, 0) = agent.current.position.x / kPositionScale;
  f(0, 1) = agent.current.position.y / kPositionScale;
  f(0, 2) = agent.velocity.x / kSpeedScale;
  f(0, 3) = agent.velocity.y / kSpeedScale;
  f(0, 4) = std::cos(agent.current.heading);
  f(0, 5) = std::sin(agent.current.heading);
  f(0, 6) = agent.length / kSizeScale;
  f(0, 7) = agent.width / kSizeScale;
  f(0, 8 + static_cast<Eigen::Index>(agent.category)) = 1.0;
  return f;
}

Tensor ego_status_features(double ego_speed) {
  Tensor f = Tensor::Zero(1, kAgentFeatureWidth);
  f(0, 2) = ego_speed / kSpeedScale;
  f(0, 4) = 1.0;
  f(0, 6) = kEgoLength / kSizeScale;
  f(0, 7) = kEgoWidth / kSizeScale;
  f(0, kAgentFeatureWidth - 1) = 1.0;
  return f;
}

MapTokens encode_map_tokens(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                            const EgoScene& scene) {
  const ModelLayout layout(cfg);
  const auto slots = static_cast<Eigen::Index>(cfg.map_tokens);
  std::vector<double> dist;
  dist.reserve(scene.map.size());
  for (const auto& e : scene.map) dist.push_back(nearest_point_on_polyline(e.geometry, {}).distance);
  MapTokens out;
  out.source = nearest_indices(dist, cfg.map_tokens);
  out.valid.assign(cfg.map_tokens, false);

  if (out.source.empty()) {
    out.tokens = tape.constant(Tensor::Zero(slots, cfg.d));
    return out;
  }
  std::vector<Tensor> feats;
  Eigen::Index total_rows = 0;
  for (std::size_t idx : out.source) {
    feats.push_back(map_element_features(scene.map[idx]));
    total_rows += feats.back().rows();
  }
  Tensor stacked(total_rows, kMapFeatureWidth);
  Eigen::Index offset = 0;
  for (const auto& f : feats) {
    stacked.middleRows(offset, f.rows()) = f;
    offset += f.rows();
  }
  const Var encoded = nn::mlp_apply(tape, store, layout.map_encoder, tape.constant(std::move(stacked)));
  std::vector<Var> pooled;
  offset = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    pooled.push_back(nn::max_pool_rows(nn::slice_rows(encoded, offset, feats[i].rows())));
    offset += feats[i].rows();
    out.valid[i] = true;
  }
  out.tokens = pad_rows(tape, nn::concat_rows(pooled), static_cast<Eigen::Index>(pooled.size()),
                        slots, cfg.d);
  return out;
}

AgentTokens encode_agent_tokens(nn::Tape& tape, const nn::ParamStore& store,
                                const ModelConfig& cfg, const EgoScene& scene) {
  if (cfg.agent_tokens < 1) throw std::invalid_argument("agent token budget must include the ego");
  const ModelLayout layout(cfg);
  std::vector<double> dist;
  dist.reserve(scene.agents.size());
  for (const auto& a : scene.agents) dist.push_back(norm(a.current.position));
  AgentTokens out;
  out.source = nearest_indices(dist, cfg.agent_tokens - 1);
  out.valid.assign(cfg.agent_tokens, false);

  Tensor feats(static_cast<Eigen::Index>(out.source.size() + 1), kAgentFeatureWidth);
  feats.row(0) = ego_status_features(scene.ego_speed);
  out.valid[0] = true;
  for (std::size_t i = 0; i < out.source.size(); ++i) {
    feats.row(static_cast<Eigen::Index>(i + 1)) = agent_features(scene.agents[out.source[i]]);
    out.valid[i + 1] = true;
  }
  const Eigen::Index filled = feats.rows();
  const Var encoded = nn::mlp_apply(tape, store, layout.agent_encoder, tape.constant(std::move(feats)));
  out.tokens = pad_rows(tape, encoded, filled, static_cast<Eigen::Index>(cfg.agent_tokens), cfg.d);
  return out;
}

SceneTokens encode_scene_tokens(nn::Tape& tape, const nn::ParamStore& store,
                                const ModelConfig& cfg, const EgoScene& scene) {
  auto map = encode_map_tokens(tape, store, cfg, scene);
  auto agents = encode_agent_tokens(tape, store, cfg, scene);
  SceneTokens t;
  t.map_tokens = map.tokens;
  t.agent_tokens = agents.tokens;
  t.combined = nn::concat_rows({map.tokens, agents.tokens});
  t.map_valid = std::move(map.valid);
  t.agent_valid = std::move(agents.valid);
  t.map_source = std::move(map.source);
  t.agent_source = std::move(agents.source);
  return t;
}

Var SceneTokens::context() const {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < map_valid.size(); ++i) {
    if (map_valid[i]) rows.push_back(static_cast<Eigen::Index>(i));
  }
  const auto base = static_cast<Eigen::Index>(map_valid.size());
  for (std::size_t i = 0; i < agent_valid.size(); ++i) {
    if (agent_valid[i]) rows.push_back(base + static_cast<Eigen::Index>(i));
  }
  if (rows.empty()) return combined;
  return nn::gather_rows(combined, rows);
}

std::vector<Point2> MotionForecast::trajectory(const EgoScene& scene, std::size_t row,
                                               std::size_t mode) const {
  const Tensor& off = offsets.value();
  const Point2 origin = scene.agents.at(agent_source.at(row)).current.position;
  std::vector<Point2> pts;
  pts.reserve(horizon);
  const auto r = static_cast<Eigen::Index>(row);
  const auto base = static_cast<Eigen::Index>(mode * 2 * horizon);
  for (std::size_t i = 0; i < horizon; ++i) {
    const auto c = base + static_cast<Eigen::Index>(2 * i);
    pts.push_back(origin + kPositionScale * Point2{static_cast<double>(off(r, c)), static_cast<double>(off(r, c + 1))});
  }
  return pts;
}

MotionForecast forecast_agents(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                               const SceneTokens& tokens) {
  const ModelLayout layout(cfg);
  MotionForecast f;
  f.modes = cfg.modes;
  f.horizon = cfg.horizon;
  f.agent_source = tokens.agent_source;
  const auto n = static_cast<Eigen::Index>(tokens.agent_source.size());
  const auto k2 = static_cast<Eigen::Index>(2 * cfg.horizon);
  const auto modes = static_cast<Eigen::Index>(cfg.modes);
  if (n == 0) {
    f.offsets = tape.constant(Tensor::Zero(0, modes * k2));
    f.scores = tape.constant(Tensor::Zero(0, modes));
    return f;
  }
  const Var queries = nn::slice_rows(tokens.agent_tokens, 1, n);
  const Var ctx = tokens.context();
  const Var attended = nn::cross_attention(tape, store, layout.motion_attention, queries, ctx, ctx);
  const Var head = nn::mlp_apply(tape, store, layout.motion_head, nn::concat_cols({queries, attended}));
  // Columns: [mode0 x0 y0 ... mode0 x_{k-1} y_{k-1}, mode1 ..., logits]
  f.offsets = nn::slice_cols(head, 0, modes * k2);
  f.scores = nn::softmax_rows(nn::slice_cols(head, modes * k2, modes));
  return f;
}

std::size_t min_fde_mode(const std::vector<std::vector<Point2>>& mode_trajectories,
                         const std::vector<Point2>& gt) {
  if (mode_trajectories.empty() || gt.empty()) throw std::invalid_argument("min_fde_mode: empty input");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < mode_trajectories.size(); ++m) {
    const double d = distance(mode_trajectories[m].back(), gt.back());
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return best;
}

Var motion_loss(const MotionForecast& forecast, const EgoScene& scene, double gamma, double alpha) {
  nn::Tape& tape = *forecast.offsets.tape;
  const auto n = forecast.agent_source.size();
  if (n == 0) return tape.scalar(0.0);
  const auto k2 = static_cast<Eigen::Index>(2 * forecast.horizon);
  std::vector<Var> per_agent;
  per_agent.reserve(n);
  for (std::size_t row = 0; row < n; ++row) {
    const AgentTrack& agent = scene.agents.at(forecast.agent_source[row]);
    if (agent.future_gt.size() != forecast.horizon) {
      throw std::invalid_argument("motion_loss: agent future length mismatch");
    }
    std::vector<std::vector<Point2>> modes;
    for (std::size_t m = 0; m < forecast.modes; ++m) modes.push_back(forecast.trajectory(scene, row, m));
    const std::size_t best = min_fde_mode(modes, agent.future_gt);

    Tensor target(1, k2);
    for (std::size_t i = 0; i < forecast.horizon; ++i) {
      const Point2 rel = agent.future_gt[i] - agent.current.position;
      target(0, static_cast<Eigen::Index>(2 * i)) = rel.x;
      target(0, static_cast<Eigen::Index>(2 * i + 1)) = rel.y;
    }
    const Var row_offsets = nn::slice_rows(forecast.offsets, static_cast<Eigen::Index>(row), 1);
    const Var mode_offsets = nn::reshape(row_offsets, static_cast<Eigen::Index>(forecast.modes), k2);
    const Var chosen = nn::scale(nn::slice_rows(mode_offsets, static_cast<Eigen::Index>(best), 1),
                                 kPositionScale);
    const Var l1 = nn::mean(nn::abs(nn::sub(chosen, tape.constant(std::move(target)))));
    const Var scores = nn::slice_rows(forecast.scores, static_cast<Eigen::Index>(row), 1);
    per_agent.push_back(nn::add(l1, focal_loss(scores, best, gamma, alpha)));
  }
  return nn::mean(nn::concat_rows(per_agent));
}

}  // namespace ntt
