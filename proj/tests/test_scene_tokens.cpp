#include <doctest.h>

#include <cmath>
#include <random>

#include "ntt/model.hpp"
#include "ntt/scene_tokens.hpp"
#include "ntt/simworld.hpp"
#include "oracles.hpp"

using namespace ntt;
using nn::Tensor;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d = 16;
  return cfg;
}

AgentTrack agent_at(double x, double y) {
  AgentTrack a;
  a.current = {{x, y}, 0.0};
  a.velocity = {1.0, 0.0};
  for (std::size_t i = 0; i < kHorizonSteps; ++i) a.future_gt.push_back({x + 0.5 * (i + 1.0), y});
  return a;
}

}  // namespace

TEST_CASE("nearest_indices") {
  CHECK(nearest_indices({5, 1, 3, 2}, 2) == std::vector<std::size_t>{1, 3});
  CHECK(nearest_indices({5, 1, 3, 2}, 10) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(nearest_indices({2, 1, 1, 1}, 2) == std::vector<std::size_t>{1, 2});
  CHECK(nearest_indices({}, 3).empty());
  CHECK(nearest_indices({1, 2}, 0).empty());
}

TEST_CASE("feature rows") {
  const MapElement e{MapKind::road_boundary, Polyline({{0, 0}, {10, 0}, {10, 10}})};
  const Tensor f = map_element_features(e);
  CHECK(f.rows() == 2);
  CHECK(f.cols() == kMapFeatureWidth);
  for (Eigen::Index r = 0; r < f.rows(); ++r) CHECK(f.row(r).tail(kMapKindCount).sum() == 1.0);
  const Tensor a = agent_features(agent_at(3, 4));
  CHECK(a.rows() == 1);
  CHECK(a.cols() == kAgentFeatureWidth);
  const Tensor ego = ego_status_features(8.0);
  CHECK(ego.cols() == kAgentFeatureWidth);
  CHECK(ego != ego_status_features(4.0));
}

TEST_CASE("scene token layout") {
  const auto cfg = small_config();
  nn::ParamStore store(1);
  init_model(store, cfg);
  EgoScene s;
  s.ego_speed = 7.0;
  for (int i = 0; i < 20; ++i)
    s.map.push_back({MapKind::lane_divider, Polyline({{double(i), 1.0 + i}, {double(i) + 5, 1.0 + i}})});
  for (int i = 0; i < 3; ++i) s.agents.push_back(agent_at(5.0 * (i + 1), 0.0));
  nn::Tape t;
  const auto tok = encode_scene_tokens(t, store, cfg, s);
  CHECK(tok.map_tokens.rows() == static_cast<Eigen::Index>(cfg.map_tokens));
  CHECK(tok.agent_tokens.rows() == static_cast<Eigen::Index>(cfg.agent_tokens));
  CHECK(tok.combined.rows() == static_cast<Eigen::Index>(cfg.map_tokens + cfg.agent_tokens));
  CHECK(std::count(tok.map_valid.begin(), tok.map_valid.end(), true) == 16);
  CHECK(tok.agent_valid[0]);
  CHECK(std::count(tok.agent_valid.begin(), tok.agent_valid.end(), true) == 4);
  CHECK(tok.context().rows() == 20);
  // the four farthest map elements are dropped
  for (auto src : tok.map_source) CHECK(src < 16);
  CHECK(tok.agent_source == std::vector<std::size_t>{0, 1, 2});
  for (std::size_t r = 0; r < cfg.agent_tokens; ++r)
    if (!tok.agent_valid[r]) CHECK(tok.agent_tokens.value().row(static_cast<Eigen::Index>(r)).isZero());

  EgoScene empty;
  nn::Tape t2;
  const auto e = encode_scene_tokens(t2, store, cfg, empty);
  CHECK(e.context().rows() == 1);  // ego status only
}

TEST_CASE("agent tokens follow a dense recomputation") {
  const auto cfg = small_config();
  nn::ParamStore store(2);
  init_model(store, cfg);
  const ModelLayout layout(cfg);
  EgoScene s;
  s.ego_speed = 5.0;
  s.agents = {agent_at(2, 3), agent_at(-4, 1)};
  nn::Tape t;
  const auto tok = encode_agent_tokens(t, store, cfg, s);
  const auto ego_ref = oracle::mlp(store, layout.agent_encoder, oracle::from_tensor(ego_status_features(5.0)));
  const auto a_ref = oracle::mlp(store, layout.agent_encoder, oracle::from_tensor(agent_features(s.agents[1])));
  CHECK(oracle::max_scaled_diff(oracle::from_tensor(tok.tokens.value().topRows(1)), ego_ref) < 1e-12);
  CHECK(oracle::max_scaled_diff(oracle::from_tensor(tok.tokens.value().middleRows(2, 1)), a_ref) < 1e-12);
}

TEST_CASE("min_fde_mode") {
  const std::vector<Point2> gt{{0, 0}, {1, 0}};
  CHECK(min_fde_mode({{{0, 0}, {5, 0}}, {{0, 0}, {1, 0.5}}, {{0, 0}, {2, 0}}}, gt) == 1);
  CHECK(min_fde_mode({{{0, 0}, {2, 0}}, {{0, 0}, {0, 0}}}, gt) == 0);  // tie
  CHECK_THROWS(min_fde_mode({}, gt));
}

TEST_CASE("motion forecast") {
  const auto cfg = small_config();
  nn::ParamStore store(3);
  init_model(store, cfg);
  const Scene scene = generate_scene(random_spec(ScenarioKind::straight, 9));
  const EgoScene ego = to_ego_frame(scene);
  nn::Tape t;
  const auto tok = encode_scene_tokens(t, store, cfg, ego);
  const auto fc = forecast_agents(t, store, cfg, tok);
  const auto n = static_cast<Eigen::Index>(tok.agent_source.size());
  CHECK(fc.offsets.rows() == n);
  CHECK(fc.offsets.cols() == static_cast<Eigen::Index>(cfg.modes * 2 * cfg.horizon));
  CHECK(fc.scores.rows() == n);
  for (Eigen::Index r = 0; r < n; ++r) CHECK(std::abs(fc.scores.value().row(r).sum() - 1.0) < 1e-12);
  const auto loss = motion_loss(fc, ego);
  CHECK(std::isfinite(static_cast<double>(loss.scalar())));
  if (n > 0) {
    CHECK(loss.scalar() > 0);
    CHECK(fc.trajectory(ego, 0, 0).size() == cfg.horizon);
  }

  EgoScene lonely;
  nn::Tape t2;
  const auto tok2 = encode_scene_tokens(t2, store, cfg, lonely);
  const auto fc2 = forecast_agents(t2, store, cfg, tok2);
  CHECK(motion_loss(fc2, lonely).scalar() == 0.0);
}
