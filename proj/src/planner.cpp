#include "ntt/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "ntt/objectives.hpp"

namespace ntt {

using nn::Tensor;
using nn::Var;

std::string_view to_string(PlanMode mode) {
  switch (mode) {
    case PlanMode::tgt_path: return "tgt_path";
    case PlanMode::tgt_cmd: return "tgt_cmd";
    case PlanMode::tgt_emb: return "tgt_emb";
    case PlanMode::no_target: return "no_target";
  }
  throw std::invalid_argument("unknown plan mode");
}

PlanMode plan_mode_from_string(std::string_view name) {
  for (auto m : {PlanMode::tgt_path, PlanMode::tgt_cmd, PlanMode::tgt_emb, PlanMode::no_target}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown plan mode: " + std::string(name));
}

DrivingCommand route_command(const std::vector<NavNode>& nodes) {
  double turn = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double a = std::atan2(nodes[i - 1].sin_h, nodes[i - 1].cos_h);
    const double b = std::atan2(nodes[i].sin_h, nodes[i].cos_h);
    turn += wrap_angle(b - a);
  }
  const double limit = 15.0 * std::numbers::pi / 180.0;
  if (turn > limit) return DrivingCommand::left;
  if (turn < -limit) return DrivingCommand::right;
  return DrivingCommand::straight;
}

namespace {

// Cap priority: on-centerline points, then the forward grid, then lateral copies.
enum Tier { kOnLine = 0, kGrid = 1, kLateral = 2 };

void push_unique(CandidateSet& set, std::vector<int>& tiers, Point2 p, CandidateSource src, int tier,
                 double radius) {
  for (const auto& q : set.coords) {
    if (distance(p, q) < radius) return;
  }
  set.coords.push_back(p);
  set.source.push_back(src);
  tiers.push_back(tier);
}

Tensor nav_features(const std::vector<NavNode>& nodes) {
  Tensor x(static_cast<Eigen::Index>(nodes.size()), kNavFeatureWidth);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = nodes[i].d.x / kPositionScale;
    x(r, 1) = nodes[i].d.y / kPositionScale;
    x(r, 2) = nodes[i].cos_h;
    x(r, 3) = nodes[i].sin_h;
  }
  return x;
}

Tensor point_row(Point2 p) {
  Tensor t(1, 2);
  t << p.x / kPositionScale, p.y / kPositionScale;
  return t;
}

// [g(F), pool(g(F)) on every row]
Var vector_layer(nn::Tape& tape, const nn::ParamStore& store, const nn::MlpSpec& spec, Var f) {
  const Var g = nn::mlp_apply(tape, store, spec, f);
  return nn::concat_cols({g, nn::repeat_rows(nn::max_pool_rows(g), g.rows())});
}

Var decode(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
           const ModelLayout& layout, Var query, Var context) {
  const Var attended = nn::cross_attention(tape, store, layout.ego_attention, query, context, context);
  const Var flat = nn::mlp_apply(tape, store, layout.trajectory_decoder, nn::concat_cols({query, attended}));
  return nn::scale(nn::reshape(flat, static_cast<Eigen::Index>(cfg.horizon), 2), kPositionScale);
}

}  // namespace

CandidateSet sample_candidates(const EgoScene& scene, const CandidateConfig& cfg) {
  if (cfg.along_step <= 0.0 || cfg.grid_step <= 0.0) {
    throw std::invalid_argument("candidate steps must be positive");
  }
  CandidateSet set;
  std::vector<int> tiers;
  for (const auto& e : scene.map) {
    if (e.kind != MapKind::lane_centerline) continue;
    const auto& pts = e.geometry.points();
    const auto cum = e.geometry.cumulative_lengths();
    const double total = cum.back();
    std::size_t seg = 0;
    for (double s = 0.0; s <= total + 1e-9; s += cfg.along_step) {
      while (seg + 2 < pts.size() && (cum[seg + 1] < s || cum[seg + 1] == cum[seg])) ++seg;
      const Point2 dir = pts[seg + 1] - pts[seg];
      const double len = norm(dir);
      if (len == 0.0) continue;
      const Point2 normal{-dir.y / len, dir.x / len};
      const Point2 base = e.geometry.point_at(s);
      for (double w : cfg.lateral_offsets) {
        const Point2 p = base + w * normal;
        if (p.x < 0.0 || norm(p) > cfg.centerline_range) continue;
        push_unique(set, tiers, p, CandidateSource::centerline, w == 0.0 ? kOnLine : kLateral, cfg.dedup_radius);
      }
    }
  }
  const auto nx = static_cast<int>(std::floor(cfg.fallback_range / cfg.grid_step + 1e-9));
  const auto ny = static_cast<int>(std::floor(2.0 * cfg.fallback_halfwidth / cfg.grid_step + 1e-9));
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      const Point2 p{i * cfg.grid_step, -cfg.fallback_halfwidth + j * cfg.grid_step};
      push_unique(set, tiers, p, CandidateSource::forward_fallback, kGrid, cfg.dedup_radius);
    }
  }
  if (set.size() > cfg.max_candidates) {
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (tiers[a] != tiers[b]) return tiers[a] < tiers[b];
      return norm(set.coords[a]) < norm(set.coords[b]);
    });
    order.resize(cfg.max_candidates);
    std::sort(order.begin(), order.end());
    CandidateSet capped;
    for (auto i : order) {
      capped.coords.push_back(set.coords[i]);
      capped.source.push_back(set.source[i]);
    }
    set = std::move(capped);
  }
  return set;
}

NavContext build_nav_context(const EgoScene& scene, const ModelConfig& cfg) {
  NavContext nav;
  const Polyline route = interpolate_route(scene.route, cfg.route_spacing);
  nav.window = select_window(route, Point2{}, cfg.nav_segments);
  nav.nodes = vectorize_window(nav.window);
  nav.ego_in_window = ego_in_window_frame(nav.window, Point2{});
  nav.command = route_command(nav.nodes);
  return nav;
}

Var encode_nav_instance(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                        const std::vector<NavNode>& nodes, Point2 ego_in_window) {
  if (nodes.empty()) throw std::invalid_argument("encode_nav_instance: no navigation nodes");
  const ModelLayout layout(cfg);
  Var f = tape.constant(nav_features(nodes));
  f = vector_layer(tape, store, layout.nav_layer1, f);
  f = vector_layer(tape, store, layout.nav_layer2, f);
  const Var ego = nn::mlp_apply(tape, store, layout.ego_encoder, tape.constant(point_row(ego_in_window)));
  return nn::add(nn::max_pool_rows(f), ego);
}

Var intent_feature(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                   PlanMode mode, const NavContext& nav) {
  const ModelLayout layout(cfg);
  switch (mode) {
    case PlanMode::tgt_path:
    case PlanMode::no_target:
      return encode_nav_instance(tape, store, cfg, nav.nodes, nav.ego_in_window);
    case PlanMode::tgt_cmd:
      return nn::slice_rows(tape.parameter(store, layout.command_embedding),
                            static_cast<Eigen::Index>(nav.command), 1);
    case PlanMode::tgt_emb:
      return tape.parameter(store, layout.intent_embedding);
  }
  throw std::invalid_argument("unknown plan mode");
}

Var score_candidates(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                     const CandidateSet& candidates, Var intent, Var context) {
  if (candidates.empty()) throw std::invalid_argument("score_candidates: empty candidate set");
  if (intent.rows() != 1 || intent.cols() != cfg.d) {
    throw std::invalid_argument("score_candidates: intent feature must be 1 x d");
  }
  const ModelLayout layout(cfg);
  const auto n = static_cast<Eigen::Index>(candidates.size());
  // Rows are processed in lexicographic coordinate order and mapped back, so
  // permuting the candidates permutes the probabilities bit for bit.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto& pts = candidates.coords;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const Point2 pa = pts[static_cast<std::size_t>(a)];
    const Point2 pb = pts[static_cast<std::size_t>(b)];
    return pa.x < pb.x || (pa.x == pb.x && pa.y < pb.y);
  });
  std::vector<Eigen::Index> back(order.size());
  Tensor coords(n, 2);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = order[static_cast<std::size_t>(r)];
    coords.row(r) = point_row(pts[static_cast<std::size_t>(i)]);
    back[static_cast<std::size_t>(i)] = r;
  }
  const Var p = nn::repeat_rows(intent, n);
  const Var f = nn::mlp_apply(tape, store, layout.candidate_encoder, tape.constant(std::move(coords)));
  const Var f1 = nn::mlp_apply(tape, store, layout.candidate_fusion, nn::concat_cols({f, p}));
  const Var f2 = nn::cross_attention(tape, store, layout.target_attention, f1, context, context);
  const Var logits = nn::mlp_apply(tape, store, layout.candidate_scorer, nn::concat_cols({p, f1, f2}));
  const Var probs = nn::softmax_rows(nn::transpose(logits));
  return nn::transpose(nn::gather_rows(nn::transpose(probs), back));
}

std::size_t select_target_index(const std::vector<double>& probs) {
  if (probs.empty()) throw std::invalid_argument("select_target: empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

Point2 select_target(const std::vector<double>& probs, const CandidateSet& candidates) {
  if (probs.size() != candidates.size()) throw std::invalid_argument("select_target: size mismatch");
  return candidates.coords[select_target_index(probs)];
}

Var complete_trajectory(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                        Point2 target, Var intent, Var context) {
  const ModelLayout layout(cfg);
  const Var q = nn::add(intent, nn::mlp_apply(tape, store, layout.target_encoder,
                                              tape.constant(point_row(target))));
  return decode(tape, store, cfg, layout, q, context);
}

Var direct_trajectory(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                      Var intent, Var context) {
  const ModelLayout layout(cfg);
  return decode(tape, store, cfg, layout, intent, context);
}

PlanResult plan(const Scene& scene, const nn::ParamStore& store, const ModelConfig& cfg,
                PlanMode mode) {
  return plan(to_ego_frame(scene), store, cfg, mode);
}

PlanResult plan(const EgoScene& scene, const nn::ParamStore& store, const ModelConfig& cfg,
                PlanMode mode) {
  nn::Tape tape;
  const SceneTokens tokens = encode_scene_tokens(tape, store, cfg, scene);
  const Var context = tokens.context();
  const NavContext nav = build_nav_context(scene, cfg);
  const Var intent = intent_feature(tape, store, cfg, mode, nav);

  PlanResult out;
  Var traj;
  if (mode == PlanMode::no_target) {
    traj = direct_trajectory(tape, store, cfg, intent, context);
  } else {
    out.candidates = sample_candidates(scene, cfg.candidates);
    const Var probs = score_candidates(tape, store, cfg, out.candidates, intent, context);
    const Tensor& pv = probs.value();
    out.probs.assign(pv.data(), pv.data() + pv.size());
    out.target = select_target(out.probs, out.candidates);
    traj = complete_trajectory(tape, store, cfg, *out.target, intent, context);
  }
  out.trajectory.points = rows_to_points(traj.value());
  return out;
}

std::string plan_record_json(const std::string& scene_id, PlanMode mode, const PlanResult& result) {
  using nlohmann::json;
  const auto pt = [](Point2 p) { return json::array({p.x, p.y}); };
  json rec;
  rec["scene_id"] = scene_id;
  rec["mode"] = std::string(to_string(mode));
  rec["target"] = result.target ? pt(*result.target) : json(nullptr);
  std::vector<std::size_t> order(result.probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t top = std::min<std::size_t>(10, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (result.probs[a] != result.probs[b]) return result.probs[a] > result.probs[b];
                      return a < b;
                    });
  json cands = json::array();
  for (std::size_t i = 0; i < top; ++i) {
    const auto idx = order[i];
    cands.push_back({{"point", pt(result.candidates.coords[idx])},
                     {"prob", result.probs[idx]},
                     {"source", result.candidates.source[idx] == CandidateSource::centerline
                                    ? "centerline"
                                    : "forward_fallback"}});
  }
  rec["top_candidates"] = std::move(cands);
  rec["candidate_count"] = result.candidates.size();
  json traj = json::array();
  for (const auto& p : result.trajectory.points) traj.push_back(pt(p));
  rec["trajectory"] = std::move(traj);
  rec["dt"] = result.trajectory.dt;
  return rec.dump();
}

}  // namespace ntt
