#include "ntt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ntt/neural/gradcheck.hpp"
#include "ntt/neural/optim.hpp"
#include "ntt/scene_tokens.hpp"
#include "ntt/simworld.hpp"

namespace ntt {

using nlohmann::json;
using nn::Tensor;
using nn::Var;

namespace {

json model_to_json(const ModelConfig& m) {
  const auto& c = m.candidates;
  return {{"d", m.d},
          {"horizon", m.horizon},
          {"modes", m.modes},
          {"nav_segments", m.nav_segments},
          {"route_spacing", m.route_spacing},
          {"map_tokens", m.map_tokens},
          {"agent_tokens", m.agent_tokens},
          {"candidates",
           {{"along_step", c.along_step},
            {"lateral_offsets", c.lateral_offsets},
            {"centerline_range", c.centerline_range},
            {"fallback_range", c.fallback_range},
            {"fallback_halfwidth", c.fallback_halfwidth},
            {"grid_step", c.grid_step},
            {"dedup_radius", c.dedup_radius},
            {"max_candidates", c.max_candidates}}}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.d = j.at("d").get<Eigen::Index>();
  m.horizon = j.at("horizon").get<std::size_t>();
  m.modes = j.at("modes").get<std::size_t>();
  m.nav_segments = j.at("nav_segments").get<std::size_t>();
  m.route_spacing = j.at("route_spacing").get<double>();
  m.map_tokens = j.at("map_tokens").get<std::size_t>();
  m.agent_tokens = j.at("agent_tokens").get<std::size_t>();
  const auto& c = j.at("candidates");
  m.candidates.along_step = c.at("along_step").get<double>();
  m.candidates.lateral_offsets = c.at("lateral_offsets").get<std::vector<double>>();
  m.candidates.centerline_range = c.at("centerline_range").get<double>();
  m.candidates.fallback_range = c.at("fallback_range").get<double>();
  m.candidates.fallback_halfwidth = c.at("fallback_halfwidth").get<double>();
  m.candidates.grid_step = c.at("grid_step").get<double>();
  m.candidates.dedup_radius = c.at("dedup_radius").get<double>();
  m.candidates.max_candidates = c.at("max_candidates").get<std::size_t>();
  return m;
}

std::string fixed(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

// Trajectory of the most probable mode for each kept agent.
std::vector<std::vector<Point2>> forecast_futures(const MotionForecast& f, const EgoScene& scene) {
  std::vector<std::vector<Point2>> out;
  const Tensor& scores = f.scores.value();
  for (std::size_t row = 0; row < f.agent_source.size(); ++row) {
    Eigen::Index best = 0;
    scores.row(static_cast<Eigen::Index>(row)).maxCoeff(&best);
    out.push_back(f.trajectory(scene, row, static_cast<std::size_t>(best)));
  }
  return out;
}

}  // namespace

PreparedScene prepare_scene(const Scene& scene, const ModelConfig& cfg) {
  PreparedScene p;
  p.id = scene.meta.id;
  p.scene = to_ego_frame(scene);
  p.nav = build_nav_context(p.scene, cfg);
  p.candidates = sample_candidates(p.scene, cfg.candidates);
  p.label = target_label(p.candidates.coords, p.scene.ego_gt.back());
  for (const auto& a : p.scene.agents) p.agent_futures.push_back(a.future_gt);
  for (const auto& e : p.scene.map) {
    if (e.kind == MapKind::road_boundary) p.boundaries.push_back(e.geometry);
    if (e.kind == MapKind::lane_divider) p.dividers.push_back(e.geometry);
  }
  return p;
}

std::vector<PreparedScene> prepare_scenes(const std::vector<Scene>& scenes, const ModelConfig& cfg) {
  std::vector<PreparedScene> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back(prepare_scene(s, cfg));
  return out;
}

SceneLoss scene_loss(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                     const PreparedScene& ps, PlanMode mode, int stage, const LossOptions& options) {
  const StageWeights sw = stage_weights(stage);
  const SceneTokens tokens = encode_scene_tokens(tape, store, cfg, ps.scene);
  const MotionForecast forecast = forecast_agents(tape, store, cfg, tokens);

  SceneLoss out;
  out.agent = motion_loss(forecast, ps.scene);
  out.target = tape.scalar(0.0);
  out.plan = tape.scalar(0.0);
  const Var map_loss = tape.scalar(0.0);
  if (sw.target != 0.0 || sw.plan != 0.0) {
    const Var context = tokens.context();
    const Var intent = intent_feature(tape, store, cfg, mode, ps.nav);
    Var traj;
    if (mode == PlanMode::no_target) {
      traj = direct_trajectory(tape, store, cfg, intent, context);
    } else {
      const Var probs = score_candidates(tape, store, cfg, ps.candidates, intent, context);
      out.target = target_bce(probs, ps.label);
      std::size_t chosen = ps.label;
      if (!options.teacher_forcing) {
        const Tensor& pv = probs.value();
        chosen = select_target_index(std::vector<double>(pv.data(), pv.data() + pv.size()));
      }
      traj = complete_trajectory(tape, store, cfg, ps.candidates.coords[chosen], intent, context);
    }
    const auto& w = options.weights;
    out.terms.col = collision_term(
        traj, options.collision_uses_gt ? ps.agent_futures : forecast_futures(forecast, ps.scene), w.alpha_col);
    out.terms.bd = boundary_term(traj, ps.boundaries, w.alpha_bd);
    out.terms.dir = direction_term(traj, ps.dividers);
    out.terms.reg = regression_term(traj, ps.scene.ego_gt);
    out.plan = planning_loss(out.terms, w);
    out.has_plan = true;
  }
  out.total = overall_loss(map_loss, out.agent, out.target, out.plan, stage);
  return out;
}

std::string train_config_json(const TrainConfig& c) {
  json j{{"epochs1", c.epochs1},
         {"epochs2", c.epochs2},
         {"batch_size", c.batch_size},
         {"base_lr", c.base_lr},
         {"min_lr_ratio", c.min_lr_ratio},
         {"weight_decay", c.weight_decay},
         {"seed", c.seed},
         {"mode", std::string(to_string(c.mode))},
         {"collision_uses_gt", c.loss.collision_uses_gt},
         {"teacher_forcing", c.loss.teacher_forcing},
         {"weights",
          {{"w_col", c.loss.weights.w_col},
           {"w_bd", c.loss.weights.w_bd},
           {"w_dir", c.loss.weights.w_dir},
           {"w_reg", c.loss.weights.w_reg},
           {"alpha_col", c.loss.weights.alpha_col},
           {"alpha_bd", c.loss.weights.alpha_bd}}},
         {"model", model_to_json(c.model)}};
  return j.dump();
}

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& records) {
  out << "step,stage,lr,total,agent,target,plan,col,bd,dir,reg\n";
  for (const auto& r : records) {
    out << r.step << ',' << r.stage << ',' << fixed(r.lr) << ',' << fixed(r.total) << ','
        << fixed(r.agent) << ',' << fixed(r.target) << ',' << fixed(r.plan) << ',' << fixed(r.col)
        << ',' << fixed(r.bd) << ',' << fixed(r.dir) << ',' << fixed(r.reg) << '\n';
  }
}

TrainingDiverged::TrainingDiverged(int stage_, std::size_t step_)
    : std::runtime_error("loss became non-finite at stage " + std::to_string(stage_) + " step " +
                         std::to_string(step_)),
      stage(stage_),
      step(step_) {}

std::vector<LossRecord> train_stage(nn::ParamStore& store, const std::vector<PreparedScene>& data,
                                    const TrainConfig& config, int stage, std::size_t epochs) {
  if (data.empty()) throw std::invalid_argument("training set is empty");
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(config.base_lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  const std::size_t batches = (data.size() + config.batch_size - 1) / config.batch_size;
  const nn::LrSchedule schedule{config.base_lr, config.base_lr * config.min_lr_ratio,
                                std::max<std::size_t>(1, epochs * batches)};
  nn::AdamWOptions opt;
  opt.weight_decay = config.weight_decay;
  std::vector<bool> active(store.size(), true);
  if (stage == 1) {
    for (std::size_t i = 0; i < store.size(); ++i) active[i] = is_stage1_parameter(store.names()[i]);
  }
  nn::AdamState state = nn::AdamState::for_store(store);
  std::mt19937_64 rng(config.seed * 7919 + static_cast<std::uint64_t>(stage));
  std::vector<std::size_t> order(data.size());
  std::vector<LossRecord> curve;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - begin);
      nn::Gradients grads = store.zeros_like();
      LossRecord rec;
      rec.step = step;
      rec.stage = stage;
      rec.lr = nn::cosine_lr(static_cast<std::ptrdiff_t>(step), schedule);
      for (std::size_t i = begin; i < end; ++i) {
        nn::Tape tape;
        const SceneLoss loss = scene_loss(tape, store, config.model, data[order[i]], config.mode, stage,
                                          config.loss);
        const double total = loss.total.scalar();
        if (!std::isfinite(total)) throw TrainingDiverged(stage, step);
        tape.backward(loss.total);
        const nn::Gradients g = tape.gradients(store);
        for (std::size_t p = 0; p < grads.size(); ++p) {
          if (active[p]) grads[p] += inv * g[p];
        }
        rec.total += inv * total;
        rec.agent += inv * loss.agent.scalar();
        rec.target += inv * loss.target.scalar();
        rec.plan += inv * loss.plan.scalar();
        if (loss.has_plan) {
          rec.col += inv * loss.terms.col.scalar();
          rec.bd += inv * loss.terms.bd.scalar();
          rec.dir += inv * loss.terms.dir.scalar();
          rec.reg += inv * loss.terms.reg.scalar();
        }
      }
      for (const auto& g : grads) {
        if (!g.allFinite()) throw TrainingDiverged(stage, step);
      }
      nn::adamw_step(store, grads, state, rec.lr, opt, active);
      curve.push_back(rec);
      ++step;
    }
  }
  return curve;
}

nn::ParamStore init_params(const TrainConfig& config) {
  nn::ParamStore store(config.seed);
  init_model(store, config.model);
  return store;
}

TrainResult train(const TrainConfig& config, const std::vector<Scene>& scenes) {
  if (config.epochs1 == 0 || config.epochs2 == 0) throw std::invalid_argument("epochs must be at least 1");
  const auto data = prepare_scenes(scenes, config.model);
  TrainResult r{init_params(config), {}};
  r.curve = train_stage(r.params, data, config, 1, config.epochs1);
  auto s2 = train_stage(r.params, data, config, 2, config.epochs2);
  const std::size_t offset = r.curve.size();
  for (auto& rec : s2) rec.step += offset;
  r.curve.insert(r.curve.end(), s2.begin(), s2.end());
  return r;
}

void save_checkpoint(const std::filesystem::path& dir, const nn::ParamStore& params,
                     const TrainConfig& config) {
  json extra;
  extra["mode"] = std::string(to_string(config.mode));
  extra["model"] = model_to_json(config.model);
  extra["train"] = json::parse(train_config_json(config));
  extra["schedule"] = {{"base_lr", config.base_lr},
                       {"min_lr", config.base_lr * config.min_lr_ratio},
                       {"epochs1", config.epochs1},
                       {"epochs2", config.epochs2},
                       {"batch_size", config.batch_size},
                       {"completed", true}};
  nn::save_params(params, dir, extra.dump());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  // Read the model description first to build a store of the right shape.
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot open checkpoint manifest in " + dir.string());
  const json manifest = json::parse(in);
  const json& extra = manifest.at("extra");
  Checkpoint ck{nn::ParamStore(manifest.at("seed").get<std::uint64_t>()), model_from_json(extra.at("model")),
                plan_mode_from_string(extra.at("mode").get<std::string>())};
  init_model(ck.params, ck.model);
  nn::load_params(ck.params, dir);
  return ck;
}

std::string metrics_json(const MetricsReport& r) {
  json j;
  j["version"] = "metrics_v1";
  j["subset"] = r.subset;
  j["mode"] = r.mode;
  j["l2_mode"] = r.l2_mode == L2Mode::instantaneous ? "instantaneous" : "cumulative";
  j["samples"] = r.samples;
  j["l2"] = {{"1s", r.l2[0]}, {"2s", r.l2[1]}, {"3s", r.l2[2]}, {"avg", r.l2_avg}};
  j["collision"] = {{"1s", r.collision[0]}, {"2s", r.collision[1]}, {"3s", r.collision[2]}, {"avg", r.collision_avg}};
  return j.dump(2);
}

namespace {

constexpr std::size_t kMetricSteps[3] = {1, 3, 5};  // 1 s, 2 s, 3 s at 0.5 s steps

}  // namespace

std::vector<bool> collision_flags(const Scene& scene, const std::vector<Point2>& plan) {
  if (plan.size() <= kMetricSteps[2]) throw std::invalid_argument("metric horizon exceeds the plan length");
  const EgoScene ego = to_ego_frame(scene);
  const auto ego_boxes = ego_footprints(plan);
  std::vector<bool> hit_at(plan.size(), false);
  for (const auto& a : ego.agents) {
    const auto boxes = agent_footprints(a);
    for (std::size_t i = 0; i < plan.size() && i < boxes.size(); ++i) {
      if (boxes_overlap(ego_boxes[i], boxes[i])) hit_at[i] = true;
    }
  }
  std::vector<bool> flags(3, false);
  for (std::size_t h = 0; h < 3; ++h) {
    for (std::size_t i = 0; i <= kMetricSteps[h]; ++i) flags[h] = flags[h] || hit_at[i];
  }
  return flags;
}

MetricsReport evaluate_plans(const std::vector<Scene>& scenes, const std::vector<std::vector<Point2>>& plans,
                             L2Mode l2_mode, const std::string& subset) {
  if (scenes.size() != plans.size()) throw std::invalid_argument("one plan per scene required");
  MetricsReport r;
  r.subset = subset;
  r.l2_mode = l2_mode;
  r.samples = scenes.size();
  if (scenes.empty()) return r;
  double l2_sum[3] = {0.0, 0.0, 0.0};
  std::size_t hits[3] = {0, 0, 0};
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& gt = scenes[s].ego_gt;
    const auto& plan = plans[s];
    if (plan.size() != gt.size() || plan.size() <= kMetricSteps[2]) {
      throw std::invalid_argument("metric horizon exceeds the plan length");
    }
    for (std::size_t h = 0; h < 3; ++h) {
      const std::size_t idx = kMetricSteps[h];
      if (l2_mode == L2Mode::instantaneous) {
        l2_sum[h] += distance(plan[idx], gt[idx]);
      } else {
        double acc = 0.0;
        for (std::size_t i = 0; i <= idx; ++i) acc += distance(plan[i], gt[i]);
        l2_sum[h] += acc / static_cast<double>(idx + 1);
      }
    }
    const auto flags = collision_flags(scenes[s], plan);
    for (std::size_t h = 0; h < 3; ++h) hits[h] += flags[h] ? 1 : 0;
  }
  const double n = static_cast<double>(scenes.size());
  for (std::size_t h = 0; h < 3; ++h) {
    r.l2[h] = l2_sum[h] / n;
    r.collision[h] = 100.0 * static_cast<double>(hits[h]) / n;
  }
  r.l2_avg = (r.l2[0] + r.l2[1] + r.l2[2]) / 3.0;
  r.collision_avg = (r.collision[0] + r.collision[1] + r.collision[2]) / 3.0;
  return r;
}

MetricsReport evaluate(const nn::ParamStore& params, const ModelConfig& cfg, const std::vector<Scene>& scenes,
                       PlanMode mode, L2Mode l2_mode, const std::string& subset) {
  std::vector<std::vector<Point2>> plans;
  plans.reserve(scenes.size());
  for (const auto& s : scenes) plans.push_back(plan(s, params, cfg, mode).trajectory.points);
  MetricsReport r = evaluate_plans(scenes, plans, l2_mode, subset);
  r.mode = std::string(to_string(mode));
  return r;
}

std::vector<AblationRow> run_ablation(const std::vector<Scene>& train_scenes,
                                      const std::vector<Scene>& eval_scenes,
                                      const std::vector<PlanMode>& modes,
                                      const std::vector<std::uint64_t>& seeds, const TrainConfig& base,
                                      std::ostream* log) {
  if (modes.empty() || seeds.empty()) throw std::invalid_argument("ablation needs modes and seeds");
  const auto data = prepare_scenes(train_scenes, base.model);
  const auto turning = turning_subset(eval_scenes);
  std::vector<AblationRow> rows;
  for (const auto seed : seeds) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    nn::ParamStore stage1 = init_params(cfg);
    train_stage(stage1, data, cfg, 1, cfg.epochs1);
    if (log) *log << "seed " << seed << ": stage 1 done\n" << std::flush;
    for (const auto mode : modes) {
      cfg.mode = mode;
      nn::ParamStore params = stage1;
      const auto curve = train_stage(params, data, cfg, 2, cfg.epochs2);
      rows.push_back({mode, seed, evaluate(params, cfg.model, eval_scenes, mode, L2Mode::instantaneous, "all")});
      rows.push_back({mode, seed, evaluate(params, cfg.model, turning, mode, L2Mode::instantaneous, "turning")});
      if (log) {
        *log << "seed " << seed << " " << to_string(mode) << ": final loss " << curve.back().total
             << ", avg L2 " << rows[rows.size() - 2].report.l2_avg << " / turning "
             << rows.back().report.l2_avg << ", collision " << rows[rows.size() - 2].report.collision_avg
             << " / turning " << rows.back().report.collision_avg << "\n"
             << std::flush;
      }
    }
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "mode,seed,subset,samples,l2_1s,l2_2s,l2_3s,l2_avg,col_1s,col_2s,col_3s,col_avg\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    out << to_string(row.mode) << ',' << row.seed << ',' << r.subset << ',' << r.samples << ','
        << fixed(r.l2[0]) << ',' << fixed(r.l2[1]) << ',' << fixed(r.l2[2]) << ',' << fixed(r.l2_avg)
        << ',' << fixed(r.collision[0]) << ',' << fixed(r.collision[1]) << ',' << fixed(r.collision[2])
        << ',' << fixed(r.collision_avg) << '\n';
  }
}

Scene grad_check_scene(std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    ScenarioSpec spec = random_spec(ScenarioKind::straight, seed * 1000 + attempt);
    spec.agent_count = 2;
    spec.id = "grad-check";
    Scene s = generate_scene(spec);
    if (s.agents.size() == 2) return s;
  }
}

ModelConfig grad_check_model() {
  ModelConfig m;
  m.d = 8;
  m.candidates.max_candidates = 64;
  return m;
}

nn::GradCheckReport grad_check_native(std::uint64_t seed, PlanMode mode) {
  const ModelConfig cfg = grad_check_model();
  const PreparedScene ps = prepare_scene(grad_check_scene(seed), cfg);
  nn::ParamStore store(seed);
  init_model(store, cfg);
  const nn::LossBuilder loss = [&](nn::Tape& tape, const nn::ParamStore& s) {
    return scene_loss(tape, s, cfg, ps, mode, 2).total;
  };
  return nn::finite_diff_check(loss, store);
}

#ifndef NTT_EXTENDED
nn::GradCheckReport grad_check(std::uint64_t seed, PlanMode mode) {
  const auto x = ntt_extended::grad_check(seed, std::string(to_string(mode)));
  nn::GradCheckReport r;
  r.max_rel_error = x.max_rel_error;
  r.worst_param = x.worst_param;
  r.worst_index = static_cast<Eigen::Index>(x.worst_index);
  r.analytic = x.analytic;
  r.numeric = x.numeric;
  r.coordinates = x.coordinates;
  return r;
}
#endif

}  // namespace ntt

#ifdef NTT_EXTENDED
ntt_extended::GradCheckResult ntt_extended::grad_check(std::uint64_t seed, const std::string& mode) {
  const auto r = ntt::grad_check_native(seed, ntt::plan_mode_from_string(mode));
  return {r.max_rel_error, r.worst_param, static_cast<long long>(r.worst_index),
          r.analytic, r.numeric, r.coordinates};
}
#endif
