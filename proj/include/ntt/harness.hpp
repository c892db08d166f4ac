#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntt/model.hpp"
#include "ntt/neural/gradcheck.hpp"
#include "ntt/neural/params.hpp"
#include "ntt/objectives.hpp"
#include "ntt/planner.hpp"
#include "ntt/scene.hpp"

namespace ntt {

/// Per-scene inputs computed once before training.
struct PreparedScene {
  std::string id;
  EgoScene scene;
  NavContext nav;
  CandidateSet candidates;
  std::size_t label = 0;  // candidate nearest the ground-truth endpoint
  std::vector<std::vector<Point2>> agent_futures;
  std::vector<Polyline> boundaries;
  std::vector<Polyline> dividers;
};

PreparedScene prepare_scene(const Scene& scene, const ModelConfig& cfg);
std::vector<PreparedScene> prepare_scenes(const std::vector<Scene>& scenes, const ModelConfig& cfg);

struct SceneLoss {
  nn::Var total;
  nn::Var agent;
  nn::Var target;
  nn::Var plan;
  PlanningTerms terms;
  bool has_plan = false;
};

struct LossOptions {
  LossWeights weights;
  /// Collision term against ground-truth agent futures; otherwise the most
  /// probable forecast mode of each kept agent.
  bool collision_uses_gt = true;
  /// Condition trajectory completion on the labeled candidate instead of the
  /// predicted argmax.
  bool teacher_forcing = true;
};

/// Overall loss of one scene for `stage`. In stage 1 the planner is not run
/// and the target and planning losses are zero.
SceneLoss scene_loss(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                     const PreparedScene& scene, PlanMode mode, int stage,
                     const LossOptions& options = {});

struct TrainConfig {
  std::size_t epochs1 = 20;
  std::size_t epochs2 = 40;
  std::size_t batch_size = 8;
  double base_lr = 1e-3;
  double min_lr_ratio = 0.01;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  PlanMode mode = PlanMode::tgt_path;
  LossOptions loss;
  ModelConfig model;
};

std::string train_config_json(const TrainConfig& config);

/// One row of the loss curve (batch means).
struct LossRecord {
  std::size_t step = 0;
  int stage = 1;
  double lr = 0.0;
  double total = 0.0;
  double agent = 0.0;
  double target = 0.0;
  double plan = 0.0;
  double col = 0.0;
  double bd = 0.0;
  double dir = 0.0;
  double reg = 0.0;
};

void write_loss_csv(std::ostream& out, const std::vector<LossRecord>& records);

/// Thrown when a loss becomes non-finite.
struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(int stage, std::size_t step);
  int stage;
  std::size_t step;
};

/// Runs `epochs` epochs of one stage in place. Stage 1 only updates
/// scene-token and motion parameters.
std::vector<LossRecord> train_stage(nn::ParamStore& store, const std::vector<PreparedScene>& data,
                                    const TrainConfig& config, int stage, std::size_t epochs);

nn::ParamStore init_params(const TrainConfig& config);

struct TrainResult {
  nn::ParamStore params;
  std::vector<LossRecord> curve;
};

/// Stage 1 then stage 2 from a fresh initialization.
TrainResult train(const TrainConfig& config, const std::vector<Scene>& scenes);

struct Checkpoint {
  nn::ParamStore params;
  ModelConfig model;
  PlanMode mode = PlanMode::tgt_path;
};

void save_checkpoint(const std::filesystem::path& dir, const nn::ParamStore& params,
                     const TrainConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

enum class L2Mode { instantaneous, cumulative };

struct MetricsReport {
  std::string subset = "all";
  std::string mode;
  L2Mode l2_mode = L2Mode::instantaneous;
  std::size_t samples = 0;
  double l2[3] = {0.0, 0.0, 0.0};         // 1 s, 2 s, 3 s
  double l2_avg = 0.0;
  double collision[3] = {0.0, 0.0, 0.0};  // percent
  double collision_avg = 0.0;
};

std::string metrics_json(const MetricsReport& report);

/// Per-scene collision flag at each horizon (1 s, 2 s, 3 s): true when an
/// ego box along `plan` overlaps an agent box at some step up to it.
std::vector<bool> collision_flags(const Scene& scene, const std::vector<Point2>& plan);

/// Metrics of given plans (ego frame, one per scene).
MetricsReport evaluate_plans(const std::vector<Scene>& scenes,
                             const std::vector<std::vector<Point2>>& plans,
                             L2Mode l2_mode = L2Mode::instantaneous, const std::string& subset = "all");

MetricsReport evaluate(const nn::ParamStore& params, const ModelConfig& cfg,
                       const std::vector<Scene>& scenes, PlanMode mode,
                       L2Mode l2_mode = L2Mode::instantaneous, const std::string& subset = "all");

struct AblationRow {
  PlanMode mode = PlanMode::tgt_path;
  std::uint64_t seed = 0;
  MetricsReport report;
};

/// Trains one model per (mode, seed) and evaluates each on the full
/// evaluation set and its turning subset. Stage 1 does not depend on the
/// mode and is run once per seed.
std::vector<AblationRow> run_ablation(const std::vector<Scene>& train_scenes,
                                      const std::vector<Scene>& eval_scenes,
                                      const std::vector<PlanMode>& modes,
                                      const std::vector<std::uint64_t>& seeds,
                                      const TrainConfig& base, std::ostream* log = nullptr);

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

/// Scene used by the gradient check: a straight road with its two
/// centerlines and two agents.
Scene grad_check_scene(std::uint64_t seed);
ModelConfig grad_check_model();

/// Finite-difference check of the full stage-2 loss on grad_check_scene,
/// evaluated with this build's tensor precision. In double the central
/// difference of a loss near 10 carries about 1e-10 rounding noise, which
/// swamps gradient entries below 1e-6.
nn::GradCheckReport grad_check_native(std::uint64_t seed, PlanMode mode = PlanMode::tgt_path);

/// Same check run by the long double build of the library. Same scene,
/// same initial parameters, same code.
nn::GradCheckReport grad_check(std::uint64_t seed, PlanMode mode = PlanMode::tgt_path);

}  // namespace ntt

// Entry point of the extended build, outside the renamed namespace.
namespace ntt_extended {
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  long long worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};
GradCheckResult grad_check(std::uint64_t seed, const std::string& mode);
}  // namespace ntt_extended
