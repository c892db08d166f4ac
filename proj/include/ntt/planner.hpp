#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ntt/model.hpp"
#include "ntt/navpath.hpp"
#include "ntt/neural/tensor.hpp"
#include "ntt/scene.hpp"
#include "ntt/scene_tokens.hpp"

namespace ntt {

enum class CandidateSource { centerline, forward_fallback };

struct CandidateSet {
  std::vector<Point2> coords;  // ego frame
  std::vector<CandidateSource> source;

  std::size_t size() const { return coords.size(); }
  bool empty() const { return coords.empty(); }
};

/// How the planner forms its intent feature P.
enum class PlanMode { tgt_path, tgt_cmd, tgt_emb, no_target };

std::string_view to_string(PlanMode mode);
PlanMode plan_mode_from_string(std::string_view name);

enum class DrivingCommand { left = 0, straight = 1, right = 2 };

/// Command from the accumulated heading change along the window nodes:
/// above +15 degrees is left, below -15 degrees right, otherwise straight.
DrivingCommand route_command(const std::vector<NavNode>& nodes);

/// Dense target candidates: points every along_step on each centerline
/// (ahead of the ego and within centerline_range), each replicated at the
/// lateral offsets, plus a forward grid. Deduplicated within dedup_radius
/// and capped at max_candidates: points on a centerline are kept first, then
/// the grid, then the offset copies, nearest to the ego first within each
/// group. Input order is preserved among the kept candidates.
CandidateSet sample_candidates(const EgoScene& scene, const CandidateConfig& cfg);

/// Navigation inputs of one scene, prepared once.
struct NavContext {
  NavWindow window;
  std::vector<NavNode> nodes;
  Point2 ego_in_window;
  DrivingCommand command = DrivingCommand::straight;
};

NavContext build_nav_context(const EgoScene& scene, const ModelConfig& cfg);

/// Two vector layers F^{l+1} = [g_n(F^l), pool(g_n(F^l))], then
/// P = pool(F^2) + g_e(ego position in the window frame). Returns 1 x d.
nn::Var encode_nav_instance(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                            const std::vector<NavNode>& nodes, Point2 ego_in_window);

/// Intent feature P for `mode`: the navigation encoding (tgt_path and
/// no_target), a per-command embedding (tgt_cmd) or one learned embedding
/// (tgt_emb).
nn::Var intent_feature(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                       PlanMode mode, const NavContext& nav);

/// softmax(g_3([P, F_1, F_2])) with F = g_1(coords), F_1 = g_2([F, P]) and
/// F_2 = attention(F_1, context, context). Returns 1 x N_t.
nn::Var score_candidates(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                         const CandidateSet& candidates, nn::Var intent, nn::Var context);

/// Argmax of `probs` (lowest index on ties).
std::size_t select_target_index(const std::vector<double>& probs);
Point2 select_target(const std::vector<double>& probs, const CandidateSet& candidates);

/// T = g_5([Q, attention(Q, context, context)]) with Q = P + g_4(target).
/// Returns k x 2 in meters, ego frame.
nn::Var complete_trajectory(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                            Point2 target, nn::Var intent, nn::Var context);

/// Trajectory decoded straight from P as the attention query (no target).
nn::Var direct_trajectory(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                          nn::Var intent, nn::Var context);

struct PlanResult {
  PlannedTrajectory trajectory;
  std::vector<double> probs;  // aligned with candidates
  CandidateSet candidates;
  std::optional<Point2> target;  // empty in no_target mode
};

/// Full inference: tokens, navigation window, candidates, scoring, target
/// selection and trajectory completion.
PlanResult plan(const Scene& scene, const nn::ParamStore& store, const ModelConfig& cfg,
                PlanMode mode);
PlanResult plan(const EgoScene& scene, const nn::ParamStore& store, const ModelConfig& cfg,
                PlanMode mode);

/// JSON plan record: scene id, mode, target, the ten most probable
/// candidates and the trajectory.
std::string plan_record_json(const std::string& scene_id, PlanMode mode, const PlanResult& result);

}  // namespace ntt
