#pragma once

#include <cstddef>
#include <vector>

#include "ntt/model.hpp"
#include "ntt/neural/tensor.hpp"
#include "ntt/scene.hpp"

namespace ntt {

/// Instance-level scene tokens. Row 0 of the agent block is the ego status
/// token; rows 1.. hold the kept agents in input order.
struct SceneTokens {
  nn::Var map_tokens;    // N_M x d
  nn::Var agent_tokens;  // N_A x d
  nn::Var combined;      // (N_M + N_A) x d, [map; agents]
  std::vector<bool> map_valid;
  std::vector<bool> agent_valid;
  std::vector<std::size_t> map_source;    // scene map index per valid map row
  std::vector<std::size_t> agent_source;  // scene agent index per row 1..

  /// Valid rows of `combined`, used as attention keys and values.
  nn::Var context() const;
};

struct MapTokens {
  nn::Var tokens;
  std::vector<bool> valid;
  std::vector<std::size_t> source;
};

/// Per-segment perceptron over [start, delta, cos, sin, kind one-hot] and a
/// max-pool per element. At most cfg.map_tokens elements, nearest to the
/// ego kept, empty slots zero.
MapTokens encode_map_tokens(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                            const EgoScene& scene);

struct AgentTokens {
  nn::Var tokens;
  std::vector<bool> valid;
  std::vector<std::size_t> source;
};

/// Perceptron over [position, velocity, cos/sin heading, size, category].
/// Row 0 encodes the ego itself; at most cfg.agent_tokens - 1 agents follow.
AgentTokens encode_agent_tokens(nn::Tape& tape, const nn::ParamStore& store,
                                const ModelConfig& cfg, const EgoScene& scene);

SceneTokens encode_scene_tokens(nn::Tape& tape, const nn::ParamStore& store,
                                const ModelConfig& cfg, const EgoScene& scene);

/// Raw feature rows, exposed for recomputation checks.
nn::Tensor map_element_features(const MapElement& element);
nn::Tensor agent_features(const AgentTrack& agent);
nn::Tensor ego_status_features(double ego_speed);

/// Indices of the `limit` entries with the smallest key, returned in input
/// order. Ties keep the earlier entry.
std::vector<std::size_t> nearest_indices(const std::vector<double>& keys, std::size_t limit);

/// Multimodal forecast for the kept agents (rows 1.. of the agent block).
struct MotionForecast {
  nn::Var offsets;  // n x (modes * 2k), ego frame, units of kPositionScale
  nn::Var scores;   // n x modes, rows sum to 1
  std::vector<std::size_t> agent_source;
  std::size_t modes = 0;
  std::size_t horizon = 0;

  /// Absolute ego-frame trajectory of `mode` for forecast row `row`.
  std::vector<Point2> trajectory(const EgoScene& scene, std::size_t row, std::size_t mode) const;
};

MotionForecast forecast_agents(nn::Tape& tape, const nn::ParamStore& store, const ModelConfig& cfg,
                               const SceneTokens& tokens);

/// Index of the mode whose final point is closest to the ground-truth final
/// point (lowest index on ties).
std::size_t min_fde_mode(const std::vector<std::vector<Point2>>& mode_trajectories,
                         const std::vector<Point2>& gt);

/// Mean over forecast agents of l1(minFDE mode, gt) + focal(scores, minFDE
/// mode). Zero when nothing is forecast.
nn::Var motion_loss(const MotionForecast& forecast, const EgoScene& scene, double gamma = 2.0,
                    double alpha = 0.25);

}  // namespace ntt
