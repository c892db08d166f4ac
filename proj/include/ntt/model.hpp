#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ntt/navpath.hpp"
#include "ntt/neural/params.hpp"
#include "ntt/scene.hpp"

namespace ntt {

// Positions fed to (and decoded by) the networks are expressed in units of
// kPositionScale meters; speeds in units of kSpeedScale m/s.
inline constexpr double kPositionScale = 10.0;
inline constexpr double kSpeedScale = 10.0;
inline constexpr double kSizeScale = 5.0;

struct CandidateConfig {
  double along_step = 1.0;
  std::vector<double> lateral_offsets{-1.0, 0.0, 1.0};
  double centerline_range = 30.0;
  double fallback_range = 30.0;
  double fallback_halfwidth = 3.0;
  double grid_step = 2.0;
  double dedup_radius = 0.1;
  std::size_t max_candidates = 256;
};

struct ModelConfig {
  Eigen::Index d = 64;
  std::size_t horizon = kHorizonSteps;
  std::size_t modes = 6;  // forecast modes per agent
  std::size_t nav_segments = kNavSegments;
  double route_spacing = kRouteSpacing;
  std::size_t map_tokens = 16;
  std::size_t agent_tokens = 16;  // includes the ego status row
  CandidateConfig candidates;
};

// Feature widths of the token encoders.
inline constexpr Eigen::Index kMapFeatureWidth = 6 + static_cast<Eigen::Index>(kMapKindCount);
inline constexpr Eigen::Index kAgentFeatureWidth = 8 + static_cast<Eigen::Index>(kAgentCategoryCount) + 1;
inline constexpr Eigen::Index kNavFeatureWidth = 4;

/// Perceptron layouts shared by initialization and the forward passes.
struct ModelLayout {
  nn::MlpSpec map_encoder;
  nn::MlpSpec agent_encoder;
  nn::MlpSpec motion_head;
  nn::MlpSpec nav_layer1;  // g_n, first vector layer
  nn::MlpSpec nav_layer2;  // g_n, second vector layer
  nn::MlpSpec ego_encoder;        // g_e
  nn::MlpSpec candidate_encoder;  // g_1
  nn::MlpSpec candidate_fusion;   // g_2
  nn::MlpSpec candidate_scorer;   // g_3
  nn::MlpSpec target_encoder;     // g_4
  nn::MlpSpec trajectory_decoder; // g_5
  std::string motion_attention = "motion.attn";
  std::string target_attention = "planner.target_attn";
  std::string ego_attention = "planner.ego_attn";
  std::string command_embedding = "planner.cmd_embed";
  std::string intent_embedding = "planner.intent_embed";

  explicit ModelLayout(const ModelConfig& cfg);
};

/// Creates every model parameter in `store`.
void init_model(nn::ParamStore& store, const ModelConfig& cfg);

/// True for parameters trained in stage 1 (scene tokens and motion head).
bool is_stage1_parameter(const std::string& name);

}  // namespace ntt
