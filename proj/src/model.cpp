#include "ntt/model.hpp"

#include <stdexcept>

namespace ntt {

ModelLayout::ModelLayout(const ModelConfig& cfg) {
  const Eigen::Index d = cfg.d;
  if (d < 2 || d % 2 != 0) throw std::invalid_argument("model width must be even");
  const Eigen::Index h = d / 2;
  const auto k2 = static_cast<Eigen::Index>(2 * cfg.horizon);
  const auto modes = static_cast<Eigen::Index>(cfg.modes);

  map_encoder = {"scene.map_enc", {kMapFeatureWidth, d, d}, true};
  agent_encoder = {"scene.agent_enc", {kAgentFeatureWidth, d, d}, false};
  motion_head = {"motion.head", {2 * d, d, modes * (k2 + 1)}, false};

  nav_layer1 = {"planner.nav_g1", {kNavFeatureWidth, h}, true};
  nav_layer2 = {"planner.nav_g2", {d, h}, true};
  ego_encoder = {"planner.g_e", {2, d}, false};
  candidate_encoder = {"planner.g1", {2, d}, true};
  candidate_fusion = {"planner.g2", {2 * d, d}, true};
  candidate_scorer = {"planner.g3", {3 * d, 1}, false};
  target_encoder = {"planner.g4", {2, d, d}, false};
  trajectory_decoder = {"planner.g5", {2 * d, d, d, k2}, false};
}

void init_model(nn::ParamStore& store, const ModelConfig& cfg) {
  const ModelLayout layout(cfg);
  for (const auto* spec :
       {&layout.map_encoder, &layout.agent_encoder, &layout.motion_head, &layout.nav_layer1,
        &layout.nav_layer2, &layout.ego_encoder, &layout.candidate_encoder,
        &layout.candidate_fusion, &layout.candidate_scorer, &layout.target_encoder,
        &layout.trajectory_decoder}) {
    nn::add_mlp(store, *spec);
  }
  nn::add_attention(store, layout.motion_attention, cfg.d);
  nn::add_attention(store, layout.target_attention, cfg.d);
  nn::add_attention(store, layout.ego_attention, cfg.d);
  store.add(layout.command_embedding, 3, cfg.d, nn::Init::fan_in_uniform);
  store.add(layout.intent_embedding, 1, cfg.d, nn::Init::fan_in_uniform);
}

bool is_stage1_parameter(const std::string& name) {
  return name.starts_with("scene.") || name.starts_with("motion.");
}

}  // namespace ntt
