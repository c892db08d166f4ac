#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ntt/scene.hpp"

namespace ntt {

// Road geometry: two lanes per direction, ego in the inner lane of its
// direction. In the road frame the ego lane centerline is y = 0.
inline constexpr double kLaneWidth = 3.5;
inline constexpr double kRoadHalfWidth = 7.0;

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::straight;
  double curvature = 0.0;    // 1/m of the branch the ego takes, 0 when straight
  std::size_t agent_count = 0;
  double ego_speed = 8.0;    // m/s
  std::uint64_t seed = 0;
  double turn_start = 4.0;   // m ahead of the ego where the junction begins
  double route_sigma = 2.0;  // lateral and along-track route noise, m
  std::string id = "scene";
};

/// Draws a random spec of `kind` from `seed`: speed in [6, 9] m/s, turn
/// radii in [15, 30] m, junction start in [0, 6] m, 0 to 6 agents.
ScenarioSpec random_spec(ScenarioKind kind, std::uint64_t seed, double route_sigma = 2.0);

/// Builds one scene. When not every requested agent can be placed without
/// touching the ego ground truth, fewer agents are kept and a message is
/// appended to `warnings` (if given).
Scene generate_scene(const ScenarioSpec& spec, std::vector<std::string>* warnings = nullptr);

struct DatasetConfig {
  std::size_t train_scenes = 512;
  std::size_t val_scenes = 128;
  std::uint64_t seed = 0;
  double turn_fraction = 0.5;  // split evenly between left and right turns
  double route_sigma = 2.0;
};

struct Dataset {
  std::vector<Scene> train;
  std::vector<Scene> val;
};

/// Exact per-kind counts for `total` scenes: turns get turn_fraction split
/// in halves, straight and intersection share the rest, largest remainder
/// rounding. Order: straight, left_turn, right_turn, intersection.
std::vector<std::size_t> stratified_counts(std::size_t total, double turn_fraction);

Dataset generate_dataset(const DatasetConfig& config, std::vector<std::string>* warnings = nullptr);

/// Writes train.jsonl, val.jsonl and manifest.json into `dir`.
void write_dataset(const Dataset& dataset, const DatasetConfig& config,
                   const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

std::string dataset_config_json(const DatasetConfig& config);

/// Scenes whose ground-truth lateral displacement exceeds 2 m.
std::vector<Scene> turning_subset(const std::vector<Scene>& scenes);

}  // namespace ntt
