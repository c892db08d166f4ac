#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ntt/geometry.hpp"

namespace ntt {

/// Number of planned / forecast future steps.
inline constexpr std::size_t kHorizonSteps = 6;
inline constexpr double kStepSeconds = 0.5;

// Ego footprint used by the collision-rate metric.
inline constexpr double kEgoLength = 4.0;
inline constexpr double kEgoWidth = 1.8;

enum class MapKind { lane_divider, road_boundary, pedestrian_crossing, lane_centerline };
inline constexpr std::size_t kMapKindCount = 4;

enum class AgentCategory { car, truck, pedestrian };
inline constexpr std::size_t kAgentCategoryCount = 3;

enum class ScenarioKind { straight, left_turn, right_turn, intersection };
inline constexpr std::size_t kScenarioKindCount = 4;

std::string_view to_string(MapKind kind);
std::string_view to_string(AgentCategory category);
std::string_view to_string(ScenarioKind kind);
MapKind map_kind_from_string(std::string_view name);
AgentCategory agent_category_from_string(std::string_view name);
ScenarioKind scenario_kind_from_string(std::string_view name);

struct MapElement {
  MapKind kind = MapKind::lane_centerline;
  Polyline geometry;
};

struct AgentTrack {
  Pose2 current;
  Point2 velocity;
  double length = 4.5;
  double width = 1.9;
  std::vector<Point2> future_gt;  // kHorizonSteps points, world frame
  AgentCategory category = AgentCategory::car;
};

struct SceneMeta {
  std::string id;
  ScenarioKind kind = ScenarioKind::straight;
};

/// One driving sample. Map, agents and route are stored in the world frame;
/// `ego_gt` is stored in the t=0 ego frame.
struct Scene {
  Pose2 ego;
  Point2 ego_velocity;
  std::vector<AgentTrack> agents;
  std::vector<MapElement> map;
  Polyline route;
  std::vector<Point2> ego_gt;
  SceneMeta meta;
  bool no_centerline = false;
};

/// A planned ego trajectory in the t=0 ego frame.
struct PlannedTrajectory {
  std::vector<Point2> points;
  double dt = kStepSeconds;
};

/// Ego boxes along a planned trajectory. Box i is headed along
/// p_i - p_{i-1}; the first box keeps the t=0 heading (+x).
std::vector<OrientedBox> ego_footprints(const std::vector<Point2>& plan);

/// Agent boxes at each future step, headed along the agent's own motion
/// (current heading while it stands still).
std::vector<OrientedBox> agent_footprints(const AgentTrack& agent);

/// Throws std::invalid_argument when the scene breaks a structural invariant.
void validate_scene(const Scene& scene, std::size_t horizon = kHorizonSteps);

bool has_centerline(const Scene& scene);

/// Scene with every element expressed in the t=0 ego frame.
struct EgoScene {
  double ego_speed = 0.0;
  std::vector<AgentTrack> agents;
  std::vector<MapElement> map;
  Polyline route;
  std::vector<Point2> ego_gt;
};

EgoScene to_ego_frame(const Scene& scene);

// JSONL serialization, one scene per line, version tag "scene_v1".
std::string scene_to_json_line(const Scene& scene);
Scene scene_from_json_line(std::string_view line);
void write_scenes_jsonl(std::ostream& out, const std::vector<Scene>& scenes);
std::vector<Scene> read_scenes_jsonl(std::istream& in);
std::vector<Scene> read_scenes_jsonl(const std::string& path);

}  // namespace ntt
