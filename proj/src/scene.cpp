#include "ntt/scene.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace ntt {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kMapKindCount> kMapKindNames{
    "lane_divider", "road_boundary", "pedestrian_crossing", "lane_centerline"};
constexpr std::array<std::string_view, kAgentCategoryCount> kCategoryNames{"car", "truck",
                                                                           "pedestrian"};
constexpr std::array<std::string_view, kScenarioKindCount> kScenarioNames{
    "straight", "left_turn", "right_turn", "intersection"};

template <typename Enum, std::size_t N>
Enum lookup(const std::array<std::string_view, N>& names, std::string_view name,
            const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<Enum>(i);
  }
  throw std::invalid_argument(std::string("unknown ") + what + ": " + std::string(name));
}

json point_json(Point2 p) { return json::array({p.x, p.y}); }

Point2 point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json points_json(const std::vector<Point2>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(point_json(p));
  return arr;
}

std::vector<Point2> points_from(const json& j) {
  std::vector<Point2> pts;
  pts.reserve(j.size());
  for (const auto& p : j) pts.push_back(point_from(p));
  return pts;
}

json pose_json(const Pose2& pose) {
  return {{"position", point_json(pose.position)}, {"heading", pose.heading}};
}

Pose2 pose_from(const json& j) {
  return {point_from(j.at("position")), j.at("heading").get<double>()};
}

}  // namespace

std::string_view to_string(MapKind kind) { return kMapKindNames.at(static_cast<std::size_t>(kind)); }
std::string_view to_string(AgentCategory category) {
  return kCategoryNames.at(static_cast<std::size_t>(category));
}
std::string_view to_string(ScenarioKind kind) {
  return kScenarioNames.at(static_cast<std::size_t>(kind));
}
MapKind map_kind_from_string(std::string_view name) {
  return lookup<MapKind>(kMapKindNames, name, "map kind");
}
AgentCategory agent_category_from_string(std::string_view name) {
  return lookup<AgentCategory>(kCategoryNames, name, "agent category");
}
ScenarioKind scenario_kind_from_string(std::string_view name) {
  return lookup<ScenarioKind>(kScenarioNames, name, "scenario kind");
}

bool has_centerline(const Scene& scene) {
  for (const auto& e : scene.map) {
    if (e.kind == MapKind::lane_centerline) return true;
  }
  return false;
}

std::vector<OrientedBox> ego_footprints(const std::vector<Point2>& plan) {
  std::vector<OrientedBox> boxes;
  boxes.reserve(plan.size());
  double heading = 0.0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (i > 0) {
      const Point2 step = plan[i] - plan[i - 1];
      if (norm(step) > 0.0) heading = std::atan2(step.y, step.x);
    }
    boxes.push_back({plan[i], heading, kEgoLength, kEgoWidth});
  }
  return boxes;
}

std::vector<OrientedBox> agent_footprints(const AgentTrack& agent) {
  std::vector<OrientedBox> boxes;
  boxes.reserve(agent.future_gt.size());
  double heading = agent.current.heading;
  Point2 prev = agent.current.position;
  for (const auto& p : agent.future_gt) {
    const Point2 step = p - prev;
    if (norm(step) > 1e-9) heading = std::atan2(step.y, step.x);
    boxes.push_back({p, heading, agent.length, agent.width});
    prev = p;
  }
  return boxes;
}

void validate_scene(const Scene& scene, std::size_t horizon) {
  if (scene.ego_gt.size() != horizon) throw std::invalid_argument("ego_gt has wrong length");
  for (const auto& p : scene.ego_gt) {
    if (!is_finite(p)) throw std::invalid_argument("ego_gt has non-finite point");
  }
  for (const auto& a : scene.agents) {
    if (a.future_gt.size() != horizon) throw std::invalid_argument("agent future has wrong length");
    if (!(a.length > 0.0 && a.width > 0.0)) throw std::invalid_argument("agent size must be positive");
  }
  if (scene.route.size() < 2) throw std::invalid_argument("scene route missing");
  if (!has_centerline(scene) && !scene.no_centerline) {
    throw std::invalid_argument("scene has no centerline and no no_centerline flag");
  }
}

EgoScene to_ego_frame(const Scene& scene) {
  EgoScene out;
  out.ego_speed = norm(scene.ego_velocity);
  out.agents.reserve(scene.agents.size());
  for (const auto& a : scene.agents) {
    AgentTrack local = a;
    local.current = to_ego_frame(a.current, scene.ego);
    local.velocity = vector_to_ego_frame(a.velocity, scene.ego);
    for (auto& p : local.future_gt) p = to_ego_frame(p, scene.ego);
    out.agents.push_back(std::move(local));
  }
  out.map.reserve(scene.map.size());
  for (const auto& e : scene.map) out.map.push_back({e.kind, to_ego_frame(e.geometry, scene.ego)});
  out.route = to_ego_frame(scene.route, scene.ego);
  out.ego_gt = scene.ego_gt;
  return out;
}

std::string scene_to_json_line(const Scene& scene) {
  json agents = json::array();
  for (const auto& a : scene.agents) {
    agents.push_back({{"current", pose_json(a.current)},
                      {"velocity", point_json(a.velocity)},
                      {"size", json::array({a.length, a.width})},
                      {"future_gt", points_json(a.future_gt)},
                      {"category", to_string(a.category)}});
  }
  json map = json::array();
  for (const auto& e : scene.map) {
    map.push_back({{"kind", to_string(e.kind)}, {"points", points_json(e.geometry.points())}});
  }
  json j = {{"version", "scene_v1"},
            {"meta", {{"id", scene.meta.id}, {"kind", to_string(scene.meta.kind)}}},
            {"ego", {{"pose", pose_json(scene.ego)}, {"velocity", point_json(scene.ego_velocity)}}},
            {"agents", agents},
            {"map", map},
            {"route", points_json(scene.route.points())},
            {"ego_gt", points_json(scene.ego_gt)},
            {"no_centerline", scene.no_centerline}};
  return j.dump();
}

Scene scene_from_json_line(std::string_view line) {
  const json j = json::parse(line);
  if (j.value("version", std::string{}) != "scene_v1") {
    throw std::invalid_argument("unsupported scene version");
  }
  Scene s;
  s.meta.id = j.at("meta").at("id").get<std::string>();
  s.meta.kind = scenario_kind_from_string(j.at("meta").at("kind").get<std::string>());
  s.ego = pose_from(j.at("ego").at("pose"));
  s.ego_velocity = point_from(j.at("ego").at("velocity"));
  for (const auto& a : j.at("agents")) {
    AgentTrack t;
    t.current = pose_from(a.at("current"));
    t.velocity = point_from(a.at("velocity"));
    t.length = a.at("size").at(0).get<double>();
    t.width = a.at("size").at(1).get<double>();
    t.future_gt = points_from(a.at("future_gt"));
    t.category = agent_category_from_string(a.at("category").get<std::string>());
    s.agents.push_back(std::move(t));
  }
  for (const auto& e : j.at("map")) {
    s.map.push_back({map_kind_from_string(e.at("kind").get<std::string>()),
                     Polyline(points_from(e.at("points")))});
  }
  s.route = Polyline(points_from(j.at("route")));
  s.ego_gt = points_from(j.at("ego_gt"));
  s.no_centerline = j.value("no_centerline", false);
  return s;
}

void write_scenes_jsonl(std::ostream& out, const std::vector<Scene>& scenes) {
  for (const auto& s : scenes) out << scene_to_json_line(s) << '\n';
}

std::vector<Scene> read_scenes_jsonl(std::istream& in) {
  std::vector<Scene> scenes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    scenes.push_back(scene_from_json_line(line));
  }
  return scenes;
}

std::vector<Scene> read_scenes_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file: " + path);
  return read_scenes_jsonl(in);
}

}  // namespace ntt
