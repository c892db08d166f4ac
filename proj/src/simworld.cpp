#include "ntt/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ntt/navpath.hpp"

namespace ntt {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRoadStart = -30.0;
constexpr double kRoadEnd = 60.0;
constexpr double kBranchExit = 40.0;  // straight run after a 90 degree turn
constexpr double kDenseStep = 2.0;
// Lateral positions in the road frame.
constexpr double kRightLane = -kLaneWidth;
constexpr double kOncomingInner = kLaneWidth;
constexpr double kOncomingOuter = 2.0 * kLaneWidth;
constexpr double kRightEdge = -1.5 * kLaneWidth;
constexpr double kLeftEdge = kRightEdge + 2.0 * kRoadHalfWidth;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// side: +1 left, -1 right, 0 straight. Radius of the reference (ego-lane) arc.
struct Branch {
  int side = 0;
  double start = 0.0;
  double radius = 0.0;
};

// Point on the branch at reference arclength s, offset laterally by `off`
// (positive to the left of travel).
Point2 branch_point(const Branch& b, double s, double off) {
  if (b.side == 0 || s <= b.start) return {s, off};
  const double arc = b.radius * kPi / 2.0;
  const double theta = std::min(s - b.start, arc) / b.radius;
  const double rest = std::max(0.0, s - b.start - arc);
  if (b.side > 0) {
    const double r = b.radius - off;
    const Point2 p{b.start + r * std::sin(theta), b.radius - r * std::cos(theta)};
    return p + Point2{0.0, rest};
  }
  const double r = b.radius + off;
  const Point2 p{b.start + r * std::sin(theta), -b.radius + r * std::cos(theta)};
  return p + Point2{0.0, -rest};
}

double branch_end(const Branch& b) {
  if (b.side == 0) return kRoadEnd;
  return b.start + b.radius * kPi / 2.0 + kBranchExit;
}

Polyline branch_path(const Branch& b, double s0, double s1, double off) {
  std::vector<Point2> pts;
  for (double s = s0; s < s1; s += kDenseStep) pts.push_back(branch_point(b, s, off));
  pts.push_back(branch_point(b, s1, off));
  return Polyline(std::move(pts));
}

Polyline straight(double x0, double x1, double y) { return Polyline({{x0, y}, {x1, y}}); }

// Arc at radius r around the branch center, from where it leaves the main
// road edge through the exit straight.
Polyline branch_edge(const Branch& b, double r) {
  const double c = b.side > 0 ? (b.radius - kLeftEdge) / r : (b.radius + kRightEdge) / r;
  const double theta0 = std::acos(std::clamp(c, -1.0, 1.0));
  std::vector<Point2> pts;
  const auto at = [&](double th) {
    return b.side > 0 ? Point2{b.start + r * std::sin(th), b.radius - r * std::cos(th)}
                      : Point2{b.start + r * std::sin(th), -b.radius + r * std::cos(th)};
  };
  const int n = std::max(2, static_cast<int>(std::ceil((kPi / 2.0 - theta0) * r / kDenseStep)));
  for (int i = 0; i <= n; ++i) pts.push_back(at(theta0 + (kPi / 2.0 - theta0) * i / n));
  const Point2 end = pts.back();
  pts.push_back(end + Point2{0.0, b.side > 0 ? kBranchExit : -kBranchExit});
  return Polyline(std::move(pts));
}

// x where the circle of radius r around the branch center meets the main
// road edge on the branch side.
double edge_crossing(const Branch& b, double r) {
  const double dy = b.side > 0 ? b.radius - kLeftEdge : b.radius + kRightEdge;
  return b.start + std::sqrt(std::max(0.0, r * r - dy * dy));
}

// Radii of a two-lane branch road: the ego lane at the reference radius,
// oncoming traffic on its left.
struct BranchRadii {
  double inner_edge, outer_edge, divider;
};
BranchRadii branch_radii(const Branch& b) {
  if (b.side > 0) return {b.radius - 1.5 * kLaneWidth, b.radius + 0.5 * kLaneWidth, b.radius - 0.5 * kLaneWidth};
  return {b.radius - 0.5 * kLaneWidth, b.radius + 1.5 * kLaneWidth, b.radius + 0.5 * kLaneWidth};
}

void add(std::vector<MapElement>& map, MapKind kind, Polyline line) {
  map.push_back({kind, std::move(line)});
}

// Main-road pieces along y, leaving out the listed x-gaps.
void add_with_gaps(std::vector<MapElement>& map, MapKind kind, double y,
                   std::vector<std::pair<double, double>> gaps) {
  std::sort(gaps.begin(), gaps.end());
  double x = kRoadStart;
  for (const auto& [g0, g1] : gaps) {
    if (g0 - x > 1.0) add(map, kind, straight(x, g0, y));
    x = std::max(x, g1);
  }
  if (kRoadEnd - x > 1.0) add(map, kind, straight(x, kRoadEnd, y));
}

struct Lane {
  Polyline path;
  bool walkway = false;
};

std::vector<Point2> lane_future(const Polyline& lane, double s0, double v, std::size_t k) {
  std::vector<Point2> pts;
  for (std::size_t i = 1; i <= k; ++i) pts.push_back(lane.point_at(s0 + v * kStepSeconds * static_cast<double>(i)));
  return pts;
}

OrientedBox inflated(OrientedBox b, double margin) {
  b.length += 2.0 * margin;
  b.width += 2.0 * margin;
  return b;
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace

ScenarioSpec random_spec(ScenarioKind kind, std::uint64_t seed, double route_sigma) {
  std::mt19937_64 rng(seed);
  ScenarioSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  spec.route_sigma = route_sigma;
  spec.ego_speed = uniform(rng, 6.0, 9.0);
  const double radius = uniform(rng, 15.0, 30.0);
  spec.turn_start = uniform(rng, 0.0, 6.0);
  spec.agent_count = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
  spec.curvature = (kind == ScenarioKind::left_turn || kind == ScenarioKind::right_turn) ? 1.0 / radius : 0.0;
  return spec;
}

Scene generate_scene(const ScenarioSpec& spec, std::vector<std::string>* warnings) {
  if (!(spec.ego_speed > 0.0)) throw std::invalid_argument("ego speed must be positive");
  if (spec.curvature < 0.0) throw std::invalid_argument("curvature must be nonnegative");
  const bool turning = spec.kind == ScenarioKind::left_turn || spec.kind == ScenarioKind::right_turn;
  if (turning && spec.curvature == 0.0) throw std::invalid_argument("turn needs a curvature");
  if (spec.kind == ScenarioKind::straight && spec.curvature != 0.0) {
    throw std::invalid_argument("straight scenario must have zero curvature");
  }
  std::mt19937_64 rng(splitmix64(spec.seed));
  const std::size_t k = kHorizonSteps;
  const bool junction = spec.kind != ScenarioKind::straight;

  Branch left{+1, spec.turn_start, uniform(rng, 15.0, 30.0)};
  Branch right{-1, spec.turn_start, uniform(rng, 15.0, 30.0)};
  if (spec.kind == ScenarioKind::left_turn) left.radius = 1.0 / spec.curvature;
  if (spec.kind == ScenarioKind::right_turn) right.radius = 1.0 / spec.curvature;
  Branch ego{0, spec.turn_start, 0.0};
  if (spec.kind == ScenarioKind::left_turn) ego = left;
  if (spec.kind == ScenarioKind::right_turn) ego = right;

  // Road-frame map. The road frame is the ego frame at t = 0.
  std::vector<MapElement> map;
  std::vector<Lane> lanes;
  if (!junction) {
    for (double y : {kRightEdge, kLeftEdge}) add(map, MapKind::road_boundary, straight(kRoadStart, kRoadEnd, y));
    for (double y : {kRightLane / 2.0, kOncomingInner / 2.0, (kOncomingInner + kOncomingOuter) / 2.0}) {
      add(map, MapKind::lane_divider, straight(kRoadStart, kRoadEnd, y));
    }
  } else {
    const auto lr = branch_radii(left);
    const auto rr = branch_radii(right);
    const std::pair<double, double> left_gap{edge_crossing(left, lr.inner_edge) - 1.0,
                                             edge_crossing(left, lr.outer_edge) + 1.0};
    const std::pair<double, double> right_gap{edge_crossing(right, rr.inner_edge) - 1.0,
                                              edge_crossing(right, rr.outer_edge) + 1.0};
    const double junction_end = std::max(left_gap.second, right_gap.second) + 2.0;
    add_with_gaps(map, MapKind::road_boundary, kRightEdge, {right_gap});
    add_with_gaps(map, MapKind::road_boundary, kLeftEdge, {left_gap});
    for (double y : {kRightLane / 2.0, kOncomingInner / 2.0, (kOncomingInner + kOncomingOuter) / 2.0}) {
      add_with_gaps(map, MapKind::lane_divider, y, {{spec.turn_start, junction_end}});
    }
    for (const Branch* b : {&left, &right}) {
      const auto r = branch_radii(*b);
      add(map, MapKind::road_boundary, branch_edge(*b, r.inner_edge));
      add(map, MapKind::road_boundary, branch_edge(*b, r.outer_edge));
      add(map, MapKind::lane_divider, branch_edge(*b, r.divider));
    }
  }
  // Centerlines the ego can reach, then the remaining drivable lanes for agents.
  add(map, MapKind::lane_centerline, straight(kRoadStart, kRoadEnd, 0.0));
  add(map, MapKind::lane_centerline, straight(kRoadStart, kRoadEnd, kRightLane));
  lanes.push_back({straight(kRoadStart, kRoadEnd, 0.0)});
  lanes.push_back({straight(kRoadStart, kRoadEnd, kRightLane)});
  lanes.push_back({straight(kRoadStart, kRoadEnd, kOncomingInner).reversed()});
  lanes.push_back({straight(kRoadStart, kRoadEnd, kOncomingOuter).reversed()});
  if (junction) {
    for (const Branch* b : {&left, &right}) {
      Polyline path = branch_path(*b, kRoadStart, branch_end(*b), 0.0);
      add(map, MapKind::lane_centerline, path);
      lanes.push_back({std::move(path)});
    }
  } else if (uniform(rng, 0.0, 1.0) < 0.5) {
    const double xc = uniform(rng, 15.0, 45.0);
    add(map, MapKind::pedestrian_crossing, Polyline({{xc, kRightEdge}, {xc, kLeftEdge}}));
    lanes.push_back({Polyline({{xc, kRightEdge - 2.0}, {xc, kLeftEdge + 2.0}}), true});
  }

  // Ego ground truth at constant speed along its branch.
  std::vector<Point2> ego_gt;
  for (std::size_t i = 1; i <= k; ++i) {
    ego_gt.push_back(branch_point(ego, spec.ego_speed * kStepSeconds * static_cast<double>(i), 0.0));
  }
  std::vector<OrientedBox> ego_boxes = ego_footprints(ego_gt);
  ego_boxes.insert(ego_boxes.begin(), OrientedBox{{0.0, 0.0}, 0.0, kEgoLength, kEgoWidth});

  // Agents.
  std::vector<AgentTrack> agents;
  std::vector<OrientedBox> placed;
  std::size_t wanted = spec.agent_count;
  while (agents.size() < wanted) {
    bool ok = false;
    for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
      const Lane& lane = lanes[std::uniform_int_distribution<std::size_t>(0, lanes.size() - 1)(rng)];
      AgentTrack a;
      double v = 0.0;
      if (lane.walkway) {
        a.category = AgentCategory::pedestrian;
        a.length = 0.8;
        a.width = 0.6;
        v = uniform(rng, 0.8, 1.6);
      } else if (uniform(rng, 0.0, 1.0) < 0.2) {
        a.category = AgentCategory::truck;
        a.length = uniform(rng, 7.0, 9.0);
        a.width = uniform(rng, 2.3, 2.6);
        v = uniform(rng, 3.0, 8.0);
      } else {
        a.category = AgentCategory::car;
        a.length = uniform(rng, 4.2, 4.9);
        a.width = uniform(rng, 1.8, 2.0);
        v = uniform(rng, 3.0, 10.0);
      }
      const double span = lane.path.length() - v * kStepSeconds * static_cast<double>(k) - 1.0;
      if (span <= 1.0) continue;
      const double s0 = uniform(rng, 1.0, span);
      const Point2 pos = lane.path.point_at(s0);
      const Point2 ahead = lane.path.point_at(s0 + 0.5);
      const Point2 dir = ahead - pos;
      const double heading = std::atan2(dir.y, dir.x);
      a.current = {pos, heading};
      a.velocity = (v / norm(dir)) * dir;
      a.future_gt = lane_future(lane.path, s0, v, k);

      std::vector<OrientedBox> boxes = agent_footprints(a);
      boxes.insert(boxes.begin(), OrientedBox{pos, heading, a.length, a.width});
      bool clear = true;
      for (std::size_t i = 0; i < boxes.size() && clear; ++i) {
        if (boxes_overlap(inflated(boxes[i], 0.5), ego_boxes[i])) clear = false;
      }
      for (const auto& other : placed) {
        if (clear && boxes_overlap(inflated(boxes[0], 0.5), other)) clear = false;
      }
      if (!clear) continue;
      placed.push_back(boxes[0]);
      agents.push_back(std::move(a));
      ok = true;
    }
    if (!ok) {
      if (warnings) {
        warnings->push_back(spec.id + ": placed " + std::to_string(agents.size()) + " of " +
                            std::to_string(spec.agent_count) + " agents");
      }
      wanted = agents.size();
    }
  }

  // Coarse route: the ego path from 20 m behind to 80 m ahead, resampled
  // and perturbed.
  const Polyline ego_path = branch_path(ego, -20.0, 80.0, 0.0);
  Polyline route = interpolate_route(ego_path, kRouteSpacing);
  route = perturb_route(route, spec.route_sigma, spec.route_sigma, splitmix64(spec.seed ^ 0xA5A5A5A5ull));

  // Place everything in a random world pose.
  const Pose2 pose{{uniform(rng, -200.0, 200.0), uniform(rng, -200.0, 200.0)},
                   wrap_angle(uniform(rng, -kPi, kPi))};
  const auto to_world = [&](const Polyline& line) {
    std::vector<Point2> pts;
    pts.reserve(line.size());
    for (const auto& p : line.points()) pts.push_back(from_ego_frame(p, pose));
    return Polyline(std::move(pts));
  };

  Scene scene;
  scene.meta = {spec.id, spec.kind};
  scene.ego = pose;
  scene.ego_velocity = rotate({spec.ego_speed, 0.0}, pose.heading);
  scene.ego_gt = std::move(ego_gt);
  for (const auto& e : map) scene.map.push_back({e.kind, to_world(e.geometry)});
  scene.route = to_world(route);
  for (auto& a : agents) {
    a.current = {from_ego_frame(a.current.position, pose), wrap_angle(a.current.heading + pose.heading)};
    a.velocity = rotate(a.velocity, pose.heading);
    for (auto& p : a.future_gt) p = from_ego_frame(p, pose);
    scene.agents.push_back(std::move(a));
  }
  validate_scene(scene);
  return scene;
}

std::vector<std::size_t> stratified_counts(std::size_t total, double turn_fraction) {
  if (turn_fraction < 0.0 || turn_fraction > 1.0) throw std::invalid_argument("turn fraction must be in [0, 1]");
  const double share[4] = {(1.0 - turn_fraction) / 2.0, turn_fraction / 2.0, turn_fraction / 2.0,
                           (1.0 - turn_fraction) / 2.0};
  std::vector<std::size_t> counts(4);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double exact = share[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[i];
    remainders.push_back({-(exact - static_cast<double>(counts[i])), i});
  }
  std::stable_sort(remainders.begin(), remainders.end());
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) ++counts[remainders[j % 4].second];
  return counts;
}

namespace {

std::vector<Scene> generate_split(const DatasetConfig& config, std::size_t total, std::uint64_t salt,
                                  const std::string& prefix, std::vector<std::string>* warnings) {
  const auto counts = stratified_counts(total, config.turn_fraction);
  std::vector<ScenarioKind> kinds;
  for (std::size_t i = 0; i < counts.size(); ++i) kinds.insert(kinds.end(), counts[i], static_cast<ScenarioKind>(i));
  std::mt19937_64 rng(splitmix64(config.seed ^ salt));
  std::shuffle(kinds.begin(), kinds.end(), rng);
  std::vector<Scene> scenes;
  scenes.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    const std::uint64_t scene_seed = splitmix64(splitmix64(config.seed ^ salt) + i);
    ScenarioSpec spec = random_spec(kinds[i], scene_seed, config.route_sigma);
    std::ostringstream id;
    id << prefix << '-' << std::setw(5) << std::setfill('0') << i;
    spec.id = id.str();
    scenes.push_back(generate_scene(spec, warnings));
  }
  return scenes;
}

}  // namespace

Dataset generate_dataset(const DatasetConfig& config, std::vector<std::string>* warnings) {
  if (config.train_scenes == 0 && config.val_scenes == 0) throw std::invalid_argument("dataset needs scenes");
  Dataset d;
  d.train = generate_split(config, config.train_scenes, 0x747261696eull, "train", warnings);
  d.val = generate_split(config, config.val_scenes, 0x76616cull, "val", warnings);
  return d;
}

std::string dataset_config_json(const DatasetConfig& config) {
  nlohmann::json j;
  j["train_scenes"] = config.train_scenes;
  j["val_scenes"] = config.val_scenes;
  j["seed"] = config.seed;
  j["turn_fraction"] = config.turn_fraction;
  j["route_sigma"] = config.route_sigma;
  return j.dump();
}

void write_dataset(const Dataset& dataset, const DatasetConfig& config,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [](const std::filesystem::path& p, const std::vector<Scene>& scenes) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    write_scenes_jsonl(out, scenes);
    if (!out) throw std::runtime_error("write failed: " + p.string());
  };
  write(dir / "train.jsonl", dataset.train);
  write(dir / "val.jsonl", dataset.val);

  const auto kind_counts = [](const std::vector<Scene>& scenes) {
    nlohmann::json c = nlohmann::json::object();
    for (std::size_t i = 0; i < kScenarioKindCount; ++i) c[std::string(to_string(static_cast<ScenarioKind>(i)))] = 0;
    for (const auto& s : scenes) c[std::string(to_string(s.meta.kind))] = c[std::string(to_string(s.meta.kind))].get<int>() + 1;
    return c;
  };
  const std::string cfg = dataset_config_json(config);
  nlohmann::json m;
  m["version"] = "dataset_v1";
  m["seed"] = config.seed;
  m["config"] = nlohmann::json::parse(cfg);
  m["config_hash"] = config_hash(cfg);
  m["counts"] = {{"train", kind_counts(dataset.train)}, {"val", kind_counts(dataset.val)}};
  m["turning"] = {{"train", turning_subset(dataset.train).size()}, {"val", turning_subset(dataset.val).size()}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << m.dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.train = read_scenes_jsonl((dir / "train.jsonl").string());
  d.val = read_scenes_jsonl((dir / "val.jsonl").string());
  return d;
}

std::vector<Scene> turning_subset(const std::vector<Scene>& scenes) {
  std::vector<Scene> out;
  for (const auto& s : scenes) {
    if (lateral_displacement(s.ego_gt) > 2.0) out.push_back(s);
  }
  return out;
}

}  // namespace ntt
