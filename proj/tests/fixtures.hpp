#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "ntt/scene.hpp"

namespace fixture {

using ntt::Point2;

// Three scenes sharing one ground truth (5 m per step straight ahead).
//  0: plan offset 1 m sideways everywhere, no agents
//  1: exact plan, ego posed at (100, 50); a parked car on the 2 s waypoint
//  2: errors of 5 m at 1 s, 2 m at 2 s, 1 m at 3 s; one far agent
struct MetricFixture {
  std::vector<ntt::Scene> scenes;
  std::vector<std::vector<Point2>> plans;
  std::array<double, 3> l2_inst;
  std::array<double, 3> l2_cum;
  std::array<double, 3> collision;  // percent
  std::vector<std::array<bool, 3>> flags;
};

inline ntt::AgentTrack parked(Point2 at) {
  ntt::AgentTrack a;
  a.current = {at, 0.0};
  a.velocity = {0, 0};
  a.length = 4.5;
  a.width = 1.9;
  a.future_gt.assign(ntt::kHorizonSteps, at);
  return a;
}

inline MetricFixture metric_fixture() {
  MetricFixture f;
  std::vector<Point2> gt;
  for (int i = 0; i < 6; ++i) gt.push_back({5.0 * (i + 1), 0.0});

  ntt::Scene base;
  base.ego_gt = gt;
  base.route = ntt::Polyline({{-10, 0}, {60, 0}});

  ntt::Scene s0 = base;
  s0.meta.id = "offset";
  std::vector<Point2> p0 = gt;
  for (auto& p : p0) p.y += 1.0;

  ntt::Scene s1 = base;
  s1.meta.id = "parked";
  s1.ego = {{100, 50}, 0.0};
  s1.route = ntt::Polyline({{90, 50}, {160, 50}});
  s1.agents.push_back(parked({120, 50}));  // ego-frame (20, 0): the fourth waypoint
  const std::vector<Point2> p1 = gt;

  ntt::Scene s2 = base;
  s2.meta.id = "errors";
  s2.agents.push_back(parked({100, 100}));
  std::vector<Point2> p2 = gt;
  p2[1] = p2[1] + Point2{3, 4};
  p2[3] = p2[3] + Point2{0, -2};
  p2[5] = p2[5] + Point2{1, 0};

  f.scenes = {s0, s1, s2};
  f.plans = {p0, p1, p2};
  f.l2_inst = {(1.0 + 0.0 + 5.0) / 3.0, (1.0 + 0.0 + 2.0) / 3.0, (1.0 + 0.0 + 1.0) / 3.0};
  f.l2_cum = {(1.0 + 0.0 + 5.0 / 2.0) / 3.0, (1.0 + 0.0 + 7.0 / 4.0) / 3.0, (1.0 + 0.0 + 8.0 / 6.0) / 3.0};
  f.flags = {{false, false, false}, {false, true, true}, {false, false, false}};
  f.collision = {0.0, 100.0 / 3.0, 100.0 / 3.0};
  return f;
}

// Separating-axis test written out from box corners.
inline std::array<Point2, 4> corners(Point2 c, double heading, double length, double width) {
  const Point2 u{std::cos(heading), std::sin(heading)}, v{-u.y, u.x};
  const double a = length / 2, b = width / 2;
  return {Point2{c.x + a * u.x + b * v.x, c.y + a * u.y + b * v.y}, Point2{c.x - a * u.x + b * v.x, c.y - a * u.y + b * v.y},
          Point2{c.x - a * u.x - b * v.x, c.y - a * u.y - b * v.y}, Point2{c.x + a * u.x - b * v.x, c.y + a * u.y - b * v.y}};
}

inline bool manual_overlap(const std::array<Point2, 4>& p, const std::array<Point2, 4>& q) {
  for (const auto* poly : {&p, &q}) {
    for (int e = 0; e < 4; ++e) {
      const Point2 a = (*poly)[e], b = (*poly)[(e + 1) % 4];
      const Point2 axis{-(b.y - a.y), b.x - a.x};
      double pmin = 1e300, pmax = -1e300, qmin = 1e300, qmax = -1e300;
      for (const auto& c : p) {
        const double d = c.x * axis.x + c.y * axis.y;
        pmin = std::min(pmin, d);
        pmax = std::max(pmax, d);
      }
      for (const auto& c : q) {
        const double d = c.x * axis.x + c.y * axis.y;
        qmin = std::min(qmin, d);
        qmax = std::max(qmax, d);
      }
      if (pmax < qmin || qmax < pmin) return false;
    }
  }
  return true;
}

// Horizon flags recomputed from scratch: ego heading from consecutive
// waypoints, parked agents keep heading zero.
inline std::array<bool, 3> manual_flags(const ntt::Scene& scene, const std::vector<Point2>& plan) {
  std::array<bool, 3> out{false, false, false};
  const std::size_t idx[3] = {1, 3, 5};
  const double c = std::cos(scene.ego.heading), s = std::sin(scene.ego.heading);
  for (std::size_t h = 0; h < 3; ++h) {
    for (std::size_t i = 0; i <= idx[h]; ++i) {
      double heading = 0.0;
      for (std::size_t j = 1; j <= i; ++j) {
        const Point2 d = plan[j] - plan[j - 1];
        if (d.x != 0 || d.y != 0) heading = std::atan2(d.y, d.x);
      }
      const auto ego = corners(plan[i], heading, ntt::kEgoLength, ntt::kEgoWidth);
      for (const auto& a : scene.agents) {
        const Point2 w = a.future_gt[i] - scene.ego.position;
        const Point2 local{c * w.x + s * w.y, -s * w.x + c * w.y};
        if (manual_overlap(ego, corners(local, a.current.heading - scene.ego.heading, a.length, a.width)))
          out[h] = true;
      }
    }
  }
  return out;
}

}  // namespace fixture
