#include "ntt/navpath.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace ntt {

Polyline interpolate_route(const Polyline& route, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("spacing must be positive");
  const auto cumulative = route.cumulative_lengths();
  const double total = cumulative.back();
  if (total < spacing) throw std::invalid_argument("route too short");

  const auto n = static_cast<std::size_t>(std::floor(total / spacing + 1e-9));
  std::vector<Point2> out;
  out.reserve(n + 1);
  out.push_back(route[0]);
  std::size_t seg = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double s = static_cast<double>(i) * spacing;
    while (seg + 2 < route.size() && cumulative[seg + 1] < s) ++seg;
    const double seg_len = cumulative[seg + 1] - cumulative[seg];
    const double t = seg_len > 0.0 ? std::min((s - cumulative[seg]) / seg_len, 1.0) : 0.0;
    out.push_back(route[seg] + t * (route[seg + 1] - route[seg]));
  }
  return Polyline(std::move(out));
}

NavWindow select_window(const Polyline& route, Point2 ego_pos, std::size_t m) {
  if (m < 1) throw std::invalid_argument("window needs at least one segment");
  std::size_t nearest = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < route.size(); ++i) {
    const double d = distance(route[i], ego_pos);
    if (d < best) {
      best = d;
      nearest = i;
    }
  }

  NavWindow w;
  w.m = m;
  for (std::size_t i = nearest; i < route.size() && w.points.size() < m + 1; ++i) {
    w.points.push_back(route[i]);
  }
  if (w.points.size() < m + 1) {
    w.padded = true;
    // Extrapolate along the last route segment with its own length as step.
    const Point2 step = route[route.size() - 1] - route[route.size() - 2];
    while (w.points.size() < m + 1) w.points.push_back(w.points.back() + step);
  }
  return w;
}

std::vector<NavNode> vectorize_window(const NavWindow& window) {
  if (window.points.size() != window.m + 1) {
    throw std::invalid_argument("window must hold m + 1 points");
  }
  std::vector<NavNode> nodes;
  nodes.reserve(window.m);
  for (std::size_t i = 0; i < window.m; ++i) {
    const Point2 d = window.points[i + 1] - window.points[i];
    if (d.x == 0.0 && d.y == 0.0) throw std::invalid_argument("duplicate navigation vertices");
    const double h = std::atan2(d.y, d.x);
    nodes.push_back({d, std::cos(h), std::sin(h)});
  }
  return nodes;
}

Polyline perturb_route(const Polyline& route, double lateral_sigma, double along_sigma,
                       std::uint64_t seed) {
  if (lateral_sigma < 0.0 || along_sigma < 0.0) {
    throw std::invalid_argument("noise sigmas must be nonnegative");
  }
  if (lateral_sigma == 0.0 && along_sigma == 0.0) return route;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto& pts = route.points();
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2 seg = i + 1 < pts.size() ? pts[i + 1] - pts[i] : pts[i] - pts[i - 1];
    const double len = norm(seg);
    const Point2 tangent = len > 0.0 ? (1.0 / len) * seg : Point2{1.0, 0.0};
    const Point2 normal{-tangent.y, tangent.x};
    const double along = along_sigma * unit(rng);
    const double lateral = lateral_sigma * unit(rng);
    out.push_back(pts[i] + along * tangent + lateral * normal);
  }
  return Polyline(std::move(out));
}

Point2 ego_in_window_frame(const NavWindow& window, Point2 ego_pos) {
  if (window.points.size() < 2) throw std::invalid_argument("window needs two points");
  const Point2 first = window.points[1] - window.points[0];
  const double heading = std::atan2(first.y, first.x);
  return rotate(ego_pos - window.points[0], -heading);
}

}  // namespace ntt
