#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ntt/geometry.hpp"

namespace ntt {

inline constexpr double kRouteSpacing = 5.0;
inline constexpr std::size_t kNavSegments = 10;

/// The nearest route vertex to the ego plus the following m vertices.
struct NavWindow {
  std::vector<Point2> points;  // m + 1 points, ego frame
  std::size_t m = 0;
  bool padded = false;
};

/// Vector-level navigation node: displacement to the next window point and
/// the cosine/sine of its heading.
struct NavNode {
  Point2 d;
  double cos_h = 1.0;
  double sin_h = 0.0;
};

/// Resamples `route` at arclength multiples of `spacing` from its first
/// vertex. The trailing partial segment is dropped. Throws
/// std::invalid_argument("route too short") when the route is shorter than
/// one spacing.
Polyline interpolate_route(const Polyline& route, double spacing = kRouteSpacing);

/// Picks the route vertex closest to `ego_pos` (lowest index on ties) and
/// the next m vertices. A window running past the route end is completed by
/// extrapolating the last segment and flagged `padded`.
NavWindow select_window(const Polyline& route, Point2 ego_pos, std::size_t m = kNavSegments);

/// d_i = p_{i+1} - p_i with h_i = atan2(d_i.y, d_i.x).
std::vector<NavNode> vectorize_window(const NavWindow& window);

/// Displaces each vertex by independent Gaussian along-track and lateral
/// offsets in the frame of its outgoing segment (incoming for the last
/// vertex). Deterministic in `seed`.
Polyline perturb_route(const Polyline& route, double lateral_sigma, double along_sigma,
                       std::uint64_t seed);

/// Ego position expressed in the window frame: origin at the first window
/// point, +x along the first window segment.
Point2 ego_in_window_frame(const NavWindow& window, Point2 ego_pos);

}  // namespace ntt
