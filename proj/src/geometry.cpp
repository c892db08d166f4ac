#include "ntt/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>

namespace ntt {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

std::vector<Point2> OrientedBox::corners() const {
  const Point2 fwd{std::cos(heading), std::sin(heading)};
  const Point2 left{-fwd.y, fwd.x};
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  return {center + hl * fwd + hw * left, center - hl * fwd + hw * left,
          center - hl * fwd - hw * left, center + hl * fwd - hw * left};
}

bool OrientedBox::contains(Point2 p) const {
  const Point2 local = rotate(p - center, -heading);
  return std::abs(local.x) <= 0.5 * length && std::abs(local.y) <= 0.5 * width;
}

Polyline::Polyline(std::vector<Point2> points) : points_(std::move(points)) {
  if (points_.size() < 2) {
    throw std::invalid_argument("polyline needs at least two points");
  }
  for (const auto& p : points_) {
    if (!is_finite(p)) throw std::invalid_argument("polyline has non-finite vertex");
  }
  if (!(length() > 0.0)) throw std::invalid_argument("polyline has zero length");
}

double Polyline::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) total += distance(points_[i - 1], points_[i]);
  return total;
}

std::vector<double> Polyline::cumulative_lengths() const {
  std::vector<double> cumulative(points_.size(), 0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + distance(points_[i - 1], points_[i]);
  }
  return cumulative;
}

Point2 Polyline::point_at(double s) const {
  if (points_.empty()) throw std::logic_error("point_at on empty polyline");
  if (s <= 0.0) return points_.front();
  double walked = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double seg = distance(points_[i - 1], points_[i]);
    if (seg > 0.0 && walked + seg >= s) {
      const double t = (s - walked) / seg;
      return points_[i - 1] + t * (points_[i] - points_[i - 1]);
    }
    walked += seg;
  }
  return points_.back();
}

Polyline Polyline::reversed() const {
  std::vector<Point2> pts(points_.rbegin(), points_.rend());
  return Polyline(std::move(pts));
}

Point2 to_ego_frame(Point2 world, const Pose2& ego) {
  return rotate(world - ego.position, -ego.heading);
}

Point2 from_ego_frame(Point2 local, const Pose2& ego) {
  return rotate(local, ego.heading) + ego.position;
}

Pose2 to_ego_frame(const Pose2& world, const Pose2& ego) {
  return {to_ego_frame(world.position, ego), wrap_angle(world.heading - ego.heading)};
}

Point2 vector_to_ego_frame(Point2 world_vector, const Pose2& ego) {
  return rotate(world_vector, -ego.heading);
}

Polyline to_ego_frame(const Polyline& world, const Pose2& ego) {
  std::vector<Point2> pts;
  pts.reserve(world.size());
  for (const auto& p : world.points()) pts.push_back(to_ego_frame(p, ego));
  return Polyline(std::move(pts));
}

Point2 closest_point_on_segment(Point2 a, Point2 b, Point2 p) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return a;
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

PolylineProjection nearest_point_on_polyline(const Polyline& line, Point2 p) {
  if (line.size() < 2) throw std::invalid_argument("polyline needs at least two points");
  PolylineProjection best{line[0], std::numeric_limits<double>::infinity(), 0};
  bool found = false;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    if (line[i] == line[i + 1]) continue;
    const Point2 foot = closest_point_on_segment(line[i], line[i + 1], p);
    const double d = distance(foot, p);
    if (d < best.distance) {
      best = {foot, d, i};
      found = true;
    }
  }
  if (!found) throw std::invalid_argument("polyline has only degenerate segments");
  return best;
}

namespace {

// Projects the box onto `axis` and returns [min, max].
std::array<double, 2> project(const std::vector<Point2>& corners, Point2 axis) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& c : corners) {
    const double v = dot(c, axis);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Point2, 4> axes{Point2{std::cos(a.heading), std::sin(a.heading)},
                                   Point2{-std::sin(a.heading), std::cos(a.heading)},
                                   Point2{std::cos(b.heading), std::sin(b.heading)},
                                   Point2{-std::sin(b.heading), std::cos(b.heading)}};
  for (const auto& axis : axes) {
    const auto pa = project(ca, axis);
    const auto pb = project(cb, axis);
    if (pa[1] < pb[0] || pb[1] < pa[0]) return false;
  }
  return true;
}

double lateral_displacement(std::span<const Point2> ego_frame_points) {
  double worst = 0.0;
  for (const auto& p : ego_frame_points) worst = std::max(worst, std::abs(p.y));
  return worst;
}

}  // namespace ntt
