#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace ntt {

/// Planar point or displacement vector, meters.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend Point2 operator*(Point2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline bool is_finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Rotates `v` counter-clockwise by `angle` radians.
inline Point2 rotate(Point2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Maps any angle into (-pi, pi].
double wrap_angle(double angle);

struct Pose2 {
  Point2 position;
  double heading = 0.0;  // (-pi, pi]
};

struct OrientedBox {
  Point2 center;
  double heading = 0.0;
  double length = 0.0;  // along heading
  double width = 0.0;

  /// Corners in counter-clockwise order starting at front-left.
  std::vector<Point2> corners() const;
  bool contains(Point2 p) const;
};

/// Ordered vertex list with at least two points and positive arclength.
class Polyline {
 public:
  Polyline() = default;
  /// Throws std::invalid_argument on fewer than two points, non-finite
  /// coordinates or zero total length.
  explicit Polyline(std::vector<Point2> points);

  const std::vector<Point2>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point2& operator[](std::size_t i) const { return points_[i]; }

  double length() const;
  /// cumulative[i] is the arclength from the first vertex to vertex i.
  std::vector<double> cumulative_lengths() const;
  /// Point at arclength `s`, clamped to the ends.
  Point2 point_at(double s) const;
  Polyline reversed() const;

 private:
  std::vector<Point2> points_;
};

struct PolylineProjection {
  Point2 foot;
  double distance = 0.0;
  std::size_t segment = 0;
};

// Frame transforms. The ego frame has +x forward and +y left with the origin
// at the ego reference point.
Point2 to_ego_frame(Point2 world, const Pose2& ego);
Point2 from_ego_frame(Point2 local, const Pose2& ego);
Pose2 to_ego_frame(const Pose2& world, const Pose2& ego);
Point2 vector_to_ego_frame(Point2 world_vector, const Pose2& ego);
Polyline to_ego_frame(const Polyline& world, const Pose2& ego);

/// Closest point on any segment of `line`. Zero-length segments are skipped;
/// the first minimizing segment wins ties.
PolylineProjection nearest_point_on_polyline(const Polyline& line, Point2 p);

/// Closest point on the single segment [a, b].
Point2 closest_point_on_segment(Point2 a, Point2 b, Point2 p);

/// Separating-axis test over the four box edge normals.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

/// Largest |y| over the points, expressed in the t=0 ego frame.
double lateral_displacement(std::span<const Point2> ego_frame_points);

}  // namespace ntt
