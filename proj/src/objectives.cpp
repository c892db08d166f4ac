#include "ntt/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ntt {

using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

using nn::Scalar;

// Point at tensor precision.
struct Vec {
  Scalar x = 0;
  Scalar y = 0;
  Vec operator-(Point2 o) const { return {x - o.x, y - o.y}; }
  Vec operator-(Vec o) const { return {x - o.x, y - o.y}; }
  Scalar norm() const { return std::sqrt(x * x + y * y); }
  Point2 point() const { return {static_cast<double>(x), static_cast<double>(y)}; }
};

Vec row_vec(const Tensor& t, Eigen::Index i) { return {t(i, 0), t(i, 1)}; }

Point2 row_point(const Tensor& t, Eigen::Index i) { return row_vec(t, i).point(); }

Vec foot_on_segment(Point2 a, Point2 b, Vec p) {
  const Scalar ux = b.x - a.x;
  const Scalar uy = b.y - a.y;
  const Scalar len2 = ux * ux + uy * uy;
  if (len2 == 0) return {a.x, a.y};
  const Scalar s = std::clamp(((p.x - a.x) * ux + (p.y - a.y) * uy) / len2, Scalar(0), Scalar(1));
  return {a.x + s * ux, a.y + s * uy};
}

void require_traj(const Tensor& t) {
  if (t.cols() != 2) throw std::invalid_argument("trajectory must be k x 2");
}

}  // namespace

std::vector<Point2> rows_to_points(const Tensor& traj) {
  require_traj(traj);
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(traj.rows()));
  for (Eigen::Index i = 0; i < traj.rows(); ++i) pts.push_back(row_point(traj, i));
  return pts;
}

Tensor points_to_rows(std::span<const Point2> points) {
  Tensor t(static_cast<Eigen::Index>(points.size()), 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    t(static_cast<Eigen::Index>(i), 0) = points[i].x;
    t(static_cast<Eigen::Index>(i), 1) = points[i].y;
  }
  return t;
}

StageWeights stage_weights(int stage) {
  switch (stage) {
    case 1:
      return {1.0, 0.25, 0.0, 0.0};
    case 2:
      return {1.0, 0.25, 0.2, 1.0};
    default:
      throw std::invalid_argument("stage must be 1 or 2");
  }
}

std::size_t target_label(std::span<const Point2> candidates, Point2 gt_endpoint) {
  if (candidates.empty()) throw std::invalid_argument("target_label: no candidates");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double d = distance(candidates[i], gt_endpoint);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<double> one_hot(std::size_t size, std::size_t index) {
  std::vector<double> v(size, 0.0);
  v.at(index) = 1.0;
  return v;
}

Var target_bce(Var probs, std::size_t label) {
  const Eigen::Index n = probs.cols();
  if (probs.rows() != 1 || label >= static_cast<std::size_t>(n)) {
    throw std::invalid_argument("target_bce: misaligned label");
  }
  Tape& tape = *probs.tape;
  Tensor y = Tensor::Zero(1, n);
  y(0, static_cast<Eigen::Index>(label)) = 1.0;
  const Var p = nn::clamp(probs, 1e-7, 1.0 - 1e-7);
  const Var log_p = nn::log(p);
  const Var log_q = nn::log(nn::add_scalar(nn::scale(p, -1.0), 1.0));
  const Var yv = tape.constant(y);
  const Var not_y = tape.constant((1.0 - y.array()).matrix());
  return nn::scale(nn::mean(nn::add(nn::mul(yv, log_p), nn::mul(not_y, log_q))), -1.0);
}

Var collision_term(Var traj, const std::vector<std::vector<Point2>>& agent_futures,
                   double alpha_col) {
  const Tensor& t = traj.value();
  require_traj(t);
  Tensor grad = Tensor::Zero(t.rows(), 2);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    const Vec p = row_vec(t, i);
    Scalar best = std::numeric_limits<Scalar>::infinity();
    Vec diff;
    for (const auto& future : agent_futures) {
      if (static_cast<Eigen::Index>(future.size()) <= i) {
        throw std::invalid_argument("collision_term: agent future shorter than trajectory");
      }
      const Vec dv = p - future[static_cast<std::size_t>(i)];
      const Scalar d = dv.norm();
      if (d < best) {
        best = d;
        diff = dv;
      }
    }
    if (best < alpha_col) {
      total += alpha_col - best;
      if (best > 0) {
        grad(i, 0) = -diff.x / best;
        grad(i, 1) = -diff.y / best;
      }
    }
  }
  Tensor out(1, 1);
  out(0, 0) = total;
  return traj.tape->record(std::move(out), [traj, grad](Tape& tape, const Tensor& g) {
    tape.accumulate(traj, g(0, 0) * grad);
  });
}

Var boundary_term(Var traj, const std::vector<Polyline>& boundaries, double alpha_bd) {
  const Tensor& t = traj.value();
  require_traj(t);
  Tensor grad = Tensor::Zero(t.rows(), 2);
  Scalar total = 0;
  if (!boundaries.empty()) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      const Vec p = row_vec(t, i);
      Scalar best = std::numeric_limits<Scalar>::infinity();
      Vec diff;
      for (const auto& b : boundaries) {
        // segment choice in double, distance recomputed at full tensor precision
        const auto proj = nearest_point_on_polyline(b, p.point());
        const Vec dv = p - foot_on_segment(b[proj.segment], b[proj.segment + 1], p);
        const Scalar d = dv.norm();
        if (d < best) {
          best = d;
          diff = dv;
        }
      }
      if (best < alpha_bd) {
        total += alpha_bd - best;
        if (best > 0) {
          grad(i, 0) = -diff.x / best;
          grad(i, 1) = -diff.y / best;
        }
      }
    }
  }
  Tensor out(1, 1);
  out(0, 0) = total;
  return traj.tape->record(std::move(out), [traj, grad](Tape& tape, const Tensor& g) {
    tape.accumulate(traj, g(0, 0) * grad);
  });
}

Var direction_term(Var traj, const std::vector<Polyline>& dividers) {
  const Tensor& t = traj.value();
  require_traj(t);
  if (t.rows() < 2) throw std::invalid_argument("direction_term: need at least two points");
  Tensor grad = Tensor::Zero(t.rows(), 2);
  Scalar total = 0;
  int counted = 0;
  if (!dividers.empty()) {
    for (Eigen::Index j = 0; j + 1 < t.rows(); ++j) {
      const Vec a = row_vec(t, j);
      const Vec b = row_vec(t, j + 1);
      const Vec u = b - a;
      if (u.x == 0 && u.y == 0) continue;
      const Point2 mid{static_cast<double>((a.x + b.x) / 2), static_cast<double>((a.y + b.y) / 2)};
      double best = std::numeric_limits<double>::infinity();
      Point2 v;
      for (const auto& line : dividers) {
        const auto proj = nearest_point_on_polyline(line, mid);
        if (proj.distance < best) {
          best = proj.distance;
          v = line[proj.segment + 1] - line[proj.segment];
        }
      }
      const Scalar c = u.x * v.y - u.y * v.x;
      const Scalar s = u.x * v.x + u.y * v.y;
      const Scalar ac = std::abs(c);
      const Scalar as = std::abs(s);
      total += std::atan2(ac, as);
      ++counted;
      const Scalar denom = ac * ac + as * as;
      if (denom > 0) {
        const int sc = c > 0 ? 1 : (c < 0 ? -1 : 0);
        const int ss = s > 0 ? 1 : (s < 0 ? -1 : 0);
        // d atan2(|c|,|s|) / du
        const Scalar dx = (as * sc * v.y - ac * ss * v.x) / denom;
        const Scalar dy = (-as * sc * v.x - ac * ss * v.y) / denom;
        grad(j + 1, 0) += dx;
        grad(j + 1, 1) += dy;
        grad(j, 0) -= dx;
        grad(j, 1) -= dy;
      }
    }
  }
  Tensor out(1, 1);
  out(0, 0) = counted > 0 ? total / counted : Scalar(0);
  if (counted > 0) grad /= Scalar(counted);
  return traj.tape->record(std::move(out), [traj, grad](Tape& tape, const Tensor& g) {
    tape.accumulate(traj, g(0, 0) * grad);
  });
}

Var regression_term(Var traj, std::span<const Point2> gt) {
  require_traj(traj.value());
  if (static_cast<std::size_t>(traj.rows()) != gt.size()) {
    throw std::invalid_argument("regression_term: length mismatch");
  }
  return nn::mean(nn::abs(nn::sub(traj, traj.tape->constant(points_to_rows(gt)))));
}

Var planning_loss(const PlanningTerms& terms, const LossWeights& w) {
  return nn::add(nn::add(nn::scale(terms.col, w.w_col), nn::scale(terms.bd, w.w_bd)),
                 nn::add(nn::scale(terms.dir, w.w_dir), nn::scale(terms.reg, w.w_reg)));
}

Var focal_loss(Var probs, std::size_t positive, double gamma, double alpha) {
  const Tensor& p = probs.value();
  if (p.rows() != 1 || positive >= static_cast<std::size_t>(p.cols())) {
    throw std::invalid_argument("focal_loss: misaligned positive index");
  }
  constexpr Scalar kTiny = 1e-12;
  const auto pos = static_cast<Eigen::Index>(positive);
  Tensor grad = Tensor::Zero(1, p.cols());
  Scalar total = 0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    const Scalar q = std::clamp(p(0, j), kTiny, 1 - kTiny);
    if (j == pos) {
      const Scalar one_m = 1.0 - q;
      const Scalar w = std::pow(one_m, Scalar(gamma));
      total += -alpha * w * std::log(q);
      const Scalar dw = gamma == 0.0 ? Scalar(0) : -gamma * std::pow(one_m, Scalar(gamma - 1.0));
      grad(0, j) = -alpha * (dw * std::log(q) + w / q);
    } else {
      const Scalar w = std::pow(q, Scalar(gamma));
      const Scalar l = std::log(1.0 - q);
      total += -(1.0 - alpha) * w * l;
      const Scalar dw = gamma == 0.0 ? Scalar(0) : gamma * std::pow(q, Scalar(gamma - 1.0));
      grad(0, j) = -(1.0 - alpha) * (dw * l - w / (1.0 - q));
    }
  }
  Tensor out(1, 1);
  out(0, 0) = total;
  return probs.tape->record(std::move(out), [probs, grad](Tape& tape, const Tensor& g) {
    tape.accumulate(probs, g(0, 0) * grad);
  });
}

Var overall_loss(Var map_loss, Var agent_loss, Var target_loss, Var plan_loss, int stage) {
  const StageWeights w = stage_weights(stage);
  return nn::add(nn::add(nn::scale(map_loss, w.map), nn::scale(agent_loss, w.agent)),
                 nn::add(nn::scale(target_loss, w.target), nn::scale(plan_loss, w.plan)));
}

}  // namespace ntt
