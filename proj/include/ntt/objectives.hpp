#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ntt/geometry.hpp"
#include "ntt/neural/tensor.hpp"

namespace ntt {

struct LossWeights {
  // Planning terms: collision, boundary, direction, regression.
  double w_col = 1.0;
  double w_bd = 1.0;
  double w_dir = 0.5;
  double w_reg = 1.0;
  double alpha_col = 3.0;  // meters
  double alpha_bd = 1.0;   // meters
};

/// Coefficients of the overall loss for one training stage.
struct StageWeights {
  double map = 0.0;
  double agent = 0.0;
  double target = 0.0;
  double plan = 0.0;
};

/// Stage 1 trains perception/motion only; stage 2 everything. Throws
/// std::invalid_argument for any other stage.
StageWeights stage_weights(int stage);

/// Index of the candidate nearest to `gt_endpoint`, lowest index on ties.
std::size_t target_label(std::span<const Point2> candidates, Point2 gt_endpoint);
std::vector<double> one_hot(std::size_t size, std::size_t index);

/// Mean binary cross-entropy over candidates with probabilities clamped to
/// [1e-7, 1 - 1e-7]. `probs` is 1 x N.
nn::Var target_bce(nn::Var probs, std::size_t label);

/// Sum over steps of max(0, alpha - d_i) with d_i the center distance to
/// the nearest agent at step i. `agent_futures[a][i]` is agent a at step i.
nn::Var collision_term(nn::Var traj, const std::vector<std::vector<Point2>>& agent_futures,
                       double alpha_col);

/// Sum over steps of max(0, alpha - d_i) with d_i the distance to the
/// nearest boundary polyline.
nn::Var boundary_term(nn::Var traj, const std::vector<Polyline>& boundaries, double alpha_bd);

/// Mean over trajectory segments of the angle in [0, pi/2] between the
/// segment and the nearest divider segment (by midpoint distance).
nn::Var direction_term(nn::Var traj, const std::vector<Polyline>& dividers);

/// Mean absolute error over all 2k coordinates.
nn::Var regression_term(nn::Var traj, std::span<const Point2> gt);

struct PlanningTerms {
  nn::Var col;
  nn::Var bd;
  nn::Var dir;
  nn::Var reg;
};

nn::Var planning_loss(const PlanningTerms& terms, const LossWeights& weights);

/// -alpha (1 - p_pos)^gamma log p_pos - sum_{j != pos} (1 - alpha) p_j^gamma log(1 - p_j).
/// `probs` is 1 x n.
nn::Var focal_loss(nn::Var probs, std::size_t positive, double gamma = 2.0, double alpha = 0.25);

/// Weighted sum of the four loss groups with the coefficients of `stage`.
nn::Var overall_loss(nn::Var map_loss, nn::Var agent_loss, nn::Var target_loss, nn::Var plan_loss,
                     int stage);

// Trajectory helpers for loss inputs.
std::vector<Point2> rows_to_points(const nn::Tensor& traj);
nn::Tensor points_to_rows(std::span<const Point2> points);

}  // namespace ntt
