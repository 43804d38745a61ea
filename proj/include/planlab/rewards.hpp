#pragma once

#include "planlab/geometry.hpp"
#include "planlab/parsing.hpp"

#include <cmath>
#include <stdexcept>
#include <string_view>

namespace planlab {

// Mean waypoint displacement over the horizon.
template <typename DA, typename DB>
typename DA::Scalar ade(const Eigen::MatrixBase<DA>& pred, const Eigen::MatrixBase<DB>& gt) {
  if (pred.cols() != gt.cols() || pred.rows() != 2 || gt.rows() != 2) {
    throw std::invalid_argument("ade: trajectories differ in length");
  }
  if (pred.cols() < 1) throw std::invalid_argument("ade: empty trajectory");
  return (pred - gt).colwise().norm().mean();
}

// Displacement at the final waypoint.
template <typename DA, typename DB>
typename DA::Scalar fde(const Eigen::MatrixBase<DA>& pred, const Eigen::MatrixBase<DB>& gt) {
  if (pred.cols() != gt.cols() || pred.rows() != 2 || gt.rows() != 2) {
    throw std::invalid_argument("fde: trajectories differ in length");
  }
  if (pred.cols() < 1) throw std::invalid_argument("fde: empty trajectory");
  const Eigen::Index last = pred.cols() - 1;
  return (pred.col(last) - gt.col(last)).norm();
}

template <typename Scalar>
Scalar log_smoothed_planning_reward(Scalar ade_value, Scalar fde_value) {
  using std::log1p;
  return -log1p(ade_value) - log1p(fde_value);
}

// -ln(1 + ADE) - ln(1 + FDE); zero iff the trajectories coincide.
template <typename DA, typename DB>
typename DA::Scalar planning_reward(const Eigen::MatrixBase<DA>& pred,
                                    const Eigen::MatrixBase<DB>& gt) {
  return log_smoothed_planning_reward(ade(pred, gt), fde(pred, gt));
}

// Divides x by the width and y by the height.
template <typename Derived>
Points2<typename Derived::Scalar> normalize(const Eigen::MatrixBase<Derived>& traj,
                                            Resolution res) {
  using Scalar = typename Derived::Scalar;
  const Point2<Scalar> scale(Scalar(1) / Scalar(res.width), Scalar(1) / Scalar(res.height));
  return scale.asDiagonal() * traj;
}

enum class CoordinateMode { Normalized, Pixel };

struct RewardOptions {
  std::size_t expected_n = 20;
  CoordinateMode mode = CoordinateMode::Normalized;
  bool require_reasoning = false;
};

struct RewardBreakdown {
  double r_planning = 0.0;
  double r_format = 0.0;
  double r_total = 0.0;
  // Reported in the reward's coordinate mode; zero for unparseable output.
  double ade = 0.0;
  double fde = 0.0;
  FormatVerdict verdict;
};

// Reward floor for unparseable output: worst parseable reward in the unit
// square, -2 ln(1 + sqrt 2).
double unparseable_floor(CoordinateMode mode, Resolution res);

// Parses, then scores. Ground truth is in pixels.
RewardBreakdown total_reward(std::string_view response_text, const Trajectory& gt,
                             Resolution res, const RewardOptions& options = {});

RewardBreakdown score_trajectory(const Trajectory& pred, const Trajectory& gt, Resolution res,
                                 CoordinateMode mode);

}  // namespace planlab
