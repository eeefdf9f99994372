#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "lumenav/depth_map.hpp"
#include "lumenav/geometry.hpp"

namespace lumenav {

struct EgoMotionConfig {
  int max_iterations{30};              // per pyramid level
  double convergence_threshold{1e-3};  // mm, mean-residual change
  double huber_delta{1.0};             // mm
  int pyramid_levels{3};
  double max_expected_translation{10.0};  // mm, sanity bound on init
  double max_expected_rotation{0.5};      // rad
  int finest_stride{2};                   // pixel subsampling at the finest level
};

struct EgoMotionEstimate {
  Pose pose;  // pose of camera b expressed in camera a's frame: X_a = pose * X_b
  double residual{0};  // final mean point-to-plane residual, mm
  int iterations{0};
  bool converged{false};
};

// Direct depth alignment between two depth maps: projective data association,
// coarse-to-fine pyramid, Huber-robust point-to-plane Gauss-Newton.
// Deterministic for fixed inputs. Throws InsufficientOverlap when fewer than
// 5% of pixels associate and SolverDiverged when the residual blows up or
// turns non-finite within a pyramid level.
EgoMotionEstimate estimate_relative_pose(const DepthMap& depth_a, const DepthMap& depth_b,
                                         const CameraIntrinsics& k, const Pose& init,
                                         const EgoMotionConfig& cfg);

// ||T_gt - T_pred||_2 + omega * ||r_gt - r_pred||_2 with intrinsic X-Y-Z Euler
// angles in radians. Throws GimbalLock from the decomposition.
double pose_error(const Pose& gt, const Pose& pred, double omega);

// Reproducible (frame index, offset) pairs with offset drawn uniformly from
// +/-{1..5} and the frame uniform over the range valid for that offset.
class TrainingPairSampler {
 public:
  TrainingPairSampler(int trajectory_length, uint64_t seed);
  std::pair<int, int> next();  // (t, n)

 private:
  int length_;
  std::mt19937_64 rng_;
};

namespace detail {

// Point-to-plane residual n . (exp(xi) * y - q) and its Jacobian at xi = 0,
// exposed for finite-difference verification.
double point_to_plane_residual(const Twist& xi, const Eigen::Vector3d& y,
                               const Eigen::Vector3d& q, const Eigen::Vector3d& n);
Twist point_to_plane_jacobian(const Eigen::Vector3d& y, const Eigen::Vector3d& n);

}  // namespace detail

}  // namespace lumenav
