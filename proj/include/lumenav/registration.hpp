#pragma once

#include <atomic>
#include <functional>

#include "lumenav/depth_map.hpp"
#include "lumenav/geometry.hpp"
#include "lumenav/renderer.hpp"

namespace lumenav {

struct RegistrationConfig {
  double tolerance{0.01};  // relative objective decrease per Powell sweep
  int max_iterations{10};  // Powell sweeps
  Eigen::Vector3d bound_translation{10.0, 10.0, 10.0};  // +/- mm around init
  Eigen::Vector3d bound_rotation{0.35, 0.35, 0.35};     // +/- rad around init
  int line_search_max_evals{24};
};

struct RegistrationResult {
  Pose pose;
  double ncc{0};
  int evaluations{0};  // objective calls = renders
  bool converged{false};
};

// Zero-mean normalized cross-correlation over the joint valid set.
double ncc(const DepthMap& a, const DepthMap& b);

struct PowellResult {
  Eigen::VectorXd x;
  double f{0};
  int evaluations{0};
  bool converged{false};
};

// Direction-set minimization with bounded golden-section line searches.
// Directions updated by replacing the direction of largest decrease with the
// overall sweep displacement. Never leaves [lower, upper]; never returns a
// point worse than x0. Cooperative cancellation is checked between line
// searches. Throws NonFiniteObjective if f returns NaN or infinity.
PowellResult powell_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, double tolerance, int max_sweeps,
                             int line_search_max_evals,
                             const std::atomic<bool>* cancel = nullptr);

// Absolute pose recovery: maximizes ncc(observed, render(pose)) over a
// 6-vector chart (translation mm, Euler rad) relative to init. Renders with an
// empty or constant joint valid set score -1. Throws DegenerateObservation
// when the observed map has under 5% valid pixels.
RegistrationResult register_depth(const DepthMap& observed, const Renderer& r,
                                  const CameraIntrinsics& k, const Pose& init,
                                  const RegistrationConfig& cfg,
                                  const std::atomic<bool>* cancel = nullptr);

}  // namespace lumenav
