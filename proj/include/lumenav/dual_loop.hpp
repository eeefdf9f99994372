#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "lumenav/depth_map.hpp"
#include "lumenav/ego_motion.hpp"
#include "lumenav/geometry.hpp"
#include "lumenav/registration.hpp"
#include "lumenav/renderer.hpp"
#include "lumenav/simulator_types.hpp"

namespace lumenav {

struct DualLoopConfig {
  int m{10};  // frames per registration window
  RegistrationConfig registration;
  EgoMotionConfig egomotion;
};

enum class PoseSource { EgoMotion, Fused };

struct PoseEstimate {
  Pose pose;  // absolute, mesh world frame
  int frame_index{0};
  PoseSource source{PoseSource::EgoMotion};
  double latency_ms{0};
  bool fallback{false};  // ego-motion failed; last pose carried forward
};

using EgoSolver = std::function<EgoMotionEstimate(const DepthMap& ref, const DepthMap& cur,
                                                  const CameraIntrinsics&, const Pose& init,
                                                  const EgoMotionConfig&)>;
using RegistrationSolver = std::function<RegistrationResult(
    const DepthMap& observed, const Pose& init, const std::atomic<bool>* cancel)>;

// Dual-loop tracker: ego-motion against the reference depth on every frame,
// depth registration of the reference frame over each m-frame window, fused at
// the window boundary and used to warm-start the next registration.
class Tracker {
 public:
  // Starts the registration of frame 0 immediately. In async mode the
  // registration runs on a background thread and is cancelled (best-so-far
  // kept) if it has not finished by the window boundary.
  Tracker(const DualLoopConfig& cfg, const Renderer& renderer, const CameraIntrinsics& k,
          const Pose& initial_pose, const DepthMap& first_depth, bool async);
  ~Tracker();

  Tracker(const Tracker&) = delete;
  Tracker& operator=(const Tracker&) = delete;

  // Stub injection for testing; replaces the built-in solvers. Must be called
  // before the first on_frame.
  void set_ego_solver(EgoSolver solver) { ego_solver_ = std::move(solver); }
  void set_registration_solver(RegistrationSolver solver) { reg_solver_ = std::move(solver); }

  PoseEstimate on_frame(const DepthMap& depth, int frame_index);

  // Flush: if the stream ended mid-window, fuse the pending registration into
  // the last frame's estimate. Returns the final estimate (or nullopt when the
  // last output was already fused).
  std::optional<PoseEstimate> finish();

  int registration_count() const { return registration_count_; }
  int fallback_count() const { return fallback_count_; }
  const PoseEstimate& last_output() const { return last_output_; }

 private:
  struct PendingRegistration;

  void start_registration(const DepthMap& observed, const Pose& init);
  RegistrationResult collect_registration();

  DualLoopConfig cfg_;
  const Renderer& renderer_;
  CameraIntrinsics k_;
  bool async_;

  int ref_time_{0};
  Pose ref_pose_;       // current fused belief for the reference frame
  DepthMap ref_depth_;
  Pose last_relative_;  // warm start for the next ego-motion estimate
  PoseEstimate last_output_;
  int last_frame_{-1};
  bool last_rel_valid_{false};

  EgoSolver ego_solver_;
  RegistrationSolver reg_solver_;
  std::unique_ptr<PendingRegistration> pending_;

  int registration_count_{0};
  int fallback_count_{0};
};

struct TrackResult {
  Trajectory trajectory;
  std::vector<PoseEstimate> estimates;
  int registration_count{0};
  int fallback_count{0};
};

enum class TrackingMode { DualLoop, EgoOnly, RegistrationOnly };

// Deterministic single-threaded replay of the dual loop; registration runs
// synchronously at window boundaries and produces identical outputs to the
// concurrent tracker when no registration overruns its budget.
TrackResult run_offline(const DualLoopConfig& cfg, const Renderer& renderer,
                        const CameraIntrinsics& k, const Pose& initial_pose,
                        const std::vector<DepthMap>& depth_sequence,
                        TrackingMode mode = TrackingMode::DualLoop);

// Concurrent variant: registration on a background thread, cancelled at the
// boundary if still running.
TrackResult run_concurrent(const DualLoopConfig& cfg, const Renderer& renderer,
                           const CameraIntrinsics& k, const Pose& initial_pose,
                           const std::vector<DepthMap>& depth_sequence);

}  // namespace lumenav
