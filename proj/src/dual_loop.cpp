#include "lumenav/dual_loop.hpp"

#include <chrono>

#include "lumenav/errors.hpp"

namespace lumenav {

struct Tracker::PendingRegistration {
  std::atomic<bool> cancel{false};
  std::atomic<bool> done{false};
  std::thread thread;
  RegistrationResult result;
  // sync mode: deferred inputs, computed at the window boundary
  bool sync{false};
  DepthMap observed;
  Pose init;

  ~PendingRegistration() {
    if (thread.joinable()) {
      cancel.store(true);
      thread.join();
    }
  }
};

Tracker::Tracker(const DualLoopConfig& cfg, const Renderer& renderer, const CameraIntrinsics& k,
                 const Pose& initial_pose, const DepthMap& first_depth, bool async)
    : cfg_(cfg), renderer_(renderer), k_(k), async_(async) {
  if (cfg_.m < 1) throw InvalidParams("dual-loop m must be >= 1");
  if (first_depth.valid_count() < 0.05 * double(first_depth.width) * first_depth.height)
    throw DegenerateObservation("first depth map has <5% valid pixels");

  ego_solver_ = [](const DepthMap& a, const DepthMap& b, const CameraIntrinsics& kk,
                   const Pose& init, const EgoMotionConfig& ecfg) {
    return estimate_relative_pose(a, b, kk, init, ecfg);
  };
  reg_solver_ = [this](const DepthMap& observed, const Pose& init,
                       const std::atomic<bool>* cancel) {
    return register_depth(observed, renderer_, k_, init, cfg_.registration, cancel);
  };

  ref_time_ = 0;
  ref_pose_ = initial_pose;
  ref_depth_ = first_depth;
  last_relative_ = Pose::Identity();
  last_output_ = {initial_pose, 0, PoseSource::Fused, 0.0, false};
  last_frame_ = 0;
  start_registration(first_depth, initial_pose);
}

Tracker::~Tracker() = default;

void Tracker::start_registration(const DepthMap& observed, const Pose& init) {
  pending_ = std::make_unique<PendingRegistration>();
  pending_->observed = observed;
  pending_->init = init;
  if (async_) {
    auto* p = pending_.get();
    auto solver = reg_solver_;
    p->thread = std::thread([p, solver]() {
      try {
        p->result = solver(p->observed, p->init, &p->cancel);
      } catch (...) {
        // Registration failure behaves like an identity correction.
        p->result = {p->init, 0.0, 0, false};
      }
      p->done.store(true);
    });
  } else {
    pending_->sync = true;
  }
}

RegistrationResult Tracker::collect_registration() {
  if (!pending_) throw SolverDiverged("no pending registration");
  RegistrationResult result;
  if (pending_->sync) {
    result = reg_solver_(pending_->observed, pending_->init, nullptr);
  } else {
    if (!pending_->done.load()) pending_->cancel.store(true);  // take best-so-far
    pending_->thread.join();
    result = pending_->result;
  }
  pending_.reset();
  ++registration_count_;
  return result;
}

PoseEstimate Tracker::on_frame(const DepthMap& depth, int frame_index) {
  if (frame_index <= last_frame_)
    throw OutOfOrderFrame("frame " + std::to_string(frame_index) + " after " +
                          std::to_string(last_frame_));
  const auto t0 = std::chrono::steady_clock::now();

  Pose rel = last_relative_;
  bool fallback = false;
  try {
    const EgoMotionEstimate est =
        ego_solver_(ref_depth_, depth, k_, last_relative_, cfg_.egomotion);
    rel = est.pose;
  } catch (const InsufficientOverlap&) {
    fallback = true;
  } catch (const SolverDiverged&) {
    fallback = true;
  }

  PoseEstimate out;
  out.frame_index = frame_index;
  out.fallback = fallback;

  const int i = frame_index - ref_time_;
  if (i >= cfg_.m) {
    const RegistrationResult reg = collect_registration();
    const Pose fused = compose(reg.pose, rel);
    ref_pose_ = fused;
    ref_time_ = frame_index;
    ref_depth_ = depth;
    last_relative_ = Pose::Identity();
    start_registration(depth, fused);
    out.pose = fused;
    out.source = PoseSource::Fused;
  } else {
    out.pose = fallback ? last_output_.pose : compose(ref_pose_, rel);
    out.source = PoseSource::EgoMotion;
    if (!fallback) last_relative_ = rel;
  }

  if (fallback) ++fallback_count_;
  out.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  last_output_ = out;
  last_frame_ = frame_index;
  return out;
}

std::optional<PoseEstimate> Tracker::finish() {
  if (!pending_ || last_frame_ == ref_time_) {
    pending_.reset();
    return std::nullopt;
  }
  const RegistrationResult reg = collect_registration();
  PoseEstimate out = last_output_;
  out.pose = compose(reg.pose, last_relative_);
  out.source = PoseSource::Fused;
  last_output_ = out;
  return out;
}

namespace {

TrackResult run_tracker(const DualLoopConfig& cfg, const Renderer& renderer,
                        const CameraIntrinsics& k, const Pose& initial_pose,
                        const std::vector<DepthMap>& frames, bool async, TrackingMode mode) {
  if (frames.empty()) throw EmptyInput("empty depth sequence");

  DualLoopConfig eff = cfg;
  if (mode == TrackingMode::RegistrationOnly) eff.m = 1;

  Tracker tracker(eff, renderer, k, initial_pose, frames[0], async);
  if (mode == TrackingMode::EgoOnly) {
    tracker.set_registration_solver(
        [](const DepthMap&, const Pose& init, const std::atomic<bool>*) {
          return RegistrationResult{init, 0.0, 0, true};
        });
  } else if (mode == TrackingMode::RegistrationOnly) {
    tracker.set_ego_solver([](const DepthMap&, const DepthMap&, const CameraIntrinsics&,
                              const Pose&, const EgoMotionConfig&) {
      return EgoMotionEstimate{Pose::Identity(), 0.0, 0, true};
    });
  }

  TrackResult out;
  out.estimates.push_back(tracker.last_output());
  for (size_t f = 1; f < frames.size(); ++f)
    out.estimates.push_back(tracker.on_frame(frames[f], static_cast<int>(f)));
  if (auto flushed = tracker.finish()) out.estimates.back() = *flushed;

  out.registration_count = tracker.registration_count();
  out.fallback_count = tracker.fallback_count();
  for (const PoseEstimate& e : out.estimates)
    out.trajectory.entries.push_back({e.frame_index, e.pose});
  return out;
}

}  // namespace

TrackResult run_offline(const DualLoopConfig& cfg, const Renderer& renderer,
                        const CameraIntrinsics& k, const Pose& initial_pose,
                        const std::vector<DepthMap>& depth_sequence, TrackingMode mode) {
  return run_tracker(cfg, renderer, k, initial_pose, depth_sequence, false, mode);
}

TrackResult run_concurrent(const DualLoopConfig& cfg, const Renderer& renderer,
                           const CameraIntrinsics& k, const Pose& initial_pose,
                           const std::vector<DepthMap>& depth_sequence) {
  return run_tracker(cfg, renderer, k, initial_pose, depth_sequence, true,
                     TrackingMode::DualLoop);
}

}  // namespace lumenav
