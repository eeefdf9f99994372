#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <thread>

#include "helpers.hpp"
#include "lumenav/dual_loop.hpp"
#include "lumenav/errors.hpp"

using namespace lumenav;

namespace {

const CameraIntrinsics kCam{30, 30, 16, 16, 32, 32};
// Higher-resolution camera for end-to-end accuracy checks: at 32x32 the wall
// relief aliases and the inner loop cannot hold sub-millimeter accuracy.
const CameraIntrinsics kCam64{60, 60, 32, 32, 64, 64};

Renderer& tube_renderer() {
  static Renderer r(testutil::make_bumpy_tube(8.0, -20, 300, 160, 256));
  return r;
}

DepthMap flat_depth(double z = 20.0) {
  DepthMap d(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) d.set(x, y, z + 0.01 * x);
  return d;
}

EgoSolver identity_ego() {
  return [](const DepthMap&, const DepthMap&, const CameraIntrinsics&, const Pose&,
            const EgoMotionConfig&) { return EgoMotionEstimate{Pose::Identity(), 0, 1, true}; };
}

RegistrationSolver fixed_registration(const Pose& p) {
  return [p](const DepthMap&, const Pose&, const std::atomic<bool>*) {
    return RegistrationResult{p, 1.0, 1, true};
  };
}

}  // namespace

TEST_CASE("tracker construction contract") {
  DualLoopConfig cfg;
  Pose init;
  init.translation = {1, 2, 3};

  Tracker t(cfg, tube_renderer(), kCam, init, flat_depth(), false);
  t.set_ego_solver(identity_ego());
  t.set_registration_solver(fixed_registration(init));
  CHECK(t.last_output().frame_index == 0);
  CHECK((t.last_output().pose.translation - init.translation).norm() == 0);

  DepthMap empty(32, 32);
  CHECK_THROWS_AS(Tracker(cfg, tube_renderer(), kCam, init, empty, false), DegenerateObservation);

  DualLoopConfig bad;
  bad.m = 0;
  CHECK_THROWS_AS(Tracker(bad, tube_renderer(), kCam, init, flat_depth(), false), InvalidParams);
}

TEST_CASE("frames must arrive in order") {
  DualLoopConfig cfg;
  Tracker t(cfg, tube_renderer(), kCam, Pose::Identity(), flat_depth(), false);
  t.set_ego_solver(identity_ego());
  t.set_registration_solver(fixed_registration(Pose::Identity()));
  t.on_frame(flat_depth(), 1);
  t.on_frame(flat_depth(), 2);
  CHECK_THROWS_AS(t.on_frame(flat_depth(), 2), OutOfOrderFrame);
  CHECK_THROWS_AS(t.on_frame(flat_depth(), 1), OutOfOrderFrame);
}

TEST_CASE("fusion is the exact composition of registration and ego-motion") {
  DualLoopConfig cfg;
  cfg.m = 4;
  std::mt19937_64 rng(51);
  const Pose reg_pose = testutil::random_pose(rng, 5, 0.4);
  const Pose rel = testutil::random_pose(rng, 1, 0.05);

  Tracker t(cfg, tube_renderer(), kCam, Pose::Identity(), flat_depth(), false);
  t.set_registration_solver(fixed_registration(reg_pose));
  t.set_ego_solver([rel](const DepthMap&, const DepthMap&, const CameraIntrinsics&, const Pose&,
                         const EgoMotionConfig&) { return EgoMotionEstimate{rel, 0, 1, true}; });

  for (int f = 1; f < 4; ++f) {
    const PoseEstimate e = t.on_frame(flat_depth(), f);
    CHECK(e.source == PoseSource::EgoMotion);
    // Intra-window outputs compose the current belief with the relative pose.
    const Pose expect = rel;  // belief is identity
    CHECK((e.pose.translation - expect.translation).norm() < 1e-15);
  }
  const PoseEstimate fused = t.on_frame(flat_depth(), 4);
  CHECK(fused.source == PoseSource::Fused);
  const Pose expect = compose(reg_pose, rel);
  CHECK((fused.pose.translation - expect.translation).norm() == 0);
  CHECK((fused.pose.rotation - expect.rotation).norm() == 0);
  CHECK(t.registration_count() == 1);
}

TEST_CASE("windowed drift is eliminated at each fusion") {
  // Static ground truth at the origin. The ego stub drifts +0.1 mm per frame
  // within a window (warm-start accumulation); registration of the reference
  // frame is perfect. Error ramps to (m-1)*0.1 mm just before the boundary and
  // returns to zero at every fused output.
  const int m = 10;
  DualLoopConfig cfg;
  cfg.m = m;
  Tracker t(cfg, tube_renderer(), kCam, Pose::Identity(), flat_depth(), false);
  t.set_registration_solver(fixed_registration(Pose::Identity()));
  int calls = 0;
  t.set_ego_solver([&calls, m](const DepthMap&, const DepthMap&, const CameraIntrinsics&,
                               const Pose&, const EgoMotionConfig&) {
    ++calls;
    Pose p;
    p.translation = {0.1 * (calls % m), 0, 0};
    return EgoMotionEstimate{p, 0, 1, true};
  });

  for (int f = 1; f <= 3 * m; ++f) {
    const PoseEstimate e = t.on_frame(flat_depth(), f);
    const double err = e.pose.translation.norm();
    const int i = f % m;
    if (i == 0) {
      CHECK(e.source == PoseSource::Fused);
      CHECK(err == 0.0);
    } else {
      CHECK(e.source == PoseSource::EgoMotion);
      CHECK(err == doctest::Approx(0.1 * i).epsilon(1e-12));
      if (i == m - 1) CHECK(err == doctest::Approx(0.1 * (m - 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("at most m-1 consecutive ego-motion outputs between fusions") {
  DualLoopConfig cfg;
  cfg.m = 7;
  Tracker t(cfg, tube_renderer(), kCam, Pose::Identity(), flat_depth(), false);
  t.set_ego_solver(identity_ego());
  t.set_registration_solver(fixed_registration(Pose::Identity()));
  int consecutive = 0;
  for (int f = 1; f <= 40; ++f) {
    const PoseEstimate e = t.on_frame(flat_depth(), f);
    if (e.source == PoseSource::Fused) {
      consecutive = 0;
    } else {
      ++consecutive;
      CHECK(consecutive <= cfg.m - 1);
    }
    if (f % cfg.m == 0) CHECK(e.source == PoseSource::Fused);
  }
}

TEST_CASE("ego-motion failure falls back to the last pose") {
  DualLoopConfig cfg;
  cfg.m = 100;
  Tracker t(cfg, tube_renderer(), kCam, Pose::Identity(), flat_depth(), false);
  t.set_registration_solver(fixed_registration(Pose::Identity()));
  int calls = 0;
  t.set_ego_solver([&calls](const DepthMap&, const DepthMap&, const CameraIntrinsics&,
                            const Pose&, const EgoMotionConfig&) -> EgoMotionEstimate {
    if (++calls == 2) throw InsufficientOverlap("stub");
    Pose p;
    p.translation = {0, 0, 0.5 * calls};
    return {p, 0, 1, true};
  });
  const PoseEstimate e1 = t.on_frame(flat_depth(), 1);
  const PoseEstimate e2 = t.on_frame(flat_depth(), 2);
  CHECK(e2.fallback);
  CHECK((e2.pose.translation - e1.pose.translation).norm() == 0);
  CHECK(t.fallback_count() == 1);
  const PoseEstimate e3 = t.on_frame(flat_depth(), 3);
  CHECK(!e3.fallback);
}

TEST_CASE("m=1 degenerates to warm-started registration") {
  DualLoopConfig cfg;
  cfg.m = 1;
  Tracker t(cfg, tube_renderer(), kCam, Pose::Identity(), flat_depth(), false);
  t.set_ego_solver(identity_ego());
  std::vector<Pose> inits;
  t.set_registration_solver(
      [&inits](const DepthMap&, const Pose& init, const std::atomic<bool>*) {
        inits.push_back(init);
        Pose next = init;
        next.translation.z() += 1.0;
        return RegistrationResult{next, 1.0, 1, true};
      });
  for (int f = 1; f <= 5; ++f) {
    const PoseEstimate e = t.on_frame(flat_depth(), f);
    CHECK(e.source == PoseSource::Fused);
    CHECK(e.pose.translation.z() == doctest::Approx(double(f)));
  }
  // Each collected registration was warm-started at the previous fused belief.
  REQUIRE(inits.size() == 5);
  for (size_t i = 0; i < inits.size(); ++i)
    CHECK(inits[i].translation.z() == doctest::Approx(double(i)));
}

TEST_CASE("flush semantics for sequences shorter than m") {
  const Renderer& r = tube_renderer();
  std::vector<DepthMap> frames;
  for (int f = 0; f < 5; ++f) {
    Pose p;
    p.translation = {0, 0, 0.5 * f};
    frames.push_back(r.render(kCam, p));
  }
  DualLoopConfig cfg;
  cfg.m = 10;
  cfg.registration.max_iterations = 2;
  cfg.registration.line_search_max_evals = 8;
  const TrackResult res = run_offline(cfg, r, kCam, Pose::Identity(), frames);
  REQUIRE(res.estimates.size() == 5);
  CHECK(res.estimates.back().source == PoseSource::Fused);
  CHECK(res.registration_count == 1);
}

TEST_CASE("static camera with real solvers holds the initial pose") {
  const Renderer& r = tube_renderer();
  Pose init;
  init.translation = {0.2, -0.3, 5.0};
  const DepthMap d = r.render(kCam, init);
  DualLoopConfig cfg;
  cfg.m = 4;
  cfg.registration.max_iterations = 3;
  const std::vector<DepthMap> frames(9, d);
  const TrackResult res = run_offline(cfg, r, kCam, init, frames);
  for (const PoseEstimate& e : res.estimates) {
    CHECK((e.pose.translation - init.translation).norm() < 0.2);
    CHECK(rotation_angle(e.pose.rotation.transpose() * init.rotation) < 0.01);
  }
}

TEST_CASE("tracking a noiseless straight-tube sequence stays within 0.5 mm") {
  const Renderer& r = tube_renderer();
  std::vector<Pose> gt;
  std::vector<DepthMap> frames;
  for (int f = 0; f < 100; ++f) {
    Pose p;
    p.translation = {0, 0, 0.5 * f};
    gt.push_back(p);
    frames.push_back(r.render(kCam64, p));
  }
  DualLoopConfig cfg;
  cfg.m = 10;
  cfg.registration.max_iterations = 3;
  const TrackResult res = run_offline(cfg, r, kCam64, gt[0], frames);
  REQUIRE(res.estimates.size() == 100);
  double worst = 0;
  for (int f = 0; f < 100; ++f)
    worst = std::max(worst,
                     (res.estimates[f].pose.translation - gt[f].translation).norm());
  CHECK(worst <= 0.5);
}

TEST_CASE("offline and paced concurrent runs agree when registration fits its budget") {
  const Renderer& r = tube_renderer();
  std::vector<DepthMap> frames;
  for (int f = 0; f < 21; ++f) {
    Pose p;
    p.translation = {0, 0, 0.4 * f};
    frames.push_back(r.render(kCam, p));
  }
  DualLoopConfig cfg;
  cfg.m = 10;
  cfg.registration.max_iterations = 2;
  cfg.registration.line_search_max_evals = 8;

  const TrackResult offline = run_offline(cfg, r, kCam, Pose::Identity(), frames);

  Tracker paced(cfg, r, kCam, Pose::Identity(), frames[0], true);
  std::vector<PoseEstimate> estimates{paced.last_output()};
  for (size_t f = 1; f < frames.size(); ++f) {
    // Pace frames so the background registration always finishes in time.
    std::this_thread::sleep_for(std::chrono::milliseconds(60));
    estimates.push_back(paced.on_frame(frames[f], int(f)));
  }
  REQUIRE(estimates.size() == offline.estimates.size());
  for (size_t f = 0; f < estimates.size(); ++f) {
    CHECK(estimates[f].pose.translation == offline.estimates[f].pose.translation);
    CHECK(estimates[f].pose.rotation == offline.estimates[f].pose.rotation);
  }
}
