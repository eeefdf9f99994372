#include "lumenav/ego_motion.hpp"

#include <cmath>
#include <vector>

#include "lumenav/errors.hpp"

namespace lumenav {

namespace detail {

double point_to_plane_residual(const Twist& xi, const Eigen::Vector3d& y,
                               const Eigen::Vector3d& q, const Eigen::Vector3d& n) {
  return n.dot(se3_exp(xi).apply(y) - q);
}

Twist point_to_plane_jacobian(const Eigen::Vector3d& y, const Eigen::Vector3d& n) {
  Twist j;
  j.head<3>() = n;
  j.tail<3>() = y.cross(n);
  return j;
}

}  // namespace detail

namespace {

DepthMap downsample(const DepthMap& d) {
  DepthMap out(d.width / 2, d.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      double acc = 0;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int sx = 2 * x + dx, sy = 2 * y + dy;
          if (sx < d.width && sy < d.height && d.is_valid(sx, sy)) {
            acc += d.at(sx, sy);
            ++n;
          }
        }
      }
      if (n > 0) out.set(x, y, acc / n);
    }
  }
  return out;
}

struct ReferenceGrid {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;
  std::vector<uint8_t> has_normal;
};

// Normals from central differences on the unprojected grid; border excluded.
ReferenceGrid build_reference(const DepthMap& d, const CameraIntrinsics& k) {
  ReferenceGrid g;
  const size_t n = d.values.size();
  g.points.assign(n, Eigen::Vector3d::Zero());
  g.normals.assign(n, Eigen::Vector3d::Zero());
  g.has_normal.assign(n, 0);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      if (d.is_valid(x, y))
        g.points[d.index(x, y)] = unproject(k, {double(x), double(y)}, d.at(x, y));
  for (int y = 1; y + 1 < d.height; ++y) {
    for (int x = 1; x + 1 < d.width; ++x) {
      if (!d.is_valid(x, y) || !d.is_valid(x - 1, y) || !d.is_valid(x + 1, y) ||
          !d.is_valid(x, y - 1) || !d.is_valid(x, y + 1))
        continue;
      const Eigen::Vector3d du = g.points[d.index(x + 1, y)] - g.points[d.index(x - 1, y)];
      const Eigen::Vector3d dv = g.points[d.index(x, y + 1)] - g.points[d.index(x, y - 1)];
      Eigen::Vector3d nrm = du.cross(dv);
      const double len = nrm.norm();
      if (len < 1e-12) continue;
      g.normals[d.index(x, y)] = nrm / len;
      g.has_normal[d.index(x, y)] = 1;
    }
  }
  return g;
}

}  // namespace

EgoMotionEstimate estimate_relative_pose(const DepthMap& depth_a, const DepthMap& depth_b,
                                         const CameraIntrinsics& k, const Pose& init,
                                         const EgoMotionConfig& cfg) {
  if (!depth_a.same_shape(depth_b) || depth_a.width != k.width || depth_a.height != k.height)
    throw DimensionMismatch("ego-motion depth shapes");

  std::vector<DepthMap> pyr_a{depth_a}, pyr_b{depth_b};
  std::vector<CameraIntrinsics> pyr_k{k};
  for (int l = 1; l < cfg.pyramid_levels; ++l) {
    pyr_a.push_back(downsample(pyr_a.back()));
    pyr_b.push_back(downsample(pyr_b.back()));
    CameraIntrinsics kk = pyr_k.back();
    kk.fx *= 0.5;
    kk.fy *= 0.5;
    // Pixel-center convention: coarse pixel (x, y) averages the 2x2 block
    // centered at fine coordinates (2x + 0.5, 2y + 0.5).
    kk.cx = 0.5 * kk.cx - 0.25;
    kk.cy = 0.5 * kk.cy - 0.25;
    kk.width = pyr_a.back().width;
    kk.height = pyr_a.back().height;
    pyr_k.push_back(kk);
  }

  EgoMotionEstimate est;
  est.pose = init;
  int total_iterations = 0;

  for (int level = cfg.pyramid_levels - 1; level >= 0; --level) {
    const DepthMap& da = pyr_a[level];
    const DepthMap& db = pyr_b[level];
    const CameraIntrinsics& kl = pyr_k[level];
    const ReferenceGrid ref = build_reference(da, kl);
    const int stride = (level == 0) ? std::max(1, cfg.finest_stride) : 1;
    const long candidate_pixels =
        (long(db.width) / stride + 1) * (long(db.height) / stride + 1);

    double start_residual = -1;
    double best_post_step = std::numeric_limits<double>::infinity();
    Pose best_pose = est.pose;
    double prev_residual = std::numeric_limits<double>::infinity();
    bool stepped = false;
    est.converged = false;  // reflects the last (finest) level

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
      Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
      Twist g = Twist::Zero();
      double abs_res = 0;
      long count = 0;

      for (int y = 0; y < db.height; y += stride) {
        for (int x = 0; x < db.width; x += stride) {
          if (!db.is_valid(x, y)) continue;
          const Eigen::Vector3d xb = unproject(kl, {double(x), double(y)}, db.at(x, y));
          const Eigen::Vector3d yw = est.pose.apply(xb);
          if (yw.z() <= 0) continue;
          const Eigen::Vector2d uv = project(kl, yw);
          const BilinearSample za = sample_depth_bilinear(da, uv.x(), uv.y());
          if (!za.valid) continue;
          const int px = static_cast<int>(std::lround(uv.x()));
          const int py = static_cast<int>(std::lround(uv.y()));
          if (px < 0 || px >= da.width || py < 0 || py >= da.height) continue;
          if (!ref.has_normal[da.index(px, py)]) continue;
          const Eigen::Vector3d n = ref.normals[da.index(px, py)];
          const Eigen::Vector3d q = unproject(kl, uv, za.value);
          const double r = n.dot(yw - q);
          const double ar = std::abs(r);
          const double w = ar <= cfg.huber_delta ? 1.0 : cfg.huber_delta / ar;
          const Twist j = detail::point_to_plane_jacobian(yw, n);
          h.noalias() += w * j * j.transpose();
          g.noalias() += w * j * r;
          abs_res += ar;
          ++count;
        }
      }

      if (count < std::max<long>(6, long(0.05 * double(candidate_pixels))))
        throw InsufficientOverlap("associations=" + std::to_string(count) + " at level " +
                                  std::to_string(level));

      const double mean_res = abs_res / double(count);
      if (!std::isfinite(mean_res))
        throw SolverDiverged("non-finite residual at level " + std::to_string(level));
      if (start_residual < 0) start_residual = mean_res;
      // The level's starting pose is always a candidate; a level that cannot
      // improve on it keeps it rather than diverging.
      if (mean_res < best_post_step) {
        best_post_step = mean_res;
        best_pose = est.pose;
      }
      // Runaway steps (association set collapsing toward a false minimum).
      if (stepped && mean_res > 4.0 * (start_residual + cfg.huber_delta))
        throw SolverDiverged("residual increased across pyramid level " + std::to_string(level));
      ++total_iterations;
      if (std::abs(prev_residual - mean_res) < cfg.convergence_threshold) {
        est.converged = true;
        prev_residual = mean_res;
        break;
      }
      prev_residual = mean_res;

      const Twist xi = h.ldlt().solve(-g);
      if (!xi.allFinite()) throw SolverDiverged("non-finite update at level " + std::to_string(level));
      est.pose = compose(se3_exp(xi), est.pose);
      stepped = true;
    }

    est.pose = best_pose;
    est.residual = stepped ? best_post_step : start_residual;
    est.pose = orthonormalized(est.pose);
  }

  est.iterations = total_iterations;
  return est;
}

double pose_error(const Pose& gt, const Pose& pred, double omega) {
  const EulerDecomposition eg = pose_to_euler(gt);
  const EulerDecomposition ep = pose_to_euler(pred);
  if (eg.gimbal_lock || ep.gimbal_lock)
    throw GimbalLock("Euler decomposition degenerate in pose_error");
  const Eigen::Vector3d dr(eg.angles.rx - ep.angles.rx, eg.angles.ry - ep.angles.ry,
                           eg.angles.rz - ep.angles.rz);
  return (gt.translation - pred.translation).norm() + omega * dr.norm();
}

TrainingPairSampler::TrainingPairSampler(int trajectory_length, uint64_t seed)
    : length_(trajectory_length), rng_(seed) {
  if (trajectory_length <= 11)
    throw TrajectoryTooShort("need length > 11, got " + std::to_string(trajectory_length));
}

std::pair<int, int> TrainingPairSampler::next() {
  std::uniform_int_distribution<int> offset_dist(0, 9);
  const int raw = offset_dist(rng_);
  const int n = raw < 5 ? raw - 5 : raw - 4;  // {-5..-1, 1..5}
  const int lo = std::max(0, -n);
  const int hi = length_ - 1 - std::max(0, n);
  std::uniform_int_distribution<int> frame_dist(lo, hi);
  return {frame_dist(rng_), n};
}

}  // namespace lumenav
