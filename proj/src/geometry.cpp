#include "lumenav/geometry.hpp"

#include <cmath>

#include "lumenav/errors.hpp"

namespace lumenav {

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose invert(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

bool is_rigid(const Pose& p, double tol) {
  const Eigen::Matrix3d err = p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity();
  if (err.norm() > tol) return false;
  return std::abs(p.rotation.determinant() - 1.0) <= tol && p.translation.allFinite();
}

Pose orthonormalized(const Pose& p) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(p.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return {r, p.translation};
}

double rotation_angle(const Eigen::Matrix3d& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

bool intrinsics_valid(const CameraIntrinsics& k) {
  return k.fx > 0 && k.fy > 0 && k.width > 0 && k.height > 0 && k.cx >= 0 && k.cx < k.width &&
         k.cy >= 0 && k.cy < k.height;
}

CameraIntrinsics scaled(const CameraIntrinsics& k, double factor) {
  CameraIntrinsics out;
  out.fx = k.fx * factor;
  out.fy = k.fy * factor;
  out.cx = k.cx * factor;
  out.cy = k.cy * factor;
  out.width = static_cast<int>(std::lround(k.width * factor));
  out.height = static_cast<int>(std::lround(k.height * factor));
  return out;
}

Eigen::Vector2d project(const CameraIntrinsics& k, const Eigen::Vector3d& x) {
  if (x.z() <= 0) throw NonPositiveDepth("point behind camera, z=" + std::to_string(x.z()));
  return {k.fx * x.x() / x.z() + k.cx, k.fy * x.y() / x.z() + k.cy};
}

Eigen::Vector3d unproject(const CameraIntrinsics& k, const Eigen::Vector2d& p, double depth) {
  if (depth <= 0) throw NonPositiveDepth("depth=" + std::to_string(depth));
  return {(p.x() - k.cx) / k.fx * depth, (p.y() - k.cy) / k.fy * depth, depth};
}

namespace {

Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

}  // namespace

Pose euler_to_pose(const EulerAngles& e, const Eigen::Vector3d& t) {
  return {rot_x(e.rx) * rot_y(e.ry) * rot_z(e.rz), t};
}

EulerDecomposition pose_to_euler(const Pose& p) {
  // R = Rx(rx) Ry(ry) Rz(rz):
  //   R(0,2) = sin(ry), R(1,2) = -sin(rx) cos(ry), R(2,2) = cos(rx) cos(ry),
  //   R(0,1) = -cos(ry) sin(rz), R(0,0) = cos(ry) cos(rz).
  const Eigen::Matrix3d& r = p.rotation;
  EulerDecomposition out;
  out.translation = p.translation;
  const double sy = std::clamp(r(0, 2), -1.0, 1.0);
  out.angles.ry = std::asin(sy);
  if (std::abs(std::abs(out.angles.ry) - M_PI / 2.0) < 1e-6) {
    // Gimbal lock: only rx +/- rz is determined. Canonical split with rz = 0.
    out.gimbal_lock = true;
    out.angles.ry = (sy > 0) ? M_PI / 2.0 : -M_PI / 2.0;
    out.angles.rx = std::atan2(r(1, 0), r(1, 1));
    out.angles.rz = 0;
  } else {
    out.angles.rx = std::atan2(-r(1, 2), r(2, 2));
    out.angles.rz = std::atan2(-r(0, 1), r(0, 0));
  }
  return out;
}

Pose se3_exp(const Twist& xi) {
  const Eigen::Vector3d v = xi.head<3>();
  const Eigen::Vector3d w = xi.tail<3>();
  const double theta = w.norm();
  const Eigen::Matrix3d wx = skew(w);
  Eigen::Matrix3d r, vmat;
  if (theta < 1e-9) {
    r = Eigen::Matrix3d::Identity() + wx + 0.5 * wx * wx;
    vmat = Eigen::Matrix3d::Identity() + 0.5 * wx + (1.0 / 6.0) * wx * wx;
  } else {
    const double t2 = theta * theta;
    r = Eigen::Matrix3d::Identity() + std::sin(theta) / theta * wx +
        (1.0 - std::cos(theta)) / t2 * wx * wx;
    vmat = Eigen::Matrix3d::Identity() + (1.0 - std::cos(theta)) / t2 * wx +
           (theta - std::sin(theta)) / (t2 * theta) * wx * wx;
  }
  return {r, vmat * v};
}

}  // namespace lumenav
