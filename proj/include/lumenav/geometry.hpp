#pragma once

#include <Eigen/Dense>

namespace lumenav {

// Intrinsic X-Y-Z Euler angles (roll-pitch-yaw applied in the camera frame),
// radians. rotation = Rx(rx) * Ry(ry) * Rz(rz).
struct EulerAngles {
  double rx{0}, ry{0}, rz{0};
};

// Rigid transform x -> rotation * x + translation. Translations in mm.
// Camera frame: +z forward along the optical axis, +x right, +y down.
// Trajectory poses are camera-to-world.
struct Pose {
  Eigen::Matrix3d rotation{Eigen::Matrix3d::Identity()};
  Eigen::Vector3d translation{Eigen::Vector3d::Zero()};

  static Pose Identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return rotation * x + translation; }
};

// compose(a, b)(x) = a(b(x))
Pose compose(const Pose& a, const Pose& b);
Pose invert(const Pose& p);

// rotation orthonormal (R^T R = I, det = +1) within tol.
bool is_rigid(const Pose& p, double tol = 1e-9);

// Nearest rotation matrix by SVD; translation untouched.
Pose orthonormalized(const Pose& p);

// Geodesic rotation angle in radians.
double rotation_angle(const Eigen::Matrix3d& r);

struct CameraIntrinsics {
  double fx{0}, fy{0}, cx{0}, cy{0};
  int width{0}, height{0};
};

bool intrinsics_valid(const CameraIntrinsics& k);
CameraIntrinsics scaled(const CameraIntrinsics& k, double factor);

// Pinhole projection; throws NonPositiveDepth when x.z() <= 0.
Eigen::Vector2d project(const CameraIntrinsics& k, const Eigen::Vector3d& x);

// Inverse of project; throws NonPositiveDepth when depth <= 0.
Eigen::Vector3d unproject(const CameraIntrinsics& k, const Eigen::Vector2d& p, double depth);

Pose euler_to_pose(const EulerAngles& e, const Eigen::Vector3d& t = Eigen::Vector3d::Zero());

struct EulerDecomposition {
  EulerAngles angles;
  Eigen::Vector3d translation;
  bool gimbal_lock{false};  // |ry| within 1e-6 of pi/2; rz fixed to 0 in that case
};
EulerDecomposition pose_to_euler(const Pose& p);

using Twist = Eigen::Matrix<double, 6, 1>;  // [v; w], translation then rotation

Pose se3_exp(const Twist& xi);

}  // namespace lumenav
