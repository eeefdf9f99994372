#pragma once

#include <string>
#include <vector>

#include "lumenav/geometry.hpp"
#include "lumenav/mesh.hpp"
#include "lumenav/simulator_types.hpp"

namespace lumenav {

// Key-value text file: fx, fy, cx, cy, width, height (one "key = value" per
// line, '#' comments allowed).
void save_intrinsics(const std::string& path, const CameraIntrinsics& k);
CameraIntrinsics load_intrinsics(const std::string& path);

// CSV: frame,tx,ty,tz,rx,ry,rz with translations in mm and intrinsic X-Y-Z
// Euler angles in radians.
void save_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory_csv(const std::string& path);

struct Dataset {
  TriangleMesh mesh;
  CameraIntrinsics intrinsics;
  Trajectory ground_truth;  // may be empty
  std::vector<std::string> clean_depth_paths;
  std::vector<std::string> corrupt_depth_paths;
  double frame_rate{30.0};
};

Dataset load_dataset(const std::string& dir);

}  // namespace lumenav
