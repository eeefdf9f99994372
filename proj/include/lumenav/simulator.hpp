#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lumenav/depth_map.hpp"
#include "lumenav/geometry.hpp"
#include "lumenav/mesh.hpp"
#include "lumenav/renderer.hpp"
#include "lumenav/simulator_types.hpp"

namespace lumenav {

enum class PhantomKind { Tube, YBifurcation };

struct PhantomParams {
  double trunk_radius{8.0};    // mm
  double branch_radius{5.0};   // mm
  double trunk_length{100.0};  // mm
  double branch_length{60.0};  // mm
  double branch_angle{0.5};    // rad, each child off the trunk axis
  double cell_size{1.5};       // marching resolution, mm
};

struct Phantom {
  TriangleMesh mesh;
  std::vector<Eigen::Vector3d> centerline;  // trunk, then into the first child
  std::vector<std::vector<Eigen::Vector3d>> branches;  // all centerline polylines
};

// Watertight interior-viewable phantom: marching tetrahedra over the signed
// distance of a capsule union. Deterministic for fixed params.
Phantom make_phantom(PhantomKind kind, const PhantomParams& params);

// Signed distance of the phantom's capsule union (negative inside the lumen).
double phantom_sdf(PhantomKind kind, const PhantomParams& params, const Eigen::Vector3d& p);

// Isosurface extraction helper; exposed for testing.
TriangleMesh marching_tetrahedra(const std::function<double(const Eigen::Vector3d&)>& sdf,
                                 const Eigen::Vector3d& grid_min, const Eigen::Vector3d& grid_max,
                                 double cell_size);

// Poses marching along the centerline at `speed` mm/frame, looking forward
// with seeded orientation jitter. Camera origins stay on the centerline.
Trajectory generate_trajectory(const std::vector<Eigen::Vector3d>& centerline,
                               double speed_mm_per_frame, double heading_jitter_rad,
                               uint64_t rng_seed, double frame_rate = 30.0);

// Emulates learned-depth estimation error: z' = smooth(z)*(1 - scale_drift)
// + gaussian noise, with a fraction of valid pixels dropped.
struct CorruptionModel {
  double noise_sigma{0};     // mm
  double scale_drift{0};     // dimensionless, |s| < 1
  int smoothing_radius{0};   // px box filter
  double dropout_fraction{0};
  uint64_t rng_seed{0};

  static CorruptionModel phantom_grade(uint64_t seed = 0);
  static CorruptionModel patient_grade(uint64_t seed = 0);
};

DepthMap corrupt_depth(const DepthMap& z, const CorruptionModel& model);

struct DatasetManifest {
  std::string name;
  int frame_count{0};
  uint64_t seed{0};
  std::vector<std::pair<std::string, std::string>> files;  // path, fnv64 hash
};

// Dataset directory layout: mesh.stl, intrinsics.txt, trajectory.csv,
// depth/clean/%06d.dbin, depth/corrupt/%06d.dbin, manifest.json.
DatasetManifest export_dataset(const Phantom& phantom, const Trajectory& traj,
                               const CameraIntrinsics& k, const Renderer& renderer,
                               const CorruptionModel& model, const std::string& out_dir);

uint64_t fnv1a_file(const std::string& path);

}  // namespace lumenav
