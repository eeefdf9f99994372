#pragma once

#include <limits>

#include "lumenav/depth_map.hpp"
#include "lumenav/geometry.hpp"
#include "lumenav/mesh.hpp"

namespace lumenav {

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d dir;  // not necessarily unit length
};

struct RayHit {
  double t{std::numeric_limits<double>::infinity()};
  int triangle{-1};
  bool hit() const { return triangle >= 0; }
};

// BVH-accelerated depth renderer over an immutable triangle mesh. Both-face
// hits are counted (the camera travels inside the lumen and surface
// orientation of segmented meshes is unreliable). Depth is z-depth along the
// optical axis, not Euclidean ray length.
class Renderer {
 public:
  explicit Renderer(TriangleMesh mesh);

  RayHit cast(const Ray& ray) const;
  // Exhaustive all-triangle intersection with the same primitive intersector
  // and the same nearest-hit tie rule (lower triangle index wins on equal t).
  RayHit cast_brute_force(const Ray& ray) const;

  // camera_to_world pose; invalid pixels where no triangle is hit.
  DepthMap render(const CameraIntrinsics& k, const Pose& camera_to_world) const;

  void set_threads(int n) { threads_ = n < 1 ? 1 : n; }
  const TriangleMesh& mesh() const { return mesh_; }

 private:
  struct Node {
    Eigen::Vector3d bmin, bmax;
    int left{-1}, right{-1};  // interior when left >= 0
    int first{0}, count{0};   // leaf triangle range into order_
  };

  int build(int first, int count, std::vector<Eigen::Vector3d>& centroids);
  void consider(const Ray& ray, int tri, RayHit& best) const;

  TriangleMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  int threads_{1};
};

}  // namespace lumenav
