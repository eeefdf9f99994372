#include "lumenav/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "lumenav/errors.hpp"

namespace lumenav {

namespace {

constexpr double kTMin = 1e-9;
constexpr int kLeafSize = 4;

// Moller-Trumbore, both faces, double precision. Kept out of line so the BVH
// and brute-force paths execute the exact same instruction sequence: inlining
// would let floating-point contraction round edge-on hits differently per call
// site and break their required bit-identical agreement.
__attribute__((noinline)) bool intersect_triangle(const Ray& ray, const Eigen::Vector3d& v0,
                                                  const Eigen::Vector3d& v1,
                                                  const Eigen::Vector3d& v2, double& t_out) {
  const Eigen::Vector3d e1 = v1 - v0;
  const Eigen::Vector3d e2 = v2 - v0;
  const Eigen::Vector3d pvec = ray.dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-14) return false;
  const double inv_det = 1.0 / det;
  const Eigen::Vector3d tvec = ray.origin - v0;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return false;
  const Eigen::Vector3d qvec = tvec.cross(e1);
  const double v = ray.dir.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = e2.dot(qvec) * inv_det;
  if (t < kTMin) return false;
  t_out = t;
  return true;
}

// Conservative slab test: the computed slab distances carry a few ulps of
// rounding error, so the rejection comparison gets matching slack. Traversal
// may then visit a node it could have skipped, but never skips a node whose
// triangles could beat (or tie) the current best hit -- which keeps the
// traversal result bit-identical to the brute-force scan.
constexpr double kSlabSlack = 1.0 + 1e-12;

bool intersect_aabb(const Ray& ray, const Eigen::Vector3d& inv_dir, const Eigen::Vector3d& bmin,
                    const Eigen::Vector3d& bmax, double t_limit, double& entry) {
  double tmin = 0.0, tmax = t_limit;
  for (int a = 0; a < 3; ++a) {
    double t0 = (bmin[a] - ray.origin[a]) * inv_dir[a];
    double t1 = (bmax[a] - ray.origin[a]) * inv_dir[a];
    if (inv_dir[a] < 0.0) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmax * kSlabSlack < tmin) return false;
  }
  entry = tmin;
  return true;
}

}  // namespace

Renderer::Renderer(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  if (mesh_.triangles.empty()) throw EmptyMesh("renderer needs at least one triangle");
  const int n = static_cast<int>(mesh_.triangles.size());
  order_.resize(n);
  std::vector<Eigen::Vector3d> centroids(n);
  for (int i = 0; i < n; ++i) {
    order_[i] = i;
    const auto& t = mesh_.triangles[i];
    centroids[i] =
        (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
  }
  nodes_.reserve(size_t(2) * n);
  build(0, n, centroids);
}

int Renderer::build(int first, int count, std::vector<Eigen::Vector3d>& centroids) {
  const int node_index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();

  Eigen::Vector3d bmin = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d bmax = -bmin;
  Eigen::Vector3d cmin = bmin, cmax = bmax;
  for (int i = first; i < first + count; ++i) {
    const auto& t = mesh_.triangles[order_[i]];
    for (int v = 0; v < 3; ++v) {
      bmin = bmin.cwiseMin(mesh_.vertices[t[v]]);
      bmax = bmax.cwiseMax(mesh_.vertices[t[v]]);
    }
    cmin = cmin.cwiseMin(centroids[order_[i]]);
    cmax = cmax.cwiseMax(centroids[order_[i]]);
  }
  // Pad the box: the triangle intersector accepts edge-on hits that rounding
  // places a hair outside the exact triangle bounds (e.g. a ray with a zero
  // direction component grazing vertices at coordinate ~1e-16). An exact slab
  // test would prune such a node and break the required bit-identical
  // agreement with the brute-force scan; the padding makes the box contain
  // every point the rounded intersector can report.
  for (int a = 0; a < 3; ++a) {
    const double pad = 1e-9 + 1e-12 * std::max(std::abs(bmin[a]), std::abs(bmax[a]));
    bmin[a] -= pad;
    bmax[a] += pad;
  }
  nodes_[node_index].bmin = bmin;
  nodes_[node_index].bmax = bmax;

  const Eigen::Vector3d extent = cmax - cmin;
  int axis = 0;
  extent.maxCoeff(&axis);
  if (count <= kLeafSize || extent[axis] <= 0.0) {
    nodes_[node_index].first = first;
    nodes_[node_index].count = count;
    return node_index;
  }

  // Binned surface-area-heuristic split along the widest centroid axis; a
  // median split handles the degenerate case where every bin boundary is
  // empty on one side. Tree shape only affects speed, never the cast result.
  constexpr int kBins = 16;
  struct Bin {
    Eigen::Vector3d bmin = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d bmax = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());
    int count = 0;
  };
  Bin bins[kBins];
  const double inv_width = kBins / (cmax[axis] - cmin[axis]);
  auto bin_of = [&](int tri) {
    return std::min(kBins - 1, int((centroids[tri][axis] - cmin[axis]) * inv_width));
  };
  for (int i = first; i < first + count; ++i) {
    const auto& t = mesh_.triangles[order_[i]];
    Bin& b = bins[bin_of(order_[i])];
    for (int v = 0; v < 3; ++v) {
      b.bmin = b.bmin.cwiseMin(mesh_.vertices[t[v]]);
      b.bmax = b.bmax.cwiseMax(mesh_.vertices[t[v]]);
    }
    ++b.count;
  }
  auto half_area = [](const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
    const Eigen::Vector3d e = (hi - lo).cwiseMax(0.0);
    return e.x() * e.y() + e.y() * e.z() + e.z() * e.x();
  };
  double right_cost[kBins];  // cost of bins [i, kBins)
  {
    Bin acc;
    for (int i = kBins - 1; i > 0; --i) {
      acc.bmin = acc.bmin.cwiseMin(bins[i].bmin);
      acc.bmax = acc.bmax.cwiseMax(bins[i].bmax);
      acc.count += bins[i].count;
      right_cost[i] = acc.count > 0 ? acc.count * half_area(acc.bmin, acc.bmax) : 0.0;
    }
  }
  int best_split = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  {
    Bin acc;
    for (int i = 0; i + 1 < kBins; ++i) {
      acc.bmin = acc.bmin.cwiseMin(bins[i].bmin);
      acc.bmax = acc.bmax.cwiseMax(bins[i].bmax);
      acc.count += bins[i].count;
      if (acc.count == 0 || acc.count == count) continue;
      const double cost = acc.count * half_area(acc.bmin, acc.bmax) + right_cost[i + 1];
      if (cost < best_cost) {
        best_cost = cost;
        best_split = i;
      }
    }
  }

  int mid;
  if (best_split >= 0) {
    auto it = std::partition(order_.begin() + first, order_.begin() + first + count,
                             [&](int tri) { return bin_of(tri) <= best_split; });
    mid = int(it - order_.begin());
    // Keep index order inside each side so the build stays deterministic.
    std::sort(order_.begin() + first, order_.begin() + mid);
    std::sort(order_.begin() + mid, order_.begin() + first + count);
  } else {
    mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid,
                     order_.begin() + first + count, [&](int a, int b) {
                       if (centroids[a][axis] != centroids[b][axis])
                         return centroids[a][axis] < centroids[b][axis];
                       return a < b;
                     });
  }
  const int left = build(first, mid - first, centroids);
  const int right = build(mid, first + count - mid, centroids);
  nodes_[node_index].left = left;
  nodes_[node_index].right = right;
  return node_index;
}

void Renderer::consider(const Ray& ray, int tri, RayHit& best) const {
  const auto& t = mesh_.triangles[tri];
  double ht;
  if (!intersect_triangle(ray, mesh_.vertices[t[0]], mesh_.vertices[t[1]], mesh_.vertices[t[2]],
                          ht))
    return;
  if (ht < best.t || (ht == best.t && tri < best.triangle)) {
    best.t = ht;
    best.triangle = tri;
  }
}

RayHit Renderer::cast(const Ray& ray) const {
  RayHit best;
  const Eigen::Vector3d inv_dir(1.0 / ray.dir.x(), 1.0 / ray.dir.y(), 1.0 / ray.dir.z());
  // Ordered traversal: expand the nearer child first so the depth bound
  // tightens early; a deferred node whose slab entry distance exceeds the
  // (slack-padded) current best cannot contain a closer or tied hit. The
  // pruning stays conservative, so the result matches the brute-force scan.
  int stack[64];
  double entry_at[64];
  int sp = 0;
  double e0;
  if (!intersect_aabb(ray, inv_dir, nodes_[0].bmin, nodes_[0].bmax, best.t, e0)) return best;
  stack[sp] = 0;
  entry_at[sp++] = e0;
  while (sp > 0) {
    --sp;
    if (entry_at[sp] > best.t * kSlabSlack) continue;
    const Node& node = nodes_[stack[sp]];
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) consider(ray, order_[i], best);
      continue;
    }
    double el, er;
    const Node& l = nodes_[node.left];
    const Node& r = nodes_[node.right];
    const bool hl = intersect_aabb(ray, inv_dir, l.bmin, l.bmax, best.t, el);
    const bool hr = intersect_aabb(ray, inv_dir, r.bmin, r.bmax, best.t, er);
    if (hl && hr) {
      int near = node.left, far = node.right;
      double en = el, ef = er;
      if (er < el) {
        std::swap(near, far);
        std::swap(en, ef);
      }
      stack[sp] = far;
      entry_at[sp++] = ef;
      stack[sp] = near;
      entry_at[sp++] = en;
    } else if (hl) {
      stack[sp] = node.left;
      entry_at[sp++] = el;
    } else if (hr) {
      stack[sp] = node.right;
      entry_at[sp++] = er;
    }
  }
  return best;
}

RayHit Renderer::cast_brute_force(const Ray& ray) const {
  RayHit best;
  for (int i = 0; i < static_cast<int>(mesh_.triangles.size()); ++i) consider(ray, i, best);
  return best;
}

DepthMap Renderer::render(const CameraIntrinsics& k, const Pose& camera_to_world) const {
  DepthMap d(k.width, k.height);
  const Eigen::Vector3d origin = camera_to_world.translation;
  auto render_rows = [&](int y_begin, int y_end) {
    for (int y = y_begin; y < y_end; ++y) {
      for (int x = 0; x < k.width; ++x) {
        // Direction with unit z in the camera frame, so the ray parameter t
        // is directly the z-depth.
        const Eigen::Vector3d dir_cam((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
        const Ray ray{origin, camera_to_world.rotation * dir_cam};
        const RayHit hit = cast(ray);
        if (hit.hit()) d.set(x, y, hit.t);
      }
    }
  };
  if (threads_ <= 1 || k.height < 2 * threads_) {
    render_rows(0, k.height);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (k.height + threads_ - 1) / threads_;
    for (int t = 0; t < threads_; ++t) {
      const int b = t * chunk;
      const int e = std::min(k.height, b + chunk);
      if (b < e) pool.emplace_back(render_rows, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return d;
}

}  // namespace lumenav
