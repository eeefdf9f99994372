// Shared fixtures for the test suites: random rigid transforms, analytic
// meshes with controlled tessellation error, and temp-file scaffolding.
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "lumenav/geometry.hpp"
#include "lumenav/mesh.hpp"

namespace testutil {

inline lumenav::Pose random_pose(std::mt19937_64& rng, double max_t = 50.0,
                                 double max_angle = 2.5) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Vector3d axis(u(rng), u(rng), u(rng));
  while (axis.norm() < 1e-6) axis = Eigen::Vector3d(u(rng), u(rng), u(rng));
  axis.normalize();
  std::uniform_real_distribution<double> ua(0.0, max_angle);
  lumenav::Pose p;
  p.rotation = Eigen::AngleAxisd(ua(rng), axis).toRotationMatrix();
  p.translation = Eigen::Vector3d(u(rng), u(rng), u(rng)) * max_t;
  return p;
}

// UV sphere with poles on the z axis through the center. With enough stacks
// the sagitta error is far below 1e-3 mm for millimeter-scale radii.
inline lumenav::TriangleMesh make_uv_sphere(const Eigen::Vector3d& center, double radius,
                                            int slices = 200, int stacks = 100) {
  lumenav::TriangleMesh m;
  for (int i = 0; i <= stacks; ++i) {
    const double phi = M_PI * double(i) / stacks;  // 0 at -z pole
    for (int j = 0; j < slices; ++j) {
      const double th = 2.0 * M_PI * double(j) / slices;
      m.vertices.push_back(center + radius * Eigen::Vector3d(std::sin(phi) * std::cos(th),
                                                             std::sin(phi) * std::sin(th),
                                                             -std::cos(phi)));
    }
  }
  auto idx = [&](int i, int j) { return i * slices + (j % slices); };
  for (int i = 0; i < stacks; ++i) {
    for (int j = 0; j < slices; ++j) {
      m.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      m.triangles.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
  }
  return m;
}

// Tube around the z axis, z in [z0, z1]. End caps close the openings so that
// axial motion is observable from inside (a capless cylinder slides into
// itself); pass capped = false for a pure open cylinder.
inline lumenav::TriangleMesh make_tube(double radius, double z0, double z1, int segments = 512,
                                       int rings = 64, bool capped = true) {
  lumenav::TriangleMesh m;
  for (int i = 0; i <= rings; ++i) {
    const double z = z0 + (z1 - z0) * double(i) / rings;
    for (int j = 0; j < segments; ++j) {
      const double th = 2.0 * M_PI * double(j) / segments;
      m.vertices.push_back({radius * std::cos(th), radius * std::sin(th), z});
    }
  }
  auto idx = [&](int i, int j) { return i * segments + (j % segments); };
  for (int i = 0; i < rings; ++i) {
    for (int j = 0; j < segments; ++j) {
      m.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      m.triangles.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
  }
  if (capped) {
    const int c0 = int(m.vertices.size());
    m.vertices.push_back({0, 0, z0});
    const int c1 = int(m.vertices.size());
    m.vertices.push_back({0, 0, z1});
    for (int j = 0; j < segments; ++j) {
      m.triangles.push_back({c0, idx(0, j + 1), idx(0, j)});
      m.triangles.push_back({c1, idx(rings, j), idx(rings, j + 1)});
    }
  }
  return m;
}

// Tube with a gently modulated radius. A perfect cylinder is a surface of
// revolution, so roll about the axis is geometrically unobservable and axial
// translation nearly so; the bumps give the wall enough relief that all six
// pose degrees of freedom are constrained by the depth image.
inline lumenav::TriangleMesh make_bumpy_tube(double radius, double z0, double z1,
                                             int segments = 256, int rings = 256,
                                             double amplitude = 1.5) {
  lumenav::TriangleMesh m;
  for (int i = 0; i <= rings; ++i) {
    const double z = z0 + (z1 - z0) * double(i) / rings;
    for (int j = 0; j < segments; ++j) {
      const double th = 2.0 * M_PI * double(j) / segments;
      // Long-wavelength relief: short wavelengths alias at coarse image
      // resolutions and add curvature bias to the depth interpolation.
      const double r = radius + amplitude * std::sin(2.0 * th + 0.1 * z) +
                       amplitude * std::sin(0.25 * z + 1.0);
      m.vertices.push_back({r * std::cos(th), r * std::sin(th), z});
    }
  }
  auto idx = [&](int i, int j) { return i * segments + (j % segments); };
  for (int i = 0; i < rings; ++i) {
    for (int j = 0; j < segments; ++j) {
      m.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      m.triangles.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
  }
  const int c0 = int(m.vertices.size());
  m.vertices.push_back({0, 0, z0});
  const int c1 = int(m.vertices.size());
  m.vertices.push_back({0, 0, z1});
  for (int j = 0; j < segments; ++j) {
    m.triangles.push_back({c0, idx(0, j + 1), idx(0, j)});
    m.triangles.push_back({c1, idx(rings, j), idx(rings, j + 1)});
  }
  return m;
}

// Random triangle soup in a box, for exact BVH-vs-brute-force comparisons.
inline lumenav::TriangleMesh random_soup(std::mt19937_64& rng, int triangles, double extent = 20) {
  std::uniform_real_distribution<double> u(-extent, extent);
  lumenav::TriangleMesh m;
  for (int t = 0; t < triangles; ++t) {
    const int base = int(m.vertices.size());
    for (int v = 0; v < 3; ++v) m.vertices.push_back({u(rng), u(rng), u(rng)});
    m.triangles.push_back({base, base + 1, base + 2});
  }
  return m;
}

class TempDir {
 public:
  TempDir() {
    path_ = (std::filesystem::temp_directory_path() /
             ("lumenav_test_" + std::to_string(std::random_device{}())))
                .string();
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return path_ + "/" + name; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline std::string write_file(const TempDir& dir, const std::string& name,
                              const std::string& content) {
  const std::string p = dir.file(name);
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p;
}

}  // namespace testutil
