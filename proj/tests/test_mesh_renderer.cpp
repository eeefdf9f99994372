#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>

#include "helpers.hpp"
#include "lumenav/depth_map.hpp"
#include "lumenav/errors.hpp"
#include "lumenav/mesh.hpp"
#include "lumenav/renderer.hpp"

using namespace lumenav;

namespace {

const char* kOneTriangleStl =
    "solid t\n"
    " facet normal 0 0 1\n"
    "  outer loop\n"
    "   vertex 0 0 0\n"
    "   vertex 1 0 0\n"
    "   vertex 0 1 0\n"
    "  endloop\n"
    " endfacet\n"
    "endsolid t\n";

const char* kDegenerateStl =
    "solid t\n"
    " facet normal 0 0 1\n"
    "  outer loop\n"
    "   vertex 0 0 0\n"
    "   vertex 1 1 1\n"
    "   vertex 2 2 2\n"
    "  endloop\n"
    " endfacet\n"
    "endsolid t\n";

}  // namespace

TEST_CASE("load_mesh minimal and degenerate files") {
  testutil::TempDir dir;
  const TriangleMesh one = load_mesh(testutil::write_file(dir, "one.stl", kOneTriangleStl));
  CHECK(one.vertices.size() == 3);
  CHECK(one.triangles.size() == 1);

  MeshLoadStats stats;
  CHECK_THROWS_AS(load_mesh(testutil::write_file(dir, "deg.stl", kDegenerateStl), &stats),
                  EmptyMesh);

  CHECK_THROWS_AS(load_mesh(testutil::write_file(dir, "bad.stl", "solid\nvertex 1 two 3\n")),
                  ParseError);
}

TEST_CASE("obj loading with quad fan triangulation") {
  testutil::TempDir dir;
  const std::string obj =
      "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
      "f 1 2 3 4\n";
  const TriangleMesh m = load_mesh(testutil::write_file(dir, "quad.obj", obj));
  CHECK(m.vertices.size() == 4);
  CHECK(m.triangles.size() == 2);
  CHECK(mesh_valid(m));
}

TEST_CASE("stl writer/reader round-trips vertex count") {
  testutil::TempDir dir;
  std::mt19937_64 rng(21);
  const TriangleMesh soup = testutil::random_soup(rng, 40);
  save_stl(dir.file("soup.stl"), soup);
  const TriangleMesh back = load_mesh(dir.file("soup.stl"));
  REQUIRE(back.triangles.size() == soup.triangles.size());
  // Welding may merge coincident vertices, never invent new ones.
  CHECK(back.vertices.size() <= soup.vertices.size());
  // STL stores float32 coordinates; expect only float rounding.
  for (size_t t = 0; t < soup.triangles.size(); ++t)
    for (int v = 0; v < 3; ++v)
      CHECK((back.vertices[back.triangles[t][v]] - soup.vertices[soup.triangles[t][v]]).norm() <
            1e-5);
}

TEST_CASE("bvh equals brute force on random scenes") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-25, 25);
  for (int scene = 0; scene < 5; ++scene) {
    const Renderer r(testutil::random_soup(rng, 60));
    for (int i = 0; i < 100; ++i) {
      Ray ray{{u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}};
      const RayHit a = r.cast(ray);
      const RayHit b = r.cast_brute_force(ray);
      CHECK(a.triangle == b.triangle);
      if (a.hit()) CHECK(a.t == b.t);
    }
  }
}

TEST_CASE("render equals brute force per pixel on a sphere") {
  const Renderer r(testutil::make_uv_sphere({0, 0, 10}, 3, 48, 24));
  const CameraIntrinsics k{60, 60, 32, 32, 64, 64};
  const DepthMap d = r.render(k, Pose::Identity());
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const Ray ray{{0, 0, 0}, {(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0}};
      const RayHit h = r.cast_brute_force(ray);
      CHECK(d.is_valid(x, y) == h.hit());
      if (h.hit()) CHECK(d.at(x, y) == h.t);
    }
  }
}

TEST_CASE("sphere analytic depth") {
  // Unit sphere centered 10 mm ahead; z-depth roots of |t*dir - c|^2 = r^2.
  const Renderer r(testutil::make_uv_sphere({0, 0, 10}, 1, 256, 128));
  const CameraIntrinsics k{300, 300, 64, 64, 129, 129};
  const DepthMap d = r.render(k, Pose::Identity());
  REQUIRE(d.is_valid(64, 64));
  CHECK(std::abs(d.at(64, 64) - 9.0) < 1e-3);
  int checked = 0;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      if (!d.is_valid(x, y)) continue;
      const Eigen::Vector3d dir((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d c(0, 0, 10);
      const double a = dir.squaredNorm();
      const double b = -2.0 * dir.dot(c);
      const double cc = c.squaredNorm() - 1.0;
      const double disc = b * b - 4 * a * cc;
      // Near the silhouette the chord shrinks and tessellation error in the
      // radius is amplified by ~r/half-chord; keep pixels where that
      // amplification stays well below the 1e-3 tolerance.
      if (disc < 0.05) continue;
      const double t = (-b - std::sqrt(disc)) / (2 * a);
      CHECK(std::abs(d.at(x, y) - t) < 1e-3);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("cylinder analytic depth from the axis") {
  // Camera on the axis of a radius-8 tube; ray with slope s hits the wall at
  // z-depth 8/s where s = |(dx,dy)| of the normalized-direction xy part.
  const Renderer r(testutil::make_tube(8.0, -10, 200, 1024, 64));
  const CameraIntrinsics k{80, 80, 64, 64, 129, 129};
  const DepthMap d = r.render(k, Pose::Identity());
  int checked = 0;
  for (int y = 0; y < k.height; y += 3) {
    for (int x = 0; x < k.width; x += 3) {
      const double dx = (x - k.cx) / k.fx, dy = (y - k.cy) / k.fy;
      const double s = std::hypot(dx, dy);
      if (s < 0.05) continue;  // near-axial rays hit the end cap instead
      const double expected = 8.0 / s;
      if (expected > 190) continue;
      REQUIRE(d.is_valid(x, y));
      CHECK(std::abs(d.at(x, y) - expected) < 1e-3);
      ++checked;
    }
  }
  CHECK(checked > 200);
}

TEST_CASE("fronto-parallel wall renders constant z-depth") {
  TriangleMesh wall;
  wall.vertices = {{-100, -100, 25}, {100, -100, 25}, {100, 100, 25}, {-100, 100, 25}};
  wall.triangles = {{0, 1, 2}, {0, 2, 3}};
  const Renderer r(wall);
  const CameraIntrinsics k{100, 100, 32, 32, 64, 64};
  const DepthMap d = r.render(k, Pose::Identity());
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      REQUIRE(d.is_valid(x, y));
      CHECK(std::abs(d.at(x, y) - 25.0) < 1e-9);
    }
}

TEST_CASE("pose looking away gives an all-invalid map") {
  const Renderer r(testutil::make_uv_sphere({0, 0, 10}, 1, 32, 16));
  Pose away;
  away.rotation = Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitX()).toRotationMatrix();
  const DepthMap d = r.render({60, 60, 32, 32, 64, 64}, away);
  CHECK(d.valid_count() == 0);
}

TEST_CASE("z-depth invariant to in-plane roll at the principal point") {
  const Renderer r(testutil::make_uv_sphere({0, 0, 10}, 2, 128, 64));
  const CameraIntrinsics k{100, 100, 32, 32, 65, 65};
  const DepthMap d0 = r.render(k, Pose::Identity());
  for (double roll : {0.3, 1.1, 2.7}) {
    Pose p;
    p.rotation = Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const DepthMap d = r.render(k, p);
    REQUIRE(d.is_valid(32, 32));
    CHECK(std::abs(d.at(32, 32) - d0.at(32, 32)) < 1e-9);
  }
}

TEST_CASE("rendering is deterministic and thread-count independent") {
  std::mt19937_64 rng(23);
  Renderer r(testutil::random_soup(rng, 200));
  const CameraIntrinsics k{60, 60, 48, 48, 96, 96};
  const Pose p = testutil::random_pose(rng, 5.0, 0.5);
  const DepthMap a = r.render(k, p);
  const DepthMap b = r.render(k, p);
  CHECK(a.values == b.values);
  CHECK(a.valid == b.valid);
  r.set_threads(4);
  const DepthMap c = r.render(k, p);
  CHECK(a.values == c.values);
  CHECK(a.valid == c.valid);
}

TEST_CASE("depth map disk round trip") {
  testutil::TempDir dir;
  DepthMap d(7, 5);
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.5, 100);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x)
      if ((x + y) % 3) d.set(x, y, double(float(u(rng))));  // float-exact values
  save_depth_map(dir.file("d.dbin"), d);
  const DepthMap back = load_depth_map(dir.file("d.dbin"));
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.valid == d.valid);
  CHECK(back.values == d.values);

  CHECK_THROWS_AS(load_depth_map(dir.file("missing.dbin")), IoError);
  testutil::write_file(dir, "bad.dbin", "NOTMAGIC");
  CHECK_THROWS_AS(load_depth_map(dir.file("bad.dbin")), ParseError);
}

TEST_CASE("bilinear depth sampling gates on validity and snaps the grid") {
  DepthMap d(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) d.set(x, y, 1.0 + x + 10.0 * y);
  d.valid[d.index(2, 1)] = 0;

  const BilinearSample on_grid = sample_depth_bilinear(d, 1.0 + 1e-12, 2.0 - 1e-12);
  CHECK(on_grid.valid);
  CHECK(on_grid.value == d.at(1, 2));

  const BilinearSample mid = sample_depth_bilinear(d, 0.5, 0.5);
  CHECK(mid.valid);
  CHECK(mid.value == doctest::Approx(0.25 * (1 + 2 + 11 + 12)));

  CHECK(!sample_depth_bilinear(d, 1.5, 0.5).valid);  // touches the invalid pixel
  CHECK(!sample_depth_bilinear(d, -0.5, 1.0).valid); // out of bounds
  CHECK(!sample_depth_bilinear(d, 3.5, 1.0).valid);
}
