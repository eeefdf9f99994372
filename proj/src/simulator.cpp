#include "lumenav/simulator.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "lumenav/errors.hpp"
#include "lumenav/io.hpp"

namespace lumenav {

namespace {

double capsule_sdf(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                   double radius) {
  const Eigen::Vector3d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm() - radius;
}

struct Segment {
  Eigen::Vector3d a, b;
  double radius;
};

std::vector<Segment> phantom_segments(PhantomKind kind, const PhantomParams& p) {
  if (p.trunk_radius <= 0 || p.trunk_length <= 0 || p.cell_size <= 0)
    throw InvalidParams("phantom dimensions must be positive");
  std::vector<Segment> segs;
  const Eigen::Vector3d trunk_end(0, 0, p.trunk_length);
  segs.push_back({{0, 0, 0}, trunk_end, p.trunk_radius});
  if (kind == PhantomKind::YBifurcation) {
    if (p.branch_radius <= 0 || p.branch_length <= 0)
      throw InvalidParams("branch dimensions must be positive");
    if (p.branch_radius > p.trunk_radius)
      throw InvalidParams("branch radius exceeds trunk radius");
    for (const double sign : {1.0, -1.0}) {
      const Eigen::Vector3d dir(sign * std::sin(p.branch_angle), 0, std::cos(p.branch_angle));
      segs.push_back({trunk_end, trunk_end + p.branch_length * dir, p.branch_radius});
    }
  }
  return segs;
}

}  // namespace

double phantom_sdf(PhantomKind kind, const PhantomParams& params, const Eigen::Vector3d& p) {
  double d = std::numeric_limits<double>::infinity();
  for (const Segment& s : phantom_segments(kind, params))
    d = std::min(d, capsule_sdf(p, s.a, s.b, s.radius));
  return d;
}

TriangleMesh marching_tetrahedra(const std::function<double(const Eigen::Vector3d&)>& sdf,
                                 const Eigen::Vector3d& grid_min, const Eigen::Vector3d& grid_max,
                                 double cell_size) {
  const int nx = std::max(2, int(std::ceil((grid_max.x() - grid_min.x()) / cell_size)) + 1);
  const int ny = std::max(2, int(std::ceil((grid_max.y() - grid_min.y()) / cell_size)) + 1);
  const int nz = std::max(2, int(std::ceil((grid_max.z() - grid_min.z()) / cell_size)) + 1);

  auto grid_point = [&](int i, int j, int k) {
    return Eigen::Vector3d(grid_min.x() + i * cell_size, grid_min.y() + j * cell_size,
                           grid_min.z() + k * cell_size);
  };
  auto point_id = [&](int i, int j, int k) -> int64_t {
    return (int64_t(k) * ny + j) * nx + i;
  };

  std::vector<double> field(size_t(nx) * ny * nz);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) field[size_t(point_id(i, j, k))] = sdf(grid_point(i, j, k));

  TriangleMesh mesh;
  std::unordered_map<uint64_t, int> edge_vertices;

  // Zero crossing on the edge between grid points p and q; t clamped away from
  // the endpoints so shared vertices never collapse into degenerate triangles.
  auto crossing_vertex = [&](int64_t pid, int64_t qid, const Eigen::Vector3d& pp,
                             const Eigen::Vector3d& qq, double sp, double sq) {
    int64_t lo = pid, hi = qid;
    if (lo > hi) std::swap(lo, hi);
    const uint64_t key = uint64_t(lo) * uint64_t(nx) * ny * nz + uint64_t(hi);
    auto it = edge_vertices.find(key);
    if (it != edge_vertices.end()) return it->second;
    const double t = std::clamp(sp / (sp - sq), 1e-6, 1.0 - 1e-6);
    const int idx = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(pp + t * (qq - pp));
    edge_vertices.emplace(key, idx);
    return idx;
  };

  // Six tetrahedra around the cube diagonal c0-c6; the induced face diagonals
  // are translation-consistent, so the extracted surface is watertight.
  static const int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  static const int kTets[6][4] = {{0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6},
                                  {0, 7, 4, 6}, {0, 4, 5, 6}, {0, 5, 1, 6}};

  auto emit = [&](int a, int b, int c, const Eigen::Vector3d& outward_hint) {
    const Eigen::Vector3d& pa = mesh.vertices[a];
    const Eigen::Vector3d n =
        (mesh.vertices[b] - pa).cross(mesh.vertices[c] - pa);
    if (n.dot(outward_hint) >= 0)
      mesh.triangles.push_back({a, b, c});
    else
      mesh.triangles.push_back({a, c, b});
  };

  for (int k = 0; k + 1 < nz; ++k) {
    for (int j = 0; j + 1 < ny; ++j) {
      for (int i = 0; i + 1 < nx; ++i) {
        int64_t pid[8];
        Eigen::Vector3d pos[8];
        double val[8];
        for (int c = 0; c < 8; ++c) {
          const int ci = i + kCorner[c][0], cj = j + kCorner[c][1], ck = k + kCorner[c][2];
          pid[c] = point_id(ci, cj, ck);
          pos[c] = grid_point(ci, cj, ck);
          val[c] = field[size_t(pid[c])];
        }
        for (const auto& tet : kTets) {
          int inside[4], outside[4];
          int ni = 0, no = 0;
          for (int v = 0; v < 4; ++v) {
            if (val[tet[v]] < 0)
              inside[ni++] = tet[v];
            else
              outside[no++] = tet[v];
          }
          if (ni == 0 || no == 0) continue;
          auto ev = [&](int a, int b) {
            return crossing_vertex(pid[a], pid[b], pos[a], pos[b], val[a], val[b]);
          };
          if (ni == 1) {
            const Eigen::Vector3d hint =
                (pos[outside[0]] + pos[outside[1]] + pos[outside[2]]) / 3.0 - pos[inside[0]];
            emit(ev(inside[0], outside[0]), ev(inside[0], outside[1]), ev(inside[0], outside[2]),
                 hint);
          } else if (ni == 3) {
            const Eigen::Vector3d hint =
                pos[outside[0]] - (pos[inside[0]] + pos[inside[1]] + pos[inside[2]]) / 3.0;
            emit(ev(inside[0], outside[0]), ev(inside[1], outside[0]), ev(inside[2], outside[0]),
                 hint);
          } else {  // 2-2: quad, split into two triangles
            const Eigen::Vector3d hint = (pos[outside[0]] + pos[outside[1]]) / 2.0 -
                                         (pos[inside[0]] + pos[inside[1]]) / 2.0;
            const int v00 = ev(inside[0], outside[0]);
            const int v01 = ev(inside[0], outside[1]);
            const int v10 = ev(inside[1], outside[0]);
            const int v11 = ev(inside[1], outside[1]);
            emit(v00, v01, v11, hint);
            emit(v00, v11, v10, hint);
          }
        }
      }
    }
  }
  return mesh;
}

Phantom make_phantom(PhantomKind kind, const PhantomParams& params) {
  const auto segs = phantom_segments(kind, params);

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  double max_r = 0;
  for (const Segment& s : segs) {
    lo = lo.cwiseMin(s.a.cwiseMin(s.b));
    hi = hi.cwiseMax(s.a.cwiseMax(s.b));
    max_r = std::max(max_r, s.radius);
  }
  const Eigen::Vector3d pad = Eigen::Vector3d::Constant(max_r + 2 * params.cell_size);

  Phantom out;
  out.mesh = marching_tetrahedra(
      [&](const Eigen::Vector3d& p) { return phantom_sdf(kind, params, p); }, lo - pad, hi + pad,
      params.cell_size);
  if (out.mesh.triangles.empty()) throw InvalidParams("phantom produced an empty surface");

  auto polyline = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b, double step) {
    std::vector<Eigen::Vector3d> pts;
    const double len = (b - a).norm();
    const int n = std::max(1, int(std::ceil(len / step)));
    for (int i = 0; i <= n; ++i) pts.push_back(a + (b - a) * (double(i) / n));
    return pts;
  };
  for (const Segment& s : segs) out.branches.push_back(polyline(s.a, s.b, 1.0));

  out.centerline = out.branches[0];
  if (segs.size() > 1) {
    const auto& child = out.branches[1];
    out.centerline.insert(out.centerline.end(), child.begin() + 1, child.end());
  }
  return out;
}

Trajectory generate_trajectory(const std::vector<Eigen::Vector3d>& centerline,
                               double speed_mm_per_frame, double heading_jitter_rad,
                               uint64_t rng_seed, double frame_rate) {
  if (speed_mm_per_frame <= 0) throw InvalidParams("speed must be positive");
  if (centerline.size() < 2) throw CenterlineTooShort("need at least 2 centerline points");

  std::vector<double> arc{0.0};
  for (size_t i = 1; i < centerline.size(); ++i)
    arc.push_back(arc.back() + (centerline[i] - centerline[i - 1]).norm());
  const double total = arc.back();
  if (total < 2 * speed_mm_per_frame)
    throw CenterlineTooShort("centerline shorter than two frame steps");

  auto point_at = [&](double s) -> Eigen::Vector3d {
    s = std::clamp(s, 0.0, total);
    size_t i = 1;
    while (i + 1 < arc.size() && arc[i] < s) ++i;
    const double seg = arc[i] - arc[i - 1];
    const double t = seg > 0 ? (s - arc[i - 1]) / seg : 0.0;
    return centerline[i - 1] + t * (centerline[i] - centerline[i - 1]);
  };

  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> mag(0.0, 1.0);

  Trajectory traj;
  traj.frame_rate = frame_rate;
  Eigen::Vector3d up(0, 1, 0);
  const double lookahead = 5.0;  // mm, smooths heading through the bifurcation
  int frame = 0;
  for (double s = 0; s <= total - speed_mm_per_frame; s += speed_mm_per_frame, ++frame) {
    const Eigen::Vector3d fwd =
        (point_at(std::min(s + lookahead, total)) - point_at(std::max(s - lookahead, 0.0)))
            .normalized();
    Eigen::Vector3d y = up - up.dot(fwd) * fwd;
    if (y.norm() < 1e-9) y = Eigen::Vector3d(0, 0, 1) - fwd.z() * fwd;
    y.normalize();
    const Eigen::Vector3d x = y.cross(fwd);
    Pose pose;
    pose.rotation.col(0) = x;
    pose.rotation.col(1) = y;
    pose.rotation.col(2) = fwd;
    pose.translation = point_at(s);
    if (heading_jitter_rad > 0) {
      Eigen::Vector3d axis(unit(rng), unit(rng), unit(rng));
      if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitX();
      const double angle = mag(rng) * heading_jitter_rad;
      pose.rotation =
          pose.rotation * Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
    }
    pose = orthonormalized(pose);
    up = pose.rotation.col(1);
    traj.entries.push_back({frame, pose});
  }
  if (traj.entries.size() < 2) throw CenterlineTooShort("trajectory has fewer than 2 poses");
  return traj;
}

CorruptionModel CorruptionModel::phantom_grade(uint64_t seed) {
  return {0.9, -0.16, 1, 0.0, seed};
}

CorruptionModel CorruptionModel::patient_grade(uint64_t seed) {
  return {2.7, -0.034, 2, 0.05, seed};
}

DepthMap corrupt_depth(const DepthMap& z, const CorruptionModel& model) {
  if (model.noise_sigma < 0 || std::abs(model.scale_drift) >= 1 || model.dropout_fraction < 0 ||
      model.dropout_fraction >= 1)
    throw InvalidParams("bad corruption model");

  DepthMap out = z;
  if (model.smoothing_radius > 0) {
    const int r = model.smoothing_radius;
    for (int y = 0; y < z.height; ++y) {
      for (int x = 0; x < z.width; ++x) {
        if (!z.is_valid(x, y)) continue;
        double acc = 0;
        int n = 0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const int sx = x + dx, sy = y + dy;
            if (sx < 0 || sx >= z.width || sy < 0 || sy >= z.height) continue;
            if (!z.is_valid(sx, sy)) continue;
            acc += z.at(sx, sy);
            ++n;
          }
        }
        out.at(x, y) = acc / n;
      }
    }
  }

  std::mt19937_64 rng(model.rng_seed);
  std::normal_distribution<double> noise(0.0, model.noise_sigma);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double scale = 1.0 - model.scale_drift;
  for (size_t i = 0; i < out.values.size(); ++i) {
    if (!out.valid[i]) continue;
    double v = out.values[i] * scale;
    if (model.noise_sigma > 0) v += noise(rng);
    out.values[i] = std::max(v, 1e-3);
    if (model.dropout_fraction > 0 && uni(rng) < model.dropout_fraction) out.valid[i] = 0;
  }
  return out;
}

uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

DatasetManifest export_dataset(const Phantom& phantom, const Trajectory& traj,
                               const CameraIntrinsics& k, const Renderer& renderer,
                               const CorruptionModel& model, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "depth" / "clean", ec);
  fs::create_directories(fs::path(out_dir) / "depth" / "corrupt", ec);
  if (ec) throw IoError("cannot create dataset directory: " + out_dir);

  DatasetManifest manifest;
  manifest.name = fs::path(out_dir).filename().string();
  manifest.frame_count = traj.size();
  manifest.seed = model.rng_seed;

  auto add = [&](const std::string& rel) {
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a_file((fs::path(out_dir) / rel).string())));
    manifest.files.emplace_back(rel, hex);
  };

  save_stl((fs::path(out_dir) / "mesh.stl").string(), phantom.mesh);
  add("mesh.stl");
  save_intrinsics((fs::path(out_dir) / "intrinsics.txt").string(), k);
  add("intrinsics.txt");
  save_trajectory_csv((fs::path(out_dir) / "trajectory.csv").string(), traj);
  add("trajectory.csv");

  for (int f = 0; f < traj.size(); ++f) {
    const DepthMap clean = renderer.render(k, traj.entries[f].pose);
    CorruptionModel per_frame = model;
    per_frame.rng_seed = model.rng_seed + uint64_t(f) * 0x9e3779b97f4a7c15ull;
    const DepthMap corrupt = corrupt_depth(clean, per_frame);
    char name[64];
    std::snprintf(name, sizeof(name), "depth/clean/%06d.dbin", f);
    save_depth_map((fs::path(out_dir) / name).string(), clean);
    add(name);
    std::snprintf(name, sizeof(name), "depth/corrupt/%06d.dbin", f);
    save_depth_map((fs::path(out_dir) / name).string(), corrupt);
    add(name);
  }

  nlohmann::json j;
  j["name"] = manifest.name;
  j["frame_count"] = manifest.frame_count;
  j["seed"] = manifest.seed;
  j["corruption"] = {{"noise_sigma", model.noise_sigma},
                     {"scale_drift", model.scale_drift},
                     {"smoothing_radius", model.smoothing_radius},
                     {"dropout_fraction", model.dropout_fraction}};
  j["frame_rate"] = traj.frame_rate;
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [rel, hash] : manifest.files) files[rel] = hash;
  j["files"] = files;
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + out_dir);
  out << j.dump(2) << "\n";
  return manifest;
}

}  // namespace lumenav
