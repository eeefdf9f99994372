#include "lumenav/io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lumenav/errors.hpp"

namespace lumenav {

namespace fs = std::filesystem;

void save_intrinsics(const std::string& path, const CameraIntrinsics& k) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.precision(17);
  out << "fx = " << k.fx << "\n"
      << "fy = " << k.fy << "\n"
      << "cx = " << k.cx << "\n"
      << "cy = " << k.cy << "\n"
      << "width = " << k.width << "\n"
      << "height = " << k.height << "\n";
}

CameraIntrinsics load_intrinsics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::map<std::string, double> kv;
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::istringstream key(line.substr(0, eq)), val(line.substr(eq + 1));
    std::string name;
    double v;
    if ((key >> name) && (val >> v)) kv[name] = v;
  }
  CameraIntrinsics k;
  try {
    k.fx = kv.at("fx");
    k.fy = kv.at("fy");
    k.cx = kv.at("cx");
    k.cy = kv.at("cy");
    k.width = static_cast<int>(kv.at("width"));
    k.height = static_cast<int>(kv.at("height"));
  } catch (const std::out_of_range&) {
    throw ParseError("missing intrinsics key in " + path);
  }
  if (!intrinsics_valid(k)) throw ParseError("invalid intrinsics in " + path);
  return k;
}

void save_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.precision(17);
  out << "frame,tx,ty,tz,rx,ry,rz\n";
  for (const TrajectoryEntry& e : traj.entries) {
    const EulerDecomposition d = pose_to_euler(e.pose);
    out << e.frame << "," << d.translation.x() << "," << d.translation.y() << ","
        << d.translation.z() << "," << d.angles.rx << "," << d.angles.ry << "," << d.angles.rz
        << "\n";
  }
}

Trajectory load_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  Trajectory traj;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("frame", 0) == 0) continue;
    }
    std::istringstream ls(line);
    double v[7];
    char comma;
    for (int i = 0; i < 7; ++i) {
      if (!(ls >> v[i])) throw ParseError("bad trajectory row in " + path + ": " + line);
      if (i < 6) ls >> comma;
    }
    traj.entries.push_back(
        {static_cast<int>(v[0]),
         euler_to_pose({v[4], v[5], v[6]}, Eigen::Vector3d(v[1], v[2], v[3]))});
  }
  return traj;
}

Dataset load_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("not a directory: " + dir);
  Dataset ds;
  const fs::path root(dir);
  if (!fs::exists(root / "mesh.stl"))
    throw DatasetError("missing mesh.stl in " + dir + " (is this a dataset directory?)");
  ds.mesh = load_mesh((root / "mesh.stl").string());
  ds.intrinsics = load_intrinsics((root / "intrinsics.txt").string());
  if (fs::exists(root / "trajectory.csv"))
    ds.ground_truth = load_trajectory_csv((root / "trajectory.csv").string());

  auto collect = [&](const char* sub, std::vector<std::string>& out) {
    const fs::path d = root / "depth" / sub;
    if (!fs::is_directory(d)) return;
    for (const auto& entry : fs::directory_iterator(d))
      if (entry.path().extension() == ".dbin") out.push_back(entry.path().string());
    std::sort(out.begin(), out.end());
  };
  collect("clean", ds.clean_depth_paths);
  collect("corrupt", ds.corrupt_depth_paths);
  if (ds.clean_depth_paths.empty() && ds.corrupt_depth_paths.empty())
    throw DatasetError("no depth frames under " + dir + "/depth");

  if (fs::exists(root / "manifest.json")) {
    std::ifstream in(root / "manifest.json");
    try {
      nlohmann::json j;
      in >> j;
      if (j.contains("frame_rate")) ds.frame_rate = j["frame_rate"].get<double>();
    } catch (const std::exception& e) {
      throw DatasetError(std::string("bad manifest.json: ") + e.what());
    }
  }
  return ds;
}

}  // namespace lumenav
