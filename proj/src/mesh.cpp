#include "lumenav/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "lumenav/errors.hpp"

namespace lumenav {

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

namespace {

constexpr double kDegenerateArea = 1e-12;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Welds exactly-equal coordinates into shared vertices.
class VertexPool {
 public:
  int insert(const Eigen::Vector3d& v, TriangleMesh& mesh) {
    const auto key = std::make_tuple(v.x(), v.y(), v.z());
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
    const int idx = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(v);
    map_.emplace(key, idx);
    return idx;
  }

 private:
  std::map<std::tuple<double, double, double>, int> map_;
};

TriangleMesh parse_stl_ascii(const std::string& text, const std::string& path) {
  TriangleMesh mesh;
  VertexPool pool;
  std::istringstream in(text);
  std::string tok;
  std::vector<int> face;
  while (in >> tok) {
    if (tok == "vertex") {
      double x, y, z;
      if (!(in >> x >> y >> z)) throw ParseError("bad vertex in " + path);
      face.push_back(pool.insert({x, y, z}, mesh));
    } else if (tok == "endfacet") {
      if (face.size() != 3) throw ParseError("facet without 3 vertices in " + path);
      mesh.triangles.push_back({face[0], face[1], face[2]});
      face.clear();
    }
  }
  if (!face.empty()) throw ParseError("truncated facet in " + path);
  return mesh;
}

TriangleMesh parse_stl_binary(const std::string& data, const std::string& path) {
  if (data.size() < 84) throw ParseError("binary STL too short: " + path);
  uint32_t count = 0;
  std::memcpy(&count, data.data() + 80, 4);
  if (data.size() < 84 + size_t(count) * 50) throw ParseError("truncated binary STL: " + path);
  TriangleMesh mesh;
  VertexPool pool;
  for (uint32_t i = 0; i < count; ++i) {
    const char* rec = data.data() + 84 + size_t(i) * 50;
    int idx[3];
    for (int v = 0; v < 3; ++v) {
      float c[3];
      std::memcpy(c, rec + 12 + v * 12, 12);
      idx[v] = pool.insert({c[0], c[1], c[2]}, mesh);
    }
    mesh.triangles.push_back({idx[0], idx[1], idx[2]});
  }
  return mesh;
}

TriangleMesh parse_obj(const std::string& text, const std::string& path) {
  TriangleMesh mesh;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw ParseError("bad vertex line in " + path + ": " + line);
      mesh.vertices.push_back({x, y, z});
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string ref;
      while (ls >> ref) {
        // "i", "i/j", "i/j/k" forms; only the vertex index is used.
        const size_t slash = ref.find('/');
        int i = 0;
        try {
          i = std::stoi(slash == std::string::npos ? ref : ref.substr(0, slash));
        } catch (const std::exception&) {
          throw ParseError("bad face reference in " + path + ": " + ref);
        }
        if (i < 0) i = static_cast<int>(mesh.vertices.size()) + i + 1;
        if (i < 1 || i > static_cast<int>(mesh.vertices.size()))
          throw ParseError("face index out of range in " + path + ": " + ref);
        idx.push_back(i - 1);
      }
      if (idx.size() < 3) throw ParseError("face with <3 vertices in " + path);
      for (size_t t = 1; t + 1 < idx.size(); ++t)  // fan-triangulate polygons
        mesh.triangles.push_back({idx[0], idx[t], idx[t + 1]});
    }
  }
  return mesh;
}

bool looks_like_ascii_stl(const std::string& data) {
  if (data.rfind("solid", 0) != 0) return false;
  return data.find("facet") != std::string::npos || data.find("endsolid") != std::string::npos;
}

std::string lower_ext(const std::string& path) {
  const size_t dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

TriangleMesh load_mesh(const std::string& path, MeshLoadStats* stats) {
  const std::string data = read_file(path);
  const std::string ext = lower_ext(path);

  TriangleMesh mesh;
  if (ext == "obj") {
    mesh = parse_obj(data, path);
  } else if (ext == "stl" || ext.empty()) {
    mesh = looks_like_ascii_stl(data) ? parse_stl_ascii(data, path) : parse_stl_binary(data, path);
  } else {
    throw ParseError("unsupported mesh format: " + path);
  }

  TriangleMesh out;
  out.vertices = mesh.vertices;
  int dropped = 0;
  for (const auto& t : mesh.triangles) {
    const double area =
        triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    if (area > kDegenerateArea) {
      out.triangles.push_back(t);
    } else {
      ++dropped;
    }
  }
  if (stats) stats->degenerate_dropped = dropped;
  if (out.triangles.empty()) throw EmptyMesh("no non-degenerate triangles in " + path);
  return out;
}

void save_stl(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  char header[80] = {};
  std::snprintf(header, sizeof(header), "lumenav binary stl");
  out.write(header, 80);
  const uint32_t count = static_cast<uint32_t>(mesh.triangles.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& t : mesh.triangles) {
    const Eigen::Vector3d& a = mesh.vertices[t[0]];
    const Eigen::Vector3d& b = mesh.vertices[t[1]];
    const Eigen::Vector3d& c = mesh.vertices[t[2]];
    Eigen::Vector3d n = (b - a).cross(c - a);
    const double len = n.norm();
    if (len > 0) n /= len;
    float rec[12] = {float(n.x()), float(n.y()), float(n.z()), float(a.x()), float(a.y()),
                     float(a.z()), float(b.x()), float(b.y()), float(b.z()), float(c.x()),
                     float(c.y()), float(c.z())};
    out.write(reinterpret_cast<const char*>(rec), 48);
    const uint16_t attr = 0;
    out.write(reinterpret_cast<const char*>(&attr), 2);
  }
  if (!out) throw IoError("write failed: " + path);
}

int euler_characteristic(const TriangleMesh& mesh) {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : mesh.triangles) {
    for (int i = 0; i < 3; ++i) {
      const int a = t[i], b = t[(i + 1) % 3];
      edges.emplace(std::min(a, b), std::max(a, b));
    }
  }
  return static_cast<int>(mesh.vertices.size()) - static_cast<int>(edges.size()) +
         static_cast<int>(mesh.triangles.size());
}

bool mesh_valid(const TriangleMesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    for (int i : t)
      if (i < 0 || i >= n) return false;
    if (triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) <=
        kDegenerateArea)
      return false;
  }
  return true;
}

}  // namespace lumenav
