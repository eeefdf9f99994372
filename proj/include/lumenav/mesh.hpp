#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

namespace lumenav {

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;  // mm
  std::vector<std::array<int, 3>> triangles;
};

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c);

struct MeshLoadStats {
  int degenerate_dropped{0};
};

// ASCII/binary STL and OBJ, dispatched on file content/extension. Degenerate
// triangles (area <= 1e-12 mm^2) are dropped; throws EmptyMesh when nothing
// survives cleanup.
TriangleMesh load_mesh(const std::string& path, MeshLoadStats* stats = nullptr);

void save_stl(const std::string& path, const TriangleMesh& mesh);  // binary

// V - E + F over unique undirected edges; 2 per closed genus-0 component.
int euler_characteristic(const TriangleMesh& mesh);

// In-range indices and no degenerate triangles.
bool mesh_valid(const TriangleMesh& mesh);

}  // namespace lumenav
