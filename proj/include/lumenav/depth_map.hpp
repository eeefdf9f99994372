#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lumenav {

// Dense per-pixel z-depth in mm with a validity mask. Values are meaningful
// only where valid. Stored row-major.
struct DepthMap {
  int width{0}, height{0};
  std::vector<double> values;
  std::vector<uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(size_t(w) * h, 0.0), valid(size_t(w) * h, 0) {}

  size_t index(int x, int y) const { return size_t(y) * width + x; }
  double& at(int x, int y) { return values[index(x, y)]; }
  double at(int x, int y) const { return values[index(x, y)]; }
  bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }
  void set(int x, int y, double v) {
    values[index(x, y)] = v;
    valid[index(x, y)] = 1;
  }
  int valid_count() const;
  bool same_shape(const DepthMap& o) const { return width == o.width && height == o.height; }
};

// On-disk format (little-endian): 8-byte magic "LNAVDPT1", uint32 width,
// uint32 height, then width*height float32 depth values (mm, row-major),
// then width*height uint8 validity bytes (1 valid, 0 invalid).
void save_depth_map(const std::string& path, const DepthMap& d);
DepthMap load_depth_map(const std::string& path);

struct BilinearSample {
  double value{0};
  bool valid{false};
};

// Valid-gated bilinear interpolation. Coordinates within 1e-9 of an integer
// are snapped so that sampling on the grid is exact. Every neighbor with
// nonzero weight must be in bounds and valid.
BilinearSample sample_depth_bilinear(const DepthMap& d, double x, double y);

}  // namespace lumenav
