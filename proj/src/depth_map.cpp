#include "lumenav/depth_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lumenav/errors.hpp"

namespace lumenav {

namespace {
constexpr char kMagic[8] = {'L', 'N', 'A', 'V', 'D', 'P', 'T', '1'};
}

int DepthMap::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), uint8_t{1}));
}

void save_depth_map(const std::string& path, const DepthMap& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, 8);
  const uint32_t w = static_cast<uint32_t>(d.width);
  const uint32_t h = static_cast<uint32_t>(d.height);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> vals(d.values.begin(), d.values.end());
  out.write(reinterpret_cast<const char*>(vals.data()), std::streamsize(vals.size() * 4));
  out.write(reinterpret_cast<const char*>(d.valid.data()), std::streamsize(d.valid.size()));
  if (!out) throw IoError("write failed: " + path);
}

DepthMap load_depth_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw ParseError("bad depth-map magic: " + path);
  uint32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16)
    throw ParseError("bad depth-map dimensions: " + path);
  DepthMap d(static_cast<int>(w), static_cast<int>(h));
  std::vector<float> vals(size_t(w) * h);
  in.read(reinterpret_cast<char*>(vals.data()), std::streamsize(vals.size() * 4));
  in.read(reinterpret_cast<char*>(d.valid.data()), std::streamsize(d.valid.size()));
  if (!in) throw ParseError("truncated depth map: " + path);
  std::copy(vals.begin(), vals.end(), d.values.begin());
  return d;
}

BilinearSample sample_depth_bilinear(const DepthMap& d, double x, double y) {
  if (std::abs(x - std::round(x)) < 1e-9) x = std::round(x);
  if (std::abs(y - std::round(y)) < 1e-9) y = std::round(y);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;

  double acc = 0;
  const double wts[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int i = 0; i < 4; ++i) {
    if (wts[i] == 0.0) continue;
    if (xs[i] < 0 || xs[i] >= d.width || ys[i] < 0 || ys[i] >= d.height) return {};
    if (!d.is_valid(xs[i], ys[i])) return {};
    acc += wts[i] * d.at(xs[i], ys[i]);
  }
  return {acc, true};
}

}  // namespace lumenav
