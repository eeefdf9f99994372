#pragma once

#include <vector>

#include "lumenav/geometry.hpp"

namespace lumenav {

struct TrajectoryEntry {
  int frame{0};
  Pose pose;  // camera-to-world, mesh frame
};

struct Trajectory {
  std::vector<TrajectoryEntry> entries;
  double frame_rate{30.0};  // Hz

  int size() const { return static_cast<int>(entries.size()); }
};

}  // namespace lumenav
