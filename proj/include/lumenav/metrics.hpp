#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lumenav/depth_map.hpp"
#include "lumenav/dual_loop.hpp"
#include "lumenav/simulator_types.hpp"

namespace lumenav {

struct AteResult {
  double mean{0}, stddev{0};  // mm, population std
  std::vector<double> per_frame;
};

// Per-frame Euclidean position error in the shared mesh frame; no alignment.
// Frame indices must match one-to-one.
AteResult ate(const Trajectory& gt, const Trajectory& est);

// Fraction of frames with position error strictly below k_mm.
double success_rate(const std::vector<double>& per_frame_errors, double k_mm);

// 1 - mean(est)/mean(gt) over the joint valid set.
double scale_drift(const DepthMap& gt, const DepthMap& est);

struct LocalizationReport {
  double ate_mean{0}, ate_std{0};  // mm
  double sr5{0}, sr10{0};
  std::vector<double> per_frame_errors;
  double runtime_hz{0};
  int registration_count{0};
  int fallback_count{0};
};

nlohmann::json report_to_json(const LocalizationReport& r);
LocalizationReport report_from_json(const nlohmann::json& j);

struct BenchmarkOptions {
  TrackingMode mode{TrackingMode::DualLoop};
  bool use_clean_depth{false};
  bool concurrent{false};
  int render_threads{1};
};

struct BenchmarkResult {
  LocalizationReport report;
  double track_seconds{0};
  double mean_render_ms{0};
};

BenchmarkResult benchmark(const std::string& dataset_dir, const DualLoopConfig& cfg,
                          const BenchmarkOptions& opts = {});

}  // namespace lumenav
