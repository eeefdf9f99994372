#include "lumenav/metrics.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include "lumenav/errors.hpp"
#include "lumenav/io.hpp"

namespace lumenav {

AteResult ate(const Trajectory& gt, const Trajectory& est) {
  if (gt.entries.empty() || est.entries.empty()) throw EmptyInput("empty trajectory");
  std::map<int, const Pose*> gt_by_frame;
  for (const TrajectoryEntry& e : gt.entries) gt_by_frame[e.frame] = &e.pose;

  AteResult out;
  for (const TrajectoryEntry& e : est.entries) {
    auto it = gt_by_frame.find(e.frame);
    if (it == gt_by_frame.end())
      throw FrameMismatch("no ground truth for frame " + std::to_string(e.frame));
    out.per_frame.push_back((e.pose.translation - it->second->translation).norm());
  }
  double sum = 0;
  for (double v : out.per_frame) sum += v;
  out.mean = sum / double(out.per_frame.size());
  double var = 0;
  for (double v : out.per_frame) var += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(var / double(out.per_frame.size()));
  return out;
}

double success_rate(const std::vector<double>& per_frame_errors, double k_mm) {
  if (per_frame_errors.empty()) throw EmptyInput("no per-frame errors");
  long n = 0;
  for (double e : per_frame_errors)
    if (e < k_mm) ++n;
  return double(n) / double(per_frame_errors.size());
}

double scale_drift(const DepthMap& gt, const DepthMap& est) {
  if (!gt.same_shape(est)) throw DimensionMismatch("scale_drift shapes");
  // Kahan-compensated sums; the spec-level identity check is at 1e-12.
  double sum_gt = 0, c_gt = 0, sum_est = 0, c_est = 0;
  long n = 0;
  for (size_t i = 0; i < gt.values.size(); ++i) {
    if (!gt.valid[i] || !est.valid[i]) continue;
    double y = gt.values[i] - c_gt;
    double t = sum_gt + y;
    c_gt = (t - sum_gt) - y;
    sum_gt = t;
    y = est.values[i] - c_est;
    t = sum_est + y;
    c_est = (t - sum_est) - y;
    sum_est = t;
    ++n;
  }
  if (n == 0) throw EmptyValidSet("empty joint valid set in scale_drift");
  if (!(sum_gt > 0)) throw EmptyValidSet("ground-truth mean depth is not positive");
  return 1.0 - sum_est / sum_gt;
}

nlohmann::json report_to_json(const LocalizationReport& r) {
  nlohmann::json j;
  j["ate_mean_mm"] = r.ate_mean;
  j["ate_std_mm"] = r.ate_std;
  j["sr5"] = r.sr5;
  j["sr10"] = r.sr10;
  j["per_frame_errors_mm"] = r.per_frame_errors;
  j["runtime_hz"] = r.runtime_hz;
  j["registration_count"] = r.registration_count;
  j["fallback_count"] = r.fallback_count;
  return j;
}

LocalizationReport report_from_json(const nlohmann::json& j) {
  LocalizationReport r;
  r.ate_mean = j.at("ate_mean_mm").get<double>();
  r.ate_std = j.at("ate_std_mm").get<double>();
  r.sr5 = j.at("sr5").get<double>();
  r.sr10 = j.at("sr10").get<double>();
  r.per_frame_errors = j.at("per_frame_errors_mm").get<std::vector<double>>();
  r.runtime_hz = j.at("runtime_hz").get<double>();
  r.registration_count = j.at("registration_count").get<int>();
  r.fallback_count = j.at("fallback_count").get<int>();
  return r;
}

BenchmarkResult benchmark(const std::string& dataset_dir, const DualLoopConfig& cfg,
                          const BenchmarkOptions& opts) {
  const Dataset ds = load_dataset(dataset_dir);
  const auto& paths = opts.use_clean_depth || ds.corrupt_depth_paths.empty()
                          ? ds.clean_depth_paths
                          : ds.corrupt_depth_paths;
  if (paths.empty()) throw DatasetError("no usable depth frames in " + dataset_dir);
  if (ds.ground_truth.entries.empty())
    throw DatasetError("benchmark requires trajectory.csv in " + dataset_dir);

  std::vector<DepthMap> frames;
  frames.reserve(paths.size());
  for (const auto& p : paths) frames.push_back(load_depth_map(p));

  Renderer renderer(ds.mesh);
  renderer.set_threads(opts.render_threads);

  const Pose initial = ds.ground_truth.entries.front().pose;
  const auto t0 = std::chrono::steady_clock::now();
  const TrackResult tracked =
      opts.concurrent ? run_concurrent(cfg, renderer, ds.intrinsics, initial, frames)
                      : run_offline(cfg, renderer, ds.intrinsics, initial, frames, opts.mode);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const AteResult a = ate(ds.ground_truth, tracked.trajectory);
  BenchmarkResult out;
  out.report.ate_mean = a.mean;
  out.report.ate_std = a.stddev;
  out.report.per_frame_errors = a.per_frame;
  out.report.sr5 = success_rate(a.per_frame, 5.0);
  out.report.sr10 = success_rate(a.per_frame, 10.0);
  out.report.runtime_hz = seconds > 0 ? double(frames.size()) / seconds : 0.0;
  out.report.registration_count = tracked.registration_count;
  out.report.fallback_count = tracked.fallback_count;
  out.track_seconds = seconds;

  // Median-free render timing: average a handful of frames.
  const auto r0 = std::chrono::steady_clock::now();
  const int probes = std::min(5, ds.ground_truth.size());
  for (int i = 0; i < probes; ++i) renderer.render(ds.intrinsics, ds.ground_truth.entries[i].pose);
  out.mean_render_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - r0).count() /
      std::max(1, probes);
  return out;
}

}  // namespace lumenav
