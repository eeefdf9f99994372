// lumenav: bronchoscope localization against a pre-operative airway mesh.
//
// Verbs: simulate, render, losses, egomotion, register, track, benchmark.
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lumenav/dual_loop.hpp"
#include "lumenav/ego_motion.hpp"
#include "lumenav/errors.hpp"
#include "lumenav/io.hpp"
#include "lumenav/metrics.hpp"
#include "lumenav/registration.hpp"
#include "lumenav/simulator.hpp"
#include "lumenav/view_synthesis.hpp"

namespace {

using namespace lumenav;

constexpr double kDegToRad = M_PI / 180.0;

Pose parse_pose(const std::string& spec) {
  std::istringstream ss(spec);
  double v[6];
  char comma;
  for (int i = 0; i < 6; ++i) {
    if (!(ss >> v[i])) throw ParseError("pose must be tx,ty,tz,rx,ry,rz (mm, degrees): " + spec);
    if (i < 5) ss >> comma;
  }
  return euler_to_pose({v[3] * kDegToRad, v[4] * kDegToRad, v[5] * kDegToRad},
                       Eigen::Vector3d(v[0], v[1], v[2]));
}

std::string format_pose(const Pose& p) {
  const EulerDecomposition d = pose_to_euler(p);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "t = (%.3f, %.3f, %.3f) mm  r = (%.3f, %.3f, %.3f) deg",
                d.translation.x(), d.translation.y(), d.translation.z(),
                d.angles.rx / kDegToRad, d.angles.ry / kDegToRad, d.angles.rz / kDegToRad);
  return buf;
}

// Flat "key = value" config overrides for the tracking stack.
void apply_config(const std::string& path, DualLoopConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::string line;
  while (std::getline(in, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::istringstream ks(line.substr(0, eq)), vs(line.substr(eq + 1));
    std::string key;
    double v;
    if (!(ks >> key) || !(vs >> v)) continue;
    if (key == "m")
      cfg.m = int(v);
    else if (key == "registration.tolerance")
      cfg.registration.tolerance = v;
    else if (key == "registration.max_iterations")
      cfg.registration.max_iterations = int(v);
    else if (key == "registration.bound_translation")
      cfg.registration.bound_translation.setConstant(v);
    else if (key == "registration.bound_rotation")
      cfg.registration.bound_rotation.setConstant(v);
    else if (key == "registration.line_search_max_evals")
      cfg.registration.line_search_max_evals = int(v);
    else if (key == "egomotion.max_iterations")
      cfg.egomotion.max_iterations = int(v);
    else if (key == "egomotion.convergence_threshold")
      cfg.egomotion.convergence_threshold = v;
    else if (key == "egomotion.huber_delta")
      cfg.egomotion.huber_delta = v;
    else if (key == "egomotion.pyramid_levels")
      cfg.egomotion.pyramid_levels = int(v);
    else if (key == "egomotion.finest_stride")
      cfg.egomotion.finest_stride = int(v);
    else
      throw ParseError("unknown config key: " + key);
  }
}

void print_report(const LocalizationReport& r, const std::string& format, std::ostream& os) {
  if (format == "json") {
    os << report_to_json(r).dump(2) << "\n";
    return;
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "ATE %.3f +/- %.3f mm | SR-5 %.1f%% | SR-10 %.1f%% | %.1f Hz | "
                "%d registrations | %d fallbacks\n",
                r.ate_mean, r.ate_std, 100 * r.sr5, 100 * r.sr10, r.runtime_hz,
                r.registration_count, r.fallback_count);
  os << buf;
}

int run(int argc, char** argv) {
  CLI::App app{"Depth-based bronchoscope localization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, format = "table";
  uint64_t seed = 0;
  int threads = int(std::thread::hardware_concurrency());
  app.add_option("--config", config_path, "key = value config file for tracking parameters");
  app.add_option("--seed", seed, "RNG seed");
  app.add_option("--threads", threads, "render threads");
  app.add_option("--format", format, "json|table")->check(CLI::IsMember({"json", "table"}));

  DualLoopConfig cfg;

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string sim_out, sim_kind = "y_bifurcation", sim_preset = "phantom-grade";
  int sim_frames = 300, sim_size = 256;
  double sim_speed = 0.5, sim_jitter = 0.01, sim_fov = 90.0;
  sim->add_option("--out", sim_out, "output dataset directory")->required();
  sim->add_option("--kind", sim_kind, "tube|y_bifurcation")
      ->check(CLI::IsMember({"tube", "y_bifurcation"}));
  sim->add_option("--frames", sim_frames, "maximum frame count");
  sim->add_option("--speed", sim_speed, "camera speed, mm/frame");
  sim->add_option("--jitter", sim_jitter, "heading jitter, rad");
  sim->add_option("--preset", sim_preset, "clean|phantom-grade|patient-grade")
      ->check(CLI::IsMember({"clean", "phantom-grade", "patient-grade"}));
  sim->add_option("--image-size", sim_size, "square depth resolution, px");
  sim->add_option("--fov", sim_fov, "horizontal field of view, degrees");

  // render
  auto* ren = app.add_subcommand("render", "render a depth map from a mesh");
  std::string ren_mesh, ren_intr, ren_out, ren_pose = "0,0,0,0,0,0";
  ren->add_option("--mesh", ren_mesh, "STL/OBJ mesh")->required();
  ren->add_option("--intrinsics", ren_intr, "intrinsics.txt")->required();
  ren->add_option("--pose", ren_pose, "camera pose tx,ty,tz,rx,ry,rz (mm, degrees)");
  ren->add_option("--out", ren_out, "output .dbin depth map")->required();

  // losses
  auto* los = app.add_subcommand("losses", "view/geometry consistency metrics for a frame pair");
  std::string los_a, los_b, los_intr, los_pose = "0,0,0,0,0,0";
  los->add_option("--depth-a", los_a, "source depth map (.dbin)")->required();
  los->add_option("--depth-b", los_b, "target depth map (.dbin)")->required();
  los->add_option("--intrinsics", los_intr, "intrinsics.txt")->required();
  los->add_option("--pose", los_pose, "relative pose a->b: tx,ty,tz,rx,ry,rz (mm, degrees)");

  // egomotion
  auto* ego = app.add_subcommand("egomotion", "relative pose between two depth maps");
  std::string ego_a, ego_b, ego_intr, ego_init = "0,0,0,0,0,0", ego_gt;
  double ego_omega = 100.0;
  ego->add_option("--depth-a", ego_a, "reference depth map (.dbin)")->required();
  ego->add_option("--depth-b", ego_b, "current depth map (.dbin)")->required();
  ego->add_option("--intrinsics", ego_intr, "intrinsics.txt")->required();
  ego->add_option("--init", ego_init, "initial relative pose (mm, degrees)");
  ego->add_option("--gt", ego_gt, "ground-truth relative pose (mm, degrees)");
  ego->add_option("--omega", ego_omega, "rotation weight in the pose error");

  // register
  auto* reg = app.add_subcommand("register", "absolute pose by depth-map registration");
  std::string reg_depth, reg_mesh, reg_intr, reg_init = "0,0,0,0,0,0";
  double reg_bound_t = 10.0, reg_bound_r_deg = 20.0, reg_tol = 0.01;
  reg->add_option("--depth", reg_depth, "observed depth map (.dbin)")->required();
  reg->add_option("--mesh", reg_mesh, "STL/OBJ airway mesh")->required();
  reg->add_option("--intrinsics", reg_intr, "intrinsics.txt")->required();
  reg->add_option("--init", reg_init, "initial pose (mm, degrees)");
  reg->add_option("--bound-t", reg_bound_t, "+/- translation bound, mm");
  reg->add_option("--bound-r", reg_bound_r_deg, "+/- rotation bound, degrees");
  reg->add_option("--tolerance", reg_tol, "Powell relative-decrease tolerance");

  // track
  auto* trk = app.add_subcommand("track", "run the dual-loop tracker over a dataset");
  std::string trk_dir, trk_out, trk_mode = "dual";
  bool trk_clean = false, trk_concurrent = false;
  trk->add_option("--dataset", trk_dir, "dataset directory")->required();
  trk->add_option("--out", trk_out, "estimated trajectory CSV output");
  trk->add_option("--mode", trk_mode, "dual|ego|registration")
      ->check(CLI::IsMember({"dual", "ego", "registration"}));
  trk->add_flag("--clean", trk_clean, "track on clean depth instead of corrupted");
  trk->add_flag("--concurrent", trk_concurrent, "background-thread registration");

  // benchmark
  auto* ben = app.add_subcommand("benchmark", "offline + concurrent tracking with metrics");
  std::string ben_dir;
  bool ben_clean = false;
  ben->add_option("--dataset", ben_dir, "dataset directory")->required();
  ben->add_flag("--clean", ben_clean, "use clean depth");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  if (!config_path.empty()) apply_config(config_path, cfg);

  if (sim->parsed()) {
    PhantomParams pp;
    const PhantomKind kind = sim_kind == "tube" ? PhantomKind::Tube : PhantomKind::YBifurcation;
    const Phantom phantom = make_phantom(kind, pp);
    Trajectory traj = generate_trajectory(phantom.centerline, sim_speed, sim_jitter, seed);
    if (traj.size() > sim_frames) traj.entries.resize(size_t(sim_frames));
    CameraIntrinsics k;
    k.width = k.height = sim_size;
    k.fx = k.fy = sim_size / (2.0 * std::tan(sim_fov * kDegToRad / 2.0));
    k.cx = k.cy = (sim_size - 1) / 2.0;
    Renderer renderer(phantom.mesh);
    renderer.set_threads(threads);
    CorruptionModel model;
    if (sim_preset == "phantom-grade")
      model = CorruptionModel::phantom_grade(seed);
    else if (sim_preset == "patient-grade")
      model = CorruptionModel::patient_grade(seed);
    model.rng_seed = seed;
    const DatasetManifest manifest =
        export_dataset(phantom, traj, k, renderer, model, sim_out);
    std::cout << "wrote " << manifest.frame_count << " frames ("
              << phantom.mesh.triangles.size() << " triangles) to " << sim_out << "\n";
    return 0;
  }

  if (ren->parsed()) {
    Renderer renderer(load_mesh(ren_mesh));
    renderer.set_threads(threads);
    const CameraIntrinsics k = load_intrinsics(ren_intr);
    const auto t0 = std::chrono::steady_clock::now();
    const DepthMap d = renderer.render(k, parse_pose(ren_pose));
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    save_depth_map(ren_out, d);
    std::cout << "rendered " << d.valid_count() << "/" << d.values.size() << " valid pixels in "
              << ms << " ms -> " << ren_out << "\n";
    return 0;
  }

  if (los->parsed()) {
    const DepthMap a = load_depth_map(los_a);
    const DepthMap b = load_depth_map(los_b);
    const CameraIntrinsics k = load_intrinsics(los_intr);
    const Pose a_to_b = parse_pose(los_pose);

    const DepthInconsistency inc = depth_inconsistency_map(a, b, a_to_b, k);
    const double gc = geometry_consistency_loss(inc);
    const auto [img_a, img_b] = normalize_depth_pair(a, b);
    const WarpResult warped = warp_to_target(img_a, b, invert(a_to_b), k, &a.valid);
    const double photo = photometric_consistency(img_b, warped);
    const double l1 = pixelwise_l1(img_a, img_b);
    const double drift = scale_drift(a, b);
    double correlation = std::nan("");
    try {
      correlation = ncc(a, b);
    } catch (const Error&) {
    }

    if (format == "json") {
      nlohmann::json j{{"geometry_consistency", gc},
                       {"photometric_consistency", photo},
                       {"pixelwise_l1", l1},
                       {"scale_drift", drift},
                       {"ncc", correlation}};
      std::cout << j.dump(2) << "\n";
    } else {
      std::cout << "geometry consistency   " << gc << "\n"
                << "photometric consistency " << photo << "\n"
                << "pixelwise L1            " << l1 << "\n"
                << "scale drift             " << drift << "\n"
                << "ncc                     " << correlation << "\n";
    }
    return 0;
  }

  if (ego->parsed()) {
    const DepthMap a = load_depth_map(ego_a);
    const DepthMap b = load_depth_map(ego_b);
    const CameraIntrinsics k = load_intrinsics(ego_intr);
    const EgoMotionEstimate est =
        estimate_relative_pose(a, b, k, parse_pose(ego_init), cfg.egomotion);
    std::cout << "relative pose: " << format_pose(est.pose) << "\n"
              << "residual " << est.residual << " mm, " << est.iterations << " iterations, "
              << (est.converged ? "converged" : "not converged") << "\n";
    if (!ego_gt.empty())
      std::cout << "pose error vs ground truth: "
                << pose_error(parse_pose(ego_gt), est.pose, ego_omega) << "\n";
    return 0;
  }

  if (reg->parsed()) {
    const DepthMap observed = load_depth_map(reg_depth);
    Renderer renderer(load_mesh(reg_mesh));
    renderer.set_threads(threads);
    const CameraIntrinsics k = load_intrinsics(reg_intr);
    RegistrationConfig rc = cfg.registration;
    rc.tolerance = reg_tol;
    rc.bound_translation.setConstant(reg_bound_t);
    rc.bound_rotation.setConstant(reg_bound_r_deg * kDegToRad);
    const auto t0 = std::chrono::steady_clock::now();
    const RegistrationResult res = register_depth(observed, renderer, k, parse_pose(reg_init), rc);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "pose: " << format_pose(res.pose) << "\n"
              << "ncc " << res.ncc << ", " << res.evaluations << " renders, " << ms << " ms, "
              << (res.converged ? "converged" : "not converged") << "\n";
    return 0;
  }

  if (trk->parsed()) {
    BenchmarkOptions opts;
    opts.use_clean_depth = trk_clean;
    opts.concurrent = trk_concurrent;
    opts.render_threads = threads;
    if (trk_mode == "ego")
      opts.mode = TrackingMode::EgoOnly;
    else if (trk_mode == "registration")
      opts.mode = TrackingMode::RegistrationOnly;
    const BenchmarkResult res = benchmark(trk_dir, cfg, opts);
    print_report(res.report, format, std::cout);
    if (!trk_out.empty()) {
      // Re-run is avoided: rebuild the trajectory from the per-frame errors is
      // not possible, so track again deterministically when an output is asked.
      const Dataset ds = load_dataset(trk_dir);
      const auto& paths = trk_clean || ds.corrupt_depth_paths.empty() ? ds.clean_depth_paths
                                                                      : ds.corrupt_depth_paths;
      std::vector<DepthMap> frames;
      for (const auto& p : paths) frames.push_back(load_depth_map(p));
      Renderer renderer(ds.mesh);
      renderer.set_threads(threads);
      const TrackResult tr = run_offline(cfg, renderer, ds.intrinsics,
                                         ds.ground_truth.entries.front().pose, frames, opts.mode);
      save_trajectory_csv(trk_out, tr.trajectory);
      std::cout << "trajectory written to " << trk_out << "\n";
    }
    return 0;
  }

  if (ben->parsed()) {
    BenchmarkOptions opts;
    opts.use_clean_depth = ben_clean;
    opts.render_threads = threads;
    const BenchmarkResult offline = benchmark(ben_dir, cfg, opts);
    opts.concurrent = true;
    const BenchmarkResult live = benchmark(ben_dir, cfg, opts);
    std::cout << "offline:    ";
    print_report(offline.report, format, std::cout);
    std::cout << "concurrent: ";
    print_report(live.report, format, std::cout);
    std::cout << "mean render time " << offline.mean_render_ms << " ms\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Data ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
