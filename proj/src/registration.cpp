#include "lumenav/registration.hpp"

#include <cmath>

#include "lumenav/errors.hpp"

namespace lumenav {

double ncc(const DepthMap& a, const DepthMap& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("ncc shapes");
  double sum_a = 0, sum_b = 0;
  long n = 0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    if (!a.valid[i] || !b.valid[i]) continue;
    sum_a += a.values[i];
    sum_b += b.values[i];
    ++n;
  }
  if (n == 0) throw EmptyValidSet("empty joint valid set in ncc");
  const double mean_a = sum_a / n;
  const double mean_b = sum_b / n;
  double var_a = 0, var_b = 0, cov = 0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    if (!a.valid[i] || !b.valid[i]) continue;
    const double da = a.values[i] - mean_a;
    const double db = b.values[i] - mean_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  const double eps_a = 1e-18 * std::max(1.0, mean_a * mean_a) * n;
  const double eps_b = 1e-18 * std::max(1.0, mean_b * mean_b) * n;
  if (var_a <= eps_a || var_b <= eps_b)
    throw ZeroVariance("constant depth map on the joint valid set");
  return std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
}

namespace {

constexpr double kGolden = 0.6180339887498949;

double checked(double v) {
  if (!std::isfinite(v)) throw NonFiniteObjective("objective returned " + std::to_string(v));
  return v;
}

struct LinePoint {
  double alpha, f;
};

// Bounded line search from the incumbent: probe outward at shrinking scales
// until a descent direction appears, expand geometrically while descending,
// then golden-section refine the bracket. Fine initial probes matter: inside a
// narrow curved valley the 1-D minimum sits a tiny step from the incumbent and
// a segment-wide scan would never resolve it. Ties keep the incumbent
// (alpha = 0).
LinePoint line_search(const std::function<double(double)>& f, double f0, double amin, double amax,
                      int max_evals, int& evals) {
  LinePoint best{0.0, f0};
  if (amax - amin < 1e-14 || max_evals < 2) return best;
  const double span = amax - amin;
  auto eval = [&](double a) {
    ++evals;
    return checked(f(a));
  };

  double dir = 0;
  for (double scale = 2e-2; scale > 1e-10 && dir == 0; scale /= 16.0) {
    const double h = scale * span;
    const double ap = std::min(h, amax), am = std::max(-h, amin);
    if (ap > 1e-14 && evals < max_evals) {
      const double v = eval(ap);
      if (v < best.f) {
        best = {ap, v};
        dir = 1;
        break;
      }
    }
    if (am < -1e-14 && evals < max_evals) {
      const double v = eval(am);
      if (v < best.f) {
        best = {am, v};
        dir = -1;
        break;
      }
    }
    if (evals >= max_evals) break;
  }
  if (dir == 0) return best;  // incumbent is a 1-D minimum at probe resolution

  // Expand while descending; the minimum ends up bracketed by [prev, outer].
  double prev = 0.0, cur = best.alpha, outer = best.alpha;
  while (evals < max_evals) {
    const double nxt = std::clamp(cur + (cur - prev) * 2.0, amin, amax);
    if (nxt == cur) {
      outer = cur;
      break;
    }
    const double v = eval(nxt);
    if (v < best.f) {
      best = {nxt, v};
      prev = cur;
      cur = nxt;
      outer = nxt;
      if (nxt == amin || nxt == amax) break;
    } else {
      outer = nxt;
      break;
    }
  }

  double lo = std::min(prev, outer), hi = std::max(prev, outer);
  while (evals + 2 <= max_evals && hi - lo > 1e-12) {
    const double x1 = hi - kGolden * (hi - lo);
    const double x2 = lo + kGolden * (hi - lo);
    const double f1 = eval(x1);
    const double f2 = eval(x2);
    if (f1 < best.f) best = {x1, f1};
    if (f2 < best.f) best = {x2, f2};
    if (f1 <= f2)
      hi = x2;
    else
      lo = x1;
  }
  return best;
}

}  // namespace

PowellResult powell_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, double tolerance, int max_sweeps,
                             int line_search_max_evals, const std::atomic<bool>* cancel) {
  const int n = static_cast<int>(x0.size());
  const Eigen::VectorXd range = upper - lower;
  for (int i = 0; i < n; ++i)
    if (!(range[i] > 0)) throw InvalidParams("powell bounds must have positive extent");

  // Work in normalized coordinates u in [0,1]^n so mixed units share a scale.
  auto to_x = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return lower + u.cwiseProduct(range);
  };
  auto clamp01 = [](Eigen::VectorXd u) {
    for (int i = 0; i < u.size(); ++i) u[i] = std::clamp(u[i], 0.0, 1.0);
    return u;
  };

  PowellResult out;
  Eigen::VectorXd u = clamp01((x0 - lower).cwiseQuotient(range));
  double fu = checked(f(to_x(u)));
  out.evaluations = 1;

  std::vector<Eigen::VectorXd> dirs;
  for (int i = 0; i < n; ++i) dirs.push_back(Eigen::VectorXd::Unit(n, i));

  auto search_along = [&](const Eigen::VectorXd& d) -> double {
    double amin = -std::numeric_limits<double>::infinity();
    double amax = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (d[i] > 1e-15) {
        amax = std::min(amax, (1.0 - u[i]) / d[i]);
        amin = std::max(amin, -u[i] / d[i]);
      } else if (d[i] < -1e-15) {
        amax = std::min(amax, -u[i] / d[i]);
        amin = std::max(amin, (1.0 - u[i]) / d[i]);
      }
    }
    if (!std::isfinite(amin) || !std::isfinite(amax) || amax <= amin) return 0.0;
    int evals = 0;
    const LinePoint p = line_search(
        [&](double a) { return f(to_x(clamp01(u + a * d))); }, fu, amin, amax,
        line_search_max_evals, evals);
    out.evaluations += evals;
    const double decrease = fu - p.f;
    if (p.alpha != 0.0 && decrease > 0) {
      u = clamp01(u + p.alpha * d);
      fu = p.f;
    }
    return decrease > 0 ? decrease : 0.0;
  };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Eigen::VectorXd u_start = u;
    const double f_start = fu;
    int largest_index = 0;
    double largest_decrease = 0;
    for (int i = 0; i < n; ++i) {
      if (cancel && cancel->load()) {
        out.x = to_x(u);
        out.f = fu;
        return out;
      }
      const double dec = search_along(dirs[i]);
      if (dec > largest_decrease) {
        largest_decrease = dec;
        largest_index = i;
      }
    }
    const Eigen::VectorXd displacement = u - u_start;
    if (displacement.norm() > 1e-14) {
      dirs[largest_index] = displacement.normalized();
      search_along(dirs[largest_index]);
    }
    const double rel = (f_start - fu) / std::max(std::abs(f_start), 1e-12);
    if (rel < tolerance) {
      out.converged = true;
      break;
    }
  }

  out.x = to_x(u);
  out.f = fu;
  return out;
}

RegistrationResult register_depth(const DepthMap& observed, const Renderer& r,
                                  const CameraIntrinsics& k, const Pose& init,
                                  const RegistrationConfig& cfg,
                                  const std::atomic<bool>* cancel) {
  if (observed.width != k.width || observed.height != k.height)
    throw DimensionMismatch("observed depth does not match intrinsics");
  const long total = long(observed.width) * observed.height;
  if (observed.valid_count() < 0.05 * double(total))
    throw DegenerateObservation("observed map has <5% valid pixels");

  int renders = 0;
  auto objective = [&](const Eigen::VectorXd& x) {
    const Pose delta =
        euler_to_pose({x[3], x[4], x[5]}, Eigen::Vector3d(x[0], x[1], x[2]));
    const DepthMap rendered = r.render(k, compose(init, delta));
    ++renders;
    try {
      return -ncc(observed, rendered);
    } catch (const EmptyValidSet&) {
      return 1.0;  // worst score, keeps the objective total
    } catch (const ZeroVariance&) {
      return 1.0;
    }
  };

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd lower(6), upper(6);
  for (int i = 0; i < 3; ++i) {
    lower[i] = -cfg.bound_translation[i];
    upper[i] = cfg.bound_translation[i];
    lower[3 + i] = -cfg.bound_rotation[i];
    upper[3 + i] = cfg.bound_rotation[i];
  }

  const PowellResult p = powell_minimize(objective, x0, lower, upper, cfg.tolerance,
                                         cfg.max_iterations, cfg.line_search_max_evals, cancel);
  Eigen::VectorXd best_x = p.x;
  double best_f = p.f;
  bool converged = p.converged;

  // Axis-aligned sweeps stall on coordinate-wise dead points inside the curved
  // translation/rotation valley of the NCC surface (rendering facet ripple
  // pins every single axis). Probe two-axis diagonals around the stall point
  // and relaunch the direction-set search from any strict improvement.
  const Eigen::VectorXd range = upper - lower;
  for (int round = 0; round < 10; ++round) {
    if (cancel && cancel->load()) break;
    bool improved = false;
    for (int i = 0; i < 6 && !improved; ++i) {
      for (int j = i + 1; j < 6 && !improved; ++j) {
        for (const double si : {1.0, -1.0}) {
          for (const double sj : {1.0, -1.0}) {
            for (const double scale : {0.1, 0.04, 0.01}) {
              Eigen::VectorXd y = best_x;
              y[i] = std::clamp(y[i] + si * scale * range[i], lower[i], upper[i]);
              y[j] = std::clamp(y[j] + sj * scale * range[j], lower[j], upper[j]);
              const double fy = objective(y);
              if (std::isfinite(fy) && fy < best_f) {
                best_f = fy;
                best_x = y;
                improved = true;
                break;
              }
            }
            if (improved) break;
          }
          if (improved) break;
        }
      }
    }
    if (!improved) break;
    const PowellResult q = powell_minimize(objective, best_x, lower, upper, cfg.tolerance,
                                           cfg.max_iterations, cfg.line_search_max_evals, cancel);
    if (q.f < best_f) {
      best_f = q.f;
      best_x = q.x;
      converged = q.converged;
    }
  }

  RegistrationResult out;
  const Pose delta =
      euler_to_pose({best_x[3], best_x[4], best_x[5]},
                    Eigen::Vector3d(best_x[0], best_x[1], best_x[2]));
  out.pose = compose(init, delta);
  out.ncc = -best_f;
  out.evaluations = renders;
  out.converged = converged;
  return out;
}

}  // namespace lumenav
