#include "lumenav/view_synthesis.hpp"

#include <algorithm>
#include <cmath>

#include "lumenav/errors.hpp"

namespace lumenav {

namespace {

struct ImageSample {
  double value[3];
  bool valid;
};

ImageSample sample_image_bilinear(const Image& img, double x, double y,
                                  const std::vector<uint8_t>* mask) {
  ImageSample out{{0, 0, 0}, false};
  if (std::abs(x - std::round(x)) < 1e-9) x = std::round(x);
  if (std::abs(y - std::round(y)) < 1e-9) y = std::round(y);
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const double wts[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int i = 0; i < 4; ++i) {
    if (wts[i] == 0.0) continue;
    if (xs[i] < 0 || xs[i] >= img.width || ys[i] < 0 || ys[i] >= img.height) return out;
    if (mask && !(*mask)[size_t(ys[i]) * img.width + xs[i]]) return out;
    for (int c = 0; c < img.channels; ++c) out.value[c] += wts[i] * img.at(xs[i], ys[i], c);
  }
  out.valid = true;
  return out;
}

}  // namespace

WarpResult warp_to_target(const Image& source, const DepthMap& target_depth,
                          const Pose& target_to_source, const CameraIntrinsics& k,
                          const std::vector<uint8_t>* source_valid) {
  if (source.width != k.width || source.height != k.height || target_depth.width != k.width ||
      target_depth.height != k.height)
    throw DimensionMismatch("warp inputs do not match intrinsics");

  WarpResult out;
  out.warped = Image(k.width, k.height, source.channels);
  out.valid.assign(size_t(k.width) * k.height, 0);
  out.coords.assign(size_t(k.width) * k.height, Eigen::Vector2d::Zero());

  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const size_t i = target_depth.index(x, y);
      if (!target_depth.valid[i]) continue;
      const Eigen::Vector3d pt =
          unproject(k, {double(x), double(y)}, target_depth.values[i]);
      const Eigen::Vector3d ps = target_to_source.apply(pt);
      if (ps.z() <= 0) continue;
      const Eigen::Vector2d uv = project(k, ps);
      out.coords[i] = uv;
      const ImageSample s = sample_image_bilinear(source, uv.x(), uv.y(), source_valid);
      if (!s.valid) continue;
      out.valid[i] = 1;
      for (int c = 0; c < source.channels; ++c)
        out.warped.at(x, y, c) = static_cast<float>(s.value[c]);
    }
  }
  return out;
}

double photometric_consistency(const Image& a, const WarpResult& b_warped) {
  if (!a.same_shape(b_warped.warped)) throw DimensionMismatch("photometric_consistency shapes");
  double acc = 0;
  long count = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (!b_warped.valid[size_t(y) * a.width + x]) continue;
      for (int c = 0; c < a.channels; ++c)
        acc += std::abs(double(b_warped.warped.at(x, y, c)) - double(a.at(x, y, c)));
      ++count;
    }
  }
  if (count == 0) throw EmptyValidSet("no co-visible pixels in warp");
  return acc / (double(count) * a.channels);
}

double view_consistency_total(double loss_generated, double loss_real, const LossWeights& w) {
  return w.tau1 * loss_generated + w.tau2 * loss_real;
}

DepthInconsistency depth_inconsistency_map(const DepthMap& depth_src, const DepthMap& depth_tgt,
                                           const Pose& src_to_tgt, const CameraIntrinsics& k) {
  if (!depth_src.same_shape(depth_tgt) || depth_src.width != k.width ||
      depth_src.height != k.height)
    throw DimensionMismatch("depth_inconsistency_map shapes");

  DepthInconsistency out;
  out.width = depth_src.width;
  out.height = depth_src.height;
  out.map.assign(size_t(out.width) * out.height, 0.0);
  out.valid.assign(size_t(out.width) * out.height, 0);

  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const size_t i = depth_src.index(x, y);
      if (!depth_src.valid[i]) continue;
      const Eigen::Vector3d pt = unproject(k, {double(x), double(y)}, depth_src.values[i]);
      const Eigen::Vector3d pw = src_to_tgt.apply(pt);
      if (pw.z() <= 0) continue;
      const Eigen::Vector2d uv = project(k, pw);
      const BilinearSample interp = sample_depth_bilinear(depth_tgt, uv.x(), uv.y());
      if (!interp.valid) continue;
      const double z_fwd = pw.z();
      out.map[i] = std::abs(z_fwd - interp.value) / (z_fwd + interp.value);
      out.valid[i] = 1;
    }
  }
  return out;
}

double geometry_consistency_loss(const DepthInconsistency& m) {
  double acc = 0;
  long count = 0;
  for (size_t i = 0; i < m.map.size(); ++i) {
    if (!m.valid[i]) continue;
    acc += m.map[i];
    ++count;
  }
  if (count == 0) throw EmptyValidSet("empty depth-inconsistency valid set");
  return acc / double(count);
}

double pixelwise_l1(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("pixelwise_l1 shapes");
  double acc = 0;
  for (size_t i = 0; i < a.values.size(); ++i)
    acc += std::abs(double(a.values[i]) - double(b.values[i]));
  return acc / double(a.values.size());
}

double total_loss(double l_cyc, double l_iden, double l_adv, double l_rec, double l_gc,
                  const LossWeights& w) {
  return w.beta * l_cyc + w.gamma * l_iden + w.delta * l_adv + l_rec + w.eta * l_gc;
}

std::pair<Image, Image> normalize_depth_pair(const DepthMap& a, const DepthMap& b) {
  if (!a.same_shape(b)) throw DimensionMismatch("normalize_depth_pair shapes");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const DepthMap* d : {&a, &b}) {
    for (size_t i = 0; i < d->values.size(); ++i) {
      if (!d->valid[i]) continue;
      lo = std::min(lo, d->values[i]);
      hi = std::max(hi, d->values[i]);
    }
  }
  if (!(hi > -std::numeric_limits<double>::infinity()))
    throw EmptyValidSet("no valid pixels in depth pair");
  const double range = hi > lo ? hi - lo : 1.0;
  auto convert = [&](const DepthMap& d) {
    Image img(d.width, d.height, 1);
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x)
        if (d.is_valid(x, y)) img.at(x, y) = static_cast<float>((d.at(x, y) - lo) / range);
    return img;
  };
  return {convert(a), convert(b)};
}

}  // namespace lumenav
