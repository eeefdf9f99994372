#pragma once

#include <utility>
#include <vector>

#include "lumenav/depth_map.hpp"
#include "lumenav/geometry.hpp"

namespace lumenav {

// Scalar or RGB image with values normalized to [0,1]. Row-major, interleaved.
struct Image {
  int width{0}, height{0}, channels{1};
  std::vector<float> values;

  Image() = default;
  Image(int w, int h, int c = 1)
      : width(w), height(h), channels(c), values(size_t(w) * h * c, 0.f) {}

  size_t index(int x, int y, int c = 0) const { return (size_t(y) * width + x) * channels + c; }
  float& at(int x, int y, int c = 0) { return values[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return values[index(x, y, c)]; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

struct WarpResult {
  Image warped;                         // target-frame image sampled from the source
  std::vector<uint8_t> valid;           // per target pixel
  std::vector<Eigen::Vector2d> coords;  // continuous source coordinates (px)
};

struct LossWeights {
  double tau1{0.3}, tau2{5.0};
  double beta{10.0}, gamma{5.0}, delta{1.0}, eta{5.0};
};

// Inverse warp: for each valid target pixel, unproject with the target depth,
// transform into the source frame, project, and bilinear-sample the source.
// Pixels projecting out of bounds or to non-positive depth are invalid, as are
// samples touching an out-of-bounds (or masked-out) source pixel.
WarpResult warp_to_target(const Image& source, const DepthMap& target_depth,
                          const Pose& target_to_source, const CameraIntrinsics& k,
                          const std::vector<uint8_t>* source_valid = nullptr);

// Mean absolute difference over the valid set; throws EmptyValidSet when the
// warp produced no valid pixel.
double photometric_consistency(const Image& a, const WarpResult& b_warped);

double view_consistency_total(double loss_generated, double loss_real, const LossWeights& w);

struct DepthInconsistency {
  int width{0}, height{0};
  std::vector<double> map;  // |z_fwd - z_interp| / (z_fwd + z_interp), in [0,1)
  std::vector<uint8_t> valid;
};

// Forward formulation: backproject each valid source pixel, transform, project
// into the target; compare the transformed z against the bilinear-interpolated
// target depth at the continuous landing coordinates.
DepthInconsistency depth_inconsistency_map(const DepthMap& depth_src, const DepthMap& depth_tgt,
                                           const Pose& src_to_tgt, const CameraIntrinsics& k);

double geometry_consistency_loss(const DepthInconsistency& m);

double pixelwise_l1(const Image& a, const Image& b);

double total_loss(double l_cyc, double l_iden, double l_adv, double l_rec, double l_gc,
                  const LossWeights& w);

// Joint min-max normalization of a depth-map pair into [0,1] images, for
// photometric comparison of depth maps. Invalid pixels map to 0.
std::pair<Image, Image> normalize_depth_pair(const DepthMap& a, const DepthMap& b);

}  // namespace lumenav
