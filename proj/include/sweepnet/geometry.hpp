#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sweepnet/common.hpp"
#include "sweepnet/tensor.hpp"

namespace sweepnet {

/// Pinhole camera: K (pixels), world-to-camera rotation R and translation t,
/// so X_cam = R * X_world + t.
template <typename Scalar>
struct Camera {
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

  Mat3 K = Mat3::Identity();
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  int image_width = 0;
  int image_height = 0;

  Vec3 center() const { return -R.transpose() * t; }
  /// World-space direction of the optical axis.
  Vec3 principal_axis() const { return R.row(2).transpose(); }

  /// World direction such that back_project(p, d) = center() + d * ray(p).
  Vec3 ray(const Vec2& pixel) const {
    return R.transpose() *
           (K.inverse() * Vec3(pixel.x(), pixel.y(), Scalar(1)));
  }

  Vec3 back_project(const Vec2& pixel, Scalar depth) const {
    return center() + depth * ray(pixel);
  }

  /// Projects a world point; returns pixel and the depth along the optical
  /// axis (the z coordinate in the camera frame).
  Vec2 project(const Vec3& X, Scalar* depth = nullptr) const {
    const Vec3 xc = R * X + t;
    if (depth) *depth = xc.z();
    const Vec3 h = K * xc;
    return Vec2(h.x() / h.z(), h.y() / h.z());
  }

  /// Camera for a resized image: first two rows of K scale with the factor.
  Camera scaled(Scalar factor) const {
    Camera c = *this;
    c.K.row(0) *= factor;
    c.K.row(1) *= factor;
    c.image_width = static_cast<int>(std::lround(image_width * factor));
    c.image_height = static_cast<int>(std::lround(image_height * factor));
    return c;
  }

  void validate() const {
    if (K(1, 0) != Scalar(0) || K(2, 0) != Scalar(0) || K(2, 1) != Scalar(0))
      throw std::invalid_argument("K is not upper-triangular");
    if (K(0, 0) <= Scalar(0) || K(1, 1) <= Scalar(0) || K(2, 2) <= Scalar(0))
      throw std::invalid_argument("K diagonal must be positive");
    const Mat3 e = R.transpose() * R - Mat3::Identity();
    if (e.cwiseAbs().maxCoeff() > Scalar(1e-9))
      throw std::invalid_argument("R is not orthonormal");
    if (std::abs(R.determinant() - Scalar(1)) > Scalar(1e-9))
      throw std::invalid_argument("det(R) != 1");
  }
};

template <typename Scalar>
struct DepthRange {
  Scalar d_min = 0;
  Scalar d_max = 0;
  int sample_count = 0;

  void validate() const {
    if (!(Scalar(0) < d_min && d_min < d_max))
      throw std::invalid_argument("depth range requires 0 < d_min < d_max");
    if (sample_count < 2)
      throw std::invalid_argument("depth range requires at least 2 samples");
  }
};

/// Sparse scene points with per-point camera visibility, the input to
/// source-view selection.
template <typename Scalar>
struct SparseCloud {
  std::vector<Eigen::Matrix<Scalar, 3, 1>> points;
  std::vector<std::vector<int>> visibility;
};

/// Maps reference pixels to source pixels for the fronto-parallel plane at
/// the given reference depth:
///   H = K_src R_src (I - (c_src - c_ref) n^T / depth) R_ref^T K_ref^{-1},
/// n the reference principal axis, c the camera centers.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> plane_sweep_homography(const Camera<Scalar>& ref,
                                                   const Camera<Scalar>& src,
                                                   Scalar depth) {
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  if (!(depth > Scalar(0)))
    throw std::invalid_argument("plane sweep depth must be positive");
  if (std::abs(ref.K.determinant()) < Scalar(1e-15) ||
      std::abs(src.K.determinant()) < Scalar(1e-15))
    throw std::invalid_argument("non-invertible intrinsic matrix");
  const Vec3 n = ref.principal_axis();
  const Vec3 baseline = src.center() - ref.center();
  const Mat3 plane = Mat3::Identity() - baseline * n.transpose() / depth;
  return src.K * src.R * plane * ref.R.transpose() * ref.K.inverse();
}

template <typename Scalar>
struct WarpResult {
  Tensor<Scalar> map;
  std::vector<std::uint8_t> valid;  // row-major h*w
};

/// Resamples src at H-transformed pixel coordinates with bilinear
/// interpolation. Samples outside src are zero-filled and flagged invalid.
/// The output grid matches src's spatial extent unless (out_h, out_w) is
/// given.
template <typename Scalar>
WarpResult<Scalar> warp_map(const Tensor<Scalar>& src,
                            const Eigen::Matrix<Scalar, 3, 3>& H,
                            int out_h = -1, int out_w = -1) {
  detail::require_map3(src, "warp source");
  if (std::abs(H.determinant()) < Scalar(1e-15))
    throw std::invalid_argument("warp homography is not invertible");
  const int h = src.dim(0), w = src.dim(1), c = src.dim(2);
  if (out_h < 0) out_h = h;
  if (out_w < 0) out_w = w;
  WarpResult<Scalar> r;
  r.map = Tensor<Scalar>({out_h, out_w, c});
  r.valid.assign(static_cast<std::size_t>(out_h) * out_w, 0);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const Eigen::Matrix<Scalar, 3, 1> q =
          H * Eigen::Matrix<Scalar, 3, 1>(Scalar(x), Scalar(y), Scalar(1));
      const Scalar sx = q.x() / q.z();
      const Scalar sy = q.y() / q.z();
      if (!(q.z() > Scalar(0)) || !(sx >= Scalar(0)) ||
          !(sx <= Scalar(w - 1)) || !(sy >= Scalar(0)) ||
          !(sy <= Scalar(h - 1)))
        continue;
      const int x0 = std::min(static_cast<int>(sx), w - 2 < 0 ? 0 : w - 2);
      const int y0 = std::min(static_cast<int>(sy), h - 2 < 0 ? 0 : h - 2);
      const Scalar fx = sx - Scalar(x0);
      const Scalar fy = sy - Scalar(y0);
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const Scalar w00 = (Scalar(1) - fx) * (Scalar(1) - fy);
      const Scalar w10 = fx * (Scalar(1) - fy);
      const Scalar w01 = (Scalar(1) - fx) * fy;
      const Scalar w11 = fx * fy;
      for (int k = 0; k < c; ++k) {
        r.map.at(y, x, k) = w00 * src.at(y0, x0, k) + w10 * src.at(y0, x1, k) +
                            w01 * src.at(y1, x0, k) + w11 * src.at(y1, x1, k);
      }
      r.valid[static_cast<std::size_t>(y) * out_w + x] = 1;
    }
  }
  return r;
}

/// Bilinear taps of warp_map for one output pixel; the training path uses
/// them to scatter gradients back into the source map.
template <typename Scalar>
struct BilinearTaps {
  bool valid = false;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  Scalar w00 = 0, w10 = 0, w01 = 0, w11 = 0;
};

template <typename Scalar>
BilinearTaps<Scalar> bilinear_taps(const Eigen::Matrix<Scalar, 3, 3>& H, int x,
                                   int y, int src_w, int src_h) {
  BilinearTaps<Scalar> t;
  const Eigen::Matrix<Scalar, 3, 1> q =
      H * Eigen::Matrix<Scalar, 3, 1>(Scalar(x), Scalar(y), Scalar(1));
  const Scalar sx = q.x() / q.z();
  const Scalar sy = q.y() / q.z();
  if (!(q.z() > Scalar(0)) || !(sx >= Scalar(0)) ||
      !(sx <= Scalar(src_w - 1)) || !(sy >= Scalar(0)) ||
      !(sy <= Scalar(src_h - 1)))
    return t;
  t.valid = true;
  t.x0 = std::min(static_cast<int>(sx), src_w - 2 < 0 ? 0 : src_w - 2);
  t.y0 = std::min(static_cast<int>(sy), src_h - 2 < 0 ? 0 : src_h - 2);
  t.x1 = std::min(t.x0 + 1, src_w - 1);
  t.y1 = std::min(t.y0 + 1, src_h - 1);
  const Scalar fx = sx - Scalar(t.x0);
  const Scalar fy = sy - Scalar(t.y0);
  t.w00 = (Scalar(1) - fx) * (Scalar(1) - fy);
  t.w10 = fx * (Scalar(1) - fy);
  t.w01 = (Scalar(1) - fx) * fy;
  t.w11 = fx * fy;
  return t;
}

/// Depth hypotheses equally spaced in inverse depth, endpoints exact:
/// 1/d(t) = 1/d_min + (t-1)/(D-1) * (1/d_max - 1/d_min), t = 1..D.
template <typename Scalar>
std::vector<Scalar> inverse_depth_samples(const DepthRange<Scalar>& range) {
  range.validate();
  const int d = range.sample_count;
  const Scalar inv_min = Scalar(1) / range.d_min;
  const Scalar inv_max = Scalar(1) / range.d_max;
  std::vector<Scalar> out(static_cast<std::size_t>(d));
  for (int t = 0; t < d; ++t)
    out[static_cast<std::size_t>(t)] =
        Scalar(1) / (inv_min + (inv_max - inv_min) * Scalar(t) / Scalar(d - 1));
  out.front() = range.d_min;
  out.back() = range.d_max;
  return out;
}

/// Uniform spacing of the inverse-depth grid (1/d_min - 1/d_max)/(D-1).
template <typename Scalar>
Scalar inverse_depth_spacing(const DepthRange<Scalar>& range) {
  return (Scalar(1) / range.d_min - Scalar(1) / range.d_max) /
         Scalar(range.sample_count - 1);
}

/// Matches the temporal depth resolution to the spatial image resolution:
/// rho is the distance between back-projections of the image-center pixel
/// and its +1-pixel horizontal neighbor at d_min, and
/// D = ceil[(1/d_min - 1/d_max) / (1/d_min - 1/(d_min + rho))], at least 2.
/// quarter_resolution uses the downsampled pixel grid instead.
template <typename Scalar>
int depth_sample_count(Scalar d_min, Scalar d_max, const Camera<Scalar>& ref,
                       bool quarter_resolution = false) {
  if (!(Scalar(0) < d_min && d_min < d_max))
    throw std::invalid_argument("depth range requires 0 < d_min < d_max");
  const Camera<Scalar> cam =
      quarter_resolution ? ref.scaled(Scalar(0.25)) : ref;
  using Vec2 = typename Camera<Scalar>::Vec2;
  const Vec2 center(Scalar(cam.image_width) / Scalar(2),
                    Scalar(cam.image_height) / Scalar(2));
  const Vec2 neighbor(center.x() + Scalar(1), center.y());
  const Scalar rho =
      (cam.back_project(neighbor, d_min) - cam.back_project(center, d_min))
          .norm();
  const Scalar numer = Scalar(1) / d_min - Scalar(1) / d_max;
  const Scalar denom = Scalar(1) / d_min - Scalar(1) / (d_min + rho);
  const int d = static_cast<int>(std::ceil(numer / denom));
  return std::max(d, 2);
}

struct ViewSelectionParams {
  double peak_angle_deg = 5.0;
  double sigma_below_deg = 1.0;
  double sigma_above_deg = 10.0;
};

/// Piece-wise Gaussian pair score over the baseline angle.
inline double baseline_angle_score(double theta_deg,
                                   const ViewSelectionParams& p = {}) {
  const double d = theta_deg - p.peak_angle_deg;
  const double sigma =
      theta_deg <= p.peak_angle_deg ? p.sigma_below_deg : p.sigma_above_deg;
  return std::exp(-d * d / (2.0 * sigma * sigma));
}

/// Ranks the other cameras by the summed pair score over co-visible sparse
/// points; ties break toward the lower camera index.
template <typename Scalar>
std::vector<int> select_source_views(int ref_index,
                                     const std::vector<Camera<Scalar>>& cameras,
                                     const SparseCloud<Scalar>& cloud,
                                     int count,
                                     const ViewSelectionParams& params = {}) {
  const int n = static_cast<int>(cameras.size());
  if (ref_index < 0 || ref_index >= n)
    throw std::invalid_argument("reference index out of range");
  if (count < 1 || count > n - 1)
    throw std::invalid_argument("requested " + std::to_string(count) +
                                " source views, only " + std::to_string(n - 1) +
                                " other cameras exist");
  if (cloud.points.empty())
    throw std::invalid_argument("sparse cloud is empty");
  if (cloud.visibility.size() != cloud.points.size())
    throw std::invalid_argument("cloud visibility list length mismatch");

  std::vector<double> score(static_cast<std::size_t>(n), 0.0);
  const auto c_ref = cameras[static_cast<std::size_t>(ref_index)].center();
  for (std::size_t pi = 0; pi < cloud.points.size(); ++pi) {
    const auto& vis = cloud.visibility[pi];
    const bool sees_ref =
        std::find(vis.begin(), vis.end(), ref_index) != vis.end();
    if (!sees_ref) continue;
    const Eigen::Matrix<Scalar, 3, 1> point = cloud.points[pi];
    for (int other : vis) {
      if (other == ref_index) continue;
      if (other < 0 || other >= n)
        throw std::invalid_argument("visibility refers to missing camera " +
                                    std::to_string(other));
      const auto c_other = cameras[static_cast<std::size_t>(other)].center();
      const Eigen::Matrix<Scalar, 3, 1> a = c_ref - point;
      const Eigen::Matrix<Scalar, 3, 1> b = c_other - point;
      const double denom = static_cast<double>(a.norm() * b.norm());
      double cosang = denom > 0 ? static_cast<double>(a.dot(b)) / denom : 1.0;
      cosang = std::clamp(cosang, -1.0, 1.0);
      const double theta_deg = std::acos(cosang) * 180.0 / M_PI;
      score[static_cast<std::size_t>(other)] +=
          baseline_angle_score(theta_deg, params);
    }
  }
  std::vector<int> order;
  for (int i = 0; i < n; ++i)
    if (i != ref_index) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (score[static_cast<std::size_t>(a)] !=
        score[static_cast<std::size_t>(b)])
      return score[static_cast<std::size_t>(a)] >
             score[static_cast<std::size_t>(b)];
    return a < b;
  });
  order.resize(static_cast<std::size_t>(count));
  return order;
}

}  // namespace sweepnet
