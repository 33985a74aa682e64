#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace sweepnet {

/// Per-pixel depth estimates in world units; values <= 0 mark invalid
/// pixels (stored as -1 on disk).
template <typename Scalar>
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<Scalar> depth;

  DepthMap() = default;
  DepthMap(int w, int h, Scalar fill = Scalar(-1))
      : width(w), height(h),
        depth(static_cast<std::size_t>(w) * h, fill) {}

  Scalar& at(int y, int x) {
    return depth[static_cast<std::size_t>(y) * width + x];
  }
  Scalar at(int y, int x) const {
    return depth[static_cast<std::size_t>(y) * width + x];
  }
  bool valid_at(int y, int x) const { return at(y, x) > Scalar(0); }
  std::size_t pixel_count() const { return depth.size(); }
};

/// Per-pixel confidence in [0, 1].
template <typename Scalar>
struct ProbabilityMap {
  int width = 0;
  int height = 0;
  std::vector<Scalar> value;

  ProbabilityMap() = default;
  ProbabilityMap(int w, int h, Scalar fill = Scalar(0))
      : width(w), height(h),
        value(static_cast<std::size_t>(w) * h, fill) {}

  Scalar& at(int y, int x) {
    return value[static_cast<std::size_t>(y) * width + x];
  }
  Scalar at(int y, int x) const {
    return value[static_cast<std::size_t>(y) * width + x];
  }
};

template <typename Scalar>
struct FusedPoint {
  Eigen::Matrix<Scalar, 3, 1> position;
  std::array<std::uint8_t, 3> color{0, 0, 0};
  int support = 0;
};

template <typename Scalar>
struct FusedCloud {
  std::vector<FusedPoint<Scalar>> points;
};

}  // namespace sweepnet
