#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sweepnet/common.hpp"
#include "sweepnet/depth_map.hpp"
#include "sweepnet/geometry.hpp"
#include "sweepnet/tensor.hpp"

namespace sweepnet::synth {

using Vec3 = Eigen::Vector3d;

/// Band-limited procedural albedo: a seeded sum of plane-coordinate cosine
/// waves. Wavelengths are bounded below, so bilinear resampling of rendered
/// images stays accurate.
struct PlaneTexture {
  std::uint64_t seed = 0;
  double min_wavelength = 1;  // world units on the plane
  double max_wavelength = 4;
  double contrast = 0.15;
  int wave_count = 6;

  double albedo(double s, double t) const;
};

/// Rectangular Lambertian patch: orthonormal in-plane axes, half extents,
/// albedo texture and an RGB tint.
struct PlanePatch {
  Vec3 center = Vec3::Zero();
  Vec3 axis_s = Vec3::UnitX();
  Vec3 axis_t = Vec3::UnitY();
  double half_s = 1;
  double half_t = 1;
  PlaneTexture texture;
  Vec3 tint = Vec3::Ones();

  Vec3 normal() const { return axis_s.cross(axis_t); }
};

struct SceneSpec {
  std::vector<PlanePatch> patches;
};

/// Depth (along the camera's optical axis) of the nearest patch hit by the
/// ray through the given continuous pixel; empty when the ray escapes.
std::optional<double> trace_depth(const SceneSpec& scene,
                                  const Camera<double>& cam, double px,
                                  double py);

/// Shaded RGB color of the nearest hit; zero (background) when none.
Vec3 trace_color(const SceneSpec& scene, const Camera<double>& cam, double px,
                 double py);

struct RenderedView {
  Tensor<double> image;       // (h, w, 3) in [0, 1]
  DepthMap<double> gt_depth;  // quarter resolution, -1 where no surface
};

/// Ray casts the scene. Ground-truth depth is produced at quarter resolution
/// by sampling ray depth at feature-pixel centers (full-resolution
/// coordinates 4x, 4y). Gaussian pixel noise (std sigma, clamped to [0, 1])
/// is applied to the image only.
RenderedView render(const SceneSpec& scene, const Camera<double>& cam,
                    double noise_sigma = 0.0, std::uint64_t noise_seed = 0);

struct SceneRig {
  int id = 0;
  SceneSpec scene;
  std::vector<Camera<double>> cameras;
};

struct DatasetParams {
  std::uint64_t seed = 1;
  int scene_count = 5;
  int views_per_scene = 3;
  int image_width = 64;
  int image_height = 48;
  double d_min = 100;
  double d_max = 400;
  double noise_sigma = 0.0;
  double focal_px = 120;
  double baseline = 70;  // camera spacing in world units
};

struct Dataset {
  DatasetParams params;
  std::vector<SceneRig> scenes;
  std::vector<int> train_ids;
  std::vector<int> val_ids;

  DepthRange<double> range() const {
    return DepthRange<double>{params.d_min, params.d_max, 2};
  }
};

/// Reproducible textured-plane scenes on a small-baseline camera arc,
/// 80/20 train/validation split by scene.
Dataset make_dataset(const DatasetParams& params);

/// Per-view image noise stream, stable in (dataset seed, scene, view).
std::uint64_t view_noise_seed(const DatasetParams& params, int scene_id,
                              int view_index);

RenderedView render_view(const Dataset& ds, int scene_id, int view_index);

/// Versioned text manifest from which the dataset is reproducible. Camera
/// files are written next to it (cams/scene###_view##.txt).
void save_dataset(const Dataset& ds, const std::string& directory,
                  bool write_renders = true);
Dataset load_dataset(const std::string& manifest_path);

}  // namespace sweepnet::synth
