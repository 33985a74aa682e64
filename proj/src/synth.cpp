#include "sweepnet/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sweepnet/io.hpp"

namespace sweepnet::synth {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Wave {
  double ks, kt;  // angular frequency along the plane axes
  double phase;
  double amplitude;
};

std::vector<Wave> texture_waves(const PlaneTexture& tex) {
  Rng rng(tex.seed);
  std::vector<Wave> waves(static_cast<std::size_t>(tex.wave_count));
  // Amplitudes scaled so the summed signal has roughly `contrast` std and
  // longer wavelengths carry most of the energy.
  double norm = 0;
  for (int i = 0; i < tex.wave_count; ++i) {
    const double u = (tex.wave_count == 1)
                         ? 0.0
                         : static_cast<double>(i) / (tex.wave_count - 1);
    const double wavelength =
        tex.max_wavelength * std::pow(tex.min_wavelength / tex.max_wavelength,
                                      u);
    const double angle = rng.uniform(0.0, kTwoPi);
    Wave& w = waves[static_cast<std::size_t>(i)];
    const double k = kTwoPi / wavelength;
    w.ks = k * std::cos(angle);
    w.kt = k * std::sin(angle);
    w.phase = rng.uniform(0.0, kTwoPi);
    w.amplitude = wavelength * wavelength;
    norm += 0.5 * w.amplitude * w.amplitude;
  }
  const double scale = tex.contrast / std::sqrt(norm);
  for (auto& w : waves) w.amplitude *= scale;
  return waves;
}

}  // namespace

double PlaneTexture::albedo(double s, double t) const {
  double v = 0.5;
  for (const Wave& w : texture_waves(*this))
    v += w.amplitude * std::cos(w.ks * s + w.kt * t + w.phase);
  return std::clamp(v, 0.02, 0.98);
}

namespace {

struct Hit {
  double depth;
  const PlanePatch* patch;
  double s, t;
};

std::optional<Hit> trace(const SceneSpec& scene, const Camera<double>& cam,
                         double px, double py) {
  const Vec3 origin = cam.center();
  const Vec3 dir = cam.ray(Eigen::Vector2d(px, py));
  std::optional<Hit> best;
  for (const PlanePatch& patch : scene.patches) {
    const Vec3 n = patch.normal();
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-14) continue;
    const double d = n.dot(patch.center - origin) / denom;
    if (d <= 0) continue;
    const Vec3 x = origin + d * dir - patch.center;
    const double s = patch.axis_s.dot(x);
    const double t = patch.axis_t.dot(x);
    if (std::abs(s) > patch.half_s || std::abs(t) > patch.half_t) continue;
    if (!best || d < best->depth) best = Hit{d, &patch, s, t};
  }
  return best;
}

}  // namespace

std::optional<double> trace_depth(const SceneSpec& scene,
                                  const Camera<double>& cam, double px,
                                  double py) {
  const auto hit = trace(scene, cam, px, py);
  if (!hit) return std::nullopt;
  return hit->depth;
}

Vec3 trace_color(const SceneSpec& scene, const Camera<double>& cam, double px,
                 double py) {
  const auto hit = trace(scene, cam, px, py);
  if (!hit) return Vec3::Zero();
  const double a = hit->patch->texture.albedo(hit->s, hit->t);
  return a * hit->patch->tint;
}

RenderedView render(const SceneSpec& scene, const Camera<double>& cam,
                    double noise_sigma, std::uint64_t noise_seed) {
  const int w = cam.image_width, h = cam.image_height;
  if (w % 4 != 0 || h % 4 != 0)
    throw std::invalid_argument("render requires dimensions divisible by 4");
  RenderedView out;
  out.image = Tensor<double>({h, w, 3});

  // Texture waves are recomputed per albedo call in the generic path; for
  // whole-image rendering cache them per patch.
  std::vector<std::vector<Wave>> waves;
  waves.reserve(scene.patches.size());
  for (const auto& p : scene.patches) waves.push_back(texture_waves(p.texture));

  Rng noise(noise_seed);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto hit = trace(scene, cam, x, y);
      Vec3 color = Vec3::Zero();
      if (hit) {
        const std::size_t pi = static_cast<std::size_t>(
            hit->patch - scene.patches.data());
        double a = 0.5;
        for (const Wave& wv : waves[pi])
          a += wv.amplitude * std::cos(wv.ks * hit->s + wv.kt * hit->t +
                                       wv.phase);
        a = std::clamp(a, 0.02, 0.98);
        color = a * hit->patch->tint;
      }
      for (int c = 0; c < 3; ++c) {
        double v = color[c];
        if (noise_sigma > 0) v += noise_sigma * noise.normal();
        out.image.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }

  out.gt_depth = DepthMap<double>(w / 4, h / 4);
  for (int y = 0; y < h / 4; ++y)
    for (int x = 0; x < w / 4; ++x) {
      const auto d = trace_depth(scene, cam, 4.0 * x, 4.0 * y);
      out.gt_depth.at(y, x) = d ? *d : -1.0;
    }
  return out;
}

namespace {

Camera<double> look_at(const Vec3& eye, const Vec3& target, int width,
                       int height, double focal_px) {
  Camera<double> cam;
  Vec3 zaxis = (target - eye).normalized();
  Vec3 xaxis = Vec3::UnitY().cross(zaxis).normalized();
  Vec3 yaxis = zaxis.cross(xaxis);
  cam.R.row(0) = xaxis.transpose();
  cam.R.row(1) = yaxis.transpose();
  cam.R.row(2) = zaxis.transpose();
  cam.t = -cam.R * eye;
  cam.K << focal_px, 0, (width - 1) / 2.0, 0, focal_px, (height - 1) / 2.0, 0,
      0, 1;
  cam.image_width = width;
  cam.image_height = height;
  return cam;
}

PlanePatch make_patch(Rng rng, const Vec3& center, double half_s,
                      double half_t, double pixel_footprint) {
  PlanePatch p;
  p.center = center;
  // Mild tilt away from fronto-parallel, small enough that every patch stays
  // front-facing on the rig.
  const double tilt = rng.uniform(-0.12, 0.12);
  const double swing = rng.uniform(0.0, kTwoPi);
  const Vec3 tilt_axis(std::cos(swing), std::sin(swing), 0.0);
  const Eigen::AngleAxisd rot(tilt, tilt_axis.normalized());
  p.axis_s = rot * Vec3::UnitX();
  p.axis_t = rot * Vec3::UnitY();
  p.half_s = half_s;
  p.half_t = half_t;
  p.texture.seed = rng.bits();
  p.texture.min_wavelength = 14.0 * pixel_footprint;
  p.texture.max_wavelength = 56.0 * pixel_footprint;
  p.texture.contrast = 0.16;
  p.tint = Vec3(rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0),
                rng.uniform(0.6, 1.0));
  return p;
}

}  // namespace

std::uint64_t view_noise_seed(const DatasetParams& params, int scene_id,
                              int view_index) {
  return detail::splitmix64(
      params.seed ^
      detail::splitmix64(0x6E6F697365ull ^
                         (static_cast<std::uint64_t>(scene_id) << 20) ^
                         static_cast<std::uint64_t>(view_index)));
}

Dataset make_dataset(const DatasetParams& params) {
  if (params.scene_count < 1)
    throw std::invalid_argument("dataset needs at least one scene");
  if (params.views_per_scene < 2)
    throw std::invalid_argument("dataset needs at least two views per scene");
  if (params.image_width % 4 != 0 || params.image_height % 4 != 0)
    throw std::invalid_argument("image dimensions must be divisible by 4");

  Dataset ds;
  ds.params = params;
  Rng root(params.seed);
  const double span = params.d_max - params.d_min;
  for (int s = 0; s < params.scene_count; ++s) {
    Rng rng = root.child(static_cast<std::uint64_t>(s) + 101);
    SceneRig rig;
    rig.id = s;

    // Backdrop plane filling the frustum, plus one or two nearer patches.
    const double far_depth = params.d_min + span * rng.uniform(0.72, 0.9);
    const double frustum_half_w =
        far_depth * params.image_width / (2.0 * params.focal_px);
    const double frustum_half_h =
        far_depth * params.image_height / (2.0 * params.focal_px);
    const double margin =
        1.7 + params.baseline * (params.views_per_scene - 1) / far_depth;
    rig.scene.patches.push_back(
        make_patch(rng.child(1), Vec3(0, 0, far_depth),
                   frustum_half_w * margin, frustum_half_h * margin,
                   far_depth / params.focal_px));

    const int extra = 1 + static_cast<int>(rng.index(2));
    for (int i = 0; i < extra; ++i) {
      const double depth = params.d_min + span * rng.uniform(0.25, 0.55);
      const double hw = depth * params.image_width / (2.0 * params.focal_px);
      const Vec3 center(rng.uniform(-0.5, 0.5) * hw,
                        rng.uniform(-0.4, 0.4) * hw, depth);
      rig.scene.patches.push_back(make_patch(
          rng.child(static_cast<std::uint64_t>(10 + i)), center,
          hw * rng.uniform(0.35, 0.6), hw * rng.uniform(0.3, 0.5),
          depth / params.focal_px));
    }

    // Small-baseline arc: evenly spaced camera centers aimed at the backdrop
    // center.
    const Vec3 target(0, 0, far_depth);
    for (int v = 0; v < params.views_per_scene; ++v) {
      const double offset =
          (v - (params.views_per_scene - 1) / 2.0) * params.baseline;
      const Vec3 eye(offset, rng.uniform(-0.02, 0.02) * params.baseline, 0.0);
      rig.cameras.push_back(look_at(eye, target, params.image_width,
                                    params.image_height, params.focal_px));
    }
    ds.scenes.push_back(std::move(rig));
  }

  const int val_count =
      std::max(1, static_cast<int>(std::floor(params.scene_count * 0.2)));
  for (int s = 0; s < params.scene_count; ++s) {
    if (s >= params.scene_count - val_count)
      ds.val_ids.push_back(s);
    else
      ds.train_ids.push_back(s);
  }
  if (ds.train_ids.empty()) {
    // Degenerate single-scene dataset: train and validate on the same scene.
    ds.train_ids = ds.val_ids;
  }
  return ds;
}

RenderedView render_view(const Dataset& ds, int scene_id, int view_index) {
  const SceneRig& rig = ds.scenes[static_cast<std::size_t>(scene_id)];
  return render(rig.scene,
                rig.cameras[static_cast<std::size_t>(view_index)],
                ds.params.noise_sigma,
                view_noise_seed(ds.params, scene_id, view_index));
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

std::string fmt(const Vec3& v) {
  return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z());
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& directory,
                  bool write_renders) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  fs::create_directories(fs::path(directory) / "cams");
  if (write_renders) {
    fs::create_directories(fs::path(directory) / "images");
    fs::create_directories(fs::path(directory) / "depths");
  }

  std::ostringstream m;
  m << "sweepnet-dataset 1\n";
  m << "seed " << ds.params.seed << "\n";
  m << "image " << ds.params.image_width << " " << ds.params.image_height
    << "\n";
  m << "range " << fmt(ds.params.d_min) << " " << fmt(ds.params.d_max) << "\n";
  m << "noise " << fmt(ds.params.noise_sigma) << "\n";
  m << "focal " << fmt(ds.params.focal_px) << "\n";
  m << "baseline " << fmt(ds.params.baseline) << "\n";
  m << "scenes " << ds.scenes.size() << "\n";
  char name[128];
  for (const SceneRig& rig : ds.scenes) {
    m << "scene " << rig.id << " cameras " << rig.cameras.size() << " planes "
      << rig.scene.patches.size() << "\n";
    for (std::size_t v = 0; v < rig.cameras.size(); ++v) {
      std::snprintf(name, sizeof(name), "cams/scene%03d_view%02d.txt", rig.id,
                    static_cast<int>(v));
      m << "cam " << name << "\n";
      io::write_camera<double>((fs::path(directory) / name).string(),
                               rig.cameras[v], ds.params.d_min, ds.params.d_max,
                               0.0, 0);
    }
    for (const PlanePatch& p : rig.scene.patches) {
      m << "plane " << fmt(p.center) << " " << fmt(p.axis_s) << " "
        << fmt(p.axis_t) << " " << fmt(p.half_s) << " " << fmt(p.half_t) << " "
        << p.texture.seed << " " << fmt(p.texture.min_wavelength) << " "
        << fmt(p.texture.max_wavelength) << " " << fmt(p.texture.contrast)
        << " " << p.texture.wave_count << " " << fmt(p.tint) << "\n";
    }
  }
  const std::string text = m.str();
  io::write_file_bytes(
      (fs::path(directory) / "manifest.txt").string(),
      std::vector<std::uint8_t>(text.begin(), text.end()));

  if (write_renders) {
    for (const SceneRig& rig : ds.scenes) {
      for (std::size_t v = 0; v < rig.cameras.size(); ++v) {
        const RenderedView rv =
            render_view(ds, rig.id, static_cast<int>(v));
        std::snprintf(name, sizeof(name), "images/scene%03d_view%02d.ppm",
                      rig.id, static_cast<int>(v));
        io::write_ppm((fs::path(directory) / name).string(), rv.image);
        std::snprintf(name, sizeof(name), "depths/scene%03d_view%02d.pfm",
                      rig.id, static_cast<int>(v));
        io::write_pfm((fs::path(directory) / name).string(), rv.gt_depth);
      }
    }
  }
}

namespace {

class ManifestReader {
 public:
  explicit ManifestReader(const std::string& path) : in_(path) {
    if (!in_) throw io::IoError("cannot open manifest '" + path + "'");
  }

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw io::IoError("manifest ended unexpectedly");
    return w;
  }

  void expect(const std::string& key) {
    const std::string w = word();
    if (w != key)
      throw io::IoError("manifest: expected '" + key + "', found '" + w + "'");
  }

  double number() {
    const std::string w = word();
    double v = 0;
    const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || p != w.data() + w.size())
      throw io::IoError("manifest: malformed number '" + w + "'");
    return v;
  }

  std::uint64_t unsigned_number() {
    const std::string w = word();
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || p != w.data() + w.size())
      throw io::IoError("manifest: malformed unsigned '" + w + "'");
    return v;
  }

  Vec3 vec3() {
    const double x = number(), y = number(), z = number();
    return Vec3(x, y, z);
  }

 private:
  std::ifstream in_;
};

}  // namespace

Dataset load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  ManifestReader r(manifest_path);
  r.expect("sweepnet-dataset");
  const auto version = r.unsigned_number();
  if (version != 1)
    throw io::IoError("unsupported dataset manifest version " +
                      std::to_string(version));
  Dataset ds;
  r.expect("seed");
  ds.params.seed = r.unsigned_number();
  r.expect("image");
  ds.params.image_width = static_cast<int>(r.number());
  ds.params.image_height = static_cast<int>(r.number());
  r.expect("range");
  ds.params.d_min = r.number();
  ds.params.d_max = r.number();
  r.expect("noise");
  ds.params.noise_sigma = r.number();
  r.expect("focal");
  ds.params.focal_px = r.number();
  r.expect("baseline");
  ds.params.baseline = r.number();
  r.expect("scenes");
  const int scene_count = static_cast<int>(r.number());
  ds.params.scene_count = scene_count;
  const fs::path base = fs::path(manifest_path).parent_path();
  for (int s = 0; s < scene_count; ++s) {
    r.expect("scene");
    SceneRig rig;
    rig.id = static_cast<int>(r.number());
    r.expect("cameras");
    const int cams = static_cast<int>(r.number());
    r.expect("planes");
    const int planes = static_cast<int>(r.number());
    for (int v = 0; v < cams; ++v) {
      r.expect("cam");
      const std::string rel = r.word();
      const auto cwr = io::read_camera<double>((base / rel).string(),
                                               ds.params.image_width,
                                               ds.params.image_height);
      rig.cameras.push_back(cwr.camera);
    }
    for (int p = 0; p < planes; ++p) {
      r.expect("plane");
      PlanePatch patch;
      patch.center = r.vec3();
      patch.axis_s = r.vec3();
      patch.axis_t = r.vec3();
      patch.half_s = r.number();
      patch.half_t = r.number();
      patch.texture.seed = r.unsigned_number();
      patch.texture.min_wavelength = r.number();
      patch.texture.max_wavelength = r.number();
      patch.texture.contrast = r.number();
      patch.texture.wave_count = static_cast<int>(r.number());
      patch.tint = r.vec3();
      rig.scene.patches.push_back(patch);
    }
    ds.scenes.push_back(std::move(rig));
  }
  ds.params.views_per_scene =
      ds.scenes.empty() ? 0 : static_cast<int>(ds.scenes[0].cameras.size());
  const int val_count =
      std::max(1, static_cast<int>(std::floor(scene_count * 0.2)));
  for (int s = 0; s < scene_count; ++s) {
    if (s >= scene_count - val_count)
      ds.val_ids.push_back(s);
    else
      ds.train_ids.push_back(s);
  }
  if (ds.train_ids.empty()) ds.train_ids = ds.val_ids;
  return ds;
}

}  // namespace sweepnet::synth
