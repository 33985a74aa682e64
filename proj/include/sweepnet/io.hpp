#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sweepnet/depth_map.hpp"
#include "sweepnet/geometry.hpp"
#include "sweepnet/tensor.hpp"

namespace sweepnet::io {

/// Structured I/O failure; byte_offset points at the offending input byte
/// where that is meaningful (header parsing), -1 otherwise.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::int64_t byte_offset = -1)
      : std::runtime_error(byte_offset >= 0
                               ? what + " (byte " + std::to_string(byte_offset) +
                                     ")"
                               : what),
        byte_offset_(byte_offset) {}
  std::int64_t byte_offset() const { return byte_offset_; }

 private:
  std::int64_t byte_offset_;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& bytes);

// ---- PFM (grayscale `Pf`, float32, bottom-up rows, scale -1 = little
// endian; invalid pixels stored as -1) -------------------------------------

struct PfmImage {
  int width = 0;
  int height = 0;
  std::vector<float> samples;  // row-major, top-down in memory
};

std::vector<std::uint8_t> encode_pfm(const PfmImage& img);
PfmImage decode_pfm(const std::vector<std::uint8_t>& bytes);

// ---- PPM (binary P6, 8-bit) ----------------------------------------------

struct PpmImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

std::vector<std::uint8_t> encode_ppm(const PpmImage& img);
PpmImage decode_ppm(const std::vector<std::uint8_t>& bytes);

// ---- Camera text ----------------------------------------------------------

struct CameraFile {
  double extrinsic[4][4] = {};  // [R|t; 0 0 0 1]
  double intrinsic[3][3] = {};
  double d_min = 0;
  double d_interval_hint = 0;
  double d_count_hint = 0;
  double d_max = 0;
};

std::vector<std::uint8_t> encode_camera(const CameraFile& cam);
CameraFile decode_camera(const std::vector<std::uint8_t>& bytes);

// ---- PLY (binary little endian, xyz float32 + rgb uchar) ------------------

struct PlyPoint {
  float x = 0, y = 0, z = 0;
  std::uint8_t r = 0, g = 0, b = 0;
};

std::vector<std::uint8_t> encode_ply(const std::vector<PlyPoint>& points);
std::vector<PlyPoint> decode_ply(const std::vector<std::uint8_t>& bytes);

// ---- Weights (`SWNW`, versioned, named float32 tensors) -------------------

struct NamedTensorF32 {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;  // row-major
};

std::vector<std::uint8_t> encode_weights(
    const std::vector<NamedTensorF32>& tensors);
std::vector<NamedTensorF32> decode_weights(
    const std::vector<std::uint8_t>& bytes);

// ---- Typed adapters --------------------------------------------------------

template <typename Scalar>
PfmImage to_pfm(const DepthMap<Scalar>& m) {
  PfmImage img;
  img.width = m.width;
  img.height = m.height;
  img.samples.resize(m.depth.size());
  for (std::size_t i = 0; i < m.depth.size(); ++i)
    img.samples[i] = m.depth[i] > Scalar(0) ? static_cast<float>(m.depth[i])
                                            : -1.0f;
  return img;
}

template <typename Scalar>
PfmImage to_pfm(const ProbabilityMap<Scalar>& m) {
  PfmImage img;
  img.width = m.width;
  img.height = m.height;
  img.samples.resize(m.value.size());
  for (std::size_t i = 0; i < m.value.size(); ++i)
    img.samples[i] = static_cast<float>(m.value[i]);
  return img;
}

template <typename Scalar>
DepthMap<Scalar> depth_from_pfm(const PfmImage& img) {
  DepthMap<Scalar> m(img.width, img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    m.depth[i] = img.samples[i] > 0.0f ? static_cast<Scalar>(img.samples[i])
                                       : Scalar(-1);
  return m;
}

template <typename Scalar>
ProbabilityMap<Scalar> probability_from_pfm(const PfmImage& img) {
  ProbabilityMap<Scalar> m(img.width, img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    m.value[i] = static_cast<Scalar>(img.samples[i]);
  return m;
}

template <typename Scalar>
void write_pfm(const std::string& path, const DepthMap<Scalar>& m) {
  write_file_bytes(path, encode_pfm(to_pfm(m)));
}

template <typename Scalar>
void write_pfm(const std::string& path, const ProbabilityMap<Scalar>& m) {
  write_file_bytes(path, encode_pfm(to_pfm(m)));
}

template <typename Scalar>
DepthMap<Scalar> read_depth_pfm(const std::string& path) {
  return depth_from_pfm<Scalar>(decode_pfm(read_file_bytes(path)));
}

template <typename Scalar>
ProbabilityMap<Scalar> read_probability_pfm(const std::string& path) {
  return probability_from_pfm<Scalar>(decode_pfm(read_file_bytes(path)));
}

/// Images are (h, w, 3) tensors in [0, 1]; PPM quantizes to 8 bits.
template <typename Scalar>
PpmImage to_ppm(const Tensor<Scalar>& image) {
  if (image.rank() != 3 || image.dim(2) != 3)
    throw IoError("ppm image must have shape (h, w, 3)");
  PpmImage img;
  img.height = image.dim(0);
  img.width = image.dim(1);
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (std::int64_t i = 0; i < image.size(); ++i) {
    double v = static_cast<double>(image[i]);
    v = v < 0 ? 0 : (v > 1 ? 1 : v);
    img.rgb[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return img;
}

template <typename Scalar>
Tensor<Scalar> image_from_ppm(const PpmImage& img) {
  Tensor<Scalar> t({img.height, img.width, 3});
  for (std::size_t i = 0; i < img.rgb.size(); ++i)
    t[static_cast<std::int64_t>(i)] =
        static_cast<Scalar>(img.rgb[i]) / Scalar(255);
  return t;
}

template <typename Scalar>
void write_ppm(const std::string& path, const Tensor<Scalar>& image) {
  write_file_bytes(path, encode_ppm(to_ppm(image)));
}

template <typename Scalar>
Tensor<Scalar> read_ppm(const std::string& path) {
  return image_from_ppm<Scalar>(decode_ppm(read_file_bytes(path)));
}

template <typename Scalar>
struct CameraWithRange {
  Camera<Scalar> camera;
  Scalar d_min = 0;
  Scalar d_max = 0;
  Scalar d_interval_hint = 0;
  int d_count_hint = 0;
};

template <typename Scalar>
CameraWithRange<Scalar> camera_from_file(const CameraFile& f, int image_width,
                                         int image_height) {
  CameraWithRange<Scalar> out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out.camera.R(r, c) = static_cast<Scalar>(f.extrinsic[r][c]);
      out.camera.K(r, c) = static_cast<Scalar>(f.intrinsic[r][c]);
    }
    out.camera.t(r) = static_cast<Scalar>(f.extrinsic[r][3]);
  }
  out.camera.image_width = image_width;
  out.camera.image_height = image_height;
  out.d_min = static_cast<Scalar>(f.d_min);
  out.d_max = static_cast<Scalar>(f.d_max);
  out.d_interval_hint = static_cast<Scalar>(f.d_interval_hint);
  out.d_count_hint = static_cast<int>(f.d_count_hint);
  return out;
}

template <typename Scalar>
CameraFile camera_to_file(const Camera<Scalar>& cam, Scalar d_min, Scalar d_max,
                          Scalar d_interval_hint = 0, int d_count_hint = 0) {
  CameraFile f;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      f.extrinsic[r][c] = static_cast<double>(cam.R(r, c));
      f.intrinsic[r][c] = static_cast<double>(cam.K(r, c));
    }
    f.extrinsic[r][3] = static_cast<double>(cam.t(r));
  }
  f.extrinsic[3][3] = 1.0;
  f.d_min = static_cast<double>(d_min);
  f.d_interval_hint = static_cast<double>(d_interval_hint);
  f.d_count_hint = d_count_hint;
  f.d_max = static_cast<double>(d_max);
  return f;
}

template <typename Scalar>
CameraWithRange<Scalar> read_camera(const std::string& path, int image_width,
                                    int image_height) {
  return camera_from_file<Scalar>(decode_camera(read_file_bytes(path)),
                                  image_width, image_height);
}

template <typename Scalar>
void write_camera(const std::string& path, const Camera<Scalar>& cam,
                  Scalar d_min, Scalar d_max, Scalar d_interval_hint = 0,
                  int d_count_hint = 0) {
  write_file_bytes(path, encode_camera(camera_to_file(cam, d_min, d_max,
                                                      d_interval_hint,
                                                      d_count_hint)));
}

template <typename Scalar>
std::vector<PlyPoint> to_ply(const FusedCloud<Scalar>& cloud) {
  std::vector<PlyPoint> pts;
  pts.reserve(cloud.points.size());
  for (const auto& p : cloud.points) {
    PlyPoint q;
    q.x = static_cast<float>(p.position.x());
    q.y = static_cast<float>(p.position.y());
    q.z = static_cast<float>(p.position.z());
    q.r = p.color[0];
    q.g = p.color[1];
    q.b = p.color[2];
    pts.push_back(q);
  }
  return pts;
}

template <typename Scalar>
void write_ply(const std::string& path, const FusedCloud<Scalar>& cloud) {
  write_file_bytes(path, encode_ply(to_ply(cloud)));
}

template <typename Scalar>
NamedTensorF32 to_named_f32(const std::string& name, const Tensor<Scalar>& t) {
  NamedTensorF32 out;
  out.name = name;
  for (int d : t.shape()) out.dims.push_back(static_cast<std::uint32_t>(d));
  out.values.resize(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i)
    out.values[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
  return out;
}

template <typename Scalar>
Tensor<Scalar> tensor_from_f32(const NamedTensorF32& n) {
  std::vector<int> shape;
  for (std::uint32_t d : n.dims) shape.push_back(static_cast<int>(d));
  Tensor<Scalar> t(shape);
  for (std::size_t i = 0; i < n.values.size(); ++i)
    t[static_cast<std::int64_t>(i)] = static_cast<Scalar>(n.values[i]);
  return t;
}

}  // namespace sweepnet::io
