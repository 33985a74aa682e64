#include "sweepnet/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>

namespace sweepnet::io {

namespace {

constexpr std::int64_t kMaxPixels = std::int64_t(1) << 26;
constexpr std::int64_t kMaxElements = std::int64_t(1) << 28;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::int64_t offset() const { return pos_; }
  std::int64_t remaining() const {
    return static_cast<std::int64_t>(bytes_.size()) - pos_;
  }

  std::uint8_t byte() {
    if (remaining() < 1) throw IoError("unexpected end of input", pos_);
    return bytes_[static_cast<std::size_t>(pos_++)];
  }

  std::uint32_t u32() {
    if (remaining() < 4) throw IoError("truncated 32-bit field", pos_);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(bytes_[static_cast<std::size_t>(pos_ + i)])
           << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32_le() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  float f32_be() {
    if (remaining() < 4) throw IoError("truncated 32-bit field", pos_);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v = (v << 8) |
          static_cast<std::uint32_t>(bytes_[static_cast<std::size_t>(pos_ + i)]);
    pos_ += 4;
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }

  const std::uint8_t* raw(std::int64_t n) {
    if (remaining() < n) throw IoError("truncated payload", pos_);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  /// Skips ASCII whitespace and `#` comments, then reads one token.
  std::string token() {
    skip_space_and_comments();
    if (remaining() <= 0) throw IoError("missing token", pos_);
    std::string t;
    while (remaining() > 0) {
      const char c = static_cast<char>(bytes_[static_cast<std::size_t>(pos_)]);
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
          c == '\v')
        break;
      t.push_back(c);
      ++pos_;
      if (t.size() > 256) throw IoError("oversized token", pos_);
    }
    return t;
  }

  void skip_space_and_comments() {
    while (remaining() > 0) {
      const char c = static_cast<char>(bytes_[static_cast<std::size_t>(pos_)]);
      if (c == '#') {
        while (remaining() > 0 &&
               bytes_[static_cast<std::size_t>(pos_)] != '\n')
          ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
                 c == '\f' || c == '\v') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  /// Consumes exactly one whitespace byte (the header/payload separator in
  /// PFM and PPM).
  void separator() {
    const std::int64_t at = pos_;
    const std::uint8_t c = byte();
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r')
      throw IoError("expected whitespace before payload", at);
  }

  int parse_int(const std::string& tok, std::int64_t at) {
    int v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
      throw IoError("malformed integer '" + tok + "'", at);
    return v;
  }

  double parse_double(const std::string& tok, std::int64_t at) {
    double v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
      throw IoError("malformed decimal '" + tok + "'", at);
    return v;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::int64_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

void append_text(std::vector<std::uint8_t>& out, const std::string& s) {
  out.insert(out.end(), s.begin(), s.end());
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failure on '" + path + "'");
  return bytes;
}

void write_file_bytes(const std::string& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failure on '" + path + "'");
}

std::vector<std::uint8_t> encode_pfm(const PfmImage& img) {
  if (img.width <= 0 || img.height <= 0)
    throw IoError("pfm dimensions must be positive");
  if (img.samples.size() !=
      static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height))
    throw IoError("pfm sample count does not match dimensions");
  std::vector<std::uint8_t> out;
  append_text(out, "Pf\n" + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n-1.0\n");
  // PFM payload is bottom-up.
  for (int y = img.height - 1; y >= 0; --y)
    for (int x = 0; x < img.width; ++x)
      put_f32(out, img.samples[static_cast<std::size_t>(y) * img.width + x]);
  return out;
}

PfmImage decode_pfm(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::int64_t magic_at = r.offset();
  const std::string magic = r.token();
  if (magic != "Pf") {
    if (magic == "PF")
      throw IoError("color PFM is not supported, expected grayscale 'Pf'",
                    magic_at);
    throw IoError("unknown magic '" + magic + "', expected 'Pf'", magic_at);
  }
  std::int64_t at = r.offset();
  const int width = r.parse_int(r.token(), at);
  at = r.offset();
  const int height = r.parse_int(r.token(), at);
  if (width <= 0 || height <= 0)
    throw IoError("non-positive pfm dimensions", at);
  if (static_cast<std::int64_t>(width) * height > kMaxPixels)
    throw IoError("pfm dimension overflow", at);
  at = r.offset();
  const double scale = r.parse_double(r.token(), at);
  if (scale == 0.0) throw IoError("pfm scale must be nonzero", at);
  r.separator();
  const bool big_endian = scale > 0.0;
  PfmImage img;
  img.width = width;
  img.height = height;
  img.samples.resize(static_cast<std::size_t>(width) * height);
  for (int y = height - 1; y >= 0; --y)
    for (int x = 0; x < width; ++x)
      img.samples[static_cast<std::size_t>(y) * width + x] =
          big_endian ? r.f32_be() : r.f32_le();
  if (r.remaining() != 0)
    throw IoError("trailing bytes after pfm payload", r.offset());
  return img;
}

std::vector<std::uint8_t> encode_ppm(const PpmImage& img) {
  if (img.width <= 0 || img.height <= 0)
    throw IoError("ppm dimensions must be positive");
  if (img.rgb.size() != static_cast<std::size_t>(img.width) *
                            static_cast<std::size_t>(img.height) * 3)
    throw IoError("ppm byte count does not match dimensions");
  std::vector<std::uint8_t> out;
  append_text(out, "P6\n" + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n");
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

PpmImage decode_ppm(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::int64_t magic_at = r.offset();
  if (r.token() != "P6")
    throw IoError("unknown magic, expected binary 'P6'", magic_at);
  std::int64_t at = r.offset();
  const int width = r.parse_int(r.token(), at);
  at = r.offset();
  const int height = r.parse_int(r.token(), at);
  at = r.offset();
  const int maxval = r.parse_int(r.token(), at);
  if (width <= 0 || height <= 0)
    throw IoError("non-positive ppm dimensions", at);
  if (static_cast<std::int64_t>(width) * height > kMaxPixels)
    throw IoError("ppm dimension overflow", at);
  if (maxval != 255)
    throw IoError("unsupported ppm maxval " + std::to_string(maxval), at);
  r.separator();
  PpmImage img;
  img.width = width;
  img.height = height;
  const std::int64_t n = static_cast<std::int64_t>(width) * height * 3;
  const std::uint8_t* p = r.raw(n);
  img.rgb.assign(p, p + n);
  if (r.remaining() != 0)
    throw IoError("trailing bytes after ppm payload", r.offset());
  return img;
}

std::vector<std::uint8_t> encode_camera(const CameraFile& cam) {
  std::vector<std::uint8_t> out;
  append_text(out, "extrinsic\n");
  for (int r = 0; r < 4; ++r) {
    std::string line;
    for (int c = 0; c < 4; ++c) {
      if (c) line += " ";
      line += format_double(cam.extrinsic[r][c]);
    }
    append_text(out, line + "\n");
  }
  append_text(out, "\nintrinsic\n");
  for (int r = 0; r < 3; ++r) {
    std::string line;
    for (int c = 0; c < 3; ++c) {
      if (c) line += " ";
      line += format_double(cam.intrinsic[r][c]);
    }
    append_text(out, line + "\n");
  }
  append_text(out, "\n" + format_double(cam.d_min) + " " +
                       format_double(cam.d_interval_hint) + " " +
                       format_double(cam.d_count_hint) + " " +
                       format_double(cam.d_max) + "\n");
  return out;
}

CameraFile decode_camera(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  std::int64_t at = r.offset();
  if (r.token() != "extrinsic")
    throw IoError("camera file must start with 'extrinsic'", at);
  CameraFile cam;
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 4; ++col) {
      at = r.offset();
      cam.extrinsic[row][col] = r.parse_double(r.token(), at);
    }
  at = r.offset();
  if (r.token() != "intrinsic")
    throw IoError("expected 'intrinsic' block", at);
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col) {
      at = r.offset();
      cam.intrinsic[row][col] = r.parse_double(r.token(), at);
    }
  at = r.offset();
  cam.d_min = r.parse_double(r.token(), at);
  at = r.offset();
  cam.d_interval_hint = r.parse_double(r.token(), at);
  at = r.offset();
  cam.d_count_hint = r.parse_double(r.token(), at);
  at = r.offset();
  cam.d_max = r.parse_double(r.token(), at);
  r.skip_space_and_comments();
  if (r.remaining() != 0)
    throw IoError("trailing content after camera range line", r.offset());
  return cam;
}

std::vector<std::uint8_t> encode_ply(const std::vector<PlyPoint>& points) {
  std::vector<std::uint8_t> out;
  append_text(out,
              "ply\nformat binary_little_endian 1.0\nelement vertex " +
                  std::to_string(points.size()) +
                  "\nproperty float x\nproperty float y\nproperty float z\n"
                  "property uchar red\nproperty uchar green\nproperty uchar "
                  "blue\nend_header\n");
  for (const auto& p : points) {
    put_f32(out, p.x);
    put_f32(out, p.y);
    put_f32(out, p.z);
    out.push_back(p.r);
    out.push_back(p.g);
    out.push_back(p.b);
  }
  return out;
}

std::vector<PlyPoint> decode_ply(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  std::int64_t at = r.offset();
  if (r.token() != "ply") throw IoError("missing 'ply' magic", at);
  std::int64_t count = -1;
  std::vector<std::string> properties;
  bool header_done = false;
  while (!header_done) {
    at = r.offset();
    const std::string tok = r.token();
    if (tok == "format") {
      const std::string kind = r.token();
      const std::string version = r.token();
      if (kind != "binary_little_endian" || version != "1.0")
        throw IoError("unsupported ply format '" + kind + " " + version + "'",
                      at);
    } else if (tok == "element") {
      const std::string name = r.token();
      if (name != "vertex")
        throw IoError("unsupported ply element '" + name + "'", at);
      count = r.parse_int(r.token(), at);
      if (count < 0 || count > kMaxElements)
        throw IoError("vertex count overflow", at);
    } else if (tok == "property") {
      const std::string type = r.token();
      const std::string name = r.token();
      properties.push_back(type + " " + name);
    } else if (tok == "comment") {
      r.skip_space_and_comments();
    } else if (tok == "end_header") {
      header_done = true;
    } else {
      throw IoError("unexpected ply header token '" + tok + "'", at);
    }
  }
  const std::vector<std::string> expected = {
      "float x",   "float y",     "float z",
      "uchar red", "uchar green", "uchar blue"};
  if (count < 0) throw IoError("ply header missing vertex element");
  if (properties != expected)
    throw IoError("ply vertex properties differ from x,y,z,red,green,blue");
  r.separator();
  std::vector<PlyPoint> points;
  points.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    PlyPoint p;
    p.x = r.f32_le();
    p.y = r.f32_le();
    p.z = r.f32_le();
    p.r = r.byte();
    p.g = r.byte();
    p.b = r.byte();
    points.push_back(p);
  }
  if (r.remaining() != 0)
    throw IoError("trailing bytes after ply payload", r.offset());
  return points;
}

std::vector<std::uint8_t> encode_weights(
    const std::vector<NamedTensorF32>& tensors) {
  std::vector<std::uint8_t> out;
  append_text(out, "SWNW");
  put_u32(out, 1);  // format version
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    std::uint64_t n = 1;
    for (std::uint32_t d : t.dims) n *= d;
    if (t.values.size() != n)
      throw IoError("tensor '" + t.name + "' payload does not match dims");
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    append_text(out, t.name);
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) put_u32(out, d);
    for (float v : t.values) put_f32(out, v);
  }
  return out;
}

std::vector<NamedTensorF32> decode_weights(
    const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  std::int64_t at = r.offset();
  const std::uint8_t* magic = r.raw(4);
  if (std::memcmp(magic, "SWNW", 4) != 0)
    throw IoError("unknown weights magic", at);
  at = r.offset();
  const std::uint32_t version = r.u32();
  if (version != 1)
    throw IoError("unsupported weights version " + std::to_string(version), at);
  at = r.offset();
  const std::uint32_t count = r.u32();
  if (count > (1u << 20)) throw IoError("tensor count overflow", at);
  std::vector<NamedTensorF32> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensorF32 t;
    at = r.offset();
    const std::uint32_t name_len = r.u32();
    if (name_len > 4096) throw IoError("tensor name length overflow", at);
    const std::uint8_t* name = r.raw(name_len);
    t.name.assign(reinterpret_cast<const char*>(name), name_len);
    at = r.offset();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw IoError("tensor rank overflow", at);
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      at = r.offset();
      const std::uint32_t dim = r.u32();
      t.dims.push_back(dim);
      n *= dim;
      if (n > static_cast<std::uint64_t>(kMaxElements))
        throw IoError("tensor element count overflow", at);
    }
    if (rank == 0) n = 1;
    t.values.resize(n);
    for (std::uint64_t k = 0; k < n; ++k) t.values[k] = r.f32_le();
    tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0)
    throw IoError("trailing bytes after weights payload", r.offset());
  return tensors;
}

}  // namespace sweepnet::io
