#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "support.hpp"
#include "sweepnet/io.hpp"

using namespace sweepnet;
using namespace sweepnet::io;

namespace {

std::vector<std::uint8_t> bytes_of(const char* s) {
  return std::vector<std::uint8_t>(s, s + std::strlen(s));
}

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() / "sweepnet_io_test";
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("pfm round trips bitwise and keeps invalid markers") {
  DepthMap<double> m(3, 2);
  m.at(0, 0) = 1.25;
  m.at(0, 1) = 1e-3;
  m.at(0, 2) = 425.0;
  m.at(1, 0) = -1.0;  // invalid
  m.at(1, 1) = 7.5;
  m.at(1, 2) = 0.125;

  const auto enc = encode_pfm(to_pfm(m));
  const auto dec = decode_pfm(enc);
  CHECK(dec.width == 3);
  CHECK(dec.height == 2);
  CHECK(encode_pfm(dec) == enc);  // byte-level identity

  const auto back = depth_from_pfm<double>(dec);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x)
      CHECK(back.at(y, x) == doctest::Approx(m.at(y, x)).epsilon(1e-7));
  CHECK(back.at(1, 0) == -1.0);
  CHECK_FALSE(back.valid_at(1, 0));
}

TEST_CASE("pfm accepts big-endian input and converts") {
  // Hand-crafted fixture: 1x1 Pf with positive scale (big endian), sample
  // value 2.0f = 0x40000000.
  std::vector<std::uint8_t> bytes = bytes_of("Pf\n1 1\n1.0\n");
  bytes.insert(bytes.end(), {0x40, 0x00, 0x00, 0x00});
  const auto img = decode_pfm(bytes);
  CHECK(img.samples[0] == 2.0f);
  // Writer always emits scale -1 (little endian).
  const auto rewritten = encode_pfm(img);
  const std::string head(rewritten.begin(), rewritten.begin() + 11);
  CHECK(head == "Pf\n1 1\n-1.0");
}

TEST_CASE("pfm header errors carry byte offsets") {
  CHECK_THROWS_AS(decode_pfm(bytes_of("PF\n1 1\n-1.0\nxxxx")), IoError);
  try {
    decode_pfm(bytes_of("Pf\n0 1\n-1.0\n"));
    FAIL("expected error");
  } catch (const IoError& e) {
    CHECK(e.byte_offset() >= 3);
  }
  CHECK_THROWS_AS(decode_pfm(bytes_of("Pf\n2 2\n-1.0\nshort")), IoError);
  CHECK_THROWS_AS(decode_pfm(bytes_of("Pf\n1 100000000\n-1.0\n")), IoError);
}

TEST_CASE("ppm round trips") {
  Rng rng(61);
  Tensor<double> image({4, 6, 3});
  for (std::int64_t i = 0; i < image.size(); ++i)
    image[i] = rng.index(256) / 255.0;  // exactly representable levels

  const auto enc = encode_ppm(to_ppm(image));
  const auto dec = decode_ppm(enc);
  CHECK(encode_ppm(dec) == enc);
  const auto back = image_from_ppm<double>(dec);
  for (std::int64_t i = 0; i < image.size(); ++i) CHECK(back[i] == image[i]);

  CHECK_THROWS_AS(decode_ppm(bytes_of("P5\n1 1\n255\nx")), IoError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n2 2\n255\nxx")), IoError);
}

TEST_CASE("camera text round trips value-exactly") {
  // Fixture authored independently: a rotation about z by 30 degrees with
  // center (0.1, -2.5, 3), focal 321.5, skew 0.25.
  const char* fixture =
      "extrinsic\n"
      "0.86602540378443871 0.5 0 0.71650635094610965\n"
      "-0.5 0.86602540378443871 0 2.2150635094610966\n"
      "0 0 1 -3\n"
      "0 0 0 1\n"
      "\n"
      "intrinsic\n"
      "321.5 0.25 31.5\n"
      "0 321.5 23.5\n"
      "0 0 1\n"
      "\n"
      "425 2.5 192 905\n";
  const auto cam_file = decode_camera(bytes_of(fixture));
  CHECK(cam_file.intrinsic[0][0] == 321.5);
  CHECK(cam_file.intrinsic[0][1] == 0.25);
  CHECK(cam_file.extrinsic[0][0] == 0.86602540378443871);
  CHECK(cam_file.d_min == 425.0);
  CHECK(cam_file.d_max == 905.0);

  const auto parsed = camera_from_file<double>(cam_file, 64, 48);
  parsed.camera.validate();
  // Camera center = -R^T t.
  const Eigen::Vector3d c = parsed.camera.center();
  CHECK(c.x() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(c.y() == doctest::Approx(-2.5).epsilon(1e-12));
  CHECK(c.z() == doctest::Approx(3.0).epsilon(1e-12));

  // Round trip through the writer is value-exact.
  const auto rewritten = encode_camera(cam_file);
  const auto reparsed = decode_camera(rewritten);
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col)
      CHECK(reparsed.extrinsic[r][col] == cam_file.extrinsic[r][col]);
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col)
      CHECK(reparsed.intrinsic[r][col] == cam_file.intrinsic[r][col]);
  CHECK(encode_camera(reparsed) == rewritten);

  CHECK_THROWS_AS(decode_camera(bytes_of("intrinsic\n1 2 3\n")), IoError);
}

TEST_CASE("ply round trips, empty cloud is header-only") {
  FusedCloud<double> cloud;
  for (int i = 0; i < 5; ++i) {
    FusedPoint<double> p;
    p.position = Eigen::Vector3d(i * 0.5, -i, i * i * 0.25);
    p.color = {static_cast<std::uint8_t>(10 * i),
               static_cast<std::uint8_t>(200 - i),
               static_cast<std::uint8_t>(i)};
    cloud.points.push_back(p);
  }
  const auto enc = encode_ply(to_ply(cloud));
  const auto dec = decode_ply(enc);
  REQUIRE(dec.size() == 5);
  CHECK(encode_ply(dec) == enc);
  CHECK(dec[3].x == 1.5f);
  CHECK(dec[3].r == 30);

  const auto empty = encode_ply({});
  const std::string txt(empty.begin(), empty.end());
  CHECK(txt.find("element vertex 0") != std::string::npos);
  CHECK(decode_ply(empty).empty());
}

TEST_CASE("weights file round trips bitwise") {
  Rng rng(67);
  std::vector<NamedTensorF32> tensors;
  Tensor<double> a = testsupport::random_tensor({3, 3, 2, 4}, rng);
  Tensor<double> b = testsupport::random_tensor({16}, rng);
  tensors.push_back(to_named_f32("layer0.kernel", a));
  tensors.push_back(to_named_f32("layer0.bias", b));

  const auto enc = encode_weights(tensors);
  const auto dec = decode_weights(enc);
  REQUIRE(dec.size() == 2);
  CHECK(encode_weights(dec) == enc);
  CHECK(dec[0].name == "layer0.kernel");
  CHECK(dec[0].dims == std::vector<std::uint32_t>{3, 3, 2, 4});
  for (std::size_t i = 0; i < dec[0].values.size(); ++i)
    CHECK(dec[0].values[i] == static_cast<float>(a[static_cast<int>(i)]));

  // Zero tensors is a valid file.
  const auto none = encode_weights({});
  CHECK(decode_weights(none).empty());

  CHECK_THROWS_AS(decode_weights(bytes_of("SWNX")), IoError);
  auto truncated = enc;
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(decode_weights(truncated), IoError);
}

TEST_CASE("file io writes and reads back") {
  const auto dir = temp_dir();
  const auto path = (dir / "roundtrip.pfm").string();
  DepthMap<double> m(2, 2);
  m.at(0, 0) = 3.5;
  m.at(1, 1) = 0.5;
  write_pfm(path, m);
  const auto back = read_depth_pfm<double>(path);
  CHECK(back.at(0, 0) == 3.5);
  CHECK_FALSE(back.valid_at(0, 1));
  CHECK_THROWS_AS(read_file_bytes((dir / "missing.bin").string()), IoError);
}

TEST_CASE("fuzzed inputs produce structured errors only") {
  Rng rng(71);
  const auto valid_pfm = encode_pfm([] {
    PfmImage img;
    img.width = 2;
    img.height = 2;
    img.samples = {1.0f, 2.0f, 3.0f, 4.0f};
    return img;
  }());
  const auto valid_weights = encode_weights(
      {to_named_f32("t", Tensor<double>({2, 2}, {1.0, 2.0, 3.0, 4.0}))});

  int decoded_ok = 0;
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::uint8_t> bytes;
    const int mode = static_cast<int>(rng.index(3));
    if (mode == 0) {
      const int n = static_cast<int>(rng.index(64));
      for (int k = 0; k < n; ++k)
        bytes.push_back(static_cast<std::uint8_t>(rng.index(256)));
    } else {
      bytes = (mode == 1) ? valid_pfm : valid_weights;
      const int flips = 1 + static_cast<int>(rng.index(4));
      for (int k = 0; k < flips && !bytes.empty(); ++k)
        bytes[rng.index(bytes.size())] =
            static_cast<std::uint8_t>(rng.index(256));
    }
    for (int target = 0; target < 5; ++target) {
      try {
        switch (target) {
          case 0: decode_pfm(bytes); break;
          case 1: decode_ppm(bytes); break;
          case 2: decode_camera(bytes); break;
          case 3: decode_ply(bytes); break;
          case 4: decode_weights(bytes); break;
        }
        ++decoded_ok;  // mutated payload bytes may still parse
      } catch (const IoError&) {
        // structured failure is the expected outcome
      }
    }
  }
  // Most fuzz cases must fail; a few payload-only mutations may survive.
  CHECK(decoded_ok < 10000);
}
