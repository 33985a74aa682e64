#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "sweepnet/tensor.hpp"

using namespace sweepnet;
using testsupport::gradient_max_rel_error;
using testsupport::random_tensor;

namespace {

/// Direct six-nested-loop cross-correlation, the independent oracle for the
/// GEMM-backed forward pass.
Tensor<double> conv2d_reference(const Tensor<double>& input,
                                const Tensor<double>& kernel,
                                const Tensor<double>& bias,
                                const ConvSpec& spec) {
  const int h = input.dim(0), w = input.dim(1);
  const int ho = spec.out_extent(h), wo = spec.out_extent(w);
  const int ph = spec.pad_before(h, spec.kernel_height);
  const int pw = spec.pad_before(w, spec.kernel_width);
  Tensor<double> out({ho, wo, spec.out_channels});
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox)
      for (int oc = 0; oc < spec.out_channels; ++oc) {
        double acc = bias[oc];
        for (int ky = 0; ky < spec.kernel_height; ++ky)
          for (int kx = 0; kx < spec.kernel_width; ++kx)
            for (int ic = 0; ic < spec.in_channels; ++ic) {
              const int iy = oy * spec.stride + ky - ph;
              const int ix = ox * spec.stride + kx - pw;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += input.at(iy, ix, ic) * kernel.at(ky, kx, ic, oc);
            }
        out.at(oy, ox, oc) = acc;
      }
  return out;
}

double sum_weighted(const Tensor<double>& weights, const Tensor<double>& vals) {
  double s = 0;
  for (std::int64_t i = 0; i < vals.size(); ++i) s += weights[i] * vals[i];
  return s;
}

}  // namespace

TEST_CASE("tensor invariants") {
  Tensor<double> t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK_THROWS_AS(Tensor<double>({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  CHECK_THROWS(Tensor<double>({1, 2}, {1.0, std::nan("")}));
}

TEST_CASE("conv2d identity kernel") {
  Rng rng(7);
  Tensor<double> input = random_tensor({3, 3, 1}, rng);
  Tensor<double> kernel({1, 1, 1, 1});
  kernel[0] = 1.0;
  Tensor<double> bias({1});
  const ConvSpec spec{1, 1, 1, 1, 1};
  const Tensor<double> out = conv2d_forward(input, kernel, bias, spec);
  REQUIRE(out.shape() == input.shape());
  for (std::int64_t i = 0; i < input.size(); ++i) CHECK(out[i] == input[i]);
}

TEST_CASE("conv2d same padding counts in-bounds taps") {
  Tensor<double> input({2, 2, 1}, {1, 1, 1, 1});
  Tensor<double> kernel({3, 3, 1, 1},
                        std::vector<double>(9, 1.0));
  Tensor<double> bias({1});
  const ConvSpec spec{3, 3, 1, 1, 1};
  const Tensor<double> out = conv2d_forward(input, kernel, bias, spec);
  // Every output of a 2x2 map under a 3x3 kernel is a corner: 4 in-bounds
  // taps each.
  for (std::int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == 4.0);
}

TEST_CASE("conv2d matches nested-loop reference") {
  Rng rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    const int stride = trial % 2 ? 2 : 1;
    Tensor<double> input = random_tensor({8, 8, 3}, rng);
    Tensor<double> kernel = random_tensor({3, 3, 3, 4}, rng);
    Tensor<double> bias = random_tensor({4}, rng);
    const ConvSpec spec{3, 3, stride, 3, 4};
    const Tensor<double> got = conv2d_forward(input, kernel, bias, spec);
    const Tensor<double> want = conv2d_reference(input, kernel, bias, spec);
    REQUIRE(got.shape() == want.shape());
    for (std::int64_t i = 0; i < got.size(); ++i)
      CHECK(std::abs(got[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("conv2d shape errors name the axis") {
  Tensor<double> input({4, 4, 2});
  Tensor<double> kernel({3, 3, 3, 4});
  Tensor<double> bias({4});
  const ConvSpec spec{3, 3, 1, 3, 4};
  CHECK_THROWS_WITH_AS(conv2d_forward(input, kernel, bias, spec),
                       doctest::Contains("channel axis"), ShapeError);
}

TEST_CASE("conv2d backward: zero upstream, bias linearity") {
  Rng rng(13);
  Tensor<double> input = random_tensor({5, 4, 2}, rng);
  Tensor<double> kernel = random_tensor({3, 3, 2, 3}, rng);
  const ConvSpec spec{3, 3, 1, 2, 3};

  Tensor<double> zeros({5, 4, 3});
  const auto gz = conv2d_backward(zeros, input, kernel, spec);
  for (std::int64_t i = 0; i < gz.input.size(); ++i) CHECK(gz.input[i] == 0.0);
  for (std::int64_t i = 0; i < gz.kernel.size(); ++i)
    CHECK(gz.kernel[i] == 0.0);
  for (std::int64_t i = 0; i < gz.bias.size(); ++i) CHECK(gz.bias[i] == 0.0);

  Tensor<double> upstream = random_tensor({5, 4, 3}, rng);
  const auto g = conv2d_backward(upstream, input, kernel, spec);
  for (int c = 0; c < 3; ++c) {
    double want = 0;
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 4; ++x) want += upstream.at(y, x, c);
    CHECK(g.bias[c] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("conv2d backward matches finite differences") {
  Rng rng(17);
  for (int trial = 0; trial < 2; ++trial) {
    const int stride = trial ? 2 : 1;
    Tensor<double> input = random_tensor({6, 6, 2}, rng);
    Tensor<double> kernel = random_tensor({3, 3, 2, 3}, rng);
    Tensor<double> bias = random_tensor({3}, rng);
    ConvSpec spec{3, 3, stride, 2, 3};
    Tensor<double> upstream =
        random_tensor({spec.out_extent(6), spec.out_extent(6), 3}, rng);

    const auto grads = conv2d_backward(upstream, input, kernel, spec);
    const auto eval = [&] {
      return sum_weighted(upstream, conv2d_forward(input, kernel, bias, spec));
    };
    CHECK(gradient_max_rel_error(input, grads.input, eval) < 1e-6);
    CHECK(gradient_max_rel_error(kernel, grads.kernel, eval) < 1e-6);
    CHECK(gradient_max_rel_error(bias, grads.bias, eval) < 1e-6);
  }
}

TEST_CASE("activations: fixed points, range, gradients") {
  Tensor<double> x({1, 3, 1}, {0.0, -1.0, 0.0});
  CHECK(activation_forward(x, Activation::Sigmoid)[0] == 0.5);
  CHECK(activation_forward(x, Activation::Tanh)[0] == 0.0);
  CHECK(activation_forward(x, Activation::Relu)[1] == 0.0);

  Rng rng(19);
  Tensor<double> wide = random_tensor({4, 4, 2}, rng, -30.0, 30.0);
  const auto sig = activation_forward(wide, Activation::Sigmoid);
  for (std::int64_t i = 0; i < sig.size(); ++i) {
    CHECK(sig[i] > 0.0);
    CHECK(sig[i] < 1.0);
  }

  for (Activation kind :
       {Activation::Sigmoid, Activation::Tanh, Activation::Relu}) {
    Tensor<double> input = random_tensor({3, 5, 2}, rng);
    // Keep relu inputs away from the kink.
    if (kind == Activation::Relu)
      for (std::int64_t i = 0; i < input.size(); ++i)
        if (std::abs(input[i]) < 1e-3) input[i] = 0.25;
    Tensor<double> upstream = random_tensor({3, 5, 2}, rng);
    const auto out = activation_forward(input, kind);
    const auto grad = activation_backward(upstream, out, kind);
    const auto eval = [&] {
      return sum_weighted(upstream, activation_forward(input, kind));
    };
    CHECK(gradient_max_rel_error(input, grad, eval) < 1e-8);
  }
}

TEST_CASE("channel affine forward/backward") {
  Rng rng(23);
  Tensor<double> x = random_tensor({4, 3, 2}, rng);
  Tensor<double> scale = random_tensor({2}, rng, 0.5, 1.5);
  Tensor<double> shift = random_tensor({2}, rng);
  Tensor<double> upstream = random_tensor({4, 3, 2}, rng);

  const auto y = channel_affine_forward(x, scale, shift);
  CHECK(y.at(1, 2, 1) ==
        doctest::Approx(x.at(1, 2, 1) * scale[1] + shift[1]).epsilon(1e-15));

  const auto g = channel_affine_backward(upstream, x, scale);
  const auto eval = [&] {
    return sum_weighted(upstream, channel_affine_forward(x, scale, shift));
  };
  CHECK(gradient_max_rel_error(x, g.input, eval) < 1e-6);
  CHECK(gradient_max_rel_error(scale, g.scale, eval) < 1e-6);
  CHECK(gradient_max_rel_error(shift, g.shift, eval) < 1e-6);
}

TEST_CASE("softmax over depth") {
  SUBCASE("all-equal inputs give uniform 1/4") {
    std::vector<Tensor<double>> maps(4, Tensor<double>({2, 2, 1}));
    for (auto& m : maps)
      for (std::int64_t i = 0; i < m.size(); ++i) m[i] = 0.7;
    const auto p = softmax_over_depth(maps);
    for (const auto& m : p)
      for (std::int64_t i = 0; i < m.size(); ++i)
        CHECK(m[i] == doctest::Approx(0.25).epsilon(1e-14));
  }

  SUBCASE("closed form at (0, ln 3)") {
    std::vector<Tensor<double>> maps(2, Tensor<double>({1, 1, 1}));
    maps[1][0] = std::log(3.0);
    const auto p = softmax_over_depth(maps);
    CHECK(p[0][0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(p[1][0] == doctest::Approx(0.75).epsilon(1e-14));
  }

  SUBCASE("per-pixel sums reach 1 on random volumes") {
    Rng rng(29);
    std::vector<Tensor<double>> maps;
    for (int t = 0; t < 7; ++t)
      maps.push_back(random_tensor({5, 6, 1}, rng, -30.0, 30.0));
    const auto p = softmax_over_depth(maps);
    for (std::int64_t i = 0; i < maps[0].size(); ++i) {
      double sum = 0;
      for (const auto& m : p) {
        CHECK(m[i] >= 0.0);
        sum += m[i];
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("concat/split round trip") {
  Rng rng(31);
  Tensor<double> a = random_tensor({3, 4, 2}, rng);
  Tensor<double> b = random_tensor({3, 4, 5}, rng);
  const auto c = concat_channels(a, b);
  Tensor<double> a2, b2;
  split_channels(c, 2, a2, b2);
  for (std::int64_t i = 0; i < a.size(); ++i) CHECK(a2[i] == a[i]);
  for (std::int64_t i = 0; i < b.size(); ++i) CHECK(b2[i] == b[i]);
}

TEST_CASE("allocation counters track live tensors") {
  TensorAllocStats::reset_peak();
  const auto base = TensorAllocStats::live_count().load();
  {
    Tensor<double> a({8, 8, 4});
    Tensor<double> b = a;
    Tensor<double> c = std::move(a);
    CHECK(TensorAllocStats::live_count().load() == base + 2);
  }
  CHECK(TensorAllocStats::live_count().load() == base);
}
