#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "sweepnet/common.hpp"

namespace sweepnet {

/// Live/peak accounting of tensor payload allocations. The recurrent
/// regularizer's memory contract (peak resident tensors independent of the
/// depth sample count) is asserted against these counters.
struct TensorAllocStats {
  static std::atomic<std::int64_t>& live_count() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }
  static std::atomic<std::int64_t>& live_bytes() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }
  static std::atomic<std::int64_t>& peak_count() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }
  static std::atomic<std::int64_t>& peak_bytes() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }

  static void reset_peak() {
    peak_count().store(live_count().load());
    peak_bytes().store(live_bytes().load());
  }

  static void on_alloc(std::int64_t bytes) {
    const std::int64_t c = live_count().fetch_add(1) + 1;
    const std::int64_t b = live_bytes().fetch_add(bytes) + bytes;
    std::int64_t p = peak_count().load();
    while (c > p && !peak_count().compare_exchange_weak(p, c)) {
    }
    p = peak_bytes().load();
    while (b > p && !peak_bytes().compare_exchange_weak(p, b)) {
    }
  }

  static void on_free(std::int64_t bytes) {
    live_count().fetch_sub(1);
    live_bytes().fetch_sub(bytes);
  }
};

/// Dense n-d array of real values, row-major over the shape list. Maps use
/// (height, width, channels); convolution kernels use (kh, kw, cin, cout).
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    allocate();
    data_.setZero();
  }

  Tensor(std::initializer_list<int> shape)
      : Tensor(std::vector<int>(shape)) {}

  Tensor(std::vector<int> shape, const std::vector<Scalar>& values)
      : shape_(std::move(shape)) {
    allocate();
    if (static_cast<std::int64_t>(values.size()) != size())
      throw ShapeError("tensor data length " + std::to_string(values.size()) +
                       " does not match shape product " +
                       std::to_string(size()));
    for (std::int64_t i = 0; i < size(); ++i) data_[i] = values[i];
    check_finite();
  }

  Tensor(const Tensor& other) : shape_(other.shape_), data_(other.data_) {
    if (data_.size() > 0) TensorAllocStats::on_alloc(bytes());
  }

  Tensor(Tensor&& other) noexcept
      : shape_(std::move(other.shape_)), data_(std::move(other.data_)) {
    other.shape_.clear();
    // Eigen's move leaves the source empty; ownership of the accounted
    // allocation transfers with the payload.
    other.moved_out_ = true;
  }

  Tensor& operator=(const Tensor& other) {
    if (this == &other) return *this;
    release();
    shape_ = other.shape_;
    data_ = other.data_;
    if (data_.size() > 0) TensorAllocStats::on_alloc(bytes());
    return *this;
  }

  Tensor& operator=(Tensor&& other) noexcept {
    if (this == &other) return *this;
    release();
    shape_ = std::move(other.shape_);
    data_ = std::move(other.data_);
    other.shape_.clear();
    other.moved_out_ = true;
    return *this;
  }

  ~Tensor() { release(); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::int64_t size() const {
    std::int64_t n = 1;
    for (int d : shape_) n *= d;
    return shape_.empty() ? 0 : n;
  }
  std::int64_t bytes() const {
    return static_cast<std::int64_t>(data_.size()) *
           static_cast<std::int64_t>(sizeof(Scalar));
  }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Array& array() { return data_; }
  const Array& array() const { return data_; }

  // Map-style accessors (height, width, channels).
  Scalar& at(int y, int x, int c) {
    return data_[(static_cast<std::int64_t>(y) * shape_[1] + x) * shape_[2] +
                 c];
  }
  Scalar at(int y, int x, int c) const {
    return data_[(static_cast<std::int64_t>(y) * shape_[1] + x) * shape_[2] +
                 c];
  }
  // Kernel accessors (kh, kw, cin, cout).
  Scalar& at(int kh, int kw, int ci, int co) {
    return data_[((static_cast<std::int64_t>(kh) * shape_[1] + kw) *
                      shape_[2] +
                  ci) *
                     shape_[3] +
                 co];
  }
  Scalar at(int kh, int kw, int ci, int co) const {
    return data_[((static_cast<std::int64_t>(kh) * shape_[1] + kw) *
                      shape_[2] +
                  ci) *
                     shape_[3] +
                 co];
  }
  Scalar& operator[](std::int64_t i) { return data_[i]; }
  Scalar operator[](std::int64_t i) const { return data_[i]; }

  void setZero() { data_.setZero(); }

  void check_finite() const {
    if (!checked_mode()) return;
    for (std::int64_t i = 0; i < size(); ++i)
      if (!std::isfinite(static_cast<double>(data_[i])))
        throw std::invalid_argument("tensor holds non-finite value at flat index " +
                                    std::to_string(i));
  }

  bool same_shape(const Tensor& other) const {
    return shape_ == other.shape_;
  }

  static Tensor zeros_like(const Tensor& other) {
    return Tensor(other.shape_);
  }

  static Tensor from_fn(std::vector<int> shape,
                        const std::function<Scalar(std::int64_t)>& fn) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t.data_[i] = fn(i);
    return t;
  }

 private:
  void allocate() {
    std::int64_t n = size();
    if (n < 0) throw ShapeError("negative tensor extent");
    data_.resize(n);
    if (n > 0) TensorAllocStats::on_alloc(bytes());
  }
  void release() {
    if (!moved_out_ && data_.size() > 0) TensorAllocStats::on_free(bytes());
    moved_out_ = false;
  }

  std::vector<int> shape_;
  Array data_;
  bool moved_out_ = false;
};

/// Convolution geometry: same-size zero padding, positive stride. Output
/// spatial extent is ceil(input / stride).
struct ConvSpec {
  int kernel_height = 3;
  int kernel_width = 3;
  int stride = 1;
  int in_channels = 0;
  int out_channels = 0;

  int out_extent(int in) const { return (in + stride - 1) / stride; }
  // Zero-fill split with the shorter pad on the leading side.
  int pad_before(int in, int k) const {
    const int out = out_extent(in);
    const int total = std::max((out - 1) * stride + k - in, 0);
    return total / 2;
  }
};

enum class Activation { Sigmoid, Tanh, Relu };

namespace detail {

template <typename Scalar>
void require_map3(const Tensor<Scalar>& t, const char* name) {
  if (t.rank() != 3)
    throw ShapeError(std::string(name) + " must have rank 3 (h, w, c), got rank " +
                     std::to_string(t.rank()));
}

}  // namespace detail

/// Cross-correlation with zero-fill same padding.
/// input: (h, w, cin); kernel: (kh, kw, cin, cout); bias: (cout).
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input,
                              const Tensor<Scalar>& kernel,
                              const Tensor<Scalar>& bias,
                              const ConvSpec& spec) {
  detail::require_map3(input, "conv input");
  if (kernel.rank() != 4)
    throw ShapeError("conv kernel must have rank 4 (kh, kw, cin, cout)");
  if (kernel.dim(0) != spec.kernel_height || kernel.dim(1) != spec.kernel_width)
    throw ShapeError("kernel spatial dims disagree with spec on axis kh/kw");
  if (input.dim(2) != spec.in_channels || kernel.dim(2) != spec.in_channels)
    throw ShapeError("channel axis mismatch: input has " +
                     std::to_string(input.dim(2)) + " channels, spec expects " +
                     std::to_string(spec.in_channels));
  if (kernel.dim(3) != spec.out_channels)
    throw ShapeError("kernel output-channel axis mismatch");
  if (bias.size() != spec.out_channels)
    throw ShapeError("bias length mismatch on output-channel axis");

  const int h = input.dim(0), w = input.dim(1);
  const int ho = spec.out_extent(h), wo = spec.out_extent(w);
  const int kh = spec.kernel_height, kw = spec.kernel_width;
  const int ci = spec.in_channels, co = spec.out_channels;
  const int ph = spec.pad_before(h, kh), pw = spec.pad_before(w, kw);

  using Mat =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  // im2col: one row per output pixel, kh*kw*ci taps each, then one GEMM.
  Mat cols = Mat::Zero(static_cast<std::int64_t>(ho) * wo, kh * kw * ci);
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      Scalar* row = cols.data() + (static_cast<std::int64_t>(oy) * wo + ox) *
                                      (kh * kw * ci);
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * spec.stride + ky - ph;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * spec.stride + kx - pw;
          if (ix < 0 || ix >= w) continue;
          const Scalar* src = input.data() +
                              (static_cast<std::int64_t>(iy) * w + ix) * ci;
          Scalar* dst = row + (ky * kw + kx) * ci;
          for (int c = 0; c < ci; ++c) dst[c] = src[c];
        }
      }
    }
  }
  Eigen::Map<const Mat> kmat(kernel.data(), kh * kw * ci, co);
  Tensor<Scalar> out({ho, wo, co});
  Eigen::Map<Mat> omat(out.data(), static_cast<std::int64_t>(ho) * wo, co);
  omat.noalias() = cols * kmat;
  Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> bvec(bias.data(),
                                                                  co);
  omat.rowwise() += bvec;
  return out;
}

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> kernel;
  Tensor<Scalar> bias;
};

/// Gradients of sum(upstream .* conv2d_forward(...)) w.r.t. the forward
/// inputs.
template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& upstream,
                                  const Tensor<Scalar>& input,
                                  const Tensor<Scalar>& kernel,
                                  const ConvSpec& spec) {
  detail::require_map3(upstream, "conv upstream");
  const int h = input.dim(0), w = input.dim(1);
  const int ho = spec.out_extent(h), wo = spec.out_extent(w);
  if (upstream.dim(0) != ho || upstream.dim(1) != wo ||
      upstream.dim(2) != spec.out_channels)
    throw ShapeError("upstream shape does not match conv output shape");

  const int kh = spec.kernel_height, kw = spec.kernel_width;
  const int ci = spec.in_channels, co = spec.out_channels;
  const int ph = spec.pad_before(h, kh), pw = spec.pad_before(w, kw);

  ConvGrads<Scalar> g;
  g.input = Tensor<Scalar>(input.shape());
  g.kernel = Tensor<Scalar>(kernel.shape());
  g.bias = Tensor<Scalar>({co});

  // grad bias: per-channel sum of upstream.
  for (std::int64_t px = 0; px < static_cast<std::int64_t>(ho) * wo; ++px)
    for (int c = 0; c < co; ++c) g.bias[c] += upstream[px * co + c];

  // grad kernel and grad input share the tap enumeration of the forward pass.
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const Scalar* up =
          upstream.data() + (static_cast<std::int64_t>(oy) * wo + ox) * co;
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * spec.stride + ky - ph;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * spec.stride + kx - pw;
          if (ix < 0 || ix >= w) continue;
          const Scalar* in =
              input.data() + (static_cast<std::int64_t>(iy) * w + ix) * ci;
          Scalar* gin =
              g.input.data() + (static_cast<std::int64_t>(iy) * w + ix) * ci;
          for (int c = 0; c < ci; ++c) {
            const Scalar* krow =
                kernel.data() +
                ((static_cast<std::int64_t>(ky) * kw + kx) * ci + c) * co;
            Scalar* gk =
                g.kernel.data() +
                ((static_cast<std::int64_t>(ky) * kw + kx) * ci + c) * co;
            Scalar acc = 0;
            const Scalar v = in[c];
            for (int o = 0; o < co; ++o) {
              acc += up[o] * krow[o];
              gk[o] += up[o] * v;
            }
            gin[c] += acc;
          }
        }
      }
    }
  }
  return g;
}

template <typename Scalar>
Tensor<Scalar> activation_forward(const Tensor<Scalar>& x, Activation kind) {
  Tensor<Scalar> y(x.shape());
  switch (kind) {
    case Activation::Sigmoid:
      y.array() = Scalar(1) / (Scalar(1) + (-x.array()).exp());
      break;
    case Activation::Tanh:
      y.array() = x.array().tanh();
      break;
    case Activation::Relu:
      y.array() = x.array().max(Scalar(0));
      break;
  }
  return y;
}

/// Backward pass from the forward *output*: upstream .* f'(x) where f' is
/// recovered from f(x) (all three activations permit that).
template <typename Scalar>
Tensor<Scalar> activation_backward(const Tensor<Scalar>& upstream,
                                   const Tensor<Scalar>& output,
                                   Activation kind) {
  if (!upstream.same_shape(output))
    throw ShapeError("activation backward: upstream/output shape mismatch");
  Tensor<Scalar> g(upstream.shape());
  switch (kind) {
    case Activation::Sigmoid:
      g.array() = upstream.array() * output.array() *
                  (Scalar(1) - output.array());
      break;
    case Activation::Tanh:
      g.array() =
          upstream.array() * (Scalar(1) - output.array() * output.array());
      break;
    case Activation::Relu:
      g.array() =
          upstream.array() * (output.array() > Scalar(0)).template cast<Scalar>();
      break;
  }
  return g;
}

/// Per-channel affine y = x * scale[c] + shift[c]; the folded batch-norm
/// stand-in that follows each extractor convolution.
template <typename Scalar>
Tensor<Scalar> channel_affine_forward(const Tensor<Scalar>& x,
                                      const Tensor<Scalar>& scale,
                                      const Tensor<Scalar>& shift) {
  detail::require_map3(x, "affine input");
  const int c = x.dim(2);
  if (scale.size() != c || shift.size() != c)
    throw ShapeError("affine parameter length mismatch on channel axis");
  Tensor<Scalar> y(x.shape());
  const std::int64_t pixels = static_cast<std::int64_t>(x.dim(0)) * x.dim(1);
  for (std::int64_t p = 0; p < pixels; ++p)
    for (int k = 0; k < c; ++k)
      y[p * c + k] = x[p * c + k] * scale[k] + shift[k];
  return y;
}

template <typename Scalar>
struct AffineGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> scale;
  Tensor<Scalar> shift;
};

template <typename Scalar>
AffineGrads<Scalar> channel_affine_backward(const Tensor<Scalar>& upstream,
                                            const Tensor<Scalar>& x,
                                            const Tensor<Scalar>& scale) {
  if (!upstream.same_shape(x))
    throw ShapeError("affine backward: upstream/input shape mismatch");
  const int c = x.dim(2);
  AffineGrads<Scalar> g;
  g.input = Tensor<Scalar>(x.shape());
  g.scale = Tensor<Scalar>({c});
  g.shift = Tensor<Scalar>({c});
  const std::int64_t pixels = static_cast<std::int64_t>(x.dim(0)) * x.dim(1);
  for (std::int64_t p = 0; p < pixels; ++p)
    for (int k = 0; k < c; ++k) {
      const Scalar u = upstream[p * c + k];
      g.input[p * c + k] = u * scale[k];
      g.scale[k] += u * x[p * c + k];
      g.shift[k] += u;
    }
  return g;
}

/// Stable per-pixel softmax across a sequence of (h, w, 1) maps.
template <typename Scalar>
std::vector<Tensor<Scalar>> softmax_over_depth(
    const std::vector<Tensor<Scalar>>& values) {
  if (values.empty()) throw ShapeError("softmax over empty depth sequence");
  for (const auto& v : values)
    if (!v.same_shape(values.front()))
      throw ShapeError("softmax inputs differ in spatial shape");
  const std::int64_t n = values.front().size();
  const int d = static_cast<int>(values.size());
  std::vector<Tensor<Scalar>> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(Tensor<Scalar>(v.shape()));
  for (std::int64_t i = 0; i < n; ++i) {
    Scalar m = values[0][i];
    for (int t = 1; t < d; ++t) m = std::max(m, values[t][i]);
    Scalar sum = 0;
    for (int t = 0; t < d; ++t) {
      const Scalar e = std::exp(values[t][i] - m);
      out[t][i] = e;
      sum += e;
    }
    for (int t = 0; t < d; ++t) out[t][i] /= sum;
  }
  return out;
}

/// Channel concatenation of two (h, w, c) maps.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a,
                               const Tensor<Scalar>& b) {
  detail::require_map3(a, "concat lhs");
  detail::require_map3(b, "concat rhs");
  if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1))
    throw ShapeError("concat operands differ on spatial axes");
  const int ca = a.dim(2), cb = b.dim(2);
  Tensor<Scalar> out({a.dim(0), a.dim(1), ca + cb});
  const std::int64_t pixels = static_cast<std::int64_t>(a.dim(0)) * a.dim(1);
  for (std::int64_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < ca; ++c) out[p * (ca + cb) + c] = a[p * ca + c];
    for (int c = 0; c < cb; ++c) out[p * (ca + cb) + ca + c] = b[p * cb + c];
  }
  return out;
}

/// Splits the channel axis back into the two concatenated parts.
template <typename Scalar>
void split_channels(const Tensor<Scalar>& x, int ca, Tensor<Scalar>& a,
                    Tensor<Scalar>& b) {
  const int c = x.dim(2), cb = c - ca;
  a = Tensor<Scalar>({x.dim(0), x.dim(1), ca});
  b = Tensor<Scalar>({x.dim(0), x.dim(1), cb});
  const std::int64_t pixels = static_cast<std::int64_t>(x.dim(0)) * x.dim(1);
  for (std::int64_t p = 0; p < pixels; ++p) {
    for (int k = 0; k < ca; ++k) a[p * ca + k] = x[p * c + k];
    for (int k = 0; k < cb; ++k) b[p * cb + k] = x[p * c + ca + k];
  }
}

}  // namespace sweepnet
