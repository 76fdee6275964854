#pragma once

// Dense NCHW tensors and the forward/backward kernels of every layer the
// segmentation network uses. Each convolution-like op has two paths: a
// naive loop that is the normative definition, and an im2col + GEMM path
// used unless oracle mode is on (FOLIOSEG_ORACLE=1 or ScopedOracleMode).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "folioseg/error.hpp"

namespace folioseg {

struct Shape4 {
  size_t n = 0, c = 0, h = 0, w = 0;

  size_t count() const noexcept { return n * c * h * w; }
  size_t plane() const noexcept { return h * w; }
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, double fill = 0.0)
      : shape_(shape), values_(shape.count(), fill) {}
  Tensor4(Shape4 shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.count())
      throw DataError("tensor value count does not match shape " + shape_.str());
  }

  const Shape4& shape() const noexcept { return shape_; }
  size_t size() const noexcept { return values_.size(); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double& operator()(size_t n, size_t c, size_t h, size_t w) {
    return values_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  double operator()(size_t n, size_t c, size_t h, size_t w) const {
    return values_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }

  double* plane(size_t n, size_t c) noexcept { return data() + (n * shape_.c + c) * shape_.plane(); }
  const double* plane(size_t n, size_t c) const noexcept {
    return data() + (n * shape_.c + c) * shape_.plane();
  }

  /// Gradient buffer of the same shape, allocated (zeroed) on first use.
  std::span<double> grad() {
    if (grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
    return grad_;
  }
  bool has_grad() const noexcept { return !grad_.empty(); }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

 private:
  Shape4 shape_;
  std::vector<double> values_;
  std::vector<double> grad_;
};

/// Weights are (out, in, kH, kW) for convolution and (in, out, kH, kW)
/// for transposed convolution, so one tensor serves both adjoint ops.
struct ConvParams {
  Tensor4 weights;
  std::vector<double> bias;
  size_t stride = 1;
  size_t padding = 0;
};

struct ConvGrads {
  Tensor4 dx;
  Tensor4 dw;
  std::vector<double> db;
};

// ---------------------------------------------------------------- oracle mode

namespace detail {
inline std::atomic<int>& oracle_override() {
  static std::atomic<int> v{-1};
  return v;
}
}  // namespace detail

inline bool oracle_mode() {
  const int o = detail::oracle_override().load(std::memory_order_relaxed);
  if (o >= 0) return o != 0;
  static const bool from_env = [] {
    const char* e = std::getenv("FOLIOSEG_ORACLE");
    return e != nullptr && std::string(e) == "1";
  }();
  return from_env;
}

class ScopedOracleMode {
 public:
  explicit ScopedOracleMode(bool on) : saved_(detail::oracle_override().exchange(on ? 1 : 0)) {}
  ~ScopedOracleMode() { detail::oracle_override().store(saved_); }
  ScopedOracleMode(const ScopedOracleMode&) = delete;
  ScopedOracleMode& operator=(const ScopedOracleMode&) = delete;

 private:
  int saved_;
};

// ------------------------------------------------------------------ geometry

namespace detail {

inline void check_finite([[maybe_unused]] const Tensor4& t, [[maybe_unused]] const char* op) {
#ifndef NDEBUG
  if (!t.all_finite()) throw NumericError(std::string(op) + " produced a non-finite value");
#endif
}

/// One convolution's spatial mapping: "in" is the dense side that the
/// kernel slides over, "out" the strided side.
struct ConvGeometry {
  size_t in_h, in_w, out_h, out_w, k_h, k_w, stride, pad;
};

inline size_t conv_extent(size_t in, size_t k, size_t stride, size_t pad, const char* axis) {
  const long span = long(in) + 2 * long(pad) - long(k);
  if (span < 0 || span % long(stride) != 0)
    throw DataError(std::string("convolution output ") + axis + " is not a positive integer (in " +
                    std::to_string(in) + ", kernel " + std::to_string(k) + ", stride " +
                    std::to_string(stride) + ", pad " + std::to_string(pad) + ")");
  return size_t(span) / stride + 1;
}

inline size_t deconv_extent(size_t in, size_t k, size_t stride, size_t pad, const char* axis) {
  const long out = (long(in) - 1) * long(stride) - 2 * long(pad) + long(k);
  if (out <= 0)
    throw DataError(std::string("transposed convolution output ") + axis + " is not positive");
  return size_t(out);
}

inline void check_params(const ConvParams& p, size_t bias_len) {
  const auto& s = p.weights.shape();
  if (s.h < 1 || s.w < 1) throw DataError("kernel must be at least 1x1");
  if (p.stride < 1) throw DataError("stride must be >= 1");
  if (p.bias.size() != bias_len)
    throw DataError("bias length " + std::to_string(p.bias.size()) + " != " +
                    std::to_string(bias_len));
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

// Rows of the strided side processed per GEMM so the column buffer stays
// around 32 MB even for full-page feature maps.
inline size_t band_rows(const ConvGeometry& g, size_t col_rows) {
  constexpr size_t budget = size_t(1) << 22;
  return std::clamp<size_t>(budget / std::max<size_t>(1, col_rows * g.out_w), 1, g.out_h);
}

/// Unfolds `channels` dense planes into rows (c,u,v) x columns (i,j) for
/// strided rows [r0, r1).
inline void im2col(const double* x, size_t channels, const ConvGeometry& g, size_t r0, size_t r1,
                   double* col) {
  const size_t cols = (r1 - r0) * g.out_w;
  for (size_t c = 0; c < channels; ++c) {
    const double* xc = x + c * g.in_h * g.in_w;
    for (size_t u = 0; u < g.k_h; ++u) {
      for (size_t v = 0; v < g.k_w; ++v) {
        double* dst = col + ((c * g.k_h + u) * g.k_w + v) * cols;
        for (size_t i = r0; i < r1; ++i) {
          const long yi = long(i * g.stride + u) - long(g.pad);
          double* d = dst + (i - r0) * g.out_w;
          if (yi < 0 || yi >= long(g.in_h)) {
            std::fill(d, d + g.out_w, 0.0);
            continue;
          }
          const double* src = xc + size_t(yi) * g.in_w;
          for (size_t j = 0; j < g.out_w; ++j) {
            const long xj = long(j * g.stride + v) - long(g.pad);
            d[j] = (xj < 0 || xj >= long(g.in_w)) ? 0.0 : src[xj];
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: accumulates columns back onto the dense planes.
inline void col2im(const double* col, size_t channels, const ConvGeometry& g, size_t r0, size_t r1,
                   double* x) {
  const size_t cols = (r1 - r0) * g.out_w;
  for (size_t c = 0; c < channels; ++c) {
    double* xc = x + c * g.in_h * g.in_w;
    for (size_t u = 0; u < g.k_h; ++u) {
      for (size_t v = 0; v < g.k_w; ++v) {
        const double* src = col + ((c * g.k_h + u) * g.k_w + v) * cols;
        for (size_t i = r0; i < r1; ++i) {
          const long yi = long(i * g.stride + u) - long(g.pad);
          if (yi < 0 || yi >= long(g.in_h)) continue;
          double* dst = xc + size_t(yi) * g.in_w;
          const double* s = src + (i - r0) * g.out_w;
          for (size_t j = 0; j < g.out_w; ++j) {
            const long xj = long(j * g.stride + v) - long(g.pad);
            if (xj >= 0 && xj < long(g.in_w)) dst[xj] += s[j];
          }
        }
      }
    }
  }
}

inline void add_bias(Tensor4& y, const std::vector<double>& bias) {
  const auto& s = y.shape();
  for (size_t n = 0; n < s.n; ++n)
    for (size_t o = 0; o < s.c; ++o) {
      double* p = y.plane(n, o);
      for (size_t i = 0; i < s.plane(); ++i) p[i] += bias[o];
    }
}

inline std::vector<double> channel_sums(const Tensor4& t) {
  const auto& s = t.shape();
  std::vector<double> out(s.c, 0.0);
  for (size_t n = 0; n < s.n; ++n)
    for (size_t o = 0; o < s.c; ++o) {
      const double* p = t.plane(n, o);
      double acc = 0.0;
      for (size_t i = 0; i < s.plane(); ++i) acc += p[i];
      out[o] += acc;
    }
  return out;
}

inline ConvGeometry conv_geometry(const Tensor4& x, const ConvParams& p) {
  const auto& ws = p.weights.shape();
  return {x.shape().h,
          x.shape().w,
          conv_extent(x.shape().h, ws.h, p.stride, p.padding, "height"),
          conv_extent(x.shape().w, ws.w, p.stride, p.padding, "width"),
          ws.h,
          ws.w,
          p.stride,
          p.padding};
}

// For a transposed convolution the dense side is its output.
inline ConvGeometry deconv_geometry(const Tensor4& x, const ConvParams& p) {
  const auto& ws = p.weights.shape();
  return {deconv_extent(x.shape().h, ws.h, p.stride, p.padding, "height"),
          deconv_extent(x.shape().w, ws.w, p.stride, p.padding, "width"),
          x.shape().h,
          x.shape().w,
          ws.h,
          ws.w,
          p.stride,
          p.padding};
}

}  // namespace detail

// ------------------------------------------------------------- convolution

/// Normative definition: y[n,o,i,j] = bias[o] + sum_{c,u,v} w[o,c,u,v] *
/// x[n,c,i*s-pad+u, j*s-pad+v], reading zeros outside x.
inline Tensor4 conv2d_fwd_naive(const Tensor4& x, const ConvParams& p) {
  const auto& ws = p.weights.shape();
  const auto g = detail::conv_geometry(x, p);
  Tensor4 y({x.shape().n, ws.n, g.out_h, g.out_w});
  for (size_t n = 0; n < x.shape().n; ++n)
    for (size_t o = 0; o < ws.n; ++o)
      for (size_t i = 0; i < g.out_h; ++i)
        for (size_t j = 0; j < g.out_w; ++j) {
          double acc = 0.0;
          for (size_t c = 0; c < ws.c; ++c)
            for (size_t u = 0; u < ws.h; ++u)
              for (size_t v = 0; v < ws.w; ++v) {
                const long yi = long(i * p.stride + u) - long(p.padding);
                const long xj = long(j * p.stride + v) - long(p.padding);
                if (yi < 0 || xj < 0 || yi >= long(g.in_h) || xj >= long(g.in_w)) continue;
                acc += p.weights(o, c, u, v) * x(n, c, size_t(yi), size_t(xj));
              }
          y(n, o, i, j) = p.bias[o] + acc;
        }
  return y;
}

inline ConvGrads conv2d_bwd_naive(const Tensor4& x, const ConvParams& p, const Tensor4& dy) {
  const auto& ws = p.weights.shape();
  const auto g = detail::conv_geometry(x, p);
  ConvGrads r{Tensor4(x.shape()), Tensor4(ws), std::vector<double>(ws.n, 0.0)};
  for (size_t n = 0; n < x.shape().n; ++n)
    for (size_t o = 0; o < ws.n; ++o)
      for (size_t i = 0; i < g.out_h; ++i)
        for (size_t j = 0; j < g.out_w; ++j) {
          const double d = dy(n, o, i, j);
          r.db[o] += d;
          for (size_t c = 0; c < ws.c; ++c)
            for (size_t u = 0; u < ws.h; ++u)
              for (size_t v = 0; v < ws.w; ++v) {
                const long yi = long(i * p.stride + u) - long(p.padding);
                const long xj = long(j * p.stride + v) - long(p.padding);
                if (yi < 0 || xj < 0 || yi >= long(g.in_h) || xj >= long(g.in_w)) continue;
                r.dx(n, c, size_t(yi), size_t(xj)) += p.weights(o, c, u, v) * d;
                r.dw(o, c, u, v) += x(n, c, size_t(yi), size_t(xj)) * d;
              }
        }
  return r;
}

inline void check_conv_input(const Tensor4& x, size_t in_channels) {
  if (x.shape().c != in_channels)
    throw DataError("channel mismatch: input has " + std::to_string(x.shape().c) +
                    " channels, layer expects " + std::to_string(in_channels));
}

inline Tensor4 conv2d_fwd(const Tensor4& x, const ConvParams& p) {
  const auto& ws = p.weights.shape();
  detail::check_params(p, ws.n);
  check_conv_input(x, ws.c);
  if (oracle_mode()) return conv2d_fwd_naive(x, p);

  const auto g = detail::conv_geometry(x, p);
  const size_t k = ws.c * ws.h * ws.w;
  const size_t out_plane = g.out_h * g.out_w;
  Tensor4 y({x.shape().n, ws.n, g.out_h, g.out_w});
  const size_t band = detail::band_rows(g, k);
  std::vector<double> col(k * band * g.out_w);
  detail::ConstMatrixMap w(p.weights.data(), Eigen::Index(ws.n), Eigen::Index(k));
  for (size_t n = 0; n < x.shape().n; ++n) {
    for (size_t r0 = 0; r0 < g.out_h; r0 += band) {
      const size_t r1 = std::min(g.out_h, r0 + band), cols = (r1 - r0) * g.out_w;
      detail::im2col(x.plane(n, 0), ws.c, g, r0, r1, col.data());
      detail::ConstMatrixMap c(col.data(), Eigen::Index(k), Eigen::Index(cols));
      detail::StridedMap yb(y.plane(n, 0) + r0 * g.out_w, Eigen::Index(ws.n), Eigen::Index(cols),
                            Eigen::OuterStride<>(Eigen::Index(out_plane)));
      yb.noalias() = w * c;
    }
  }
  detail::add_bias(y, p.bias);
  detail::check_finite(y, "conv2d_fwd");
  return y;
}

/// Gradients of sum(dy * conv2d_fwd(x, p)) with respect to x, weights, bias.
inline ConvGrads conv2d_bwd(const Tensor4& x, const ConvParams& p, const Tensor4& dy) {
  const auto& ws = p.weights.shape();
  detail::check_params(p, ws.n);
  check_conv_input(x, ws.c);
  const auto g = detail::conv_geometry(x, p);
  if (dy.shape() != Shape4{x.shape().n, ws.n, g.out_h, g.out_w})
    throw DataError("conv2d_bwd: dy shape " + dy.shape().str() + " does not match output");
  if (oracle_mode()) return conv2d_bwd_naive(x, p, dy);

  const size_t k = ws.c * ws.h * ws.w;
  const size_t out_plane = g.out_h * g.out_w;
  ConvGrads r{Tensor4(x.shape()), Tensor4(ws), detail::channel_sums(dy)};
  const size_t band = detail::band_rows(g, k);
  std::vector<double> col(k * band * g.out_w), dcol(col.size());
  detail::ConstMatrixMap w(p.weights.data(), Eigen::Index(ws.n), Eigen::Index(k));
  detail::MatrixMap dw(r.dw.data(), Eigen::Index(ws.n), Eigen::Index(k));
  for (size_t n = 0; n < x.shape().n; ++n) {
    for (size_t r0 = 0; r0 < g.out_h; r0 += band) {
      const size_t r1 = std::min(g.out_h, r0 + band), cols = (r1 - r0) * g.out_w;
      detail::im2col(x.plane(n, 0), ws.c, g, r0, r1, col.data());
      detail::ConstMatrixMap c(col.data(), Eigen::Index(k), Eigen::Index(cols));
      detail::ConstStridedMap dyb(dy.plane(n, 0) + r0 * g.out_w, Eigen::Index(ws.n),
                                  Eigen::Index(cols), Eigen::OuterStride<>(Eigen::Index(out_plane)));
      dw.noalias() += dyb * c.transpose();
      detail::MatrixMap dc(dcol.data(), Eigen::Index(k), Eigen::Index(cols));
      dc.noalias() = w.transpose() * dyb;
      detail::col2im(dcol.data(), ws.c, g, r0, r1, r.dx.plane(n, 0));
    }
  }
  return r;
}

// --------------------------------------------------- transposed convolution

/// Normative definition: every x[n,c,i,j] scatters x * w[c,o,u,v] onto
/// y[n,o,i*s-pad+u, j*s-pad+v]; then bias is added.
inline Tensor4 deconv2d_fwd_naive(const Tensor4& x, const ConvParams& p) {
  const auto& ws = p.weights.shape();
  const auto g = detail::deconv_geometry(x, p);
  Tensor4 y({x.shape().n, ws.c, g.in_h, g.in_w});
  for (size_t n = 0; n < x.shape().n; ++n)
    for (size_t c = 0; c < ws.n; ++c)
      for (size_t i = 0; i < g.out_h; ++i)
        for (size_t j = 0; j < g.out_w; ++j) {
          const double a = x(n, c, i, j);
          for (size_t o = 0; o < ws.c; ++o)
            for (size_t u = 0; u < ws.h; ++u)
              for (size_t v = 0; v < ws.w; ++v) {
                const long yi = long(i * p.stride + u) - long(p.padding);
                const long xj = long(j * p.stride + v) - long(p.padding);
                if (yi < 0 || xj < 0 || yi >= long(g.in_h) || xj >= long(g.in_w)) continue;
                y(n, o, size_t(yi), size_t(xj)) += a * p.weights(c, o, u, v);
              }
        }
  detail::add_bias(y, p.bias);
  return y;
}

inline ConvGrads deconv2d_bwd_naive(const Tensor4& x, const ConvParams& p, const Tensor4& dy) {
  const auto& ws = p.weights.shape();
  const auto g = detail::deconv_geometry(x, p);
  ConvGrads r{Tensor4(x.shape()), Tensor4(ws), detail::channel_sums(dy)};
  for (size_t n = 0; n < x.shape().n; ++n)
    for (size_t c = 0; c < ws.n; ++c)
      for (size_t i = 0; i < g.out_h; ++i)
        for (size_t j = 0; j < g.out_w; ++j) {
          double acc = 0.0;
          for (size_t o = 0; o < ws.c; ++o)
            for (size_t u = 0; u < ws.h; ++u)
              for (size_t v = 0; v < ws.w; ++v) {
                const long yi = long(i * p.stride + u) - long(p.padding);
                const long xj = long(j * p.stride + v) - long(p.padding);
                if (yi < 0 || xj < 0 || yi >= long(g.in_h) || xj >= long(g.in_w)) continue;
                const double d = dy(n, o, size_t(yi), size_t(xj));
                acc += p.weights(c, o, u, v) * d;
                r.dw(c, o, u, v) += x(n, c, i, j) * d;
              }
          r.dx(n, c, i, j) = acc;
        }
  return r;
}

inline Tensor4 deconv2d_fwd(const Tensor4& x, const ConvParams& p) {
  const auto& ws = p.weights.shape();
  detail::check_params(p, ws.c);
  check_conv_input(x, ws.n);
  if (oracle_mode()) return deconv2d_fwd_naive(x, p);

  const auto g = detail::deconv_geometry(x, p);
  const size_t k = ws.c * ws.h * ws.w;
  const size_t x_plane = g.out_h * g.out_w;
  Tensor4 y({x.shape().n, ws.c, g.in_h, g.in_w});
  const size_t band = detail::band_rows(g, k);
  std::vector<double> col(k * band * g.out_w);
  detail::ConstMatrixMap w(p.weights.data(), Eigen::Index(ws.n), Eigen::Index(k));
  for (size_t n = 0; n < x.shape().n; ++n) {
    for (size_t r0 = 0; r0 < g.out_h; r0 += band) {
      const size_t r1 = std::min(g.out_h, r0 + band), cols = (r1 - r0) * g.out_w;
      detail::ConstStridedMap xb(x.plane(n, 0) + r0 * g.out_w, Eigen::Index(ws.n),
                                 Eigen::Index(cols), Eigen::OuterStride<>(Eigen::Index(x_plane)));
      detail::MatrixMap c(col.data(), Eigen::Index(k), Eigen::Index(cols));
      c.noalias() = w.transpose() * xb;
      detail::col2im(col.data(), ws.c, g, r0, r1, y.plane(n, 0));
    }
  }
  detail::add_bias(y, p.bias);
  detail::check_finite(y, "deconv2d_fwd");
  return y;
}

/// Gradients of sum(dy * deconv2d_fwd(x, p)) with respect to x, weights, bias.
inline ConvGrads deconv2d_bwd(const Tensor4& x, const ConvParams& p, const Tensor4& dy) {
  const auto& ws = p.weights.shape();
  detail::check_params(p, ws.c);
  check_conv_input(x, ws.n);
  const auto g = detail::deconv_geometry(x, p);
  if (dy.shape() != Shape4{x.shape().n, ws.c, g.in_h, g.in_w})
    throw DataError("deconv2d_bwd: dy shape " + dy.shape().str() + " does not match output");
  if (oracle_mode()) return deconv2d_bwd_naive(x, p, dy);

  const size_t k = ws.c * ws.h * ws.w;
  const size_t x_plane = g.out_h * g.out_w;
  ConvGrads r{Tensor4(x.shape()), Tensor4(ws), detail::channel_sums(dy)};
  const size_t band = detail::band_rows(g, k);
  std::vector<double> col(k * band * g.out_w);
  detail::ConstMatrixMap w(p.weights.data(), Eigen::Index(ws.n), Eigen::Index(k));
  detail::MatrixMap dw(r.dw.data(), Eigen::Index(ws.n), Eigen::Index(k));
  for (size_t n = 0; n < x.shape().n; ++n) {
    for (size_t r0 = 0; r0 < g.out_h; r0 += band) {
      const size_t r1 = std::min(g.out_h, r0 + band), cols = (r1 - r0) * g.out_w;
      detail::im2col(dy.plane(n, 0), ws.c, g, r0, r1, col.data());
      detail::ConstMatrixMap c(col.data(), Eigen::Index(k), Eigen::Index(cols));
      detail::ConstStridedMap xb(x.plane(n, 0) + r0 * g.out_w, Eigen::Index(ws.n),
                                 Eigen::Index(cols), Eigen::OuterStride<>(Eigen::Index(x_plane)));
      dw.noalias() += xb * c.transpose();
      detail::StridedMap dxb(r.dx.plane(n, 0) + r0 * g.out_w, Eigen::Index(ws.n),
                             Eigen::Index(cols), Eigen::OuterStride<>(Eigen::Index(x_plane)));
      dxb.noalias() = w * c;
    }
  }
  return r;
}

// ------------------------------------------------------------------ pooling

struct PoolResult {
  Tensor4 y;
  /// Flat index into the input of each output element's maximum.
  std::vector<size_t> argmax;
  Shape4 input_shape;
};

/// 2x2 max pooling with stride 2. Ties go to the first element in
/// row-major window order.
inline PoolResult maxpool2_fwd(const Tensor4& x) {
  const auto& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0)
    throw DataError("maxpool2 needs even height and width, got " + s.str());
  PoolResult r{Tensor4({s.n, s.c, s.h / 2, s.w / 2}), {}, s};
  r.argmax.resize(r.y.size());
  size_t out = 0;
  for (size_t n = 0; n < s.n; ++n)
    for (size_t c = 0; c < s.c; ++c) {
      const size_t base = (n * s.c + c) * s.plane();
      for (size_t i = 0; i < s.h / 2; ++i)
        for (size_t j = 0; j < s.w / 2; ++j, ++out) {
          size_t best = base + 2 * i * s.w + 2 * j;
          const size_t cand[3] = {best + 1, best + s.w, best + s.w + 1};
          for (size_t k : cand)
            if (x.data()[k] > x.data()[best]) best = k;
          r.y.data()[out] = x.data()[best];
          r.argmax[out] = best;
        }
    }
  return r;
}

inline Tensor4 maxpool2_bwd(const PoolResult& fwd, const Tensor4& dy) {
  if (dy.shape() != fwd.y.shape())
    throw DataError("maxpool2_bwd: dy shape " + dy.shape().str() + " does not match output");
  Tensor4 dx(fwd.input_shape);
  for (size_t i = 0; i < dy.size(); ++i) dx.data()[fwd.argmax[i]] += dy.data()[i];
  return dx;
}

// -------------------------------------------------------------- activations

inline Tensor4 relu_fwd(const Tensor4& x) {
  Tensor4 y(x.shape());
  for (size_t i = 0; i < x.size(); ++i) y.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  return y;
}

inline Tensor4 relu_bwd(const Tensor4& x, const Tensor4& dy) {
  if (dy.shape() != x.shape()) throw DataError("relu_bwd: shape mismatch");
  Tensor4 dx(x.shape());
  for (size_t i = 0; i < x.size(); ++i) dx.data()[i] = x.data()[i] > 0.0 ? dy.data()[i] : 0.0;
  return dx;
}

/// Softmax over the channel axis at every (n, h, w), max-subtracted.
inline Tensor4 softmax_channels(const Tensor4& x) {
  const auto& s = x.shape();
  Tensor4 y(s);
  const size_t plane = s.plane();
  for (size_t n = 0; n < s.n; ++n) {
    const double* xn = x.plane(n, 0);
    double* yn = y.plane(n, 0);
    for (size_t p = 0; p < plane; ++p) {
      double m = -std::numeric_limits<double>::infinity();
      for (size_t c = 0; c < s.c; ++c) m = std::max(m, xn[c * plane + p]);
      double z = 0.0;
      for (size_t c = 0; c < s.c; ++c) z += (yn[c * plane + p] = std::exp(xn[c * plane + p] - m));
      for (size_t c = 0; c < s.c; ++c) yn[c * plane + p] /= z;
    }
  }
  return y;
}

/// Vector-Jacobian product of softmax_channels given its output y.
inline Tensor4 softmax_channels_bwd(const Tensor4& y, const Tensor4& dy) {
  if (dy.shape() != y.shape()) throw DataError("softmax_channels_bwd: shape mismatch");
  const auto& s = y.shape();
  Tensor4 dx(s);
  const size_t plane = s.plane();
  for (size_t n = 0; n < s.n; ++n) {
    const double* yn = y.plane(n, 0);
    const double* dyn = dy.plane(n, 0);
    double* dxn = dx.plane(n, 0);
    for (size_t p = 0; p < plane; ++p) {
      double dot = 0.0;
      for (size_t c = 0; c < s.c; ++c) dot += yn[c * plane + p] * dyn[c * plane + p];
      for (size_t c = 0; c < s.c; ++c)
        dxn[c * plane + p] = yn[c * plane + p] * (dyn[c * plane + p] - dot);
    }
  }
  return dx;
}

}  // namespace folioseg
