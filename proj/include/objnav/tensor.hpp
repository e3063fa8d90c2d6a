#pragma once
// Dense row-major tensor of 64-bit floats plus the forward/backward kernels
// the networks are built from. Kernels are free functions so both the tape
// ops and forward-only evaluation share one implementation.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "objnav/rng.hpp"

namespace objnav {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt2 = 1.41421356237309504880;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}
  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_size(shape_))
      throw std::invalid_argument("tensor data length does not match shape " +
                                  shape_str());
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor gaussian(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = stddev * rng.normal();
    return t;
  }

  int rank() const { return int(shape_.size()); }
  int extent(int d) const { return shape_[size_t(d)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Up to 4-d indexed access, used mostly by tests and small code paths.
  double& at(int i) { return data_[size_t(i)]; }
  double& at(int i, int j) { return data_[size_t(i) * shape_[1] + j]; }
  double& at(int i, int j, int k) {
    return data_[(size_t(i) * shape_[1] + j) * shape_[2] + k];
  }
  double& at(int i, int j, int k, int l) {
    return data_[((size_t(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double at(int i) const { return data_[size_t(i)]; }
  double at(int i, int j) const { return data_[size_t(i) * shape_[1] + j]; }
  double at(int i, int j, int k) const {
    return data_[(size_t(i) * shape_[1] + j) * shape_[2] + k];
  }
  double at(int i, int j, int k, int l) const {
    return data_[((size_t(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << "]";
    return os.str();
  }

 private:
  static std::size_t checked_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
      if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
      n *= std::size_t(e);
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------
// Kernels. Valid (no padding) 3x3 cross-correlation, stride 1.

inline void check_conv_shapes(const Tensor& x, const Tensor& k, const Tensor& b) {
  if (x.rank() != 3)
    throw std::invalid_argument("conv2d: input must be CxHxW, got " + x.shape_str());
  if (k.rank() != 4 || k.extent(2) != 3 || k.extent(3) != 3)
    throw std::invalid_argument("conv2d: kernels must be OxIx3x3, got " + k.shape_str());
  if (k.extent(1) != x.extent(0))
    throw std::invalid_argument("conv2d: kernel input channels " +
                                std::to_string(k.extent(1)) +
                                " do not match input channels " +
                                std::to_string(x.extent(0)));
  if (b.rank() != 1 || b.extent(0) != k.extent(0))
    throw std::invalid_argument("conv2d: bias must be [Cout], got " + b.shape_str());
  if (x.extent(1) < 3 || x.extent(2) < 3)
    throw std::invalid_argument("conv2d: spatial extent must be at least 3, got " +
                                x.shape_str());
}

// The hot kernels spell out std::fma: fused multiply-add as explicit program
// semantics is bit-stable across call sites (the build otherwise disables
// floating-point contraction) and vectorizes well.
inline Tensor conv2d_forward(const Tensor& x, const Tensor& k, const Tensor& b) {
  check_conv_shapes(x, k, b);
  const int ci_n = x.extent(0), h = x.extent(1), w = x.extent(2);
  const int co_n = k.extent(0), oh = h - 2, ow = w - 2;
  Tensor y({co_n, oh, ow});
  for (int co = 0; co < co_n; ++co) {
    double* ybase = y.data() + std::size_t(co) * oh * ow;
    const double bias = b[size_t(co)];
    for (int i = 0; i < oh * ow; ++i) ybase[i] = bias;
    for (int ci = 0; ci < ci_n; ++ci) {
      const double* xbase = x.data() + std::size_t(ci) * h * w;
      const double* kbase = k.data() + (std::size_t(co) * ci_n + ci) * 9;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const double wv = kbase[ky * 3 + kx];
          for (int oy = 0; oy < oh; ++oy) {
            const double* xrow = xbase + (oy + ky) * w + kx;
            double* yrow = ybase + oy * ow;
            for (int ox = 0; ox < ow; ++ox) yrow[ox] = std::fma(wv, xrow[ox], yrow[ox]);
          }
        }
    }
  }
  return y;
}

inline void conv2d_backward(const Tensor& x, const Tensor& k, const Tensor& dy,
                            Tensor* dx, Tensor* dk, Tensor* db) {
  const int ci_n = x.extent(0), h = x.extent(1), w = x.extent(2);
  const int co_n = k.extent(0), oh = h - 2, ow = w - 2;
  if (db) {
    for (int co = 0; co < co_n; ++co) {
      const double* dyb = dy.data() + std::size_t(co) * oh * ow;
      double acc = 0.0;
      for (int i = 0; i < oh * ow; ++i) acc += dyb[i];
      (*db)[size_t(co)] += acc;
    }
  }
  if (dk) {
    for (int co = 0; co < co_n; ++co) {
      const double* dyb = dy.data() + std::size_t(co) * oh * ow;
      for (int ci = 0; ci < ci_n; ++ci) {
        const double* xbase = x.data() + std::size_t(ci) * h * w;
        double* dkb = dk->data() + (std::size_t(co) * ci_n + ci) * 9;
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            double acc = 0.0;
            for (int oy = 0; oy < oh; ++oy) {
              const double* xrow = xbase + (oy + ky) * w + kx;
              const double* dyrow = dyb + oy * ow;
              for (int ox = 0; ox < ow; ++ox) acc = std::fma(xrow[ox], dyrow[ox], acc);
            }
            dkb[ky * 3 + kx] += acc;
          }
      }
    }
  }
  if (dx) {
    for (int ci = 0; ci < ci_n; ++ci) {
      double* dxbase = dx->data() + std::size_t(ci) * h * w;
      for (int co = 0; co < co_n; ++co) {
        const double* dyb = dy.data() + std::size_t(co) * oh * ow;
        const double* kbase = k.data() + (std::size_t(co) * ci_n + ci) * 9;
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = kbase[ky * 3 + kx];
            for (int oy = 0; oy < oh; ++oy) {
              double* dxrow = dxbase + (oy + ky) * w + kx;
              const double* dyrow = dyb + oy * ow;
              for (int ox = 0; ox < ow; ++ox)
                dxrow[ox] = std::fma(wv, dyrow[ox], dxrow[ox]);
            }
          }
      }
    }
  }
}

// y = W x + b, W is [out x in] row-major.
inline Tensor linear_forward(const Tensor& w, const Tensor& b, const Tensor& x) {
  if (w.rank() != 2 || x.size() != std::size_t(w.extent(1)) || b.size() != std::size_t(w.extent(0)))
    throw std::invalid_argument("linear: shape mismatch, W " + w.shape_str() +
                                " x " + x.shape_str() + " b " + b.shape_str());
  const int out = w.extent(0), in = w.extent(1);
  Tensor y({out});
  for (int o = 0; o < out; ++o) {
    const double* wrow = w.data() + std::size_t(o) * in;
    double acc = b[size_t(o)];
    for (int i = 0; i < in; ++i) acc += wrow[i] * x[size_t(i)];
    y[size_t(o)] = acc;
  }
  return y;
}

inline void linear_backward(const Tensor& w, const Tensor& x, const Tensor& dy,
                            Tensor* dw, Tensor* db, Tensor* dx) {
  const int out = w.extent(0), in = w.extent(1);
  for (int o = 0; o < out; ++o) {
    const double g = dy[size_t(o)];
    if (db) (*db)[size_t(o)] += g;
    if (dw) {
      double* dwrow = dw->data() + std::size_t(o) * in;
      for (int i = 0; i < in; ++i) dwrow[i] += g * x[size_t(i)];
    }
    if (dx) {
      const double* wrow = w.data() + std::size_t(o) * in;
      for (int i = 0; i < in; ++i) (*dx)[size_t(i)] += g * wrow[i];
    }
  }
}

// Per-vector layer normalization with affine terms and a variance floor.
struct LayerNormStash {
  double mean = 0.0;
  double inv_std = 0.0;
};

inline Tensor layer_norm_forward(const Tensor& x, const Tensor& gamma,
                                 const Tensor& beta, double eps,
                                 LayerNormStash* stash = nullptr) {
  if (!x.same_shape(gamma) || !x.same_shape(beta))
    throw std::invalid_argument("layer_norm: affine shapes must match input");
  const std::size_t n = x.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i];
  mean /= double(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
  var /= double(n);
  const double inv_std = 1.0 / std::sqrt(var + eps);
  if (stash) *stash = {mean, inv_std};
  Tensor y(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    y[i] = (x[i] - mean) * inv_std * gamma[i] + beta[i];
  return y;
}

inline void layer_norm_backward(const Tensor& x, const Tensor& gamma,
                                const LayerNormStash& s, const Tensor& dy,
                                Tensor* dx, Tensor* dgamma, Tensor* dbeta) {
  const std::size_t n = x.size();
  const double inv_n = 1.0 / double(n);
  // xhat_i = (x_i - mean) * inv_std
  std::vector<double> xhat(n), dxhat(n);
  double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xhat[i] = (x[i] - s.mean) * s.inv_std;
    dxhat[i] = dy[i] * gamma[i];
    sum_dxhat += dxhat[i];
    sum_dxhat_xhat += dxhat[i] * xhat[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dgamma) (*dgamma)[i] += dy[i] * xhat[i];
    if (dbeta) (*dbeta)[i] += dy[i];
    if (dx)
      (*dx)[i] += s.inv_std *
                  (dxhat[i] - inv_n * sum_dxhat - inv_n * xhat[i] * sum_dxhat_xhat);
  }
}

// 2x2 average pooling (even extents required).
inline Tensor avg_pool2_forward(const Tensor& x) {
  if (x.rank() != 3 || x.extent(1) % 2 != 0 || x.extent(2) % 2 != 0)
    throw std::invalid_argument("avg_pool2: input must be CxHxW with even H, W");
  const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
  Tensor y({c, h / 2, w / 2});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h / 2; ++i)
      for (int j = 0; j < w / 2; ++j)
        y.at(ch, i, j) = 0.25 * (x.at(ch, 2 * i, 2 * j) + x.at(ch, 2 * i, 2 * j + 1) +
                                 x.at(ch, 2 * i + 1, 2 * j) + x.at(ch, 2 * i + 1, 2 * j + 1));
  return y;
}

}  // namespace objnav
