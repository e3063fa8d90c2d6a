#pragma once
// Adam with bias correction, plus orthogonal weight initialization.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "objnav/tensor.hpp"

namespace objnav {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment accumulators live per parameter name; a non-finite gradient anywhere
// in the batch skips the whole call (counted, step counter untouched).
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  struct Slot {
    Tensor m, v;
  };

  // params and grads are name-aligned; every grad name must match a param.
  bool step(std::map<std::string, Tensor*>& params,
            const std::map<std::string, Tensor>& grads) {
    for (const auto& [name, g] : grads) {
      if (params.find(name) == params.end())
        throw std::invalid_argument("adam: gradient for unknown parameter " + name);
      if (!g.all_finite()) {
        ++skipped_;
        return false;
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (const auto& [name, g] : grads) {
      Tensor& p = *params.at(name);
      if (!p.same_shape(g))
        throw std::invalid_argument("adam: gradient shape mismatch for " + name);
      Slot& s = slots_[name];
      if (s.m.size() == 0) {
        s.m = Tensor::zeros(p.shape());
        s.v = Tensor::zeros(p.shape());
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
        s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
    return true;
  }

  std::int64_t step_count() const { return t_; }
  std::int64_t skipped_count() const { return skipped_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::int64_t skipped_ = 0;
  std::map<std::string, Slot> slots_;
};

// Orthogonal init: whichever of rows/columns is fewer comes out orthonormal.
// Shapes with rank > 2 are treated as [shape[0], prod(rest)].
inline Tensor orthogonal_init(const std::vector<int>& shape, Rng& rng) {
  Tensor t(shape);
  const int rows = shape[0];
  int cols = 1;
  for (std::size_t d = 1; d < shape.size(); ++d) cols *= shape[d];
  const int n = std::min(rows, cols);
  const int m = std::max(rows, cols);

  // Orthonormalize n vectors of dimension m (two rounds of modified
  // Gram-Schmidt keeps residuals near machine precision).
  std::vector<std::vector<double>> q(static_cast<std::size_t>(n),
                                     std::vector<double>(static_cast<std::size_t>(m)));
  for (int i = 0; i < n; ++i) {
    for (;;) {
      for (int j = 0; j < m; ++j) q[size_t(i)][size_t(j)] = rng.normal();
      bool ok = true;
      for (int round = 0; round < 2 && ok; ++round) {
        for (int k = 0; k < i; ++k) {
          double dot = 0.0;
          for (int j = 0; j < m; ++j) dot += q[size_t(i)][size_t(j)] * q[size_t(k)][size_t(j)];
          for (int j = 0; j < m; ++j) q[size_t(i)][size_t(j)] -= dot * q[size_t(k)][size_t(j)];
        }
        double norm = 0.0;
        for (int j = 0; j < m; ++j) norm += q[size_t(i)][size_t(j)] * q[size_t(i)][size_t(j)];
        norm = std::sqrt(norm);
        if (norm < 1e-8) {
          ok = false;
          break;
        }
        for (int j = 0; j < m; ++j) q[size_t(i)][size_t(j)] /= norm;
      }
      if (ok) break;
    }
  }

  if (rows <= cols) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t[std::size_t(i) * cols + j] = q[size_t(i)][size_t(j)];
  } else {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t[std::size_t(i) * cols + j] = q[size_t(j)][size_t(i)];
  }
  return t;
}

}  // namespace objnav
