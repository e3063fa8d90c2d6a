#pragma once
// Reverse-mode autodiff on a tape of tensor ops. Nodes are created in
// topological order (inputs always precede their consumers), so the backward
// pass is a single reverse sweep that visits each node exactly once.

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "objnav/tensor.hpp"

namespace objnav {

using NodeId = std::int32_t;

class Tape {
 public:
  // Leaf referencing an external tensor. The tensor must outlive the tape.
  NodeId leaf(const Tensor& t, bool requires_grad) {
    Node n;
    n.view = &t;
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return NodeId(nodes_.size() - 1);
  }
  NodeId constant(const Tensor& t) { return leaf(t, false); }

  // Constant owned by the tape; no lifetime obligations on the caller.
  NodeId value(Tensor t) {
    Node n;
    n.value = std::move(t);
    nodes_.push_back(std::move(n));
    return NodeId(nodes_.size() - 1);
  }

  const Tensor& val(NodeId id) const {
    const Node& n = nodes_[size_t(id)];
    return n.view ? *n.view : n.value;
  }
  // Allocated on first touch; nodes the loss never reaches keep no gradient,
  // so the backward sweep can skip them outright.
  Tensor& grad(NodeId id) {
    Node& n = nodes_[size_t(id)];
    if (n.grad.size() == 0) n.grad = Tensor::zeros(val(id).shape());
    return n.grad;
  }
  bool has_grad(NodeId id) const { return nodes_[size_t(id)].grad.size() != 0; }
  bool requires_grad(NodeId id) const { return nodes_[size_t(id)].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // -- elementwise binary ---------------------------------------------------

  NodeId add(NodeId a, NodeId b) {
    check_same(a, b, "add");
    Tensor y = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += vb[i];
    return make(std::move(y), {a, b}, [](Tape& t, const Op& op) {
      t.accumulate(op.in[0], t.grad(op.out));
      t.accumulate(op.in[1], t.grad(op.out));
    });
  }

  NodeId sub(NodeId a, NodeId b) {
    check_same(a, b, "sub");
    Tensor y = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= vb[i];
    return make(std::move(y), {a, b}, [](Tape& t, const Op& op) {
      t.accumulate(op.in[0], t.grad(op.out));
      t.accumulate_scaled(op.in[1], t.grad(op.out), -1.0);
    });
  }

  NodeId mul(NodeId a, NodeId b) {
    check_same(a, b, "mul");
    Tensor y = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= vb[i];
    return make(std::move(y), {a, b}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      if (t.requires_grad(op.in[0])) {
        Tensor& da = t.grad(op.in[0]);
        const Tensor& vb = t.val(op.in[1]);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * vb[i];
      }
      if (t.requires_grad(op.in[1])) {
        Tensor& db = t.grad(op.in[1]);
        const Tensor& va = t.val(op.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * va[i];
      }
    });
  }

  NodeId div(NodeId a, NodeId b) {
    check_same(a, b, "div");
    Tensor y = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] /= vb[i];
    return make(std::move(y), {a, b}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      const Tensor& vb = t.val(op.in[1]);
      if (t.requires_grad(op.in[0])) {
        Tensor& da = t.grad(op.in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] / vb[i];
      }
      if (t.requires_grad(op.in[1])) {
        Tensor& db = t.grad(op.in[1]);
        const Tensor& vy = t.val(op.out);
        for (std::size_t i = 0; i < g.size(); ++i)
          db[i] -= g[i] * vy[i] / vb[i];
      }
    });
  }

  // min(a, b) elementwise; ties route the gradient to a.
  NodeId min2(NodeId a, NodeId b) {
    check_same(a, b, "min2");
    Tensor y = val(a);
    const Tensor& vb = val(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(y[i], vb[i]);
    return make(std::move(y), {a, b}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      const Tensor& va = t.val(op.in[0]);
      const Tensor& vb = t.val(op.in[1]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        NodeId target = va[i] <= vb[i] ? op.in[0] : op.in[1];
        if (t.requires_grad(target)) t.grad(target)[i] += g[i];
      }
    });
  }

  // -- elementwise unary ----------------------------------------------------

  NodeId scale(NodeId a, double c) {
    Tensor y = val(a);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= c;
    return make(std::move(y), {a}, [c](Tape& t, const Op& op) {
      t.accumulate_scaled(op.in[0], t.grad(op.out), c);
    });
  }

  NodeId add_scalar(NodeId a, double c) {
    Tensor y = val(a);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += c;
    return make(std::move(y), {a}, [](Tape& t, const Op& op) {
      t.accumulate(op.in[0], t.grad(op.out));
    });
  }

  NodeId relu(NodeId a) {
    Tensor y = val(a);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
    return make(std::move(y), {a}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      const Tensor& vx = t.val(op.in[0]);
      Tensor& dx = t.grad(op.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (vx[i] > 0.0) dx[i] += g[i];
    });
  }

  NodeId tanh_op(NodeId a) {
    Tensor y = val(a);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
    return make(std::move(y), {a}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      const Tensor& vy = t.val(op.out);
      Tensor& dx = t.grad(op.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (1.0 - vy[i] * vy[i]);
    });
  }

  NodeId exp_op(NodeId a) {
    Tensor y = val(a);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(y[i]);
    return make(std::move(y), {a}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      const Tensor& vy = t.val(op.out);
      Tensor& dx = t.grad(op.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * vy[i];
    });
  }

  NodeId log_op(NodeId a) {
    Tensor y = val(a);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::log(y[i]);
    return make(std::move(y), {a}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      const Tensor& vx = t.val(op.in[0]);
      Tensor& dx = t.grad(op.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] / vx[i];
    });
  }

  NodeId square(NodeId a) {
    Tensor y = val(a);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= y[i];
    return make(std::move(y), {a}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      const Tensor& vx = t.val(op.in[0]);
      Tensor& dx = t.grad(op.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += 2.0 * g[i] * vx[i];
    });
  }

  // Gradient passes through strictly inside (lo, hi) only.
  NodeId clamp(NodeId a, double lo, double hi) {
    Tensor y = val(a);
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = std::min(std::max(y[i], lo), hi);
    return make(std::move(y), {a}, [lo, hi](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      const Tensor& vx = t.val(op.in[0]);
      Tensor& dx = t.grad(op.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (vx[i] > lo && vx[i] < hi) dx[i] += g[i];
    });
  }

  // -- reductions & shape ---------------------------------------------------

  NodeId sum(NodeId a) {
    double acc = 0.0;
    const Tensor& v = val(a);
    for (std::size_t i = 0; i < v.size(); ++i) acc += v[i];
    return make(Tensor::scalar(acc), {a}, [](Tape& t, const Op& op) {
      const double g = t.grad(op.out)[0];
      Tensor& dx = t.grad(op.in[0]);
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g;
    });
  }

  NodeId mean(NodeId a) {
    const double inv_n = 1.0 / double(val(a).size());
    return scale(sum(a), inv_n);
  }

  NodeId concat(const std::vector<NodeId>& parts) {
    std::size_t total = 0;
    for (NodeId p : parts) total += val(p).size();
    Tensor y({int(total)});
    std::size_t off = 0;
    for (NodeId p : parts) {
      const Tensor& v = val(p);
      for (std::size_t i = 0; i < v.size(); ++i) y[off + i] = v[i];
      off += v.size();
    }
    Op op;
    op.ins = parts;
    return make_multi(std::move(y), std::move(op), [](Tape& t, const Op& o) {
      const Tensor& g = t.grad(o.out);
      std::size_t off = 0;
      for (NodeId p : o.ins) {
        const std::size_t n = t.val(p).size();
        if (t.requires_grad(p)) {
          Tensor& dp = t.grad(p);
          for (std::size_t i = 0; i < n; ++i) dp[i] += g[off + i];
        }
        off += n;
      }
    });
  }

  // Row-major view as a 1-d tensor; gradient passes through unchanged.
  NodeId reshape1d(NodeId a) {
    const Tensor& v = val(a);
    Tensor y({int(v.size())});
    for (std::size_t i = 0; i < v.size(); ++i) y[i] = v[i];
    return make(std::move(y), {a}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      Tensor& dx = t.grad(op.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    });
  }

  NodeId slice(NodeId a, int offset, int len) {
    const Tensor& v = val(a);
    if (offset < 0 || offset + len > int(v.size()))
      throw std::invalid_argument("slice out of range");
    Tensor y({len});
    for (int i = 0; i < len; ++i) y[size_t(i)] = v[size_t(offset + i)];
    return make(std::move(y), {a}, [offset, len](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      Tensor& dx = t.grad(op.in[0]);
      for (int i = 0; i < len; ++i) dx[size_t(offset + i)] += g[size_t(i)];
    });
  }

  // -- layers ---------------------------------------------------------------

  NodeId conv2d(NodeId x, NodeId k, NodeId b) {
    Tensor y = conv2d_forward(val(x), val(k), val(b));
    return make(std::move(y), {x, k, b}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      Tensor* dx = t.requires_grad(op.in[0]) ? &t.grad(op.in[0]) : nullptr;
      Tensor* dk = t.requires_grad(op.in[1]) ? &t.grad(op.in[1]) : nullptr;
      Tensor* db = t.requires_grad(op.in[2]) ? &t.grad(op.in[2]) : nullptr;
      conv2d_backward(t.val(op.in[0]), t.val(op.in[1]), g, dx, dk, db);
    });
  }

  NodeId linear(NodeId w, NodeId b, NodeId x) {
    Tensor y = linear_forward(val(w), val(b), val(x));
    return make(std::move(y), {w, b, x}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      Tensor* dw = t.requires_grad(op.in[0]) ? &t.grad(op.in[0]) : nullptr;
      Tensor* db = t.requires_grad(op.in[1]) ? &t.grad(op.in[1]) : nullptr;
      Tensor* dx = t.requires_grad(op.in[2]) ? &t.grad(op.in[2]) : nullptr;
      linear_backward(t.val(op.in[0]), t.val(op.in[2]), g, dw, db, dx);
    });
  }

  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-5) {
    LayerNormStash stash;
    Tensor y = layer_norm_forward(val(x), val(gamma), val(beta), eps, &stash);
    return make(std::move(y), {x, gamma, beta}, [stash](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      Tensor* dx = t.requires_grad(op.in[0]) ? &t.grad(op.in[0]) : nullptr;
      Tensor* dgamma = t.requires_grad(op.in[1]) ? &t.grad(op.in[1]) : nullptr;
      Tensor* dbeta = t.requires_grad(op.in[2]) ? &t.grad(op.in[2]) : nullptr;
      layer_norm_backward(t.val(op.in[0]), t.val(op.in[1]), stash, g, dx, dgamma, dbeta);
    });
  }

  NodeId avg_pool2(NodeId x) {
    Tensor y = avg_pool2_forward(val(x));
    return make(std::move(y), {x}, [](Tape& t, const Op& op) {
      const Tensor& g = t.grad(op.out);
      Tensor& dx = t.grad(op.in[0]);
      const int c = g.extent(0), oh = g.extent(1), ow = g.extent(2);
      const int w = dx.extent(2);
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) {
            const double gv = 0.25 * g.at(ch, i, j);
            double* base = dx.data() + (std::size_t(ch) * dx.extent(1) + 2 * i) * w + 2 * j;
            base[0] += gv;
            base[1] += gv;
            base[w] += gv;
            base[w + 1] += gv;
          }
    });
  }

  // -- backward -------------------------------------------------------------

  // Populates grads for every requires_grad node reachable from `loss`.
  void backward(NodeId loss) {
    if (val(loss).size() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got " +
                                  val(loss).shape_str());
    for (Node& n : nodes_) n.grad = Tensor();
    grad(loss)[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
      Node& n = nodes_[size_t(id)];
      if (!n.requires_grad || !n.op.backward || n.grad.size() == 0) continue;
      n.op.out = id;
      n.op.backward(*this, n.op);
    }
  }

 private:
  struct Op {
    std::array<NodeId, 3> in{{-1, -1, -1}};
    std::vector<NodeId> ins;  // only for variadic ops
    NodeId out = -1;
    std::function<void(Tape&, const Op&)> backward;
  };

  struct Node {
    const Tensor* view = nullptr;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Op op;
  };

  NodeId make(Tensor y, std::initializer_list<NodeId> ins,
              std::function<void(Tape&, const Op&)> backward) {
    Node n;
    n.value = std::move(y);
    int i = 0;
    for (NodeId id : ins) {
      n.op.in[size_t(i++)] = id;
      n.requires_grad = n.requires_grad || requires_grad(id);
    }
    if (n.requires_grad) n.op.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return NodeId(nodes_.size() - 1);
  }

  NodeId make_multi(Tensor y, Op op, std::function<void(Tape&, const Op&)> backward) {
    Node n;
    n.value = std::move(y);
    n.op = std::move(op);
    for (NodeId id : n.op.ins)
      n.requires_grad = n.requires_grad || requires_grad(id);
    if (n.requires_grad) n.op.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return NodeId(nodes_.size() - 1);
  }

  void accumulate(NodeId id, const Tensor& g) { accumulate_scaled(id, g, 1.0); }

  void accumulate_scaled(NodeId id, const Tensor& g, double c) {
    if (!requires_grad(id)) return;
    Tensor& dst = grad(id);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += c * g[i];
  }

  void check_same(NodeId a, NodeId b, const char* what) {
    if (!val(a).same_shape(val(b)))
      throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                  val(a).shape_str() + " vs " + val(b).shape_str());
  }

  std::vector<Node> nodes_;

  friend class TapeTestAccess;
};

}  // namespace objnav
