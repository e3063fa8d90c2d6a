#pragma once
// Encoder, actor and clipped-double-Q critic networks.
//
// Encoder: 4 stride-1 valid 3x3 convolutions (ReLU after each), then a
// fully-connected layer to 50 features, LayerNorm, tanh. Actor and critic
// share this encoder; only critic updates touch it. Actor and critic heads
// are 3-layer MLPs (hidden 1024, ReLU except after the last layer). The
// actor parameterizes a tanh-squashed diagonal Gaussian over the 2-d map
// goal; both Q heads consume (features ++ one-hot goal ++ action).

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "objnav/container.hpp"
#include "objnav/optim.hpp"
#include "objnav/tape.hpp"
#include "objnav/tensor.hpp"

namespace objnav {

struct PolicyConfig {
  int categories = 6;
  int map_size = 64;
  int input_channels = -1;  // -1: categories + 4
  int conv_channels = 32;
  int feature_dim = 50;
  int hidden_dim = 1024;
  int action_dim = 2;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  bool avg_pool = false;  // 2x average pool between convs and the FC layer

  int in_channels() const { return input_channels > 0 ? input_channels : categories + 4; }
  int conv_out_spatial() const {
    const int sp = map_size - 8;
    if (sp < 1) throw std::invalid_argument("policy: map size must be at least 9");
    if (avg_pool && sp % 2 != 0)
      throw std::invalid_argument("policy: avg_pool needs an even conv output extent");
    return avg_pool ? sp / 2 : sp;
  }
  int fc_in() const { return conv_channels * conv_out_spatial() * conv_out_spatial(); }
};

// Named parameter tensors with stable insertion order.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_[name] = int(names_.size());
    names_.push_back(name);
    tensors_.push_back(std::move(t));
    return tensors_.back();
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name) { return tensors_[size_t(idx(name))]; }
  const Tensor& at(const std::string& name) const { return tensors_[size_t(idx(name))]; }
  const std::vector<std::string>& names() const { return names_; }

  std::vector<std::string> names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const std::string& n : names_)
      if (n.rfind(prefix, 0) == 0) out.push_back(n);
    return out;
  }

  void save(const std::string& path) const {
    std::vector<std::pair<std::string, const Tensor*>> recs;
    for (std::size_t i = 0; i < names_.size(); ++i)
      recs.emplace_back(names_[i], &tensors_[i]);
    save_tensors(path, recs);
  }
  void load(const std::string& path) {
    for (auto& [name, t] : load_tensors(path)) {
      if (!has(name)) throw std::runtime_error("checkpoint has unknown tensor " + name);
      Tensor& dst = at(name);
      if (!dst.same_shape(t))
        throw std::runtime_error("checkpoint shape mismatch for " + name + ": " +
                                 t.shape_str() + " vs " + dst.shape_str());
      dst = std::move(t);
    }
  }

 private:
  int idx(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("unknown parameter " + name);
    return it->second;
  }
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, int> index_;
};

// theta' <- (1 - tau) theta' + tau theta for every tensor under from_prefix.
inline void soft_update(ParamSet& params, const std::string& from_prefix,
                        const std::string& to_prefix, double tau) {
  for (const std::string& name : params.names_with_prefix(from_prefix)) {
    const Tensor& src = params.at(name);
    Tensor& dst = params.at(to_prefix + name.substr(from_prefix.size()));
    for (std::size_t i = 0; i < src.size(); ++i)
      dst[i] = (1.0 - tau) * dst[i] + tau * src[i];
  }
}

// Which parameter groups each update is allowed to touch. Actor gradients
// never reach the shared encoder.
inline std::vector<std::string> critic_update_prefixes() {
  return {"encoder.", "critic1.", "critic2."};
}
inline std::vector<std::string> actor_update_prefixes() { return {"actor."}; }

// Builds tape leaves for parameters with caching; prefixes decide which
// leaves carry gradients.
class GraphBuilder {
 public:
  GraphBuilder(Tape& tape, const ParamSet& params,
               std::vector<std::string> trainable_prefixes)
      : tape_(tape), params_(params), prefixes_(std::move(trainable_prefixes)) {}

  Tape& tape() { return tape_; }

  bool trainable(const std::string& name) const {
    for (const std::string& p : prefixes_)
      if (name.rfind(p, 0) == 0) return true;
    return false;
  }

  NodeId param(const std::string& name) {
    auto it = leaves_.find(name);
    if (it != leaves_.end()) return it->second;
    const NodeId id = tape_.leaf(params_.at(name), trainable(name));
    leaves_.emplace(name, id);
    return id;
  }

  // Gradients of all trainable leaves (zero tensors for untouched ones).
  std::map<std::string, Tensor> gradients() {
    std::map<std::string, Tensor> out;
    for (const auto& [name, id] : leaves_) {
      if (!trainable(name)) continue;
      out.emplace(name, tape_.has_grad(id) ? tape_.grad(id)
                                           : Tensor::zeros(params_.at(name).shape()));
    }
    return out;
  }

 private:
  Tape& tape_;
  const ParamSet& params_;
  std::vector<std::string> prefixes_;
  std::map<std::string, NodeId> leaves_;
};

// -- goal action <-> map cell -----------------------------------------------

inline std::pair<int, int> action_to_cell(double a_row, double a_col, int m) {
  auto cvt = [m](double a) {
    const int c = int(std::lround((a + 1.0) / 2.0 * double(m - 1)));
    return std::clamp(c, 0, m - 1);
  };
  return {cvt(a_row), cvt(a_col)};
}

inline std::pair<double, double> cell_to_action(int r, int c, int m) {
  return {2.0 * double(r) / double(m - 1) - 1.0, 2.0 * double(c) / double(m - 1) - 1.0};
}

// ---------------------------------------------------------------------------

class PolicyNet {
 public:
  explicit PolicyNet(PolicyConfig cfg) : cfg_(cfg) {
    const int cin = cfg_.in_channels();
    const int cc = cfg_.conv_channels;
    add_conv("encoder.conv1", cc, cin);
    add_conv("encoder.conv2", cc, cc);
    add_conv("encoder.conv3", cc, cc);
    add_conv("encoder.conv4", cc, cc);
    add_linear("encoder.fc", cfg_.feature_dim, cfg_.fc_in());
    params_.add("encoder.ln.gamma", Tensor({cfg_.feature_dim}));
    params_.add("encoder.ln.beta", Tensor({cfg_.feature_dim}));
    const int actor_in = cfg_.feature_dim + cfg_.categories;
    add_linear("actor.l1", cfg_.hidden_dim, actor_in);
    add_linear("actor.l2", cfg_.hidden_dim, cfg_.hidden_dim);
    add_linear("actor.l3", 2 * cfg_.action_dim, cfg_.hidden_dim);
    const int critic_in = cfg_.feature_dim + cfg_.categories + cfg_.action_dim;
    for (const char* head : {"critic1", "critic2"}) {
      add_linear(std::string(head) + ".l1", cfg_.hidden_dim, critic_in);
      add_linear(std::string(head) + ".l2", cfg_.hidden_dim, cfg_.hidden_dim);
      add_linear(std::string(head) + ".l3", 1, cfg_.hidden_dim);
    }
    clone_group("encoder.", "target_encoder.");
    clone_group("critic1.", "target_critic1.");
    clone_group("critic2.", "target_critic2.");
  }

  const PolicyConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Orthogonal weights, zero biases, identity LayerNorm affine; targets start
  // as exact copies of the online parameters.
  void init(Rng& rng) {
    int draw = 0;
    for (const std::string& name : params_.names()) {
      if (name.rfind("target_", 0) == 0) continue;
      Tensor& t = params_.at(name);
      if (name.size() >= 7 && name.compare(name.size() - 7, 7, ".weight") == 0) {
        t = orthogonal_init(t.shape(), rng);
        ++draw;
      } else if (name == "encoder.ln.gamma") {
        t = Tensor::full(t.shape(), 1.0);
      } else {
        t = Tensor::zeros(t.shape());
      }
    }
    (void)draw;
    copy_group("encoder.", "target_encoder.");
    copy_group("critic1.", "target_critic1.");
    copy_group("critic2.", "target_critic2.");
  }

  void copy_group(const std::string& from, const std::string& to) {
    soft_update(params_, from, to, 1.0);
  }

  // -- forward-only evaluation ---------------------------------------------

  Tensor encode_eval(const std::string& enc, const Tensor& s) const {
    check_state_shape(s);
    Tensor h = s;
    for (int layer = 1; layer <= 4; ++layer) {
      const std::string base = enc + "conv" + std::to_string(layer);
      h = conv2d_forward(h, params_.at(base + ".weight"), params_.at(base + ".bias"));
      for (std::size_t i = 0; i < h.size(); ++i) h[i] = h[i] > 0.0 ? h[i] : 0.0;
    }
    if (cfg_.avg_pool) h = avg_pool2_forward(h);
    Tensor flat({int(h.size())});
    for (std::size_t i = 0; i < h.size(); ++i) flat[i] = h[i];
    Tensor fc = linear_forward(params_.at(enc + "fc.weight"), params_.at(enc + "fc.bias"), flat);
    Tensor ln = layer_norm_forward(fc, params_.at(enc + "ln.gamma"),
                                   params_.at(enc + "ln.beta"), 1e-5);
    for (std::size_t i = 0; i < ln.size(); ++i) ln[i] = std::tanh(ln[i]);
    return ln;
  }

  struct ActorOut {
    Tensor mean;     // [action_dim]
    Tensor log_std;  // [action_dim], clamped
  };

  ActorOut actor_eval(const Tensor& features, const Tensor& goal) const {
    Tensor h = mlp_eval("actor.", concat_vec({&features, &goal}), /*last_relu=*/false);
    ActorOut out{Tensor({cfg_.action_dim}), Tensor({cfg_.action_dim})};
    for (int i = 0; i < cfg_.action_dim; ++i) {
      out.mean[size_t(i)] = h[size_t(i)];
      out.log_std[size_t(i)] =
          std::clamp(h[size_t(cfg_.action_dim + i)], cfg_.log_std_min, cfg_.log_std_max);
    }
    return out;
  }

  struct SampleOut {
    Tensor action;    // tanh-squashed, in (-1, 1)^dim
    Tensor pre_tanh;  // u = mean + std * eps
    double log_prob = 0.0;
  };

  // Reparameterized sample; eps drawn from rng (one normal per dimension).
  SampleOut actor_sample_eval(const Tensor& features, const Tensor& goal, Rng& rng) const {
    Tensor eps({cfg_.action_dim});
    for (int i = 0; i < cfg_.action_dim; ++i) eps[size_t(i)] = rng.normal();
    return actor_sample_with_eps(features, goal, eps);
  }

  SampleOut actor_sample_with_eps(const Tensor& features, const Tensor& goal,
                                  const Tensor& eps) const {
    const ActorOut d = actor_eval(features, goal);
    SampleOut out{Tensor({cfg_.action_dim}), Tensor({cfg_.action_dim}), 0.0};
    for (int i = 0; i < cfg_.action_dim; ++i) {
      const double std = std::exp(d.log_std[size_t(i)]);
      const double u = d.mean[size_t(i)] + std * eps[size_t(i)];
      const double a = std::tanh(u);
      out.pre_tanh[size_t(i)] = u;
      out.action[size_t(i)] = a;
      out.log_prob += -0.5 * eps[size_t(i)] * eps[size_t(i)] - d.log_std[size_t(i)] -
                      0.5 * std::log(2.0 * kPi) - std::log(1.0 - a * a + 1e-6);
    }
    return out;
  }

  // Deterministic eval-mode action.
  Tensor actor_mean_action(const Tensor& features, const Tensor& goal) const {
    const ActorOut d = actor_eval(features, goal);
    Tensor a({cfg_.action_dim});
    for (int i = 0; i < cfg_.action_dim; ++i) a[size_t(i)] = std::tanh(d.mean[size_t(i)]);
    return a;
  }

  double q_eval(const std::string& critic, const Tensor& features, const Tensor& goal,
                const Tensor& action) const {
    Tensor h = mlp_eval(critic, concat_vec({&features, &goal, &action}), false);
    return h[0];
  }

  // -- graph building --------------------------------------------------------

  NodeId encode_graph(GraphBuilder& g, const std::string& enc, NodeId s) const {
    Tape& tp = g.tape();
    check_state_shape(tp.val(s));
    NodeId h = s;
    for (int layer = 1; layer <= 4; ++layer) {
      const std::string base = enc + "conv" + std::to_string(layer);
      h = tp.relu(tp.conv2d(h, g.param(base + ".weight"), g.param(base + ".bias")));
    }
    if (cfg_.avg_pool) h = tp.avg_pool2(h);
    h = tp.linear(g.param(enc + "fc.weight"), g.param(enc + "fc.bias"), flatten(tp, h));
    h = tp.layer_norm(h, g.param(enc + "ln.gamma"), g.param(enc + "ln.beta"), 1e-5);
    return tp.tanh_op(h);
  }

  struct ActorNodes {
    NodeId mean = -1;
    NodeId log_std = -1;
  };

  ActorNodes actor_graph(GraphBuilder& g, NodeId features, NodeId goal) const {
    Tape& tp = g.tape();
    NodeId h = mlp_graph(g, "actor.", tp.concat({features, goal}));
    ActorNodes out;
    out.mean = tp.slice(h, 0, cfg_.action_dim);
    out.log_std = tp.clamp(tp.slice(h, cfg_.action_dim, cfg_.action_dim),
                           cfg_.log_std_min, cfg_.log_std_max);
    return out;
  }

  struct SampleNodes {
    NodeId action = -1;
    NodeId log_prob = -1;  // scalar
  };

  // Reparameterized tanh-squashed sample with its log-density. eps enters as
  // an owned constant so the sample path carries the gradient.
  SampleNodes squashed_sample_graph(Tape& tp, const ActorNodes& d, Tensor eps) const {
    const int dim = cfg_.action_dim;
    NodeId eps_n = tp.value(std::move(eps));
    NodeId stddev = tp.exp_op(d.log_std);
    NodeId u = tp.add(d.mean, tp.mul(stddev, eps_n));
    NodeId a = tp.tanh_op(u);
    // log N(u | mean, std) reduces to -eps^2/2 - log_std - log(2 pi)/2 at the
    // reparameterized point; the tanh correction keeps the sample-path term.
    NodeId gauss = tp.add_scalar(
        tp.add(tp.sum(tp.scale(tp.square(eps_n), -0.5)), tp.sum(tp.scale(d.log_std, -1.0))),
        -0.5 * std::log(2.0 * kPi) * double(dim));
    NodeId one_minus_a2 = tp.add_scalar(tp.scale(tp.square(a), -1.0), 1.0 + 1e-6);
    NodeId corr = tp.sum(tp.log_op(one_minus_a2));
    return {a, tp.sub(gauss, corr)};
  }

  NodeId critic_graph(GraphBuilder& g, const std::string& critic, NodeId features,
                      NodeId goal, NodeId action) const {
    return mlp_graph(g, critic, g.tape().concat({features, goal, action}));
  }

 private:
  void add_conv(const std::string& base, int out_ch, int in_ch) {
    params_.add(base + ".weight", Tensor({out_ch, in_ch, 3, 3}));
    params_.add(base + ".bias", Tensor({out_ch}));
  }
  void add_linear(const std::string& base, int out, int in) {
    params_.add(base + ".weight", Tensor({out, in}));
    params_.add(base + ".bias", Tensor({out}));
  }
  void clone_group(const std::string& from, const std::string& to) {
    for (const std::string& name : params_.names_with_prefix(from))
      params_.add(to + name.substr(from.size()), Tensor(params_.at(name).shape()));
  }

  void check_state_shape(const Tensor& s) const {
    if (s.rank() != 3 || s.extent(0) != cfg_.in_channels() ||
        s.extent(1) != cfg_.map_size || s.extent(2) != cfg_.map_size)
      throw std::invalid_argument("encoder: expected state " +
                                  std::to_string(cfg_.in_channels()) + "x" +
                                  std::to_string(cfg_.map_size) + "x" +
                                  std::to_string(cfg_.map_size) + ", got " + s.shape_str());
  }

  static Tensor concat_vec(const std::vector<const Tensor*>& parts) {
    std::size_t total = 0;
    for (const Tensor* p : parts) total += p->size();
    Tensor out({int(total)});
    std::size_t off = 0;
    for (const Tensor* p : parts) {
      for (std::size_t i = 0; i < p->size(); ++i) out[off + i] = (*p)[i];
      off += p->size();
    }
    return out;
  }

  Tensor mlp_eval(const std::string& prefix, const Tensor& input, bool last_relu) const {
    Tensor h = input;
    for (int layer = 1; layer <= 3; ++layer) {
      const std::string base = prefix + "l" + std::to_string(layer);
      h = linear_forward(params_.at(base + ".weight"), params_.at(base + ".bias"), h);
      if (layer < 3 || last_relu)
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = h[i] > 0.0 ? h[i] : 0.0;
    }
    return h;
  }

  NodeId mlp_graph(GraphBuilder& g, const std::string& prefix, NodeId input) const {
    Tape& tp = g.tape();
    NodeId h = input;
    for (int layer = 1; layer <= 3; ++layer) {
      const std::string base = prefix + "l" + std::to_string(layer);
      h = tp.linear(g.param(base + ".weight"), g.param(base + ".bias"), h);
      if (layer < 3) h = tp.relu(h);
    }
    return h;
  }

  static NodeId flatten(Tape& tp, NodeId h) {
    // Row-major reshape to 1-d; values are shared, gradient passes through.
    return tp.reshape1d(h);
  }

  PolicyConfig cfg_;
  ParamSet params_;
};

}  // namespace objnav
