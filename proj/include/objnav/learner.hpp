#pragma once
// Replay buffer and the data-regularized actor-critic updates: targets
// averaged over K sampled transforms of the next state, the critic loss
// averaged over M sampled transforms of the current state, soft target
// updates, and the geodesic-progress reward.
//
// Every stochastic choice inside an update comes from a stream split off the
// update's root rng by a fixed salt, so single components can be replayed
// exactly (the augmentation-averaging contract) and finite-difference probes
// see a deterministic loss.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "objnav/augment.hpp"
#include "objnav/optim.hpp"
#include "objnav/policy.hpp"
#include "objnav/scene.hpp"

namespace objnav {

struct Transition {
  Tensor state;
  Tensor action;  // [2], tanh-squashed goal
  double reward = 0.0;
  Tensor next_state;
  int goal = -1;       // category id
  int next_goal = -1;  // equals goal within an episode
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("replay buffer: capacity must be positive");
  }

  void push(Transition t) {
    if (!std::isfinite(t.reward))
      throw std::invalid_argument("replay buffer: non-finite reward");
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_[i]; }

  const Transition& sample(Rng& rng) const {
    return data_[std::size_t(rng.uniform_int(0, int(data_.size()) - 1))];
  }
  std::size_t sample_index(Rng& rng) const {
    return std::size_t(rng.uniform_int(0, int(data_.size()) - 1));
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> data_;
};

struct LearnerConfig {
  double gamma = 0.99;
  int batch_size = 8;
  double critic_lr = 1e-3;
  double actor_lr = 1e-3;
  double tau_q = 0.01;
  double tau_enc = 0.05;
  double alpha = 0.1;  // fixed temperature unless auto_alpha
  int k_aug = 2;       // target-side transform count (Eq. 1)
  int m_aug = 2;       // critic-side transform count (Eq. 2)
  int goal_every = 25;
  std::size_t buffer_capacity = 40000;
  bool entropy_in_target = true;
  bool auto_alpha = false;
  double alpha_lr = 1e-3;
  AugmentConfig augment;
};

struct RewardResult {
  double value = 0.0;
  bool valid = true;
};

// Decrease in geodesic distance to the nearest instance of the target
// category between consecutive goal-sampling steps.
inline RewardResult goal_progress_reward(const Scene& scene, const Pose& prev,
                                         const Pose& cur, int category) {
  const auto d_prev = scene.geodesic_distance(prev, category);
  const auto d_cur = scene.geodesic_distance(cur, category);
  if (!d_prev || !d_cur) return {0.0, false};
  return {*d_prev - *d_cur, true};
}

class DrqLearner {
 public:
  DrqLearner(PolicyConfig pcfg, LearnerConfig lcfg, std::uint64_t seed)
      : net_(pcfg),
        cfg_(lcfg),
        buffer_(lcfg.buffer_capacity),
        rng_root_(seed),
        critic_opt_(AdamConfig{lcfg.critic_lr, 0.9, 0.999, 1e-8}),
        actor_opt_(AdamConfig{lcfg.actor_lr, 0.9, 0.999, 1e-8}),
        alpha_opt_(AdamConfig{lcfg.alpha_lr, 0.9, 0.999, 1e-8}),
        log_alpha_({1}) {
    Rng init_rng = rng_root_.split(kSaltInit);
    net_.init(init_rng);
    log_alpha_[0] = std::log(lcfg.alpha);
  }

  PolicyNet& net() { return net_; }
  const PolicyNet& net() const { return net_; }
  ReplayBuffer& buffer() { return buffer_; }
  const LearnerConfig& config() const { return cfg_; }
  double alpha() const { return cfg_.auto_alpha ? std::exp(log_alpha_[0]) : cfg_.alpha; }
  const Adam& critic_optimizer() const { return critic_opt_; }
  const Adam& actor_optimizer() const { return actor_opt_; }

  void push(Transition t) { buffer_.push(std::move(t)); }

  // -- stream salts -----------------------------------------------------------

  static std::uint64_t batch_salt() { return 1; }
  static std::uint64_t target_salt(int i, int k) {
    return 0x100ull + std::uint64_t(i) * 64 + std::uint64_t(k);
  }
  static std::uint64_t critic_aug_salt(int i, int m) {
    return 0x10000ull + std::uint64_t(i) * 64 + std::uint64_t(m);
  }
  static std::uint64_t actor_salt(int i) { return 0x20000ull + std::uint64_t(i); }

  // -- target computation (Eq. 1) ---------------------------------------------

  // One transform's contribution for a single transition: draw nu from the
  // stream, sample a' ~ pi(.|f(s',nu),g') with the online actor, evaluate the
  // clipped target critic, subtract the entropy term.
  double target_component(const Transition& t, Rng stream) const {
    const TransformParam p = draw_transform(cfg_.augment, stream);
    const Tensor s2 = apply_transform(t.next_state, p);
    const Tensor feats = net_.encode_eval("encoder.", s2);
    const Tensor goal = goal_onehot(t.next_goal);
    const PolicyNet::SampleOut sample = net_.actor_sample_eval(feats, goal, stream);
    const Tensor target_feats = net_.encode_eval("target_encoder.", s2);
    const double q1 = net_.q_eval("target_critic1.", target_feats, goal, sample.action);
    const double q2 = net_.q_eval("target_critic2.", target_feats, goal, sample.action);
    double v = std::min(q1, q2);
    if (cfg_.entropy_in_target) v -= alpha() * sample.log_prob;
    return v;
  }

  // y_i = r_i + gamma (1 - done_i) * mean_k of target components.
  std::vector<double> compute_target(const std::vector<const Transition*>& batch,
                                     const Rng& update_rng) const {
    std::vector<double> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Transition& t = *batch[i];
      if (t.done) {
        y[i] = t.reward;
        continue;
      }
      double acc = 0.0;
      for (int k = 0; k < cfg_.k_aug; ++k)
        acc += target_component(t, update_rng.split(target_salt(int(i), k)));
      y[i] = t.reward + cfg_.gamma * (acc / double(cfg_.k_aug));
    }
    return y;
  }

  // -- losses -------------------------------------------------------------------

  // J_Q = 1/(N M) sum_{i,m} [(Q1(f(s_i,nu_im),a_i,g_i)-y_i)^2 + (Q2(...)-y_i)^2]
  double critic_loss(const std::vector<const Transition*>& batch,
                     const std::vector<double>& targets, const Rng& update_rng,
                     std::map<std::string, Tensor>* grads_out) const {
    Tape tape;
    GraphBuilder g(tape, net_.params(), critic_update_prefixes());
    NodeId total = -1;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Transition& t = *batch[i];
      const NodeId goal = tape.value(goal_onehot(t.goal));
      const NodeId action = tape.value(t.action);
      const NodeId y = tape.value(Tensor::scalar(targets[i]));
      for (int m = 0; m < cfg_.m_aug; ++m) {
        Rng stream = update_rng.split(critic_aug_salt(int(i), m));
        const TransformParam p = draw_transform(cfg_.augment, stream);
        const NodeId s = tape.value(apply_transform(t.state, p));
        const NodeId feats = net_.encode_graph(g, "encoder.", s);
        const NodeId q1 = net_.critic_graph(g, "critic1.", feats, goal, action);
        const NodeId q2 = net_.critic_graph(g, "critic2.", feats, goal, action);
        const NodeId term =
            tape.add(tape.square(tape.sub(q1, y)), tape.square(tape.sub(q2, y)));
        total = total < 0 ? term : tape.add(total, term);
      }
    }
    const NodeId loss =
        tape.scale(total, 1.0 / (double(batch.size()) * double(cfg_.m_aug)));
    if (grads_out) {
      tape.backward(loss);
      *grads_out = g.gradients();
    }
    return tape.val(loss)[0];
  }

  // J_pi = mean_i [alpha log pi(a|f(s_i,nu_i),g_i) - min Q(f(s_i,nu_i),a,g_i)],
  // a reparameterized; encoder features are detached so actor gradients stay
  // inside the actor MLP.
  double actor_loss(const std::vector<const Transition*>& batch, const Rng& update_rng,
                    std::map<std::string, Tensor>* grads_out,
                    double* mean_log_prob = nullptr) const {
    Tape tape;
    GraphBuilder g(tape, net_.params(), actor_update_prefixes());
    NodeId total = -1;
    NodeId logp_total = -1;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Transition& t = *batch[i];
      Rng stream = update_rng.split(actor_salt(int(i)));
      const TransformParam p = draw_transform(cfg_.augment, stream);
      Tensor eps({net_.config().action_dim});
      for (int d = 0; d < net_.config().action_dim; ++d) eps[size_t(d)] = stream.normal();
      const Tensor s_aug = apply_transform(t.state, p);
      const NodeId feats = tape.value(net_.encode_eval("encoder.", s_aug));
      const NodeId goal = tape.value(goal_onehot(t.goal));
      const PolicyNet::ActorNodes dist = net_.actor_graph(g, feats, goal);
      const PolicyNet::SampleNodes sample =
          net_.squashed_sample_graph(tape, dist, std::move(eps));
      const NodeId q1 = net_.critic_graph(g, "critic1.", feats, goal, sample.action);
      const NodeId q2 = net_.critic_graph(g, "critic2.", feats, goal, sample.action);
      const NodeId term =
          tape.sub(tape.scale(sample.log_prob, alpha()), tape.min2(q1, q2));
      total = total < 0 ? term : tape.add(total, term);
      logp_total = logp_total < 0 ? sample.log_prob : tape.add(logp_total, sample.log_prob);
    }
    const NodeId loss = tape.scale(total, 1.0 / double(batch.size()));
    if (mean_log_prob) *mean_log_prob = tape.val(logp_total)[0] / double(batch.size());
    if (grads_out) {
      tape.backward(loss);
      *grads_out = g.gradients();
    }
    return tape.val(loss)[0];
  }

  // -- updates --------------------------------------------------------------

  // Underfull buffer is a no-op signalled by nullopt.
  std::optional<double> update_critic() {
    if (buffer_.size() < std::size_t(cfg_.batch_size)) return std::nullopt;
    const Rng u = rng_root_.split(kSaltCriticUpdate + critic_updates_);
    const auto batch = sample_batch(u);
    return std::optional<double>(update_critic_on_batch(batch, u));
  }

  double update_critic_on_batch(const std::vector<const Transition*>& batch,
                                const Rng& update_rng) {
    const std::vector<double> targets = compute_target(batch, update_rng);
    std::map<std::string, Tensor> grads;
    const double loss = critic_loss(batch, targets, update_rng, &grads);
    auto tensors = param_pointers(critic_update_prefixes());
    critic_opt_.step(tensors, grads);
    soft_update(net_.params(), "critic1.", "target_critic1.", cfg_.tau_q);
    soft_update(net_.params(), "critic2.", "target_critic2.", cfg_.tau_q);
    soft_update(net_.params(), "encoder.", "target_encoder.", cfg_.tau_enc);
    ++critic_updates_;
    return loss;
  }

  std::optional<double> update_actor() {
    if (buffer_.size() < std::size_t(cfg_.batch_size)) return std::nullopt;
    const Rng u = rng_root_.split(kSaltActorUpdate + actor_updates_);
    const auto batch = sample_batch(u);
    return std::optional<double>(update_actor_on_batch(batch, u));
  }

  double update_actor_on_batch(const std::vector<const Transition*>& batch,
                               const Rng& update_rng) {
    std::map<std::string, Tensor> grads;
    double mean_logp = 0.0;
    const double loss = actor_loss(batch, update_rng, &grads, &mean_logp);
    auto tensors = param_pointers(actor_update_prefixes());
    actor_opt_.step(tensors, grads);
    if (cfg_.auto_alpha) {
      // d/dlog_alpha of -exp(log_alpha) (log_pi + target_entropy), detached.
      const double target_entropy = -double(net_.config().action_dim);
      Tensor g({1});
      g[0] = -std::exp(log_alpha_[0]) * (mean_logp + target_entropy);
      std::map<std::string, Tensor*> p{{"log_alpha", &log_alpha_}};
      std::map<std::string, Tensor> gm;
      gm.emplace("log_alpha", std::move(g));
      alpha_opt_.step(p, gm);
    }
    ++actor_updates_;
    return loss;
  }

  Tensor goal_onehot(int category) const {
    Tensor g({net_.config().categories});
    if (category < 0 || category >= net_.config().categories)
      throw std::invalid_argument("goal category out of range");
    g[size_t(category)] = 1.0;
    return g;
  }

  std::vector<const Transition*> sample_batch(const Rng& update_rng) const {
    Rng s = update_rng.split(batch_salt());
    std::vector<const Transition*> batch;
    batch.reserve(std::size_t(cfg_.batch_size));
    for (int i = 0; i < cfg_.batch_size; ++i) batch.push_back(&buffer_.at(buffer_.sample_index(s)));
    return batch;
  }

  std::uint64_t critic_update_count() const { return critic_updates_; }
  std::uint64_t actor_update_count() const { return actor_updates_; }

 private:
  static constexpr std::uint64_t kSaltInit = 0x01;
  static constexpr std::uint64_t kSaltCriticUpdate = 0x1000000000ull;
  static constexpr std::uint64_t kSaltActorUpdate = 0x2000000000ull;

  std::map<std::string, Tensor*> param_pointers(const std::vector<std::string>& prefixes) {
    std::map<std::string, Tensor*> out;
    for (const std::string& prefix : prefixes)
      for (const std::string& name : net_.params().names_with_prefix(prefix))
        out[name] = &net_.params().at(name);
    return out;
  }

  PolicyNet net_;
  LearnerConfig cfg_;
  ReplayBuffer buffer_;
  Rng rng_root_;
  Adam critic_opt_;
  Adam actor_opt_;
  Adam alpha_opt_;
  Tensor log_alpha_;
  std::uint64_t critic_updates_ = 0;
  std::uint64_t actor_updates_ = 0;
};

}  // namespace objnav
