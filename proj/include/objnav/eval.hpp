#pragma once
// Episode orchestration, the Success / SPL / DTS metrics, the random-action
// baseline, paired trials, and the training and evaluation loops with their
// CSV logs.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "objnav/config.hpp"
#include "objnav/learner.hpp"
#include "objnav/local_policy.hpp"
#include "objnav/semantic_map.hpp"

namespace objnav {

struct EpisodeResult {
  bool success = false;
  bool valid = true;           // false: target unreachable from spawn, excluded
  bool stopped = false;        // agent issued stop
  double path_length = 0.0;    // p_i, meters
  double shortest_length = 0;  // l_i, meters
  double final_distance = 0;   // ||x_T - G||, meters
  double total_reward = 0.0;
  int steps = 0;
  int target = -1;

  double spl_term() const {
    if (!success) return 0.0;
    return shortest_length / std::max(path_length, shortest_length);
  }
  double dts(double d_s) const { return std::max(final_distance - d_s, 0.0); }
};

inline double success_rate(const std::vector<EpisodeResult>& rs) {
  std::size_t n = 0, s = 0;
  for (const EpisodeResult& r : rs)
    if (r.valid) {
      ++n;
      s += r.success;
    }
  return n == 0 ? 0.0 : double(s) / double(n);
}

inline double spl(const std::vector<EpisodeResult>& rs) {
  std::size_t n = 0;
  double acc = 0.0;
  for (const EpisodeResult& r : rs)
    if (r.valid) {
      ++n;
      acc += r.spl_term();
    }
  return n == 0 ? 0.0 : acc / double(n);
}

inline double mean_dts(const std::vector<EpisodeResult>& rs, double d_s) {
  std::size_t n = 0;
  double acc = 0.0;
  for (const EpisodeResult& r : rs)
    if (r.valid) {
      ++n;
      acc += r.dts(d_s);
    }
  return n == 0 ? 0.0 : acc / double(n);
}

inline Action random_action(Rng& rng) {
  switch (rng.uniform_int(0, 3)) {
    case 0: return Action::MoveForward;
    case 1: return Action::TurnLeft;
    case 2: return Action::TurnRight;
    default: return Action::Stop;
  }
}

inline Tensor one_hot(int categories, int idx) {
  Tensor g({categories});
  if (idx < 0 || idx >= categories)
    throw std::invalid_argument("one_hot: category out of range");
  g[size_t(idx)] = 1.0;
  return g;
}

// ---------------------------------------------------------------------------

struct RunConfig {
  std::uint64_t seed = 1;
  SceneConfig scene;
  SensorConfig sensor;
  PolicyConfig policy;
  LearnerConfig learner;
  PlannerConfig planner;
  int map_size = 64;
  int max_steps = 500;
  double success_distance = 1.0;  // d_s
  bool stop_required = false;     // success needs an explicit stop
  bool terminal_reward_only = false;
  bool dts_straight_line = false;
  double pose_noise_sigma = 0.0;
  int train_scenes = 10;
  int eval_scenes = 5;
  int episodes_per_scene = 200;
  long long train_steps = 30000;

  static std::set<std::string> known_keys() {
    return {
        "seed",
        "scene.width", "scene.height", "scene.cell_size", "scene.rooms_min",
        "scene.rooms_max", "scene.categories", "scene.max_instances",
        "sensor.rays", "sensor.fov_deg", "sensor.max_depth",
        "map.size",
        "policy.conv_channels", "policy.feature_dim", "policy.hidden_dim",
        "policy.log_std_min", "policy.log_std_max", "policy.avg_pool",
        "learner.gamma", "learner.batch_size", "learner.critic_lr",
        "learner.actor_lr", "learner.tau_q", "learner.tau_enc", "learner.alpha",
        "learner.k_aug", "learner.m_aug", "learner.buffer_capacity",
        "learner.auto_alpha",
        "target.entropy_term",
        "augment.kind", "augment.flip_prob",
        "episode.max_steps", "episode.goal_every", "episode.success_distance",
        "episode.success_mode", "episode.terminal_reward_only",
        "episode.dts_straight_line", "episode.pose_noise_sigma",
        "plan.unknown_free", "plan.dilate",
        "run.train_scenes", "run.eval_scenes", "run.episodes_per_scene",
        "run.train_steps",
    };
  }

  static RunConfig from_config(const Config& c) {
    c.check_known_keys(known_keys());
    RunConfig r;
    r.seed = resolve_seed(c, 1);
    r.scene.width = int(c.get_int("scene.width", 32));
    r.scene.height = int(c.get_int("scene.height", 32));
    r.scene.cell_size = c.get_double("scene.cell_size", 0.25);
    r.scene.rooms_min = int(c.get_int("scene.rooms_min", 2));
    r.scene.rooms_max = int(c.get_int("scene.rooms_max", 4));
    r.scene.categories = int(c.get_int("scene.categories", 6));
    r.scene.max_instances_per_category = int(c.get_int("scene.max_instances", 2));
    r.sensor.rays = int(c.get_int("sensor.rays", 64));
    r.sensor.fov = c.get_double("sensor.fov_deg", 79.0) * kPi / 180.0;
    r.sensor.max_depth = c.get_double("sensor.max_depth", 5.0);
    r.map_size = int(c.get_int("map.size", 64));
    r.policy.categories = r.scene.categories;
    r.policy.map_size = r.map_size;
    r.policy.conv_channels = int(c.get_int("policy.conv_channels", 32));
    r.policy.feature_dim = int(c.get_int("policy.feature_dim", 50));
    r.policy.hidden_dim = int(c.get_int("policy.hidden_dim", 1024));
    r.policy.log_std_min = c.get_double("policy.log_std_min", -20.0);
    r.policy.log_std_max = c.get_double("policy.log_std_max", 2.0);
    r.policy.avg_pool = c.get_bool("policy.avg_pool", false);
    r.learner.gamma = c.get_double("learner.gamma", 0.99);
    r.learner.batch_size = int(c.get_int("learner.batch_size", 8));
    r.learner.critic_lr = c.get_double("learner.critic_lr", 1e-3);
    r.learner.actor_lr = c.get_double("learner.actor_lr", 1e-3);
    r.learner.tau_q = c.get_double("learner.tau_q", 0.01);
    r.learner.tau_enc = c.get_double("learner.tau_enc", 0.05);
    r.learner.alpha = c.get_double("learner.alpha", 0.1);
    r.learner.k_aug = int(c.get_int("learner.k_aug", 2));
    r.learner.m_aug = int(c.get_int("learner.m_aug", 2));
    r.learner.buffer_capacity = std::size_t(c.get_int("learner.buffer_capacity", 40000));
    r.learner.auto_alpha = c.get_bool("learner.auto_alpha", false);
    r.learner.entropy_in_target = c.get_bool("target.entropy_term", true);
    r.learner.goal_every = int(c.get_int("episode.goal_every", 25));
    r.learner.augment.kind =
        augment_kind_from_string(c.get_string("augment.kind", "shift"));
    r.learner.augment.flip_prob = c.get_double("augment.flip_prob", 0.1);
    if (r.learner.augment.kind == AugmentKind::Grayscale) r.policy.input_channels = 3;
    r.planner.unknown_free = c.get_bool("plan.unknown_free", true);
    r.planner.dilate = int(c.get_int("plan.dilate", 1));
    r.max_steps = int(c.get_int("episode.max_steps", 500));
    r.success_distance = c.get_double("episode.success_distance", 1.0);
    r.stop_required = c.get_string("episode.success_mode", "proximity") == "stop";
    r.terminal_reward_only = c.get_bool("episode.terminal_reward_only", false);
    r.dts_straight_line = c.get_bool("episode.dts_straight_line", false);
    r.pose_noise_sigma = c.get_double("episode.pose_noise_sigma", 0.0);
    r.train_scenes = int(c.get_int("run.train_scenes", 10));
    r.eval_scenes = int(c.get_int("run.eval_scenes", 5));
    r.episodes_per_scene = int(c.get_int("run.episodes_per_scene", 200));
    r.train_steps = c.get_int("run.train_steps", 30000);
    return r;
  }
};

// Grayscale training runs the policy on the rendered luminance image; the
// other augmentations consume the raw (C+4)-channel state.
inline Tensor policy_input(const Tensor& state, AugmentKind kind) {
  if (kind == AugmentKind::Grayscale) return grayscale(render_rgb(state));
  return state;
}

inline std::optional<std::pair<int, int>> nearest_category_cell(const SemanticMap& map,
                                                                int category,
                                                                const MapPose& pose) {
  std::optional<std::pair<int, int>> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (int r = 0; r < map.size(); ++r)
    for (int c = 0; c < map.size(); ++c) {
      if (map.category(category, r, c) <= 0.0) continue;
      const double d = std::hypot(double(r) - pose.row, double(c) - pose.col);
      if (d < best_d) {
        best_d = d;
        best = {{r, c}};
      }
    }
  return best;
}

// Straight-line distance from the pose to the nearest instance cell center.
inline double straight_line_distance(const Scene& scene, const Pose& p, int category) {
  double best = std::numeric_limits<double>::infinity();
  for (const SceneObject& obj : scene.objects()) {
    if (obj.category != category) continue;
    for (const auto& [r, c] : obj.cells)
      best = std::min(best, std::hypot(p.x - (c + 0.5) * scene.cell_size(),
                                       p.y - (r + 0.5) * scene.cell_size()));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Episode runner.

struct EpisodeHooks {
  // Invoked as transitions close; when training interleaves updates, the
  // callback performs them before the episode continues.
  std::function<void(Transition)> on_transition;
};

inline EpisodeResult run_policy_episode(const Scene& scene, const RunConfig& cfg,
                                        const PolicyNet& net, bool stochastic,
                                        int target, const Pose& spawn, Rng rng,
                                        int max_steps, const EpisodeHooks& hooks = {}) {
  EpisodeResult res;
  res.target = target;
  const auto l0 = scene.geodesic_distance(spawn, target);
  if (!l0) {
    res.valid = false;
    return res;
  }
  res.shortest_length = *l0;

  const int m = cfg.map_size;
  const int cats = cfg.scene.categories;
  auto [map, start_mp] = new_map(cats, m, cfg.scene.cell_size);
  (void)start_mp;
  const MapFrame frame(spawn, m, cfg.scene.cell_size);
  VisitedTrace visited(m);
  Rng rollout_rng = rng.split(1);
  Rng noise_rng = rng.split(2);
  const bool collect = bool(hooks.on_transition);
  const Tensor goal_vec = one_hot(cats, target);

  Pose pose = spawn;
  DistanceField field;
  bool have_field = false;
  bool need_replan = false;
  bool goal_is_target = false;

  bool have_open = false;
  Tensor open_state, open_action;
  Pose open_pose;

  auto close_transition = [&](const MapPose& mp, bool done, const Pose& at) {
    if (!collect || !have_open) return;
    Transition t;
    t.state = std::move(open_state);
    t.action = open_action;
    t.next_state = state_tensor(map, mp, visited);
    t.goal = target;
    t.next_goal = target;
    t.done = done;
    if (cfg.terminal_reward_only) {
      t.reward = done ? (res.shortest_length -
                         scene.geodesic_distance(at, target).value_or(res.shortest_length))
                      : 0.0;
    } else {
      const RewardResult rr = goal_progress_reward(scene, open_pose, at, target);
      t.reward = rr.valid ? rr.value : 0.0;
    }
    res.total_reward += t.reward;
    have_open = false;
    hooks.on_transition(std::move(t));
  };

  int t_step = 0;
  for (; t_step < max_steps; ++t_step) {
    Pose odo = pose;
    if (cfg.pose_noise_sigma > 0.0) {
      odo.x += cfg.pose_noise_sigma * noise_rng.normal();
      odo.y += cfg.pose_noise_sigma * noise_rng.normal();
    }
    const MapPose mp = frame.to_map(odo);
    const auto [ar, ac] = std::pair<int, int>{map_cell(mp.row), map_cell(mp.col)};
    visited.mark(ar, ac);
    integrate(map, mp, observe(scene, pose, cfg.sensor));

    const auto geo = scene.geodesic_distance(pose, target);
    if (!cfg.stop_required && geo && *geo <= cfg.success_distance) {
      res.success = true;
      break;
    }

    const bool at_cadence = (t_step % cfg.learner.goal_every == 0);
    if (at_cadence || need_replan || !have_field) {
      if (at_cadence) close_transition(mp, false, pose);
      const Tensor s = state_tensor(map, mp, visited);
      std::pair<int, int> goal_cell;
      Tensor action({2});
      const auto seen = nearest_category_cell(map, target, mp);
      if (seen) {
        goal_cell = *seen;
        goal_is_target = true;
        const auto [a0, a1] = cell_to_action(goal_cell.first, goal_cell.second, m);
        action[0] = a0;
        action[1] = a1;
      } else {
        goal_is_target = false;
        const Tensor feats = net.encode_eval("encoder.", policy_input(s, cfg.learner.augment.kind));
        if (stochastic) {
          action = net.actor_sample_eval(feats, goal_vec, rollout_rng).action;
        } else {
          action = net.actor_mean_action(feats, goal_vec);
        }
        goal_cell = action_to_cell(action[0], action[1], m);
      }
      field = fmm_solve(planning_grid(map, cfg.planner, ar, ac), m, goal_cell.first,
                        goal_cell.second);
      have_field = true;
      need_replan = false;
      if (collect && at_cadence) {
        open_state = s;
        open_action = action;
        open_pose = pose;
        have_open = true;
      }
    }

    LocalDecision dec = extract_action(field, mp, cfg.scene.cell_size, cfg.success_distance);
    if (dec == LocalDecision::Replan) {
      need_replan = true;
      dec = LocalDecision::TurnLeft;
    } else if (dec == LocalDecision::Stop) {
      if (goal_is_target) {
        res.stopped = true;
        res.success = geo && *geo <= cfg.success_distance;
        break;
      }
      // Reached an exploratory goal: ask the actor for a new one.
      need_replan = true;
      dec = LocalDecision::TurnLeft;
    }

    const StepResult sr = step(scene, pose, to_action(dec));
    if (sr.collided) need_replan = true;
    res.path_length += std::hypot(sr.pose.x - pose.x, sr.pose.y - pose.y);
    pose = sr.pose;
  }

  res.steps = t_step;
  const MapPose final_mp = frame.to_map(pose);
  close_transition(final_mp, true, pose);
  res.final_distance = cfg.dts_straight_line
                           ? straight_line_distance(scene, pose, target)
                           : scene.geodesic_distance(pose, target).value_or(
                                 std::numeric_limits<double>::infinity());
  return res;
}

inline EpisodeResult run_random_episode(const Scene& scene, const RunConfig& cfg,
                                        int target, const Pose& spawn, Rng rng,
                                        int max_steps) {
  EpisodeResult res;
  res.target = target;
  const auto l0 = scene.geodesic_distance(spawn, target);
  if (!l0) {
    res.valid = false;
    return res;
  }
  res.shortest_length = *l0;
  Rng act_rng = rng.split(1);
  Pose pose = spawn;
  int t_step = 0;
  for (; t_step < max_steps; ++t_step) {
    const auto geo = scene.geodesic_distance(pose, target);
    if (!cfg.stop_required && geo && *geo <= cfg.success_distance) {
      res.success = true;
      break;
    }
    const Action a = random_action(act_rng);
    const StepResult sr = step(scene, pose, a);
    if (sr.stopped) {
      res.stopped = true;
      res.success = geo && *geo <= cfg.success_distance;
      break;
    }
    res.path_length += std::hypot(sr.pose.x - pose.x, sr.pose.y - pose.y);
    pose = sr.pose;
  }
  res.steps = t_step;
  res.final_distance = cfg.dts_straight_line
                           ? straight_line_distance(scene, pose, target)
                           : scene.geodesic_distance(pose, target).value_or(
                                 std::numeric_limits<double>::infinity());
  return res;
}

// ---------------------------------------------------------------------------
// Training loop: episodes over the training scenes, transitions at goal
// cadence, one critic + one actor update per stored transition, CSV log with
// one row per episode.

constexpr std::uint64_t kSaltTrainScene = 0x100000ull;
constexpr std::uint64_t kSaltEvalScene = 0x200000ull;
constexpr std::uint64_t kSaltEpisode = 0x300000ull;

inline std::string csv_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct TrainResult {
  std::string csv;  // full log contents
  long long steps = 0;
  int episodes = 0;
};

inline TrainResult train(DrqLearner& learner, const RunConfig& cfg) {
  const Rng root(cfg.seed);
  std::vector<Scene> scenes;
  for (int i = 0; i < cfg.train_scenes; ++i)
    scenes.push_back(Scene::generate(cfg.scene, root.split(kSaltTrainScene + std::uint64_t(i)).seed()));

  TrainResult out;
  std::string& csv = out.csv;
  csv = "step,critic_loss,actor_loss,episode_reward,success,spl,dts\n";

  long long global_step = 0;
  int episode = 0;
  while (global_step < cfg.train_steps) {
    const Scene& scene = scenes[std::size_t(episode % cfg.train_scenes)];
    Rng ep_rng = root.split(kSaltEpisode + std::uint64_t(episode));
    Rng draw = ep_rng.split(0);
    const Pose spawn = scene.sample_free_pose(draw);
    const int target = draw.uniform_int(0, cfg.scene.categories - 1);

    double critic_sum = 0.0, actor_sum = 0.0;
    int updates = 0;
    EpisodeHooks hooks;
    hooks.on_transition = [&](Transition t) {
      learner.push(std::move(t));
      const auto cl = learner.update_critic();
      const auto al = learner.update_actor();
      if (cl && al) {
        critic_sum += *cl;
        actor_sum += *al;
        ++updates;
      }
    };
    const int budget = int(std::min<long long>(cfg.max_steps, cfg.train_steps - global_step));
    const EpisodeResult r = run_policy_episode(scene, cfg, learner.net(), true, target,
                                               spawn, ep_rng.split(1), budget, hooks);
    global_step += r.steps;
    ++episode;

    csv += std::to_string(global_step) + "," +
           csv_num(updates ? critic_sum / updates : 0.0) + "," +
           csv_num(updates ? actor_sum / updates : 0.0) + "," +
           csv_num(r.total_reward) + "," + std::to_string(int(r.success)) + "," +
           csv_num(r.spl_term()) + "," + csv_num(r.dts(cfg.success_distance)) + "\n";
    // Instant-success episodes consume no steps; cap the episode count so a
    // degenerate setup cannot spin forever.
    if (episode > cfg.train_steps) break;
  }
  out.steps = global_step;
  out.episodes = episode;
  return out;
}

// ---------------------------------------------------------------------------
// Paired evaluation on held-out scenes. Scene, spawn and target draws depend
// only on (pair_seed, scene index, episode index), never on the method.

enum class EvalMethod { Trained, Random };

struct EvalRun {
  std::vector<EpisodeResult> episodes;
  std::string csv;
  double success = 0.0, spl_value = 0.0, dts_value = 0.0;
  int excluded = 0;
};

inline EvalRun evaluate(const PolicyNet* net, EvalMethod method, const RunConfig& cfg,
                        const std::vector<Scene>& scenes, int episodes_per_scene,
                        std::uint64_t pair_seed) {
  EvalRun run;
  run.csv = "scene_seed,episode,target,success,spl,dts,path_length,shortest_length,steps,valid\n";
  const Rng pair_root(pair_seed);
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const Scene& scene = scenes[si];
    for (int ep = 0; ep < episodes_per_scene; ++ep) {
      Rng ep_rng = pair_root.split(std::uint64_t(si) * 1000003ull + std::uint64_t(ep));
      Rng draw = ep_rng.split(0);
      const Pose spawn = scene.sample_free_pose(draw);
      const int target = draw.uniform_int(0, cfg.scene.categories - 1);
      EpisodeResult r;
      if (method == EvalMethod::Trained) {
        r = run_policy_episode(scene, cfg, *net, false, target, spawn, ep_rng.split(1),
                               cfg.max_steps);
      } else {
        r = run_random_episode(scene, cfg, target, spawn, ep_rng.split(2), cfg.max_steps);
      }
      run.csv += std::to_string(scene.seed()) + "," + std::to_string(ep) + "," +
                 std::to_string(r.target) + "," + std::to_string(int(r.success)) + "," +
                 csv_num(r.spl_term()) + "," + csv_num(r.dts(cfg.success_distance)) + "," +
                 csv_num(r.path_length) + "," + csv_num(r.shortest_length) + "," +
                 std::to_string(r.steps) + "," + std::to_string(int(r.valid)) + "\n";
      if (!r.valid) ++run.excluded;
      run.episodes.push_back(r);
    }
  }
  run.success = success_rate(run.episodes);
  run.spl_value = spl(run.episodes);
  run.dts_value = mean_dts(run.episodes, cfg.success_distance);
  return run;
}

inline std::vector<Scene> make_eval_scenes(const RunConfig& cfg) {
  const Rng root(cfg.seed);
  std::vector<Scene> scenes;
  for (int i = 0; i < cfg.eval_scenes; ++i)
    scenes.push_back(Scene::generate(cfg.scene, root.split(kSaltEvalScene + std::uint64_t(i)).seed()));
  return scenes;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << content;
}

}  // namespace objnav
