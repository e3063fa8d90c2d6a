#include <catch2/catch_amalgamated.hpp>

#include "objnav/eval.hpp"

using namespace objnav;

namespace {

EpisodeResult make_result(bool success, double p, double l, double final_d) {
  EpisodeResult r;
  r.success = success;
  r.path_length = p;
  r.shortest_length = l;
  r.final_distance = final_d;
  return r;
}

RunConfig small_run_config() {
  RunConfig cfg;
  cfg.scene.width = 20;
  cfg.scene.height = 20;
  cfg.scene.categories = 3;
  cfg.map_size = 32;
  cfg.policy.categories = 3;
  cfg.policy.map_size = 32;
  cfg.policy.hidden_dim = 32;
  cfg.learner.batch_size = 4;
  cfg.learner.buffer_capacity = 512;
  cfg.max_steps = 120;
  return cfg;
}

}  // namespace

TEST_CASE("success rate over mixed outcomes", "[eval]") {
  std::vector<EpisodeResult> all(4);
  all[0].success = true;
  all[2].success = true;
  REQUIRE(success_rate(all) == 0.5);
  for (auto& r : all) r.success = true;
  REQUIRE(success_rate(all) == 1.0);
  for (auto& r : all) r.success = false;
  REQUIRE(success_rate(all) == 0.0);
}

TEST_CASE("spl formula unit cases", "[eval]") {
  REQUIRE(make_result(true, 4.0, 4.0, 0.0).spl_term() == 1.0);
  REQUIRE(make_result(true, 8.0, 4.0, 0.0).spl_term() == 0.5);
  REQUIRE(make_result(false, 8.0, 4.0, 0.0).spl_term() == 0.0);
  // Shorter-than-shortest traversal cannot exceed 1.
  REQUIRE(make_result(true, 2.0, 4.0, 0.0).spl_term() == 1.0);

  std::vector<EpisodeResult> batch = {
      make_result(true, 5.0, 5.0, 0.0),   // 1.0
      make_result(true, 10.0, 5.0, 0.0),  // 0.5
      make_result(false, 3.0, 5.0, 2.0),  // 0
      make_result(true, 6.0, 3.0, 0.0),   // 0.5
  };
  REQUIRE(spl(batch) == Catch::Approx((1.0 + 0.5 + 0.0 + 0.5) / 4.0).epsilon(1e-12));
}

TEST_CASE("dts clamps at the success threshold", "[eval]") {
  REQUIRE(make_result(false, 0, 1, 0.5).dts(1.0) == 0.0);
  REQUIRE(make_result(false, 0, 1, 2.05).dts(1.0) == Catch::Approx(1.05).margin(1e-12));
  REQUIRE(make_result(false, 0, 1, 1.0).dts(1.0) == 0.0);
}

TEST_CASE("spl never exceeds the success rate", "[eval]") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EpisodeResult> rs;
    for (int i = 0; i < 20; ++i) {
      EpisodeResult r = make_result(rng.uniform() < 0.5, rng.uniform(0.1, 10.0),
                                    rng.uniform(0.1, 10.0), rng.uniform(0.0, 5.0));
      rs.push_back(r);
    }
    REQUIRE(spl(rs) <= success_rate(rs) + 1e-12);
  }
}

TEST_CASE("random agent draws each action a quarter of the time", "[eval]") {
  Rng rng(2027);
  std::array<int, 4> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[std::size_t(static_cast<int>(random_action(rng)))]++;
  for (int a = 0; a < 4; ++a)
    REQUIRE(std::abs(double(counts[std::size_t(a)]) / n - 0.25) <= 0.02);

  Rng a(3), b(3);
  for (int i = 0; i < 100; ++i) REQUIRE(random_action(a) == random_action(b));
}

TEST_CASE("random episodes can self-terminate by stopping", "[eval]") {
  RunConfig cfg = small_run_config();
  Scene scene = Scene::generate(cfg.scene, 11);
  Rng rng(7);
  int early = 0;
  for (int i = 0; i < 20; ++i) {
    Rng draw = rng.split(std::uint64_t(i));
    const Pose spawn = scene.sample_free_pose(draw);
    EpisodeResult r =
        run_random_episode(scene, cfg, 0, spawn, rng.split(1000 + std::uint64_t(i)), cfg.max_steps);
    if (r.stopped) ++early;
  }
  REQUIRE(early > 0);
}

TEST_CASE("spawning inside the success radius succeeds immediately", "[eval]") {
  RunConfig cfg = small_run_config();
  Scene scene = Scene::generate(cfg.scene, 13);
  PolicyNet net(cfg.policy);
  Rng rng(1);
  net.init(rng);
  // Find a free cell within d_s of category 0.
  Pose spawn;
  bool found = false;
  for (int r = 0; r < scene.height() && !found; ++r)
    for (int c = 0; c < scene.width() && !found; ++c) {
      if (scene.occupied(r, c)) continue;
      Pose p{(c + 0.5) * scene.cell_size(), (r + 0.5) * scene.cell_size(), 0.0};
      auto d = scene.geodesic_distance(p, 0);
      if (d && *d <= cfg.success_distance) {
        spawn = p;
        found = true;
      }
    }
  REQUIRE(found);
  EpisodeResult res =
      run_policy_episode(scene, cfg, net, false, 0, spawn, Rng(5), cfg.max_steps);
  REQUIRE(res.success);
  REQUIRE(res.steps == 0);
  REQUIRE(res.spl_term() == 1.0);
  REQUIRE(res.dts(cfg.success_distance) == 0.0);
}

TEST_CASE("episodes that never reach the target time out unsuccessfully", "[eval]") {
  RunConfig cfg = small_run_config();
  cfg.max_steps = 3;  // far too few steps to reach anything
  Scene scene = Scene::generate(cfg.scene, 17);
  PolicyNet net(cfg.policy);
  Rng rng(2);
  net.init(rng);
  Rng draw(10);
  Pose spawn = scene.sample_free_pose(draw);
  // Pick a target at least 2 m away so 3 steps cannot reach it.
  int target = -1;
  for (int cat = 0; cat < cfg.scene.categories; ++cat) {
    auto d = scene.geodesic_distance(spawn, cat);
    if (d && *d > 2.0) target = cat;
  }
  REQUIRE(target >= 0);
  EpisodeResult res =
      run_policy_episode(scene, cfg, net, false, target, spawn, Rng(6), cfg.max_steps);
  REQUIRE_FALSE(res.success);
  REQUIRE(res.steps == 3);
  REQUIRE(res.dts(cfg.success_distance) > 0.0);
}

TEST_CASE("dts is zero whenever the episode succeeded", "[eval]") {
  RunConfig cfg = small_run_config();
  Scene scene = Scene::generate(cfg.scene, 19);
  PolicyNet net(cfg.policy);
  Rng rng(3);
  net.init(rng);
  int successes = 0;
  for (int i = 0; i < 10; ++i) {
    Rng ep(100 + std::uint64_t(i));
    Rng draw = ep.split(0);
    const Pose spawn = scene.sample_free_pose(draw);
    const int target = draw.uniform_int(0, cfg.scene.categories - 1);
    EpisodeResult r =
        run_policy_episode(scene, cfg, net, false, target, spawn, ep.split(1), cfg.max_steps);
    if (r.success) {
      ++successes;
      // Proximity success: geodesic final distance is at most d_s.
      REQUIRE(r.dts(cfg.success_distance) == 0.0);
    }
  }
  REQUIRE(successes > 0);  // untrained policy still reaches some targets
}

TEST_CASE("paired evaluation shows both methods identical draws", "[eval]") {
  RunConfig cfg = small_run_config();
  cfg.eval_scenes = 2;
  std::vector<Scene> scenes;
  for (int i = 0; i < cfg.eval_scenes; ++i)
    scenes.push_back(Scene::generate(cfg.scene, 40 + std::uint64_t(i)));
  PolicyNet net(cfg.policy);
  Rng rng(4);
  net.init(rng);

  EvalRun trained = evaluate(&net, EvalMethod::Trained, cfg, scenes, 5, 777);
  EvalRun random = evaluate(nullptr, EvalMethod::Random, cfg, scenes, 5, 777);

  auto column = [](const std::string& csv, int col) {
    std::vector<std::string> out;
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string field;
      for (int i = 0; i <= col; ++i) std::getline(ls, field, ',');
      out.push_back(field);
    }
    return out;
  };
  REQUIRE(column(trained.csv, 0) == column(random.csv, 0));  // scene seeds
  REQUIRE(column(trained.csv, 2) == column(random.csv, 2));  // targets

  // Re-running the same method reproduces the bytes.
  EvalRun again = evaluate(&net, EvalMethod::Trained, cfg, scenes, 5, 777);
  REQUIRE(again.csv == trained.csv);
}

TEST_CASE("short training runs are byte-deterministic", "[eval]") {
  RunConfig cfg = small_run_config();
  cfg.scene.width = 16;
  cfg.scene.height = 16;
  cfg.map_size = 32;
  cfg.policy.map_size = 32;
  cfg.train_scenes = 2;
  cfg.train_steps = 120;
  cfg.max_steps = 60;
  cfg.seed = 21;
  auto run_once = [&]() {
    DrqLearner learner(cfg.policy, cfg.learner, cfg.seed);
    return train(learner, cfg).csv;
  };
  const std::string a = run_once();
  const std::string b = run_once();
  REQUIRE(a == b);
  REQUIRE(a.find("step,critic_loss,actor_loss,episode_reward,success,spl,dts") == 0);
}

TEST_CASE("training writes one csv row per episode and updates occur", "[eval]") {
  RunConfig cfg = small_run_config();
  cfg.scene.width = 16;
  cfg.scene.height = 16;
  cfg.map_size = 32;
  cfg.policy.map_size = 32;
  cfg.train_scenes = 1;
  cfg.train_steps = 150;
  cfg.max_steps = 75;
  cfg.learner.goal_every = 10;
  cfg.seed = 31;
  DrqLearner learner(cfg.policy, cfg.learner, cfg.seed);
  TrainResult res = train(learner, cfg);
  REQUIRE(res.steps >= cfg.train_steps);
  REQUIRE(res.episodes >= 2);
  REQUIRE(learner.critic_update_count() > 0);
  REQUIRE(learner.actor_update_count() == learner.critic_update_count());
  const auto lines = std::count(res.csv.begin(), res.csv.end(), '\n');
  REQUIRE(lines == res.episodes + 1);
}

TEST_CASE("mapping fidelity: scripted sweep reaches high obstacle IoU", "[eval]") {
  SceneConfig scfg;  // default desk scale, 32x32 cells
  for (std::uint64_t seed : {101ull, 102ull, 103ull}) {
    Scene scene = Scene::generate(scfg, seed);
    const int m = 72;
    auto [map, mp0] = new_map(scfg.categories, m, scfg.cell_size);
    // Anchor at the scene center cell.
    Pose anchor{(scene.width() / 2 + 0.5) * scfg.cell_size,
                (scene.height() / 2 + 0.5) * scfg.cell_size, 0.0};
    MapFrame frame(anchor, m, scfg.cell_size);
    SensorConfig sensor;
    std::size_t prev_explored = 0;
    for (int r = 0; r < scene.height(); ++r)
      for (int c = 0; c < scene.width(); ++c) {
        if (scene.occupied(r, c)) continue;
        for (int h = 0; h < 8; ++h) {
          Pose p{(c + 0.5) * scfg.cell_size, (r + 0.5) * scfg.cell_size,
                 h * kPi / 4.0};
          integrate(map, frame.to_map(p), observe(scene, p, sensor));
        }
        const std::size_t now = map.explored_count();
        REQUIRE(now >= prev_explored);
        prev_explored = now;
      }
    // IoU between the map obstacle channel and ground truth occupancy.
    std::size_t inter = 0, uni = 0;
    for (int r = 0; r < scene.height(); ++r)
      for (int c = 0; c < scene.width(); ++c) {
        const auto [mr, mc] = frame.cell_of(
            Pose{(c + 0.5) * scfg.cell_size, (r + 0.5) * scfg.cell_size, 0.0});
        const bool truth = scene.occupied(r, c);
        const bool mapped = map.in_map(mr, mc) && map.obstacle(mr, mc) > 0.5;
        inter += truth && mapped;
        uni += truth || mapped;
      }
    INFO("seed " << seed);
    REQUIRE(double(inter) / double(uni) >= 0.90);

    // Noise-free setting: every mapped category cell is a true object cell.
    for (int mr = 0; mr < m; ++mr)
      for (int mc = 0; mc < m; ++mc)
        for (int cat = 0; cat < scfg.categories; ++cat)
          if (map.category(cat, mr, mc) > 0.0) {
            const int sr = scene.height() / 2 + (mr - m / 2);
            const int sc = scene.width() / 2 + (mc - m / 2);
            REQUIRE(scene.category_at(sr, sc) == cat);
          }
  }
}

TEST_CASE("run config parses and validates keys", "[eval]") {
  Config c = Config::from_string(
      "seed = 9\n"
      "# comment line\n"
      "map.size=48\n"
      "augment.kind = rotate  # trailing comment\n"
      "learner.alpha=0.2\n"
      "episode.success_mode=stop\n");
  RunConfig r = RunConfig::from_config(c);
  REQUIRE(r.seed == 9);
  REQUIRE(r.map_size == 48);
  REQUIRE(r.learner.augment.kind == AugmentKind::Rotate);
  REQUIRE(r.learner.alpha == 0.2);
  REQUIRE(r.stop_required);

  REQUIRE_THROWS_WITH(RunConfig::from_config(Config::from_string("bogus.key=1\n")),
                      Catch::Matchers::ContainsSubstring("bogus.key"));
}

TEST_CASE("grayscale training mode switches the policy input to 3 channels", "[eval]") {
  Config c = Config::from_string("augment.kind=grayscale\n");
  RunConfig r = RunConfig::from_config(c);
  REQUIRE(r.policy.in_channels() == 3);
  Tensor s({r.scene.categories + 4, 16, 16});
  Tensor in = policy_input(s, AugmentKind::Grayscale);
  REQUIRE(in.extent(0) == 3);
}
