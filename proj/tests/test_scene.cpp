#include <catch2/catch_amalgamated.hpp>

#include "objnav/scene.hpp"

using namespace objnav;

namespace {

// Independent connectivity oracle: plain stack-based flood fill.
bool flood_fill_connected(const Scene& s) {
  std::vector<std::pair<int, int>> stack;
  std::vector<std::uint8_t> seen(std::size_t(s.width()) * s.height(), 0);
  std::size_t total = 0;
  for (int r = 0; r < s.height(); ++r)
    for (int c = 0; c < s.width(); ++c)
      if (!s.occupied(r, c)) {
        ++total;
        if (stack.empty()) {
          stack.emplace_back(r, c);
          seen[std::size_t(r) * s.width() + c] = 1;
        }
      }
  std::size_t reached = 0;
  while (!stack.empty()) {
    auto [r, c] = stack.back();
    stack.pop_back();
    ++reached;
    for (auto [dr, dc] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const int nr = r + dr, nc = c + dc;
      if (nr < 0 || nr >= s.height() || nc < 0 || nc >= s.width()) continue;
      if (s.occupied(nr, nc) || seen[std::size_t(nr) * s.width() + nc]) continue;
      seen[std::size_t(nr) * s.width() + nc] = 1;
      stack.emplace_back(nr, nc);
    }
  }
  return total > 0 && reached == total;
}

// Geodesic oracle: Bellman-Ford style relaxation to a fixed point over the
// same 8-connected count representation.
std::vector<StepCount> relaxation_distances(const Scene& s, int category) {
  const int w = s.width(), h = s.height();
  std::vector<StepCount> field(std::size_t(w) * h);
  for (const SceneObject& obj : s.objects())
    if (obj.category == category)
      for (auto [r, c] : obj.cells) field[std::size_t(r) * w + c] = {0, 0};
  bool changed = true;
  while (changed) {
    changed = false;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (s.occupied(r, c)) continue;
        StepCount best = field[std::size_t(r) * w + c];
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int nr = r + dr, nc = c + dc;
            if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
            const StepCount& nb = field[std::size_t(nr) * w + nc];
            if (!nb.reached()) continue;
            StepCount cand = nb;
            if (dr != 0 && dc != 0)
              cand.diag = std::uint16_t(cand.diag + 1);
            else
              cand.straight = std::uint16_t(cand.straight + 1);
            if (!best.reached() || cand.cells() < best.cells()) best = cand;
          }
        const StepCount& cur = field[std::size_t(r) * w + c];
        if (best.reached() && (!cur.reached() || best.cells() < cur.cells())) {
          field[std::size_t(r) * w + c] = best;
          changed = true;
        }
      }
  }
  return field;
}

// Raycast oracle: sample along the ray in 1 mm increments until a sample
// falls inside an occupied cell.
double sampled_ray_distance(const Scene& s, const Pose& p, double angle, double tmax) {
  const double dx = std::cos(angle), dy = std::sin(angle);
  for (double t = 0.0; t <= tmax; t += 0.001)
    if (s.occupied_at(p.x + t * dx, p.y + t * dy)) return t;
  return tmax;
}

Scene small_scene() {
  return make_scene_from_grid(
      {
          "##########",
          "#........#",
          "#........#",
          "#...##...#",
          "#...#0...#",
          "#........#",
          "#.1......#",
          "#........#",
          "#........#",
          "##########",
      },
      0.25, 2);
}

}  // namespace

TEST_CASE("generation is deterministic in the seed", "[scene]") {
  SceneConfig cfg;
  Scene a = Scene::generate(cfg, 7);
  Scene b = Scene::generate(cfg, 7);
  REQUIRE(a.width() == b.width());
  for (int r = 0; r < a.height(); ++r)
    for (int c = 0; c < a.width(); ++c) {
      REQUIRE(a.occupied(r, c) == b.occupied(r, c));
      REQUIRE(a.category_at(r, c) == b.category_at(r, c));
    }
}

TEST_CASE("single room single category still places an instance", "[scene]") {
  SceneConfig cfg;
  cfg.rooms_min = 1;
  cfg.rooms_max = 1;
  cfg.categories = 1;
  Scene s = Scene::generate(cfg, 3);
  int instances = 0;
  for (const SceneObject& o : s.objects())
    if (o.category == 0) ++instances;
  REQUIRE(instances >= 1);
}

TEST_CASE("100 seeds all pass the flood-fill connectivity oracle", "[scene]") {
  SceneConfig cfg;
  int pass = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Scene s = Scene::generate(cfg, seed);
    if (flood_fill_connected(s)) ++pass;
    for (int cat = 0; cat < cfg.categories; ++cat) {
      bool present = false;
      for (const SceneObject& o : s.objects()) present = present || o.category == cat;
      REQUIRE(present);
    }
  }
  REQUIRE(pass == 100);
}

TEST_CASE("turn left then right restores the heading", "[scene]") {
  Scene s = small_scene();
  Pose p{1.0, 1.0, 0.4};
  Pose q = step(s, step(s, p, Action::TurnLeft).pose, Action::TurnRight).pose;
  REQUIRE(std::abs(q.theta - p.theta) < 1e-12);
}

TEST_CASE("forward into a nearby wall leaves the pose unchanged", "[scene]") {
  Scene s = small_scene();
  // Wall column at x < 0.25; stand 0.1 m from it facing west.
  Pose p{0.25 + 0.1, 1.2, kPi};
  StepResult r = step(s, p, Action::MoveForward);
  REQUIRE(r.collided);
  REQUIRE(r.pose.x == p.x);
  REQUIRE(r.pose.y == p.y);
}

TEST_CASE("four forward steps east advance one meter", "[scene]") {
  Scene s = small_scene();
  Pose p{0.375, 0.375 + 4 * 0.25, 0.0};
  for (int i = 0; i < 4; ++i) {
    StepResult r = step(s, p, Action::MoveForward);
    REQUIRE_FALSE(r.collided);
    p = r.pose;
  }
  REQUIRE(std::abs(p.x - (0.375 + 1.0)) < 1e-12);
}

TEST_CASE("stop raises the episode-end flag only", "[scene]") {
  Scene s = small_scene();
  Pose p{1.0, 1.0, 0.0};
  StepResult r = step(s, p, Action::Stop);
  REQUIRE(r.stopped);
  REQUIRE(r.pose.x == p.x);
  REQUIRE(r.pose.theta == p.theta);
}

TEST_CASE("center ray distance to a facing wall", "[scene]") {
  Scene s = small_scene();
  // Face the east wall (col 9, x in [2.25, 2.5)) from exactly 1 m away,
  // in the open row 7.
  Pose p{2.25 - 1.0, 1.875, 0.0};
  SensorConfig sensor;
  sensor.rays = 65;  // odd count puts a ray exactly on the heading
  Observation obs = observe(s, p, sensor);
  const RayReading& center = obs.rays[32];
  REQUIRE(center.angle == 0.0);
  REQUIRE(center.hit);
  REQUIRE(std::abs(center.distance - 1.0) <= 0.125 + 1e-9);
}

TEST_CASE("open corridor longer than max depth caps the reading", "[scene]") {
  std::vector<std::string> rows(8, std::string(30, '.'));
  for (auto& row : rows) {
    row.front() = '#';
    row.back() = '#';
  }
  rows.front() = std::string(30, '#');
  rows.back() = std::string(30, '#');
  Scene s = make_scene_from_grid(rows, 0.25, 1);
  Pose p{0.3, 1.0, 0.0};  // 7 m of open space to the east wall
  SensorConfig sensor;
  sensor.rays = 65;
  Observation obs = observe(s, p, sensor);
  REQUIRE_FALSE(obs.rays[32].hit);
  REQUIRE(obs.rays[32].distance == 5.0);
}

TEST_CASE("raycasts agree with the fine-sampling oracle", "[scene]") {
  SceneConfig cfg;
  Scene s = Scene::generate(cfg, 21);
  Rng rng(5);
  SensorConfig sensor;
  for (int trial = 0; trial < 40; ++trial) {
    const Pose p = s.sample_free_pose(rng);
    Observation obs = observe(s, p, sensor);
    for (int i = 0; i < sensor.rays; i += 7) {
      const RayReading& ray = obs.rays[size_t(i)];
      const double oracle =
          sampled_ray_distance(s, p, p.theta + ray.angle, sensor.max_depth);
      REQUIRE(std::abs(ray.distance - oracle) <= s.cell_size() + 1e-9);
    }
  }
}

TEST_CASE("rays report the category of the hit object", "[scene]") {
  Scene s = small_scene();
  // Object '0' occupies cell (4,5). Stand east of it, face west.
  Pose p{8 * 0.25 + 0.125, 4 * 0.25 + 0.125, kPi};
  SensorConfig sensor;
  sensor.rays = 65;
  Observation obs = observe(s, p, sensor);
  REQUIRE(obs.rays[32].hit);
  REQUIRE(obs.rays[32].category == 0);
}

TEST_CASE("geodesic next to the target is at most one cell", "[scene]") {
  Scene s = small_scene();
  // Cell (4,6) is adjacent to object '0' at (4,5).
  Pose p{6 * 0.25 + 0.125, 4 * 0.25 + 0.125, 0.0};
  auto d = s.geodesic_distance(p, 0);
  REQUIRE(d);
  REQUIRE(*d <= s.cell_size() + 1e-12);
}

TEST_CASE("straight corridor distance is step count times cell size", "[scene]") {
  std::vector<std::string> rows = {
      "############",
      "#0.........#",
      "############",
  };
  Scene s = make_scene_from_grid(rows, 0.25, 1);
  Pose p{10 * 0.25 + 0.125, 1 * 0.25 + 0.125, 0.0};  // 9 cells right of the target
  auto d = s.geodesic_distance(p, 0);
  REQUIRE(d);
  REQUIRE(*d == 9 * 0.25);
}

TEST_CASE("geodesic equals the relaxation oracle exactly", "[scene]") {
  SceneConfig cfg;
  for (std::uint64_t seed : {2ull, 9ull, 33ull}) {
    Scene s = Scene::generate(cfg, seed);
    for (int cat = 0; cat < cfg.categories; ++cat) {
      const auto oracle = relaxation_distances(s, cat);
      const auto& field = s.distance_field(cat);
      for (std::size_t i = 0; i < field.size(); ++i) {
        REQUIRE(field[i].reached() == oracle[i].reached());
        if (field[i].reached()) {
          REQUIRE(field[i].straight == oracle[i].straight);
          REQUIRE(field[i].diag == oracle[i].diag);
          REQUIRE(field[i].cells() == oracle[i].cells());
        }
      }
    }
  }
}

TEST_CASE("unreachable category reports explicitly", "[scene]") {
  // The '0' object is sealed in its own chamber.
  std::vector<std::string> rows = {
      "########",
      "#..#...#",
      "#..#.0.#",
      "#..#...#",
      "########",
  };
  Scene s = make_scene_from_grid(rows, 0.25, 1);
  Pose p{0.3, 0.3, 0.0};
  REQUIRE_FALSE(s.geodesic_distance(p, 0).has_value());
}

TEST_CASE("trajectories are deterministic and stay out of obstacles", "[scene]") {
  SceneConfig cfg;
  Scene s = Scene::generate(cfg, 13);
  auto rollout = [&](std::uint64_t seed) {
    Rng rng(seed);
    Pose p = s.sample_free_pose(rng);
    std::vector<Pose> track{p};
    for (int t = 0; t < 200; ++t) {
      const Action a = static_cast<Action>(rng.uniform_int(0, 2));  // no stop
      p = step(s, p, a).pose;
      REQUIRE_FALSE(s.occupied_at(p.x, p.y));
      track.push_back(p);
    }
    return track;
  };
  auto t1 = rollout(4);
  auto t2 = rollout(4);
  for (std::size_t i = 0; i < t1.size(); ++i) {
    REQUIRE(t1[i].x == t2[i].x);
    REQUIRE(t1[i].y == t2[i].y);
    REQUIRE(t1[i].theta == t2[i].theta);
  }
}

TEST_CASE("distance decrease per step never exceeds the step length", "[scene]") {
  SceneConfig cfg;
  Scene s = Scene::generate(cfg, 77);
  Rng rng(8);
  Pose p = s.sample_free_pose(rng);
  auto prev = s.geodesic_distance(p, 0);
  REQUIRE(prev);
  for (int t = 0; t < 300; ++t) {
    const Action a = static_cast<Action>(rng.uniform_int(0, 2));
    p = step(s, p, a).pose;
    auto cur = s.geodesic_distance(p, 0);
    REQUIRE(cur);
    // Moving one step changes the cell by at most one diagonal.
    REQUIRE(*prev - *cur <= kSqrt2 * s.cell_size() + 1e-9);
    prev = cur;
  }
}

TEST_CASE("scene serialization round-trips", "[scene]") {
  SceneConfig cfg;
  Scene s = Scene::generate(cfg, 55);
  const std::string path = "test_scene_roundtrip.scene";
  s.save(path);
  Scene t = Scene::load(path);
  REQUIRE(t.width() == s.width());
  REQUIRE(t.height() == s.height());
  REQUIRE(t.seed() == s.seed());
  REQUIRE(t.categories() == s.categories());
  for (int r = 0; r < s.height(); ++r)
    for (int c = 0; c < s.width(); ++c) {
      REQUIRE(t.occupied(r, c) == s.occupied(r, c));
      REQUIRE(t.category_at(r, c) == s.category_at(r, c));
    }
  REQUIRE(t.objects().size() == s.objects().size());
  std::remove(path.c_str());
}
