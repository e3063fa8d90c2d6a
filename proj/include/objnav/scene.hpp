#pragma once
// Procedural multi-room 2D scenes and the robot simulator: BSP floorplans
// with doored walls, object instances per category, ground-truth semantic
// raycasts, and per-category geodesic distance fields.
//
// Geodesic distances are exact over the 8-connected grid. Each cell stores
// (straight, diagonal) step counts; the metric value straight + diag*sqrt(2)
// is unique per count pair, so independently computed routes agree bitwise.

#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "objnav/container.hpp"
#include "objnav/rng.hpp"

namespace objnav {

enum class Action { MoveForward, TurnLeft, TurnRight, Stop };

struct Pose {
  double x = 0.0;      // meters, east
  double y = 0.0;      // meters, north
  double theta = 0.0;  // radians, east = 0
};

struct StepResult {
  Pose pose;
  bool collided = false;
  bool stopped = false;
};

struct SceneConfig {
  int width = 32;   // cells
  int height = 32;  // cells
  double cell_size = 0.25;
  int rooms_min = 2;
  int rooms_max = 4;
  int categories = 6;
  int max_instances_per_category = 2;
  int placement_retries = 200;
};

struct SensorConfig {
  int rays = 64;
  double fov = 79.0 * kPi / 180.0;
  double max_depth = 5.0;
};

struct RayReading {
  double distance = 0.0;  // meters, capped at max_depth
  bool hit = false;
  int category = -1;  // -1: plain obstacle or no hit
  double angle = 0.0; // offset from pose heading, strictly increasing
};

struct Observation {
  std::vector<RayReading> rays;
  double max_depth = 5.0;
};

struct SceneObject {
  int category = -1;
  std::vector<std::pair<int, int>> cells;  // (row, col)
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact 8-connected grid distance as step counts.
struct StepCount {
  static constexpr std::uint16_t kUnreached = 0xFFFF;
  std::uint16_t straight = kUnreached;
  std::uint16_t diag = kUnreached;
  bool reached() const { return straight != kUnreached; }
  double cells() const { return double(straight) + double(diag) * kSqrt2; }
};

class Scene {
 public:
  static Scene generate(const SceneConfig& cfg, std::uint64_t seed);

  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size() const { return cell_size_; }
  int categories() const { return categories_; }
  std::uint64_t seed() const { return seed_; }

  bool in_bounds(int r, int c) const {
    return r >= 0 && r < height_ && c >= 0 && c < width_;
  }
  bool occupied(int r, int c) const {
    return !in_bounds(r, c) || occ_[std::size_t(r) * width_ + c] != 0;
  }
  // Category id at an occupied cell, -1 for plain walls / free space.
  int category_at(int r, int c) const {
    return in_bounds(r, c) ? cat_[std::size_t(r) * width_ + c] : -1;
  }
  const std::vector<SceneObject>& objects() const { return objects_; }

  int cell_row(double y) const { return int(std::floor(y / cell_size_)); }
  int cell_col(double x) const { return int(std::floor(x / cell_size_)); }
  bool occupied_at(double x, double y) const { return occupied(cell_row(y), cell_col(x)); }

  std::size_t free_cell_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : occ_) n += (v == 0);
    return n;
  }

  // Uniform over free cells, pose at cell center with uniform heading.
  Pose sample_free_pose(Rng& rng) const {
    std::vector<int> free;
    for (int i = 0; i < width_ * height_; ++i)
      if (occ_[size_t(i)] == 0) free.push_back(i);
    const int idx = free[size_t(rng.uniform_int(0, int(free.size()) - 1))];
    Pose p;
    p.x = (idx % width_ + 0.5) * cell_size_;
    p.y = (idx / width_ + 0.5) * cell_size_;
    p.theta = rng.uniform(-kPi, kPi);
    return p;
  }

  // Geodesic distance in meters from the pose's cell to the nearest instance
  // of the category; nullopt when unreachable.
  std::optional<double> geodesic_distance(const Pose& p, int category) const {
    return geodesic_distance_cell(cell_row(p.y), cell_col(p.x), category);
  }
  std::optional<double> geodesic_distance_cell(int r, int c, int category) const {
    if (category < 0 || category >= categories_)
      throw std::invalid_argument("geodesic_distance: category out of range");
    if (!in_bounds(r, c)) return std::nullopt;
    const StepCount& sc = dist_fields_[size_t(category)][std::size_t(r) * width_ + c];
    if (!sc.reached()) return std::nullopt;
    return sc.cells() * cell_size_;
  }
  const std::vector<StepCount>& distance_field(int category) const {
    return dist_fields_[size_t(category)];
  }

  void save(const std::string& path) const;
  static Scene load(const std::string& path);

 private:
  Scene() = default;
  void compute_distance_fields();

  int width_ = 0, height_ = 0;
  double cell_size_ = 0.25;
  int categories_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::uint8_t> occ_;
  std::vector<std::int16_t> cat_;
  std::vector<SceneObject> objects_;
  std::vector<std::vector<StepCount>> dist_fields_;  // per category

  friend Scene make_scene_from_grid(std::vector<std::string> rows, double cell_size,
                                    int categories);
};

// ---------------------------------------------------------------------------
// Raycast: Amanatides-Woo grid traversal. Distance is to the crossing into
// the hit cell.

struct RayHit {
  double t = 0.0;
  int row = -1, col = -1;
  bool hit = false;
};

inline RayHit cast_ray(const Scene& s, double x, double y, double dx, double dy,
                       double tmax) {
  const double cell = s.cell_size();
  int c = s.cell_col(x), r = s.cell_row(y);
  RayHit out;
  if (s.occupied(r, c)) {
    out = {0.0, r, c, true};
    return out;
  }
  const int step_c = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_r = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  double t_max_x = inf, t_max_y = inf, t_dx = inf, t_dy = inf;
  if (step_c != 0) {
    const double next = (step_c > 0 ? (c + 1) * cell : c * cell);
    t_max_x = (next - x) / dx;
    t_dx = cell / std::abs(dx);
  }
  if (step_r != 0) {
    const double next = (step_r > 0 ? (r + 1) * cell : r * cell);
    t_max_y = (next - y) / dy;
    t_dy = cell / std::abs(dy);
  }
  double t = 0.0;
  while (true) {
    if (t_max_x < t_max_y) {
      t = t_max_x;
      t_max_x += t_dx;
      c += step_c;
    } else {
      t = t_max_y;
      t_max_y += t_dy;
      r += step_r;
    }
    if (t > tmax) return out;
    if (!s.in_bounds(r, c)) return out;
    if (s.occupied(r, c)) {
      out = {t, r, c, true};
      return out;
    }
  }
}

inline Observation observe(const Scene& s, const Pose& p,
                           const SensorConfig& sensor = {}) {
  Observation obs;
  obs.max_depth = sensor.max_depth;
  obs.rays.resize(std::size_t(sensor.rays));
  for (int i = 0; i < sensor.rays; ++i) {
    const double off = -sensor.fov / 2.0 + sensor.fov * double(i) / double(sensor.rays - 1);
    const double ang = p.theta + off;
    RayHit h = cast_ray(s, p.x, p.y, std::cos(ang), std::sin(ang), sensor.max_depth);
    RayReading& ray = obs.rays[size_t(i)];
    ray.angle = off;
    if (h.hit) {
      ray.distance = h.t;
      ray.hit = true;
      ray.category = s.category_at(h.row, h.col);
    } else {
      ray.distance = sensor.max_depth;
      ray.hit = false;
      ray.category = -1;
    }
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Robot step. Forward motion is blocked (pose unchanged, collision flagged)
// when an obstacle lies within the step segment.

constexpr double kForwardStep = 0.25;          // meters
constexpr double kTurnStep = kPi / 6.0;        // 30 degrees

inline double normalize_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

inline StepResult step(const Scene& s, const Pose& p, Action a) {
  StepResult res;
  res.pose = p;
  switch (a) {
    case Action::MoveForward: {
      const double dx = std::cos(p.theta), dy = std::sin(p.theta);
      RayHit h = cast_ray(s, p.x, p.y, dx, dy, kForwardStep);
      const double nx = p.x + kForwardStep * dx, ny = p.y + kForwardStep * dy;
      if (h.hit || s.occupied_at(nx, ny)) {
        res.collided = true;
      } else {
        res.pose.x = nx;
        res.pose.y = ny;
      }
      break;
    }
    case Action::TurnLeft:
      res.pose.theta = normalize_angle(p.theta + kTurnStep);
      break;
    case Action::TurnRight:
      res.pose.theta = normalize_angle(p.theta - kTurnStep);
      break;
    case Action::Stop:
      res.stopped = true;
      break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Generation.

namespace detail {

struct Region {
  int r0, c0, r1, c1;  // inclusive interior bounds
  int rows() const { return r1 - r0 + 1; }
  int cols() const { return c1 - c0 + 1; }
};

inline bool flood_connected(const std::vector<std::uint8_t>& occ, int w, int h) {
  std::size_t total_free = 0;
  int start = -1;
  for (int i = 0; i < w * h; ++i)
    if (occ[size_t(i)] == 0) {
      ++total_free;
      if (start < 0) start = i;
    }
  if (total_free == 0) return false;
  std::vector<std::uint8_t> seen(std::size_t(w) * h, 0);
  std::deque<int> q{start};
  seen[size_t(start)] = 1;
  std::size_t reached = 0;
  while (!q.empty()) {
    const int cur = q.front();
    q.pop_front();
    ++reached;
    const int r = cur / w, c = cur % w;
    const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
      const int ni = nr * w + nc;
      if (occ[size_t(ni)] == 0 && !seen[size_t(ni)]) {
        seen[size_t(ni)] = 1;
        q.push_back(ni);
      }
    }
  }
  return reached == total_free;
}

}  // namespace detail

inline Scene Scene::generate(const SceneConfig& cfg, std::uint64_t seed) {
  if (cfg.width < 8 || cfg.height < 8)
    throw std::invalid_argument("scene: extent must be at least 8x8 cells");
  if (cfg.categories < 1)
    throw std::invalid_argument("scene: need at least one category");
  Rng rng(seed);
  Rng layout_rng = rng.split(1);
  Rng object_rng = rng.split(2);

  Scene s;
  s.width_ = cfg.width;
  s.height_ = cfg.height;
  s.cell_size_ = cfg.cell_size;
  s.categories_ = cfg.categories;
  s.seed_ = seed;
  s.occ_.assign(std::size_t(cfg.width) * cfg.height, 0);
  s.cat_.assign(std::size_t(cfg.width) * cfg.height, -1);

  auto occ_at = [&](int r, int c) -> std::uint8_t& {
    return s.occ_[std::size_t(r) * cfg.width + c];
  };

  // Border ring.
  for (int r = 0; r < cfg.height; ++r)
    for (int c = 0; c < cfg.width; ++c)
      if (r == 0 || c == 0 || r == cfg.height - 1 || c == cfg.width - 1) occ_at(r, c) = 1;

  // BSP splits with a doored wall per split. Minimum room interior: 3 cells.
  constexpr int kMinRoom = 3;
  const int target_rooms = layout_rng.uniform_int(cfg.rooms_min, cfg.rooms_max);
  std::vector<detail::Region> rooms{{1, 1, cfg.height - 2, cfg.width - 2}};
  while (int(rooms.size()) < target_rooms) {
    // Split the largest splittable room.
    int best = -1, best_size = -1;
    for (std::size_t i = 0; i < rooms.size(); ++i) {
      const detail::Region& rg = rooms[i];
      const bool splittable = rg.rows() >= 2 * kMinRoom + 1 || rg.cols() >= 2 * kMinRoom + 1;
      const int size = rg.rows() * rg.cols();
      if (splittable && size > best_size) {
        best_size = size;
        best = int(i);
      }
    }
    if (best < 0) break;
    detail::Region rg = rooms[size_t(best)];
    const bool can_rows = rg.rows() >= 2 * kMinRoom + 1;
    const bool can_cols = rg.cols() >= 2 * kMinRoom + 1;
    const bool split_rows = can_rows && (!can_cols || rg.rows() >= rg.cols());
    if (split_rows) {
      const int wall_r = layout_rng.uniform_int(rg.r0 + kMinRoom, rg.r1 - kMinRoom);
      for (int c = rg.c0; c <= rg.c1; ++c) occ_at(wall_r, c) = 1;
      const int door_c = layout_rng.uniform_int(rg.c0, rg.c1 - 1);
      occ_at(wall_r, door_c) = 0;
      occ_at(wall_r, door_c + 1) = 0;
      rooms[size_t(best)] = {rg.r0, rg.c0, wall_r - 1, rg.c1};
      rooms.push_back({wall_r + 1, rg.c0, rg.r1, rg.c1});
    } else {
      const int wall_c = layout_rng.uniform_int(rg.c0 + kMinRoom, rg.c1 - kMinRoom);
      for (int r = rg.r0; r <= rg.r1; ++r) occ_at(r, wall_c) = 1;
      const int door_r = layout_rng.uniform_int(rg.r0, rg.r1 - 1);
      occ_at(door_r, wall_c) = 0;
      occ_at(door_r + 1, wall_c) = 0;
      rooms[size_t(best)] = {rg.r0, rg.c0, rg.r1, wall_c - 1};
      rooms.push_back({rg.r0, wall_c + 1, rg.r1, rg.c1});
    }
  }
  if (!detail::flood_connected(s.occ_, cfg.width, cfg.height))
    throw GenerationError("scene generation produced disconnected free space");

  // Object placement: small blobs that keep the remaining free space
  // connected and stay reachable (at least one free 4-neighbour).
  for (int cat = 0; cat < cfg.categories; ++cat) {
    const int instances =
        object_rng.uniform_int(1, std::max(1, cfg.max_instances_per_category));
    for (int inst = 0; inst < instances; ++inst) {
      bool placed = false;
      for (int attempt = 0; attempt < cfg.placement_retries && !placed; ++attempt) {
        const int shape = object_rng.uniform_int(0, 3);  // 1x1, 1x2, 2x1, 2x2
        const int bh = (shape == 2 || shape == 3) ? 2 : 1;
        const int bw = (shape == 1 || shape == 3) ? 2 : 1;
        const int r = object_rng.uniform_int(1, cfg.height - 1 - bh);
        const int c = object_rng.uniform_int(1, cfg.width - 1 - bw);
        bool free_block = true;
        for (int i = 0; i < bh && free_block; ++i)
          for (int j = 0; j < bw && free_block; ++j)
            if (occ_at(r + i, c + j) != 0) free_block = false;
        if (!free_block) continue;
        for (int i = 0; i < bh; ++i)
          for (int j = 0; j < bw; ++j) occ_at(r + i, c + j) = 1;
        bool adjacent_free = false;
        for (int i = 0; i < bh && !adjacent_free; ++i)
          for (int j = 0; j < bw && !adjacent_free; ++j) {
            const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k)
              if (!s.occupied(r + i + dr[k], c + j + dc[k])) adjacent_free = true;
          }
        if (adjacent_free && detail::flood_connected(s.occ_, cfg.width, cfg.height)) {
          SceneObject obj;
          obj.category = cat;
          for (int i = 0; i < bh; ++i)
            for (int j = 0; j < bw; ++j) {
              obj.cells.emplace_back(r + i, c + j);
              s.cat_[std::size_t(r + i) * cfg.width + (c + j)] = std::int16_t(cat);
            }
          s.objects_.push_back(std::move(obj));
          placed = true;
        } else {
          for (int i = 0; i < bh; ++i)
            for (int j = 0; j < bw; ++j) occ_at(r + i, c + j) = 0;
        }
      }
      if (!placed && inst == 0)
        throw GenerationError("could not place an instance of category " +
                              std::to_string(cat));
    }
  }

  s.compute_distance_fields();
  return s;
}

// Multi-source Dijkstra per category over the 8-connected free grid;
// object cells are zero-distance sources.
inline void Scene::compute_distance_fields() {
  dist_fields_.assign(std::size_t(categories_),
                      std::vector<StepCount>(std::size_t(width_) * height_));
  for (int cat = 0; cat < categories_; ++cat) {
    std::vector<StepCount>& field = dist_fields_[size_t(cat)];
    using Entry = std::pair<double, int>;  // (value in cells, index)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> pq;
    for (const SceneObject& obj : objects_) {
      if (obj.category != cat) continue;
      for (const auto& [r, c] : obj.cells) {
        const int idx = r * width_ + c;
        field[size_t(idx)] = {0, 0};
        pq.emplace(0.0, idx);
      }
    }
    while (!pq.empty()) {
      const auto [value, idx] = pq.top();
      pq.pop();
      if (value > field[size_t(idx)].cells() + 1e-12) continue;  // stale
      const StepCount cur = field[size_t(idx)];
      const int r = idx / width_, c = idx % width_;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int nr = r + dr, nc = c + dc;
          if (!in_bounds(nr, nc) || occupied(nr, nc)) continue;
          StepCount cand = cur;
          if (dr != 0 && dc != 0)
            cand.diag = std::uint16_t(cand.diag + 1);
          else
            cand.straight = std::uint16_t(cand.straight + 1);
          StepCount& tgt = field[std::size_t(nr) * width_ + nc];
          if (!tgt.reached() || cand.cells() < tgt.cells()) {
            tgt = cand;
            pq.emplace(cand.cells(), nr * width_ + nc);
          }
        }
    }
  }
}

// Test helper: build a scene from ASCII rows ('#' wall, '.' free, digits are
// object cells of that category).
inline Scene make_scene_from_grid(std::vector<std::string> rows, double cell_size,
                                  int categories) {
  Scene s;
  s.height_ = int(rows.size());
  s.width_ = int(rows[0].size());
  s.cell_size_ = cell_size;
  s.categories_ = categories;
  s.seed_ = 0;
  s.occ_.assign(std::size_t(s.width_) * s.height_, 0);
  s.cat_.assign(std::size_t(s.width_) * s.height_, -1);
  std::vector<SceneObject> objs(static_cast<std::size_t>(categories));
  for (int i = 0; i < categories; ++i) objs[size_t(i)].category = i;
  for (int r = 0; r < s.height_; ++r)
    for (int c = 0; c < s.width_; ++c) {
      const char ch = rows[size_t(r)][size_t(c)];
      if (ch == '#') {
        s.occ_[std::size_t(r) * s.width_ + c] = 1;
      } else if (ch >= '0' && ch <= '9') {
        const int cat = ch - '0';
        if (cat >= categories) throw std::invalid_argument("grid category out of range");
        s.occ_[std::size_t(r) * s.width_ + c] = 1;
        s.cat_[std::size_t(r) * s.width_ + c] = std::int16_t(cat);
        objs[size_t(cat)].cells.emplace_back(r, c);
      }
    }
  for (auto& o : objs)
    if (!o.cells.empty()) s.objects_.push_back(std::move(o));
  s.compute_distance_fields();
  return s;
}

// ---------------------------------------------------------------------------
// Serialization (shared binary container).

inline void Scene::save(const std::string& path) const {
  Tensor occ({height_, width_});
  Tensor cat({height_, width_});
  for (std::size_t i = 0; i < occ.size(); ++i) {
    occ[i] = double(occ_[i]);
    cat[i] = double(cat_[i]);
  }
  Tensor meta({4});
  meta[0] = cell_size_;
  meta[1] = double(categories_);
  meta[2] = double(std::uint32_t(seed_ & 0xFFFF));
  meta[3] = double(std::uint32_t((seed_ >> 16) & 0xFFFF));
  Tensor seed_hi({2});
  seed_hi[0] = double(std::uint32_t((seed_ >> 32) & 0xFFFF));
  seed_hi[1] = double(std::uint32_t((seed_ >> 48) & 0xFFFF));
  Tensor objects = Tensor::full({std::max(1, int(objects_.size())), 1 + 2 * 4}, -1.0);
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    objects.at(int(i), 0) = double(objects_[i].category);
    for (std::size_t k = 0; k < objects_[i].cells.size() && k < 4; ++k) {
      objects.at(int(i), int(1 + 2 * k)) = double(objects_[i].cells[k].first);
      objects.at(int(i), int(2 + 2 * k)) = double(objects_[i].cells[k].second);
    }
    for (std::size_t k = objects_[i].cells.size(); k < 4; ++k) {
      objects.at(int(i), int(1 + 2 * k)) = -1.0;
      objects.at(int(i), int(2 + 2 * k)) = -1.0;
    }
  }
  save_tensors(path, {{"occupancy", &occ},
                      {"category", &cat},
                      {"meta", &meta},
                      {"seed_hi", &seed_hi},
                      {"objects", &objects}});
}

inline Scene Scene::load(const std::string& path) {
  auto records = load_tensors(path);
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& [n, t] : records)
      if (n == name) return t;
    throw std::runtime_error("scene file missing record " + name + ": " + path);
  };
  const Tensor& occ = find("occupancy");
  const Tensor& cat = find("category");
  const Tensor& meta = find("meta");
  const Tensor& seed_hi = find("seed_hi");
  const Tensor& objects = find("objects");
  Scene s;
  s.height_ = occ.extent(0);
  s.width_ = occ.extent(1);
  s.cell_size_ = meta[0];
  s.categories_ = int(meta[1]);
  s.seed_ = std::uint64_t(meta[2]) | (std::uint64_t(meta[3]) << 16) |
            (std::uint64_t(seed_hi[0]) << 32) | (std::uint64_t(seed_hi[1]) << 48);
  s.occ_.resize(occ.size());
  s.cat_.resize(cat.size());
  for (std::size_t i = 0; i < occ.size(); ++i) {
    s.occ_[i] = std::uint8_t(occ[i] != 0.0);
    s.cat_[i] = std::int16_t(cat[i]);
  }
  for (int i = 0; i < objects.extent(0); ++i) {
    SceneObject obj;
    obj.category = int(objects.at(i, 0));
    if (obj.category < 0) continue;
    for (int k = 0; k < 4; ++k) {
      const int r = int(objects.at(i, 1 + 2 * k)), c = int(objects.at(i, 2 + 2 * k));
      if (r >= 0) obj.cells.emplace_back(r, c);
    }
    if (!obj.cells.empty()) s.objects_.push_back(std::move(obj));
  }
  s.compute_distance_fields();
  return s;
}

}  // namespace objnav
