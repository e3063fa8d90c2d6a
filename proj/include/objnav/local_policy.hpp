#pragma once
// Fast Marching Method over the map's obstacle channel and the deterministic
// action extraction that walks the agent down the travel-time field.
//
// First-order upwind updates with unit speed on free cells, narrow band kept
// in a min-heap, finalized cells never revisited. The field is solved from
// the goal so one solve serves every agent position until the map changes.

#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "objnav/semantic_map.hpp"

namespace objnav {

struct DistanceField {
  int size = 0;
  int goal_row = -1, goal_col = -1;  // snapped source
  std::vector<double> values;        // cell units; +inf on obstacles/unreached

  double at(int r, int c) const { return values[std::size_t(r) * size + c]; }
  bool finite_at(int r, int c) const { return std::isfinite(at(r, c)); }
};

namespace detail {

// Nearest free cell by BFS (8-connected), used to snap occupied goals.
inline int snap_to_free(const std::vector<std::uint8_t>& occ, int m, int start) {
  if (occ[std::size_t(start)] == 0) return start;
  std::vector<std::uint8_t> seen(occ.size(), 0);
  std::deque<int> q{start};
  seen[std::size_t(start)] = 1;
  while (!q.empty()) {
    const int cur = q.front();
    q.pop_front();
    if (occ[std::size_t(cur)] == 0) return cur;
    const int r = cur / m, c = cur % m;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int nr = r + dr, nc = c + dc;
        if (nr < 0 || nr >= m || nc < 0 || nc >= m) continue;
        const int ni = nr * m + nc;
        if (!seen[std::size_t(ni)]) {
          seen[std::size_t(ni)] = 1;
          q.push_back(ni);
        }
      }
  }
  return -1;
}

inline double eikonal_update(double u_h, double u_v) {
  const double inf = std::numeric_limits<double>::infinity();
  if (u_h == inf && u_v == inf) return inf;
  if (u_h == inf) return u_v + 1.0;
  if (u_v == inf) return u_h + 1.0;
  const double d = u_h - u_v;
  if (std::abs(d) >= 1.0) return std::min(u_h, u_v) + 1.0;
  return 0.5 * (u_h + u_v + std::sqrt(2.0 - d * d));
}

}  // namespace detail

// occ: m*m row-major, nonzero = obstacle. The goal is snapped to the nearest
// free cell when occupied.
inline DistanceField fmm_solve(const std::vector<std::uint8_t>& occ, int m,
                               int goal_row, int goal_col) {
  if (int(occ.size()) != m * m) throw std::invalid_argument("fmm: grid size mismatch");
  goal_row = std::min(std::max(goal_row, 0), m - 1);
  goal_col = std::min(std::max(goal_col, 0), m - 1);
  const int src = detail::snap_to_free(occ, m, goal_row * m + goal_col);
  if (src < 0) throw std::runtime_error("fmm: no free cells");

  DistanceField f;
  f.size = m;
  f.goal_row = src / m;
  f.goal_col = src % m;
  f.values.assign(occ.size(), std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> accepted(occ.size(), 0);

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  f.values[std::size_t(src)] = 0.0;
  heap.emplace(0.0, src);

  // Exact initialization around the point source: the first-order upwind
  // update overshoots badly next to the singularity, so nearby cells with an
  // unobstructed straight segment to the source are seeded with their
  // Euclidean distance.
  constexpr int kExactRadius = 2;
  const int sr = src / m, sc = src % m;
  for (int dr = -kExactRadius; dr <= kExactRadius; ++dr)
    for (int dc = -kExactRadius; dc <= kExactRadius; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const int nr = sr + dr, nc = sc + dc;
      if (nr < 0 || nr >= m || nc < 0 || nc >= m) continue;
      if (occ[std::size_t(nr) * m + nc] != 0) continue;
      bool clear = true;
      for (int step = 1; step < 20 && clear; ++step) {
        const double t = double(step) / 20.0;
        const int rr = int(std::lround(sr + t * dr)), cc = int(std::lround(sc + t * dc));
        if (occ[std::size_t(rr) * m + cc] != 0) clear = false;
      }
      if (!clear) continue;
      const double d = std::hypot(double(dr), double(dc));
      f.values[std::size_t(nr) * m + nc] = d;
      heap.emplace(d, nr * m + nc);
    }

  while (!heap.empty()) {
    const auto [v, idx] = heap.top();
    heap.pop();
    if (accepted[std::size_t(idx)]) continue;
    accepted[std::size_t(idx)] = 1;
    const int r = idx / m, c = idx % m;
    const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nr >= m || nc < 0 || nc >= m) continue;
      const int ni = nr * m + nc;
      if (occ[std::size_t(ni)] != 0 || accepted[std::size_t(ni)]) continue;
      auto value_at = [&](int rr, int cc) {
        if (rr < 0 || rr >= m || cc < 0 || cc >= m)
          return std::numeric_limits<double>::infinity();
        if (occ[std::size_t(rr) * m + cc] != 0)
          return std::numeric_limits<double>::infinity();
        return f.values[std::size_t(rr) * m + cc];
      };
      const double u_h = std::min(value_at(nr, nc - 1), value_at(nr, nc + 1));
      const double u_v = std::min(value_at(nr - 1, nc), value_at(nr + 1, nc));
      const double cand = detail::eikonal_update(u_h, u_v);
      if (cand < f.values[std::size_t(ni)]) {
        f.values[std::size_t(ni)] = cand;
        heap.emplace(cand, ni);
      }
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Path extraction by repeated steepest descent; used by the property tests
// and the plan CLI. Length in cell units (1 per axis step, sqrt(2) diagonal).

struct ExtractedPath {
  bool reached = false;
  double length_cells = 0.0;
  std::vector<std::pair<int, int>> cells;
};

inline ExtractedPath extract_path(const DistanceField& f, int start_row, int start_col) {
  ExtractedPath out;
  const int m = f.size;
  int r = start_row, c = start_col;
  if (!f.finite_at(r, c)) return out;
  out.cells.emplace_back(r, c);
  for (int it = 0; it < 4 * m * m; ++it) {
    if (r == f.goal_row && c == f.goal_col) {
      out.reached = true;
      return out;
    }
    // Among strictly descending neighbours, pick the one minimizing the
    // estimated completion cost (step + remaining travel time).
    const double cur = f.at(r, c);
    double best_total = std::numeric_limits<double>::infinity();
    int best_r = r, best_c = c;
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int nr = r + dr, nc = c + dc;
        if (nr < 0 || nr >= m || nc < 0 || nc >= m) continue;
        const double fv = f.at(nr, nc);
        if (fv >= cur) continue;
        const double total = fv + ((dr != 0 && dc != 0) ? kSqrt2 : 1.0);
        if (total < best_total) {
          best_total = total;
          best_r = nr;
          best_c = nc;
        }
      }
    if (best_r == r && best_c == c) return out;  // stuck: no descent direction
    out.length_cells += (best_r != r && best_c != c) ? kSqrt2 : 1.0;
    r = best_r;
    c = best_c;
    out.cells.emplace_back(r, c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic low-level decision.

enum class LocalDecision { MoveForward, TurnLeft, TurnRight, Stop, Replan };

inline Action to_action(LocalDecision d) {
  switch (d) {
    case LocalDecision::MoveForward: return Action::MoveForward;
    case LocalDecision::TurnLeft: return Action::TurnLeft;
    case LocalDecision::TurnRight: return Action::TurnRight;
    case LocalDecision::Stop: return Action::Stop;
    case LocalDecision::Replan: break;
  }
  throw std::logic_error("replan is not an executable action");
}

// Steepest-descent neighbour sets the desired heading; turn until aligned
// within 15 degrees, stop once within stop_distance of the goal cell, replan
// when the field offers no way down.
inline LocalDecision extract_action(const DistanceField& f, const MapPose& pose,
                                    double cell_size, double stop_distance) {
  const int m = f.size;
  const int r = map_cell(pose.row), c = map_cell(pose.col);
  if (r < 0 || r >= m || c < 0 || c >= m || !f.finite_at(r, c))
    return LocalDecision::Replan;
  const double goal_dist =
      std::hypot(pose.row - double(f.goal_row), pose.col - double(f.goal_col)) * cell_size;
  if (goal_dist <= stop_distance) return LocalDecision::Stop;

  const double cur = f.at(r, c);
  double best_total = std::numeric_limits<double>::infinity();
  int best_r = r, best_c = c;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const int nr = r + dr, nc = c + dc;
      if (nr < 0 || nr >= m || nc < 0 || nc >= m) continue;
      const double fv = f.at(nr, nc);
      if (fv >= cur) continue;
      const double total = fv + ((dr != 0 && dc != 0) ? kSqrt2 : 1.0);
      if (total < best_total) {
        best_total = total;
        best_r = nr;
        best_c = nc;
      }
    }
  if (best_r == r && best_c == c) return LocalDecision::Replan;

  const double heading =
      std::atan2(double(best_r) - pose.row, double(best_c) - pose.col);
  const double diff = normalize_angle(heading - pose.theta);
  constexpr double kAlignTolerance = kPi / 12.0 + 1e-9;  // 15 degrees
  if (std::abs(diff) <= kAlignTolerance) return LocalDecision::MoveForward;
  return diff > 0.0 ? LocalDecision::TurnLeft : LocalDecision::TurnRight;
}

// ---------------------------------------------------------------------------
// Planning grid from the semantic map: optional treat-unknown-as-obstacle,
// obstacle dilation for clearance, and a cleared disk around the agent so
// dilation never swallows the agent's own cell.

struct PlannerConfig {
  bool unknown_free = true;
  int dilate = 1;
};

inline std::vector<std::uint8_t> planning_grid(const SemanticMap& map,
                                               const PlannerConfig& cfg,
                                               int agent_row, int agent_col) {
  const int m = map.size();
  std::vector<std::uint8_t> raw(std::size_t(m) * m, 0);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) {
      bool blocked = map.obstacle(r, c) >= 0.5;
      if (!cfg.unknown_free && map.explored(r, c) < 0.5) blocked = true;
      raw[std::size_t(r) * m + c] = blocked ? 1 : 0;
    }
  std::vector<std::uint8_t> grid = raw;
  for (int pass = 0; pass < cfg.dilate; ++pass) {
    std::vector<std::uint8_t> next = grid;
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) {
        if (grid[std::size_t(r) * m + c] == 0) continue;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = r + dr, nc = c + dc;
            if (nr >= 0 && nr < m && nc >= 0 && nc < m) next[std::size_t(nr) * m + nc] = 1;
          }
      }
    grid = std::move(next);
  }
  // Keep the agent's neighbourhood at raw occupancy.
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      const int nr = agent_row + dr, nc = agent_col + dc;
      if (nr >= 0 && nr < m && nc >= 0 && nc < m)
        grid[std::size_t(nr) * m + nc] = raw[std::size_t(nr) * m + nc];
    }
  return grid;
}

inline void save_distance_field(const DistanceField& f, const std::string& path) {
  Tensor t({f.size, f.size});
  for (std::size_t i = 0; i < f.values.size(); ++i)
    t[i] = std::isfinite(f.values[i]) ? f.values[i] : -1.0;
  Tensor goal({2});
  goal[0] = double(f.goal_row);
  goal[1] = double(f.goal_col);
  save_tensors(path, {{"field", &t}, {"goal", &goal}});
}

}  // namespace objnav
