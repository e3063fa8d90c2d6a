#pragma once
// Allocentric (C+2)-channel semantic map built by fusing raycast
// observations, plus the (C+4)-channel policy input tensor.
//
// Map cells sit on integer continuous coordinates: cell (r, c) is centered
// at (r, c) and spans the half-open box [r-0.5, r+0.5) x [c-0.5, c+0.5).
// When an episode anchors the frame at a cell-centered start pose, map cells
// coincide exactly with scene cells.

#include <cstdint>
#include <fstream>
#include <vector>

#include "objnav/container.hpp"
#include "objnav/scene.hpp"
#include "objnav/tensor.hpp"

namespace objnav {

struct MapPose {
  double row = 0.0;
  double col = 0.0;
  double theta = 0.0;
};

inline int map_cell(double x) { return int(std::floor(x + 0.5)); }

class SemanticMap {
 public:
  SemanticMap(int categories, int size, double cell_size = 0.25)
      : categories_(categories),
        size_(size),
        cell_size_(cell_size),
        data_(std::size_t(categories + 2) * size * size, 0.0) {
    if (size < 16) throw std::invalid_argument("semantic map: M must be at least 16");
    if (categories < 1) throw std::invalid_argument("semantic map: need C >= 1");
  }

  int categories() const { return categories_; }
  int size() const { return size_; }
  int channels() const { return categories_ + 2; }
  double cell_size() const { return cell_size_; }

  bool in_map(int r, int c) const { return r >= 0 && r < size_ && c >= 0 && c < size_; }

  double& at(int channel, int r, int c) {
    return data_[(std::size_t(channel) * size_ + r) * size_ + c];
  }
  double at(int channel, int r, int c) const {
    return data_[(std::size_t(channel) * size_ + r) * size_ + c];
  }
  double& obstacle(int r, int c) { return at(0, r, c); }
  double& explored(int r, int c) { return at(1, r, c); }
  double& category(int cat, int r, int c) { return at(2 + cat, r, c); }
  double obstacle(int r, int c) const { return at(0, r, c); }
  double explored(int r, int c) const { return at(1, r, c); }
  double category(int cat, int r, int c) const { return at(2 + cat, r, c); }

  std::size_t explored_count() const {
    std::size_t n = 0;
    const std::size_t base = std::size_t(size_) * size_;
    for (std::size_t i = 0; i < base; ++i) n += (data_[base + i] > 0.0);
    return n;
  }

  // True when any cell carries the category.
  bool category_seen(int cat) const {
    const std::size_t base = std::size_t(2 + cat) * size_ * size_;
    for (std::size_t i = 0; i < std::size_t(size_) * size_; ++i)
      if (data_[base + i] > 0.0) return true;
    return false;
  }

  const std::vector<double>& raw() const { return data_; }

  void save(const std::string& path) const {
    Tensor grid({channels(), size_, size_});
    for (std::size_t i = 0; i < data_.size(); ++i) grid[i] = data_[i];
    Tensor meta({2});
    meta[0] = double(categories_);
    meta[1] = cell_size_;
    save_tensors(path, {{"map", &grid}, {"meta", &meta}});
  }

  void save_pgm(int channel, const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    os << "P5\n" << size_ << " " << size_ << "\n255\n";
    for (int r = 0; r < size_; ++r)
      for (int c = 0; c < size_; ++c) {
        const unsigned char v = (unsigned char)(at(channel, r, c) * 255.0);
        os.write(reinterpret_cast<const char*>(&v), 1);
      }
  }

 private:
  int categories_;
  int size_;
  double cell_size_;
  std::vector<double> data_;
};

inline std::pair<SemanticMap, MapPose> new_map(int categories, int size,
                                               double cell_size = 0.25) {
  SemanticMap map(categories, size, cell_size);
  MapPose pose{double(size) / 2.0, double(size) / 2.0, 0.0};
  return {std::move(map), pose};
}

// ---------------------------------------------------------------------------
// Observation fusion. Cells traversed by a ray up to the hit distance become
// explored; the hit cell is marked obstacle (and category when labelled).
// Conflicting evidence is fused sticky-OR: marks never clear within an
// episode. Cells beyond the map border are dropped.

inline void integrate(SemanticMap& map, const MapPose& pose, const Observation& obs) {
  const double cell = map.cell_size();
  const int start_r = map_cell(pose.row), start_c = map_cell(pose.col);
  if (map.in_map(start_r, start_c)) {
    map.explored(start_r, start_c) = 1.0;
  }
  for (const RayReading& ray : obs.rays) {
    const double ang = pose.theta + ray.angle;
    const double dc = std::cos(ang), dr = std::sin(ang);
    const double d_cells = ray.distance / cell;

    // Walk cells up to the hit; boundaries live at half-integers.
    int r = start_r, c = start_c;
    const int step_c = dc > 0 ? 1 : (dc < 0 ? -1 : 0);
    const int step_r = dr > 0 ? 1 : (dr < 0 ? -1 : 0);
    const double inf = std::numeric_limits<double>::infinity();
    double t_max_c = inf, t_max_r = inf, t_dc = inf, t_dr = inf;
    if (step_c != 0) {
      const double next = step_c > 0 ? (c + 0.5) : (c - 0.5);
      t_max_c = (next - pose.col) / dc;
      t_dc = 1.0 / std::abs(dc);
    }
    if (step_r != 0) {
      const double next = step_r > 0 ? (r + 0.5) : (r - 0.5);
      t_max_r = (next - pose.row) / dr;
      t_dr = 1.0 / std::abs(dr);
    }
    double t = 0.0;
    while (t < d_cells - 1e-9) {
      if (t_max_c < t_max_r) {
        t = t_max_c;
        t_max_c += t_dc;
        c += step_c;
      } else {
        t = t_max_r;
        t_max_r += t_dr;
        r += step_r;
      }
      if (t >= d_cells - 1e-9) break;
      if (map.in_map(r, c)) map.explored(r, c) = 1.0;
    }
    if (ray.hit) {
      // The hit cell contains the point just past the crossing.
      const double eps = 1e-6;
      const int hr = map_cell(pose.row + (d_cells + eps) * dr);
      const int hc = map_cell(pose.col + (d_cells + eps) * dc);
      if (map.in_map(hr, hc)) {
        map.explored(hr, hc) = 1.0;
        map.obstacle(hr, hc) = 1.0;
        if (ray.category >= 0 && ray.category < map.categories())
          map.category(ray.category, hr, hc) = 1.0;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Policy input: [obstacle, explored, current-location disk, visited trace,
// C category channels], i.e. C+4 channels of M x M.

class VisitedTrace {
 public:
  explicit VisitedTrace(int size) : size_(size), cells_(std::size_t(size) * size, 0) {}
  void mark(int r, int c) {
    if (r >= 0 && r < size_ && c >= 0 && c < size_)
      cells_[std::size_t(r) * size_ + c] = 1;
  }
  bool marked(int r, int c) const { return cells_[std::size_t(r) * size_ + c] != 0; }
  int size() const { return size_; }
  std::size_t count() const {
    std::size_t n = 0;
    for (std::uint8_t v : cells_) n += v;
    return n;
  }

 private:
  int size_;
  std::vector<std::uint8_t> cells_;
};

inline Tensor state_tensor(const SemanticMap& map, const MapPose& pose,
                           const VisitedTrace& visited) {
  const int m = map.size(), cats = map.categories();
  Tensor s({cats + 4, m, m});
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) {
      s.at(0, r, c) = map.obstacle(r, c);
      s.at(1, r, c) = map.explored(r, c);
      for (int k = 0; k < cats; ++k) s.at(4 + k, r, c) = map.category(k, r, c);
    }
  constexpr double kDiskRadius = 2.0;
  const int cr = map_cell(pose.row), cc = map_cell(pose.col);
  for (int r = cr - 2; r <= cr + 2; ++r)
    for (int c = cc - 2; c <= cc + 2; ++c)
      if (map.in_map(r, c) &&
          std::hypot(double(r) - pose.row, double(c) - pose.col) <= kDiskRadius)
        s.at(2, r, c) = 1.0;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c)
      if (visited.marked(r, c)) s.at(3, r, c) = 1.0;
  return s;
}

// ---------------------------------------------------------------------------
// World <-> map binding for one episode; the anchor is the start pose, which
// lands exactly on map cell (M/2, M/2).

struct MapFrame {
  double anchor_x = 0.0, anchor_y = 0.0;
  int size = 0;
  double cell = 0.25;

  MapFrame() = default;
  MapFrame(const Pose& start, int m, double cell_size)
      : anchor_x(start.x), anchor_y(start.y), size(m), cell(cell_size) {}

  MapPose to_map(const Pose& p) const {
    return {double(size) / 2.0 + (p.y - anchor_y) / cell,
            double(size) / 2.0 + (p.x - anchor_x) / cell, p.theta};
  }
  std::pair<int, int> cell_of(const Pose& p) const {
    const MapPose mp = to_map(p);
    return {map_cell(mp.row), map_cell(mp.col)};
  }
};

}  // namespace objnav
