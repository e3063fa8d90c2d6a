#pragma once
// Semantic-map image augmentations and the transform-sampling interface the
// regularized updates average over. All transforms keep the tensor shape and
// the [0,1] value range; identity parameters reproduce the input bit-exactly.

#include <stdexcept>
#include <utility>
#include <vector>

#include "objnav/rng.hpp"
#include "objnav/tensor.hpp"

namespace objnav {

enum class AugmentKind { Identity, Shift, Flip, Grayscale, Rotate };

inline AugmentKind augment_kind_from_string(const std::string& s) {
  if (s == "identity") return AugmentKind::Identity;
  if (s == "shift") return AugmentKind::Shift;
  if (s == "flip") return AugmentKind::Flip;
  if (s == "grayscale") return AugmentKind::Grayscale;
  if (s == "rotate") return AugmentKind::Rotate;
  throw std::invalid_argument("unknown augment kind: " + s);
}

struct TransformParam {
  AugmentKind kind = AugmentKind::Identity;
  int dx = 0, dy = 0;       // shift: content translation in cells
  int flip_axis = -1;       // 0 horizontal (mirror columns), 1 vertical, -1 none
  double angle_deg = 0.0;   // rotate

  bool is_identity() const {
    switch (kind) {
      case AugmentKind::Identity: return true;
      case AugmentKind::Shift: return dx == 0 && dy == 0;
      case AugmentKind::Flip: return flip_axis < 0;
      case AugmentKind::Rotate: return angle_deg == 0.0;
      case AugmentKind::Grayscale: return false;
    }
    return false;
  }
};

struct AugmentConfig {
  AugmentKind kind = AugmentKind::Shift;
  double flip_prob = 0.1;
  int shift_pad = 4;
  double rotate_max_deg = 5.0;
};

namespace detail {

inline void check_state(const Tensor& s) {
  if (s.rank() != 3 || s.extent(1) != s.extent(2))
    throw std::invalid_argument("augment: expected KxMxM state tensor, got " +
                                s.shape_str());
}

inline int clamp_idx(int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); }

}  // namespace detail

// Shift with edge-replication padding: out[r][c] = in[clamp(r-dy)][clamp(c-dx)],
// so content moves by (+dy, +dx) cells and the overlap is an exact translation.
inline Tensor apply_shift(const Tensor& s, int dx, int dy) {
  detail::check_state(s);
  if (dx == 0 && dy == 0) return s;
  const int k = s.extent(0), m = s.extent(1);
  Tensor out({k, m, m});
  for (int ch = 0; ch < k; ++ch)
    for (int r = 0; r < m; ++r) {
      const int sr = detail::clamp_idx(r - dy, m - 1);
      for (int c = 0; c < m; ++c)
        out.at(ch, r, c) = s.at(ch, sr, detail::clamp_idx(c - dx, m - 1));
    }
  return out;
}

inline Tensor apply_flip(const Tensor& s, int axis) {
  detail::check_state(s);
  if (axis < 0) return s;
  const int k = s.extent(0), m = s.extent(1);
  Tensor out({k, m, m});
  for (int ch = 0; ch < k; ++ch)
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c)
        out.at(ch, r, c) = axis == 0 ? s.at(ch, r, m - 1 - c) : s.at(ch, m - 1 - r, c);
  return out;
}

// Nearest-neighbour rotation about the map center; cells pulled from outside
// the frame are zero-filled.
inline Tensor apply_rotate(const Tensor& s, double angle_deg) {
  detail::check_state(s);
  if (angle_deg == 0.0) return s;
  const int k = s.extent(0), m = s.extent(1);
  const double pivot = (m - 1) / 2.0;
  const double a = angle_deg * kPi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  Tensor out({k, m, m});
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) {
      // Inverse rotation of the output cell center.
      const double ry = double(r) - pivot, cx = double(c) - pivot;
      const int sr = int(std::lround(pivot + ca * ry - sa * cx));
      const int sc = int(std::lround(pivot + sa * ry + ca * cx));
      if (sr < 0 || sr >= m || sc < 0 || sc >= m) continue;
      for (int ch = 0; ch < k; ++ch) out.at(ch, r, c) = s.at(ch, sr, sc);
    }
  return out;
}

// Luminance projection of a 3-channel rendering, replicated back to 3
// channels. Raw K-channel states are rejected; render first.
inline Tensor grayscale(const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.extent(0) != 3)
    throw std::invalid_argument(
        "grayscale: expected a 3-channel rendered map, got " + rgb.shape_str() +
        " (render the K-channel state to RGB first)");
  const int m = rgb.extent(1), w = rgb.extent(2);
  Tensor out({3, m, w});
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < w; ++c) {
      const double y =
          0.299 * rgb.at(0, r, c) + 0.587 * rgb.at(1, r, c) + 0.114 * rgb.at(2, r, c);
      out.at(0, r, c) = y;
      out.at(1, r, c) = y;
      out.at(2, r, c) = y;
    }
  return out;
}

// Fixed palette rendering of the (C+4)-channel state, channel priority:
// categories > obstacle > visited > current > explored.
inline Tensor render_rgb(const Tensor& state) {
  detail::check_state(state);
  const int k = state.extent(0), m = state.extent(1);
  const int cats = k - 4;
  static const double kCategoryPalette[][3] = {
      {0.90, 0.10, 0.10}, {0.10, 0.70, 0.10}, {0.15, 0.25, 0.90},
      {0.85, 0.80, 0.10}, {0.75, 0.15, 0.80}, {0.10, 0.80, 0.80},
      {0.95, 0.55, 0.10}, {0.55, 0.35, 0.20},
  };
  constexpr int kPaletteSize = 8;
  Tensor out({3, m, m});
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) {
      double rgb[3] = {0.0, 0.0, 0.0};
      bool set = false;
      for (int cat = 0; cat < cats && !set; ++cat)
        if (state.at(4 + cat, r, c) > 0.5) {
          const double* p = kCategoryPalette[cat % kPaletteSize];
          rgb[0] = p[0];
          rgb[1] = p[1];
          rgb[2] = p[2];
          set = true;
        }
      if (!set && state.at(0, r, c) > 0.5) rgb[0] = rgb[1] = rgb[2] = 1.0;
      else if (!set && state.at(3, r, c) > 0.5) rgb[0] = rgb[1] = rgb[2] = 0.55;
      else if (!set && state.at(2, r, c) > 0.5) rgb[0] = rgb[1] = rgb[2] = 0.75;
      else if (!set && state.at(1, r, c) > 0.5) rgb[0] = rgb[1] = rgb[2] = 0.30;
      out.at(0, r, c) = rgb[0];
      out.at(1, r, c) = rgb[1];
      out.at(2, r, c) = rgb[2];
    }
  return out;
}

// -- sampling ---------------------------------------------------------------

inline TransformParam draw_transform(const AugmentConfig& cfg, Rng& rng) {
  TransformParam p;
  p.kind = cfg.kind;
  switch (cfg.kind) {
    case AugmentKind::Identity:
    case AugmentKind::Grayscale:
      break;
    case AugmentKind::Shift:
      p.dx = rng.uniform_int(-cfg.shift_pad, cfg.shift_pad);
      p.dy = rng.uniform_int(-cfg.shift_pad, cfg.shift_pad);
      break;
    case AugmentKind::Flip:
      if (rng.uniform() < cfg.flip_prob) p.flip_axis = rng.uniform_int(0, 1);
      break;
    case AugmentKind::Rotate:
      p.angle_deg = rng.uniform(-cfg.rotate_max_deg, cfg.rotate_max_deg);
      break;
  }
  return p;
}

inline Tensor apply_transform(const Tensor& s, const TransformParam& p) {
  switch (p.kind) {
    case AugmentKind::Identity: return s;
    case AugmentKind::Shift: return apply_shift(s, p.dx, p.dy);
    case AugmentKind::Flip: return apply_flip(s, p.flip_axis);
    case AugmentKind::Rotate: return apply_rotate(s, p.angle_deg);
    case AugmentKind::Grayscale: return grayscale(render_rgb(s));
  }
  return s;
}

// Named entry points matching the per-transform contracts.
inline std::pair<Tensor, TransformParam> random_shift(const Tensor& s, Rng& rng,
                                                      int pad = 4) {
  AugmentConfig cfg;
  cfg.kind = AugmentKind::Shift;
  cfg.shift_pad = pad;
  TransformParam p = draw_transform(cfg, rng);
  return {apply_transform(s, p), p};
}

inline std::pair<Tensor, TransformParam> random_flip(const Tensor& s, Rng& rng,
                                                     double prob = 0.1) {
  AugmentConfig cfg;
  cfg.kind = AugmentKind::Flip;
  cfg.flip_prob = prob;
  TransformParam p = draw_transform(cfg, rng);
  return {apply_transform(s, p), p};
}

inline std::pair<Tensor, TransformParam> random_rotate(const Tensor& s, Rng& rng,
                                                       double max_deg = 5.0) {
  AugmentConfig cfg;
  cfg.kind = AugmentKind::Rotate;
  cfg.rotate_max_deg = max_deg;
  TransformParam p = draw_transform(cfg, rng);
  return {apply_transform(s, p), p};
}

}  // namespace objnav
