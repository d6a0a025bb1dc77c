#pragma once

// Independent reference computations used by the tests. Nothing here calls
// the clipping, coding or loss code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dcl/geometry.hpp"

namespace dcl::oracle {

inline constexpr double kPi = std::numbers::pi;

/// True when every vertex of `a` coincides with some vertex of `b` and vice
/// versa, which for rectangles means the same point set.
inline bool same_vertex_set(const QuadBox& a, const QuadBox& b, double tol = 1e-9) {
  auto covered = [tol](const QuadBox& p, const QuadBox& q) {
    for (const auto& v : p.vertices) {
      bool hit = false;
      for (const auto& w : q.vertices) hit = hit || (std::abs(v.x - w.x) <= tol && std::abs(v.y - w.y) <= tol);
      if (!hit) return false;
    }
    return true;
  };
  return covered(a, b) && covered(b, a);
}

/// 1.0 when both quads are the same rectangle, 0.0 otherwise.
inline double quad_overlap_ratio(const QuadBox& a, const QuadBox& b) { return same_vertex_set(a, b) ? 1.0 : 0.0; }

inline bool inside_box(const RotatedBoxLongSide& b, double px, double py) {
  const double t = b.theta * kPi / 180;
  const double dx = px - b.x, dy = py - b.y;
  const double u = dx * std::cos(t) + dy * std::sin(t);
  const double v = -dx * std::sin(t) + dy * std::cos(t);
  return std::abs(u) <= b.h / 2 && std::abs(v) <= b.w / 2;
}

inline void box_bounds(const RotatedBoxLongSide& b, double& x0, double& x1, double& y0, double& y1) {
  const double t = b.theta * kPi / 180;
  const double ex = std::abs(std::cos(t)) * b.h / 2 + std::abs(std::sin(t)) * b.w / 2;
  const double ey = std::abs(std::sin(t)) * b.h / 2 + std::abs(std::cos(t)) * b.w / 2;
  x0 = b.x - ex;
  x1 = b.x + ex;
  y0 = b.y - ey;
  y1 = b.y + ey;
}

/// IoU by uniform sampling over the bounding box of the union.
inline double monte_carlo_iou(const RotatedBoxLongSide& a, const RotatedBoxLongSide& b, std::size_t samples,
                              std::uint64_t seed) {
  double ax0, ax1, ay0, ay1, bx0, bx1, by0, by1;
  box_bounds(a, ax0, ax1, ay0, ay1);
  box_bounds(b, bx0, bx1, by0, by1);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(std::min(ax0, bx0), std::max(ax1, bx1));
  std::uniform_real_distribution<double> uy(std::min(ay0, by0), std::max(ay1, by1));
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = ux(rng), y = uy(rng);
    const bool ia = inside_box(a, x, y), ib = inside_box(b, x, y);
    inter += (ia && ib) ? 1 : 0;
    uni += (ia || ib) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Smallest enclosing-rectangle area over orientations sampled every `step` degrees.
inline double min_rect_area_scan(const QuadBox& q, double step) {
  double best = std::numeric_limits<double>::infinity();
  for (double a = 0; a < 90; a += step) {
    const double c = std::cos(a * kPi / 180), s = std::sin(a * kPi / 180);
    double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
    for (const auto& p : q.vertices) {
      const double u = p.x * c + p.y * s, v = -p.x * s + p.y * c;
      u0 = std::min(u0, u);
      u1 = std::max(u1, u);
      v0 = std::min(v0, v);
      v1 = std::max(v1, v);
    }
    best = std::min(best, (u1 - u0) * (v1 - v0));
  }
  return best;
}

/// Sigmoid focal loss of one component, written directly from its definition.
inline double focal_term(double target, double logit, double alpha, double gamma) {
  const double p = 1.0 / (1.0 + std::exp(-logit));
  return -(alpha * target * std::pow(1 - p, gamma) * std::log(p) +
           (1 - alpha) * (1 - target) * std::pow(p, gamma) * std::log(1 - p));
}

/// Plain n-bit binary string of `value`.
inline std::string binary_string(unsigned value, int bits) {
  std::string s;
  for (int i = bits - 1; i >= 0; --i) s.push_back(((value >> i) & 1u) ? '1' : '0');
  return s;
}

inline int hamming(const std::string& a, const std::string& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

}  // namespace dcl::oracle
