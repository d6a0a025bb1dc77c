#pragma once

// Rotated-box parameterizations, conversions between them and exact rotated
// IoU by convex polygon clipping.
//
// Angles are degrees throughout. The y axis points up for the purpose of
// "counter-clockwise"; image coordinates (y down) only mirror the orientation.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "dcl/error.hpp"

namespace dcl {

template <typename T>
struct Point {
  T x{};
  T y{};

  constexpr Point operator+(const Point& p) const { return {x + p.x, y + p.y}; }
  constexpr Point operator-(const Point& p) const { return {x - p.x, y - p.y}; }
  constexpr Point operator*(T s) const { return {x * s, y * s}; }
  constexpr bool operator==(const Point&) const = default;
};

template <typename T>
constexpr T cross(const Point<T>& a, const Point<T>& b) {
  return a.x * b.y - a.y * b.x;
}

template <typename T>
constexpr T dot(const Point<T>& a, const Point<T>& b) {
  return a.x * b.x + a.y * b.y;
}

using Point2d = Point<double>;

/// Five-parameter box, long-side definition: `h` is the long side and `theta`
/// the angle between it and the x axis, canonical range (-90, 90].
struct RotatedBoxLongSide {
  double x = 0.0;
  double y = 0.0;
  double h = 0.0;
  double w = 0.0;
  double theta = 0.0;

  bool operator==(const RotatedBoxLongSide&) const = default;
};

/// Five-parameter box, OpenCV definition: side `w` lies along `theta` in
/// [-90, 0), side `h` along theta + 90. Sides are not ordered.
struct RotatedBoxOpenCV {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  double theta = -90.0;

  bool operator==(const RotatedBoxOpenCV&) const = default;
};

/// Eight-parameter box.
struct QuadBox {
  std::array<Point2d, 4> vertices{};

  bool operator==(const QuadBox&) const = default;
};

enum class BoxDefinition { LongSide, OpenCV };

using AnyRotatedBox = std::variant<RotatedBoxLongSide, RotatedBoxOpenCV>;

inline constexpr double kDegToRad = std::numbers::pi / 180.0;

/// Reduce `theta` to the representative in (-period/2, period/2].
inline double canonicalize_angle(double theta, int period = 180) {
  if (period != 90 && period != 180) {
    throw InvalidInput("canonicalize_angle: period must be 90 or 180, got " + std::to_string(period));
  }
  if (!std::isfinite(theta)) {
    throw InvalidInput("canonicalize_angle: non-finite angle");
  }
  const double p = period;
  double r = std::fmod(theta, p);
  if (r <= -p / 2) r += p;
  if (r > p / 2) r -= p;
  return r;
}

/// Smallest absolute difference between two angles under the given period.
inline double angular_distance(double a, double b, int period = 180) {
  return std::abs(canonicalize_angle(a - b, period));
}

namespace detail {

inline bool valid_sides(double a, double b) {
  return std::isfinite(a) && std::isfinite(b) && a > 0.0 && b > 0.0;
}

inline bool finite(double v) { return std::isfinite(v); }

}  // namespace detail

/// Throws unless the box satisfies the long-side invariants.
inline void validate(const RotatedBoxLongSide& b) {
  if (!detail::valid_sides(b.h, b.w)) {
    throw DegenerateInput("long-side box: sides must be positive and finite");
  }
  if (b.h < b.w) {
    throw InvalidInput("long-side box: h must be the long side (h >= w)");
  }
  if (!detail::finite(b.x) || !detail::finite(b.y) || !detail::finite(b.theta)) {
    throw InvalidInput("long-side box: non-finite center or angle");
  }
  if (!(b.theta > -90.0 && b.theta <= 90.0)) {
    throw InvalidInput("long-side box: theta outside (-90, 90]");
  }
}

inline void validate(const RotatedBoxOpenCV& b) {
  if (!detail::valid_sides(b.h, b.w)) {
    throw DegenerateInput("opencv box: sides must be positive and finite");
  }
  if (!detail::finite(b.x) || !detail::finite(b.y) || !detail::finite(b.theta)) {
    throw InvalidInput("opencv box: non-finite center or angle");
  }
  if (!(b.theta >= -90.0 && b.theta < 0.0)) {
    throw InvalidInput("opencv box: theta outside [-90, 0)");
  }
}

/// Build a canonical long-side box from two unordered side lengths, where
/// `side_a` lies along `theta_a`. Swaps sides and rotates by 90 as needed.
inline RotatedBoxLongSide make_longside(double x, double y, double side_a, double side_b, double theta_a) {
  if (!detail::valid_sides(side_a, side_b)) {
    throw DegenerateInput("make_longside: sides must be positive and finite");
  }
  RotatedBoxLongSide b{x, y, side_a, side_b, theta_a};
  if (side_a < side_b) {
    b.h = side_b;
    b.w = side_a;
    b.theta = theta_a + 90.0;
  }
  b.theta = canonicalize_angle(b.theta, 180);
  validate(b);
  return b;
}

inline RotatedBoxOpenCV to_opencv(const RotatedBoxLongSide& b) {
  validate(b);
  // Long side direction; 90 and -90 are the same direction.
  const double t = b.theta == 90.0 ? -90.0 : b.theta;
  if (t < 0.0) return {b.x, b.y, b.h, b.w, t};
  // Short side lies along t - 90, which is in [-90, 0).
  return {b.x, b.y, b.w, b.h, t - 90.0};
}

inline RotatedBoxLongSide to_longside(const RotatedBoxOpenCV& b) {
  validate(b);
  return make_longside(b.x, b.y, b.w, b.h, b.theta);
}

inline RotatedBoxLongSide to_longside(const RotatedBoxLongSide& b) {
  validate(b);
  return b;
}

inline RotatedBoxOpenCV to_opencv(const RotatedBoxOpenCV& b) {
  validate(b);
  return b;
}

inline AnyRotatedBox convert_definition(const AnyRotatedBox& box, BoxDefinition target) {
  return std::visit(
      [target](const auto& b) -> AnyRotatedBox {
        if (target == BoxDefinition::LongSide) return to_longside(b);
        return to_opencv(b);
      },
      box);
}

namespace detail {

inline QuadBox rectangle_corners(double cx, double cy, double along, double across, double theta) {
  const double c = std::cos(theta * kDegToRad);
  const double s = std::sin(theta * kDegToRad);
  const Point2d center{cx, cy};
  const Point2d u{c * along / 2, s * along / 2};
  const Point2d v{-s * across / 2, c * across / 2};
  return QuadBox{{center + u + v, center - u + v, center - u - v, center + u - v}};
}

}  // namespace detail

/// Corners counter-clockwise, starting at local (+h/2, +w/2) before rotation.
inline QuadBox longside_to_quad(const RotatedBoxLongSide& b) {
  validate(b);
  return detail::rectangle_corners(b.x, b.y, b.h, b.w, b.theta);
}

inline QuadBox opencv_to_quad(const RotatedBoxOpenCV& b) {
  validate(b);
  return detail::rectangle_corners(b.x, b.y, b.w, b.h, b.theta);
}

/// Signed shoelace area; positive for counter-clockwise vertex order.
template <typename T>
T signed_area(std::span<const Point<T>> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return T(0);
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += cross(poly[i], poly[(i + 1) % n]);
  }
  return acc / 2;
}

template <typename T>
T polygon_area(std::span<const Point<T>> poly) {
  return std::abs(signed_area(poly));
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
template <typename T>
std::vector<Point<T>> convex_hull(std::vector<Point<T>> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point<T>& a, const Point<T>& b) {
    return std::tie(a.x, a.y) < std::tie(b.x, b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point<T>> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= T(0)) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= T(0)) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Intersection of two convex counter-clockwise polygons (Sutherland-Hodgman).
/// Points within `eps` of a clip edge count as inside, so touching polygons
/// produce a zero-area sliver rather than an error.
template <typename T>
std::vector<Point<T>> clip_convex(std::span<const Point<T>> subject, std::span<const Point<T>> clip,
                                  T eps = T(1e-12)) {
  std::vector<Point<T>> out(subject.begin(), subject.end());
  std::vector<Point<T>> in;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Point<T> a = clip[e];
    const Point<T> b = clip[(e + 1) % m];
    const Point<T> edge = b - a;
    const T scale = std::max(T(1), std::sqrt(dot(edge, edge)));
    in.swap(out);
    out.clear();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point<T> p = in[i];
      const Point<T> q = in[(i + 1) % n];
      const T sp = cross(edge, p - a);
      const T sq = cross(edge, q - a);
      const bool p_in = sp >= -eps * scale;
      const bool q_in = sq >= -eps * scale;
      if (p_in) out.push_back(p);
      if (p_in != q_in) {
        const T t = sp / (sp - sq);
        out.push_back(p + (q - p) * t);
      }
    }
  }
  return out;
}

/// Minimum-area enclosing rectangle of an arbitrary quadrilateral (rotating
/// calipers over its convex hull), returned in canonical long-side form.
inline RotatedBoxLongSide quad_to_longside(const QuadBox& quad) {
  for (const auto& p : quad.vertices) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InvalidInput("quad: non-finite vertex");
  }
  const auto hull = convex_hull(std::vector<Point2d>(quad.vertices.begin(), quad.vertices.end()));
  const double area = polygon_area(std::span<const Point2d>(hull));
  double extent = 0.0;
  for (const auto& p : hull) extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
  if (hull.size() < 3 || area <= 1e-12 * std::max(1.0, extent * extent)) {
    throw DegenerateInput("quad_to_longside: zero-area quadrilateral");
  }

  double best_area = std::numeric_limits<double>::infinity();
  RotatedBoxLongSide best;
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2d e = hull[(i + 1) % n] - hull[i];
    const double len = std::sqrt(dot(e, e));
    if (len == 0.0) continue;
    const Point2d u{e.x / len, e.y / len};
    const Point2d v{-u.y, u.x};
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& p : hull) {
      const double pu = dot(p, u);
      const double pv = dot(p, v);
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      vmin = std::min(vmin, pv);
      vmax = std::max(vmax, pv);
    }
    const double a = (umax - umin) * (vmax - vmin);
    // Strict improvement keeps the first minimal edge, so the result is deterministic.
    if (a < best_area * (1.0 - 1e-12)) {
      best_area = a;
      const double cu = (umin + umax) / 2;
      const double cv = (vmin + vmax) / 2;
      const Point2d c = u * cu + v * cv;
      const double angle = std::atan2(u.y, u.x) / kDegToRad;
      best = make_longside(c.x, c.y, umax - umin, vmax - vmin, angle);
    }
  }
  return best;
}

/// Exact IoU of two rotated rectangles. Argument order does not affect the
/// result bit-for-bit.
inline double rotated_iou(const RotatedBoxLongSide& a, const RotatedBoxLongSide& b) {
  validate(a);
  validate(b);
  const auto key = [](const RotatedBoxLongSide& r) { return std::tie(r.x, r.y, r.h, r.w, r.theta); };
  const RotatedBoxLongSide& first = key(b) < key(a) ? b : a;
  const RotatedBoxLongSide& second = key(b) < key(a) ? a : b;

  const QuadBox qa = longside_to_quad(first);
  const QuadBox qb = longside_to_quad(second);
  const auto inter = clip_convex<double>(qa.vertices, qb.vertices);
  const double inter_area = polygon_area(std::span<const Point2d>(inter));
  const double area_a = first.h * first.w;
  const double area_b = second.h * second.w;
  const double uni = area_a + area_b - inter_area;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter_area / uni, 0.0, 1.0);
}

inline double rotated_iou(const AnyRotatedBox& a, const AnyRotatedBox& b) {
  const auto ls = [](const AnyRotatedBox& v) { return std::visit([](const auto& x) { return to_longside(x); }, v); };
  return rotated_iou(ls(a), ls(b));
}

/// True when no two non-adjacent edges of the quad cross.
inline bool is_simple(const QuadBox& q) {
  const auto& v = q.vertices;
  const auto crosses = [](Point2d p1, Point2d p2, Point2d p3, Point2d p4) {
    const double d1 = cross(p4 - p3, p1 - p3);
    const double d2 = cross(p4 - p3, p2 - p3);
    const double d3 = cross(p2 - p1, p3 - p1);
    const double d4 = cross(p2 - p1, p4 - p1);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
  };
  return !crosses(v[0], v[1], v[2], v[3]) && !crosses(v[1], v[2], v[3], v[0]);
}

}  // namespace dcl
