#pragma once

#include "ait/geometry.hpp"

#include <array>
#include <limits>
#include <optional>
#include <variant>

namespace ait {

/// Axis-aligned box centred on its frame origin; `extents` are full side lengths.
struct BoxShape {
  Vec3 extents = Vec3::Constant(0.05);
};

struct SphereShape {
  double radius = 0.03;
};

/// Cylinder centred on its frame origin with its axis along local z.
struct CylinderShape {
  double radius = 0.03;
  double height = 0.1;
};

using Shape = std::variant<BoxShape, SphereShape, CylinderShape>;

inline double bounding_radius(const Shape& s) {
  return std::visit(
      [](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, BoxShape>) return 0.5 * sh.extents.norm();
        else if constexpr (std::is_same_v<T, SphereShape>) return sh.radius;
        else return std::hypot(sh.radius, 0.5 * sh.height);
      },
      s);
}

/// Height of the frame origin above the support plane when resting upright.
inline double resting_half_height(const Shape& s) {
  return std::visit(
      [](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, BoxShape>) return 0.5 * sh.extents.z();
        else if constexpr (std::is_same_v<T, SphereShape>) return sh.radius;
        else return 0.5 * sh.height;
      },
      s);
}

/// Horizontal width the hand has to span for a top grasp.
inline double grasp_width(const Shape& s) {
  return std::visit(
      [](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, BoxShape>) return std::min(sh.extents.x(), sh.extents.y());
        else if constexpr (std::is_same_v<T, SphereShape>) return 2.0 * sh.radius;
        else return 2.0 * sh.radius;
      },
      s);
}

/// World z of the lowest point of the shape at `pose`.
inline double lowest_point_z(const Shape& s, const Pose& pose) {
  const Mat3 r = pose.rotation_matrix();
  return std::visit(
      [&](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, BoxShape>) {
          double reach = 0.0;
          for (int i = 0; i < 3; ++i) reach += 0.5 * sh.extents[i] * std::abs(r(2, i));
          return pose.position.z() - reach;
        } else if constexpr (std::is_same_v<T, SphereShape>) {
          return pose.position.z() - sh.radius;
        } else {
          const double c = std::abs(r(2, 2));
          const double s2 = std::sqrt(std::max(0.0, 1.0 - c * c));
          return pose.position.z() - (sh.radius * s2 + 0.5 * sh.height * c);
        }
      },
      s);
}

inline bool contains(const Shape& s, const Vec3& p) {
  return std::visit(
      [&](const auto& sh) -> bool {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, BoxShape>)
          return (p.cwiseAbs().array() <= 0.5 * sh.extents.array()).all();
        else if constexpr (std::is_same_v<T, SphereShape>)
          return p.norm() <= sh.radius;
        else
          return std::hypot(p.x(), p.y()) <= sh.radius && std::abs(p.z()) <= 0.5 * sh.height;
      },
      s);
}

/// Nearest positive ray parameter of a ray in the shape's local frame.
inline std::optional<double> ray_intersect(const Shape& s, const Vec3& o, const Vec3& d) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(
      [&](const auto& sh) -> std::optional<double> {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, BoxShape>) {
          double t0 = -inf, t1 = inf;
          for (int i = 0; i < 3; ++i) {
            const double h = 0.5 * sh.extents[i];
            if (std::abs(d[i]) < 1e-15) {
              if (o[i] < -h || o[i] > h) return std::nullopt;
              continue;
            }
            double a = (-h - o[i]) / d[i], b = (h - o[i]) / d[i];
            if (a > b) std::swap(a, b);
            t0 = std::max(t0, a);
            t1 = std::min(t1, b);
            if (t0 > t1) return std::nullopt;
          }
          if (t1 < 0.0) return std::nullopt;
          return t0 >= 0.0 ? t0 : t1;
        } else if constexpr (std::is_same_v<T, SphereShape>) {
          const double b = o.dot(d), c = o.squaredNorm() - sh.radius * sh.radius;
          const double a = d.squaredNorm();
          const double disc = b * b - a * c;
          if (disc < 0.0) return std::nullopt;
          const double sq = std::sqrt(disc);
          const double ta = (-b - sq) / a, tb = (-b + sq) / a;
          if (ta >= 0.0) return ta;
          if (tb >= 0.0) return tb;
          return std::nullopt;
        } else {
          const double h = 0.5 * sh.height;
          double best = inf;
          // lateral surface
          const double a = d.x() * d.x() + d.y() * d.y();
          if (a > 1e-15) {
            const double b = o.x() * d.x() + o.y() * d.y();
            const double c = o.x() * o.x() + o.y() * o.y() - sh.radius * sh.radius;
            const double disc = b * b - a * c;
            if (disc >= 0.0) {
              const double sq = std::sqrt(disc);
              for (double t : {(-b - sq) / a, (-b + sq) / a}) {
                if (t >= 0.0 && std::abs(o.z() + t * d.z()) <= h && t < best) best = t;
              }
            }
          }
          // caps
          if (std::abs(d.z()) > 1e-15) {
            for (double zc : {-h, h}) {
              const double t = (zc - o.z()) / d.z();
              if (t < 0.0) continue;
              const double x = o.x() + t * d.x(), y = o.y() + t * d.y();
              if (x * x + y * y <= sh.radius * sh.radius && t < best) best = t;
            }
          }
          if (best == inf) return std::nullopt;
          return best;
        }
      },
      s);
}

/// Closest point on the shape surface (not the solid) to a local-frame point.
inline Vec3 closest_surface_point(const Shape& s, const Vec3& p) {
  return std::visit(
      [&](const auto& sh) -> Vec3 {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, BoxShape>) {
          const Vec3 h = 0.5 * sh.extents;
          Vec3 q = p.cwiseMax(-h).cwiseMin(h);
          if (q == p) {
            // inside: push to nearest face
            int axis = 0;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < 3; ++i) {
              const double gap = h[i] - std::abs(p[i]);
              if (gap < best) {
                best = gap;
                axis = i;
              }
            }
            q[axis] = p[axis] >= 0.0 ? h[axis] : -h[axis];
          }
          return q;
        } else if constexpr (std::is_same_v<T, SphereShape>) {
          const double n = p.norm();
          if (n < 1e-15) return Vec3(0, 0, sh.radius);
          return p * (sh.radius / n);
        } else {
          const double h = 0.5 * sh.height;
          const double rxy = std::hypot(p.x(), p.y());
          const Vec3 radial = rxy > 1e-15 ? Vec3(p.x() / rxy, p.y() / rxy, 0.0) : Vec3(1, 0, 0);
          const bool inside = rxy <= sh.radius && std::abs(p.z()) <= h;
          if (!inside) {
            const double cr = std::min(rxy, sh.radius);
            const double cz = std::clamp(p.z(), -h, h);
            if (rxy > sh.radius) return Vec3(radial.x() * sh.radius, radial.y() * sh.radius, cz);
            return Vec3(radial.x() * cr, radial.y() * cr, cz);
          }
          const double to_side = sh.radius - rxy;
          const double to_cap = h - std::abs(p.z());
          if (to_side < to_cap) return Vec3(radial.x() * sh.radius, radial.y() * sh.radius, p.z());
          return Vec3(p.x(), p.y(), p.z() >= 0.0 ? h : -h);
        }
      },
      s);
}

/// Rotation error between two orientations of the same shape, minimized over the
/// shape's symmetry group (box: axis permutations that preserve extents; cylinder:
/// any rotation about its axis plus the end-over-end flip; sphere: everything).
inline double symmetric_rotation_error(const Shape& s, const Quat& estimate, const Quat& truth) {
  return std::visit(
      [&](const auto& sh) -> double {
        using T = std::decay_t<decltype(sh)>;
        if constexpr (std::is_same_v<T, SphereShape>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, CylinderShape>) {
          const Vec3 a = estimate * Vec3::UnitZ();
          const Vec3 b = truth * Vec3::UnitZ();
          return std::acos(std::min(1.0, std::abs(a.dot(b))));
        } else {
          double best = kPi;
          const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
          for (const auto& perm : perms) {
            for (int signs = 0; signs < 8; ++signs) {
              Mat3 m = Mat3::Zero();
              for (int i = 0; i < 3; ++i) m(i, perm[i]) = (signs >> i) & 1 ? -1.0 : 1.0;
              if (m.determinant() < 0.0) continue;
              // symmetry must map the box onto itself
              const Vec3 mapped = (m.cwiseAbs() * sh.extents);
              if ((mapped - sh.extents).cwiseAbs().maxCoeff() > 1e-9) continue;
              const Quat sym(m);
              best = std::min(best, angular_distance(estimate * sym, truth));
            }
          }
          return best;
        }
      },
      s);
}

}  // namespace ait
