#include "prunesim/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace prunesim {

double closest_param_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double dd = ab.squaredNorm();
  if (dd <= 0.0) return 0.0;
  return std::clamp((p - a).dot(ab) / dd, 0.0, 1.0);
}

Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  return a + closest_param_on_segment(p, a, b) * (b - a);
}

double closest_param_on_segment2(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double dd = ab.squaredNorm();
  if (dd <= 0.0) return 0.0;
  return std::clamp((p - a).dot(ab) / dd, 0.0, 1.0);
}

Vec2 closest_point_on_segment2(const Vec2& p, const Vec2& a, const Vec2& b) {
  return a + closest_param_on_segment2(p, a, b) * (b - a);
}

namespace {

std::optional<RayHit> ray_sphere_impl(const Vec3& o, const Vec3& d,
                                      const Vec3& c, double r) {
  const Vec3 m = o - c;
  const double b = m.dot(d);
  const double cc = m.squaredNorm() - r * r;
  if (cc > 0.0 && b > 0.0) return std::nullopt;
  const double disc = b * b - cc;
  if (disc < 0.0) return std::nullopt;
  double t = -b - std::sqrt(disc);
  if (t < 0.0) t = 0.0;  // origin inside: clamp to surface exit? report entry at 0
  const Vec3 p = o + t * d;
  Vec3 n = p - c;
  const double len = n.norm();
  if (len > 0.0) n /= len;
  return RayHit{t, n};
}

}  // namespace

std::optional<RayHit> ray_sphere(const Vec3& origin, const Vec3& dir,
                                 const Vec3& center, double radius) {
  return ray_sphere_impl(origin, dir, center, radius);
}

std::optional<RayHit> ray_capsule(const Vec3& origin, const Vec3& dir,
                                  const Capsule& cap) {
  const Vec3 ab = cap.b - cap.a;
  const Vec3 ao = origin - cap.a;
  const double dd = ab.squaredNorm();
  const double r = cap.radius;

  if (dd <= 0.0) return ray_sphere_impl(origin, dir, cap.a, r);

  // Infinite-cylinder quadratic (RTCD 5.3.7 form), then cap spheres.
  const double nd = dir.dot(ab);
  const double md = ao.dot(ab);
  const double nn = 1.0;
  const double mn = ao.dot(dir);
  const double a = dd * nn - nd * nd;
  const double k = ao.squaredNorm() - r * r;
  const double c = dd * k - md * md;

  double t_cyl = -1.0;
  if (a > 1e-12 * dd) {
    const double b = dd * mn - nd * md;
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double t = (-b - std::sqrt(disc)) / a;
      if (t >= 0.0) {
        const double axial = md + t * nd;
        if (axial >= 0.0 && axial <= dd) t_cyl = t;
      }
    }
  }

  std::optional<RayHit> best;
  if (t_cyl >= 0.0) {
    const Vec3 p = origin + t_cyl * dir;
    const double s = (p - cap.a).dot(ab) / dd;
    Vec3 n = p - (cap.a + s * ab);
    const double len = n.norm();
    if (len > 0.0) n /= len;
    best = RayHit{t_cyl, n};
  }
  for (const Vec3& center : {cap.a, cap.b}) {
    const auto hit = ray_sphere_impl(origin, dir, center, r);
    if (hit && (!best || hit->t < best->t)) best = hit;
  }
  return best;
}

std::optional<RayHit> ray_aabb(const Vec3& origin, const Vec3& dir,
                               const Aabb& box) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  int axis = -1;
  double sign = 1.0;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(dir[i]) < 1e-15) {
      if (origin[i] < box.min[i] || origin[i] > box.max[i]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / dir[i];
    double t1 = (box.min[i] - origin[i]) * inv;
    double t2 = (box.max[i] - origin[i]) * inv;
    double face = -1.0;
    if (t1 > t2) {
      std::swap(t1, t2);
      face = 1.0;
    }
    if (t1 > tmin) {
      tmin = t1;
      axis = i;
      sign = face;
    }
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return std::nullopt;
  }
  if (axis < 0) {
    // origin inside the box
    return RayHit{0.0, -dir};
  }
  Vec3 n = Vec3::Zero();
  n[axis] = sign;
  return RayHit{tmin, n};
}

std::optional<RayHit> ray_box(const Vec3& origin, const Vec3& dir,
                              const Pose& world_from_box, const Vec3& half) {
  const Pose box_from_world = world_from_box.inverse();
  const Vec3 o_local = box_from_world * origin;
  const Vec3 d_local = box_from_world.linear() * dir;
  const Aabb local{-half, half};
  auto hit = ray_aabb(o_local, d_local, local);
  if (!hit) return std::nullopt;
  hit->normal = world_from_box.linear() * hit->normal;
  return hit;
}

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

int orientation(const Vec2& a, const Vec2& b, const Vec2& c, double eps = 1e-15) {
  const double v = cross2(b - a, c - a);
  if (v > eps) return 1;
  if (v < -eps) return -1;
  return 0;
}

bool on_segment_collinear(const Vec2& a, const Vec2& b, const Vec2& p) {
  return p.x() >= std::min(a.x(), b.x()) - 1e-15 &&
         p.x() <= std::max(a.x(), b.x()) + 1e-15 &&
         p.y() >= std::min(a.y(), b.y()) - 1e-15 &&
         p.y() <= std::max(a.y(), b.y()) + 1e-15;
}

bool point_on_segment2(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 q = closest_point_on_segment2(p, a, b);
  return (p - q).squaredNorm() <= 1e-24;
}

}  // namespace

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1,
                        const Vec2& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment_collinear(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment_collinear(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment_collinear(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment_collinear(q1, q2, p2)) return true;
  return false;
}

bool point_in_polygon(const Vec2& p, const Polygon2& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (point_on_segment2(p, poly[i], poly[(i + 1) % n])) return true;
  }
  // ray crossing count (ray toward +x)
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool polygons_disjoint(const Polygon2& a, const Polygon2& b) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      if (segments_intersect(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb])) {
        return false;
      }
    }
  }
  for (const Vec2& v : a) {
    if (point_in_polygon(v, b)) return false;
  }
  for (const Vec2& v : b) {
    if (point_in_polygon(v, a)) return false;
  }
  return true;
}

double polygon_area(const Polygon2& poly) {
  double acc = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    acc += cross2(poly[i], poly[(i + 1) % n]);
  }
  return 0.5 * std::abs(acc);
}

}  // namespace prunesim
