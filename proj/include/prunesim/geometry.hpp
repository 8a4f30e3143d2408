#pragma once

#include <optional>
#include <vector>

#include "prunesim/math.hpp"

namespace prunesim {

struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius = 0.0;
};

struct Aabb {
  Vec3 min;
  Vec3 max;

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 half() const { return 0.5 * (max - min); }
};

struct RayHit {
  double t = 0.0;   // distance along the (unit) ray direction
  Vec3 normal;      // outward surface normal at the hit point
};

struct Segment2 {
  Vec2 a;
  Vec2 b;
};

using Polygon2 = std::vector<Vec2>;

// --- closest-point helpers ---

// Returns the parameter s in [0,1] of the point on segment [a,b] closest to p.
double closest_param_on_segment(const Vec3& p, const Vec3& a, const Vec3& b);
Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b);

double closest_param_on_segment2(const Vec2& p, const Vec2& a, const Vec2& b);
Vec2 closest_point_on_segment2(const Vec2& p, const Vec2& a, const Vec2& b);

// --- ray casts (direction must be unit length; hits at t >= 0 only) ---

std::optional<RayHit> ray_capsule(const Vec3& origin, const Vec3& dir,
                                  const Capsule& cap);
std::optional<RayHit> ray_aabb(const Vec3& origin, const Vec3& dir,
                               const Aabb& box);
// Box centered at the origin of `box_from_world` with the given half extents.
std::optional<RayHit> ray_box(const Vec3& origin, const Vec3& dir,
                              const Pose& world_from_box, const Vec3& half);
std::optional<RayHit> ray_sphere(const Vec3& origin, const Vec3& dir,
                                 const Vec3& center, double radius);

// --- 2D polygon utilities (used for the cutter zone geometry) ---

// Boundary counts as inside (closed polygon semantics).
bool point_in_polygon(const Vec2& p, const Polygon2& poly);

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1,
                        const Vec2& q2);

// True when the two polygons share no point (interiors and boundaries).
bool polygons_disjoint(const Polygon2& a, const Polygon2& b);

double polygon_area(const Polygon2& poly);

}  // namespace prunesim
