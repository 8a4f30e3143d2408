#include "prunesim/scene.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "prunesim/errors.hpp"

namespace prunesim {

namespace {

// Offset a polyline sideways. `normals` holds the per-segment offset
// direction; joints are mitered (intersection of the two offset lines).
std::vector<Vec2> offset_polyline(const std::vector<Vec2>& pts,
                                  const std::vector<Vec2>& normals,
                                  double distance) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  out.push_back(pts.front() + distance * normals.front());
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec2& n0 = normals[i - 1];
    const Vec2& n1 = normals[i];
    const double denom = 1.0 + n0.dot(n1);
    out.push_back(pts[i] + distance * (n0 + n1) / denom);
  }
  out.push_back(pts.back() + distance * normals.back());
  return out;
}

Polygon2 band_along(const std::vector<Vec2>& chain, const std::vector<Vec2>& normals,
                    double gap, double width) {
  const auto inner = offset_polyline(chain, normals, gap);
  auto outer = offset_polyline(chain, normals, gap + width);
  Polygon2 poly = inner;
  std::reverse(outer.begin(), outer.end());
  poly.insert(poly.end(), outer.begin(), outer.end());
  return poly;
}

std::vector<Vec2> outward_normals(const std::vector<Vec2>& chain, double side) {
  // side = +1 for the upper (+y) blade, -1 for the lower. Outward means away
  // from the funnel interior.
  std::vector<Vec2> normals;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    const Vec2 d = (chain[i + 1] - chain[i]).normalized();
    Vec2 n(d.y(), -d.x());  // clockwise rotation
    if (n.x() * side < 0.0) n = -n;
    normals.push_back(n);
  }
  return normals;
}

}  // namespace

CutterProfile CutterProfile::make_default() {
  CutterProfile p;
  const double w = p.opening_half_width;
  const double d = p.opening_depth;
  const double sw = p.seat_half_width;
  const double sd = p.seat_depth;
  const double ext = d + p.extension_depth;

  p.mouth_polygon = {{0.0, 0.0}, {sw, sd}, {w, d}, {-w, d}, {-sw, sd}};
  p.success_region = {{0.0, 0.0}, {sw, sd},  {w, d},   {w, ext},
                      {-w, ext},  {-w, d},   {-sw, sd}};

  p.blade_edges = {{{0.0, 0.0}, {sw, sd}, {w, d}},
                   {{0.0, 0.0}, {-sw, sd}, {-w, d}}};

  for (double side : {1.0, -1.0}) {
    const auto& chain = p.blade_edges[side > 0 ? 0 : 1];
    const auto normals = outward_normals(chain, side);
    p.failure_regions.push_back(
        band_along(chain, normals, p.failure_band_gap, p.failure_band_width));
  }

  // zone exclusivity holds by construction; refuse to build a profile
  // whose polygons would overlap
  for (const Polygon2& band : p.failure_regions) {
    if (!polygons_disjoint(p.success_region, band)) {
      throw std::logic_error("cutter profile: success and failure regions overlap");
    }
  }
  return p;
}

TreeSpindle generate_spindle(const SpindleParams& params, int model_id,
                             std::uint64_t seed) {
  TreeSpindle spindle;
  spindle.model_id = model_id;
  RandomStream rng(derive_seed(seed, {static_cast<std::uint64_t>(model_id)}));

  // Leader: near-vertical chain from the base, radius tapering upward.
  const int nseg = params.leader_segments;
  const double seg_h = params.leader_height / nseg;
  Vec3 cur(0.0, 0.0, 0.0);
  for (int i = 0; i < nseg; ++i) {
    const Vec3 next = cur + Vec3(rng.uniform(-params.leader_waver, params.leader_waver),
                                 seg_h,
                                 rng.uniform(-params.leader_waver, params.leader_waver) * 0.3);
    const double t = (i + 0.5) / nseg;
    const double radius =
        params.leader_radius_base +
        t * (params.leader_radius_tip - params.leader_radius_base);
    spindle.leader.push_back({cur, next, radius});
    cur = next;
  }

  // Side branches at stratified heights, alternating sides of the leader.
  const int n_branches =
      static_cast<int>(rng.uniform_int(params.min_branches, params.max_branches));
  const double h_span = params.branch_height_max - params.branch_height_min;
  for (int b = 0; b < n_branches; ++b) {
    const double bin_lo = params.branch_height_min + h_span * b / n_branches;
    const double bin_hi = params.branch_height_min + h_span * (b + 1) / n_branches;
    const double height = rng.uniform(bin_lo + 0.1 * (bin_hi - bin_lo),
                                      bin_hi - 0.1 * (bin_hi - bin_lo));

    // attachment point on the leader axis at that height
    Vec3 attach = spindle.leader.front().a;
    for (const Capsule& seg : spindle.leader) {
      if (seg.b.y() >= height || &seg == &spindle.leader.back()) {
        const double denom = seg.b.y() - seg.a.y();
        const double t = denom > 0.0 ? std::clamp((height - seg.a.y()) / denom, 0.0, 1.0) : 0.0;
        attach = seg.a + t * (seg.b - seg.a);
        break;
      }
    }

    const double side = (b % 2 == 0) ? 1.0 : -1.0;
    const double azimuth = rng.uniform(-params.branch_azimuth_jitter,
                                       params.branch_azimuth_jitter);
    double elevation = rng.uniform(params.branch_elevation_min,
                                   params.branch_elevation_max);
    const double length = rng.uniform(params.branch_length_min,
                                      params.branch_length_max);
    const double radius = rng.uniform(params.branch_radius_min,
                                      params.branch_radius_max);

    std::vector<Capsule> chain;
    Vec3 p = attach;
    const double seg_len = length / params.branch_segments;
    for (int s = 0; s < params.branch_segments; ++s) {
      const Vec3 dir(side * std::cos(elevation) * std::cos(azimuth),
                     std::sin(elevation),
                     std::cos(elevation) * std::sin(azimuth));
      const Vec3 next = p + seg_len * dir;
      chain.push_back({p, next, radius});
      p = next;
      elevation = std::max(0.0, elevation + rng.uniform(-0.15, 0.05));
    }
    spindle.side_branches.push_back(std::move(chain));
  }
  return spindle;
}

namespace {

double chain_length(const std::vector<Capsule>& chain) {
  double len = 0.0;
  for (const Capsule& seg : chain) len += (seg.b - seg.a).norm();
  return len;
}

Vec3 chain_point_at(const std::vector<Capsule>& chain, double arclength) {
  double remaining = arclength;
  for (const Capsule& seg : chain) {
    const double len = (seg.b - seg.a).norm();
    if (remaining <= len || &seg == &chain.back()) {
      const double t = len > 0.0 ? std::clamp(remaining / len, 0.0, 1.0) : 0.0;
      return seg.a + t * (seg.b - seg.a);
    }
    remaining -= len;
  }
  return chain.back().b;
}

}  // namespace

SceneGraph build_scene(const SceneConfig& config, std::uint64_t seed) {
  if (config.frame_width <= 0.0 || config.frame_height <= 0.0 ||
      config.post_half_width <= 0.0 || config.wire_radius <= 0.0 ||
      config.spindle_count <= 0 || config.model_pool_size <= 0 ||
      config.target_arclength <= 0.0) {
    throw ConfigError("scene: dimensions must be positive");
  }
  if (config.wire_heights.size() != 2) {
    throw ConfigError("scene: trellis carries exactly two wires");
  }
  for (double h : config.wire_heights) {
    if (h <= 0.0 || h >= config.frame_height) {
      throw ConfigError("scene: wire heights must lie within the frame");
    }
  }

  SceneGraph scene;
  scene.rng_seed = seed;
  scene.cutter = CutterProfile::make_default();
  RandomStream rng(derive_seed(seed, {0xabcdefULL}));

  // Wooden frame: two posts and a top rail, axis-aligned boxes.
  const double half_span = 0.5 * config.frame_width;
  const double ph = config.post_half_width;
  for (double sx : {-1.0, 1.0}) {
    const double cx = sx * (half_span + ph);
    scene.frame_boxes.push_back(
        {{cx - ph, 0.0, -ph}, {cx + ph, config.frame_height, ph}});
  }
  scene.frame_boxes.push_back({{-half_span - 2.0 * ph, config.frame_height, -ph},
                               {half_span + 2.0 * ph, config.frame_height + 2.0 * ph, ph}});

  for (double h : config.wire_heights) {
    scene.wires.push_back({{-half_span - ph, h, 0.0}, {half_span + ph, h, 0.0},
                           config.wire_radius});
  }

  // Spindles: models drawn from the pre-generated pool, placed across the row.
  std::vector<int> pool(config.model_pool_size);
  for (int i = 0; i < config.model_pool_size; ++i) pool[i] = i;
  for (int i = config.model_pool_size - 1; i > 0; --i) {
    std::swap(pool[i], pool[rng.uniform_int(0, i)]);
  }

  for (int s = 0; s < config.spindle_count; ++s) {
    const int model_id = pool[s % config.model_pool_size];
    TreeSpindle spindle =
        generate_spindle(config.spindle, model_id, config.spindle.model_seed);
    const double cx =
        -half_span + config.frame_width * (s + 1) / (config.spindle_count + 1);
    const Vec3 offset(cx, 0.0, 0.0);
    for (Capsule& seg : spindle.leader) {
      seg.a += offset;
      seg.b += offset;
    }
    for (auto& chain : spindle.side_branches) {
      for (Capsule& seg : chain) {
        seg.a += offset;
        seg.b += offset;
      }
    }
    scene.spindles.push_back(std::move(spindle));
  }

  // One prune target per side branch, ~3 cm out from the leader.
  for (int s = 0; s < static_cast<int>(scene.spindles.size()); ++s) {
    const TreeSpindle& spindle = scene.spindles[s];
    for (int b = 0; b < static_cast<int>(spindle.side_branches.size()); ++b) {
      const auto& chain = spindle.side_branches[b];
      PruneTarget target;
      target.spindle_id = s;
      target.branch_id = b;
      target.arclength =
          config.target_arclength +
          rng.uniform(-config.target_arclength_jitter, config.target_arclength_jitter);
      target.arclength = std::min(target.arclength, chain_length(chain));
      target.point = chain_point_at(chain, target.arclength);
      target.leader_attach = chain.front().a;
      scene.targets.push_back(target);
    }
  }
  return scene;
}

BranchPlanePoint branch_plane_point(const SceneGraph& scene, const Pose& tool_pose,
                                    const PruneTarget& target) {
  const auto& chain =
      scene.spindles.at(target.spindle_id).side_branches.at(target.branch_id);
  const Pose tool_from_world = tool_pose.inverse();

  BranchPlanePoint result;
  result.crossed = false;

  double arc = 0.0;
  double best_abs_x = std::numeric_limits<double>::infinity();
  for (const Capsule& seg : chain) {
    const Vec3 a = tool_from_world * seg.a;
    const Vec3 b = tool_from_world * seg.b;
    const double len = (seg.b - seg.a).norm();
    if ((a.x() <= 0.0 && b.x() >= 0.0) || (a.x() >= 0.0 && b.x() <= 0.0)) {
      const double denom = b.x() - a.x();
      const double t = std::abs(denom) > 1e-15 ? -a.x() / denom : 0.0;
      result.point_tool = a + t * (b - a);
      result.point_world = seg.a + t * (seg.b - seg.a);
      result.arclength = arc + t * len;
      result.radius = seg.radius;
      result.crossed = true;
      return result;
    }
    for (const Vec3* p : {&a, &b}) {
      if (std::abs(p->x()) < best_abs_x) {
        best_abs_x = std::abs(p->x());
        result.point_tool = *p;
        result.point_world = (p == &a) ? seg.a : seg.b;
        result.arclength = (p == &a) ? arc : arc + len;
        result.radius = seg.radius;
      }
    }
    arc += len;
  }
  return result;
}

ZoneStatus classify_tool_plane_point(const CutterProfile& profile, const Vec2& yz) {
  if (point_in_polygon(yz, profile.success_region)) return ZoneStatus::Success;
  for (const Polygon2& band : profile.failure_regions) {
    if (point_in_polygon(yz, band)) return ZoneStatus::Failure;
  }
  return ZoneStatus::None;
}

ZoneStatus query_zone(const SceneGraph& scene, const Pose& cutter_pose,
                      const PruneTarget& target) {
  const CutterProfile& cutter = scene.cutter;
  const BranchPlanePoint bp = branch_plane_point(scene, cutter_pose, target);
  if (std::abs(bp.point_tool.x()) > cutter.mouth_half_width_x) {
    return ZoneStatus::None;
  }
  return classify_tool_plane_point(cutter,
                                   Vec2(bp.point_tool.y(), bp.point_tool.z()));
}

double distance_to_target(const Pose& cutter_pose, const PruneTarget& target) {
  return (cutter_pose.translation() - target.point).norm();
}

std::optional<double> branch_remnant_length(const SceneGraph& scene,
                                            const Pose& cutter_pose,
                                            const PruneTarget& target) {
  const BranchPlanePoint bp = branch_plane_point(scene, cutter_pose, target);
  if (!bp.crossed) return std::nullopt;
  return bp.arclength;
}

std::string scene_to_text(const SceneGraph& scene) {
  std::ostringstream os;
  os << "scene seed " << scene.rng_seed << "\n";
  for (const Aabb& box : scene.frame_boxes) {
    os << "frame_box " << box.min.transpose() << "  " << box.max.transpose() << "\n";
  }
  for (const Capsule& wire : scene.wires) {
    os << "wire " << wire.a.transpose() << "  " << wire.b.transpose() << "  r "
       << wire.radius << "\n";
  }
  for (std::size_t s = 0; s < scene.spindles.size(); ++s) {
    const TreeSpindle& sp = scene.spindles[s];
    os << "spindle " << s << " model " << sp.model_id << "\n";
    for (const Capsule& seg : sp.leader) {
      os << "  leader " << seg.a.transpose() << "  " << seg.b.transpose() << "  r "
         << seg.radius << "\n";
    }
    for (std::size_t b = 0; b < sp.side_branches.size(); ++b) {
      for (const Capsule& seg : sp.side_branches[b]) {
        os << "  branch " << b << " " << seg.a.transpose() << "  "
           << seg.b.transpose() << "  r " << seg.radius << "\n";
      }
    }
  }
  for (std::size_t t = 0; t < scene.targets.size(); ++t) {
    const PruneTarget& target = scene.targets[t];
    os << "target " << t << " spindle " << target.spindle_id << " branch "
       << target.branch_id << " point " << target.point.transpose() << " arclength "
       << target.arclength << "\n";
  }
  return os.str();
}

}  // namespace prunesim
