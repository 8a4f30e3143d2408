#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prunesim/geometry.hpp"

namespace prunesim {

// World frame convention used throughout: +x runs along the trellis row,
// +y is up, +z points from the robot toward the trellis. The trellis plane
// is z = 0. Tool frame: x left-right, y up-down, z in-out (approach
// direction), with the origin at the cutter pivot.

enum class ZoneStatus { None, Success, Failure };

// 2D blade-profile geometry in the tool yz-plane, (y, z) coordinates with the
// pivot at the origin and the mouth opening facing +z. The funnel has two
// stages: a steep seating vee at the pivot (so a branch disc comes to rest
// next to the pivot itself) and a wide catch taper out to the opening.
struct CutterProfile {
  Vec2 pivot = Vec2::Zero();
  Polygon2 mouth_polygon;                 // funnel interior, pivot is a vertex
  Polygon2 success_region;                // mouth + extension past the opening
  std::vector<Polygon2> failure_regions;  // bands along the outer blade edges
  double mouth_half_width_x = 0.015;      // blade extent along tool x

  double opening_half_width = 0.015;  // half width at the opening plane
  double opening_depth = 0.060;       // z of the opening plane
  double seat_half_width = 0.006;     // y extent of the seating vee
  double seat_depth = 0.0034641016;   // z extent of the seating vee (60 deg walls)
  double extension_depth = 0.010;     // success region past the opening plane
  double failure_band_gap = 0.001;    // clearance between blade edge and band
  double failure_band_width = 0.010;

  // Blade edge polylines (pivot outward), used by the contact model:
  // [0] upper (+y) blade, [1] lower (-y) blade.
  std::vector<std::vector<Vec2>> blade_edges;

  static CutterProfile make_default();
};

struct SpindleParams {
  double leader_height = 1.5;
  int leader_segments = 5;
  double leader_radius_base = 0.012;
  double leader_radius_tip = 0.006;
  double leader_waver = 0.015;  // max lateral offset per segment

  int min_branches = 3;
  int max_branches = 8;
  double branch_height_min = 0.35;
  double branch_height_max = 1.35;
  double branch_length_min = 0.15;
  double branch_length_max = 0.30;
  double branch_radius_min = 0.0025;
  double branch_radius_max = 0.0045;
  int branch_segments = 3;
  double branch_azimuth_jitter = 0.25;    // rad, deviation from the row axis
  double branch_elevation_min = 0.10;     // rad above horizontal
  double branch_elevation_max = 0.45;

  std::uint64_t model_seed = 1234;  // pins the pre-generated model pool
};

struct SceneConfig {
  double frame_width = 1.8;    // inner span along x
  double frame_height = 2.0;
  double post_half_width = 0.045;
  std::vector<double> wire_heights = {0.60, 1.20};
  double wire_radius = 0.0015;
  int spindle_count = 3;
  int model_pool_size = 8;
  SpindleParams spindle;
  double target_arclength = 0.030;
  double target_arclength_jitter = 0.004;
};

struct TreeSpindle {
  std::vector<Capsule> leader;                      // connected chain, base first
  std::vector<std::vector<Capsule>> side_branches;  // each rooted on the leader
  int model_id = 0;
};

struct PruneTarget {
  Vec3 point;           // the cut point p_cut
  int spindle_id = 0;
  int branch_id = 0;
  double arclength = 0.0;  // along the branch from the leader attachment
  Vec3 leader_attach;
};

struct SceneGraph {
  std::vector<Aabb> frame_boxes;
  std::vector<Capsule> wires;
  std::vector<TreeSpindle> spindles;
  std::vector<PruneTarget> targets;
  std::uint64_t rng_seed = 0;
  CutterProfile cutter;
};

// Point where a target's branch centerline meets the tool yz-plane.
struct BranchPlanePoint {
  Vec3 point_tool;   // in tool coordinates
  Vec3 point_world;
  double arclength;  // from the leader attachment along the branch
  double radius;     // branch radius at that point
  bool crossed;      // false: plane not reached; point is the nearest chain vertex
};

SceneGraph build_scene(const SceneConfig& config, std::uint64_t seed);

TreeSpindle generate_spindle(const SpindleParams& params, int model_id,
                             std::uint64_t seed);

// Where the target branch meets the cutter plane (tool x = 0). When the chain
// does not reach the plane the closest chain vertex is reported with
// crossed = false.
BranchPlanePoint branch_plane_point(const SceneGraph& scene, const Pose& tool_pose,
                                    const PruneTarget& target);

// Classification of a (y, z) point against the success/failure regions,
// without the tool-x gate.
ZoneStatus classify_tool_plane_point(const CutterProfile& profile, const Vec2& yz);

ZoneStatus query_zone(const SceneGraph& scene, const Pose& cutter_pose,
                      const PruneTarget& target);

double distance_to_target(const Pose& cutter_pose, const PruneTarget& target);

// Arclength that would remain between the leader and a cut along the tool
// yz-plane. Empty when the branch does not cross the cut plane.
std::optional<double> branch_remnant_length(const SceneGraph& scene,
                                            const Pose& cutter_pose,
                                            const PruneTarget& target);

// Plain-text geometry dump for debugging.
std::string scene_to_text(const SceneGraph& scene);

}  // namespace prunesim
