#include <doctest.h>

#include <set>

#include "prunesim/errors.hpp"
#include "prunesim/scene.hpp"

using namespace prunesim;

namespace {

// Pose whose yz-plane crossing of the target branch lands at the given
// (y, z) tool coordinates (identity orientation: crossing x equals tool x).
Pose pose_with_crossing_at(const PruneTarget& target, const Vec2& yz) {
  Pose pose = Pose::Identity();
  pose.translation() = target.point - Vec3(0.0, yz.x(), yz.y());
  return pose;
}

bool spindles_equal(const TreeSpindle& a, const TreeSpindle& b) {
  if (a.leader.size() != b.leader.size() ||
      a.side_branches.size() != b.side_branches.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.leader.size(); ++i) {
    if (a.leader[i].a != b.leader[i].a || a.leader[i].b != b.leader[i].b ||
        a.leader[i].radius != b.leader[i].radius) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.side_branches.size(); ++i) {
    if (a.side_branches[i].size() != b.side_branches[i].size()) return false;
    for (std::size_t j = 0; j < a.side_branches[i].size(); ++j) {
      if (a.side_branches[i][j].a != b.side_branches[i][j].a ||
          a.side_branches[i][j].b != b.side_branches[i][j].b) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST_CASE("build_scene is deterministic and matches the trellis layout") {
  const SceneConfig cfg;
  const SceneGraph a = build_scene(cfg, 7);
  const SceneGraph b = build_scene(cfg, 7);
  CHECK(scene_to_text(a) == scene_to_text(b));
  REQUIRE(a.spindles.size() == b.spindles.size());
  for (std::size_t i = 0; i < a.spindles.size(); ++i) {
    CHECK(spindles_equal(a.spindles[i], b.spindles[i]));
  }

  CHECK(a.spindles.size() == 3);
  CHECK(a.wires.size() == 2);
  CHECK(a.frame_boxes.size() >= 2);
  CHECK(!a.targets.empty());
  for (const TreeSpindle& sp : a.spindles) {
    CHECK(!sp.side_branches.empty());
  }
}

TEST_CASE("every target sits 3 cm (within tolerance) from its leader") {
  const SceneConfig cfg;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    const SceneGraph scene = build_scene(cfg, seed);
    for (const PruneTarget& t : scene.targets) {
      CHECK(t.arclength >= 0.025);
      CHECK(t.arclength <= 0.035);
      // the stored point really is at that arclength along the chain
      const auto& chain = scene.spindles[t.spindle_id].side_branches[t.branch_id];
      double walked = 0.0;
      Vec3 probe = chain.front().a;
      double remaining = t.arclength;
      for (const Capsule& seg : chain) {
        const double len = (seg.b - seg.a).norm();
        if (remaining <= len) {
          probe = seg.a + (remaining / len) * (seg.b - seg.a);
          break;
        }
        remaining -= len;
        walked += len;
      }
      CHECK((probe - t.point).norm() < 1e-9);
      CHECK((t.leader_attach - chain.front().a).norm() < 1e-12);
    }
  }
}

TEST_CASE("build_scene rejects invalid configs") {
  SceneConfig bad;
  bad.frame_width = -1.0;
  CHECK_THROWS_AS(build_scene(bad, 1), ConfigError);
  SceneConfig wires;
  wires.wire_heights = {0.5};
  CHECK_THROWS_AS(build_scene(wires, 1), ConfigError);
}

TEST_CASE("generate_spindle determinism and structure") {
  const SpindleParams params;
  const TreeSpindle a = generate_spindle(params, 3, 99);
  const TreeSpindle b = generate_spindle(params, 3, 99);
  CHECK(spindles_equal(a, b));

  SUBCASE("side branch radii stay below the leader's over many seeds") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const TreeSpindle sp = generate_spindle(params, static_cast<int>(seed % 8), seed);
      double min_leader = 1e9;
      for (const Capsule& seg : sp.leader) {
        CHECK(seg.radius > 0.0);
        min_leader = std::min(min_leader, seg.radius);
      }
      for (const auto& chain : sp.side_branches) {
        for (const Capsule& seg : chain) {
          CHECK(seg.radius > 0.0);
          CHECK(seg.radius < min_leader);
        }
      }
    }
  }

  SUBCASE("chains are connected") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const TreeSpindle sp = generate_spindle(params, 0, seed);
      for (std::size_t i = 1; i < sp.leader.size(); ++i) {
        CHECK((sp.leader[i].a - sp.leader[i - 1].b).norm() < 1e-12);
      }
      for (const auto& chain : sp.side_branches) {
        for (std::size_t i = 1; i < chain.size(); ++i) {
          CHECK((chain[i].a - chain[i - 1].b).norm() < 1e-12);
        }
      }
    }
  }

  SUBCASE("eight model ids give pairwise distinct geometry") {
    std::vector<TreeSpindle> models;
    for (int id = 0; id < 8; ++id) models.push_back(generate_spindle(params, id, 1234));
    for (int i = 0; i < 8; ++i) {
      for (int j = i + 1; j < 8; ++j) {
        CHECK_FALSE(spindles_equal(models[i], models[j]));
      }
    }
  }
}

TEST_CASE("cutter profile invariants") {
  const CutterProfile p = CutterProfile::make_default();
  // pivot is a polygon vertex
  bool pivot_vertex = false;
  for (const Vec2& v : p.mouth_polygon) {
    if ((v - p.pivot).norm() < 1e-15) pivot_vertex = true;
  }
  CHECK(pivot_vertex);
  // success region contains the mouth interior (sampled)
  RandomStream rng(5);
  for (int i = 0; i < 5000; ++i) {
    const Vec2 q(rng.uniform(-0.016, 0.016), rng.uniform(-0.001, 0.071));
    if (point_in_polygon(q, p.mouth_polygon)) {
      CHECK(point_in_polygon(q, p.success_region));
    }
  }
  // success region extends beyond the mouth opening plane
  CHECK(point_in_polygon({0.0, p.opening_depth + 0.5 * p.extension_depth},
                         p.success_region));
  REQUIRE(p.failure_regions.size() == 2);
  for (const Polygon2& band : p.failure_regions) {
    CHECK(polygons_disjoint(p.success_region, band));
  }
  CHECK(polygons_disjoint(p.failure_regions[0], p.failure_regions[1]));
}

TEST_CASE("query_zone examples") {
  const SceneGraph scene = build_scene(SceneConfig{}, 11);
  const PruneTarget& target = scene.targets.front();

  SUBCASE("branch center at the pivot is a success") {
    CHECK(query_zone(scene, pose_with_crossing_at(target, {0.0, 0.0}), target) ==
          ZoneStatus::Success);
  }
  SUBCASE("branch half a meter away is neither") {
    Pose far = Pose::Identity();
    far.translation() = target.point - Vec3(0.0, 0.0, 0.5);
    CHECK(query_zone(scene, far, target) == ZoneStatus::None);
  }
  SUBCASE("branch center inside the outer blade band is a failure") {
    const Polygon2& band = scene.cutter.failure_regions[0];
    Vec2 centroid = Vec2::Zero();
    for (const Vec2& v : band) centroid += v;
    centroid /= static_cast<double>(band.size());
    REQUIRE(point_in_polygon(centroid, band));  // oracle on the configured polygon
    CHECK(query_zone(scene, pose_with_crossing_at(target, centroid), target) ==
          ZoneStatus::Failure);
  }
  SUBCASE("point beyond the blade extent along x is no zone") {
    Pose pose = pose_with_crossing_at(target, {0.0, 0.0});
    pose.translation().x() += 0.5;  // branch chain no longer reaches the plane
    CHECK(query_zone(scene, pose, target) == ZoneStatus::None);
  }
}

TEST_CASE("zone sweep never flips directly between success and failure") {
  const SceneGraph scene = build_scene(SceneConfig{}, 13);
  const PruneTarget& target = scene.targets.front();
  RandomStream rng(17);
  for (int sweep = 0; sweep < 40; ++sweep) {
    // 1 cm straight-line sweeps in the tool plane around the blade area
    const Vec2 from(rng.uniform(-0.03, 0.03), rng.uniform(-0.01, 0.08));
    const double angle = rng.uniform(0.0, 2.0 * kPi);
    const Vec2 dir(std::cos(angle), std::sin(angle));
    ZoneStatus prev = ZoneStatus::None;
    bool first = true;
    for (double s = 0.0; s <= 0.01; s += 0.00008) {
      const Vec2 at = from + s * dir;
      const ZoneStatus cur =
          query_zone(scene, pose_with_crossing_at(target, at), target);
      if (!first) {
        const bool direct_flip =
            (prev == ZoneStatus::Success && cur == ZoneStatus::Failure) ||
            (prev == ZoneStatus::Failure && cur == ZoneStatus::Success);
        CHECK_FALSE(direct_flip);
      }
      prev = cur;
      first = false;
    }
  }
}

TEST_CASE("distance_to_target examples and oracle") {
  const SceneGraph scene = build_scene(SceneConfig{}, 19);
  const PruneTarget& target = scene.targets.front();

  Pose at = Pose::Identity();
  at.translation() = target.point;
  CHECK(distance_to_target(at, target) == doctest::Approx(0.0).epsilon(1e-12));

  Pose above = at;
  above.translation() += Vec3(0.0, 0.0, 0.15);
  CHECK(distance_to_target(above, target) == doctest::Approx(0.15));

  RandomStream rng(23);
  for (int i = 0; i < 100; ++i) {
    Pose pose = Pose::Identity();
    pose.translation() =
        Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    pose.linear() =
        Eigen::AngleAxisd(rng.uniform(0, kPi), rng.unit_vector()).toRotationMatrix();
    const Vec3 diff = pose.translation() - target.point;
    const double brute =
        std::sqrt(diff.x() * diff.x() + diff.y() * diff.y() + diff.z() * diff.z());
    CHECK(distance_to_target(pose, target) == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("branch_remnant_length examples") {
  const SceneGraph scene = build_scene(SceneConfig{}, 29);
  const PruneTarget& target = scene.targets.front();

  SUBCASE("cut plane through the target point leaves ~3 cm") {
    Pose pose = Pose::Identity();
    pose.translation() = target.point;
    const auto remnant = branch_remnant_length(scene, pose, target);
    REQUIRE(remnant.has_value());
    CHECK(*remnant == doctest::Approx(target.arclength).epsilon(1e-9));
    CHECK(*remnant > 0.02);
    CHECK(*remnant < 0.04);
  }
  SUBCASE("cut plane through the leader attachment leaves zero") {
    Pose pose = Pose::Identity();
    pose.translation() = target.leader_attach;
    const auto remnant = branch_remnant_length(scene, pose, target);
    REQUIRE(remnant.has_value());
    CHECK(*remnant == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("plane that misses the branch is not cuttable") {
    Pose pose = Pose::Identity();
    pose.translation() = target.point + Vec3(5.0, 0.0, 0.0);
    CHECK_FALSE(branch_remnant_length(scene, pose, target).has_value());
  }
}

TEST_CASE("remnant of a straight synthetic branch cut at midpoint is half") {
  // hand-built scene: one straight branch along +x
  SceneGraph scene;
  scene.cutter = CutterProfile::make_default();
  TreeSpindle sp;
  sp.leader.push_back({{0, 0, 0}, {0, 1, 0}, 0.01});
  sp.side_branches.push_back({Capsule{{0, 0.5, 0}, {0.2, 0.5, 0}, 0.003}});
  scene.spindles.push_back(sp);
  PruneTarget target;
  target.spindle_id = 0;
  target.branch_id = 0;
  target.point = Vec3(0.03, 0.5, 0);
  target.leader_attach = Vec3(0, 0.5, 0);
  target.arclength = 0.03;
  scene.targets.push_back(target);

  Pose pose = Pose::Identity();
  pose.translation() = Vec3(0.1, 0.5, 0.0);  // plane at the branch midpoint
  const auto remnant = branch_remnant_length(scene, pose, target);
  REQUIRE(remnant.has_value());
  CHECK(*remnant == doctest::Approx(0.1).epsilon(1e-12));
}
