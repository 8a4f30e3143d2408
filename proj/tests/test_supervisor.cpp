#include <doctest.h>

#include <algorithm>

#include "prunesim/harness.hpp"
#include "prunesim/supervisor.hpp"

using namespace prunesim;

namespace {

Pose straight_start(const Vec3& aim, double back) {
  Pose pose = Pose::Identity();
  pose.translation() = aim - Vec3(0.0, 0.0, back);
  return pose;
}

bool records_equal(const EpisodeRecord& a, const EpisodeRecord& b) {
  if (a.final_state != b.final_state || a.zone != b.zone ||
      a.contact != b.contact || a.max_force != b.max_force ||
      a.vision_steps != b.vision_steps || a.interact_time != b.interact_time) {
    return false;
  }
  if ((a.final_tool_pose.matrix() - b.final_tool_pose.matrix()).norm() != 0.0) {
    return false;
  }
  if (a.final_branch_in_tool.has_value() != b.final_branch_in_tool.has_value()) {
    return false;
  }
  if (a.final_branch_in_tool &&
      (*a.final_branch_in_tool - *b.final_branch_in_tool).norm() != 0.0) {
    return false;
  }
  return true;
}

}  // namespace

TEST_CASE("estimate_target") {
  const Vec3 truth(0.2, 0.8, 0.0);
  Pose cam = Pose::Identity();
  cam.translation() = truth - Vec3(0.0, 0.0, 0.9);

  SUBCASE("no bias and no noise is exact") {
    RandomStream rng(1);
    const TargetEstimate est = estimate_target(truth, cam, {0.0, 0.0}, rng);
    CHECK((est.point - truth).norm() == 0.0);
    CHECK(est.source == EstimateSource::Exact);
  }
  SUBCASE("negative bias falls short along the viewing ray") {
    RandomStream rng(2);
    const TargetEstimate est = estimate_target(truth, cam, {-0.015, 0.0}, rng);
    const Vec3 ray = (truth - cam.translation()).normalized();
    CHECK((est.point - (truth - 0.015 * ray)).norm() < 1e-12);
    CHECK((est.point - truth).norm() == doctest::Approx(0.015));
    // short of the target: closer to the camera
    CHECK((est.point - cam.translation()).norm() <
          (truth - cam.translation()).norm());
  }
  SUBCASE("fixed seed reproduces the estimate") {
    RandomStream a(3), b(3);
    const TargetEstimate ea = estimate_target(truth, cam, {-0.015, 0.005}, a);
    const TargetEstimate eb = estimate_target(truth, cam, {-0.015, 0.005}, b);
    CHECK((ea.point - eb.point).norm() == 0.0);
  }
}

TEST_CASE("perturb_calibration") {
  Pose cam = Pose::Identity();
  cam.translation() = Vec3(0.1, 0.5, -0.7);
  cam.linear() = Eigen::AngleAxisd(0.3, Vec3::UnitY()).toRotationMatrix();

  SUBCASE("translation offset is exactly 1 cm") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      RandomStream rng(seed);
      const Pose out = perturb_calibration(cam, rng);
      CHECK((out.translation() - cam.translation()).norm() ==
            doctest::Approx(0.01).epsilon(1e-12));
    }
  }
  SUBCASE("rotation angle is exactly 5 degrees") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      RandomStream rng(seed);
      const Pose out = perturb_calibration(cam, rng);
      const Eigen::AngleAxisd rel(out.linear() * cam.linear().transpose());
      CHECK(rel.angle() == doctest::Approx(deg_to_rad(5.0)).epsilon(1e-9));
      // still a rigid transform
      const Mat3 should_be_identity = out.linear() * out.linear().transpose();
      CHECK((should_be_identity - Mat3::Identity()).norm() < 1e-12);
    }
  }
  SUBCASE("zero perturbation is the identity") {
    RandomStream rng(9);
    const Pose out = perturb_calibration(cam, rng, 0.0, 0.0);
    CHECK((out.matrix() - cam.matrix()).norm() < 1e-12);
  }
}

TEST_CASE("open-loop controller") {
  const SceneGraph scene = build_scene(SceneConfig{}, 91);
  const int target_id = 0;
  const PruneTarget& target = scene.targets[target_id];
  SupervisorConfig sup;

  SUBCASE("an estimate short of the branch stops in the air") {
    TargetEstimate est;
    // short enough that not even the blade tips reach the branch
    est.point = target.point - Vec3(0.0, 0.0, 0.08);
    const EpisodeRecord rec = run_open_loop(
        scene, target_id, est, sup, 1, straight_start(est.point, 0.15));
    CHECK(rec.final_state == HybridState::Done);
    CHECK(rec.zone == ZoneStatus::None);
    CHECK_FALSE(rec.contact);
    CHECK(rec.max_force == 0.0);
    // stopped within 1 mm of the estimate
    CHECK((rec.final_tool_pose.translation() - est.point).norm() <=
          sup.ol_stop_distance + 1e-9);
  }

  SUBCASE("an estimate behind the leader drives in with damaging force") {
    TargetEstimate est;
    est.point = target.leader_attach + Vec3(0.0, 0.0, 0.02);
    const EpisodeRecord rec = run_open_loop(
        scene, target_id, est, sup, 2, straight_start(est.point, 0.18));
    CHECK(rec.contact);
    CHECK(rec.max_force > 10.0);
  }

  SUBCASE("starting 1 mm from the estimate stops immediately") {
    TargetEstimate est;
    est.point = target.point - Vec3(0.0, 0.0, 0.05);
    const Pose start = straight_start(est.point, 0.0005);
    const EpisodeRecord rec = run_open_loop(scene, target_id, est, sup, 3, start);
    CHECK(rec.final_state == HybridState::Done);
    CHECK((rec.final_tool_pose.translation() - start.translation()).norm() == 0.0);
  }

  SUBCASE("commanded speed never exceeds the clamp") {
    // implied by construction; verify trajectory length per tick instead
    TargetEstimate est;
    est.point = target.point - Vec3(0.0, 0.0, 0.03);
    const Pose start = straight_start(est.point, 0.2);
    const EpisodeRecord rec = run_open_loop(scene, target_id, est, sup, 4, start);
    // total approach time must be at least distance / max_speed
    const double dist = (est.point - start.translation()).norm();
    CHECK(rec.vision_steps * 0.1 >= dist / sup.ol_max_speed - 0.2);
  }
}

TEST_CASE("closed-loop controller") {
  const SceneGraph scene = build_scene(SceneConfig{}, 91);
  const int target_id = 0;
  const PruneTarget& target = scene.targets[target_id];
  SupervisorConfig sup;

  SUBCASE("overshoot past an on-ray branch forces contact and interaction") {
    TargetEstimate est;
    est.point = target.point - Vec3(0.0, 0.0, 0.015);  // short, as the model says
    const EpisodeRecord rec = run_closed_loop(scene, target_id, est, sup, 5,
                                              straight_start(est.point, 0.15));
    CHECK(rec.contact);
    CHECK(rec.interact_time > 0.0);  // the admittance phase ran
    CHECK(rec.max_force < 10.0);
    CHECK(rec.zone == ZoneStatus::Success);
    CHECK(rec.final_state == HybridState::Done);
  }

  SUBCASE("no obstacle on the ray misses and fails") {
    TargetEstimate est;
    // aim above the whole trellis so the ray truly crosses empty space
    est.point = target.point + Vec3(0.0, 2.5, 0.0);
    const EpisodeRecord rec = run_closed_loop(scene, target_id, est, sup, 6,
                                              straight_start(est.point, 0.15));
    CHECK_FALSE(rec.contact);
    CHECK(rec.final_state == HybridState::Failed);
    CHECK(rec.zone == ZoneStatus::None);
  }

  SUBCASE("identical seeds give identical records") {
    TargetEstimate est;
    est.point = target.point - Vec3(0.002, 0.003, 0.015);
    const Pose start = straight_start(est.point, 0.16);
    const EpisodeRecord a = run_closed_loop(scene, target_id, est, sup, 7, start);
    const EpisodeRecord b = run_closed_loop(scene, target_id, est, sup, 7, start);
    CHECK(records_equal(a, b));
  }
}

TEST_CASE("hybrid controller with an untrained policy still funnels a dead-on start") {
  const SceneGraph scene = build_scene(SceneConfig{}, 91);
  const int target_id = 0;
  const PruneTarget& target = scene.targets[target_id];

  TaskSetConfig task;
  task.net_in_w = 40;
  task.net_in_h = 20;
  SupervisorConfig sup;

  NetArch arch;
  arch.in_w = 40;
  arch.in_h = 20;
  arch.convs = {{8, 8, 4}, {8, 4, 2}};
  arch.fc_dim = 32;
  PolicyNet<float> net(arch, 93);  // near-zero action means

  const Pose start = straight_start(target.point, 0.16);
  const EpisodeRecord rec =
      run_hybrid(scene, target_id, net, task, sup, 11, start);

  CHECK(rec.contact);
  CHECK(rec.final_state == HybridState::Done);
  CHECK(rec.termination_fired);
  CHECK(rec.zone == ZoneStatus::Success);
  CHECK(rec.max_force < 10.0);
  REQUIRE(rec.final_branch_in_tool.has_value());
  CHECK((*rec.final_branch_in_tool - scene.cutter.pivot).norm() < 0.006);

  SUBCASE("metrics read off the record") {
    const TrialMetrics m = compute_metrics(rec, scene, target);
    CHECK(m.accuracy);
    REQUIRE(m.pivot_offset.has_value());
    CHECK(*m.pivot_offset < 0.006);
    REQUIRE(m.remnant_length.has_value());
    CHECK(*m.remnant_length > 0.01);
    CHECK(*m.remnant_length < 0.06);
    CHECK(m.max_force == rec.max_force);
  }
}

TEST_CASE("hybrid vision phase fails on failure-zone entry without interacting") {
  const SceneGraph scene = build_scene(SceneConfig{}, 91);
  const int target_id = 0;
  const PruneTarget& target = scene.targets[target_id];

  TaskSetConfig task;
  task.net_in_w = 40;
  task.net_in_h = 20;
  SupervisorConfig sup;
  NetArch arch;
  arch.in_w = 40;
  arch.in_h = 20;
  arch.convs = {{8, 8, 4}, {8, 4, 2}};
  arch.fc_dim = 32;
  PolicyNet<float> net(arch, 93);  // near-zero actions: rides straight in

  // start aimed so the straight-in crossing passes through the blade band
  // while the disc is still clear of the edge (no early contact switch)
  const Polygon2& band = scene.cutter.failure_regions[0];
  const Vec2 q(0.019, 0.056);
  REQUIRE(point_in_polygon(q, band));
  Pose start = Pose::Identity();
  start.translation() = target.point - Vec3(0.0, q.x(), q.y() + 0.15);
  const EpisodeRecord rec = run_hybrid(scene, target_id, net, task, sup, 3, start);
  CHECK(rec.final_state == HybridState::Failed);
  CHECK(rec.interact_time == 0.0);
  CHECK(rec.zone == ZoneStatus::Failure);
}

TEST_CASE("compute_metrics handles the no-contact case") {
  const SceneGraph scene = build_scene(SceneConfig{}, 91);
  const PruneTarget& target = scene.targets[0];
  EpisodeRecord rec;
  rec.contact = false;
  rec.max_force = 0.0;
  rec.zone = ZoneStatus::None;
  rec.final_tool_pose = straight_start(target.point, 0.30);
  const TrialMetrics m = compute_metrics(rec, scene, target);
  CHECK_FALSE(m.accuracy);
  CHECK_FALSE(m.pivot_offset.has_value());
  CHECK(m.max_force == 0.0);
}

TEST_CASE("interaction trace csv carries the controller signals") {
  const CutterProfile profile = CutterProfile::make_default();
  SupervisorConfig sup;
  BranchState branch;
  branch.rest_position = Vec2(0.008, 0.03);
  branch.position = branch.rest_position;
  NoisySensor sensor({500.0, 0.05, 123});
  const InteractOutcome out = run_interaction(profile, branch, sup, sensor,
                                              nullptr, Pose::Identity(),
                                              WrenchFilter(), true);
  REQUIRE(!out.trace.empty());
  const std::string csv = interact_trace_csv(out.trace);
  CHECK(csv.find("time,raw_tx") == 0);
  CHECK(csv.find("err_fy") != std::string::npos);
  // one row per tick
  const std::size_t rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == out.trace.size() + 1);
}
