#include "prunesim/supervisor.hpp"

#include <cmath>
#include <sstream>

namespace prunesim {

const char* hybrid_state_name(HybridState s) {
  switch (s) {
    case HybridState::Approach: return "Approach";
    case HybridState::Interact: return "Interact";
    case HybridState::Done: return "Done";
    case HybridState::Failed: return "Failed";
  }
  return "?";
}

const char* controller_name(ControllerId id) {
  switch (id) {
    case ControllerId::Hybrid: return "hybrid";
    case ControllerId::ClosedLoop: return "cl";
    case ControllerId::OpenLoop: return "ol";
    case ControllerId::OpenLoopMiscal: return "ol-";
  }
  return "?";
}

TargetEstimate estimate_target(const Vec3& true_point, const Pose& camera_pose,
                               const DepthErrorModel& model, RandomStream& rng) {
  TargetEstimate est;
  const Vec3 ray = (true_point - camera_pose.translation()).normalized();
  Vec3 noise(0.0, 0.0, 0.0);
  if (model.noise_std > 0.0) {
    noise = Vec3(rng.normal(), rng.normal(), rng.normal()) * model.noise_std;
  }
  est.point = true_point + model.bias * ray + noise;
  est.source = (model.bias == 0.0 && model.noise_std == 0.0) ? EstimateSource::Exact
                                                             : EstimateSource::DepthModel;
  return est;
}

Pose perturb_calibration(const Pose& camera_pose, RandomStream& rng,
                         double translation, double angle_deg) {
  const Vec3 dir = rng.unit_vector();
  const Vec3 axis = rng.unit_vector();
  Pose out = camera_pose;
  out.translation() += translation * dir;
  out.linear() =
      Eigen::AngleAxisd(deg_to_rad(angle_deg), axis).toRotationMatrix() * camera_pose.linear();
  return out;
}

std::string interact_trace_csv(const std::vector<InteractTraceRow>& rows) {
  std::ostringstream os;
  os << "time,raw_tx,raw_ty,raw_tz,raw_fx,raw_fy,raw_fz,filt_tx,filt_ty,filt_tz,"
        "filt_fx,filt_fy,filt_fz,err_fy,err_fz,accel_y,accel_z,twist_y,twist_z,"
        "branch_y,branch_z,penetration\n";
  for (const InteractTraceRow& r : rows) {
    os << r.time;
    for (int i = 0; i < 6; ++i) os << "," << r.raw[i];
    for (int i = 0; i < 6; ++i) os << "," << r.filtered[i];
    os << "," << r.err_y << "," << r.err_z << "," << r.accel_y << "," << r.accel_z
       << "," << r.twist_y << "," << r.twist_z << "," << r.branch_y << ","
       << r.branch_z << "," << r.penetration << "\n";
  }
  return os.str();
}

InteractOutcome run_interaction(const CutterProfile& profile, BranchState branch,
                                const SupervisorConfig& sup, NoisySensor sensor,
                                const RigidContactModel* rigid, Pose tool_pose,
                                WrenchFilter filter, bool keep_trace) {
  sup.gains.validate();
  const double dt = sup.gains.inner_dt;
  TerminationWindow window(1.0, dt);
  Vec6 twist = Vec6::Zero();
  Vec2 tool_offset = Vec2::Zero();  // (y, z) in the interaction frame

  InteractOutcome out;
  const long max_ticks = std::lround(sup.interact_timeout / dt);
  for (long tick = 0; tick < max_ticks; ++tick) {
    const Vec2 branch_in_tool = branch.position - tool_offset;
    Vec2 f_branch = Vec2::Zero();
    Wrench w = contact_wrench(profile, branch_in_tool, branch.radius,
                              sup.plant.k_contact, &f_branch);
    if (rigid != nullptr) w += rigid->wrench(tool_pose);
    out.max_force = std::max(out.max_force, wrench_force(w).norm());

    const Wrench sensed = sensor.sample(w);
    const Wrench filtered = filter.push(sensed);
    const AdmittanceStep adm = admittance_step(sup.gains, filtered, twist);
    twist = adm.new_twist;
    tool_offset[0] += twist[4] * dt;
    tool_offset[1] += twist[5] * dt;
    tool_pose.translation() += tool_pose.linear() * Vec3(0.0, twist[4], twist[5]) * dt;
    branch = branch_dynamics_step(branch, f_branch, dt);
    window.push(filtered[0], tool_offset[0], tool_offset[1]);

    if (keep_trace) {
      const Wrench err = sup.gains.desired_wrench - select(sup.gains.selection, filtered);
      const Vec2 in_tool = branch.position - tool_offset;
      double depth = 0.0;
      for (const auto& chain : profile.blade_edges) {
        for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
          const Vec2 q = closest_point_on_segment2(in_tool, chain[i], chain[i + 1]);
          depth = std::max(depth, branch.radius - (in_tool - q).norm());
        }
      }
      out.trace.push_back({(tick + 1) * dt, sensed, filtered, err[4], err[5],
                           adm.accel[4], adm.accel[5], twist[4], twist[5],
                           in_tool[0], in_tool[1], depth});
    }
    out.elapsed = (tick + 1) * dt;
    if (window.check(sup.gains.desired_wrench[0])) {
      out.terminated = true;
      break;
    }
  }
  out.branch_in_tool = branch.position - tool_offset;
  out.final_tool_pose = tool_pose;
  return out;
}

namespace {

Vec2 tool_plane_yz(const Vec3& point_tool) {
  return Vec2(point_tool.y(), point_tool.z());
}

// Rigid-branch blade wrench during the approach phases.
Wrench approach_wrench(const SceneGraph& scene, const Pose& pose,
                       const PruneTarget& target, const RigidContactModel& rigid,
                       double k_contact) {
  const BranchPlanePoint bp = branch_plane_point(scene, pose, target);
  Wrench w = Wrench::Zero();
  if (std::abs(bp.point_tool.x()) <= scene.cutter.mouth_half_width_x) {
    w = contact_wrench(scene.cutter, tool_plane_yz(bp.point_tool), bp.radius,
                       k_contact);
  }
  return w + rigid.wrench(pose);
}

struct PhaseSensing {
  NoisySensor sensor;
  WrenchFilter filter;
  double max_force = 0.0;
  bool contact = false;

  explicit PhaseSensing(const SensorModel& model) : sensor(model) {}

  // Returns the filtered wrench after pushing one sample.
  Wrench push(const Wrench& true_wrench) {
    const double f = wrench_force(true_wrench).norm();
    max_force = std::max(max_force, f);
    if (f > 1e-9) contact = true;
    return filter.push(sensor.sample(true_wrench));
  }
};

ZoneStatus final_zone(const SceneGraph& scene, const Pose& pose,
                      const PruneTarget& target,
                      const std::optional<Vec2>& deformed_branch) {
  if (deformed_branch.has_value()) {
    const BranchPlanePoint bp = branch_plane_point(scene, pose, target);
    if (std::abs(bp.point_tool.x()) > scene.cutter.mouth_half_width_x) {
      return ZoneStatus::None;
    }
    return classify_tool_plane_point(scene.cutter, *deformed_branch);
  }
  return query_zone(scene, pose, target);
}

}  // namespace

EpisodeRecord run_hybrid(const SceneGraph& scene, int target_id,
                         PolicyNet<float>& policy, const TaskSetConfig& task,
                         const SupervisorConfig& sup, std::uint64_t seed,
                         const std::optional<Pose>& start_pose) {
  const PruneTarget& target = scene.targets.at(target_id);
  const EnvConfig slow = task.env.with_speed(sup.vision_speed);
  ApproachEnv env(&scene, slow, task.camera);
  SegmentedImage obs = start_pose.has_value()
                           ? env.reset_at(target, *start_pose)
                           : env.reset(target, derive_seed(seed, {0x57ULL}));
  Pose pose = env.tool_pose();

  EpisodeRecord rec;
  rec.controller = ControllerId::Hybrid;
  rec.target_id = target_id;
  rec.seed = seed;

  const RigidContactModel rigid(scene, sup.plant.k_contact, target.spindle_id,
                                target.branch_id);
  PhaseSensing sensing({sup.plant.sensor_rate, sup.plant.sensor_noise_std,
                        derive_seed(seed, {0x5e5ULL})});
  HybridState state = HybridState::Approach;

  const double inner_dt = sup.gains.inner_dt;
  const int ticks_per_step = static_cast<int>(std::lround(slow.dt / inner_dt));
  Mat<float> input(policy.arch().input_dim(), 1);

  for (int step = 0; step < slow.n_steps() && state == HybridState::Approach; ++step) {
    input.col(0) = encode_observation(obs, task.net_in_w, task.net_in_h);
    policy.forward(input);
    PolicyAction action{std::clamp<double>(policy.action_mean()(0, 0), -1.0, 1.0),
                        std::clamp<double>(policy.action_mean()(1, 0), -1.0, 1.0)};
    const Vec3 v_tool = compose_velocity(action, slow.s_forward).v;

    for (int tick = 0; tick < ticks_per_step; ++tick) {
      pose.translation() += pose.linear() * v_tool * inner_dt;
      const Wrench w = approach_wrench(scene, pose, target, rigid, sup.plant.k_contact);
      const Wrench filtered = sensing.push(w);
      if (query_zone(scene, pose, target) == ZoneStatus::Failure) {
        state = HybridState::Failed;
        break;
      }
      if (wrench_force(filtered).norm() > sup.contact_threshold) {
        state = HybridState::Interact;
        break;
      }
    }
    rec.vision_steps = step + 1;
    if (state == HybridState::Approach) {
      obs = render_observation(scene, pose, task.camera);
    }
  }

  std::optional<Vec2> deformed;
  if (state == HybridState::Interact) {
    const BranchPlanePoint bp = branch_plane_point(scene, pose, target);
    BranchState branch;
    branch.rest_position = tool_plane_yz(bp.point_tool);
    branch.position = branch.rest_position;
    branch.radius = bp.radius;
    branch.stiffness = sup.plant.branch_stiffness;
    branch.damping = sup.plant.branch_damping;
    branch.mass = sup.plant.branch_mass;

    const InteractOutcome out = run_interaction(scene.cutter, branch, sup,
                                                sensing.sensor, &rigid, pose,
                                                sensing.filter);
    rec.interact_time = out.elapsed;
    rec.termination_fired = out.terminated;
    sensing.max_force = std::max(sensing.max_force, out.max_force);
    pose = out.final_tool_pose;
    deformed = out.branch_in_tool;
    state = out.terminated ? HybridState::Done : HybridState::Failed;
  }

  rec.final_state = state;
  rec.contact = sensing.contact;
  rec.max_force = sensing.max_force;
  rec.final_tool_pose = pose;
  rec.final_branch_in_tool = deformed;
  rec.zone = final_zone(scene, pose, target, deformed);
  return rec;
}

namespace {

EpisodeRecord run_proportional(const SceneGraph& scene, int target_id,
                               const TargetEstimate& estimate,
                               const SupervisorConfig& sup, std::uint64_t seed,
                               const Pose& start_pose, ControllerId id,
                               bool closed_loop) {
  const PruneTarget& target = scene.targets.at(target_id);
  EpisodeRecord rec;
  rec.controller = id;
  rec.target_id = target_id;
  rec.seed = seed;

  Vec3 goal = estimate.point;
  if (closed_loop) {
    const Vec3 ray = (estimate.point - start_pose.translation()).normalized();
    goal += sup.cl_overshoot * ray;
  }

  const RigidContactModel rigid(scene, sup.plant.k_contact, target.spindle_id,
                                target.branch_id);
  PhaseSensing sensing({sup.plant.sensor_rate, sup.plant.sensor_noise_std,
                        derive_seed(seed, {0x5e5ULL})});
  Pose pose = start_pose;
  HybridState state = HybridState::Approach;
  const double dt = sup.gains.inner_dt;
  const long max_ticks = std::lround(sup.interact_timeout / dt);
  bool reached = false;
  long ticks = 0;

  for (; ticks < max_ticks && state == HybridState::Approach; ++ticks) {
    const Vec3 to_goal = goal - pose.translation();
    if (to_goal.norm() <= sup.ol_stop_distance) {
      reached = true;
      break;
    }
    Vec3 v = sup.ol_gain * to_goal;
    const double speed = v.norm();
    if (speed > sup.ol_max_speed) v *= sup.ol_max_speed / speed;
    pose.translation() += v * dt;

    const Wrench w = approach_wrench(scene, pose, target, rigid, sup.plant.k_contact);
    const Wrench filtered = sensing.push(w);
    if (closed_loop && wrench_force(filtered).norm() > sup.contact_threshold) {
      state = HybridState::Interact;
    }
  }
  rec.vision_steps = static_cast<int>(std::lround(ticks * dt / 0.1));

  std::optional<Vec2> deformed;
  if (state == HybridState::Interact) {
    const BranchPlanePoint bp = branch_plane_point(scene, pose, target);
    BranchState branch;
    branch.rest_position = tool_plane_yz(bp.point_tool);
    branch.position = branch.rest_position;
    branch.radius = bp.radius;
    branch.stiffness = sup.plant.branch_stiffness;
    branch.damping = sup.plant.branch_damping;
    branch.mass = sup.plant.branch_mass;
    const InteractOutcome out = run_interaction(scene.cutter, branch, sup,
                                                sensing.sensor, &rigid, pose,
                                                sensing.filter);
    rec.interact_time = out.elapsed;
    rec.termination_fired = out.terminated;
    sensing.max_force = std::max(sensing.max_force, out.max_force);
    pose = out.final_tool_pose;
    deformed = out.branch_in_tool;
    state = out.terminated ? HybridState::Done : HybridState::Failed;
  } else if (closed_loop) {
    state = HybridState::Failed;  // drove past the goal without contact
  } else {
    state = reached ? HybridState::Done : HybridState::Failed;
  }

  rec.final_state = state;
  rec.contact = sensing.contact;
  rec.max_force = sensing.max_force;
  rec.final_tool_pose = pose;
  rec.final_branch_in_tool = deformed;
  rec.zone = final_zone(scene, pose, target, deformed);
  return rec;
}

}  // namespace

EpisodeRecord run_open_loop(const SceneGraph& scene, int target_id,
                            const TargetEstimate& estimate,
                            const SupervisorConfig& sup, std::uint64_t seed,
                            const Pose& start_pose, ControllerId id) {
  return run_proportional(scene, target_id, estimate, sup, seed, start_pose, id,
                          false);
}

EpisodeRecord run_closed_loop(const SceneGraph& scene, int target_id,
                              const TargetEstimate& estimate,
                              const SupervisorConfig& sup, std::uint64_t seed,
                              const Pose& start_pose) {
  return run_proportional(scene, target_id, estimate, sup, seed, start_pose,
                          ControllerId::ClosedLoop, true);
}

TrialMetrics compute_metrics(const EpisodeRecord& record, const SceneGraph& scene,
                             const PruneTarget& target) {
  TrialMetrics m;
  m.accuracy = record.zone == ZoneStatus::Success;
  m.max_force = record.max_force;
  if (record.contact) {
    if (record.final_branch_in_tool.has_value()) {
      m.pivot_offset =
          (*record.final_branch_in_tool - scene.cutter.pivot).norm();
    } else {
      const BranchPlanePoint bp =
          branch_plane_point(scene, record.final_tool_pose, target);
      m.pivot_offset = (tool_plane_yz(bp.point_tool) - scene.cutter.pivot).norm();
    }
  }
  m.remnant_length = branch_remnant_length(scene, record.final_tool_pose, target);
  return m;
}

}  // namespace prunesim
