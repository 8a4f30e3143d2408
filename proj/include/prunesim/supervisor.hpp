#pragma once

#include <optional>
#include <string>

#include "prunesim/admittance.hpp"
#include "prunesim/net.hpp"
#include "prunesim/plant.hpp"
#include "prunesim/rollout_env.hpp"

namespace prunesim {

enum class HybridState { Approach, Interact, Done, Failed };
const char* hybrid_state_name(HybridState s);

enum class ControllerId { Hybrid, ClosedLoop, OpenLoop, OpenLoopMiscal };
const char* controller_name(ControllerId id);

enum class EstimateSource { Exact, DepthModel, Miscalibrated };

struct TargetEstimate {
  Vec3 point;
  EstimateSource source = EstimateSource::Exact;
};

struct DepthErrorModel {
  double bias = -0.015;     // along the camera ray; negative falls short
  double noise_std = 0.005; // isotropic, m
};

// Point-cloud pick: the true point displaced along the viewing ray by the
// depth bias, plus isotropic noise.
TargetEstimate estimate_target(const Vec3& true_point, const Pose& camera_pose,
                               const DepthErrorModel& model, RandomStream& rng);

// Exactly 1 cm translation along a random direction and a 5 degree rotation
// about an independent random axis.
Pose perturb_calibration(const Pose& camera_pose, RandomStream& rng,
                         double translation = 0.01, double angle_deg = 5.0);

struct SupervisorConfig {
  double contact_threshold = 0.75;  // N, filtered force magnitude
  double interact_timeout = 30.0;   // s
  double vision_speed = 0.03;       // m/s, deployment forward speed
  double ol_gain = 2.0;             // 1/s proportional gain
  double ol_max_speed = 0.03;       // m/s
  double ol_stop_distance = 0.001;  // m, to the estimate
  double cl_overshoot = 0.10;       // m past the estimate
  AdmittanceGains gains;
  PlantConfig plant;
};

struct EpisodeRecord {
  ControllerId controller = ControllerId::Hybrid;
  int target_id = 0;
  std::uint64_t seed = 0;
  HybridState final_state = HybridState::Failed;
  ZoneStatus zone = ZoneStatus::None;
  bool contact = false;
  double max_force = 0.0;  // true contact force magnitude, N
  int vision_steps = 0;
  double interact_time = 0.0;  // s spent in the interaction phase
  bool termination_fired = false;
  Pose final_tool_pose = Pose::Identity();
  // Final branch disc center in tool yz coordinates (present when the
  // interaction phase ran and deformed the branch).
  std::optional<Vec2> final_branch_in_tool;
};

struct TrialMetrics {
  bool accuracy = false;
  std::optional<double> pivot_offset;    // m
  std::optional<double> remnant_length;  // m
  double max_force = 0.0;                // N
};

TrialMetrics compute_metrics(const EpisodeRecord& record, const SceneGraph& scene,
                             const PruneTarget& target);

// Vision phase driven by the trained policy at the deployment speed; hands
// over to the admittance controller once the filtered force magnitude
// crosses the contact threshold.
EpisodeRecord run_hybrid(const SceneGraph& scene, int target_id,
                         PolicyNet<float>& policy, const TaskSetConfig& task,
                         const SupervisorConfig& sup, std::uint64_t seed,
                         const std::optional<Pose>& start_pose = std::nullopt);

// Open-loop proportional drive to the estimate; contact forces are recorded
// but never alter the motion.
EpisodeRecord run_open_loop(const SceneGraph& scene, int target_id,
                            const TargetEstimate& estimate,
                            const SupervisorConfig& sup, std::uint64_t seed,
                            const Pose& start_pose,
                            ControllerId id = ControllerId::OpenLoop);

// Proportional drive toward a goal 10 cm past the estimate, switching to the
// admittance controller on contact.
EpisodeRecord run_closed_loop(const SceneGraph& scene, int target_id,
                              const TargetEstimate& estimate,
                              const SupervisorConfig& sup, std::uint64_t seed,
                              const Pose& start_pose);

// Per-tick controller trace of the interaction phase (CSV export).
struct InteractTraceRow {
  double time;
  Wrench raw;
  Wrench filtered;
  double err_y, err_z;  // desired minus selected filtered, before deadzone
  double accel_y, accel_z, twist_y, twist_z;
  double branch_y, branch_z;
  double penetration;  // deepest blade-edge overlap of the branch disc
};
std::string interact_trace_csv(const std::vector<InteractTraceRow>& rows);

// Shared interaction loop, exposed for the funnel/convergence tests: starts
// from a branch already in (or near) contact and runs the admittance
// controller until termination or timeout. Returns the final record fields.
struct InteractOutcome {
  bool terminated = false;
  double elapsed = 0.0;
  Vec2 branch_in_tool = Vec2::Zero();
  double max_force = 0.0;
  Pose final_tool_pose = Pose::Identity();
  std::vector<InteractTraceRow> trace;
};

InteractOutcome run_interaction(const CutterProfile& profile, BranchState branch,
                                const SupervisorConfig& sup, NoisySensor sensor,
                                const RigidContactModel* rigid = nullptr,
                                Pose tool_pose = Pose::Identity(),
                                WrenchFilter filter = WrenchFilter(),
                                bool keep_trace = false);

}  // namespace prunesim
