#pragma once

#include <string>
#include <vector>

#include "prunesim/camera.hpp"
#include "prunesim/scene.hpp"

namespace prunesim {

struct EnvConfig {
  double episode_time = 1.0;  // T
  double dt = 0.10;
  double d_min = 0.10;
  double s_forward = 0.30;  // 0.03 in slow mode
  double start_distance_min = 0.15;
  double start_distance_max = 0.20;
  double start_lateral_jitter = 0.010;  // +- m, x and y
  double start_yaw_jitter_deg = 3.0;

  int n_steps() const;
  void validate() const;  // n_steps * dt == T, positive rates

  // Same travel budget (s_forward * T) at a different approach speed.
  EnvConfig with_speed(double s) const;
};

struct PolicyAction {
  double ax = 0.0;
  double ay = 0.0;
};

struct VelocityCommand {
  Vec3 v = Vec3::Zero();  // tool frame, v.z == s_forward
};

enum class Terminal { Running, Success, FailureZone, Timeout };

const char* terminal_name(Terminal t);

struct StepOutcome {
  SegmentedImage observation;  // 160x80
  double reward = 0.0;
  Terminal terminal = Terminal::Running;
};

VelocityCommand compose_velocity(const PolicyAction& a, double s_forward);

// Shaped per-step reward: dt * max(1 - d/d_min, 0).
double approach_reward(double d_next, const EnvConfig& cfg);

struct EnvTraceRow {
  int step;
  double ax, ay, reward, distance;
  Terminal terminal;
};

// The vision-phase MDP: kinematic tool integration against a rigid scene,
// zone-based terminals, segmented-image observations.
class ApproachEnv {
 public:
  ApproachEnv(const SceneGraph* scene, const EnvConfig& cfg,
              const CameraModel& cam);

  // Seeded start placement 15-20 cm in front of the target; collides ->
  // resamples up to 20 times.
  SegmentedImage reset(const PruneTarget& target, std::uint64_t seed);
  // Explicit start pose (trial protocol uses estimate-anchored starts).
  SegmentedImage reset_at(const PruneTarget& target, const Pose& start);

  StepOutcome step(const PolicyAction& action);

  const Pose& tool_pose() const { return tool_pose_; }
  const PruneTarget& target() const { return target_; }
  Terminal terminal() const { return terminal_; }
  int steps_taken() const { return steps_; }
  double last_distance() const { return last_distance_; }
  const EnvConfig& config() const { return cfg_; }
  const SceneGraph& scene() const { return *scene_; }
  const CameraModel& camera() const { return cam_; }
  const std::vector<EnvTraceRow>& trace() const { return trace_; }

  static std::string trace_csv(const std::vector<EnvTraceRow>& rows);

 private:
  const SceneGraph* scene_;
  EnvConfig cfg_;
  CameraModel cam_;
  PruneTarget target_;
  Pose tool_pose_ = Pose::Identity();
  Terminal terminal_ = Terminal::Timeout;  // not running until reset
  int steps_ = 0;
  double last_distance_ = 0.0;
  std::vector<EnvTraceRow> trace_;
};

// Minimum clearance from a point to any scene surface (used for start
// placement checks).
double scene_clearance(const SceneGraph& scene, const Vec3& point);

}  // namespace prunesim
