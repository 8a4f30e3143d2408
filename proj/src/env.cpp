#include "prunesim/env.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "prunesim/errors.hpp"

namespace prunesim {

int EnvConfig::n_steps() const {
  return static_cast<int>(std::lround(episode_time / dt));
}

void EnvConfig::validate() const {
  if (episode_time <= 0.0 || dt <= 0.0 || d_min <= 0.0 || s_forward <= 0.0) {
    throw ConfigError("env: time step, horizon, d_min and speed must be positive");
  }
  if (std::abs(n_steps() * dt - episode_time) > 1e-9) {
    throw ConfigError("env: episode_time must be an integer multiple of dt");
  }
  if (start_distance_min > start_distance_max || start_distance_min <= 0.0) {
    throw ConfigError("env: invalid start distance range");
  }
}

EnvConfig EnvConfig::with_speed(double s) const {
  EnvConfig out = *this;
  const double travel = s_forward * episode_time;
  out.s_forward = s;
  out.episode_time = travel / s;
  return out;
}

const char* terminal_name(Terminal t) {
  switch (t) {
    case Terminal::Running: return "Running";
    case Terminal::Success: return "Success";
    case Terminal::FailureZone: return "FailureZone";
    case Terminal::Timeout: return "Timeout";
  }
  return "?";
}

VelocityCommand compose_velocity(const PolicyAction& a, double s_forward) {
  const double ax = std::clamp(a.ax, -1.0, 1.0);
  const double ay = std::clamp(a.ay, -1.0, 1.0);
  VelocityCommand cmd;
  cmd.v = Vec3(ax * s_forward, ay * s_forward, s_forward);
  return cmd;
}

double approach_reward(double d_next, const EnvConfig& cfg) {
  return cfg.dt * std::max(1.0 - d_next / cfg.d_min, 0.0);
}

double scene_clearance(const SceneGraph& scene, const Vec3& point) {
  double best = std::numeric_limits<double>::infinity();
  const auto consider_capsule = [&](const Capsule& c) {
    const double d = (point - closest_point_on_segment(point, c.a, c.b)).norm() - c.radius;
    best = std::min(best, d);
  };
  for (const Capsule& w : scene.wires) consider_capsule(w);
  for (const TreeSpindle& sp : scene.spindles) {
    for (const Capsule& seg : sp.leader) consider_capsule(seg);
    for (const auto& chain : sp.side_branches) {
      for (const Capsule& seg : chain) consider_capsule(seg);
    }
  }
  for (const Aabb& box : scene.frame_boxes) {
    const Vec3 clamped = point.cwiseMax(box.min).cwiseMin(box.max);
    best = std::min(best, (point - clamped).norm());
  }
  return best;
}

ApproachEnv::ApproachEnv(const SceneGraph* scene, const EnvConfig& cfg,
                         const CameraModel& cam)
    : scene_(scene), cfg_(cfg), cam_(cam) {
  cfg_.validate();
}

SegmentedImage ApproachEnv::reset(const PruneTarget& target, std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, {0x5e7ULL}));
  constexpr double kToolClearance = 0.05;
  for (int attempt = 0; attempt < 20; ++attempt) {
    const double total = rng.uniform(cfg_.start_distance_min, cfg_.start_distance_max);
    const double jx = rng.uniform(-cfg_.start_lateral_jitter, cfg_.start_lateral_jitter);
    const double jy = rng.uniform(-cfg_.start_lateral_jitter, cfg_.start_lateral_jitter);
    const double yaw = deg_to_rad(
        rng.uniform(-cfg_.start_yaw_jitter_deg, cfg_.start_yaw_jitter_deg));
    const double lat2 = jx * jx + jy * jy;
    if (lat2 >= total * total) continue;
    const double dz = std::sqrt(total * total - lat2);

    Pose start = Pose::Identity();
    start.linear() = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
    start.translation() = target.point + Vec3(jx, jy, -dz);

    if (scene_clearance(*scene_, start.translation()) < kToolClearance) continue;
    return reset_at(target, start);
  }
  throw std::runtime_error("env reset: no collision-free start placement found");
}

SegmentedImage ApproachEnv::reset_at(const PruneTarget& target, const Pose& start) {
  target_ = target;
  tool_pose_ = start;
  terminal_ = Terminal::Running;
  steps_ = 0;
  last_distance_ = distance_to_target(tool_pose_, target_);
  trace_.clear();
  return render_observation(*scene_, tool_pose_, cam_);
}

StepOutcome ApproachEnv::step(const PolicyAction& action) {
  if (terminal_ != Terminal::Running) {
    throw std::logic_error("env step called after terminal state");
  }
  const VelocityCommand cmd = compose_velocity(action, cfg_.s_forward);
  tool_pose_.translation() += tool_pose_.linear() * cmd.v * cfg_.dt;
  ++steps_;
  last_distance_ = distance_to_target(tool_pose_, target_);

  StepOutcome out;
  const ZoneStatus zone = query_zone(*scene_, tool_pose_, target_);
  if (zone == ZoneStatus::Success) {
    terminal_ = Terminal::Success;
    out.reward = cfg_.episode_time - cfg_.dt * steps_;
  } else if (zone == ZoneStatus::Failure) {
    terminal_ = Terminal::FailureZone;
    out.reward = -cfg_.episode_time;
  } else if (steps_ >= cfg_.n_steps()) {
    terminal_ = Terminal::Timeout;
    out.reward = -cfg_.episode_time;
  } else {
    out.reward = approach_reward(last_distance_, cfg_);
  }
  out.terminal = terminal_;
  out.observation = render_observation(*scene_, tool_pose_, cam_);
  trace_.push_back({steps_, std::clamp(action.ax, -1.0, 1.0),
                    std::clamp(action.ay, -1.0, 1.0), out.reward, last_distance_,
                    terminal_});
  return out;
}

std::string ApproachEnv::trace_csv(const std::vector<EnvTraceRow>& rows) {
  std::ostringstream os;
  os << "step,ax,ay,reward,distance,terminal\n";
  for (const EnvTraceRow& r : rows) {
    os << r.step << "," << r.ax << "," << r.ay << "," << r.reward << ","
       << r.distance << "," << terminal_name(r.terminal) << "\n";
  }
  return os.str();
}

}  // namespace prunesim
