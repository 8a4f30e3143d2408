#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "prunesim/ppo.hpp"

namespace prunesim {

// Training/evaluation task distribution: a pool of pre-built scenes, one
// episode = one (scene, target) draw.
struct TaskSetConfig {
  SceneConfig scene;
  EnvConfig env;
  CameraModel camera;
  int scene_pool = 8;
  std::uint64_t scene_seed_base = 99;
  int net_in_w = 80;  // policy input downscale target
  int net_in_h = 40;
};

using ScenePool = std::vector<SceneGraph>;

std::shared_ptr<const ScenePool> build_scene_pool(const TaskSetConfig& cfg);

// Downscale + [0,1] normalization into a CHW float column (H, S, V planes).
Eigen::VectorXf encode_observation(const SegmentedImage& obs, int in_w, int in_h);

class VisionTaskEnv : public RolloutEnv {
 public:
  VisionTaskEnv(std::shared_ptr<const ScenePool> scenes, const TaskSetConfig& cfg);

  Eigen::VectorXf reset(std::uint64_t seed) override;
  Step step(const PolicyAction& action) override;
  int obs_dim() const override { return 3 * cfg_.net_in_h * cfg_.net_in_w; }

  const ApproachEnv& inner() const { return *env_; }

 private:
  std::shared_ptr<const ScenePool> scenes_;
  TaskSetConfig cfg_;
  std::optional<ApproachEnv> env_;
};

EnvFactory make_env_factory(const TaskSetConfig& cfg);

}  // namespace prunesim
