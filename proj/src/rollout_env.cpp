#include "prunesim/rollout_env.hpp"

namespace prunesim {

std::shared_ptr<const ScenePool> build_scene_pool(const TaskSetConfig& cfg) {
  auto pool = std::make_shared<ScenePool>();
  pool->reserve(cfg.scene_pool);
  for (int i = 0; i < cfg.scene_pool; ++i) {
    pool->push_back(build_scene(
        cfg.scene, derive_seed(cfg.scene_seed_base, {static_cast<std::uint64_t>(i)})));
  }
  return pool;
}

Eigen::VectorXf encode_observation(const SegmentedImage& obs, int in_w, int in_h) {
  const SegmentedImage scaled = (obs.width == in_w && obs.height == in_h)
                                    ? obs
                                    : downscale_class_pool(obs, in_w, in_h);
  const int plane = in_w * in_h;
  Eigen::VectorXf out(3 * plane);
  for (int i = 0; i < plane; ++i) {
    out[i] = scaled.h[i] / 255.0f;
    out[plane + i] = scaled.s[i] / 255.0f;
    out[2 * plane + i] = scaled.v[i] / 255.0f;
  }
  return out;
}

VisionTaskEnv::VisionTaskEnv(std::shared_ptr<const ScenePool> scenes,
                             const TaskSetConfig& cfg)
    : scenes_(std::move(scenes)), cfg_(cfg) {}

Eigen::VectorXf VisionTaskEnv::reset(std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, {0x3e11ULL}));
  const auto& pool = *scenes_;
  const std::size_t scene_idx = rng.raw() % pool.size();
  const SceneGraph& scene = pool[scene_idx];
  const std::size_t target_idx = rng.raw() % scene.targets.size();
  env_.emplace(&scene, cfg_.env, cfg_.camera);
  const SegmentedImage obs = env_->reset(scene.targets[target_idx], rng.raw());
  return encode_observation(obs, cfg_.net_in_w, cfg_.net_in_h);
}

RolloutEnv::Step VisionTaskEnv::step(const PolicyAction& action) {
  const StepOutcome out = env_->step(action);
  Step step;
  step.obs = encode_observation(out.observation, cfg_.net_in_w, cfg_.net_in_h);
  step.reward = static_cast<float>(out.reward);
  step.done = out.terminal != Terminal::Running;
  step.success = out.terminal == Terminal::Success;
  return step;
}

EnvFactory make_env_factory(const TaskSetConfig& cfg) {
  auto pool = build_scene_pool(cfg);
  return [pool, cfg](int) -> std::unique_ptr<RolloutEnv> {
    return std::make_unique<VisionTaskEnv>(pool, cfg);
  };
}

}  // namespace prunesim
