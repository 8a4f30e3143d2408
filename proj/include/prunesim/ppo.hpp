#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "prunesim/env.hpp"
#include "prunesim/net.hpp"

namespace prunesim {

struct TrainConfig {
  double clip_ratio = 0.2;   // epsilon
  double discount = 0.99;    // gamma
  double gae_lambda = 0.95;  // lambda
  double learning_rate = 3e-4;
  int rollout_horizon = 2048;  // steps per env per update
  int minibatch_size = 64;
  int epochs_per_update = 10;
  long total_steps = 200000;
  std::uint64_t seed = 0;
  int n_envs = 1;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;

  void validate() const;
};

struct ActionSample {
  PolicyAction clamped;  // what the environment receives
  Eigen::Vector2d raw;   // pre-clamp gaussian draw (stored for the update)
  double log_prob;       // pre-clamp
};

ActionSample sample_action(const Eigen::Vector2d& mean,
                           const Eigen::Vector2d& log_std, RandomStream& rng);

double action_log_prob(const Eigen::Vector2d& raw, const Eigen::Vector2d& mean,
                       const Eigen::Vector2d& log_std);

double action_entropy(const Eigen::Vector2d& log_std);

// Generalized advantage estimation with episode-boundary resets.
// values has one trailing bootstrap entry (ignored when the last step is
// terminal); terminals[t] marks "episode ended at step t".
void gae(const std::vector<double>& rewards, const std::vector<double>& values,
         const std::vector<std::uint8_t>& terminals, double gamma, double lambda,
         std::vector<double>* advantages, std::vector<double>* returns);

struct RolloutBatch {
  Eigen::MatrixXf observations;  // input_dim x N
  Eigen::MatrixXf actions;       // 2 x N, pre-clamp draws
  Eigen::VectorXf log_probs, rewards, values, advantages, returns;
  std::vector<std::uint8_t> terminals;

  Eigen::Index size() const { return observations.cols(); }
};

struct LossStats {
  double policy_loss = 0, value_loss = 0, entropy = 0;
  double clip_fraction = 0, approx_kl = 0, total = 0;
};

struct PpoHyper {
  double clip_ratio = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
};

// Clipped-surrogate PPO loss over one (mini)batch. When with_grad is set the
// parameter gradients are accumulated into the net (caller zeroes them).
// Shared verbatim between the float training path and the double-precision
// gradient check.
template <typename T>
LossStats ppo_loss(PolicyNet<T>& net, const Mat<T>& obs, const Mat<T>& raw_actions,
                   const Col<T>& old_logp, const Col<T>& advantages,
                   const Col<T>& returns, const PpoHyper& hp, bool with_grad) {
  const Eigen::Index B = obs.cols();
  net.forward(obs);
  const Mat<T>& mean = net.action_mean();
  const Mat<T>& value = net.value();
  const int n_act = static_cast<int>(net.log_std.size());

  Col<T> logp = Col<T>::Zero(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    T acc = T(0);
    for (int i = 0; i < n_act; ++i) {
      const T z = (raw_actions(i, j) - mean(i, j)) / std::exp(net.log_std[i]);
      acc += T(-0.5) * z * z - net.log_std[i] - T(0.5 * std::log(2.0 * kPi));
    }
    logp[j] = acc;
  }

  LossStats stats;
  Mat<T> d_mean = Mat<T>::Zero(n_act, B);
  Mat<T> d_value = Mat<T>::Zero(1, B);
  Col<T> d_logstd = Col<T>::Zero(n_act);

  const T lo = T(1) - T(hp.clip_ratio);
  const T hi = T(1) + T(hp.clip_ratio);
  double surr_sum = 0, vloss_sum = 0, clip_count = 0, kl_sum = 0;
  for (Eigen::Index j = 0; j < B; ++j) {
    const T ratio = std::exp(logp[j] - old_logp[j]);
    const T clipped = std::min(std::max(ratio, lo), hi);
    const T a = advantages[j];
    const T surr1 = ratio * a;
    const T surr2 = clipped * a;
    const T surr = std::min(surr1, surr2);
    surr_sum += static_cast<double>(surr);
    kl_sum += static_cast<double>(old_logp[j] - logp[j]);
    if (std::abs(static_cast<double>(ratio) - 1.0) > hp.clip_ratio) clip_count += 1;

    const T verr = value(0, j) - returns[j];
    vloss_sum += static_cast<double>(verr * verr);

    if (with_grad) {
      if (surr1 <= surr2) {  // gradient flows through the unclipped branch
        const T g = -a * ratio / T(B);  // d(policy_loss)/d(logp_j)
        for (int i = 0; i < n_act; ++i) {
          const T sigma = std::exp(net.log_std[i]);
          const T z = (raw_actions(i, j) - mean(i, j)) / sigma;
          d_mean(i, j) += g * (z / sigma);      // dlogp/dmean = z/sigma
          d_logstd[i] += g * (z * z - T(1));    // dlogp/dlog_std = z^2-1
        }
      }
      d_value(0, j) = T(hp.value_coef) * T(2) * verr / T(B);
    }
  }

  stats.policy_loss = -surr_sum / static_cast<double>(B);
  stats.value_loss = vloss_sum / static_cast<double>(B);
  stats.entropy = 0.0;
  for (int i = 0; i < n_act; ++i) {
    stats.entropy += static_cast<double>(net.log_std[i]) + 0.5 * std::log(2.0 * kPi) + 0.5;
  }
  stats.clip_fraction = clip_count / static_cast<double>(B);
  stats.approx_kl = kl_sum / static_cast<double>(B);
  stats.total = stats.policy_loss + hp.value_coef * stats.value_loss -
                hp.entropy_coef * stats.entropy;

  if (!std::isfinite(stats.total)) {
    throw std::runtime_error(
        "ppo: non-finite loss (policy=" + std::to_string(stats.policy_loss) +
        " value=" + std::to_string(stats.value_loss) + ")");
  }

  if (with_grad) {
    net.backward(obs, d_mean, d_value);
    for (int i = 0; i < n_act; ++i) {
      net.log_std_grad[i] += d_logstd[i] - T(hp.entropy_coef);  // d(-ent_coef*H)
    }
  }
  return stats;
}

// Normalizes advantages over the whole batch, then runs the epoch/minibatch
// schedule with Adam steps.
LossStats ppo_update(PolicyNet<float>& net, AdamOptimizer<float>& opt,
                     const RolloutBatch& batch, const TrainConfig& cfg,
                     RandomStream& rng);

// Environment surface the trainer rolls against.
class RolloutEnv {
 public:
  virtual ~RolloutEnv() = default;

  struct Step {
    Eigen::VectorXf obs;
    float reward = 0;
    bool done = false;
    bool success = false;
  };

  virtual Eigen::VectorXf reset(std::uint64_t seed) = 0;
  virtual Step step(const PolicyAction& action) = 0;
  virtual int obs_dim() const = 0;
};

using EnvFactory = std::function<std::unique_ptr<RolloutEnv>(int env_index)>;

struct LearningCurveRow {
  int update = 0;
  long env_steps = 0;
  double mean_episode_reward = 0;
  double success_rate = 0;
  LossStats losses;
};

struct TrainResult {
  std::vector<LearningCurveRow> curve;
  long total_env_steps = 0;
};

TrainResult train(const EnvFactory& factory, PolicyNet<float>& net,
                  const TrainConfig& cfg, std::ostream* log = nullptr);

std::string learning_curve_csv(const TrainResult& result);

struct EvalResult {
  double success_rate = 0;
  double mean_reward = 0;
  int episodes = 0;
};

EvalResult evaluate_policy(RolloutEnv& env, PolicyNet<float>& net, int episodes,
                           std::uint64_t seed, bool deterministic = true);

// Runs a uniform-random policy through the same surface (the comparison
// baseline for trained success rates).
EvalResult evaluate_random(RolloutEnv& env, int episodes, std::uint64_t seed);

// Central finite differences (h = 1e-5) against the analytic gradients of
// ppo_loss on a synthetic batch, double precision. fault_scale != 1 corrupts
// the first weight gradient so the check must fail.
double grad_check(PolicyNet<double>& net, int batch_size, std::uint64_t seed,
                  double fault_scale = 1.0);

}  // namespace prunesim
