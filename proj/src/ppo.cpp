#include "prunesim/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <ostream>
#include <sstream>

#include "prunesim/errors.hpp"

namespace prunesim {

void TrainConfig::validate() const {
  if (clip_ratio <= 0.0 || clip_ratio >= 1.0) {
    throw ConfigError("train: clip_ratio must lie in (0,1)");
  }
  if (discount <= 0.0 || discount > 1.0 || gae_lambda <= 0.0 || gae_lambda > 1.0) {
    throw ConfigError("train: discount and gae_lambda must lie in (0,1]");
  }
  if (learning_rate <= 0.0 || rollout_horizon < 1 || minibatch_size < 1 ||
      epochs_per_update < 1 || n_envs < 1 || total_steps < 0) {
    throw ConfigError("train: sizes must be positive");
  }
}

ActionSample sample_action(const Eigen::Vector2d& mean,
                           const Eigen::Vector2d& log_std, RandomStream& rng) {
  ActionSample out;
  for (int i = 0; i < 2; ++i) {
    out.raw[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
  }
  out.log_prob = action_log_prob(out.raw, mean, log_std);
  out.clamped.ax = std::clamp(out.raw[0], -1.0, 1.0);
  out.clamped.ay = std::clamp(out.raw[1], -1.0, 1.0);
  return out;
}

double action_log_prob(const Eigen::Vector2d& raw, const Eigen::Vector2d& mean,
                       const Eigen::Vector2d& log_std) {
  double acc = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double z = (raw[i] - mean[i]) / std::exp(log_std[i]);
    acc += -0.5 * z * z - log_std[i] - 0.5 * std::log(2.0 * kPi);
  }
  return acc;
}

double action_entropy(const Eigen::Vector2d& log_std) {
  double acc = 0.0;
  for (int i = 0; i < 2; ++i) acc += log_std[i] + 0.5 * std::log(2.0 * kPi) + 0.5;
  return acc;
}

void gae(const std::vector<double>& rewards, const std::vector<double>& values,
         const std::vector<std::uint8_t>& terminals, double gamma, double lambda,
         std::vector<double>* advantages, std::vector<double>* returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || terminals.size() != n) {
    throw ConfigError("gae: arrays must align (values carries one bootstrap)");
  }
  advantages->assign(n, 0.0);
  returns->assign(n, 0.0);
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double not_done = terminals[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * not_done - values[t];
    acc = delta + gamma * lambda * not_done * acc;
    (*advantages)[t] = acc;
    (*returns)[t] = acc + values[t];
  }
}

LossStats ppo_update(PolicyNet<float>& net, AdamOptimizer<float>& opt,
                     const RolloutBatch& batch, const TrainConfig& cfg,
                     RandomStream& rng) {
  const Eigen::Index n = batch.size();
  Eigen::VectorXf adv = batch.advantages;
  const float mean = adv.mean();
  const float stddev = std::sqrt((adv.array() - mean).square().mean());
  adv = ((adv.array() - mean) / std::max(stddev, 1e-8f)).matrix();

  const PpoHyper hp{cfg.clip_ratio, cfg.value_coef, cfg.entropy_coef};
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);

  LossStats agg;
  int n_batches = 0;
  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    for (Eigen::Index i = n - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(0, i)]);
    }
    for (Eigen::Index start = 0; start < n; start += cfg.minibatch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(cfg.minibatch_size, n - start);
      Mat<float> obs(batch.observations.rows(), count);
      Mat<float> act(2, count);
      Col<float> old_logp(count), a(count), ret(count);
      for (Eigen::Index j = 0; j < count; ++j) {
        const Eigen::Index src = order[start + j];
        obs.col(j) = batch.observations.col(src);
        act.col(j) = batch.actions.col(src);
        old_logp[j] = batch.log_probs[src];
        a[j] = adv[src];
        ret[j] = batch.returns[src];
      }
      net.zero_grad();
      const LossStats stats = ppo_loss(net, obs, act, old_logp, a, ret, hp, true);
      opt.step(net, cfg.max_grad_norm);
      agg.policy_loss += stats.policy_loss;
      agg.value_loss += stats.value_loss;
      agg.entropy += stats.entropy;
      agg.clip_fraction += stats.clip_fraction;
      agg.approx_kl += stats.approx_kl;
      agg.total += stats.total;
      ++n_batches;
    }
  }
  if (n_batches > 0) {
    agg.policy_loss /= n_batches;
    agg.value_loss /= n_batches;
    agg.entropy /= n_batches;
    agg.clip_fraction /= n_batches;
    agg.approx_kl /= n_batches;
    agg.total /= n_batches;
  }
  return agg;
}

namespace {

struct EnvSlot {
  std::unique_ptr<RolloutEnv> env;
  Eigen::VectorXf obs;
  std::uint64_t episode_counter = 0;
  double episode_reward = 0.0;
};

}  // namespace

TrainResult train(const EnvFactory& factory, PolicyNet<float>& net,
                  const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  TrainResult result;
  if (cfg.total_steps == 0) return result;

  AdamOptimizer<float> opt(cfg.learning_rate);
  RandomStream update_rng(derive_seed(cfg.seed, {0x9d0eULL}));
  std::vector<RandomStream> action_rngs;
  std::vector<EnvSlot> slots(cfg.n_envs);
  for (int e = 0; e < cfg.n_envs; ++e) {
    action_rngs.emplace_back(derive_seed(cfg.seed, {0xac70ULL, static_cast<std::uint64_t>(e)}));
    slots[e].env = factory(e);
    slots[e].obs = slots[e].env->reset(
        derive_seed(cfg.seed, {0xe5e7ULL, static_cast<std::uint64_t>(e), 0}));
  }
  const int obs_dim = slots[0].env->obs_dim();
  const int horizon = cfg.rollout_horizon;
  const Eigen::Index batch_n = static_cast<Eigen::Index>(horizon) * cfg.n_envs;

  int update_idx = 0;
  while (result.total_env_steps < cfg.total_steps) {
    RolloutBatch batch;
    batch.observations.resize(obs_dim, batch_n);
    batch.actions.resize(2, batch_n);
    batch.log_probs.resize(batch_n);
    batch.rewards.resize(batch_n);
    batch.values.resize(batch_n);
    batch.terminals.assign(batch_n, 0);

    std::vector<double> ep_rewards;
    std::vector<int> ep_successes;
    Mat<float> obs_now(obs_dim, cfg.n_envs);
    const Eigen::Vector2d log_std(net.log_std[0], net.log_std[1]);

    for (int t = 0; t < horizon; ++t) {
      for (int e = 0; e < cfg.n_envs; ++e) obs_now.col(e) = slots[e].obs;
      net.forward(obs_now);
      const Mat<float> mean = net.action_mean();
      const Mat<float> value = net.value();

      struct PendingStep {
        ActionSample sample;
        RolloutEnv::Step out;
      };
      std::vector<PendingStep> pending(cfg.n_envs);
      auto run_env = [&](int e) {
        const Eigen::Vector2d mu(mean(0, e), mean(1, e));
        pending[e].sample = sample_action(mu, log_std, action_rngs[e]);
        pending[e].out = slots[e].env->step(pending[e].sample.clamped);
      };
      if (cfg.n_envs == 1) {
        run_env(0);
      } else {
        std::vector<std::future<void>> futs;
        futs.reserve(cfg.n_envs);
        for (int e = 0; e < cfg.n_envs; ++e) {
          futs.push_back(std::async(std::launch::async, run_env, e));
        }
        for (auto& f : futs) f.get();
      }

      for (int e = 0; e < cfg.n_envs; ++e) {
        const Eigen::Index row = static_cast<Eigen::Index>(e) * horizon + t;
        batch.observations.col(row) = slots[e].obs;
        batch.actions(0, row) = static_cast<float>(pending[e].sample.raw[0]);
        batch.actions(1, row) = static_cast<float>(pending[e].sample.raw[1]);
        batch.log_probs[row] = static_cast<float>(pending[e].sample.log_prob);
        batch.rewards[row] = pending[e].out.reward;
        batch.values[row] = value(0, e);
        batch.terminals[row] = pending[e].out.done ? 1 : 0;

        slots[e].episode_reward += pending[e].out.reward;
        if (pending[e].out.done) {
          ep_rewards.push_back(slots[e].episode_reward);
          ep_successes.push_back(pending[e].out.success ? 1 : 0);
          slots[e].episode_reward = 0.0;
          ++slots[e].episode_counter;
          slots[e].obs = slots[e].env->reset(derive_seed(
              cfg.seed, {0xe5e7ULL, static_cast<std::uint64_t>(e),
                         slots[e].episode_counter}));
        } else {
          slots[e].obs = pending[e].out.obs;
        }
      }
      result.total_env_steps += cfg.n_envs;
    }

    // bootstrap values for the unfinished episodes
    for (int e = 0; e < cfg.n_envs; ++e) obs_now.col(e) = slots[e].obs;
    net.forward(obs_now);
    const Mat<float> boot = net.value();

    batch.advantages.resize(batch_n);
    batch.returns.resize(batch_n);
    for (int e = 0; e < cfg.n_envs; ++e) {
      std::vector<double> r(horizon), v(horizon + 1);
      std::vector<std::uint8_t> d(horizon);
      for (int t = 0; t < horizon; ++t) {
        const Eigen::Index row = static_cast<Eigen::Index>(e) * horizon + t;
        r[t] = batch.rewards[row];
        v[t] = batch.values[row];
        d[t] = batch.terminals[row];
      }
      v[horizon] = boot(0, e);
      std::vector<double> adv, ret;
      gae(r, v, d, cfg.discount, cfg.gae_lambda, &adv, &ret);
      for (int t = 0; t < horizon; ++t) {
        const Eigen::Index row = static_cast<Eigen::Index>(e) * horizon + t;
        batch.advantages[row] = static_cast<float>(adv[t]);
        batch.returns[row] = static_cast<float>(ret[t]);
      }
    }

    const LossStats stats = ppo_update(net, opt, batch, cfg, update_rng);

    LearningCurveRow row;
    row.update = ++update_idx;
    row.env_steps = result.total_env_steps;
    if (!ep_rewards.empty()) {
      row.mean_episode_reward =
          std::accumulate(ep_rewards.begin(), ep_rewards.end(), 0.0) /
          static_cast<double>(ep_rewards.size());
      row.success_rate =
          std::accumulate(ep_successes.begin(), ep_successes.end(), 0) /
          static_cast<double>(ep_successes.size());
    } else if (!result.curve.empty()) {
      row.mean_episode_reward = result.curve.back().mean_episode_reward;
      row.success_rate = result.curve.back().success_rate;
    }
    row.losses = stats;
    result.curve.push_back(row);
    if (log != nullptr) {
      (*log) << "update " << row.update << " steps " << row.env_steps
             << " ep_reward " << row.mean_episode_reward << " success "
             << row.success_rate << " policy_loss " << stats.policy_loss
             << " value_loss " << stats.value_loss << " clip "
             << stats.clip_fraction << std::endl;
    }
  }
  return result;
}

std::string learning_curve_csv(const TrainResult& result) {
  std::ostringstream os;
  os << "update,env_steps,mean_episode_reward,success_rate,policy_loss,"
        "value_loss,entropy,clip_fraction,approx_kl\n";
  for (const LearningCurveRow& r : result.curve) {
    os << r.update << "," << r.env_steps << "," << r.mean_episode_reward << ","
       << r.success_rate << "," << r.losses.policy_loss << ","
       << r.losses.value_loss << "," << r.losses.entropy << ","
       << r.losses.clip_fraction << "," << r.losses.approx_kl << "\n";
  }
  return os.str();
}

EvalResult evaluate_policy(RolloutEnv& env, PolicyNet<float>& net, int episodes,
                           std::uint64_t seed, bool deterministic) {
  EvalResult result;
  result.episodes = episodes;
  RandomStream rng(derive_seed(seed, {0xeea1ULL}));
  Mat<float> obs(env.obs_dim(), 1);
  for (int ep = 0; ep < episodes; ++ep) {
    obs.col(0) = env.reset(derive_seed(seed, {0xabULL, static_cast<std::uint64_t>(ep)}));
    double total = 0.0;
    while (true) {
      net.forward(obs);
      const Eigen::Vector2d mu(net.action_mean()(0, 0), net.action_mean()(1, 0));
      PolicyAction act;
      if (deterministic) {
        act.ax = std::clamp(mu[0], -1.0, 1.0);
        act.ay = std::clamp(mu[1], -1.0, 1.0);
      } else {
        const Eigen::Vector2d ls(net.log_std[0], net.log_std[1]);
        act = sample_action(mu, ls, rng).clamped;
      }
      const auto out = env.step(act);
      total += out.reward;
      if (out.done) {
        result.success_rate += out.success ? 1.0 : 0.0;
        break;
      }
      obs.col(0) = out.obs;
    }
    result.mean_reward += total;
  }
  if (episodes > 0) {
    result.success_rate /= episodes;
    result.mean_reward /= episodes;
  }
  return result;
}

EvalResult evaluate_random(RolloutEnv& env, int episodes, std::uint64_t seed) {
  EvalResult result;
  result.episodes = episodes;
  RandomStream rng(derive_seed(seed, {0x7a4dULL}));
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(derive_seed(seed, {0xabULL, static_cast<std::uint64_t>(ep)}));
    double total = 0.0;
    while (true) {
      PolicyAction act{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      const auto out = env.step(act);
      total += out.reward;
      if (out.done) {
        result.success_rate += out.success ? 1.0 : 0.0;
        break;
      }
    }
    result.mean_reward += total;
  }
  if (episodes > 0) {
    result.success_rate /= episodes;
    result.mean_reward /= episodes;
  }
  return result;
}

double grad_check(PolicyNet<double>& net, int batch_size, std::uint64_t seed,
                  double fault_scale) {
  RandomStream rng(derive_seed(seed, {0x6cdULL}));
  const int dim = net.arch().input_dim();
  const int n_act = net.arch().n_actions;
  Mat<double> obs(dim, batch_size);
  Mat<double> actions(n_act, batch_size);
  Col<double> old_logp(batch_size), adv(batch_size), ret(batch_size);
  for (int j = 0; j < batch_size; ++j) {
    for (int i = 0; i < dim; ++i) obs(i, j) = rng.uniform();
    for (int i = 0; i < n_act; ++i) actions(i, j) = rng.normal(0.0, 0.6);
    adv[j] = rng.normal();
    ret[j] = rng.normal();
  }
  // old log-probs offset from the current policy so ratios differ from 1
  net.forward(obs);
  for (int j = 0; j < batch_size; ++j) {
    const Eigen::Vector2d mu(net.action_mean()(0, j), net.action_mean()(1, j));
    const Eigen::Vector2d ls(net.log_std[0], net.log_std[1]);
    old_logp[j] =
        action_log_prob(actions.col(j).head<2>(), mu, ls) + rng.uniform(-0.15, 0.15);
  }

  const PpoHyper hp{0.2, 0.5, 0.01};
  net.zero_grad();
  ppo_loss(net, obs, actions, old_logp, adv, ret, hp, true);
  Eigen::VectorXd analytic = net.gradients();
  if (fault_scale != 1.0) {
    // corrupt the first conv weight block
    bool first = true;
    Eigen::Index offset = 0;
    net.for_each_param([&](Param<double>& p) {
      if (first) {
        analytic.segment(offset, p.grad.size()) *= fault_scale;
        first = false;
      }
      offset += p.grad.size();
    });
  }

  const Eigen::VectorXd theta = net.parameters();
  const double h = 1e-5;
  double max_rel = 0.0;
  Eigen::VectorXd probe = theta;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    probe[k] = theta[k] + h;
    net.set_parameters(probe);
    const double lp = ppo_loss(net, obs, actions, old_logp, adv, ret, hp, false).total;
    probe[k] = theta[k] - h;
    net.set_parameters(probe);
    const double lm = ppo_loss(net, obs, actions, old_logp, adv, ret, hp, false).total;
    probe[k] = theta[k];
    const double numeric = (lp - lm) / (2.0 * h);
    const double denom = std::max({1e-8, std::abs(analytic[k]), std::abs(numeric)});
    max_rel = std::max(max_rel, std::abs(analytic[k] - numeric) / denom);
  }
  net.set_parameters(theta);
  return max_rel;
}

}  // namespace prunesim
