#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "prunesim/errors.hpp"
#include "prunesim/harness.hpp"

namespace fs = std::filesystem;
using namespace prunesim;

namespace {

struct CommonOpts {
  std::string config = "default";
  std::string out = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config, "Config file path, or 'default'");
  cmd->add_option("--out", opts.out, "Output directory");
  cmd->add_option("--seed", opts.seed, "Master seed override")
      ->each([&](const std::string&) { opts.seed_set = true; });
}

HarnessConfig load(const CommonOpts& opts) {
  HarnessConfig cfg = load_config(opts.config);
  if (opts.seed_set) {
    cfg.harness.master_seed = opts.seed;
    cfg.train.ppo.seed = opts.seed;
  }
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << content;
}

int cmd_train(const CommonOpts& opts, long steps_override) {
  HarnessConfig cfg = load(opts);
  if (steps_override > 0) cfg.train.ppo.total_steps = steps_override;
  fs::create_directories(opts.out);

  NetArch arch;
  arch.in_w = cfg.train.net_in_w;
  arch.in_h = cfg.train.net_in_h;
  PolicyNet<float> net(arch, cfg.train.ppo.seed);

  TaskSetConfig task = cfg.task_config();
  const EnvFactory factory = make_env_factory(task);
  std::cout << "training: " << cfg.train.ppo.total_steps << " steps, "
            << cfg.train.ppo.n_envs << " envs, input " << arch.in_w << "x"
            << arch.in_h << std::endl;
  const TrainResult result = train(factory, net, cfg.train.ppo, &std::cout);

  const fs::path ckpt = fs::path(opts.out) / "policy.bin";
  save_checkpoint(net, ckpt.string());
  write_file(fs::path(opts.out) / "learning_curve.csv", learning_curve_csv(result));
  std::cout << "saved " << ckpt.string() << " after " << result.total_env_steps
            << " env steps" << std::endl;
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& policy_path, int episodes) {
  HarnessConfig cfg = load(opts);
  const std::string path =
      policy_path.empty() ? cfg.harness.policy_checkpoint : policy_path;
  if (path.empty()) throw ConfigError("eval: no policy checkpoint given");
  PolicyNet<float> net = load_checkpoint(path);

  TaskSetConfig task = cfg.task_config();
  task.scene_seed_base = cfg.train.eval_scene_seed_base;  // held-out scenes
  task.net_in_w = net.arch().in_w;
  task.net_in_h = net.arch().in_h;
  auto pool = build_scene_pool(task);
  VisionTaskEnv env(pool, task);
  const int n = episodes > 0 ? episodes : cfg.train.eval_episodes;

  const EvalResult trained =
      evaluate_policy(env, net, n, derive_seed(cfg.harness.master_seed, {0xe0a1ULL}));
  VisionTaskEnv env2(pool, task);
  const EvalResult random =
      evaluate_random(env2, n, derive_seed(cfg.harness.master_seed, {0xe0a1ULL}));
  std::cout << "episodes " << n << "\n"
            << "trained success_rate " << trained.success_rate << " mean_reward "
            << trained.mean_reward << "\n"
            << "random  success_rate " << random.success_rate << " mean_reward "
            << random.mean_reward << std::endl;
  return 0;
}

int cmd_trial(const CommonOpts& opts) {
  HarnessConfig cfg = load(opts);
  std::unique_ptr<PolicyNet<float>> policy;
  const bool wants_hybrid =
      std::find(cfg.harness.controllers.begin(), cfg.harness.controllers.end(),
                ControllerId::Hybrid) != cfg.harness.controllers.end();
  if (wants_hybrid) {
    if (cfg.harness.policy_checkpoint.empty()) {
      throw ConfigError("trial: hybrid enabled but harness.policy_checkpoint unset");
    }
    policy = std::make_unique<PolicyNet<float>>(
        load_checkpoint(cfg.harness.policy_checkpoint));
  }
  const TrialsResult result = run_trials(cfg, policy.get());
  fs::create_directories(opts.out);
  write_file(fs::path(opts.out) / "trials.csv", trials_csv(result.rows));
  write_file(fs::path(opts.out) / "summary.txt", summary_text(result.summary));
  std::cout << summary_text(result.summary);
  std::cout << "wrote " << (fs::path(opts.out) / "trials.csv").string() << std::endl;
  return 0;
}

int cmd_render(const CommonOpts& opts, int episodes, int steps) {
  HarnessConfig cfg = load(opts);
  const SceneGraph scene =
      build_scene(cfg.scene, derive_seed(cfg.harness.master_seed, {0x5ce1eULL}));
  write_file(fs::path(opts.out) / "scene.txt", scene_to_text(scene));
  episodes = std::min<int>(episodes, static_cast<int>(scene.targets.size()));
  for (int ep = 0; ep < episodes; ++ep) {
    ApproachEnv env(&scene, cfg.env, cfg.camera);
    env.reset(scene.targets[ep],
              derive_seed(cfg.harness.master_seed, {0xd0ULL, static_cast<std::uint64_t>(ep)}));
    const fs::path dir = fs::path(opts.out) / "frames" / ("ep" + std::to_string(ep));
    fs::create_directories(dir);
    for (int s = 0; s < steps; ++s) {
      const SegmentedImage frame = render_segmented(scene, env.tool_pose(), cfg.camera);
      export_ppm(frame, (dir / ("step" + std::to_string(s) + ".ppm")).string());
      if (env.terminal() != Terminal::Running) break;
      env.step({0.0, 0.0});
    }
  }
  std::cout << "wrote frames under " << (fs::path(opts.out) / "frames").string()
            << std::endl;
  return 0;
}

int cmd_trace(const CommonOpts& opts) {
  HarnessConfig cfg = load(opts);
  const SceneGraph scene =
      build_scene(cfg.scene, derive_seed(cfg.harness.master_seed, {0x5ce1eULL}));

  // Single interaction episode: branch seeded on a funnel edge, admittance
  // runs to termination.
  RandomStream rng(derive_seed(cfg.harness.master_seed, {0x7aceULL}));
  const CutterProfile& profile = scene.cutter;
  const double t = rng.uniform(0.2, 0.9);
  const double side = rng.uniform() < 0.5 ? 1.0 : -1.0;
  const Vec2 edge_lo(side * profile.seat_half_width, profile.seat_depth);
  const Vec2 edge_hi(side * profile.opening_half_width, profile.opening_depth);
  BranchState branch;
  branch.radius = cfg.supervisor.plant.branch_radius;
  branch.stiffness = cfg.supervisor.plant.branch_stiffness;
  branch.damping = cfg.supervisor.plant.branch_damping;
  branch.mass = cfg.supervisor.plant.branch_mass;
  Vec2 pos = edge_lo + t * (edge_hi - edge_lo);
  const Vec2 inward = Vec2(-side, 0.0);
  pos += (branch.radius * 0.9) * inward;
  branch.rest_position = pos;
  branch.position = pos;

  NoisySensor sensor({cfg.supervisor.plant.sensor_rate,
                      cfg.supervisor.plant.sensor_noise_std,
                      derive_seed(cfg.harness.master_seed, {0x11ULL})});
  const InteractOutcome out = run_interaction(profile, branch, cfg.supervisor,
                                              sensor, nullptr, Pose::Identity(),
                                              WrenchFilter(), true);
  fs::create_directories(opts.out);
  write_file(fs::path(opts.out) / "controller_trace.csv",
             interact_trace_csv(out.trace));
  std::cout << "terminated " << (out.terminated ? "yes" : "no") << " after "
            << out.elapsed << " s; final branch offset "
            << (out.branch_in_tool - profile.pivot).norm() << " m; max force "
            << out.max_force << " N\n"
            << "wrote " << (fs::path(opts.out) / "controller_trace.csv").string()
            << std::endl;
  return 0;
}

int cmd_selftest(const CommonOpts& opts) {
  HarnessConfig cfg = load(opts);
  int failures = 0;
  const auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << std::endl;
    if (!ok) ++failures;
  };

  check("deadzone arithmetic", deadzone(0.5, 0.2) == 0.3 &&
                                   deadzone(-0.5, 0.2) == -0.3 &&
                                   deadzone(0.1, 0.2) == 0.0);
  {
    Wrench w;
    w << 1, 2, 3, 4, 5, 6;
    const Wrench sel = select(AdmittanceGains().selection, w);
    check("selection projection", sel[0] == 0 && sel[3] == 0 && sel[4] == 5 &&
                                      sel[5] == 6);
  }
  {
    AdmittanceGains g;
    const AdmittanceStep s = admittance_step(g, Wrench::Zero(), Vec6::Zero());
    check("admittance from standstill", std::abs(s.accel[5] - 0.18) < 1e-12 &&
                                            s.accel[4] == 0.0);
  }
  {
    WrenchFilter f;
    Wrench c = Wrench::Constant(3.5);
    Wrench last = Wrench::Zero();
    for (int i = 0; i < 51; ++i) last = f.push(c);
    check("filter constant signal", (last - c).norm() < 1e-12);
  }
  {
    const SceneGraph a = build_scene(cfg.scene, 7);
    const SceneGraph b = build_scene(cfg.scene, 7);
    check("scene determinism", scene_to_text(a) == scene_to_text(b));
    check("scene composition",
          a.spindles.size() == 3 && a.wires.size() == 2 && !a.targets.empty());
    bool zones_exclusive = true;
    for (const Polygon2& band : a.cutter.failure_regions) {
      zones_exclusive =
          zones_exclusive && polygons_disjoint(a.cutter.success_region, band);
    }
    check("zone polygons disjoint", zones_exclusive);
  }
  {
    std::vector<double> adv, ret;
    gae({1.0}, {0.5, 0.0}, {1}, 0.99, 0.95, &adv, &ret);
    check("gae one-step terminal", std::abs(adv[0] - 0.5) < 1e-12);
  }
  {
    NetArch arch = NetArch::reduced();
    PolicyNet<double> net(arch, 11);
    const double err = grad_check(net, 3, 5);
    check("gradient check", err <= 1e-4);
  }
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale pruning control simulator"};
  app.require_subcommand(1);

  CommonOpts train_opts, eval_opts, trial_opts, render_opts, trace_opts, self_opts;
  long train_steps = 0;
  std::string eval_policy;
  int eval_episodes = 0;
  int render_episodes = 3, render_steps = 6;

  CLI::App* train_cmd = app.add_subcommand("train", "Train the vision policy");
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--steps", train_steps, "Override train.total_steps");

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Policy success rate over held-out episodes");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--policy", eval_policy, "Checkpoint path");
  eval_cmd->add_option("--episodes", eval_episodes, "Episode count");

  CLI::App* trial_cmd =
      app.add_subcommand("trial", "Full controller comparison (paper protocol)");
  add_common(trial_cmd, trial_opts);

  CLI::App* render_cmd =
      app.add_subcommand("render", "Dump segmented frames as PPM");
  add_common(render_cmd, render_opts);
  render_cmd->add_option("--episodes", render_episodes, "Episode count");
  render_cmd->add_option("--steps", render_steps, "Frames per episode");

  CLI::App* trace_cmd =
      app.add_subcommand("trace", "Single-episode admittance controller trace");
  add_common(trace_cmd, trace_opts);

  CLI::App* self_cmd = app.add_subcommand("selftest", "Run the invariant suites");
  add_common(self_cmd, self_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_opts, train_steps);
    if (eval_cmd->parsed()) return cmd_eval(eval_opts, eval_policy, eval_episodes);
    if (trial_cmd->parsed()) return cmd_trial(trial_opts);
    if (render_cmd->parsed()) return cmd_render(render_opts, render_episodes, render_steps);
    if (trace_cmd->parsed()) return cmd_trace(trace_opts);
    if (self_cmd->parsed()) return cmd_selftest(self_opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 1;
}
