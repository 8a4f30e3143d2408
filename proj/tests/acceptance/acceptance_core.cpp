// Acceptance suite, fast criteria: signal chain, funnel convergence,
// termination truth table, MDP bounds, gradient check, determinism, and
// rendering goldens. One PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "prunesim/harness.hpp"

using namespace prunesim;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool ok,
            const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion << " (" << name
            << "): " << detail << std::endl;
  if (!ok) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// --- criterion 1: signal-chain unit oracle -------------------------------
void criterion_signal_chain() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream detail;

  ok = ok && std::abs(deadzone(0.5, 0.2) - 0.3) <= 1e-12;
  ok = ok && std::abs(deadzone(-0.5, 0.2) + 0.3) <= 1e-12;
  ok = ok && deadzone(0.15, 0.2) == 0.0;

  WrenchFilter filter;
  const Wrench c = Wrench::Constant(1.25);
  Wrench filt = Wrench::Zero();
  for (int i = 0; i < 51; ++i) filt = filter.push(c);
  ok = ok && (filt - c).cwiseAbs().maxCoeff() <= 1e-12;
  WrenchFilter step_filter;
  Wrench one = Wrench::Zero();
  one[5] = 1.0;
  for (int i = 0; i < 25; ++i) step_filter.push(Wrench::Zero());
  for (int i = 0; i < 26; ++i) filt = step_filter.push(one);
  ok = ok && std::abs(filt[5] - 26.0 / 51.0) <= 1e-12;

  AdmittanceGains gains;
  Wrench w;
  w << 1, 2, 3, 4, 5, 6;
  const Wrench sel = select(gains.selection, w);
  ok = ok && sel[0] == 0 && sel[1] == 0 && sel[2] == 0 && sel[3] == 0 &&
       sel[4] == 5 && sel[5] == 6;

  const AdmittanceStep standstill =
      admittance_step(gains, Wrench::Zero(), Vec6::Zero());
  ok = ok && std::abs(standstill.accel[5] - 0.18) <= 1e-12 &&
       standstill.accel[4] == 0.0;
  Wrench at_desired = Wrench::Zero();
  at_desired[5] = 2.0;
  Vec6 twist = Vec6::Zero();
  twist[5] = 0.01;
  const AdmittanceStep damped = admittance_step(gains, at_desired, twist);
  ok = ok && std::abs(damped.accel[5] + 0.25) <= 1e-12;

  // free-decay factors with the default gains
  AdmittanceGains free = gains;
  free.desired_wrench.setZero();
  Vec6 v = Vec6::Zero();
  v[4] = 1.0;
  v[5] = 1.0;
  const AdmittanceStep decay = admittance_step(free, Wrench::Zero(), v);
  ok = ok && std::abs(decay.new_twist[4] - 0.992) <= 1e-12 &&
       std::abs(decay.new_twist[5] - 0.95) <= 1e-12;

  const double secs = seconds_since(t0);
  detail << "deadzone/filter/selection/admittance hand values to 1e-12, "
         << secs << " s";
  report(1, "signal-chain unit oracle", ok && secs < 1.0, detail.str());
}

// --- criterion 2: closed-loop funnel --------------------------------------
void criterion_funnel() {
  const auto t0 = std::chrono::steady_clock::now();
  const CutterProfile profile = CutterProfile::make_default();
  SupervisorConfig sup;
  int converged = 0;
  double worst_force = 0.0;
  int force_violations = 0;
  const int trials = 50;
  for (int i = 0; i < trials; ++i) {
    RandomStream rng(derive_seed(0xf0a1ULL, {static_cast<std::uint64_t>(i)}));
    const double side = (i % 2 == 0) ? 1.0 : -1.0;
    const double t = rng.uniform(0.05, 0.98);
    const Vec2 a(side * profile.seat_half_width, profile.seat_depth);
    const Vec2 b(side * profile.opening_half_width, profile.opening_depth);
    BranchState branch;
    branch.radius = sup.plant.branch_radius;
    branch.stiffness = sup.plant.branch_stiffness;
    branch.damping = sup.plant.branch_damping;
    branch.mass = sup.plant.branch_mass;
    Vec2 pos = a + t * (b - a);
    pos[0] -= side * branch.radius * rng.uniform(0.5, 0.9);
    branch.rest_position = pos;
    branch.position = pos;

    NoisySensor sensor({sup.plant.sensor_rate, sup.plant.sensor_noise_std,
                        derive_seed(0xbeefULL, {static_cast<std::uint64_t>(i)})});
    const InteractOutcome out = run_interaction(profile, branch, sup, sensor);
    const double offset = (out.branch_in_tool - profile.pivot).norm();
    if (out.terminated && offset < 0.005) ++converged;
    worst_force = std::max(worst_force, out.max_force);
    if (out.max_force >= 10.0) ++force_violations;
  }
  const double secs = seconds_since(t0);
  std::ostringstream detail;
  detail << converged << "/" << trials
         << " converged (<5 mm + termination), max force " << worst_force
         << " N, " << secs << " s";
  report(2, "closed-loop funnel",
         converged >= 48 && force_violations == 0 && secs < 60.0, detail.str());
}

// --- criterion 3: termination truth table ---------------------------------
void criterion_termination() {
  const double dt = 0.002;
  const auto fill = [&](TerminationWindow& w, double tau, double wiggle) {
    for (int i = 0; i < 501; ++i) {
      const double d = wiggle * ((i % 2 == 0) ? 0.5 : -0.5);
      w.push(tau, 0.1 + d, 0.2 + d);
    }
  };
  TerminationWindow a(1.0, dt), b(1.0, dt), c(1.0, dt);
  fill(a, 0.001, 0.0002);
  fill(b, 0.01, 0.0002);
  fill(c, 0.001, 0.002);
  const bool ok = a.check(0.0) && !b.check(0.0) && !c.check(0.0);
  report(3, "termination truth table", ok,
         "tau=0.001/motion 0.2mm true; tau=0.01 false; motion 2mm false");
}

// --- criterion 4: MDP bounds over 10k random episodes ----------------------
void criterion_mdp_bounds() {
  const auto t0 = std::chrono::steady_clock::now();
  SceneConfig scene_cfg;
  const EnvConfig env_cfg;
  const CameraModel cam;
  std::vector<SceneGraph> scenes;
  for (std::uint64_t s = 0; s < 4; ++s) {
    scenes.push_back(build_scene(scene_cfg, derive_seed(0x30adULL, {s})));
  }
  RandomStream rng(0x600dULL);
  long violations = 0;
  long episodes = 10000;
  for (long ep = 0; ep < episodes; ++ep) {
    const SceneGraph& scene = scenes[rng.raw() % scenes.size()];
    const PruneTarget& target =
        scene.targets[rng.raw() % scene.targets.size()];
    ApproachEnv env(&scene, env_cfg, cam);
    env.reset(target, rng.raw());
    double total = 0.0;
    while (env.terminal() == Terminal::Running) {
      const StepOutcome out =
          env.step({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
      total += out.reward;
      if (out.terminal == Terminal::Running &&
          (out.reward < 0.0 || out.reward > env_cfg.dt + 1e-12)) {
        ++violations;
      }
    }
    if (total < -env_cfg.episode_time - 1e-9 ||
        total > env_cfg.episode_time + 1e-9) {
      ++violations;
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream detail;
  detail << episodes << " episodes, " << violations << " bound violations, "
         << secs << " s";
  report(4, "MDP reward bounds", violations == 0 && secs < 300.0, detail.str());
}

// --- criterion 5: gradient check -------------------------------------------
void criterion_grad_check() {
  const auto t0 = std::chrono::steady_clock::now();
  PolicyNet<double> net(NetArch::reduced(), 0xadadULL);
  const double err = grad_check(net, 3, 0x9e11ULL);
  PolicyNet<double> faulty(NetArch::reduced(), 0xadadULL);
  const double fault_err = grad_check(faulty, 3, 0x9e11ULL, 1.05);
  std::ostringstream detail;
  detail << "max rel err " << err << " (<=1e-4), injected fault err " << fault_err
         << " (>1e-2), " << seconds_since(t0) << " s";
  report(5, "analytic vs finite-difference gradients",
         err <= 1e-4 && fault_err > 1e-2, detail.str());
}

// --- criterion 9: trial determinism ----------------------------------------
void criterion_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  HarnessConfig cfg;
  cfg.scene.spindle.min_branches = 3;
  cfg.scene.spindle.max_branches = 3;
  cfg.harness.trials_per_target = 1;
  cfg.harness.controllers = {ControllerId::Hybrid, ControllerId::ClosedLoop,
                             ControllerId::OpenLoop, ControllerId::OpenLoopMiscal};
  cfg.harness.master_seed = 7;

  NetArch arch;
  arch.in_w = cfg.train.net_in_w;
  arch.in_h = cfg.train.net_in_h;
  PolicyNet<float> net(arch, 1);  // untrained but deterministic

  const TrialsResult a = run_trials(cfg, &net);
  const TrialsResult b = run_trials(cfg, &net);
  HarnessConfig par = cfg;
  par.harness.workers = 2;
  const TrialsResult c = run_trials(par, &net);

  const bool identical = trials_csv(a.rows) == trials_csv(b.rows);
  const bool parallel_same = trials_csv(a.rows) == trials_csv(c.rows);
  std::ostringstream detail;
  detail << a.rows.size() << " rows, repeat identical: " << identical
         << ", parallel==serial: " << parallel_same << ", " << seconds_since(t0)
         << " s";
  report(9, "trial determinism", identical && parallel_same, detail.str());
}

// --- criterion 10: rendering goldens ----------------------------------------
void criterion_goldens() {
  const auto t0 = std::chrono::steady_clock::now();
  const CameraModel cam;
  bool ok = true;
  std::ostringstream detail;

  const auto tmp = std::filesystem::temp_directory_path();
  for (std::uint64_t g = 0; g < 3; ++g) {
    const SceneGraph scene = build_scene(SceneConfig{}, derive_seed(0x601dULL, {g}));
    const PruneTarget& target = scene.targets[g % scene.targets.size()];
    Pose pose = Pose::Identity();
    pose.translation() = target.point - Vec3(0.002 * g, -0.003 * g, 0.17);
    const SegmentedImage img1 = render_segmented(scene, pose, cam);
    const SegmentedImage img2 = render_segmented(scene, pose, cam);
    const std::string p1 = (tmp / ("prunesim_gold_a" + std::to_string(g) + ".ppm")).string();
    const std::string p2 = (tmp / ("prunesim_gold_b" + std::to_string(g) + ".ppm")).string();
    export_ppm(img1, p1);
    export_ppm(img2, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    ok = ok && s1.str() == s2.str() && !s1.str().empty();
    std::remove(p1.c_str());
    std::remove(p2.c_str());
  }

  // mask consistency over 1000 random renders
  long mask_violations = 0;
  RandomStream rng(0x3a5cULL);
  std::vector<SceneGraph> scenes;
  for (std::uint64_t s = 0; s < 4; ++s) {
    scenes.push_back(build_scene(SceneConfig{}, derive_seed(0x601dULL, {s})));
  }
  for (int i = 0; i < 1000; ++i) {
    const SceneGraph& scene = scenes[rng.raw() % scenes.size()];
    const PruneTarget& target = scene.targets[rng.raw() % scene.targets.size()];
    Pose pose = Pose::Identity();
    pose.translation() =
        target.point + Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                            rng.uniform(-0.25, -0.05));
    pose.linear() = Eigen::AngleAxisd(rng.uniform(-0.1, 0.1), Vec3::UnitY())
                        .toRotationMatrix();
    const SegmentedImage obs = render_observation(scene, pose, cam);
    for (std::size_t p = 0; p < obs.h.size(); ++p) {
      const bool tree = obs.h[p] == pixel_class::kTree;
      const bool masked = obs.s[p] == 255;
      if (tree != masked) ++mask_violations;
      const bool known_class =
          obs.h[p] == pixel_class::kBackground || obs.h[p] == pixel_class::kTree ||
          obs.h[p] == pixel_class::kFrame || obs.h[p] == pixel_class::kWire ||
          obs.h[p] == pixel_class::kCutter;
      if (!known_class) ++mask_violations;
    }
  }
  const double secs = seconds_since(t0);
  detail << "3 golden pairs bit-identical, mask violations " << mask_violations
         << "/1000 renders, " << secs << " s";
  report(10, "rendering goldens + mask consistency", ok && mask_violations == 0,
         detail.str());
}

}  // namespace

int main() {
  criterion_signal_chain();
  criterion_funnel();
  criterion_termination();
  criterion_mdp_bounds();
  criterion_grad_check();
  criterion_determinism();
  criterion_goldens();
  if (g_failures > 0) {
    std::cout << g_failures << " acceptance criteria FAILED" << std::endl;
    return 1;
  }
  std::cout << "all core acceptance criteria passed" << std::endl;
  return 0;
}
