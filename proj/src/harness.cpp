#include "prunesim/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>

#include "prunesim/errors.hpp"

namespace prunesim {

using nlohmann::json;

TaskSetConfig HarnessConfig::task_config() const {
  TaskSetConfig task;
  task.scene = scene;
  task.env = env;
  task.camera = camera;
  task.scene_pool = train.scene_pool;
  task.scene_seed_base = train.scene_seed_base;
  task.net_in_w = train.net_in_w;
  task.net_in_h = train.net_in_h;
  return task;
}

void HarnessConfig::validate() const {
  env.validate();
  supervisor.gains.validate();
  train.ppo.validate();
  if (harness.trials_per_target < 1) {
    throw ConfigError("harness: trials_per_target must be >= 1");
  }
  if (harness.workers < 1) throw ConfigError("harness: workers must be >= 1");
  if (harness.home_views.empty()) {
    throw ConfigError("harness: at least one home view required");
  }
  if (camera.width <= 0 || camera.height <= 0 ||
      camera.horizontal_fov_deg <= 0.0 || camera.horizontal_fov_deg >= 180.0) {
    throw ConfigError("camera: invalid intrinsics");
  }
  build_scene(scene, 0);  // throws on bad scene dimensions
}

namespace {

void check_keys(const json& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: " + ctx + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("config: unknown key '" + key + "' in " + ctx);
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_vec6(const json& j, const char* key, Vec6& out) {
  if (!j.contains(key)) return;
  const auto arr = j.at(key).get<std::vector<double>>();
  if (arr.size() != 6) {
    throw ConfigError(std::string("config: ") + key + " must have 6 entries");
  }
  for (int i = 0; i < 6; ++i) out[i] = arr[i];
}

void parse_spindle(const json& j, SpindleParams& p) {
  check_keys(j, "scene.spindle",
             {"leader_height", "leader_segments", "leader_radius_base",
              "leader_radius_tip", "leader_waver", "min_branches", "max_branches",
              "branch_height_min", "branch_height_max", "branch_length_min",
              "branch_length_max", "branch_radius_min", "branch_radius_max",
              "branch_segments", "branch_azimuth_jitter", "branch_elevation_min",
              "branch_elevation_max", "model_seed"});
  read_field(j, "leader_height", p.leader_height);
  read_field(j, "leader_segments", p.leader_segments);
  read_field(j, "leader_radius_base", p.leader_radius_base);
  read_field(j, "leader_radius_tip", p.leader_radius_tip);
  read_field(j, "leader_waver", p.leader_waver);
  read_field(j, "min_branches", p.min_branches);
  read_field(j, "max_branches", p.max_branches);
  read_field(j, "branch_height_min", p.branch_height_min);
  read_field(j, "branch_height_max", p.branch_height_max);
  read_field(j, "branch_length_min", p.branch_length_min);
  read_field(j, "branch_length_max", p.branch_length_max);
  read_field(j, "branch_radius_min", p.branch_radius_min);
  read_field(j, "branch_radius_max", p.branch_radius_max);
  read_field(j, "branch_segments", p.branch_segments);
  read_field(j, "branch_azimuth_jitter", p.branch_azimuth_jitter);
  read_field(j, "branch_elevation_min", p.branch_elevation_min);
  read_field(j, "branch_elevation_max", p.branch_elevation_max);
  read_field(j, "model_seed", p.model_seed);
}

void parse_scene(const json& j, SceneConfig& s) {
  check_keys(j, "scene",
             {"frame_width", "frame_height", "post_half_width", "wire_heights",
              "wire_radius", "spindle_count", "model_pool_size", "spindle",
              "target_arclength", "target_arclength_jitter"});
  read_field(j, "frame_width", s.frame_width);
  read_field(j, "frame_height", s.frame_height);
  read_field(j, "post_half_width", s.post_half_width);
  read_field(j, "wire_heights", s.wire_heights);
  read_field(j, "wire_radius", s.wire_radius);
  read_field(j, "spindle_count", s.spindle_count);
  read_field(j, "model_pool_size", s.model_pool_size);
  read_field(j, "target_arclength", s.target_arclength);
  read_field(j, "target_arclength_jitter", s.target_arclength_jitter);
  if (j.contains("spindle")) parse_spindle(j.at("spindle"), s.spindle);
}

void parse_env(const json& j, EnvConfig& e) {
  check_keys(j, "env",
             {"episode_time", "dt", "d_min", "s_forward", "start_distance_min",
              "start_distance_max", "start_lateral_jitter", "start_yaw_jitter_deg"});
  read_field(j, "episode_time", e.episode_time);
  read_field(j, "dt", e.dt);
  read_field(j, "d_min", e.d_min);
  read_field(j, "s_forward", e.s_forward);
  read_field(j, "start_distance_min", e.start_distance_min);
  read_field(j, "start_distance_max", e.start_distance_max);
  read_field(j, "start_lateral_jitter", e.start_lateral_jitter);
  read_field(j, "start_yaw_jitter_deg", e.start_yaw_jitter_deg);
}

void parse_camera(const json& j, CameraModel& c) {
  check_keys(j, "camera",
             {"width", "height", "horizontal_fov_deg", "mount_height",
              "mount_setback", "mount_pitch_deg"});
  read_field(j, "width", c.width);
  read_field(j, "height", c.height);
  read_field(j, "horizontal_fov_deg", c.horizontal_fov_deg);
  double mount_height = 0.09, mount_setback = 0.08, mount_pitch_deg = 25.0;
  read_field(j, "mount_height", mount_height);
  read_field(j, "mount_setback", mount_setback);
  read_field(j, "mount_pitch_deg", mount_pitch_deg);
  c.tool_from_camera =
      CameraModel::make_mount(mount_height, mount_setback, mount_pitch_deg);
}

void parse_gains(const json& j, AdmittanceGains& g) {
  check_keys(j, "gains",
             {"virtual_mass", "damping", "selection", "desired_wrench",
              "force_threshold", "inner_dt"});
  read_vec6(j, "virtual_mass", g.virtual_mass);
  read_vec6(j, "damping", g.damping);
  read_vec6(j, "selection", g.selection);
  read_vec6(j, "desired_wrench", g.desired_wrench);
  read_field(j, "force_threshold", g.force_threshold);
  read_field(j, "inner_dt", g.inner_dt);
}

void parse_plant(const json& j, PlantConfig& p) {
  check_keys(j, "plant",
             {"branch_stiffness", "branch_damping", "branch_mass", "branch_radius",
              "k_contact", "sensor_noise_std", "sensor_rate"});
  read_field(j, "branch_stiffness", p.branch_stiffness);
  read_field(j, "branch_damping", p.branch_damping);
  read_field(j, "branch_mass", p.branch_mass);
  read_field(j, "branch_radius", p.branch_radius);
  read_field(j, "k_contact", p.k_contact);
  read_field(j, "sensor_noise_std", p.sensor_noise_std);
  read_field(j, "sensor_rate", p.sensor_rate);
}

void parse_supervisor(const json& j, SupervisorConfig& s) {
  check_keys(j, "supervisor",
             {"contact_threshold", "interact_timeout", "vision_speed", "ol_gain",
              "ol_max_speed", "ol_stop_distance", "cl_overshoot"});
  read_field(j, "contact_threshold", s.contact_threshold);
  read_field(j, "interact_timeout", s.interact_timeout);
  read_field(j, "vision_speed", s.vision_speed);
  read_field(j, "ol_gain", s.ol_gain);
  read_field(j, "ol_max_speed", s.ol_max_speed);
  read_field(j, "ol_stop_distance", s.ol_stop_distance);
  read_field(j, "cl_overshoot", s.cl_overshoot);
}

void parse_depth_error(const json& j, DepthErrorModel& d) {
  check_keys(j, "depth_error", {"bias", "noise_std"});
  read_field(j, "bias", d.bias);
  read_field(j, "noise_std", d.noise_std);
}

ControllerId controller_from_name(const std::string& name) {
  if (name == "hybrid") return ControllerId::Hybrid;
  if (name == "cl") return ControllerId::ClosedLoop;
  if (name == "ol") return ControllerId::OpenLoop;
  if (name == "ol-") return ControllerId::OpenLoopMiscal;
  throw ConfigError("config: unknown controller '" + name + "'");
}

void parse_harness(const json& j, HarnessOptions& h) {
  check_keys(j, "harness",
             {"controllers", "trials_per_target", "master_seed", "start_distance",
              "home_views", "policy_checkpoint", "workers"});
  if (j.contains("controllers")) {
    h.controllers.clear();
    for (const auto& name : j.at("controllers")) {
      h.controllers.push_back(controller_from_name(name.get<std::string>()));
    }
  }
  read_field(j, "trials_per_target", h.trials_per_target);
  read_field(j, "master_seed", h.master_seed);
  read_field(j, "start_distance", h.start_distance);
  read_field(j, "policy_checkpoint", h.policy_checkpoint);
  read_field(j, "workers", h.workers);
  if (j.contains("home_views")) {
    h.home_views.clear();
    for (const auto& v : j.at("home_views")) {
      check_keys(v, "harness.home_views[]", {"azimuth_deg", "elevation_deg", "distance"});
      HomeView view;
      read_field(v, "azimuth_deg", view.azimuth_deg);
      read_field(v, "elevation_deg", view.elevation_deg);
      read_field(v, "distance", view.distance);
      h.home_views.push_back(view);
    }
  }
}

void parse_train(const json& j, TrainRun& t) {
  check_keys(j, "train",
             {"clip_ratio", "discount", "gae_lambda", "learning_rate",
              "rollout_horizon", "minibatch_size", "epochs_per_update",
              "total_steps", "seed", "n_envs", "value_coef", "entropy_coef",
              "max_grad_norm", "scene_pool", "scene_seed_base",
              "eval_scene_seed_base", "net_in_w", "net_in_h", "eval_episodes"});
  read_field(j, "clip_ratio", t.ppo.clip_ratio);
  read_field(j, "discount", t.ppo.discount);
  read_field(j, "gae_lambda", t.ppo.gae_lambda);
  read_field(j, "learning_rate", t.ppo.learning_rate);
  read_field(j, "rollout_horizon", t.ppo.rollout_horizon);
  read_field(j, "minibatch_size", t.ppo.minibatch_size);
  read_field(j, "epochs_per_update", t.ppo.epochs_per_update);
  read_field(j, "total_steps", t.ppo.total_steps);
  read_field(j, "seed", t.ppo.seed);
  read_field(j, "n_envs", t.ppo.n_envs);
  read_field(j, "value_coef", t.ppo.value_coef);
  read_field(j, "entropy_coef", t.ppo.entropy_coef);
  read_field(j, "max_grad_norm", t.ppo.max_grad_norm);
  read_field(j, "scene_pool", t.scene_pool);
  read_field(j, "scene_seed_base", t.scene_seed_base);
  read_field(j, "eval_scene_seed_base", t.eval_scene_seed_base);
  read_field(j, "net_in_w", t.net_in_w);
  read_field(j, "net_in_h", t.net_in_h);
  read_field(j, "eval_episodes", t.eval_episodes);
}

}  // namespace

HarnessConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid json: ") + e.what());
  }
  check_keys(j, "(root)",
             {"scene", "env", "camera", "gains", "plant", "supervisor",
              "depth_error", "harness", "train"});
  HarnessConfig cfg;
  if (j.contains("scene")) parse_scene(j.at("scene"), cfg.scene);
  if (j.contains("env")) parse_env(j.at("env"), cfg.env);
  if (j.contains("camera")) parse_camera(j.at("camera"), cfg.camera);
  if (j.contains("gains")) parse_gains(j.at("gains"), cfg.supervisor.gains);
  if (j.contains("plant")) parse_plant(j.at("plant"), cfg.supervisor.plant);
  if (j.contains("supervisor")) parse_supervisor(j.at("supervisor"), cfg.supervisor);
  if (j.contains("depth_error")) parse_depth_error(j.at("depth_error"), cfg.depth_error);
  if (j.contains("harness")) parse_harness(j.at("harness"), cfg.harness);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  cfg.validate();
  return cfg;
}

HarnessConfig load_config(const std::string& path_or_default) {
  if (path_or_default.empty() || path_or_default == "default") {
    HarnessConfig cfg;
    cfg.validate();
    return cfg;
  }
  std::ifstream file(path_or_default);
  if (!file) throw ConfigError("config: cannot open " + path_or_default);
  std::stringstream buffer;
  buffer << file.rdbuf();
  return parse_config_text(buffer.str());
}

Pose home_view_pose(const HomeView& view, const Vec3& target_point) {
  const double az = deg_to_rad(view.azimuth_deg);
  const double el = deg_to_rad(view.elevation_deg);
  // direction from the camera toward the target
  const Vec3 ray(std::sin(az) * std::cos(el), std::sin(el),
                 std::cos(az) * std::cos(el));
  Pose pose = Pose::Identity();
  pose.translation() = target_point - view.distance * ray;
  // OpenCV camera convention: z forward (= ray), y down.
  const Vec3 up(0.0, 1.0, 0.0);
  const Vec3 z = ray.normalized();
  Vec3 x = (-up).cross(z).normalized();  // y_cam = -up, x = y x z
  const Vec3 y = z.cross(x).normalized();
  Mat3 rot;
  rot.col(0) = x;
  rot.col(1) = y;
  rot.col(2) = z;
  pose.linear() = rot;
  return pose;
}

namespace {

struct TrialContext {
  int trial_id;
  int target_id;
  int trial_in_target;
  TargetEstimate estimate;         // shared by hybrid/cl/ol
  TargetEstimate estimate_miscal;  // ol- only
  Pose start;
};

std::uint64_t episode_seed(std::uint64_t master, int target_id, int trial,
                           ControllerId c) {
  return derive_seed(master, {static_cast<std::uint64_t>(target_id),
                              static_cast<std::uint64_t>(trial),
                              static_cast<std::uint64_t>(c)});
}

TrialRow make_row(const TrialContext& ctx, const EpisodeRecord& rec,
                  const TrialMetrics& metrics) {
  TrialRow row;
  row.trial_id = ctx.trial_id;
  row.controller = rec.controller;
  row.target_id = rec.target_id;
  row.seed = rec.seed;
  row.success = metrics.accuracy;
  row.pivot_offset_m = metrics.pivot_offset;
  row.remnant_len_m = metrics.remnant_length;
  row.max_force_n = metrics.max_force;
  row.steps = rec.vision_steps;
  row.terminal = hybrid_state_name(rec.final_state);
  return row;
}

}  // namespace

TrialsResult run_trials(const HarnessConfig& cfg, PolicyNet<float>* policy) {
  cfg.validate();
  const bool wants_hybrid =
      std::find(cfg.harness.controllers.begin(), cfg.harness.controllers.end(),
                ControllerId::Hybrid) != cfg.harness.controllers.end();
  if (wants_hybrid && policy == nullptr) {
    throw ConfigError("trial: hybrid controller requested but no policy loaded");
  }

  const std::uint64_t master = cfg.harness.master_seed;
  const SceneGraph scene = build_scene(cfg.scene, derive_seed(master, {0x5ce1eULL}));
  const TaskSetConfig task = cfg.task_config();

  // Deterministic per-trial contexts (estimate draws shared across
  // controllers), independent of worker scheduling.
  std::vector<TrialContext> contexts;
  const int n_targets = static_cast<int>(scene.targets.size());
  for (int t = 0; t < n_targets; ++t) {
    for (int k = 0; k < cfg.harness.trials_per_target; ++k) {
      TrialContext ctx;
      ctx.trial_id = t * cfg.harness.trials_per_target + k;
      ctx.target_id = t;
      ctx.trial_in_target = k;
      RandomStream rng(derive_seed(master, {0xe57ULL, static_cast<std::uint64_t>(t),
                                            static_cast<std::uint64_t>(k)}));
      const HomeView& view =
          cfg.harness.home_views[rng.raw() % cfg.harness.home_views.size()];
      const Pose cam_pose = home_view_pose(view, scene.targets[t].point);
      ctx.estimate =
          estimate_target(scene.targets[t].point, cam_pose, cfg.depth_error, rng);
      const Pose cam_perturbed = perturb_calibration(cam_pose, rng);
      const Vec3 in_camera = cam_pose.inverse() * ctx.estimate.point;
      ctx.estimate_miscal.point = cam_perturbed * in_camera;
      ctx.estimate_miscal.source = EstimateSource::Miscalibrated;

      ctx.start = Pose::Identity();
      ctx.start.translation() =
          ctx.estimate.point - Vec3(0.0, 0.0, cfg.harness.start_distance);
      contexts.push_back(ctx);
    }
  }

  struct Job {
    int context_idx;
    ControllerId controller;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    for (ControllerId c : cfg.harness.controllers) {
      jobs.push_back({static_cast<int>(i), c});
    }
  }

  std::vector<TrialRow> rows(jobs.size());
  // forward passes mutate layer caches, so each worker runs its own net copy
  auto run_job = [&](std::size_t j, PolicyNet<float>* net) {
    const Job& job = jobs[j];
    const TrialContext& ctx = contexts[job.context_idx];
    const std::uint64_t seed =
        episode_seed(master, ctx.target_id, ctx.trial_in_target, job.controller);
    EpisodeRecord rec;
    switch (job.controller) {
      case ControllerId::Hybrid:
        rec = run_hybrid(scene, ctx.target_id, *net, task, cfg.supervisor, seed,
                         ctx.start);
        break;
      case ControllerId::ClosedLoop:
        rec = run_closed_loop(scene, ctx.target_id, ctx.estimate, cfg.supervisor,
                              seed, ctx.start);
        break;
      case ControllerId::OpenLoop:
        rec = run_open_loop(scene, ctx.target_id, ctx.estimate, cfg.supervisor,
                            seed, ctx.start);
        break;
      case ControllerId::OpenLoopMiscal:
        rec = run_open_loop(scene, ctx.target_id, ctx.estimate_miscal,
                            cfg.supervisor, seed, ctx.start,
                            ControllerId::OpenLoopMiscal);
        break;
    }
    rows[j] = make_row(ctx, rec, compute_metrics(rec, scene, scene.targets[ctx.target_id]));
  };

  const int workers = std::min<int>(cfg.harness.workers, static_cast<int>(jobs.size()));
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j, policy);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> futs;
    for (int w = 0; w < workers; ++w) {
      futs.push_back(std::async(std::launch::async, [&]() {
        std::unique_ptr<PolicyNet<float>> local;
        if (policy != nullptr) local = std::make_unique<PolicyNet<float>>(*policy);
        while (true) {
          const std::size_t j = next.fetch_add(1);
          if (j >= jobs.size()) break;
          run_job(j, local.get());
        }
      }));
    }
    for (auto& f : futs) f.get();
  }

  TrialsResult result;
  result.rows = std::move(rows);
  result.summary = summarize(result.rows);
  return result;
}

SummaryTable summarize(const std::vector<TrialRow>& rows) {
  SummaryTable table;
  for (ControllerId c : {ControllerId::Hybrid, ControllerId::ClosedLoop,
                         ControllerId::OpenLoop, ControllerId::OpenLoopMiscal}) {
    ControllerSummary s;
    s.controller = c;
    int successes = 0;
    std::vector<double> pivots, remnants, forces;
    for (const TrialRow& r : rows) {
      if (r.controller != c) continue;
      ++s.trials;
      if (r.success) ++successes;
      if (r.pivot_offset_m.has_value()) pivots.push_back(*r.pivot_offset_m * 100.0);
      if (r.remnant_len_m.has_value()) remnants.push_back(*r.remnant_len_m * 100.0);
      forces.push_back(r.max_force_n);
    }
    if (s.trials == 0) continue;
    s.accuracy_pct = static_cast<int>(
        std::llround(100.0 * successes / static_cast<double>(s.trials)));
    const auto mean_std = [](const std::vector<double>& v, double* mean,
                             double* stddev) {
      if (v.empty()) {
        *mean = 0;
        *stddev = 0;
        return;
      }
      double m = 0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double var = 0;
      for (double x : v) var += (x - m) * (x - m);
      var /= static_cast<double>(v.size());  // population std
      *mean = m;
      *stddev = std::sqrt(var);
    };
    mean_std(pivots, &s.pivot_mean_cm, &s.pivot_std_cm);
    s.pivot_count = static_cast<int>(pivots.size());
    mean_std(remnants, &s.remnant_mean_cm, &s.remnant_std_cm);
    s.remnant_count = static_cast<int>(remnants.size());
    mean_std(forces, &s.force_mean_n, &s.force_std_n);
    table.rows.push_back(s);
  }
  return table;
}

std::string trials_csv(const std::vector<TrialRow>& rows) {
  std::ostringstream os;
  os << "trial_id,controller,target_id,seed,success,pivot_offset_m,"
        "remnant_len_m,max_force_N,steps,terminal\n";
  for (const TrialRow& r : rows) {
    os << r.trial_id << "," << controller_name(r.controller) << "," << r.target_id
       << "," << r.seed << "," << (r.success ? 1 : 0) << ",";
    if (r.pivot_offset_m.has_value()) os << *r.pivot_offset_m;
    os << ",";
    if (r.remnant_len_m.has_value()) os << *r.remnant_len_m;
    os << "," << r.max_force_n << "," << r.steps << "," << r.terminal << "\n";
  }
  return os.str();
}

std::string summary_text(const SummaryTable& table) {
  std::ostringstream os;
  os << "controller  acc%  pivot_cm(mean+/-std)  remnant_cm(mean+/-std)  "
        "max_force_N(mean+/-std)\n";
  for (const ControllerSummary& s : table.rows) {
    os << controller_name(s.controller) << "  " << s.accuracy_pct << "%  "
       << s.pivot_mean_cm << " +/- " << s.pivot_std_cm << " (n=" << s.pivot_count
       << ")  " << s.remnant_mean_cm << " +/- " << s.remnant_std_cm
       << " (n=" << s.remnant_count << ")  " << s.force_mean_n << " +/- "
       << s.force_std_n << "\n";
  }
  return os.str();
}

}  // namespace prunesim
