#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "prunesim/supervisor.hpp"

namespace prunesim {

struct HomeView {
  double azimuth_deg = 0.0;    // about world y, 0 = straight-on
  double elevation_deg = 0.0;  // positive looks up at the target
  double distance = 0.9;       // m from the target
};

struct HarnessOptions {
  std::vector<ControllerId> controllers = {
      ControllerId::Hybrid, ControllerId::ClosedLoop, ControllerId::OpenLoop,
      ControllerId::OpenLoopMiscal};
  int trials_per_target = 4;
  std::uint64_t master_seed = 7;
  double start_distance = 0.15;  // from the estimated target
  std::vector<HomeView> home_views = {
      {0.0, 0.0, 0.9}, {-65.0, 0.0, 0.9}, {65.0, 0.0, 0.9}, {0.0, 45.0, 0.9}};
  std::string policy_checkpoint;
  int workers = 1;
};

struct TrainRun {
  TrainConfig ppo;
  int scene_pool = 8;
  std::uint64_t scene_seed_base = 99;
  std::uint64_t eval_scene_seed_base = 7777;
  int net_in_w = 80;
  int net_in_h = 40;
  int eval_episodes = 200;
};

struct HarnessConfig {
  SceneConfig scene;
  EnvConfig env;
  CameraModel camera;
  SupervisorConfig supervisor;
  DepthErrorModel depth_error;
  HarnessOptions harness;
  TrainRun train;

  TaskSetConfig task_config() const;
  void validate() const;
};

// "default" (or empty) yields the built-in defaults; otherwise parses the
// JSON file. Unknown keys anywhere are hard errors.
HarnessConfig load_config(const std::string& path_or_default);
HarnessConfig parse_config_text(const std::string& json_text);

struct TrialRow {
  int trial_id = 0;
  ControllerId controller = ControllerId::Hybrid;
  int target_id = 0;
  std::uint64_t seed = 0;
  bool success = false;
  std::optional<double> pivot_offset_m;
  std::optional<double> remnant_len_m;
  double max_force_n = 0.0;
  int steps = 0;
  std::string terminal;
};

struct ControllerSummary {
  ControllerId controller;
  int trials = 0;
  int accuracy_pct = 0;  // round(100 * successes / trials)
  double pivot_mean_cm = 0, pivot_std_cm = 0;
  double remnant_mean_cm = 0, remnant_std_cm = 0;
  double force_mean_n = 0, force_std_n = 0;
  int pivot_count = 0, remnant_count = 0;
};

struct SummaryTable {
  std::vector<ControllerSummary> rows;
};

struct TrialsResult {
  std::vector<TrialRow> rows;
  SummaryTable summary;
};

// Runs every (target, trial, controller) episode. The per-trial estimate
// draw is shared by all controllers except OL-, which maps the same
// measurement through a perturbed camera pose. Set policy when the hybrid
// controller is enabled.
TrialsResult run_trials(const HarnessConfig& cfg, PolicyNet<float>* policy);

SummaryTable summarize(const std::vector<TrialRow>& rows);

std::string trials_csv(const std::vector<TrialRow>& rows);
std::string summary_text(const SummaryTable& table);

// Camera pose for a home view: positioned `distance` away from the target
// along the view direction, looking at the target (OpenCV axes).
Pose home_view_pose(const HomeView& view, const Vec3& target_point);

}  // namespace prunesim
