#pragma once

#include <optional>

#include "prunesim/admittance.hpp"
#include "prunesim/camera.hpp"
#include "prunesim/scene.hpp"

namespace prunesim {

// Compliant side branch reduced to a disc in the tool yz-plane. Positions are
// 2D (y, z) in the interaction frame: the tool frame frozen at contact onset
// (the tool never rotates during interaction, so the axes stay aligned).
struct BranchState {
  Vec2 rest_position = Vec2::Zero();
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double radius = 0.003;
  double stiffness = 200.0;  // k_b, N/m
  double damping = 2.0;      // c_b, N*s/m
  double mass = 0.05;        // virtual branch mass, kg
};

struct PlantConfig {
  double branch_stiffness = 200.0;
  double branch_damping = 2.0;
  double branch_mass = 0.05;
  double branch_radius = 0.003;  // standalone default; runs take the scene radius
  double k_contact = 2000.0;     // penalty stiffness, N/m
  double sensor_noise_std = 0.05;
  double sensor_rate = 500.0;
};

struct SensorModel {
  double rate = 500.0;
  double noise_std = 0.05;
  std::uint64_t seed = 0;
};

// Penalty contact between the branch disc and the blade edge polylines.
// `branch_in_tool` is the disc center in current tool yz coordinates. The
// returned wrench is what the tool exerts on the branch (sensor convention),
// expressed at the sensor origin (the pivot). `force_on_branch` receives the
// reaction the branch feels, same (y, z) coordinates.
Wrench contact_wrench(const CutterProfile& profile, const Vec2& branch_in_tool,
                      double branch_radius, double k_contact,
                      Vec2* force_on_branch = nullptr);

// Semi-implicit Euler step of m x'' = F - k (x - rest) - c x'.
BranchState branch_dynamics_step(const BranchState& branch, const Vec2& applied_force,
                                 double dt);

class NoisySensor {
 public:
  explicit NoisySensor(const SensorModel& model)
      : noise_std_(model.noise_std), rng_(derive_seed(model.seed, {0xf7ceULL})) {}

  Wrench sample(const Wrench& true_wrench);

 private:
  double noise_std_;
  RandomStream rng_;
};

// Rigid penalty contact between the cutter body and the scene (leaders,
// non-target branches, wires, frame). Probe points sampled over the cutter
// body boxes are tested against scene primitives; the blade-vs-target-branch
// pair is excluded because contact_wrench models it. Returns the wrench the
// tool exerts on the environment, tool frame, at the pivot.
class RigidContactModel {
 public:
  RigidContactModel(const SceneGraph& scene, double k_contact,
                    int exclude_spindle, int exclude_branch);

  Wrench wrench(const Pose& tool_pose) const;

 private:
  struct Prim {
    Capsule capsule;
    bool is_box = false;
    Aabb box;
    Vec3 bound_center;
    double bound_radius = 0.0;
  };
  std::vector<Prim> prims_;
  std::vector<Vec3> probes_;  // tool frame
  double k_contact_;
  double probe_reach_ = 0.0;
};

}  // namespace prunesim
