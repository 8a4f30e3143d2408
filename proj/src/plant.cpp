#include "prunesim/plant.hpp"

#include <cmath>

namespace prunesim {

Wrench contact_wrench(const CutterProfile& profile, const Vec2& branch_in_tool,
                      double branch_radius, double k_contact,
                      Vec2* force_on_branch) {
  Wrench total = Wrench::Zero();
  Vec2 branch_force = Vec2::Zero();

  for (const auto& chain : profile.blade_edges) {
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
      const Vec2 closest =
          closest_point_on_segment2(branch_in_tool, chain[i], chain[i + 1]);
      const Vec2 delta = branch_in_tool - closest;
      const double dist = delta.norm();
      const double penetration = branch_radius - dist;
      if (penetration <= 0.0 || dist < 1e-12) continue;

      const Vec2 n = delta / dist;  // edge -> disc center
      const Vec2 f = k_contact * penetration * n;  // on the branch
      branch_force += f;
      // lever arm from the pivot (sensor origin) to the contact point
      total[3 + 1] += f.x();  // f_y
      total[3 + 2] += f.y();  // f_z
      total[0] += closest.x() * f.y() - closest.y() * f.x();  // tau_x = r x f
    }
  }
  if (force_on_branch != nullptr) *force_on_branch = branch_force;
  return total;
}

BranchState branch_dynamics_step(const BranchState& branch, const Vec2& applied_force,
                                 double dt) {
  BranchState next = branch;
  const Vec2 spring = -branch.stiffness * (branch.position - branch.rest_position);
  const Vec2 damper = -branch.damping * branch.velocity;
  const Vec2 accel = (applied_force + spring + damper) / branch.mass;
  next.velocity = branch.velocity + dt * accel;
  next.position = branch.position + dt * next.velocity;
  return next;
}

Wrench NoisySensor::sample(const Wrench& true_wrench) {
  Wrench noisy = true_wrench;
  if (noise_std_ > 0.0) {
    for (int i = 0; i < 6; ++i) noisy[i] += noise_std_ * rng_.normal();
  }
  return noisy;
}

namespace {

std::vector<Vec3> surface_probes(const Vec3& half, double spacing) {
  std::vector<Vec3> pts;
  const auto steps = [&](double h) {
    return std::max(1, static_cast<int>(std::ceil(2.0 * h / spacing)));
  };
  const int nx = steps(half.x()), ny = steps(half.y()), nz = steps(half.z());
  const auto lerp = [](double h, int i, int n) { return -h + 2.0 * h * i / n; };
  for (int ix = 0; ix <= nx; ++ix) {
    for (int iy = 0; iy <= ny; ++iy) {
      for (int iz = 0; iz <= nz; ++iz) {
        if (ix != 0 && ix != nx && iy != 0 && iy != ny && iz != 0 && iz != nz)
          continue;  // surface only
        pts.emplace_back(lerp(half.x(), ix, nx), lerp(half.y(), iy, ny),
                         lerp(half.z(), iz, nz));
      }
    }
  }
  return pts;
}

}  // namespace

RigidContactModel::RigidContactModel(const SceneGraph& scene, double k_contact,
                                     int exclude_spindle, int exclude_branch)
    : k_contact_(k_contact) {
  const auto add_capsule = [&](const Capsule& c) {
    Prim p;
    p.capsule = c;
    p.bound_center = 0.5 * (c.a + c.b);
    p.bound_radius = 0.5 * (c.b - c.a).norm() + c.radius;
    prims_.push_back(p);
  };
  for (const Capsule& w : scene.wires) add_capsule(w);
  for (int s = 0; s < static_cast<int>(scene.spindles.size()); ++s) {
    const TreeSpindle& sp = scene.spindles[s];
    for (const Capsule& seg : sp.leader) add_capsule(seg);
    for (int b = 0; b < static_cast<int>(sp.side_branches.size()); ++b) {
      if (s == exclude_spindle && b == exclude_branch) continue;
      for (const Capsule& seg : sp.side_branches[b]) add_capsule(seg);
    }
  }
  for (const Aabb& box : scene.frame_boxes) {
    Prim p;
    p.is_box = true;
    p.box = box;
    p.bound_center = box.center();
    p.bound_radius = box.half().norm();
    prims_.push_back(p);
  }

  constexpr double kProbeSpacing = 0.008;
  for (const auto& [pose, half] : cutter_body_boxes(scene.cutter)) {
    for (const Vec3& local : surface_probes(half, kProbeSpacing)) {
      const Vec3 p = pose * local;
      probes_.push_back(p);
      probe_reach_ = std::max(probe_reach_, p.norm());
    }
  }
}

Wrench RigidContactModel::wrench(const Pose& tool_pose) const {
  const Vec3 origin = tool_pose.translation();
  const Mat3& rot = tool_pose.linear();
  Vec3 f_world = Vec3::Zero();
  Vec3 tau_world = Vec3::Zero();
  bool any = false;

  for (const Prim& prim : prims_) {
    const double margin = probe_reach_ + prim.bound_radius;
    if ((prim.bound_center - origin).squaredNorm() > margin * margin) continue;
    for (const Vec3& local : probes_) {
      const Vec3 p = origin + rot * local;
      Vec3 outward = Vec3::Zero();
      double penetration = 0.0;
      if (prim.is_box) {
        // probe points contact a box only from inside it
        if ((p.array() < prim.box.min.array()).any() ||
            (p.array() > prim.box.max.array()).any()) {
          continue;
        }
        int axis = 0;
        double best = std::numeric_limits<double>::infinity();
        double sign = 1.0;
        for (int i = 0; i < 3; ++i) {
          const double lo = p[i] - prim.box.min[i];
          const double hi = prim.box.max[i] - p[i];
          if (lo < best) { best = lo; axis = i; sign = -1.0; }
          if (hi < best) { best = hi; axis = i; sign = 1.0; }
        }
        outward[axis] = sign;
        penetration = best;
      } else {
        const Vec3 q = closest_point_on_segment(p, prim.capsule.a, prim.capsule.b);
        const Vec3 d = p - q;
        const double dist = d.norm();
        penetration = prim.capsule.radius - dist;
        if (penetration <= 0.0 || dist < 1e-12) continue;
        outward = d / dist;  // tree surface normal toward the probe
      }
      const Vec3 f = k_contact_ * penetration * (-outward);  // on the environment
      f_world += f;
      tau_world += (p - origin).cross(f);
      any = true;
    }
  }

  Wrench w = Wrench::Zero();
  if (any) {
    w.head<3>() = rot.transpose() * tau_world;
    w.tail<3>() = rot.transpose() * f_world;
  }
  return w;
}

}  // namespace prunesim
