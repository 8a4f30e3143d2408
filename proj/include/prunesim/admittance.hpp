#pragma once

#include <array>
#include <deque>

#include "prunesim/math.hpp"

namespace prunesim {

// Wrench ordering, tool frame: [tau_x, tau_y, tau_z, f_x, f_y, f_z].
// Torques in N*m, forces in N. This is the wrench the tool exerts on the
// environment, so pressing the branch forward reads as positive f_z.
using Wrench = Vec6;

inline Vec3 wrench_force(const Wrench& w) { return w.tail<3>(); }
inline Vec3 wrench_torque(const Wrench& w) { return w.head<3>(); }

struct AdmittanceGains {
  Vec6 virtual_mass = (Vec6() << 0, 0, 0, 0, 100, 10).finished();
  Vec6 damping = (Vec6() << 0, 0, 0, 0, 400, 250).finished();
  Vec6 selection = (Vec6() << 0, 0, 0, 0, 1, 1).finished();
  // +2 N pressed forward on the branch; see the frame note on Wrench.
  Wrench desired_wrench = (Vec6() << 0, 0, 0, 0, 0, 2).finished();
  double force_threshold = 0.2;  // deadzone F_th, N
  double inner_dt = 0.002;       // 500 Hz inner loop

  void validate() const;
};

// 51-value moving average; averages over the samples received so far until
// the window fills.
class WrenchFilter {
 public:
  static constexpr int kWindow = 51;

  Wrench push(const Wrench& raw);
  const Wrench& value() const { return mean_; }
  int fill_count() const { return count_; }

 private:
  std::array<Wrench, kWindow> buffer_{};
  Wrench sum_ = Wrench::Zero();
  Wrench mean_ = Wrench::Zero();
  int next_ = 0;
  int count_ = 0;
};

// sgn(e) * max(|e| - threshold, 0)
double deadzone(double error, double threshold);
Wrench deadzone(const Wrench& error, double threshold);

// Component-wise selection projection.
Wrench select(const Vec6& selection, const Wrench& w);

struct AdmittanceStep {
  Vec6 accel = Vec6::Zero();
  Vec6 new_twist = Vec6::Zero();
};

// One inner-loop tick: a_i = (dz(F_des_i - (Lambda F')_i) - B_i v_i) / M_i on
// selected axes; unselected axes are pinned to zero velocity.
AdmittanceStep admittance_step(const AdmittanceGains& gains, const Wrench& filtered,
                               const Vec6& twist);

// Rolling 1 s history of (sensed tau_x, tool y, tool z) at the inner rate.
class TerminationWindow {
 public:
  TerminationWindow(double span_s, double inner_dt, double torque_tol = 0.0025,
                    double motion_tol = 0.0005);

  void push(double tau_x, double tool_y, double tool_z);
  bool full() const;
  // True iff the window spans 1 s, |tau_x - tau_des| <= torque_tol on the
  // newest sample, and y/z each moved less than motion_tol over the window.
  bool check(double tau_des_x) const;

  double torque_tol() const { return torque_tol_; }
  double motion_tol() const { return motion_tol_; }

 private:
  std::size_t capacity_;
  double torque_tol_;
  double motion_tol_;
  std::deque<std::array<double, 3>> history_;
};

}  // namespace prunesim
