#include "prunesim/admittance.hpp"

#include <algorithm>
#include <cmath>

#include "prunesim/errors.hpp"

namespace prunesim {

void AdmittanceGains::validate() const {
  for (int i = 0; i < 6; ++i) {
    const double sel = selection[i];
    if (sel != 0.0 && sel != 1.0) {
      throw ConfigError("admittance: selection diagonal must be 0/1");
    }
    if (sel == 1.0) {
      if (virtual_mass[i] <= 0.0) {
        throw ConfigError("admittance: selected axes need positive virtual mass");
      }
      if (damping[i] * inner_dt >= virtual_mass[i]) {
        throw ConfigError("admittance: B*dt must stay below M (discrete stability)");
      }
    }
  }
  if (force_threshold < 0.0 || inner_dt <= 0.0) {
    throw ConfigError("admittance: threshold/inner_dt out of range");
  }
}

Wrench WrenchFilter::push(const Wrench& raw) {
  if (count_ < kWindow) {
    ++count_;
  } else {
    sum_ -= buffer_[next_];
  }
  buffer_[next_] = raw;
  sum_ += raw;
  next_ = (next_ + 1) % kWindow;
  mean_ = sum_ / count_;
  return mean_;
}

double deadzone(double error, double threshold) {
  const double mag = std::abs(error) - threshold;
  if (mag <= 0.0) return 0.0;
  return error > 0.0 ? mag : -mag;
}

Wrench deadzone(const Wrench& error, double threshold) {
  Wrench out;
  for (int i = 0; i < 6; ++i) out[i] = deadzone(error[i], threshold);
  return out;
}

Wrench select(const Vec6& selection, const Wrench& w) {
  return selection.cwiseProduct(w);
}

AdmittanceStep admittance_step(const AdmittanceGains& gains, const Wrench& filtered,
                               const Vec6& twist) {
  const Wrench error =
      gains.desired_wrench - select(gains.selection, filtered);
  const Wrench driven = deadzone(error, gains.force_threshold);

  AdmittanceStep out;
  for (int i = 0; i < 6; ++i) {
    if (gains.selection[i] == 1.0) {
      out.accel[i] = (driven[i] - gains.damping[i] * twist[i]) / gains.virtual_mass[i];
      out.new_twist[i] = twist[i] + out.accel[i] * gains.inner_dt;
    } else {
      out.accel[i] = 0.0;
      out.new_twist[i] = 0.0;
    }
  }
  return out;
}

TerminationWindow::TerminationWindow(double span_s, double inner_dt,
                                     double torque_tol, double motion_tol)
    : capacity_(static_cast<std::size_t>(std::lround(span_s / inner_dt)) + 1),
      torque_tol_(torque_tol),
      motion_tol_(motion_tol) {}

void TerminationWindow::push(double tau_x, double tool_y, double tool_z) {
  history_.push_back({tau_x, tool_y, tool_z});
  while (history_.size() > capacity_) history_.pop_front();
}

bool TerminationWindow::full() const { return history_.size() == capacity_; }

bool TerminationWindow::check(double tau_des_x) const {
  if (!full()) return false;
  if (std::abs(history_.back()[0] - tau_des_x) > torque_tol_) return false;
  double y_min = history_.front()[1], y_max = y_min;
  double z_min = history_.front()[2], z_max = z_min;
  for (const auto& s : history_) {
    y_min = std::min(y_min, s[1]);
    y_max = std::max(y_max, s[1]);
    z_min = std::min(z_min, s[2]);
    z_max = std::max(z_max, s[2]);
  }
  return (y_max - y_min) < motion_tol_ && (z_max - z_min) < motion_tol_;
}

}  // namespace prunesim
