#include "bikebot/control.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "bikebot/bem.hpp"
#include "bikebot/dynamics.hpp"
#include "bikebot/errors.hpp"
#include "bikebot/sim.hpp"
#include "bikebot/units.hpp"

namespace bikebot::control {

void BalanceGains::validate() const {
  if (!(k_p > 0) || !(k_d > 0)) throw ConfigError("balance gains must be positive");
  if (overdamped()) {
    std::cerr << "warning: k_d^2 >= 4 k_p, roll loop is not underdamped\n";
  }
}

void ArmGains::validate(int n) const {
  if (K_p.size() != n) throw ConfigError("arm gains: K_p needs one entry per joint");
  if (n > 0 && !(K_p.minCoeff() > 0)) throw ConfigError("arm gains: K_p must be positive");
  if (!(kappa >= 0)) throw ConfigError("arm gains: kappa must be nonnegative");
  if (!(epsilon_b > 0)) throw ConfigError("arm gains: epsilon_b must be positive");
}

ArmGains default_arm_gains(int n) {
  ArmGains g;
  g.K_p = Vec::Constant(n, 2.0);
  return g;
}

Measurement exact_measurement(const Vec& q, const Vec& qdot) {
  return {q, qdot, q[0], qdot[0]};
}

BalanceDemand balance_control(const RobotModel& model, const Measurement& m,
                              const BezierSample& reference, const BalanceGains& gains,
                              const Vec* theta_acc) {
  const int n = model.num_links();
  BalanceDemand out;
  out.e_b = m.phi_b_measured - reference.q[0];
  out.e_b_rate = m.phi_b_rate_measured - reference.qdot[0];
  const Mat D = mass_matrix(model, m.q);
  const Vec h = bias_forces(model, m.q, m.qdot);  // C q' + G
  const double v = reference.qddot[0] - gains.k_p * out.e_b - gains.k_d * out.e_b_rate;
  out.tau_b = D(0, 0) * v + h[0];
  if (n > 0) {
    const Vec acc = theta_acc ? *theta_acc : Vec(reference.qddot.tail(n));
    out.tau_b += D.row(0).tail(n).dot(acc);
  }
  return out;
}

SteeringCommand torque_to_steering(const RobotModel& model, double tau,
                                   const steering::SteeringLimits& limits) {
  SteeringCommand c;
  if (const auto d = bem::steering_for_torque(model, tau, limits.delta_max)) {
    c.delta = *d;
    return c;
  }
  const double M = model.total_mass();
  const auto peak = steering::max_balance_torque_90(units::kPi / 2, M, model.bike);
  const double reach = std::min(limits.delta_max, peak.delta);
  // tau_b90 falls with delta, so positive demand maps to negative steering.
  c.delta = tau > 0 ? -reach : reach;
  c.saturated = true;
  return c;
}

ArmCommand arm_velocity_control(const RobotModel& model, const Measurement& m,
                                const BezierSample& reference, const ArmGains& gains,
                                double q_rate_max) {
  const int n = model.num_links();
  ArmCommand c;
  c.theta_rate = Vec::Zero(n);
  c.correction = Vec::Zero(n);
  if (n == 0) return c;
  const Vec e_theta = m.q.tail(n) - reference.q.tail(n);
  const double dg = gravity_torque_roll(model, reference.q) - gravity_torque_roll(model, m.q);
  constexpr double kDegScale = units::kPi / 180.0;
  c.correction = 2.0 * gains.kappa * kDegScale * kDegScale * dg *
                 gravity_gradient(model, m.q).tail(n).transpose();
  const double e_b = m.phi_b_measured - reference.q[0];
  c.correction_active = std::abs(e_b) > gains.epsilon_b;
  c.theta_rate = reference.qdot.tail(n) - gains.K_p.cwiseProduct(e_theta);
  if (c.correction_active) c.theta_rate += c.correction;
  for (int i = 0; i < n; ++i) {
    if (std::abs(c.theta_rate[i]) > q_rate_max) {
      c.theta_rate[i] = std::copysign(q_rate_max, c.theta_rate[i]);
      c.saturated = true;
    }
  }
  return c;
}

double fit_decay_rate(const std::vector<double>& t, const std::vector<double>& x, double floor) {
  std::vector<double> tt, ly;
  for (size_t i = 1; i + 1 < x.size(); ++i) {
    const double a = std::abs(x[i]);
    if (a > floor && a >= std::abs(x[i - 1]) && a > std::abs(x[i + 1])) {
      tt.push_back(t[i]);
      ly.push_back(std::log(a));
    }
  }
  // A monotone decay has no interior peak; fall back to every sample above the floor.
  if (tt.size() < 2) {
    tt.clear();
    ly.clear();
    for (size_t i = 0; i < x.size(); ++i) {
      if (std::abs(x[i]) > floor) {
        tt.push_back(t[i]);
        ly.push_back(std::log(std::abs(x[i])));
      }
    }
  }
  if (tt.size() < 2) return 0.0;
  const double n = static_cast<double>(tt.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (size_t i = 0; i < tt.size(); ++i) {
    st += tt[i];
    sy += ly[i];
    stt += tt[i] * tt[i];
    sty += tt[i] * ly[i];
  }
  const double den = n * stt - st * st;
  if (den == 0.0) return 0.0;
  return -(n * sty - st * sy) / den;
}

ErrorReport tracking_error_report(const RobotModel& model, const sim::SimLog& log,
                                  const ArmGains& gains) {
  if (log.size() == 0) throw std::invalid_argument("tracking_error_report: empty log");
  const int n = model.num_links();
  ErrorReport r;
  r.time = log.time;
  r.e_b = log.e_b;
  for (size_t k = 0; k < log.size(); ++k) {
    r.e_theta_norm.push_back(log.e_theta[k].norm());
    r.e_q_norm.push_back((log.q[k] - log.q_ref[k]).norm());
    r.e_xi_norm.push_back(pose_error_cm_deg(log.pose_ref[k], log.pose[k]).norm());
    r.l_theta = std::max(r.l_theta, log.correction_norm[k]);
    if (r.e_q_norm.back() > 1e-9) {
      r.pose_to_config_ratio = std::max(r.pose_to_config_ratio, r.e_xi_norm.back() / r.e_q_norm.back());
    }
  }
  r.e_b_decay_rate = fit_decay_rate(r.time, r.e_b, 1e-6);
  r.e_theta_decay_rate = fit_decay_rate(r.time, r.e_theta_norm, 1e-6);
  if (n > 0 && gains.K_p.size() == n) r.compact_bound = r.l_theta / gains.K_p.minCoeff();
  return r;
}

}  // namespace bikebot::control
