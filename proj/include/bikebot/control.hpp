#pragma once

#include "bikebot/bezier.hpp"
#include "bikebot/model.hpp"
#include "bikebot/steering.hpp"

namespace bikebot::sim {
struct SimLog;
}

namespace bikebot::control {

struct BalanceGains {
  double k_p = 8.5;
  double k_d = 2.0;

  void validate() const;
  /// k_d^2 >= 4 k_p; the exponential-envelope analysis assumes the opposite.
  [[nodiscard]] bool overdamped() const { return k_d * k_d >= 4.0 * k_p; }
};

struct ArmGains {
  Vec K_p;              ///< n diagonal entries (1/s)
  /// Correction gain on a degree scale: deg/s per (N m)(N m/deg). The
  /// correction in rad/s is 2 kappa (pi/180)^2 dG dG_b/dTheta with dG_b/dTheta per rad.
  double kappa = 5.0;
  double epsilon_b = 0.00698131700797732;  ///< rad (0.4 deg)

  void validate(int n) const;
};

/// kappa and epsilon_b from the prototype; K_p = 2/s on every joint.
ArmGains default_arm_gains(int n);

/// Measured state seen by the controllers. `phi_b_measured` and
/// `phi_b_rate_measured` may differ from q when a sensor model is active.
struct Measurement {
  Vec q;
  Vec qdot;
  double phi_b_measured = 0.0;
  double phi_b_rate_measured = 0.0;
};

/// Measurement that reports the true state.
Measurement exact_measurement(const Vec& q, const Vec& qdot);

struct BalanceDemand {
  double tau_b = 0.0;  ///< N m
  double e_b = 0.0;    ///< phi_b - phi_b* (rad)
  double e_b_rate = 0.0;
};

/// Feedback-linearising roll law
///   tau_b = D_bb (phi_b*'' - k_p e_b - k_d e_b') + D_btheta Theta'' + C_b q' + G_b.
/// Theta'' is the reference acceleration unless `theta_acc` is given.
BalanceDemand balance_control(const RobotModel& model, const Measurement& m,
                              const BezierSample& reference, const BalanceGains& gains,
                              const Vec* theta_acc = nullptr);

struct SteeringCommand {
  double delta = 0.0;  ///< rad
  bool saturated = false;
};

/// Inverts tau_b90(delta, M) = tau on the branch through zero. Demands beyond
/// the branch (or beyond delta_max) saturate at +-min(delta_max, branch peak).
SteeringCommand torque_to_steering(const RobotModel& model, double tau,
                                   const steering::SteeringLimits& limits);

struct ArmCommand {
  Vec theta_rate;          ///< rad/s, saturated at q_rate_max
  Vec correction;          ///< kappa-scaled (G_b(q*) - G_b(q)) dG_b/dTheta^T (rad/s), before gating
  bool correction_active = false;
  bool saturated = false;
};

/// Theta'_cmd = Theta*' - K_p e_Theta + I_Theta * correction, I_Theta = 1 iff |e_b| > epsilon_b.
ArmCommand arm_velocity_control(const RobotModel& model, const Measurement& m,
                                const BezierSample& reference, const ArmGains& gains,
                                double q_rate_max);

/// Per-tick command bundle recorded by the simulator.
struct ControlCommand {
  double delta_cmd = 0.0;
  Vec theta_rate_cmd;
  double tau_b_cmd = 0.0;
  bool steering_saturated = false;
  bool correction_active = false;
  bool rate_saturated = false;
};

struct ErrorReport {
  std::vector<double> time;
  std::vector<double> e_b;          ///< rad
  std::vector<double> e_theta_norm;  ///< rad
  std::vector<double> e_xi_norm;     ///< norm of the (cm, deg) pose error against the reference
  std::vector<double> e_q_norm;      ///< rad
  double e_b_decay_rate = 0.0;      ///< fitted on the peaks of |e_b| (1/s), 0 when undetermined
  double e_theta_decay_rate = 0.0;
  double pose_to_config_ratio = 0.0;  ///< max e_xi / e_q over samples with e_q > 0
  double l_theta = 0.0;             ///< sup of the gated correction norm
  double compact_bound = 0.0;       ///< l_theta / min K_p
};

/// Throws std::invalid_argument on an empty log.
ErrorReport tracking_error_report(const RobotModel& model, const sim::SimLog& log,
                                  const ArmGains& gains);

/// Least-squares slope of log(peak |x|) against time over the local maxima of
/// |x| above `floor`; returns the decay rate (positive when decaying).
double fit_decay_rate(const std::vector<double>& t, const std::vector<double>& x, double floor);

}  // namespace bikebot::control
