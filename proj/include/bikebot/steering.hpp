#pragma once

#include "bikebot/model.hpp"

namespace bikebot::steering {

/// Symmetric two-wheel steering state: phi_front = phi0 + delta = -phi_rear.
struct SteeringState {
  double phi0 = 0.0;
  double delta = 0.0;
  bool symmetric = true;

  [[nodiscard]] double front() const { return phi0 + delta; }
  [[nodiscard]] double rear() const { return -(phi0 + delta); }
};

struct SteeringLimits {
  double delta_max = 0.261799387799830;       ///< rad (15 deg)
  double delta_rate_max = 0.349065850398866;  ///< rad/s (20 deg/s)

  void validate() const;
};

/// Roll magnitude beyond which the small-roll torque model degrades.
inline constexpr double kQuasiStaticRollLimit = 0.261799387799830;  // 15 deg

/// cos(gamma) of the angle between wheel plane and ground.
double wheel_ground_angle(double phi, double phi_b, double epsilon);

/// Ground radius r = R cos(gamma) of the contact-point arc.
double contact_radius(double phi, double phi_b, const BikebotParams& p);

/// Projected steering angle phi_g, continuous through phi = 90 deg.
/// Throws std::domain_error when |phi_b| = 90 deg.
double projected_steering_angle(double phi, double phi_b, double epsilon);

/// d(phi_g)/d(phi), closed form.
double projected_steering_rate(double phi, double phi_b, double epsilon);

/// Steering-induced balance torque for initial angle phi0 and increment delta:
/// tau_b = m g r_phi0 cos(delta) cos(phi_g0 + k delta), with r_phi0 taken at zero
/// roll, phi_g0 the projected initial angle and k = d(phi_g)/d(phi) at phi0.
/// At phi0 = 90 deg this is the closed form of balance_torque_90. Positive
/// torque rolls the platform toward positive phi_b.
double balance_torque(double delta, double phi0, double phi_b, double mass, const BikebotParams& p);

/// tau_b90 = -m g R sin(eps) cos(delta) sin(delta / cos(eps)).
double balance_torque_90(double delta, double mass, const BikebotParams& p);

/// |d tau_b / d delta| at delta = 0, phi_b = 0 (N m / rad), platform mass.
double steering_sensitivity(double phi0, const BikebotParams& p);
inline double per_degree(double per_radian) { return per_radian * 0.017453292519943295; }

/// h(delta) = d tau_b90 / d delta for mass `mass`.
double torque_rate_h(double delta, double mass, const BikebotParams& p);

/// sup |h| over |delta| <= delta_max, dense grid then golden-section refinement.
struct TorqueRateMax {
  double value = 0.0;
  double at_delta = 0.0;
};
TorqueRateMax torque_rate_h_max(double delta_max, double mass, const BikebotParams& p);

/// Balance torque with only the front wheel steered (rear contact fixed),
/// from the contact-point construction with G at midspan. phi0 is the
/// initial steering of both wheels.
double one_wheel_torque(double delta, double phi_b, double mass, const BikebotParams& p,
                        double phi0 = 1.5707963267948966);

/// Largest |tau_b90| over |delta| <= delta_range and the delta attaining it.
struct TorquePeak {
  double torque = 0.0;
  double delta = 0.0;
};
TorquePeak max_balance_torque_90(double delta_range, double mass, const BikebotParams& p);
TorquePeak max_one_wheel_torque(double delta_range, double mass, const BikebotParams& p);

/// True (and emits a warning once per process) when |phi_b| exceeds the quasi-static range.
bool warn_if_outside_quasi_static(double phi_b);

}  // namespace bikebot::steering
