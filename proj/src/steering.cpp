#include "bikebot/steering.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "bikebot/errors.hpp"

namespace bikebot::steering {

namespace {

constexpr double kGolden = 0.6180339887498949;

// Maximise f on [lo, hi]: dense grid, then golden-section on the best bracket.
template <class F>
std::pair<double, double> maximize_1d(F&& f, double lo, double hi, int grid = 2000,
                                      double tol = 1e-10) {
  double best_x = lo, best_f = f(lo);
  const double step = (hi - lo) / grid;
  for (int i = 1; i <= grid; ++i) {
    const double x = lo + step * i;
    const double v = f(x);
    if (v > best_f) {
      best_f = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
  double c = b - kGolden * (b - a), d = a + kGolden * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGolden * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGolden * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  const double v = f(x);
  if (v > best_f) return {x, v};
  return {best_x, best_f};
}

// Lateral and longitudinal ground offset of one wheel's contact point from the
// projection of its wheel center, for increment delta about phi0.
struct ContactOffset {
  double lateral;
  double longitudinal;
};

ContactOffset contact_offset(double delta, double phi0, double phi_b, const BikebotParams& p) {
  const double r = contact_radius(phi0, 0.0, p) * std::cos(delta);
  const double phi_g0 = projected_steering_angle(phi0, phi_b, p.epsilon);
  const double k = projected_steering_rate(phi0, phi_b, p.epsilon);
  const double phi_g = phi_g0 + k * delta;
  return {r * std::cos(phi_g), r * std::sin(phi_g)};
}

}  // namespace

void SteeringLimits::validate() const {
  if (!(delta_max > 0 && delta_rate_max > 0)) {
    throw ConfigError("steering limits must be positive");
  }
}

double wheel_ground_angle(double phi, double phi_b, double epsilon) {
  return std::sin(phi) * std::sin(epsilon) - std::cos(phi) * std::cos(epsilon) * std::sin(phi_b);
}

double contact_radius(double phi, double phi_b, const BikebotParams& p) {
  return p.R * wheel_ground_angle(phi, phi_b, p.epsilon);
}

double projected_steering_angle(double phi, double phi_b, double epsilon) {
  const double cb = std::cos(phi_b);
  if (std::abs(cb) < 1e-12) {
    throw std::domain_error("projected steering angle undefined at |phi_b| = 90 deg");
  }
  // atan(cos(eps) tan(phi) / cos(phi_b)) on the branch continuous in phi.
  const double y = std::cos(epsilon) * std::sin(phi);
  const double x = cb * std::cos(phi);
  double phi_g = std::atan2(y, x);
  // Keep phi_g within pi of phi so the branch follows phi past +-90 deg.
  const double two_pi = 2.0 * 3.14159265358979323846;
  while (phi_g - phi > 0.5 * two_pi) phi_g -= two_pi;
  while (phi - phi_g > 0.5 * two_pi) phi_g += two_pi;
  return phi_g;
}

double projected_steering_rate(double phi, double phi_b, double epsilon) {
  const double c = std::cos(epsilon), cb = std::cos(phi_b);
  const double s = std::sin(phi), co = std::cos(phi);
  return c * cb / (c * c * s * s + cb * cb * co * co);
}

double balance_torque(double delta, double phi0, double phi_b, double mass, const BikebotParams& p) {
  warn_if_outside_quasi_static(phi_b);
  return mass * p.g * contact_offset(delta, phi0, phi_b, p).lateral;
}

double balance_torque_90(double delta, double mass, const BikebotParams& p) {
  return -mass * p.g * p.R * std::sin(p.epsilon) * std::cos(delta) *
         std::sin(delta / std::cos(p.epsilon));
}

double steering_sensitivity(double phi0, const BikebotParams& p) {
  const double c = std::cos(p.epsilon);
  const double s = std::sin(phi0), co = std::cos(phi0);
  const double r = std::abs(contact_radius(phi0, 0.0, p));
  // c^2 tan(1 + tan^2) / (c^2 tan^2 + 1)^{3/2}, rewritten without tan so that
  // phi0 = 90 deg evaluates to its limit 1/c.
  const double shape = c * c * std::abs(s) / std::pow(c * c * s * s + co * co, 1.5);
  return p.m_b * p.g * r * shape;
}

double torque_rate_h(double delta, double mass, const BikebotParams& p) {
  const double c = std::cos(p.epsilon);
  const double dg = delta / c;
  const double d = -std::sin(delta) * std::sin(dg) + std::cos(delta) * std::cos(dg) / c;
  return -mass * p.g * p.R * std::sin(p.epsilon) * d;
}

TorqueRateMax torque_rate_h_max(double delta_max, double mass, const BikebotParams& p) {
  const auto [x, v] = maximize_1d(
      [&](double d) { return std::abs(torque_rate_h(d, mass, p)); }, -delta_max, delta_max);
  return {v, x};
}

double one_wheel_torque(double delta, double phi_b, double mass, const BikebotParams& p,
                        double phi0) {
  warn_if_outside_quasi_static(phi_b);
  const ContactOffset front = contact_offset(delta, phi0, phi_b, p);
  const ContactOffset rear = contact_offset(0.0, phi0, phi_b, p);
  // Front contact C'_1 ahead of G_g, rear contact C_2 (mirrored steering) behind it.
  const double x1 = 0.5 * p.l + front.longitudinal, y1 = front.lateral;
  const double x2 = -0.5 * p.l - rear.longitudinal, y2 = rear.lateral;
  const double dx = x1 - x2, dy = y1 - y2;
  // Signed distance from G_g = (0, 0) to the line, positive on the +y side.
  const double dist = (dx * y2 - dy * x2) / std::hypot(dx, dy);
  return mass * p.g * dist;
}

TorquePeak max_balance_torque_90(double delta_range, double mass, const BikebotParams& p) {
  const auto [x, v] = maximize_1d(
      [&](double d) { return std::abs(balance_torque_90(d, mass, p)); }, 0.0, delta_range);
  return {v, x};
}

TorquePeak max_one_wheel_torque(double delta_range, double mass, const BikebotParams& p) {
  const auto [x, v] = maximize_1d(
      [&](double d) { return std::abs(one_wheel_torque(d, 0.0, mass, p)); }, 0.0, delta_range);
  return {v, x};
}

bool warn_if_outside_quasi_static(double phi_b) {
  static std::atomic<bool> warned{false};
  if (std::abs(phi_b) <= kQuasiStaticRollLimit) return false;
  if (!warned.exchange(true)) {
    std::cerr << "warning: |phi_b| > 15 deg, steering torque model outside its small-roll range\n";
  }
  return true;
}

}  // namespace bikebot::steering
