#pragma once

#include <cmath>
#include <numbers>

namespace bikebot::units {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg(double radians) { return radians * 180.0 / kPi; }
constexpr double rad(double degrees) { return degrees * kPi / 180.0; }
constexpr double cm(double metres) { return metres * 100.0; }
constexpr double m_from_cm(double centimetres) { return centimetres / 100.0; }

/// Wrap to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

}  // namespace bikebot::units
