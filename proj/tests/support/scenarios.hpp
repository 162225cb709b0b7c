#pragma once

// Scenario builders shared by the unit tests and the acceptance binary.

#include <random>
#include <vector>

#include "bikebot/bem.hpp"
#include "bikebot/kinematics.hpp"
#include "bikebot/planner.hpp"
#include "bikebot/sim.hpp"
#include "bikebot/units.hpp"

namespace bikebot::testing {

/// Uniform configuration: roll within +-max_roll, joints within the model bounds.
inline Vec random_configuration(const RobotModel& model, std::mt19937_64& rng,
                                double max_roll = units::rad(20.0)) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec q(model.dof());
  q[0] = max_roll * u(rng);
  for (int i = 1; i < model.dof(); ++i) {
    const double lo = model.bounds.empty() ? -units::kPi : model.bounds.lower[i];
    const double hi = model.bounds.empty() ? units::kPi : model.bounds.upper[i];
    q[i] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * u(rng);
  }
  return q;
}

inline Vec random_velocity(int dof, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(dof);
  for (int i = 0; i < dof; ++i) v[i] = u(rng);
  return v;
}

/// Arm posture home + offsets (deg) at steering delta (deg), rolled onto E.
struct BemConfiguration {
  Vec q;
  double delta = 0.0;
  Pose pose;
};

inline BemConfiguration bem_configuration(const RobotModel& model, const std::vector<double>& offsets_deg,
                                          double delta_deg) {
  Vec theta = model.home;
  for (int i = 0; i < theta.size(); ++i) theta[i] += units::rad(offsets_deg[i]);
  const auto eq = bem::solve_equilibrium_roll(model, theta, units::rad(delta_deg));
  if (!eq.found) throw std::runtime_error("scenario configuration has no equilibrium roll");
  return {eq.point.q, eq.point.delta, forward_kinematics(model, eq.point.q).pose};
}

/// Four poses on E with distinct arm postures and steering: a symmetric start,
/// an elbow raise, a raise with wrist pitch, and a base yaw with wrist roll.
inline std::vector<BemConfiguration> mission_configurations(const RobotModel& model) {
  return {bem_configuration(model, {0, 0, 0, 0, 0, 0}, 0.0),
          bem_configuration(model, {0, -15, 20, 0, 0, 0}, 3.0),
          bem_configuration(model, {0, -25, 30, 0, 10, 0}, -1.0),
          bem_configuration(model, {-15, 0, 10, 0, 0, 10}, 6.0)};
}

inline std::vector<Pose> mission_poses(const RobotModel& model) {
  std::vector<Pose> out;
  for (const auto& c : mission_configurations(model)) out.push_back(c.pose);
  return out;
}

/// Platform without the arm, steering limits wide enough for a 4 deg recovery.
struct RecoverySetup {
  RobotModel model;
  sim::SimConfig config;
  PlanResult plan;
};

inline RecoverySetup roll_recovery(double initial_roll_deg, double duration) {
  RecoverySetup s{platform_only_model(), {}, {}};
  s.config.steering.delta_max = units::rad(50.0);
  s.config.steering.delta_rate_max = units::rad(200.0);
  s.config.initial_q = Vec::Constant(1, units::rad(initial_roll_deg));
  s.plan = sim::hold_plan(Vec::Zero(1), duration);
  return s;
}

}  // namespace bikebot::testing
