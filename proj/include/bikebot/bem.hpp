#pragma once

#include <optional>
#include <string>

#include "bikebot/model.hpp"
#include "bikebot/steering.hpp"

namespace bikebot {
struct PlannerWeights;
struct MotionLimits;
}  // namespace bikebot

namespace bikebot::bem {

/// Residual tolerance every returned equilibrium satisfies (N m).
inline constexpr double kResidualTolerance = 1e-8;
/// Roll bracket for equilibrium searches.
inline constexpr double kRollGuard = 0.349065850398866;  // 20 deg

struct BemPoint {
  Vec q;               ///< [phi_b, theta]
  double delta = 0.0;  ///< steering increment realising tau_b (rad)
  double tau_b = 0.0;  ///< N m
  double residual = 0.0;
};

enum class Strategy { OneWheel, TwoWheel, TwoWheelArm };
std::string to_string(Strategy s);

struct CapabilityEstimate {
  Strategy strategy = Strategy::TwoWheel;
  double phi_b_max = 0.0;        ///< rad, symmetric (min over both roll directions)
  double achieving_delta = 0.0;  ///< rad
  double tau_b_max = 0.0;        ///< N m
  Vec achieving_theta;           ///< arm posture at phi_b_max (arm strategy; home otherwise)
};

struct CapabilityOptions {
  double delta_range = 0.872664625997165;  ///< 50 deg
  double phi_guard = kRollGuard;
  double phi_tolerance = 1e-7;  ///< rad, bisection stop
  bool full_joint_search = false;  ///< search all joints instead of 1-3
  int coordinate_sweeps = 6;
  int coordinate_grid = 72;
};

/// G_b(q) - tau_b90(delta, M).
double bem_residual(const RobotModel& model, const Vec& q, double delta);

/// Equilibrium roll for a fixed arm posture and steering increment.
struct EquilibriumResult {
  bool found = false;
  BemPoint point;
};
EquilibriumResult solve_equilibrium_roll(const RobotModel& model, const Vec& theta, double delta,
                                         double phi_guard = kRollGuard);

/// Steering increment within |delta| <= delta_limit with tau_b90(delta, M) = tau,
/// on the branch through zero. Empty when |tau| exceeds the branch maximum.
std::optional<double> steering_for_torque(const RobotModel& model, double tau, double delta_limit);

/// Builds a BemPoint for q by solving for delta; empty when q is outside E.
std::optional<BemPoint> equilibrium_point(const RobotModel& model, const Vec& q,
                                          double delta_limit);

CapabilityEstimate max_roll_capability(const RobotModel& model, Strategy strategy,
                                       const CapabilityOptions& opt = {});

struct VelocityBound {
  bool satisfied = false;
  double lhs = 0.0;     ///< |J_G qdot|
  double rhs = 0.0;     ///< h_max delta_rate_max
  double margin = 0.0;  ///< rhs - lhs
};
VelocityBound velocity_bound_check(const RobotModel& model, const Vec& q, const Vec& qdot,
                                   const steering::SteeringLimits& limits);

struct WorkspaceResult {
  bool contained = false;
  Vec q;                 ///< closest configuration found on E
  Pose attained;         ///< its end-effector pose
  double pose_residual = 0.0;  ///< norm of the (cm, deg) pose error
};
/// BPIK membership test; `local_roll` fixes phi_b.
WorkspaceResult workspace_contains(const RobotModel& model, const Pose& pose,
                                   const PlannerWeights& weights, const MotionLimits& limits,
                                   std::optional<double> local_roll = std::nullopt,
                                   std::optional<Vec> initial_guess = std::nullopt);

}  // namespace bikebot::bem
