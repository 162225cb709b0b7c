#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bikebot/bem.hpp"
#include "bikebot/bezier.hpp"
#include "bikebot/model.hpp"
#include "bikebot/optim.hpp"
#include "bikebot/steering.hpp"

namespace bikebot {

struct PlannerWeights {
  double lambda1 = 10.0;
  double lambda2 = 1.0;
  double lambda3 = 5.0;
  double lambda4 = 1.5;
  Mat P;   ///< (n+1) x (n+1), SPD
  Vec W1;  ///< (n+1) diagonal
  Vec W2;  ///< (n+1) diagonal
  double epsilon_pose = 0.1;  ///< on the (cm, deg) pose error norm
  bool w2_padded = false;     ///< true when W2 was padded from n to n+1 entries

  void validate(int dof) const;
};

/// Prototype defaults sized for `dof`; W1 and W2 are truncated or padded with ones.
PlannerWeights default_weights(int dof);

struct MotionLimits {
  double q_rate_max = 0.628318530717959;  ///< rad/s (36 deg/s)
  double q_acc_max = 2.094395102393195;   ///< rad/s^2 (120 deg/s^2)
  Vec tau_theta_max;                      ///< n entries, N m
  steering::SteeringLimits steering;
  double tau_b_max = 0.0;  ///< N m

  void validate(int n) const;
};

/// Prototype limits; tau_b_max is the peak |tau_b90| over |delta| <= delta_max with mass M.
MotionLimits default_limits(const RobotModel& model);
double balance_torque_limit(const RobotModel& model, const steering::SteeringLimits& s);

struct PlannerOptions {
  int degree = 7;
  int samples = 50;
  int restarts = 8;                          ///< total starts including the nominal one
  double restart_sigma = 0.0872664625997165;  ///< rad (5 deg)
  std::uint64_t seed = 0;
  optim::SqpOptions sqp;
  bool enforce_balance = true;  ///< false ablates lambda4|G_b| <= tau_b^max and the J_G rate bound
  int audit_factor = 10;
};

struct BpikResult {
  Vec q;
  double delta = 0.0;          ///< steering realising G_b(q) on E (rad)
  double gravity_torque = 0.0;  ///< G_b(q)
  Pose attained;
  double pose_residual = 0.0;  ///< norm of the (cm, deg) error
  double cost = 0.0;
  bool reached = false;        ///< pose_residual < epsilon_pose
  bool on_manifold = false;    ///< delta exists within the steering limit
  int starts_tried = 0;
  int iterations = 0;
};

/// Balance-prioritised IK. `prev_q`/`prev_gb` are q*_{k-1} and G_b(q*_{k-1});
/// `local_roll` pins phi_b. `extra_starts` are tried in addition to the
/// seeded perturbations of prev_q. Throws SolverFailure when no start yields
/// a feasible point.
BpikResult bpik(const RobotModel& model, const Pose& target, const Vec& prev_q, double prev_gb,
                const PlannerWeights& weights, const MotionLimits& limits,
                const PlannerOptions& options = {}, std::optional<double> local_roll = std::nullopt,
                const std::vector<Vec>& extra_starts = {});

/// Per-constraint worst values over a sample grid. Positive means violated.
struct ConstraintReport {
  double rate_bound = 0.0;     ///< max(|J_G qdot| - h_max delta_rate_max)
  double balance = 0.0;        ///< max(lambda4 |G_b| - tau_b_max)
  double joint_torque = 0.0;   ///< max(|tau_theta_i| - tau_theta_max_i)
  double box = 0.0;
  double velocity = 0.0;
  double acceleration = 0.0;
  [[nodiscard]] double worst() const;
};

struct CostBreakdown {
  double tracking = 0.0;  ///< integral of e'W1 e
  double velocity = 0.0;  ///< integral of qdot'W2 qdot
  double balance = 0.0;   ///< integral of (G_b(q) - G_b(q_start))^2
  [[nodiscard]] double total() const { return tracking + velocity + balance; }
};

struct SegmentResult {
  BezierTrajectory trajectory;
  CostBreakdown cost;
  ConstraintReport at_samples;
  ConstraintReport audit;  ///< on the audit_factor-times finer grid
  bool feasible = false;
  int iterations = 0;
  int starts_tried = 0;
  double wall_time = 0.0;  ///< s
};

struct BoundaryState {
  Vec qdot;
  Vec qddot;
};

/// Bezier segment between two configurations on E. Boundary q, qdot, qddot are
/// pinned exactly (rest by default). Throws InfeasibleSegment when the
/// duration cannot cover the motion under the rate bounds, SolverFailure when
/// no start reaches feasibility.
SegmentResult plan_segment(const RobotModel& model, const Vec& q_start, const Vec& q_end, double t0,
                           double tf, const PlannerWeights& weights, const MotionLimits& limits,
                           const PlannerOptions& options = {},
                           const std::optional<BoundaryState>& start_state = std::nullopt,
                           const std::optional<BoundaryState>& end_state = std::nullopt);

/// Cost and constraints of a given trajectory on an N_s-point grid.
CostBreakdown segment_cost(const RobotModel& model, const BezierTrajectory& traj,
                           const Vec& q_reference, const PlannerWeights& weights, int samples);
ConstraintReport segment_constraints(const RobotModel& model, const BezierTrajectory& traj,
                                     const PlannerWeights& weights, const MotionLimits& limits,
                                     int samples, bool enforce_balance = true);

struct MissionTiming {
  double hold = 15.0;        ///< s at each pose
  double transition = 20.0;  ///< s per segment
};

struct PoseSolve {
  Vec q;
  Pose attained;
  double pose_residual = 0.0;
  bool local = true;  ///< solved in the local workspace
  bool global_resolve = false;
  bool reached = false;
};

struct PlanResult {
  std::vector<PoseSolve> poses;
  std::vector<SegmentResult> segments;  ///< segments[k] moves pose k to pose k+1
  std::vector<double> segment_start;    ///< t0 of each segment
  MissionTiming timing;
  double wall_time = 0.0;

  [[nodiscard]] std::vector<Vec> q_star() const;
  [[nodiscard]] double duration() const;
  /// Reference (q, qdot, qddot) at time t: holds at pose configurations,
  /// Bezier segments in between. Before t = 0 and after the end it holds.
  [[nodiscard]] BezierSample reference(double t) const;
};

/// Algorithm 1: BPIK for each pose (pose 1 in the global workspace from
/// q = 0, later poses first in the local workspace of the previous roll with a
/// global re-solve when the pose error reaches epsilon), then one segment per
/// consecutive pair. The mission starts at rest in pose 1.
PlanResult plan_mission(const RobotModel& model, const std::vector<Pose>& poses,
                        const MissionTiming& timing, const PlannerWeights& weights,
                        const MotionLimits& limits, const PlannerOptions& options = {},
                        const std::vector<Vec>& initial_guesses = {});

/// Exhaustive dynamic programming over a grid in q with uniform time steps.
struct DpGrid {
  int time_steps = 50;      ///< N_s, number of time nodes
  double resolution = 0.0;  ///< fixed grid spacing (rad); 0 derives it per coordinate
  /// With resolution = 0, spacing_i = r_i * dt / cells_per_step where r_i is the
  /// tighter of q_rate_max and the J_G rate bound for coordinate i.
  int cells_per_step = 8;
  std::size_t max_states = 5'000'000;  ///< memory guard on grid points x time nodes
};

struct DpResult {
  std::vector<Vec> q;  ///< one configuration per time node
  double cost = 0.0;
  double wall_time = 0.0;
  std::size_t states = 0;
  bool feasible = false;
};

/// Rest-to-rest DP oracle on the same cost (trapezoid quadrature, finite
/// differences for qdot) with the rate, balance and J_G bounds applied per
/// transition. Acceleration and joint-torque limits are not imposed, so the
/// DP optimum is a lower bound up to discretisation. Throws ConfigError when
/// the grid exceeds max_states.
DpResult dp_reference(const RobotModel& model, const Vec& q_start, const Vec& q_end, double t0,
                      double tf, const PlannerWeights& weights, const MotionLimits& limits,
                      const DpGrid& grid);

/// Platform plus the first arm link of the prototype: the two-coordinate toy model.
RobotModel toy_model();

}  // namespace bikebot
