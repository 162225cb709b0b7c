#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bikebot/control.hpp"
#include "bikebot/model.hpp"
#include "bikebot/planner.hpp"
#include "bikebot/steering.hpp"

namespace bikebot::sim {

enum class Integrator { RK4, SemiImplicitEuler };
std::string to_string(Integrator i);
Integrator integrator_from_string(const std::string& s);

struct State {
  Vec q;
  Vec qdot;
};

/// One step of q'' = D^-1 (tau - C q' - G). `tau` is evaluated at every
/// stage, so it may depend on the stage state. Throws SimulationBlowUp when
/// |q'| exceeds kBlowUpSpeed.
using TorqueFn = std::function<Vec(const State&)>;
State step(const RobotModel& model, const State& s, const TorqueFn& tau, double dt,
           Integrator integrator = Integrator::RK4);
State step(const RobotModel& model, const State& s, const Vec& tau, double dt,
           Integrator integrator = Integrator::RK4);

inline constexpr double kBlowUpSpeed = 1e3;

struct Disturbance {
  double t_start = 0.0;   ///< s
  double duration = 0.0;  ///< s
  double torque = 0.0;    ///< N m on the roll axis

  void validate() const;
  [[nodiscard]] bool active(double t) const { return t >= t_start && t < t_start + duration; }
};

struct SimConfig {
  double dt = 1e-3;
  double control_period = 1e-2;
  double duration = 0.0;  ///< s; 0 runs the whole plan
  Integrator integrator = Integrator::RK4;
  std::optional<double> sensor_quantization;  ///< rad; finite-difference roll rate when set
  double imu_noise = 0.0;                     ///< rad, std of Gaussian roll measurement noise
  std::uint64_t seed = 0;
  steering::SteeringLimits steering;
  double q_rate_max = 0.628318530717959;  ///< arm command saturation (rad/s)
  double servo_bandwidth = 100.0;  ///< 1/s, first-order joint velocity servo
  bool velocity_correction = true;
  bool reference_theta_acc = true;  ///< false feeds the measured Theta'' to the roll law
  std::optional<double> loss_envelope;  ///< rad; default 1.2 x two-wheel+arm capability
  std::optional<Vec> initial_q;         ///< default: reference at t = 0
  std::optional<double> initial_delta;  ///< default: equilibrium steering of initial_q

  void validate() const;
};

/// One row per control tick.
struct SimLog {
  std::vector<double> time;
  std::vector<Vec> q, qdot, q_ref;
  std::vector<double> delta, delta_cmd, tau_b, tau_b_cmd;
  std::vector<double> e_b;
  std::vector<Vec> e_theta;
  std::vector<Pose> pose, pose_ref;
  std::vector<double> rate_margin;  ///< h_max delta_rate_max - |J_G q'|
  std::vector<double> correction_norm;  ///< gated correction |I_Theta dTheta'|
  std::vector<int> phase;  ///< pose index while holding, -1 - k during segment k
  std::vector<bool> steering_saturated, correction_active, rate_saturated, balance_lost;

  double loss_envelope = 0.0;
  std::optional<double> balance_loss_time;
  int saturation_events = 0;  ///< ticks with a saturated steering command
  int correction_events = 0;  ///< rising edges of I_Theta

  [[nodiscard]] std::size_t size() const { return time.size(); }
};

struct ControlSetup {
  control::BalanceGains balance;
  control::ArmGains arm;
};

/// Closed-loop run of the controllers against the dynamics. Control runs at
/// control_period with zero-order hold, dynamics at dt; the steering angle
/// follows its command under the rate limit and realises tau_b90(delta, M).
/// The run stops at the first tick beyond the loss envelope.
SimLog run_scenario(const RobotModel& model, const PlanResult& plan, const ControlSetup& gains,
                    const std::vector<Disturbance>& disturbances, const SimConfig& config);

/// Re-runs with `d` appended to the disturbances.
SimLog inject(const RobotModel& model, const PlanResult& plan, const ControlSetup& gains,
              std::vector<Disturbance> disturbances, const Disturbance& d,
              const SimConfig& config);

/// Single pose held for `duration` seconds.
PlanResult hold_plan(const Vec& q, double duration);

struct ErrorStats {
  double mean = 0.0;
  double stddev = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};
ErrorStats stats(const std::vector<double>& v);

/// End-effector errors against the planned poses over the final `window`
/// seconds of every hold phase (position in m, orientation in rad).
struct HoldErrors {
  std::vector<double> position;
  std::vector<double> orientation;
  std::vector<double> per_pose_position;     ///< mean per hold phase
  std::vector<double> per_pose_orientation;
};
HoldErrors hold_errors(const SimLog& log, double window);

/// CSV with one row per control tick, angles in degrees.
void write_csv(std::ostream& os, const SimLog& log);
std::string csv_header(int dof);

}  // namespace bikebot::sim
