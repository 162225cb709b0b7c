#include "bikebot/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>

#include "bikebot/bem.hpp"
#include "bikebot/dynamics.hpp"
#include "bikebot/errors.hpp"
#include "bikebot/kinematics.hpp"
#include "bikebot/units.hpp"

namespace bikebot::sim {

std::string to_string(Integrator i) {
  return i == Integrator::RK4 ? "rk4" : "semi-implicit-euler";
}

Integrator integrator_from_string(const std::string& s) {
  if (s == "rk4") return Integrator::RK4;
  if (s == "semi-implicit-euler") return Integrator::SemiImplicitEuler;
  throw ConfigError("unknown integrator '" + s + "' (rk4 | semi-implicit-euler)");
}

namespace {

using AccelFn = std::function<Vec(const State&)>;

void guard(const State& s) {
  if (!s.qdot.allFinite() || s.qdot.norm() > kBlowUpSpeed || !s.q.allFinite()) {
    std::ostringstream os;
    os << "simulation blow-up: |qdot| = " << s.qdot.norm() << " exceeds " << kBlowUpSpeed;
    throw SimulationBlowUp(os.str());
  }
}

State integrate(const AccelFn& accel, const State& s, double dt, Integrator integrator) {
  State out;
  if (integrator == Integrator::SemiImplicitEuler) {
    out.qdot = s.qdot + dt * accel(s);
    out.q = s.q + dt * out.qdot;
  } else {
    const auto deriv = [&](const State& x) { return std::make_pair(Vec(x.qdot), accel(x)); };
    const auto shifted = [&](const std::pair<Vec, Vec>& k, double h) {
      return State{s.q + h * k.first, s.qdot + h * k.second};
    };
    const auto k1 = deriv(s);
    const auto k2 = deriv(shifted(k1, 0.5 * dt));
    const auto k3 = deriv(shifted(k2, 0.5 * dt));
    const auto k4 = deriv(shifted(k3, dt));
    out.q = s.q + dt / 6.0 * (k1.first + 2.0 * k2.first + 2.0 * k3.first + k4.first);
    out.qdot = s.qdot + dt / 6.0 * (k1.second + 2.0 * k2.second + 2.0 * k3.second + k4.second);
  }
  guard(out);
  return out;
}

double h_bound(const RobotModel& model, const steering::SteeringLimits& s) {
  return steering::torque_rate_h_max(s.delta_max, model.total_mass(), model.bike).value *
         s.delta_rate_max;
}

int phase_at(const PlanResult& plan, double t) {
  for (size_t k = 0; k < plan.segments.size(); ++k) {
    const auto& tr = plan.segments[k].trajectory;
    if (t < tr.t0) return static_cast<int>(k);
    if (t <= tr.tf) return -1 - static_cast<int>(k);
  }
  return static_cast<int>(plan.poses.size()) - 1;
}

}  // namespace

State step(const RobotModel& model, const State& s, const TorqueFn& tau, double dt,
           Integrator integrator) {
  const AccelFn accel = [&](const State& x) -> Vec {
    const Mat D = mass_matrix(model, x.q);
    return D.llt().solve(tau(x) - bias_forces(model, x.q, x.qdot));
  };
  return integrate(accel, s, dt, integrator);
}

State step(const RobotModel& model, const State& s, const Vec& tau, double dt,
           Integrator integrator) {
  return step(model, s, [&](const State&) { return tau; }, dt, integrator);
}

void Disturbance::validate() const {
  if (!(duration > 0)) throw ConfigError("disturbance duration must be positive");
}

void SimConfig::validate() const {
  if (!(dt > 0)) throw ConfigError("sim: dt must be positive");
  if (!(control_period >= dt)) throw ConfigError("sim: control_period must be >= dt");
  const double ratio = control_period / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw ConfigError("sim: control_period must be an integer multiple of dt");
  }
  if (duration < 0) throw ConfigError("sim: duration must be positive");
  if (sensor_quantization && !(*sensor_quantization > 0)) {
    throw ConfigError("sim: sensor_quantization must be positive");
  }
  if (!(imu_noise >= 0)) throw ConfigError("sim: imu_noise must be nonnegative");
  if (!(servo_bandwidth > 0)) throw ConfigError("sim: servo_bandwidth must be positive");
  if (!(q_rate_max > 0)) throw ConfigError("sim: q_rate_max must be positive");
  steering.validate();
}

SimLog run_scenario(const RobotModel& model, const PlanResult& plan, const ControlSetup& gains,
                    const std::vector<Disturbance>& disturbances, const SimConfig& config) {
  model.validate();
  config.validate();
  gains.balance.validate();
  const int n = model.num_links();
  const int dof = model.dof();
  gains.arm.validate(n);
  for (const auto& d : disturbances) d.validate();
  if (plan.poses.empty()) throw ConfigError("run_scenario: plan has no poses");

  const double M = model.total_mass();
  const double hb = h_bound(model, config.steering);

  SimLog log;
  if (config.loss_envelope) {
    log.loss_envelope = *config.loss_envelope;
  } else {
    bem::CapabilityOptions opt;
    opt.delta_range = config.steering.delta_max;
    const auto strategy = n > 0 ? bem::Strategy::TwoWheelArm : bem::Strategy::TwoWheel;
    log.loss_envelope = 1.2 * bem::max_roll_capability(model, strategy, opt).phi_b_max;
  }

  State s;
  s.q = config.initial_q ? *config.initial_q : plan.reference(0.0).q;
  check_dimension(model, s.q, "run_scenario initial q");
  s.qdot = Vec::Zero(dof);
  double delta = 0.0;
  if (config.initial_delta) {
    delta = *config.initial_delta;
  } else {
    delta = control::torque_to_steering(model, gravity_torque_roll(model, s.q), config.steering).delta;
  }

  const int sub = static_cast<int>(std::lround(config.control_period / config.dt));
  const double total = config.duration > 0 ? config.duration : plan.duration();
  const auto ticks = static_cast<long>(std::floor(total / config.control_period + 1e-9));

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  double prev_phi_meas = 0.0;
  Vec theta_acc = Vec::Zero(n);
  bool prev_correction = false;

  for (long k = 0; k <= ticks; ++k) {
    const double t = static_cast<double>(k) * config.control_period;
    const BezierSample ref = plan.reference(t);

    control::Measurement meas = control::exact_measurement(s.q, s.qdot);
    double phi = s.q[0];
    if (config.imu_noise > 0) phi += config.imu_noise * noise(rng);
    if (config.sensor_quantization) {
      const double qz = *config.sensor_quantization;
      phi = std::round(phi / qz) * qz;
      meas.phi_b_rate_measured = k == 0 ? 0.0 : (phi - prev_phi_meas) / config.control_period;
    }
    meas.phi_b_measured = phi;
    prev_phi_meas = phi;

    const auto bal = control::balance_control(model, meas, ref, gains.balance,
                                              config.reference_theta_acc ? nullptr : &theta_acc);
    const auto steer = control::torque_to_steering(model, bal.tau_b, config.steering);
    auto arm = control::arm_velocity_control(model, meas, ref, gains.arm, config.q_rate_max);
    if (!config.velocity_correction && arm.correction_active) {
      arm = control::arm_velocity_control(model, meas, ref,
                                          control::ArmGains{gains.arm.K_p, 0.0, gains.arm.epsilon_b},
                                          config.q_rate_max);
      arm.correction_active = false;
    }

    const ChainFrames fk = forward_kinematics(model, s.q);
    log.time.push_back(t);
    log.q.push_back(s.q);
    log.qdot.push_back(s.qdot);
    log.q_ref.push_back(ref.q);
    log.delta.push_back(delta);
    log.delta_cmd.push_back(steer.delta);
    log.tau_b.push_back(steering::balance_torque_90(delta, M, model.bike));
    log.tau_b_cmd.push_back(bal.tau_b);
    log.e_b.push_back(s.q[0] - ref.q[0]);
    log.e_theta.push_back(s.q.tail(n) - ref.q.tail(n));
    log.pose.push_back(fk.pose);
    log.pose_ref.push_back(forward_kinematics(model, ref.q).pose);
    log.rate_margin.push_back(hb - std::abs(gravity_gradient_exact(model, s.q).dot(s.qdot)));
    log.correction_norm.push_back(arm.correction_active ? arm.correction.norm() : 0.0);
    log.phase.push_back(phase_at(plan, t));
    log.steering_saturated.push_back(steer.saturated);
    log.correction_active.push_back(arm.correction_active);
    log.rate_saturated.push_back(arm.saturated);
    if (steer.saturated) ++log.saturation_events;
    if (arm.correction_active && !prev_correction) ++log.correction_events;
    prev_correction = arm.correction_active;

    const bool lost = std::abs(s.q[0]) > log.loss_envelope;
    log.balance_lost.push_back(lost);
    if (lost) {
      log.balance_loss_time = t;
      break;
    }
    if (k == ticks) break;

    // Zero-order hold over the dynamics sub-steps. The arm follows its rate
    // command through a first-order servo realised by computed torque, so the
    // roll row sees the true coupling.
    for (int j = 0; j < sub; ++j) {
      const double tj = t + j * config.dt;
      double tau_b = steering::balance_torque_90(delta, M, model.bike);
      for (const auto& d : disturbances) {
        if (d.active(tj)) tau_b += d.torque;
      }
      const AccelFn accel = [&](const State& x) -> Vec {
        const Mat D = mass_matrix(model, x.q);
        const Vec h = bias_forces(model, x.q, x.qdot);
        Vec a(dof);
        const Vec arm_acc = config.servo_bandwidth * (arm.theta_rate - x.qdot.tail(n));
        a.tail(n) = arm_acc;
        a[0] = (tau_b - h[0] - D.row(0).tail(n).dot(arm_acc)) / D(0, 0);
        return a;
      };
      s = integrate(accel, s, config.dt, config.integrator);
      const double max_step = config.steering.delta_rate_max * config.dt;
      delta += std::clamp(steer.delta - delta, -max_step, max_step);
    }
    if (n > 0) theta_acc = config.servo_bandwidth * (arm.theta_rate - s.qdot.tail(n));
  }
  return log;
}

SimLog inject(const RobotModel& model, const PlanResult& plan, const ControlSetup& gains,
              std::vector<Disturbance> disturbances, const Disturbance& d,
              const SimConfig& config) {
  if (d.torque != 0.0) disturbances.push_back(d);
  return run_scenario(model, plan, gains, disturbances, config);
}

PlanResult hold_plan(const Vec& q, double duration) {
  PlanResult p;
  PoseSolve ps;
  ps.q = q;
  ps.reached = true;
  p.poses.push_back(ps);
  p.timing.hold = duration;
  p.timing.transition = 0.0;
  return p;
}

ErrorStats stats(const std::vector<double>& v) {
  ErrorStats s;
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) {
    sum += x;
    s.max = std::max(s.max, x);
  }
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

HoldErrors hold_errors(const SimLog& log, double window) {
  HoldErrors out;
  size_t i = 0;
  while (i < log.size()) {
    size_t j = i;
    while (j < log.size() && log.phase[j] == log.phase[i]) ++j;
    if (log.phase[i] >= 0) {
      const double t_end = log.time[j - 1];
      double ps = 0.0, os = 0.0;
      int cnt = 0;
      for (size_t k = i; k < j; ++k) {
        if (log.time[k] < t_end - window) continue;
        const double pe = position_error(log.pose[k], log.pose_ref[k]);
        const double oe = orientation_error(log.pose[k], log.pose_ref[k]);
        out.position.push_back(pe);
        out.orientation.push_back(oe);
        ps += pe;
        os += oe;
        ++cnt;
      }
      if (cnt > 0) {
        out.per_pose_position.push_back(ps / cnt);
        out.per_pose_orientation.push_back(os / cnt);
      }
    }
    i = j;
  }
  return out;
}

std::string csv_header(int dof) {
  std::ostringstream os;
  os << "time_s";
  const auto names = [&](const std::string& prefix, const std::string& unit) {
    os << ',' << prefix << "phi_b_" << unit;
    for (int i = 1; i < dof; ++i) os << ',' << prefix << "theta" << i << '_' << unit;
  };
  names("", "deg");
  names("rate_", "deg_s");
  names("ref_", "deg");
  os << ",delta_deg,delta_cmd_deg,tau_b_Nm,tau_b_cmd_Nm,e_b_deg,e_theta_norm_deg"
        ",ee_x_cm,ee_y_cm,ee_z_cm,ee_yaw_deg,ee_pitch_deg,ee_roll_deg"
        ",pos_err_mm,ori_err_deg,rate_margin_Nm_s,correction_deg_s,phase"
        ",steering_saturated,correction_active,rate_saturated,balance_lost";
  return os.str();
}

void write_csv(std::ostream& os, const SimLog& log) {
  const int dof = log.size() ? static_cast<int>(log.q.front().size()) : 1;
  os << csv_header(dof) << '\n';
  os << std::setprecision(10);
  for (size_t k = 0; k < log.size(); ++k) {
    os << log.time[k];
    for (int i = 0; i < dof; ++i) os << ',' << units::deg(log.q[k][i]);
    for (int i = 0; i < dof; ++i) os << ',' << units::deg(log.qdot[k][i]);
    for (int i = 0; i < dof; ++i) os << ',' << units::deg(log.q_ref[k][i]);
    const Pose& p = log.pose[k];
    os << ',' << units::deg(log.delta[k]) << ',' << units::deg(log.delta_cmd[k]) << ','
       << log.tau_b[k] << ',' << log.tau_b_cmd[k] << ',' << units::deg(log.e_b[k]) << ','
       << units::deg(log.e_theta[k].norm());
    for (int i = 0; i < 3; ++i) os << ',' << units::cm(p.position[i]);
    for (int i = 0; i < 3; ++i) os << ',' << units::deg(p.orientation[i]);
    os << ',' << 1e3 * position_error(p, log.pose_ref[k]) << ','
       << units::deg(orientation_error(p, log.pose_ref[k])) << ',' << log.rate_margin[k] << ','
       << units::deg(log.correction_norm[k]) << ',' << log.phase[k] << ','
       << log.steering_saturated[k] << ',' << log.correction_active[k] << ','
       << log.rate_saturated[k] << ',' << log.balance_lost[k] << '\n';
  }
}

}  // namespace bikebot::sim
