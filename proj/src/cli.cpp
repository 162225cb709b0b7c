#include "bikebot/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "bikebot/bem.hpp"
#include "bikebot/dynamics.hpp"
#include "bikebot/errors.hpp"
#include "bikebot/kinematics.hpp"
#include "bikebot/steering.hpp"
#include "bikebot/units.hpp"

namespace bikebot::cli {

using io::json;
using io::Reader;
using units::deg;
using units::rad;

namespace {

Vec degrees(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = rad(v[i]);
  return out;
}

std::vector<double> to_degrees(const Vec& v) {
  std::vector<double> out;
  for (int i = 0; i < v.size(); ++i) out.push_back(deg(v[i]));
  return out;
}

Vec diag_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<int>(v.size()));
}

void expect_size(const Vec& v, int n, const std::string& what) {
  if (v.size() != n) {
    throw ConfigError(what + ": expected " + std::to_string(n) + " entries, got " +
                      std::to_string(v.size()));
  }
}

// Pose tables use (x, y, z) in cm and (yaw, pitch, roll) in degrees.
Pose pose_from_row(const std::vector<double>& r, const std::string& what) {
  if (r.size() != 6) throw ConfigError(what + ": a pose has 6 entries (cm, cm, cm, deg, deg, deg)");
  Pose p;
  p.position = Vec3(r[0], r[1], r[2]) / 100.0;
  p.orientation = Vec3(rad(r[3]), rad(r[4]), rad(r[5]));
  return p;
}

json pose_to_row(const Pose& p) {
  return {units::cm(p.position.x()), units::cm(p.position.y()), units::cm(p.position.z()),
          deg(p.orientation[0]),    deg(p.orientation[1]),    deg(p.orientation[2])};
}

void parse_limits(Reader r, const RobotModel& model, MotionLimits& l) {
  l.q_rate_max = rad(r.number("q_rate_max_deg_s", deg(l.q_rate_max)));
  l.q_acc_max = rad(r.number("q_acc_max_deg_s2", deg(l.q_acc_max)));
  if (r.has("tau_theta_max_Nm")) {
    l.tau_theta_max = diag_vector(r.numbers("tau_theta_max_Nm"));
    expect_size(l.tau_theta_max, model.num_links(), r.field("tau_theta_max_Nm"));
  }
  l.steering.delta_max = rad(r.number("delta_max_deg", deg(l.steering.delta_max)));
  l.steering.delta_rate_max = rad(r.number("delta_rate_max_deg_s", deg(l.steering.delta_rate_max)));
  if (auto t = r.optional_number("tau_b_max_Nm")) {
    l.tau_b_max = *t;
  } else {
    l.tau_b_max = balance_torque_limit(model, l.steering);
  }
  r.finish();
}

void parse_weights(Reader r, int dof, PlannerWeights& w) {
  if (r.has("lambda")) {
    const auto lam = r.numbers("lambda");
    if (lam.size() != 4) throw ConfigError(r.field("lambda") + ": expected 4 entries");
    w.lambda1 = lam[0];
    w.lambda2 = lam[1];
    w.lambda3 = lam[2];
    w.lambda4 = lam[3];
  }
  if (r.has("W1")) {
    w.W1 = diag_vector(r.numbers("W1"));
    expect_size(w.W1, dof, r.field("W1"));
  }
  if (r.has("W2")) {
    w.W2 = diag_vector(r.numbers("W2"));
    expect_size(w.W2, dof, r.field("W2"));
    w.w2_padded = false;
  }
  if (r.has("P_diag")) {
    const Vec p = diag_vector(r.numbers("P_diag"));
    expect_size(p, dof, r.field("P_diag"));
    w.P = p.asDiagonal();
  }
  w.epsilon_pose = r.number("epsilon_pose", w.epsilon_pose);
  r.finish();
  w.validate(dof);
}

void parse_planner(Reader r, PlannerOptions& o) {
  o.degree = r.integer("degree", o.degree);
  o.samples = r.integer("samples", o.samples);
  o.restarts = r.integer("restarts", o.restarts);
  o.restart_sigma = rad(r.number("restart_sigma_deg", deg(o.restart_sigma)));
  o.enforce_balance = r.boolean("enforce_balance", o.enforce_balance);
  o.audit_factor = r.integer("audit_factor", o.audit_factor);
  o.sqp.max_iterations = r.integer("max_iterations", o.sqp.max_iterations);
  r.finish();
  if (o.degree < 5) throw ConfigError("planner.degree: must be >= 5");
  if (o.samples < 1) throw ConfigError("planner.samples: must be >= 1");
  if (o.restarts < 1) throw ConfigError("planner.restarts: must be >= 1");
}

void parse_sim(Reader r, const RobotModel& model, SimSettings& s) {
  sim::SimConfig& c = s.config;
  c.dt = r.number("dt", c.dt);
  c.control_period = r.number("control_period", c.control_period);
  c.duration = r.number("duration", c.duration);
  c.integrator = sim::integrator_from_string(r.string("integrator", to_string(c.integrator)));
  if (auto qz = r.optional_number("imu_quantization_deg")) c.sensor_quantization = rad(*qz);
  c.imu_noise = rad(r.number("imu_noise_deg", 0.0));
  c.servo_bandwidth = r.number("servo_bandwidth", c.servo_bandwidth);
  c.velocity_correction = r.boolean("velocity_correction", c.velocity_correction);
  c.reference_theta_acc = r.boolean("reference_theta_acc", c.reference_theta_acc);
  if (auto e = r.optional_number("loss_envelope_deg")) c.loss_envelope = rad(*e);
  if (r.has("initial_q_deg")) {
    c.initial_q = degrees(r.numbers("initial_q_deg"));
    expect_size(*c.initial_q, model.dof(), r.field("initial_q_deg"));
  }
  if (auto d = r.optional_number("initial_delta_deg")) c.initial_delta = rad(*d);
  s.trials = r.integer("trials", s.trials);
  s.hold_s = r.number("hold_s", s.hold_s);
  r.finish();
  if (s.trials < 1) throw ConfigError("sim.trials: must be >= 1");
}

void parse_gains(Reader r, int n, sim::ControlSetup& g) {
  g.balance.k_p = r.number("k_p", g.balance.k_p);
  g.balance.k_d = r.number("k_d", g.balance.k_d);
  if (r.has("K_p")) {
    g.arm.K_p = diag_vector(r.numbers("K_p"));
    expect_size(g.arm.K_p, n, r.field("K_p"));
  }
  g.arm.kappa = r.number("kappa", g.arm.kappa);
  g.arm.epsilon_b = rad(r.number("epsilon_b_deg", deg(g.arm.epsilon_b)));
  r.finish();
  g.arm.validate(n);
  if (!(g.balance.k_p > 0) || !(g.balance.k_d > 0)) throw ConfigError("gains: k_p, k_d must be positive");
}

void parse_compare(Reader r, CompareDpSettings& s) {
  s.model = r.has("robot") ? io::robot_from_config(r.raw("robot"), r.field("robot")) : toy_model();
  if (r.has("samples")) {
    s.samples.clear();
    for (double v : r.numbers("samples")) {
      if (v < 1 || v != std::floor(v)) throw ConfigError(r.field("samples") + ": positive integers");
      s.samples.push_back(static_cast<int>(v));
    }
  }
  const int d = s.model.dof();
  s.q_start = degrees(r.numbers("q_start_deg", std::vector<double>(d, 0.0)));
  std::vector<double> end(d, 0.0);
  if (d == 2) end = {0.5, 20.0};
  s.q_end = degrees(r.numbers("q_end_deg", end));
  expect_size(s.q_start, d, r.field("q_start_deg"));
  expect_size(s.q_end, d, r.field("q_end_deg"));
  s.duration = r.number("duration_s", s.duration);
  s.cells_per_step = r.integer("cells_per_step", s.cells_per_step);
  s.degree = r.integer("degree", s.degree);
  r.finish();
  if (!(s.duration > 0)) throw ConfigError(r.field("duration_s") + ": must be positive");
}

std::ofstream open_out(const Context& ctx, const std::string& name) {
  std::filesystem::create_directories(ctx.out_dir);
  std::ofstream f(ctx.out_dir / name);
  if (!f) throw ConfigError("cannot write " + (ctx.out_dir / name).string());
  f << std::setprecision(12);
  return f;
}

void write_json(const Context& ctx, const std::string& name, const json& j) {
  auto f = open_out(ctx, name);
  f << j.dump(2) << '\n';
}

json report_json(const ConstraintReport& r) {
  return {{"rate_bound_Nm_s", r.rate_bound},   {"balance_Nm", r.balance},
          {"joint_torque_Nm", r.joint_torque}, {"box_rad", r.box},
          {"velocity_rad_s", r.velocity},      {"acceleration_rad_s2", r.acceleration},
          {"worst", r.worst()}};
}

}  // namespace

Scenario parse_scenario(const json& j) {
  Reader r(j, "");
  Scenario s;
  const int version = r.integer("schema_version", kSchemaVersion);
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion));
  }
  s.model = r.has("robot") ? io::robot_from_config(r.raw("robot"), "robot") : default_model();
  const int dof = s.model.dof();
  const int n = s.model.num_links();
  s.seed = static_cast<std::uint64_t>(r.integer("seed", 0));

  s.limits = default_limits(s.model);
  if (r.has("limits")) parse_limits(r.child("limits"), s.model, s.limits);
  s.limits.validate(n);
  s.weights = default_weights(dof);
  if (r.has("weights")) parse_weights(r.child("weights"), dof, s.weights);
  if (r.has("planner")) parse_planner(r.child("planner"), s.planner);

  if (r.has("steer_sweep")) {
    Reader w = r.child("steer_sweep");
    SweepSettings& g = s.sweep;
    g.phi0_min = w.number("phi0_min_deg", g.phi0_min);
    g.phi0_max = w.number("phi0_max_deg", g.phi0_max);
    g.phi0_step = w.number("phi0_step_deg", g.phi0_step);
    g.delta_min = w.number("delta_min_deg", g.delta_min);
    g.delta_max = w.number("delta_max_deg", g.delta_max);
    g.delta_step = w.number("delta_step_deg", g.delta_step);
    g.phi_b_min = w.number("phi_b_min_deg", g.phi_b_min);
    g.phi_b_max = w.number("phi_b_max_deg", g.phi_b_max);
    g.phi_b_step = w.number("phi_b_step_deg", g.phi_b_step);
    w.finish();
    if (!(g.phi0_step > 0) || !(g.delta_step > 0) || !(g.phi_b_step > 0)) {
      throw ConfigError("steer_sweep: steps must be positive");
    }
  }
  if (r.has("capability")) {
    Reader c = r.child("capability");
    s.capability.delta_range_deg = c.number("delta_range_deg", s.capability.delta_range_deg);
    s.capability.full_joint_search = c.boolean("full_joint_search", false);
    c.finish();
  }
  if (r.has("mission")) {
    Reader m = r.child("mission");
    MissionSettings ms;
    const auto rows = m.rows("poses_cm_deg");
    for (size_t i = 0; i < rows.size(); ++i) {
      ms.poses.push_back(pose_from_row(rows[i], m.field("poses_cm_deg") + "[" + std::to_string(i) + "]"));
    }
    if (ms.poses.empty()) throw ConfigError("mission.poses_cm_deg: at least one pose");
    ms.timing.hold = m.number("hold_s", ms.timing.hold);
    ms.timing.transition = m.number("transition_s", ms.timing.transition);
    if (m.has("initial_guesses_deg")) {
      for (const auto& g : m.rows("initial_guesses_deg")) {
        ms.initial_guesses.push_back(degrees(g));
        expect_size(ms.initial_guesses.back(), dof, "mission.initial_guesses_deg");
      }
    }
    m.finish();
    s.mission = ms;
  }
  s.sim.config.steering = s.limits.steering;
  s.sim.config.q_rate_max = s.limits.q_rate_max;
  if (r.has("sim")) parse_sim(r.child("sim"), s.model, s.sim);
  s.gains.arm = control::default_arm_gains(n);
  if (r.has("gains")) parse_gains(r.child("gains"), n, s.gains);
  if (r.has("disturbances")) {
    const json& arr = r.raw("disturbances");
    if (!arr.is_array()) throw ConfigError("disturbances: expected an array");
    for (size_t i = 0; i < arr.size(); ++i) {
      Reader d(arr[i], "disturbances[" + std::to_string(i) + "]");
      sim::Disturbance dist{d.number("t_start_s"), d.number("duration_s"), d.number("torque_Nm")};
      d.finish();
      dist.validate();
      s.disturbances.push_back(dist);
    }
  }
  if (r.has("compare_dp")) {
    parse_compare(r.child("compare_dp"), s.compare_dp);
  } else {
    parse_compare(Reader(json::object(), "compare_dp"), s.compare_dp);
  }
  r.finish();
  s.sim.config.seed = s.seed;
  s.planner.seed = s.seed;
  s.sim.config.validate();
  return s;
}

Context make_context(const std::string& config_path, const std::string& out_dir,
                     std::optional<std::uint64_t> seed, int jobs, bool quantized_imu) {
  json j = json::object();
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("cannot open config " + config_path);
    try {
      j = json::parse(f);
    } catch (const json::parse_error& e) {
      throw ConfigError(config_path + ": " + e.what());
    }
  }
  Context ctx;
  ctx.scenario = parse_scenario(j);
  ctx.config_hash = io::fnv1a_hex(j.dump());
  ctx.seed = seed.value_or(ctx.scenario.seed);
  ctx.scenario.seed = ctx.seed;
  ctx.scenario.planner.seed = ctx.seed;
  ctx.scenario.sim.config.seed = ctx.seed;
  if (jobs < 1) throw ConfigError("--jobs must be >= 1");
  ctx.jobs = jobs;
  ctx.quantized_imu = quantized_imu;
  if (quantized_imu) ctx.scenario.sim.config.sensor_quantization = rad(0.1);
  ctx.out_dir = out_dir;
  return ctx;
}

json meta_json(const Context& ctx, const std::string& command) {
  return {{"command", command},
          {"version", kVersion},
          {"schema_version", kSchemaVersion},
          {"config_hash", ctx.config_hash},
          {"seed", ctx.seed},
          {"euler_convention", "ZYX (yaw, pitch, roll), degrees"},
          {"w2_padded", ctx.scenario.weights.w2_padded},
          {"quantized_imu", ctx.quantized_imu},
          {"units", "angles deg, positions cm, torques N m, time s"}};
}

void write_csv_meta(std::ostream& os, const Context& ctx, const std::string& command) {
  const json m = meta_json(ctx, command);
  for (auto it = m.begin(); it != m.end(); ++it) {
    os << "# " << it.key() << '=' << (it->is_string() ? it->get<std::string>() : it->dump()) << '\n';
  }
}

// ---------------------------------------------------------------------------

int cmd_steer_sweep(const Context& ctx, std::ostream& out) {
  const RobotModel& model = ctx.scenario.model;
  const SweepSettings& g = ctx.scenario.sweep;
  const BikebotParams& p = model.bike;
  const double M = model.total_mass();

  auto fs = open_out(ctx, "steer_sensitivity.csv");
  write_csv_meta(fs, ctx, "steer-sweep");
  fs << "phi0_deg,r_m,S_tau_Nm_per_deg\n";
  double best = -1.0, best_at = 0.0;
  const auto count = [](double lo, double hi, double step) {
    return hi < lo ? 0 : static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  };
  for (int i = 0, n = count(g.phi0_min, g.phi0_max, g.phi0_step); i < n; ++i) {
    const double phi0 = g.phi0_min + i * g.phi0_step;
    const double s = steering::per_degree(steering::steering_sensitivity(rad(phi0), p));
    fs << phi0 << ',' << steering::contact_radius(rad(phi0), 0.0, p) << ',' << s << '\n';
    if (s > best) {
      best = s;
      best_at = phi0;
    }
  }

  auto ft = open_out(ctx, "balance_torque_surface.csv");
  write_csv_meta(ft, ctx, "steer-sweep");
  ft << "delta_deg,phi_b_deg,tau_b_Nm\n";
  double tau_peak = 0.0;
  int surface_rows = 0;
  for (int i = 0, nd = count(g.delta_min, g.delta_max, g.delta_step); i < nd; ++i) {
    const double d = g.delta_min + i * g.delta_step;
    for (int k = 0, nb = count(g.phi_b_min, g.phi_b_max, g.phi_b_step); k < nb; ++k) {
      const double b = g.phi_b_min + k * g.phi_b_step;
      const double tau = steering::balance_torque(rad(d), units::kPi / 2, rad(b), M, p);
      ft << d << ',' << b << ',' << tau << '\n';
      tau_peak = std::max(tau_peak, std::abs(tau));
      ++surface_rows;
    }
  }
  if (best >= 0) {
    out << "steering sensitivity peak: " << best << " N m/deg at phi0 = " << best_at << " deg\n";
  } else {
    out << "steering sensitivity: empty phi0 range, no N m/deg rows\n";
  }
  out << "balance torque surface: " << surface_rows << " rows, max |tau_b| = " << tau_peak << " N m\n";
  out << "wrote " << (ctx.out_dir / "steer_sensitivity.csv").string() << ", "
      << (ctx.out_dir / "balance_torque_surface.csv").string() << '\n';
  return kOk;
}

int cmd_capability(const Context& ctx, std::ostream& out) {
  const RobotModel& model = ctx.scenario.model;
  bem::CapabilityOptions opt;
  opt.delta_range = rad(ctx.scenario.capability.delta_range_deg);
  opt.full_joint_search = ctx.scenario.capability.full_joint_search;
  json j;
  j["meta"] = meta_json(ctx, "capability");
  j["delta_range_deg"] = ctx.scenario.capability.delta_range_deg;
  j["estimates"] = json::array();
  for (auto s : {bem::Strategy::OneWheel, bem::Strategy::TwoWheel, bem::Strategy::TwoWheelArm}) {
    const auto e = bem::max_roll_capability(model, s, opt);
    j["estimates"].push_back({{"strategy", bem::to_string(s)},
                              {"phi_b_max_deg", deg(e.phi_b_max)},
                              {"achieving_delta_deg", deg(e.achieving_delta)},
                              {"tau_b_max_Nm", e.tau_b_max},
                              {"achieving_theta_deg", to_degrees(e.achieving_theta)}});
    out << std::left << std::setw(14) << bem::to_string(s) << " phi_b_max = " << std::fixed
        << std::setprecision(3) << deg(e.phi_b_max) << " deg (delta = " << deg(e.achieving_delta)
        << " deg, tau_b = " << e.tau_b_max << " N m)\n"
        << std::defaultfloat;
  }
  write_json(ctx, "capability.json", j);
  return kOk;
}

json plan_to_json(const RobotModel& model, const PlanResult& plan) {
  (void)model;
  json j;
  j["timing"] = {{"hold_s", plan.timing.hold}, {"transition_s", plan.timing.transition}};
  j["wall_time_s"] = plan.wall_time;
  j["poses"] = json::array();
  for (size_t k = 0; k < plan.poses.size(); ++k) {
    const auto& p = plan.poses[k];
    j["poses"].push_back({{"index", k + 1},
                          {"q_deg", to_degrees(p.q)},
                          {"attained_cm_deg", pose_to_row(p.attained)},
                          {"pose_residual", p.pose_residual},
                          {"local", p.local},
                          {"global_resolve", p.global_resolve},
                          {"reached", p.reached}});
  }
  j["segments"] = json::array();
  for (size_t k = 0; k < plan.segments.size(); ++k) {
    const auto& s = plan.segments[k];
    json cps = json::array();
    for (int i = 0; i < s.trajectory.control_points.rows(); ++i) {
      cps.push_back(to_degrees(s.trajectory.control_points.row(i).transpose()));
    }
    j["segments"].push_back(
        {{"from_pose", k + 1},
         {"t0_s", s.trajectory.t0},
         {"tf_s", s.trajectory.tf},
         {"degree", s.trajectory.degree},
         {"control_points_deg", cps},
         {"cost", {{"tracking", s.cost.tracking},
                   {"velocity", s.cost.velocity},
                   {"balance", s.cost.balance},
                   {"total", s.cost.total()}}},
         {"constraints_at_samples", report_json(s.at_samples)},
         {"constraints_audit", report_json(s.audit)},
         {"feasible", s.feasible},
         {"iterations", s.iterations},
         {"restarts", s.starts_tried},
         {"wall_time_s", s.wall_time}});
  }
  return j;
}

void write_plan_samples_csv(std::ostream& os, const RobotModel& model, const PlanResult& plan,
                            const PlannerWeights& weights, const MotionLimits& limits, int samples) {
  const int d = model.dof();
  const int n = model.num_links();
  const double hb = steering::torque_rate_h_max(limits.steering.delta_max, model.total_mass(),
                                                model.bike)
                        .value *
                    limits.steering.delta_rate_max;
  os << "segment,t_s,phi_b_deg";
  for (int i = 1; i < d; ++i) os << ",theta" << i << "_deg";
  os << ",rate_margin_Nm_s,balance_margin_Nm,torque_margin_Nm,velocity_margin_deg_s,"
        "acceleration_margin_deg_s2\n";
  for (size_t k = 0; k < plan.segments.size(); ++k) {
    const auto& tr = plan.segments[k].trajectory;
    for (int j = 0; j < samples; ++j) {
      const double s = samples == 1 ? 0.0 : static_cast<double>(j) / (samples - 1);
      const BezierSample b = bezier_eval_s(tr, s);
      const double rate = hb - std::abs(gravity_gradient_exact(model, b.q).dot(b.qdot));
      const double bal = limits.tau_b_max - weights.lambda4 * std::abs(gravity_torque_roll(model, b.q));
      double torque = std::numeric_limits<double>::infinity();
      if (n > 0) {
        const Vec tau = inverse_dynamics(model, b.q, b.qdot, b.qddot);
        torque = (limits.tau_theta_max - tau.tail(n).cwiseAbs()).minCoeff();
      }
      os << k + 1 << ',' << tr.t0 + s * tr.duration();
      for (int i = 0; i < d; ++i) os << ',' << deg(b.q[i]);
      os << ',' << rate << ',' << bal << ',' << (n > 0 ? torque : 0.0) << ','
         << deg(limits.q_rate_max - b.qdot.cwiseAbs().maxCoeff()) << ','
         << deg(limits.q_acc_max - b.qddot.cwiseAbs().maxCoeff()) << '\n';
    }
  }
}

namespace {

PlanResult run_plan(const Context& ctx) {
  const Scenario& sc = ctx.scenario;
  if (!sc.mission) throw ConfigError("mission: section required for this command");
  return plan_mission(sc.model, sc.mission->poses, sc.mission->timing, sc.weights, sc.limits,
                      sc.planner, sc.mission->initial_guesses);
}

}  // namespace

int cmd_plan(const Context& ctx, std::ostream& out) {
  const Scenario& sc = ctx.scenario;
  PlanResult plan;
  try {
    plan = run_plan(ctx);
  } catch (const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    json err = {{"meta", meta_json(ctx, "plan")},
                {"error", dynamic_cast<const InfeasibleSegment*>(&e) ? "InfeasibleSegment"
                                                                     : "SolverFailure"},
                {"message", e.what()}};
    write_json(ctx, "plan_error.json", err);
    throw;
  }
  json j = plan_to_json(sc.model, plan);
  j["meta"] = meta_json(ctx, "plan");
  write_json(ctx, "plan.json", j);
  auto f = open_out(ctx, "plan_samples.csv");
  write_csv_meta(f, ctx, "plan");
  write_plan_samples_csv(f, sc.model, plan, sc.weights, sc.limits, sc.planner.samples);
  for (size_t k = 0; k < plan.poses.size(); ++k) {
    const auto& p = plan.poses[k];
    out << "pose " << k + 1 << ": residual " << p.pose_residual << " (cm, deg norm), roll "
        << deg(p.q[0]) << " deg" << (p.global_resolve ? ", global re-solve" : "")
        << (p.reached ? "" : ", not reached") << '\n';
  }
  for (size_t k = 0; k < plan.segments.size(); ++k) {
    const auto& s = plan.segments[k];
    out << "segment " << k + 1 << ": cost " << s.cost.total() << ", worst sample residual "
        << s.at_samples.worst() << ", audit " << s.audit.worst() << ", " << s.wall_time << " s\n";
  }
  out << "plan wall time " << plan.wall_time << " s\n";
  return kOk;
}

int cmd_simulate(const Context& ctx, std::ostream& out) {
  const Scenario& sc = ctx.scenario;
  PlanResult plan;
  if (sc.mission) {
    plan = run_plan(ctx);
  } else {
    // Hold the home posture at its zero-steering equilibrium roll.
    Vec target = sc.model.home_q();
    const auto eq = bem::solve_equilibrium_roll(sc.model, target.tail(sc.model.num_links()), 0.0);
    if (eq.found) target[0] = eq.point.q[0];
    plan = sim::hold_plan(target, sc.sim.hold_s);
  }
  sim::SimConfig base = sc.sim.config;
  if (!base.loss_envelope) {
    // Shared across trials; the capability search is the slow part of setup.
    bem::CapabilityOptions opt;
    opt.delta_range = base.steering.delta_max;
    const auto strategy =
        sc.model.num_links() > 0 ? bem::Strategy::TwoWheelArm : bem::Strategy::TwoWheel;
    base.loss_envelope = 1.2 * bem::max_roll_capability(sc.model, strategy, opt).phi_b_max;
  }

  const int trials = sc.sim.trials;
  std::vector<sim::SimLog> logs(trials);
  std::vector<std::exception_ptr> errors(trials);
  const auto run_trial = [&](int t) {
    try {
      sim::SimConfig c = base;
      c.seed = ctx.seed + static_cast<std::uint64_t>(t);
      logs[t] = sim::run_scenario(sc.model, plan, sc.gains, sc.disturbances, c);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  const int workers = std::min(ctx.jobs, trials);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int t = w; t < trials; t += workers) run_trial(t);
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  json summary;
  summary["meta"] = meta_json(ctx, "simulate");
  summary["trials"] = json::array();
  std::vector<double> pos_means, ori_means;
  for (int t = 0; t < trials; ++t) {
    const auto& log = logs[t];
    const std::string name = trials == 1 ? "sim_log.csv" : "sim_log_trial" + std::to_string(t + 1) + ".csv";
    auto f = open_out(ctx, name);
    write_csv_meta(f, ctx, "simulate");
    f << "# trial_seed=" << ctx.seed + static_cast<std::uint64_t>(t) << '\n';
    sim::write_csv(f, log);

    std::vector<double> pe, oe;
    double peak_eb = 0.0;
    for (size_t k = 0; k < log.size(); ++k) {
      pe.push_back(1e3 * position_error(log.pose[k], log.pose_ref[k]));
      oe.push_back(deg(orientation_error(log.pose[k], log.pose_ref[k])));
      peak_eb = std::max(peak_eb, std::abs(deg(log.e_b[k])));
    }
    const auto ps = sim::stats(pe);
    const auto os = sim::stats(oe);
    pos_means.push_back(ps.mean);
    ori_means.push_back(os.mean);
    const auto stat_json = [](const sim::ErrorStats& s) {
      return json{{"mean", s.mean}, {"stddev", s.stddev}, {"max", s.max}};
    };
    json tj = {{"trial", t + 1},
               {"seed", ctx.seed + static_cast<std::uint64_t>(t)},
               {"position_error_mm", stat_json(ps)},
               {"orientation_error_deg", stat_json(os)},
               {"peak_roll_error_deg", peak_eb},
               {"saturation_events", log.saturation_events},
               {"correction_events", log.correction_events},
               {"loss_envelope_deg", deg(log.loss_envelope)},
               {"balance_lost", log.balance_loss_time.has_value()}};
    if (log.balance_loss_time) tj["balance_loss_time_s"] = *log.balance_loss_time;
    if (sc.mission) {
      const auto he = sim::hold_errors(log, 10.0);
      std::vector<double> hp, ho;
      for (double v : he.position) hp.push_back(1e3 * v);
      for (double v : he.orientation) ho.push_back(deg(v));
      tj["hold_position_error_mm"] = stat_json(sim::stats(hp));
      tj["hold_orientation_error_deg"] = stat_json(sim::stats(ho));
    }
    summary["trials"].push_back(tj);
    out << "trial " << t + 1 << ": position error mean " << ps.mean << " mm (sd " << ps.stddev
        << "), orientation error mean " << os.mean << " deg (sd " << os.stddev
        << "), peak roll error " << peak_eb << " deg"
        << (log.balance_loss_time ? ", BALANCE LOST at " + std::to_string(*log.balance_loss_time) + " s"
                                  : "")
        << '\n';
  }
  const auto pm = sim::stats(pos_means);
  const auto om = sim::stats(ori_means);
  summary["aggregate"] = {{"position_error_mm", {{"mean", pm.mean}, {"stddev", pm.stddev}}},
                          {"orientation_error_deg", {{"mean", om.mean}, {"stddev", om.stddev}}}};
  write_json(ctx, "sim_summary.json", summary);
  return kOk;
}

std::vector<CompareRow> compare_dp(const CompareDpSettings& s, const PlannerOptions& planner) {
  const RobotModel& model = s.model;
  const PlannerWeights w = default_weights(model.dof());
  const MotionLimits l = default_limits(model);
  std::vector<CompareRow> rows;
  for (int ns : s.samples) {
    CompareRow row;
    row.samples = ns;
    PlannerOptions o = planner;
    o.degree = s.degree;
    o.samples = ns;
    const auto seg = plan_segment(model, s.q_start, s.q_end, 0.0, s.duration, w, l, o);
    row.bezier_cost = seg.cost.total();
    row.bezier_time = seg.wall_time;
    row.bezier_audit = seg.audit.worst();
    DpGrid g;
    g.time_steps = ns;
    g.cells_per_step = s.cells_per_step;
    g.max_states = 1'000'000'000;
    const auto dp = dp_reference(model, s.q_start, s.q_end, 0.0, s.duration, w, l, g);
    row.dp_cost = dp.cost;
    row.dp_time = dp.wall_time;
    row.dp_states = dp.states;
    rows.push_back(row);
  }
  return rows;
}

int cmd_compare_dp(const Context& ctx, std::ostream& out) {
  const auto rows = compare_dp(ctx.scenario.compare_dp, ctx.scenario.planner);
  auto f = open_out(ctx, "compare_dp.csv");
  write_csv_meta(f, ctx, "compare-dp");
  f << "N_s,bezier_cost,bezier_time_s,bezier_audit_worst,dp_cost,dp_time_s,dp_states,time_ratio\n";
  for (const auto& r : rows) {
    f << r.samples << ',' << r.bezier_cost << ',' << r.bezier_time << ',' << r.bezier_audit << ','
      << r.dp_cost << ',' << r.dp_time << ',' << r.dp_states << ',' << r.ratio() << '\n';
    out << "N_s = " << r.samples << ": Bezier cost " << r.bezier_cost << " in " << r.bezier_time
        << " s, DP cost " << r.dp_cost << " in " << r.dp_time << " s (" << r.dp_states
        << " grid points), time ratio " << r.ratio() << '\n';
  }
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Bikebot balance, planning and control toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config, out_dir = ".";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool quantized = false;
  app.add_option("--config", config, "Scenario JSON file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Random seed (overrides the config)");
  app.add_option("--jobs", jobs, "Worker threads for batch simulation")->check(CLI::PositiveNumber);
  app.add_flag("--quantized-imu", quantized, "Quantize the roll measurement to 0.1 deg");

  using Cmd = int (*)(const Context&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Cmd>> commands = {
      {"steer-sweep", "Steering sensitivity and balance torque surface", cmd_steer_sweep},
      {"capability", "Maximum roll capability per balance strategy", cmd_capability},
      {"plan", "Pose sequence planning (BPIK + Bezier segments)", cmd_plan},
      {"simulate", "Closed-loop simulation of a plan or a balance hold", cmd_simulate},
      {"compare-dp", "Bezier planner vs dynamic programming on the toy model", cmd_compare_dp},
  };
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    // Options are accepted after the subcommand too.
    sub->fallthrough();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  try {
    const Context ctx = make_context(config, out_dir, seed, jobs, quantized);
    for (const auto& [name, help, fn] : commands) {
      if (app.got_subcommand(name)) return fn(ctx, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DimensionMismatch& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const InfeasibleSegment& e) {
    std::cerr << "infeasible segment: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const SimulationBlowUp& e) {
    std::cerr << e.what() << '\n';
    return kBlowUp;
  }
  return kConfigError;
}

}  // namespace bikebot::cli
