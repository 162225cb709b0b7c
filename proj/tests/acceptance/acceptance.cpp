// Acceptance suite: one PASS/FAIL line per criterion, then a completion line.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "../support/oracles.hpp"
#include "../support/scenarios.hpp"
#include "bikebot/bem.hpp"
#include "bikebot/cli.hpp"
#include "bikebot/control.hpp"
#include "bikebot/dynamics.hpp"
#include "bikebot/kinematics.hpp"
#include "bikebot/planner.hpp"
#include "bikebot/sim.hpp"
#include "bikebot/steering.hpp"
#include "bikebot/units.hpp"

using namespace bikebot;
using units::deg;
using units::rad;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records one sub-check; the criterion passes only if all do.
  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
  }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// -- 1 -----------------------------------------------------------------------
Outcome steering_sensitivity() {
  Outcome o;
  const auto t0 = Clock::now();
  const BikebotParams p = default_bikebot_params();
  const double s90 = steering::per_degree(steering::steering_sensitivity(rad(90.0), p));
  o.check(std::abs(s90 - 0.87) <= 0.01, "S_tau(90) = " + fmt(s90, 6) + " N m/deg (0.87 +- 0.01)");
  const double s0 = steering::steering_sensitivity(0.0, p);
  o.check(s0 == 0.0, "S_tau(0) = " + fmt(s0));
  double best = -1.0, best_at = 0.0;
  for (int i = 0; i <= 1800; ++i) {
    const double phi0 = 0.1 * i;
    const double s = steering::steering_sensitivity(rad(phi0), p);
    if (s > best) {
      best = s;
      best_at = phi0;
    }
  }
  o.check(std::abs(best_at - 90.0) <= 0.5, "argmax " + fmt(best_at) + " deg");
  const double t = seconds_since(t0);
  o.check(t < 1.0, "runtime " + fmt(t, 3) + " s");
  return o;
}

// -- 2 -----------------------------------------------------------------------
Outcome torque_model() {
  Outcome o;
  const BikebotParams p = default_bikebot_params();
  const double M = default_model().total_mass();
  double rel = 0.0, oracle = 0.0, odd = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double d = rad(-50.0 + 100.0 * (i + 0.5) / 100.0);
    const double general = steering::balance_torque(d, rad(90.0), 0.0, M, p);
    const double closed = steering::balance_torque_90(d, M, p);
    const double geo = testing::contact_point_torque(d, rad(90.0), M, p);
    rel = std::max(rel, std::abs(general - closed) / std::max(1e-12, std::abs(closed)));
    oracle = std::max({oracle, std::abs(general - geo) / std::max(1.0, std::abs(geo)),
                       std::abs(closed - geo) / std::max(1.0, std::abs(geo))});
    odd = std::max(odd, std::abs(steering::balance_torque_90(d, M, p) +
                                 steering::balance_torque_90(-d, M, p)));
  }
  o.check(rel <= 1e-9, "general vs closed form " + fmt(rel, 3));
  o.check(oracle <= 1e-6, "vs contact-point oracle " + fmt(oracle, 3));
  o.check(steering::balance_torque_90(0.0, M, p) == 0.0, "tau_b90(0) = 0");
  o.check(odd <= 1e-12, "odd symmetry over 100 points " + fmt(odd, 3));
  return o;
}

// -- 3 -----------------------------------------------------------------------
Outcome dynamics_properties() {
  Outcome o;
  const auto t0 = Clock::now();
  const RobotModel model = default_model();
  std::mt19937_64 rng(3);
  double sym = 0.0, min_eig = 1e300, skew = 0.0, grav = 0.0, jac = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Vec q = testing::random_configuration(model, rng);
    const Vec qd = testing::random_velocity(model.dof(), rng);
    const Mat D = mass_matrix(model, q);
    sym = std::max(sym, (D - D.transpose()).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (D + D.transpose()))
                                    .eigenvalues()
                                    .minCoeff());
    const Mat N = testing::mass_matrix_rate(model, q, qd) - 2.0 * coriolis_matrix(model, q, qd);
    skew = std::max(skew, (N + N.transpose()).cwiseAbs().rowwise().sum().maxCoeff());
    const Vec G = gravity_vector(model, q);
    const Vec Gfd = testing::potential_gradient(model, q);
    grav = std::max(grav, (G - Gfd).cwiseAbs().maxCoeff() / std::max(1.0, Gfd.cwiseAbs().maxCoeff()));
    jac = std::max(jac, testing::worst_jacobian_error(model, q));
  }
  o.check(sym <= 1e-9, "D symmetry " + fmt(sym, 3));
  o.check(min_eig > 0.0, "min eig(D) " + fmt(min_eig, 3));
  o.check(skew <= 1e-6, "|(Ddot-2C)+(Ddot-2C)'|inf " + fmt(skew, 3));
  o.check(grav <= 1e-4, "G vs dU/dq rel " + fmt(grav, 3));
  o.check(jac <= 1e-5, "Jacobians vs FD " + fmt(jac, 3));
  const double t = seconds_since(t0);
  o.check(t < 60.0, "runtime " + fmt(t, 3) + " s");
  return o;
}

// -- 4 -----------------------------------------------------------------------
Outcome bem_checks() {
  Outcome o;
  const RobotModel model = default_model();
  const auto eq = bem::solve_equilibrium_roll(model, model.home, 0.0);
  o.check(eq.found && std::abs(eq.point.q[0]) <= 1e-9,
          "symmetric roll " + fmt(eq.found ? eq.point.q[0] : NAN, 3) + " rad");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ud(-rad(15.0), rad(15.0));
  double worst = 0.0;
  int found = 0;
  for (int k = 0; k < 200; ++k) {
    const Vec q = testing::random_configuration(model, rng);
    const auto r = bem::solve_equilibrium_roll(model, q.tail(model.num_links()), ud(rng));
    if (!r.found) continue;
    ++found;
    worst = std::max({worst, std::abs(r.point.residual),
                      std::abs(bem::bem_residual(model, r.point.q, r.point.delta))});
  }
  o.check(worst <= 1e-8, "max residual " + fmt(worst, 3) + " N m over " + std::to_string(found) + " points");
  const double one = deg(bem::max_roll_capability(model, bem::Strategy::OneWheel).phi_b_max);
  const double two = deg(bem::max_roll_capability(model, bem::Strategy::TwoWheel).phi_b_max);
  const double arm = deg(bem::max_roll_capability(model, bem::Strategy::TwoWheelArm).phi_b_max);
  o.check(one < two && two < arm,
          "ordering " + fmt(one) + " < " + fmt(two) + " < " + fmt(arm) + " deg");
  o.check(std::abs(two - 5.6) <= 1.5, "two-wheel " + fmt(two) + " deg (5.6 +- 1.5)");
  o.check(std::abs(arm - 11.6) <= 2.5, "arm-assisted " + fmt(arm) + " deg (11.6 +- 2.5)");
  return o;
}

// -- 5 -----------------------------------------------------------------------
Outcome bpik_round_trip() {
  Outcome o;
  const auto t0 = Clock::now();
  const RobotModel model = default_model();
  const PlannerWeights w = default_weights(model.dof());
  const MotionLimits l = default_limits(model);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> joint(-rad(30.0), rad(30.0));
  std::uniform_real_distribution<double> steer(-rad(10.0), rad(10.0));
  std::normal_distribution<double> perturb(0.0, rad(3.0));
  double worst_pos = 0.0, worst_ori = 0.0, worst_balance = -1e300;
  int generated = 0;
  while (generated < 50) {
    Vec theta = model.home;
    for (int i = 0; i < theta.size(); ++i) theta[i] += joint(rng);
    theta = model.bounds.clamp((Vec(model.dof()) << 0.0, theta).finished()).tail(theta.size());
    const auto eq = bem::solve_equilibrium_roll(model, theta, steer(rng));
    if (!eq.found || w.lambda4 * std::abs(eq.point.tau_b) > l.tau_b_max) continue;
    ++generated;
    const Pose target = forward_kinematics(model, eq.point.q).pose;
    // Continuation start: the previous pose's solution lies near the target.
    Vec prev = eq.point.q;
    for (int i = 1; i < prev.size(); ++i) prev[i] += perturb(rng);
    prev = model.bounds.clamp(prev);
    PlannerOptions opt;
    opt.seed = static_cast<std::uint64_t>(generated);
    const BpikResult r = bpik(model, target, prev, gravity_torque_roll(model, prev), w, l, opt);
    worst_pos = std::max(worst_pos, 1e3 * position_error(target, r.attained));
    worst_ori = std::max(worst_ori, deg(orientation_error(target, r.attained)));
    worst_balance = std::max(worst_balance, w.lambda4 * std::abs(gravity_torque_roll(model, r.q)) - l.tau_b_max);
  }
  o.check(worst_pos <= 1.0, "worst position " + fmt(worst_pos, 3) + " mm");
  o.check(worst_ori <= 0.1, "worst orientation " + fmt(worst_ori, 3) + " deg");
  o.check(worst_balance <= 1e-9, "max lambda4|G_b| - tau_b_max " + fmt(worst_balance, 3) + " N m");
  const double t = seconds_since(t0);
  o.check(t < 300.0, "runtime " + fmt(t, 3) + " s");
  return o;
}

// -- 6, 7 --------------------------------------------------------------------
struct DpComparison {
  std::vector<cli::CompareRow> rows;
  SegmentResult segment;  ///< the N_s = 50 Bezier segment
  cli::CompareDpSettings settings;
};

DpComparison run_comparison() {
  DpComparison c;
  c.settings = cli::parse_scenario(io::json::object()).compare_dp;
  PlannerOptions o;
  c.rows = cli::compare_dp(c.settings, o);
  const RobotModel& m = c.settings.model;
  o.degree = c.settings.degree;
  o.samples = 50;
  c.segment = plan_segment(m, c.settings.q_start, c.settings.q_end, 0.0, c.settings.duration,
                           default_weights(m.dof()), default_limits(m), o);
  return c;
}

Outcome trajectory_optimality(const DpComparison& c) {
  Outcome o;
  for (const auto& r : c.rows) {
    o.check(r.bezier_cost <= 1.05 * r.dp_cost, "N_s=" + std::to_string(r.samples) + " Bezier " +
                                                   fmt(r.bezier_cost) + " vs DP " + fmt(r.dp_cost));
  }
  const auto& tr = c.segment.trajectory;
  const BezierSample a = bezier_eval_s(tr, 0.0);
  const BezierSample b = bezier_eval_s(tr, 1.0);
  const double bq = std::max((a.q - c.settings.q_start).cwiseAbs().maxCoeff(),
                             (b.q - c.settings.q_end).cwiseAbs().maxCoeff());
  const double bd = std::max({a.qdot.cwiseAbs().maxCoeff(), b.qdot.cwiseAbs().maxCoeff(),
                              a.qddot.cwiseAbs().maxCoeff(), b.qddot.cwiseAbs().maxCoeff()});
  o.check(bq <= 1e-12 && bd <= 1e-12, "boundary q " + fmt(bq, 3) + ", rates " + fmt(bd, 3));
  o.check(c.segment.at_samples.worst() <= 0.0, "worst at 50 samples " + fmt(c.segment.at_samples.worst(), 3));
  o.check(c.segment.audit.worst() <= 1e-4, "worst on audit grid " + fmt(c.segment.audit.worst(), 3));
  return o;
}

Outcome planner_timing(const DpComparison& c) {
  Outcome o;
  double prev = 0.0;
  for (size_t k = 0; k < c.rows.size(); ++k) {
    const auto& r = c.rows[k];
    const double ratio = r.ratio();
    const std::string what = "N_s=" + std::to_string(r.samples) + " Bezier " + fmt(r.bezier_time, 3) +
                             " s, DP " + fmt(r.dp_time, 3) + " s, ratio " + fmt(ratio, 3);
    if (k == 0) {
      o.check(ratio >= 10.0, what);
    } else {
      o.check(ratio > prev, what);
    }
    prev = ratio;
  }
  return o;
}

// -- 8 -----------------------------------------------------------------------
Outcome closed_loop_balance() {
  Outcome o;
  const control::BalanceGains gains{8.5, 2.0};
  auto s = testing::roll_recovery(4.0, 20.0);
  sim::ControlSetup setup{gains, control::default_arm_gains(0)};
  const sim::SimLog log = sim::run_scenario(s.model, s.plan, setup, {}, s.config);
  double settle = -1.0;
  for (size_t k = log.size(); k-- > 0;) {
    if (std::abs(log.e_b[k]) >= rad(0.1)) break;
    settle = log.time[k];
  }
  o.check(!log.balance_loss_time && settle >= 0.0 && settle <= 10.0,
          "|e_b| < 0.1 deg from t = " + fmt(settle, 3) + " s");
  std::vector<double> t, e;
  for (size_t k = 0; k < log.size() && log.time[k] <= 10.0; ++k) {
    t.push_back(log.time[k]);
    e.push_back(log.e_b[k]);
  }
  const double rate = control::fit_decay_rate(t, e, rad(0.01));
  o.check(rate >= 0.9 * gains.k_d / 2.0, "decay rate " + fmt(rate, 3) + " /s (>= " +
                                             fmt(0.9 * gains.k_d / 2.0, 3) + ")");

  // Quantized roll sensor: the steering keeps switching in the final 10 s
  // with a bounded amplitude while the platform stays up.
  auto q = s;
  q.config.sensor_quantization = rad(0.1);
  const sim::SimLog ql = sim::run_scenario(q.model, q.plan, setup, {}, q.config);
  int reversals = 0;
  double dmin = 1e300, dmax = -1e300, roll_peak = 0.0;
  double last_slope = 0.0;
  for (size_t k = 1; k < ql.size(); ++k) {
    if (ql.time[k] < 10.0) continue;
    const double slope = ql.delta[k] - ql.delta[k - 1];
    if (std::abs(slope) > 1e-12) {
      if (last_slope != 0.0 && slope * last_slope < 0.0) ++reversals;
      last_slope = slope;
    }
    dmin = std::min(dmin, ql.delta[k]);
    dmax = std::max(dmax, ql.delta[k]);
    roll_peak = std::max(roll_peak, std::abs(ql.q[k][0]));
  }
  const double p2p = deg(dmax - dmin);
  o.check(!ql.balance_loss_time && reversals >= 20 && p2p > 0.0 && p2p <= 10.0 && deg(roll_peak) <= 1.0,
          "quantized: " + std::to_string(reversals) + " steering reversals in 10 s, peak-to-peak " +
              fmt(p2p, 3) + " deg, roll within " + fmt(deg(roll_peak), 3) + " deg");
  return o;
}

// -- 9 -----------------------------------------------------------------------
struct MissionErrors {
  double position_mean = 0.0, position_max = 0.0;  // mm
  double orientation_mean = 0.0, orientation_max = 0.0;  // deg
};

// Hold-phase error against the commanded target poses over the last `window`
// seconds of each hold.
MissionErrors hold_phase_errors(const sim::SimLog& log, const std::vector<Pose>& targets, double window) {
  std::vector<double> pe, oe;
  size_t i = 0;
  while (i < log.size()) {
    size_t j = i;
    while (j < log.size() && log.phase[j] == log.phase[i]) ++j;
    const int ph = log.phase[i];
    if (ph >= 0 && ph < static_cast<int>(targets.size())) {
      for (size_t k = i; k < j; ++k) {
        if (log.time[k] < log.time[j - 1] - window) continue;
        pe.push_back(1e3 * position_error(targets[ph], log.pose[k]));
        oe.push_back(deg(orientation_error(targets[ph], log.pose[k])));
      }
    }
    i = j;
  }
  const auto ps = sim::stats(pe), os = sim::stats(oe);
  return {ps.mean, ps.max, os.mean, os.max};
}

Outcome mission_reproduction() {
  Outcome o;
  const RobotModel model = default_model();
  const auto poses = testing::mission_poses(model);
  const PlannerWeights w = default_weights(model.dof());
  const MotionLimits l = default_limits(model);
  const MissionTiming timing{15.0, 20.0};
  const PlanResult plan = plan_mission(model, poses, timing, w, l);
  sim::ControlSetup gains{control::BalanceGains{}, control::default_arm_gains(model.num_links())};
  sim::SimConfig cfg;

  const sim::SimLog nominal = sim::run_scenario(model, plan, gains, {}, cfg);
  const MissionErrors e = hold_phase_errors(nominal, poses, 10.0);
  o.check(!nominal.balance_loss_time && e.position_mean <= 5.0 && e.orientation_mean <= 0.3,
          "hold errors mean " + fmt(e.position_mean, 3) + " mm / " + fmt(e.orientation_mean, 3) +
              " deg (max " + fmt(e.position_max, 3) + " mm / " + fmt(e.orientation_max, 3) + " deg)");

  // Roll pulse during the first transition, with and without velocity correction.
  const sim::Disturbance pulse{20.0, 0.2, 4.0};
  const auto run_error = [&](bool correction, double& peak_eb) {
    sim::SimConfig c = cfg;
    c.velocity_correction = correction;
    const sim::SimLog log = sim::run_scenario(model, plan, gains, {pulse}, c);
    std::vector<double> pe, oe;
    peak_eb = 0.0;
    for (size_t k = 0; k < log.size(); ++k) {
      pe.push_back(1e3 * position_error(log.pose[k], log.pose_ref[k]));
      oe.push_back(deg(orientation_error(log.pose[k], log.pose_ref[k])));
      peak_eb = std::max(peak_eb, std::abs(deg(log.e_b[k])));
    }
    return std::make_pair(sim::stats(pe), sim::stats(oe));
  };
  double peak_on = 0.0, peak_off = 0.0;
  const auto [pos_on, ori_on] = run_error(true, peak_on);
  const auto [pos_off, ori_off] = run_error(false, peak_off);
  o.check(pos_off.mean > pos_on.mean && ori_off.mean > ori_on.mean,
          "pulse peak e_b " + fmt(peak_on, 3) + " deg; correction off/on: position " +
              fmt(pos_off.mean, 4) + "/" + fmt(pos_on.mean, 4) + " mm, orientation " +
              fmt(ori_off.mean, 4) + "/" + fmt(ori_on.mean, 4) + " deg");

  PlannerOptions ablated;
  ablated.enforce_balance = false;
  bool lost_in_transition = false;
  std::string ablation = "ablated plan failed";
  try {
    const PlanResult ap = plan_mission(model, poses, timing, w, l, ablated);
    const sim::SimLog al = sim::run_scenario(model, ap, gains, {}, cfg);
    if (al.balance_loss_time) {
      const size_t k = al.size() - 1;
      lost_in_transition = al.phase[k] < 0;
      ablation = "ablated run lost balance at " + fmt(*al.balance_loss_time, 4) + " s (phase " +
                 std::to_string(al.phase[k]) + ")";
    } else {
      double worst = 0.0;
      for (const auto& seg : ap.segments) worst = std::max(worst, seg.audit.balance);
      ablation = "ablated run kept balance (worst planned balance row " + fmt(worst, 3) + " N m)";
    }
  } catch (const std::exception& ex) {
    ablation += std::string(": ") + ex.what();
  }
  o.check(lost_in_transition, ablation);
  return o;
}

// -- 10 ----------------------------------------------------------------------
std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  const auto base = std::filesystem::temp_directory_path() / "bikebot_acceptance_determinism";
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);
  const auto config = base / "scenario.json";
  {
    std::ofstream f(config);
    f << R"({"schema_version": 1, "seed": 11, "robot": "platform_only",
             "limits": {"delta_max_deg": 50, "delta_rate_max_deg_s": 200},
             "sim": {"initial_q_deg": [3.0], "hold_s": 5, "imu_noise_deg": 0.05, "trials": 3},
             "steer_sweep": {"phi0_step_deg": 5}})";
  }
  const auto run = [&](const std::string& dir, std::optional<std::uint64_t> seed) {
    const cli::Context ctx = cli::make_context(config.string(), (base / dir).string(), seed, 2, true);
    std::ostringstream sink;
    cli::cmd_steer_sweep(ctx, sink);
    cli::cmd_simulate(ctx, sink);
  };
  run("a", std::nullopt);
  run("b", std::nullopt);
  run("c", 12);
  int compared = 0, identical = 0;
  for (const auto& entry : std::filesystem::directory_iterator(base / "a")) {
    if (entry.path().extension() != ".csv") continue;
    ++compared;
    if (slurp(entry.path()) == slurp(base / "b" / entry.path().filename())) ++identical;
  }
  o.check(compared > 0 && identical == compared,
          std::to_string(identical) + "/" + std::to_string(compared) + " CSV files bitwise identical");
  const bool differs = slurp(base / "a" / "sim_log_trial1.csv") != slurp(base / "c" / "sim_log_trial1.csv");
  o.check(differs, "a different seed changes the noisy log");
  std::filesystem::remove_all(base);
  return o;
}

}  // namespace

int main() {
  std::cout << std::unitbuf;
  int failed = 0;
  const auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failed;
    std::printf("AC%-2d %s  %-28s %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
  };
  report(1, "steering sensitivity", steering_sensitivity);
  report(2, "torque model consistency", torque_model);
  report(3, "dynamics properties", dynamics_properties);
  report(4, "balance equilibrium manifold", bem_checks);
  report(5, "BPIK round trip", bpik_round_trip);
  DpComparison comparison;
  bool compared = true;
  try {
    comparison = run_comparison();
  } catch (const std::exception& e) {
    compared = false;
    std::cerr << "comparison failed: " << e.what() << '\n';
  }
  report(6, "trajectory optimality", [&] {
    if (!compared) throw std::runtime_error("comparison did not run");
    return trajectory_optimality(comparison);
  });
  report(7, "planner vs DP timing", [&] {
    if (!compared) throw std::runtime_error("comparison did not run");
    return planner_timing(comparison);
  });
  report(8, "closed-loop balance", closed_loop_balance);
  report(9, "mission reproduction", mission_reproduction);
  report(10, "determinism", determinism);
  std::printf("acceptance complete: %d of 10 criteria passed\n", 10 - failed);
  return failed;
}
