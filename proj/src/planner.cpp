#include "bikebot/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>

#include "bikebot/dynamics.hpp"
#include "bikebot/errors.hpp"
#include "bikebot/kinematics.hpp"
#include "bikebot/units.hpp"

namespace bikebot {

using units::rad;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

constexpr double kFeasibilitySlack = 1e-6;

}  // namespace

void PlannerWeights::validate(int dof) const {
  if (!(lambda1 > 0 && lambda2 > 0 && lambda3 > 0)) throw ConfigError("lambda1..3 must be > 0");
  if (!(lambda4 > 1)) throw ConfigError("lambda4 must be > 1");
  if (P.rows() != dof || P.cols() != dof) throw ConfigError("P must be (n+1) x (n+1)");
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw ConfigError("P must be symmetric");
  if (Eigen::LLT<Mat>(P).info() != Eigen::Success) throw ConfigError("P must be positive definite");
  if (W1.size() != dof || W2.size() != dof) throw ConfigError("W1 and W2 need n+1 entries");
  if ((W1.array() <= 0).any() || (W2.array() <= 0).any()) {
    throw ConfigError("W1 and W2 entries must be positive");
  }
  if (!(epsilon_pose > 0)) throw ConfigError("pose tolerance must be positive");
}

PlannerWeights default_weights(int dof) {
  PlannerWeights w;
  w.P = Mat::Identity(dof, dof);
  const double w1[] = {10, 5, 5, 5, 1, 1, 1};
  w.W1 = Vec::Ones(dof);
  for (int i = 0; i < std::min(dof, 7); ++i) w.W1[i] = w1[i];
  // The printed W2 has six entries for seven coordinates; pad with a trailing 1.
  w.W2 = Vec::Ones(dof);
  w.w2_padded = dof > 6;
  return w;
}

void MotionLimits::validate(int n) const {
  if (!(q_rate_max > 0 && q_acc_max > 0 && tau_b_max > 0)) {
    throw ConfigError("motion limits must be positive");
  }
  if (tau_theta_max.size() != n) throw ConfigError("tau_theta_max needs n entries");
  if ((tau_theta_max.array() <= 0).any()) throw ConfigError("joint torque limits must be positive");
  steering.validate();
}

double balance_torque_limit(const RobotModel& model, const steering::SteeringLimits& s) {
  return steering::max_balance_torque_90(s.delta_max, model.total_mass(), model.bike).torque;
}

MotionLimits default_limits(const RobotModel& model) {
  MotionLimits l;
  const int n = model.num_links();
  const double tau[] = {10, 15, 10, 5, 5, 5};
  l.tau_theta_max = Vec::Constant(n, 5.0);
  for (int i = 0; i < std::min(n, 6); ++i) l.tau_theta_max[i] = tau[i];
  l.tau_b_max = balance_torque_limit(model, l.steering);
  return l;
}

double ConstraintReport::worst() const {
  return std::max({rate_bound, balance, joint_torque, box, velocity, acceleration});
}

// ---------------------------------------------------------------------------
// BPIK

BpikResult bpik(const RobotModel& model, const Pose& target, const Vec& prev_q, double prev_gb,
                const PlannerWeights& weights, const MotionLimits& limits,
                const PlannerOptions& options, std::optional<double> local_roll,
                const std::vector<Vec>& extra_starts) {
  const int dof = model.dof();
  check_dimension(model, prev_q, "bpik prev_q");
  weights.validate(dof);
  const bool local = local_roll.has_value();
  const int nx = local ? dof - 1 : dof;
  const auto assemble = [&](const Vec& x) {
    if (!local) return x;
    Vec q(dof);
    q[0] = *local_roll;
    q.tail(dof - 1) = x;
    return q;
  };
  const auto reduce = [&](const Vec& q) { return local ? Vec(q.tail(dof - 1)) : q; };

  const auto cost = [&](const Vec& x) {
    const Vec q = assemble(x);
    const ChainFrames f = forward_kinematics(model, q);
    const auto e = pose_error_cm_deg(target, f.pose);
    const double dg = gravity_torque_roll(model, q) - prev_gb;
    const Vec dq = q - prev_q;
    return weights.lambda1 * e.squaredNorm() + weights.lambda2 * dg * dg +
           weights.lambda3 * dq.dot(weights.P * dq);
  };

  optim::NlpProblem p;
  p.n = nx;
  p.objective = cost;
  if (options.enforce_balance) {
    p.m_ineq = 2;
    p.ineq = [&](const Vec& x) {
      const double gb = weights.lambda4 * gravity_torque_roll(model, assemble(x));
      Vec g(2);
      g << gb - limits.tau_b_max, -gb - limits.tau_b_max;
      return g;
    };
    p.ineq_jacobian = [&](const Vec& x) {
      const Eigen::RowVectorXd jg = weights.lambda4 * gravity_gradient_exact(model, assemble(x));
      Mat J(2, nx);
      J.row(0) = local ? Eigen::RowVectorXd(jg.tail(nx)) : jg;
      J.row(1) = -J.row(0);
      return J;
    };
  }
  if (!model.bounds.empty()) {
    p.lb = reduce(model.bounds.lower);
    p.ub = reduce(model.bounds.upper);
  }

  std::vector<Vec> starts;
  starts.push_back(reduce(prev_q));
  for (const Vec& s : extra_starts) {
    check_dimension(model, s, "bpik start");
    starts.push_back(reduce(s));
  }
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, options.restart_sigma);
  for (int k = 1; k < options.restarts; ++k) {
    Vec s = reduce(prev_q);
    for (int i = 0; i < nx; ++i) s[i] += noise(rng);
    starts.push_back(s);
  }

  BpikResult best;
  bool have = false;
  double best_cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
  for (const Vec& s : starts) {
    const optim::SqpResult r = optim::solve_sqp(p, s, options.sqp);
    iterations += r.iterations;
    if (!r.feasible) continue;
    if (r.f < best_cost) {
      best_cost = r.f;
      best.q = assemble(r.x);
      have = true;
    }
  }
  if (!have) throw SolverFailure("bpik: no feasible configuration from any start");

  const ChainFrames f = forward_kinematics(model, best.q);
  best.cost = best_cost;
  best.attained = f.pose;
  best.pose_residual = pose_error_cm_deg(target, f.pose).norm();
  best.reached = best.pose_residual < weights.epsilon_pose;
  best.gravity_torque = gravity_torque_roll(model, best.q);
  const auto d = bem::steering_for_torque(model, best.gravity_torque, limits.steering.delta_max);
  best.on_manifold = d.has_value();
  best.delta = d.value_or(0.0);
  best.starts_tried = static_cast<int>(starts.size());
  best.iterations = iterations;
  return best;
}

// ---------------------------------------------------------------------------
// Segment planning

namespace {

struct SampleGrid {
  std::vector<double> s;
  std::vector<double> quad;  // trapezoid weights in time
  std::vector<BasisWeights> basis;
};

SampleGrid make_grid(int degree, int samples, double duration) {
  SampleGrid g;
  const int ns = std::max(1, samples);
  for (int j = 0; j < ns; ++j) {
    const double s = ns == 1 ? 0.0 : static_cast<double>(j) / (ns - 1);
    g.s.push_back(s);
    g.basis.push_back(basis_weights(degree, s, duration));
    double w = 0.0;
    if (ns > 1) {
      const double h = duration / (ns - 1);
      w = (j == 0 || j == ns - 1) ? 0.5 * h : h;
    }
    g.quad.push_back(w);
  }
  return g;
}

struct SampleState {
  Vec q, qd, qdd;
};

SampleState sample_state(const Mat& P, const BasisWeights& b) {
  return {P * b.w0, P * b.w1, P * b.w2};
}

double h_bound(const RobotModel& model, const MotionLimits& limits) {
  return steering::torque_rate_h_max(limits.steering.delta_max, model.total_mass(), model.bike)
             .value *
         limits.steering.delta_rate_max;
}

// Nonlinear per-sample constraint rows, all of the form value <= 0.
int rows_per_sample(const RobotModel& model, bool balance) {
  return (balance ? 4 : 0) + 2 * model.num_links();
}

void sample_rows(const RobotModel& model, const PlannerWeights& w, const MotionLimits& limits,
                 double hbound, bool balance, const SampleState& st, double* out) {
  int k = 0;
  if (balance) {
    const double jgq = gravity_gradient_exact(model, st.q).dot(st.qd);
    const double gb = w.lambda4 * gravity_torque_roll(model, st.q);
    out[k++] = jgq - hbound;
    out[k++] = -jgq - hbound;
    out[k++] = gb - limits.tau_b_max;
    out[k++] = -gb - limits.tau_b_max;
  }
  const int n = model.num_links();
  if (n > 0) {
    const Vec tau = inverse_dynamics(model, st.q, st.qd, st.qdd);
    for (int i = 0; i < n; ++i) {
      out[k++] = tau[i + 1] - limits.tau_theta_max[i];
      out[k++] = -tau[i + 1] - limits.tau_theta_max[i];
    }
  }
}

}  // namespace

CostBreakdown segment_cost(const RobotModel& model, const BezierTrajectory& traj,
                           const Vec& q_reference, const PlannerWeights& weights, int samples) {
  const SampleGrid grid = make_grid(traj.degree, samples, traj.duration());
  const double g0 = gravity_torque_roll(model, q_reference);
  CostBreakdown c;
  for (size_t j = 0; j < grid.s.size(); ++j) {
    const SampleState st = sample_state(traj.control_points, grid.basis[j]);
    const Vec e = st.q - q_reference;
    const double dg = gravity_torque_roll(model, st.q) - g0;
    c.tracking += grid.quad[j] * e.dot(weights.W1.cwiseProduct(e));
    c.velocity += grid.quad[j] * st.qd.dot(weights.W2.cwiseProduct(st.qd));
    c.balance += grid.quad[j] * dg * dg;
  }
  return c;
}

ConstraintReport segment_constraints(const RobotModel& model, const BezierTrajectory& traj,
                                     const PlannerWeights& weights, const MotionLimits& limits,
                                     int samples, bool enforce_balance) {
  const SampleGrid grid = make_grid(traj.degree, samples, traj.duration());
  const double hb = h_bound(model, limits);
  const int n = model.num_links();
  ConstraintReport r;
  r.rate_bound = r.balance = r.joint_torque = r.box = r.velocity = r.acceleration =
      -std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < grid.s.size(); ++j) {
    const SampleState st = sample_state(traj.control_points, grid.basis[j]);
    if (enforce_balance) {
      r.rate_bound =
          std::max(r.rate_bound, std::abs(gravity_gradient_exact(model, st.q).dot(st.qd)) - hb);
      r.balance = std::max(r.balance, weights.lambda4 * std::abs(gravity_torque_roll(model, st.q)) -
                                          limits.tau_b_max);
    }
    if (n > 0) {
      const Vec tau = inverse_dynamics(model, st.q, st.qd, st.qdd);
      r.joint_torque = std::max(
          r.joint_torque, (tau.tail(n).cwiseAbs() - limits.tau_theta_max).maxCoeff());
    }
    if (!model.bounds.empty()) {
      r.box = std::max(r.box, std::max((st.q - model.bounds.upper).maxCoeff(),
                                       (model.bounds.lower - st.q).maxCoeff()));
    }
    r.velocity = std::max(r.velocity, st.qd.cwiseAbs().maxCoeff() - limits.q_rate_max);
    r.acceleration = std::max(r.acceleration, st.qdd.cwiseAbs().maxCoeff() - limits.q_acc_max);
  }
  const auto fix = [](double& v) {
    if (!std::isfinite(v)) v = 0.0;
  };
  fix(r.rate_bound);
  fix(r.balance);
  fix(r.joint_torque);
  fix(r.box);
  return r;
}

SegmentResult plan_segment(const RobotModel& model, const Vec& q_start, const Vec& q_end, double t0,
                           double tf, const PlannerWeights& weights, const MotionLimits& limits,
                           const PlannerOptions& options,
                           const std::optional<BoundaryState>& start_state,
                           const std::optional<BoundaryState>& end_state) {
  const auto clock0 = std::chrono::steady_clock::now();
  const int d = model.dof();
  check_dimension(model, q_start, "plan_segment q_start");
  check_dimension(model, q_end, "plan_segment q_end");
  weights.validate(d);
  limits.validate(model.num_links());
  if (!(tf > t0)) throw ConfigError("plan_segment: tf must exceed t0");
  const int N = options.degree;
  if (N < 5) throw ConfigError("plan_segment: Bezier degree must be >= 5");
  const double T = tf - t0;

  // Duration check against the rate bounds along the straight-line motion.
  const Vec dq = q_end - q_start;
  if (dq.cwiseAbs().maxCoeff() > limits.q_rate_max * T) {
    std::ostringstream os;
    os << "segment needs " << units::deg(dq.cwiseAbs().maxCoeff()) << " deg in " << T
       << " s, rate bound allows " << units::deg(limits.q_rate_max * T) << " deg";
    throw InfeasibleSegment(os.str());
  }
  const double hb = h_bound(model, limits);
  const double g_start = gravity_torque_roll(model, q_start);
  if (options.enforce_balance && std::abs(gravity_torque_roll(model, q_end) - g_start) > hb * T) {
    throw InfeasibleSegment("segment gravity-torque change exceeds h_max * delta_rate_max * duration");
  }

  BezierTrajectory base;
  base.degree = N;
  base.t0 = t0;
  base.tf = tf;
  base.control_points = Mat::Zero(d, N + 1);
  const Vec zero = Vec::Zero(d);
  pin_boundary(base, q_start, start_state ? start_state->qdot : zero,
               start_state ? start_state->qddot : zero, q_end, end_state ? end_state->qdot : zero,
               end_state ? end_state->qddot : zero);
  const int F = N - 5;  // free control columns 3..N-3
  const int nx = F * d;

  const auto with_free = [&](const Vec& x) {
    Mat P = base.control_points;
    for (int j = 0; j < F; ++j) P.col(3 + j) = x.segment(j * d, d);
    return P;
  };

  const SampleGrid grid = make_grid(N, options.samples, T);
  const int ns = static_cast<int>(grid.s.size());
  const bool balance = options.enforce_balance;

  // Linear rows: box, velocity and acceleration at every sample.
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  const Mat P0 = with_free(Vec::Zero(nx));
  for (int j = 0; j < ns; ++j) {
    const BasisWeights& b = grid.basis[j];
    const SampleState fixed = sample_state(P0, b);
    for (int i = 0; i < d; ++i) {
      const auto add_pair = [&](const Vec& w, double offset, double upper, double lower) {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nx);
        for (int c = 0; c < F; ++c) r[c * d + i] = w[3 + c];
        if (r.cwiseAbs().maxCoeff() == 0.0) return;
        if (std::isfinite(upper)) {
          rows.push_back(r);
          rhs.push_back(upper - offset);
        }
        if (std::isfinite(lower)) {
          rows.push_back(-r);
          rhs.push_back(offset - lower);
        }
      };
      if (!model.bounds.empty()) {
        add_pair(b.w0, fixed.q[i], model.bounds.upper[i], model.bounds.lower[i]);
      }
      add_pair(b.w1, fixed.qd[i], limits.q_rate_max, -limits.q_rate_max);
      add_pair(b.w2, fixed.qdd[i], limits.q_acc_max, -limits.q_acc_max);
    }
  }

  optim::NlpProblem p;
  p.n = nx;
  p.A.resize(static_cast<int>(rows.size()), nx);
  p.b.resize(static_cast<int>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    p.A.row(static_cast<int>(k)) = rows[k];
    p.b[static_cast<int>(k)] = rhs[k];
  }
  p.objective = [&](const Vec& x) {
    const Mat P = with_free(x);
    double c = 0.0;
    for (int j = 0; j < ns; ++j) {
      if (grid.quad[j] == 0.0) continue;
      const SampleState st = sample_state(P, grid.basis[j]);
      const Vec e = st.q - q_start;
      const double dg = gravity_torque_roll(model, st.q) - g_start;
      c += grid.quad[j] * (e.dot(weights.W1.cwiseProduct(e)) +
                           st.qd.dot(weights.W2.cwiseProduct(st.qd)) + dg * dg);
    }
    return c;
  };
  p.gradient = [&](const Vec& x) {
    const Mat P = with_free(x);
    Vec g = Vec::Zero(nx);
    for (int j = 0; j < ns; ++j) {
      if (grid.quad[j] == 0.0) continue;
      const SampleState st = sample_state(P, grid.basis[j]);
      const Vec e = st.q - q_start;
      const double dg = gravity_torque_roll(model, st.q) - g_start;
      const Vec dLdq = 2.0 * weights.W1.cwiseProduct(e) +
                       2.0 * dg * gravity_gradient_exact(model, st.q).transpose();
      const Vec dLdv = 2.0 * weights.W2.cwiseProduct(st.qd);
      for (int c = 0; c < F; ++c) {
        g.segment(c * d, d) +=
            grid.quad[j] * (grid.basis[j].w0[3 + c] * dLdq + grid.basis[j].w1[3 + c] * dLdv);
      }
    }
    return g;
  };
  const int rps = rows_per_sample(model, balance);
  p.m_ineq = rps * ns;
  if (p.m_ineq > 0) {
    p.ineq = [&](const Vec& x) {
      const Mat P = with_free(x);
      Vec g(p.m_ineq);
      for (int j = 0; j < ns; ++j) {
        sample_rows(model, weights, limits, hb, balance, sample_state(P, grid.basis[j]),
                    g.data() + j * rps);
      }
      return g;
    };
  }

  // Starts: the straight-line guess, then seeded perturbations of it.
  std::vector<Vec> starts;
  {
    Vec x0(nx);
    for (int c = 0; c < F; ++c) {
      const double frac = static_cast<double>(3 + c) / N;
      x0.segment(c * d, d) = q_start + frac * (q_end - q_start);
    }
    starts.push_back(x0);
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, options.restart_sigma);
    for (int k = 1; k < options.restarts; ++k) {
      Vec s = x0;
      for (int i = 0; i < nx; ++i) s[i] += noise(rng);
      starts.push_back(s);
    }
  }

  SegmentResult out;
  out.trajectory = base;
  double best = std::numeric_limits<double>::infinity();
  bool have = false;
  for (const Vec& s : starts) {
    if (nx == 0) break;
    const optim::SqpResult r = optim::solve_sqp(p, s, options.sqp);
    out.iterations += r.iterations;
    ++out.starts_tried;
    if (!r.feasible) continue;
    if (r.f < best) {
      best = r.f;
      out.trajectory.control_points = with_free(r.x);
      have = true;
    }
  }
  if (nx == 0) have = optim::max_violation(p, Vec()) <= options.sqp.tol_feasibility;
  if (!have) throw SolverFailure("plan_segment: no feasible trajectory from any start");

  out.cost = segment_cost(model, out.trajectory, q_start, weights, options.samples);
  out.at_samples = segment_constraints(model, out.trajectory, weights, limits, options.samples,
                                       balance);
  const int audit_n = std::max(2, options.samples * options.audit_factor);
  out.audit = segment_constraints(model, out.trajectory, weights, limits, audit_n, balance);
  out.feasible = out.at_samples.worst() <= kFeasibilitySlack;
  out.wall_time = seconds_since(clock0);
  return out;
}

// ---------------------------------------------------------------------------
// Mission

std::vector<Vec> PlanResult::q_star() const {
  std::vector<Vec> out;
  for (const auto& p : poses) out.push_back(p.q);
  return out;
}

double PlanResult::duration() const {
  const auto n = static_cast<double>(poses.size());
  return n * timing.hold + std::max(0.0, n - 1.0) * timing.transition;
}

BezierSample PlanResult::reference(double t) const {
  const auto hold_at = [&](const Vec& q) {
    return BezierSample{q, Vec::Zero(q.size()), Vec::Zero(q.size())};
  };
  if (poses.empty()) return {};
  for (size_t k = 0; k < segments.size(); ++k) {
    const auto& tr = segments[k].trajectory;
    if (t < tr.t0) return hold_at(poses[k].q);
    if (t <= tr.tf) return bezier_eval(tr, t);
  }
  return hold_at(poses.back().q);
}

PlanResult plan_mission(const RobotModel& model, const std::vector<Pose>& poses,
                        const MissionTiming& timing, const PlannerWeights& weights,
                        const MotionLimits& limits, const PlannerOptions& options,
                        const std::vector<Vec>& initial_guesses) {
  const auto clock0 = std::chrono::steady_clock::now();
  if (poses.empty()) throw ConfigError("plan_mission needs at least one pose");
  PlanResult result;
  result.timing = timing;
  const int dof = model.dof();

  Vec prev = Vec::Zero(dof);
  double prev_gb = 0.0;
  for (size_t k = 0; k < poses.size(); ++k) {
    std::vector<Vec> extra;
    if (k < initial_guesses.size()) extra.push_back(initial_guesses[k]);
    PoseSolve ps;
    BpikResult r;
    if (k == 0) {
      r = bpik(model, poses[k], prev, prev_gb, weights, limits, options, std::nullopt, extra);
      ps.local = false;
    } else {
      bool local_ok = true;
      try {
        r = bpik(model, poses[k], prev, prev_gb, weights, limits, options, prev[0], extra);
      } catch (const SolverFailure&) {
        local_ok = false;
      }
      if (!local_ok || r.pose_residual >= weights.epsilon_pose) {
        std::vector<Vec> more = extra;
        if (local_ok) more.push_back(r.q);
        r = bpik(model, poses[k], prev, prev_gb, weights, limits, options, std::nullopt, more);
        ps.local = false;
        ps.global_resolve = true;
      }
    }
    ps.q = r.q;
    ps.attained = r.attained;
    ps.pose_residual = r.pose_residual;
    ps.reached = r.reached;
    result.poses.push_back(ps);
    prev = r.q;
    prev_gb = r.gravity_torque;
  }

  for (size_t k = 0; k + 1 < result.poses.size(); ++k) {
    const double t0 = timing.hold * static_cast<double>(k + 1) +
                      timing.transition * static_cast<double>(k);
    result.segment_start.push_back(t0);
    try {
      result.segments.push_back(plan_segment(model, result.poses[k].q, result.poses[k + 1].q, t0,
                                             t0 + timing.transition, weights, limits, options));
    } catch (const InfeasibleSegment& e) {
      throw InfeasibleSegment("segment " + std::to_string(k + 1) + ": " + e.what());
    } catch (const SolverFailure& e) {
      throw SolverFailure("segment " + std::to_string(k + 1) + ": " + e.what());
    }
  }
  result.wall_time = seconds_since(clock0);
  return result;
}

// ---------------------------------------------------------------------------
// DP oracle

DpResult dp_reference(const RobotModel& model, const Vec& q_start, const Vec& q_end, double t0,
                      double tf, const PlannerWeights& weights, const MotionLimits& limits,
                      const DpGrid& grid) {
  const auto clock0 = std::chrono::steady_clock::now();
  const int d = model.dof();
  check_dimension(model, q_start, "dp_reference q_start");
  check_dimension(model, q_end, "dp_reference q_end");
  if (!(tf > t0)) throw ConfigError("dp_reference: tf must exceed t0");
  const int K = std::max(1, grid.time_steps);
  DpResult out;
  if (K == 1) {
    out.q = {q_start};
    out.cost = 0.0;
    out.feasible = (q_start - q_end).cwiseAbs().maxCoeff() == 0.0;
    out.states = 1;
    out.wall_time = seconds_since(clock0);
    return out;
  }
  const double dt = (tf - t0) / (K - 1);
  const double hb = h_bound(model, limits);
  const Eigen::RowVectorXd jg_start = gravity_gradient_exact(model, q_start);
  const Eigen::RowVectorXd jg_end = gravity_gradient_exact(model, q_end);

  // Per-coordinate axis aligned so both endpoints are grid points, padded on both sides.
  std::vector<double> origin(d), step(d);
  std::vector<int> count(d), reach(d), start_idx(d), end_idx(d);
  std::size_t states = 1;
  for (int i = 0; i < d; ++i) {
    // Coordinates throttled by the J_G bound get a proportionally finer axis.
    double rate = limits.q_rate_max;
    const double jmax = std::max(std::abs(jg_start[i]), std::abs(jg_end[i]));
    if (jmax > 0) rate = std::min(rate, hb / jmax);
    const double base = grid.resolution > 0
                            ? grid.resolution
                            : rate * dt / std::max(1, grid.cells_per_step);
    const double span = q_end[i] - q_start[i];
    const int cells = std::max(1, static_cast<int>(std::ceil(std::abs(span) / base - 1e-9)));
    step[i] = std::abs(span) > 0 ? std::abs(span) / cells : base;
    const int pad = 2 + cells / 4;
    const double lo = std::min(q_start[i], q_end[i]);
    origin[i] = lo - pad * step[i];
    count[i] = (std::abs(span) > 0 ? cells : 0) + 2 * pad + 1;
    reach[i] = static_cast<int>(std::floor(limits.q_rate_max * dt / step[i] + 1e-9));
    start_idx[i] = static_cast<int>(std::lround((q_start[i] - origin[i]) / step[i]));
    end_idx[i] = static_cast<int>(std::lround((q_end[i] - origin[i]) / step[i]));
    states *= static_cast<std::size_t>(count[i]);
  }
  if (states * static_cast<std::size_t>(K) > grid.max_states) {
    std::ostringstream os;
    os << "dp_reference: grid of " << states << " states x " << K << " nodes exceeds guard "
       << grid.max_states;
    throw ConfigError(os.str());
  }
  out.states = states;

  const auto flat = [&](const std::vector<int>& idx) {
    std::size_t f = 0;
    for (int i = d - 1; i >= 0; --i) f = f * count[i] + idx[i];
    return f;
  };
  const auto unflat = [&](std::size_t f, std::vector<int>& idx) {
    for (int i = 0; i < d; ++i) {
      idx[i] = static_cast<int>(f % count[i]);
      f /= count[i];
    }
  };

  // Per-state data: position, running-cost part that depends on q only, J_G, balance flag.
  const double g0 = gravity_torque_roll(model, q_start);
  std::vector<Vec> pos(states);
  std::vector<double> pot(states);
  std::vector<Eigen::RowVectorXd> jg(states);
  std::vector<char> ok(states);
  std::vector<int> idx(d);
  for (std::size_t s = 0; s < states; ++s) {
    unflat(s, idx);
    Vec q(d);
    for (int i = 0; i < d; ++i) q[i] = origin[i] + idx[i] * step[i];
    pos[s] = q;
    const Vec e = q - q_start;
    const double gb = gravity_torque_roll(model, q);
    pot[s] = e.dot(weights.W1.cwiseProduct(e)) + (gb - g0) * (gb - g0);
    jg[s] = gravity_gradient_exact(model, q);
    ok[s] = (weights.lambda4 * std::abs(gb) <= limits.tau_b_max) &&
            (model.bounds.empty() || model.bounds.contains(q));
  }
  const std::size_t s_start = flat(start_idx), s_end = flat(end_idx);
  pos[s_start] = q_start;
  pos[s_end] = q_end;

  // Neighbour offsets within the rate bound.
  std::vector<std::vector<int>> offsets;
  {
    std::vector<int> o(d);
    std::function<void(int)> rec = [&](int i) {
      if (i == d) {
        offsets.push_back(o);
        return;
      }
      for (int k = -reach[i]; k <= reach[i]; ++k) {
        o[i] = k;
        rec(i + 1);
      }
    };
    rec(0);
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> value(states, inf), next(states);
  std::vector<std::vector<std::int32_t>> parent(K, std::vector<std::int32_t>(states, -1));
  value[s_start] = 0.0;
  const bool rest = K >= 4;
  // Node k is pinned to the start for k <= 1 and to the end for k >= K-2 when resting.
  const auto allowed = [&](int k, std::size_t s) {
    if (k == 0 || (rest && k == 1)) return s == s_start;
    if (k == K - 1 || (rest && k == K - 2)) return s == s_end;
    return ok[s] != 0;
  };

  std::vector<int> from(d), to(d);
  for (int k = 1; k < K; ++k) {
    std::fill(next.begin(), next.end(), inf);
    for (std::size_t s = 0; s < states; ++s) {
      if (!allowed(k, s)) continue;
      unflat(s, to);
      double best = inf;
      std::int32_t arg = -1;
      for (const auto& o : offsets) {
        bool inside = true;
        for (int i = 0; i < d; ++i) {
          from[i] = to[i] - o[i];
          if (from[i] < 0 || from[i] >= count[i]) {
            inside = false;
            break;
          }
        }
        if (!inside) continue;
        const std::size_t p = flat(from);
        if (value[p] == inf) continue;
        const Vec v = (pos[s] - pos[p]) / dt;
        if (v.cwiseAbs().maxCoeff() > limits.q_rate_max * (1 + 1e-12)) continue;
        if (std::abs(jg[p].dot(v)) > hb || std::abs(jg[s].dot(v)) > hb) continue;
        const double c = value[p] + dt * (0.5 * (pot[p] + pot[s]) + v.dot(weights.W2.cwiseProduct(v)));
        if (c < best) {
          best = c;
          arg = static_cast<std::int32_t>(p);
        }
      }
      next[s] = best;
      parent[k][s] = arg;
    }
    value.swap(next);
  }

  out.feasible = std::isfinite(value[s_end]);
  out.cost = value[s_end];
  if (out.feasible) {
    out.q.resize(K);
    std::size_t s = s_end;
    for (int k = K - 1; k >= 0; --k) {
      out.q[k] = pos[s];
      if (k > 0) s = static_cast<std::size_t>(parent[k][s]);
    }
  }
  out.wall_time = seconds_since(clock0);
  return out;
}

RobotModel toy_model() {
  RobotModel model;
  model.bike = default_bikebot_params();
  const auto arm = default_arm_links();
  // One link swinging in the roll plane: joint axis along the contact line.
  LinkParams link = arm[1];
  link.alpha = 0.0;
  link.com = LinkParams::midpoint_com(link.d, link.a, link.alpha);
  model.links = {link};
  model.mount = default_mount(model.bike);
  model.mount.linear() = Eigen::AngleAxisd(-units::kPi / 2, Vec3::UnitY()).toRotationMatrix();
  model.bounds.lower = Vec::Constant(2, -2.0 * units::kPi);
  model.bounds.upper = Vec::Constant(2, 2.0 * units::kPi);
  model.bounds.lower[0] = rad(-20.0);
  model.bounds.upper[0] = rad(20.0);
  model.home = Vec::Zero(1);
  return model;
}

}  // namespace bikebot

namespace bikebot::bem {

WorkspaceResult workspace_contains(const RobotModel& model, const Pose& pose,
                                   const PlannerWeights& weights, const MotionLimits& limits,
                                   std::optional<double> local_roll,
                                   std::optional<Vec> initial_guess) {
  Vec prev = initial_guess ? *initial_guess : model.home_q();
  if (local_roll) prev[0] = *local_roll;
  PlannerOptions opt;
  std::vector<Vec> extra;
  if (!initial_guess) extra.push_back(Vec::Zero(model.dof()));
  WorkspaceResult out;
  const BpikResult r = bpik(model, pose, prev, gravity_torque_roll(model, prev), weights, limits,
                            opt, local_roll, extra);
  out.q = r.q;
  out.attained = r.attained;
  out.pose_residual = r.pose_residual;
  out.contained = r.reached && r.on_manifold;
  return out;
}

}  // namespace bikebot::bem
