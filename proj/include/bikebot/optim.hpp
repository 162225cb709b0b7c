#pragma once

#include <functional>
#include <string>

#include "bikebot/model.hpp"

namespace bikebot::optim {

/// min 0.5 z'Hz + c'z  s.t.  G z <= h.
struct QpProblem {
  Mat H;
  Vec c;
  Mat G;
  Vec h;
};

struct QpResult {
  Vec z;
  Vec multipliers;  ///< one per row of G, nonnegative
  int iterations = 0;
  bool converged = false;
};

/// Dense primal-dual interior point (Mehrotra predictor-corrector). Starts from
/// any z; slacks are initialised positive so infeasible starts are fine.
QpResult solve_qp(const QpProblem& qp, int max_iter = 80, double tol = 1e-10);

/// Smooth nonlinear program
///   min f(x)  s.t.  eq(x) = 0,  ineq(x) <= 0,  A x <= b,  lb <= x <= ub.
/// Missing derivative callbacks fall back to central differences.
struct NlpProblem {
  int n = 0;
  std::function<double(const Vec&)> objective;
  std::function<Vec(const Vec&)> gradient;
  int m_eq = 0;
  std::function<Vec(const Vec&)> eq;
  std::function<Mat(const Vec&)> eq_jacobian;
  int m_ineq = 0;
  std::function<Vec(const Vec&)> ineq;
  std::function<Mat(const Vec&)> ineq_jacobian;
  Mat A;  ///< linear rows, exact (never differenced)
  Vec b;
  Vec lb;
  Vec ub;
};

struct SqpOptions {
  double tol_optimality = 1e-6;
  double tol_feasibility = 1e-8;
  int max_iterations = 200;
  double fd_step = 1e-7;
  bool allow_fallback = true;
};

struct SqpResult {
  Vec x;
  double f = 0.0;
  double max_violation = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool feasible = false;
  bool used_fallback = false;
  std::string status;
};

/// Largest violation of all constraints at x (0 when feasible).
double max_violation(const NlpProblem& p, const Vec& x);

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h);
Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h);

/// Elastic SQP: BFGS-damped quadratic model, linearised constraints relaxed by
/// one penalised slack so every subproblem is feasible, l-infinity merit with
/// backtracking. Falls back to an augmented Lagrangian outer loop when the
/// iterate stalls infeasible, then polishes feasibility with minimum-norm steps.
SqpResult solve_sqp(const NlpProblem& p, const Vec& x0, const SqpOptions& opt = {});

}  // namespace bikebot::optim
