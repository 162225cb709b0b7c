#include "bikebot/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace bikebot::optim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double max_step_to_boundary(const Vec& v, const Vec& dv) {
  double a = 1.0;
  for (int i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  }
  return a;
}

Vec solve_spd(const Mat& K, const Vec& rhs) {
  Eigen::LLT<Mat> llt(K);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  return K.fullPivLu().solve(rhs);
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, int max_iter, double tol) {
  const int n = static_cast<int>(qp.H.rows());
  const int m = static_cast<int>(qp.G.rows());
  QpResult res;
  const double reg = 1e-12 * (1.0 + qp.H.diagonal().cwiseAbs().maxCoeff());
  const Mat Hreg = qp.H + reg * Mat::Identity(n, n);
  if (m == 0) {
    res.z = solve_spd(Hreg, -qp.c);
    res.converged = true;
    return res;
  }

  Vec z = Vec::Zero(n);
  Vec s = (qp.h - qp.G * z).cwiseMax(1.0);
  Vec lam = Vec::Ones(m);
  const double scale_d = 1.0 + qp.c.cwiseAbs().maxCoeff();
  const double scale_p = 1.0 + qp.h.cwiseAbs().maxCoeff();

  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    const Vec r_d = qp.H * z + qp.c + qp.G.transpose() * lam;
    const Vec r_p = qp.G * z + s - qp.h;
    const double mu = s.dot(lam) / m;
    if (r_d.cwiseAbs().maxCoeff() <= tol * scale_d && r_p.cwiseAbs().maxCoeff() <= tol * scale_p &&
        mu <= tol) {
      res.converged = true;
      break;
    }
    const Vec w = lam.cwiseQuotient(s);
    const Mat K = Hreg + qp.G.transpose() * w.asDiagonal() * qp.G;
    Eigen::LLT<Mat> llt(K);
    const bool chol_ok = llt.info() == Eigen::Success;
    Eigen::FullPivLU<Mat> lu;
    if (!chol_ok) lu.compute(K);

    const auto newton = [&](const Vec& r_c, Vec& dz, Vec& ds, Vec& dl) {
      const Vec rhs = -r_d - qp.G.transpose() * ((-r_c + lam.cwiseProduct(r_p)).cwiseQuotient(s));
      dz = chol_ok ? Vec(llt.solve(rhs)) : Vec(lu.solve(rhs));
      ds = -r_p - qp.G * dz;
      dl = (-r_c - lam.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Vec dz, ds, dl;
    newton(s.cwiseProduct(lam), dz, ds, dl);
    const double a_aff = std::min(max_step_to_boundary(s, ds), max_step_to_boundary(lam, dl));
    const double mu_aff = (s + a_aff * ds).dot(lam + a_aff * dl) / m;
    const double sigma = std::pow(mu_aff / mu, 3);
    const Vec r_c = s.cwiseProduct(lam) + ds.cwiseProduct(dl) - Vec::Constant(m, sigma * mu);
    newton(r_c, dz, ds, dl);
    const double a = std::min(1.0, 0.995 * std::min(max_step_to_boundary(s, ds),
                                                    max_step_to_boundary(lam, dl)));
    z += a * dz;
    s += a * ds;
    lam += a * dl;
    s = s.cwiseMax(1e-300);
    lam = lam.cwiseMax(1e-300);
  }
  res.z = z;
  res.multipliers = lam;
  return res;
}

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  Vec xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double hi = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + hi;
    const double fp = f(xp);
    xp[i] = x[i] - hi;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * hi);
  }
  return g;
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
  Vec xp = x;
  Mat J;
  for (int i = 0; i < x.size(); ++i) {
    const double hi = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + hi;
    const Vec fp = f(xp);
    xp[i] = x[i] - hi;
    const Vec fm = f(xp);
    xp[i] = x[i];
    if (i == 0) J.resize(fp.size(), x.size());
    J.col(i) = (fp - fm) / (2.0 * hi);
  }
  return J;
}

namespace {

struct Eval {
  double f = 0.0;
  Vec grad;
  Vec eq, ineq;
  Mat J_eq, J_ineq;
};

bool has_lb(const NlpProblem& p, int i) { return p.lb.size() && std::isfinite(p.lb[i]); }
bool has_ub(const NlpProblem& p, int i) { return p.ub.size() && std::isfinite(p.ub[i]); }

double linear_violation(const NlpProblem& p, const Vec& x) {
  double v = 0.0;
  if (p.A.rows()) v = std::max(v, (p.A * x - p.b).maxCoeff());
  for (int i = 0; i < p.n; ++i) {
    if (has_lb(p, i)) v = std::max(v, p.lb[i] - x[i]);
    if (has_ub(p, i)) v = std::max(v, x[i] - p.ub[i]);
  }
  return std::max(v, 0.0);
}

double nonlinear_violation(const Vec& eq, const Vec& ineq) {
  double v = 0.0;
  if (eq.size()) v = std::max(v, eq.cwiseAbs().maxCoeff());
  if (ineq.size()) v = std::max(v, ineq.maxCoeff());
  return v;
}

Vec eval_eq(const NlpProblem& p, const Vec& x) { return p.m_eq ? p.eq(x) : Vec(); }
Vec eval_ineq(const NlpProblem& p, const Vec& x) { return p.m_ineq ? p.ineq(x) : Vec(); }

Eval evaluate(const NlpProblem& p, const Vec& x, double h, bool derivatives) {
  Eval e;
  e.f = p.objective(x);
  e.eq = eval_eq(p, x);
  e.ineq = eval_ineq(p, x);
  if (!derivatives) return e;
  e.grad = p.gradient ? p.gradient(x) : fd_gradient(p.objective, x, h);
  if (p.m_eq) e.J_eq = p.eq_jacobian ? p.eq_jacobian(x) : fd_jacobian(p.eq, x, h);
  if (p.m_ineq) e.J_ineq = p.ineq_jacobian ? p.ineq_jacobian(x) : fd_jacobian(p.ineq, x, h);
  return e;
}

Vec project_bounds(const NlpProblem& p, Vec x) {
  for (int i = 0; i < p.n; ++i) {
    if (has_lb(p, i)) x[i] = std::max(x[i], p.lb[i]);
    if (has_ub(p, i)) x[i] = std::min(x[i], p.ub[i]);
  }
  return x;
}

// Rows of the elastic subproblem in z = [d, t]. `count_*` record the layout so
// the multipliers can be mapped back to constraints.
struct ElasticQp {
  QpProblem qp;
  int rows_linear = 0;
  int rows_ineq = 0;
  int rows_eq = 0;
  std::vector<int> bound_index;  // +i+1 upper, -(i+1) lower
};

ElasticQp build_elastic_qp(const NlpProblem& p, const Vec& x, const Eval& e, const Mat& B,
                           const Vec& grad, double rho) {
  const int n = p.n;
  std::vector<std::pair<Eigen::RowVectorXd, double>> rows;
  ElasticQp out;
  const auto add = [&](const Eigen::RowVectorXd& r, double rhs) { rows.emplace_back(r, rhs); };
  for (int i = 0; i < p.A.rows(); ++i) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n + 1);
    r.head(n) = p.A.row(i);
    add(r, p.b[i] - p.A.row(i).dot(x));
  }
  for (int i = 0; i < n; ++i) {
    if (has_ub(p, i)) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n + 1);
      r[i] = 1.0;
      add(r, p.ub[i] - x[i]);
      out.bound_index.push_back(i + 1);
    }
    if (has_lb(p, i)) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n + 1);
      r[i] = -1.0;
      add(r, x[i] - p.lb[i]);
      out.bound_index.push_back(-(i + 1));
    }
  }
  out.rows_linear = static_cast<int>(rows.size());
  for (int i = 0; i < p.m_ineq; ++i) {
    Eigen::RowVectorXd r(n + 1);
    r.head(n) = e.J_ineq.row(i);
    r[n] = -1.0;
    add(r, -e.ineq[i]);
  }
  out.rows_ineq = p.m_ineq;
  for (int i = 0; i < p.m_eq; ++i) {
    Eigen::RowVectorXd r(n + 1);
    r.head(n) = e.J_eq.row(i);
    r[n] = -1.0;
    add(r, -e.eq[i]);
    r.head(n) = -e.J_eq.row(i);
    add(r, e.eq[i]);
  }
  out.rows_eq = 2 * p.m_eq;
  {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n + 1);
    r[n] = -1.0;
    add(r, 0.0);
  }
  out.qp.G.resize(static_cast<int>(rows.size()), n + 1);
  out.qp.h.resize(static_cast<int>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    out.qp.G.row(static_cast<int>(k)) = rows[k].first;
    out.qp.h[static_cast<int>(k)] = rows[k].second;
  }
  out.qp.H = Mat::Zero(n + 1, n + 1);
  out.qp.H.topLeftCorner(n, n) = B;
  out.qp.H(n, n) = 1e-8;
  out.qp.c.resize(n + 1);
  out.qp.c.head(n) = grad;
  out.qp.c[n] = rho;
  return out;
}

// Gradient of the Lagrangian for given multipliers in QP row order.
Vec lagrangian_gradient(const NlpProblem& p, const ElasticQp& eq, const Eval& e, const Vec& mult) {
  Vec g = e.grad;
  int k = 0;
  for (int i = 0; i < p.A.rows(); ++i) g += mult[k++] * p.A.row(i).transpose();
  for (int idx : eq.bound_index) {
    const int i = std::abs(idx) - 1;
    g[i] += (idx > 0 ? 1.0 : -1.0) * mult[k++];
  }
  for (int i = 0; i < p.m_ineq; ++i) g += mult[k++] * e.J_ineq.row(i).transpose();
  for (int i = 0; i < p.m_eq; ++i) {
    g += (mult[k] - mult[k + 1]) * e.J_eq.row(i).transpose();
    k += 2;
  }
  return g;
}

double nonlinear_multiplier_sum(const ElasticQp& eq, const Vec& mult) {
  double s = 0.0;
  for (int k = eq.rows_linear; k < eq.rows_linear + eq.rows_ineq + eq.rows_eq; ++k) s += mult[k];
  return s;
}

void bfgs_update(Mat& B, const Vec& s, Vec y) {
  const Vec Bs = B * s;
  const double sBs = s.dot(Bs);
  if (!(sBs > 1e-300)) return;
  double sy = s.dot(y);
  if (sy < 0.2 * sBs) {
    const double theta = 0.8 * sBs / (sBs - sy);
    y = theta * y + (1.0 - theta) * Bs;
    sy = s.dot(y);
  }
  if (!(sy > 1e-300)) return;
  B += y * y.transpose() / sy - Bs * Bs.transpose() / sBs;
  B = 0.5 * (B + B.transpose());
}

struct CoreResult {
  Vec x;
  int iterations = 0;
  bool converged = false;
  double kkt = kInf;
};

CoreResult sqp_core(const NlpProblem& p, Vec x, const SqpOptions& opt) {
  const int n = p.n;
  x = project_bounds(p, x);
  Mat B = Mat::Identity(n, n);
  double rho = 10.0;
  CoreResult out;
  Eval e = evaluate(p, x, opt.fd_step, true);
  bool scaled = false;

  for (int it = 0; it < opt.max_iterations; ++it) {
    out.iterations = it + 1;
    const double v = std::max(linear_violation(p, x), nonlinear_violation(e.eq, e.ineq));
    ElasticQp sub = build_elastic_qp(p, x, e, B, e.grad, rho);
    QpResult qr = solve_qp(sub.qp);
    double t = qr.z[n];
    // Raise the penalty until the subproblem prefers linearised feasibility.
    for (int k = 0; k < 6 && t > 1e-9 * (1.0 + v) && rho < 1e10; ++k) {
      rho *= 10.0;
      sub.qp.c[n] = rho;
      qr = solve_qp(sub.qp);
      t = qr.z[n];
    }
    rho = std::max(rho, 1.5 * nonlinear_multiplier_sum(sub, qr.multipliers) + 1.0);
    Vec d = qr.z.head(n);

    const Vec gL = lagrangian_gradient(p, sub, e, qr.multipliers);
    out.kkt = gL.cwiseAbs().maxCoeff() / std::max(1.0, e.grad.cwiseAbs().maxCoeff());
    const double dnorm = d.cwiseAbs().maxCoeff();
    if (v <= opt.tol_feasibility &&
        (out.kkt <= opt.tol_optimality || dnorm <= opt.tol_optimality * (1.0 + x.cwiseAbs().maxCoeff()))) {
      out.converged = true;
      break;
    }

    const auto merit = [&](const Vec& xx, const Eval& ee) {
      return ee.f + rho * std::max(linear_violation(p, xx), nonlinear_violation(ee.eq, ee.ineq));
    };
    const double phi0 = merit(x, e);
    const double pred = -(e.grad.dot(d) + 0.5 * d.dot(B * d)) + rho * (v - std::max(t, 0.0));
    double alpha = 1.0;
    Vec x_new;
    Eval e_new;
    bool accepted = false;
    while (alpha > 1e-10) {
      x_new = x + alpha * d;
      e_new = evaluate(p, x_new, opt.fd_step, false);
      if (merit(x_new, e_new) <= phi0 - 1e-4 * alpha * std::max(pred, 0.0)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Step rejected: reset curvature once before giving up.
      if (!scaled) {
        B = Mat::Identity(n, n) * std::max(1.0, B.diagonal().maxCoeff());
        scaled = true;
        continue;
      }
      break;
    }
    scaled = false;
    e_new = evaluate(p, x_new, opt.fd_step, true);
    const Vec y = lagrangian_gradient(p, sub, e_new, qr.multipliers) - gL;
    bfgs_update(B, x_new - x, y);
    x = x_new;
    e = e_new;
  }
  out.x = x;
  return out;
}

// Minimum-norm Newton steps onto the linearised constraint set.
Vec polish_feasibility(const NlpProblem& p, Vec x, const SqpOptions& opt) {
  NlpProblem q = p;
  q.objective = [](const Vec&) { return 0.0; };
  q.gradient = [n = p.n](const Vec&) { return Vec::Zero(n); };
  double v = max_violation(p, x);
  for (int it = 0; it < 30 && v > opt.tol_feasibility; ++it) {
    const Eval e = evaluate(q, x, opt.fd_step, true);
    ElasticQp sub = build_elastic_qp(q, x, e, Mat::Identity(p.n, p.n), Vec::Zero(p.n), 1e8);
    const QpResult qr = solve_qp(sub.qp);
    const Vec d = qr.z.head(p.n);
    double alpha = 1.0;
    bool improved = false;
    while (alpha > 1e-6) {
      const Vec xn = x + alpha * d;
      const double vn = max_violation(p, xn);
      if (vn < v) {
        x = xn;
        v = vn;
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) break;
  }
  return x;
}

}  // namespace

double max_violation(const NlpProblem& p, const Vec& x) {
  return std::max(linear_violation(p, x), nonlinear_violation(eval_eq(p, x), eval_ineq(p, x)));
}

SqpResult solve_sqp(const NlpProblem& p, const Vec& x0, const SqpOptions& opt) {
  if (x0.size() != p.n) throw std::invalid_argument("solve_sqp: x0 has wrong dimension");
  SqpResult res;
  CoreResult core = sqp_core(p, x0, opt);
  Vec x = core.x;
  res.iterations = core.iterations;
  res.converged = core.converged;
  res.kkt_residual = core.kkt;

  if (max_violation(p, x) > opt.tol_feasibility) x = polish_feasibility(p, x, opt);

  if (max_violation(p, x) > opt.tol_feasibility && opt.allow_fallback &&
      (p.m_eq > 0 || p.m_ineq > 0)) {
    // Powell-Hestenes-Rockafellar augmented Lagrangian on the nonlinear rows.
    res.used_fallback = true;
    Vec l_eq = Vec::Zero(p.m_eq), l_in = Vec::Zero(p.m_ineq);
    double mu = 10.0;
    double prev_v = max_violation(p, x);
    for (int outer = 0; outer < 15; ++outer) {
      NlpProblem inner = p;
      inner.m_eq = 0;
      inner.m_ineq = 0;
      inner.gradient = nullptr;
      inner.objective = [&, l_eq, l_in, mu](const Vec& z) {
        double f = p.objective(z);
        if (p.m_eq) {
          const Vec h = p.eq(z);
          f += l_eq.dot(h) + 0.5 * mu * h.squaredNorm();
        }
        if (p.m_ineq) {
          const Vec g = p.ineq(z);
          f += ((l_in + mu * g).cwiseMax(0.0).squaredNorm() - l_in.squaredNorm()) / (2.0 * mu);
        }
        return f;
      };
      SqpOptions io = opt;
      io.allow_fallback = false;
      const CoreResult c = sqp_core(inner, x, io);
      x = c.x;
      res.iterations += c.iterations;
      if (p.m_eq) l_eq += mu * p.eq(x);
      if (p.m_ineq) l_in = (l_in + mu * p.ineq(x)).cwiseMax(0.0);
      const double v = max_violation(p, x);
      if (v <= opt.tol_feasibility) break;
      if (v > 0.25 * prev_v) mu *= 10.0;
      prev_v = v;
    }
    x = polish_feasibility(p, x, opt);
  }

  res.x = x;
  res.f = p.objective(x);
  res.max_violation = max_violation(p, x);
  res.feasible = res.max_violation <= opt.tol_feasibility;
  if (res.converged && res.feasible) {
    res.status = "converged";
  } else if (res.feasible) {
    res.status = "feasible";
  } else {
    res.status = "infeasible";
  }
  return res;
}

}  // namespace bikebot::optim
