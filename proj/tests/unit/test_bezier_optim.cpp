#include <doctest.h>

#include <cmath>
#include <random>

#include "bikebot/bezier.hpp"
#include "bikebot/optim.hpp"

using namespace bikebot;

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

BezierTrajectory random_curve(std::mt19937_64& rng, int dim, int degree, double t0, double tf) {
  std::normal_distribution<double> g;
  BezierTrajectory tr;
  tr.degree = degree;
  tr.t0 = t0;
  tr.tf = tf;
  tr.control_points = Mat(dim, degree + 1);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= degree; ++j) tr.control_points(i, j) = g(rng);
  return tr;
}

}  // namespace

TEST_CASE("Bernstein basis matches the binomial formula and partitions unity") {
  for (int n : {1, 3, 7, 12}) {
    for (double s : {0.0, 0.13, 0.5, 0.77, 1.0}) {
      const Vec b = bernstein_basis(n, s);
      REQUIRE(b.size() == n + 1);
      CHECK(b.sum() == doctest::Approx(1.0).epsilon(1e-14));
      for (int j = 0; j <= n; ++j) {
        CHECK(b[j] >= 0.0);
        CHECK(b[j] == doctest::Approx(binomial(n, j) * std::pow(s, j) * std::pow(1 - s, n - j)));
      }
    }
  }
}

TEST_CASE("Bezier derivatives match central differences in time") {
  std::mt19937_64 rng(41);
  const auto tr = random_curve(rng, 3, 7, 2.0, 5.0);
  const double h = 1e-5;
  for (double t : {2.3, 3.1, 4.6}) {
    const auto s = bezier_eval(tr, t);
    const auto a = bezier_eval(tr, t + h), b = bezier_eval(tr, t - h);
    CHECK((s.qdot - (a.q - b.q) / (2 * h)).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((s.qddot - (a.qdot - b.qdot) / (2 * h)).cwiseAbs().maxCoeff() < 1e-6);
    const BasisWeights w = basis_weights(7, (t - 2.0) / 3.0, 3.0);
    CHECK((tr.control_points * w.w0 - s.q).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((tr.control_points * w.w1 - s.qdot).cwiseAbs().maxCoeff() < 1e-11);
    CHECK((tr.control_points * w.w2 - s.qddot).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(bezier_eval(tr, 5.5), std::out_of_range);
}

TEST_CASE("pinned boundary control points reproduce the boundary state exactly") {
  std::mt19937_64 rng(42);
  auto tr = random_curve(rng, 2, 7, 0.0, 2.0);
  const Vec q0 = Vec::Random(2), v0 = Vec::Random(2), a0 = Vec::Random(2);
  const Vec q1 = Vec::Random(2), v1 = Vec::Random(2), a1 = Vec::Random(2);
  pin_boundary(tr, q0, v0, a0, q1, v1, a1);
  const auto s0 = bezier_eval_s(tr, 0.0), s1 = bezier_eval_s(tr, 1.0);
  CHECK((s0.q - q0).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s0.qdot - v0).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s0.qddot - a0).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s1.q - q1).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s1.qdot - v1).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s1.qddot - a1).cwiseAbs().maxCoeff() <= 1e-12);
  BezierTrajectory low;
  low.degree = 4;
  low.control_points = Mat::Zero(2, 5);
  CHECK_THROWS(pin_boundary(low, q0, v0, a0, q1, v1, a1));
}

TEST_CASE("QP with box constraints projects the unconstrained minimiser") {
  optim::QpProblem qp;
  qp.H = Mat::Identity(3, 3);
  const Vec a(Eigen::Vector3d(1.0, -2.0, 0.5));
  qp.c = -a;
  qp.G = Mat::Identity(3, 3);
  qp.h = Vec::Constant(3, 0.0);
  const auto r = optim::solve_qp(qp);
  CHECK(r.converged);
  CHECK(r.z[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
  CHECK(r.z[1] == doctest::Approx(-2.0).epsilon(1e-7));
  CHECK(r.z[2] == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
  // Active constraints carry the gradient: lambda = a - z on active rows.
  CHECK(r.multipliers[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.multipliers[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
}

TEST_CASE("SQP solves problems with known optima") {
  SUBCASE("disk constraint") {
    optim::NlpProblem p;
    p.n = 2;
    p.objective = [](const Vec& x) { return std::pow(x[0] - 1, 2) + std::pow(x[1] - 2, 2); };
    p.m_ineq = 1;
    p.ineq = [](const Vec& x) { return Vec::Constant(1, x.squaredNorm() - 1.0); };
    const auto r = optim::solve_sqp(p, Vec::Zero(2));
    CHECK(r.feasible);
    CHECK(r.x[0] == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-5));
    CHECK(r.x[1] == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-5));
  }
  SUBCASE("equality constraint from an infeasible start") {
    optim::NlpProblem p;
    p.n = 2;
    p.objective = [](const Vec& x) { return x.squaredNorm(); };
    p.m_eq = 1;
    p.eq = [](const Vec& x) { return Vec::Constant(1, x[0] + 2 * x[1] - 1.0); };
    const auto r = optim::solve_sqp(p, Vec::Constant(2, 3.0));
    CHECK(r.feasible);
    CHECK(r.x[0] == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(r.x[1] == doctest::Approx(0.4).epsilon(1e-6));
  }
  SUBCASE("Rosenbrock with bounds") {
    optim::NlpProblem p;
    p.n = 2;
    p.objective = [](const Vec& x) {
      return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
    };
    p.lb = Vec::Constant(2, -2.0);
    p.ub = Vec::Constant(2, 0.5);
    const auto r = optim::solve_sqp(p, Vec::Constant(2, -1.0));
    CHECK(r.feasible);
    CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(r.x[1] == doctest::Approx(0.25).epsilon(1e-4));
  }
}

TEST_CASE("finite-difference helpers") {
  const auto f = [](const Vec& x) { return std::sin(x[0]) * x[1]; };
  const Vec x(Eigen::Vector2d(0.3, 2.0));
  const Vec g = optim::fd_gradient(f, x, 1e-6);
  CHECK(g[0] == doctest::Approx(std::cos(0.3) * 2.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(std::sin(0.3)).epsilon(1e-8));
}
