// Randomised invariants, 1000 draws each with fixed seeds.

#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "../support/oracles.hpp"
#include "../support/scenarios.hpp"
#include "bikebot/bem.hpp"
#include "bikebot/bezier.hpp"
#include "bikebot/control.hpp"
#include "bikebot/dynamics.hpp"
#include "bikebot/units.hpp"

using namespace bikebot;
using units::rad;

namespace {
constexpr int kDraws = 1000;
}

TEST_CASE("property: mass matrix is symmetric positive definite and D' - 2C is skew") {
  const RobotModel m = default_model();
  std::mt19937_64 rng(101);
  for (int k = 0; k < kDraws; ++k) {
    const Vec q = testing::random_configuration(m, rng);
    const Vec qd = testing::random_velocity(m.dof(), rng);
    const Mat D = mass_matrix(m, q);
    REQUIRE((D - D.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
    REQUIRE(Eigen::SelfAdjointEigenSolver<Mat>(D).eigenvalues().minCoeff() > 0.0);
    const Mat N = testing::mass_matrix_rate(m, q, qd) - 2.0 * coriolis_matrix(m, q, qd);
    REQUIRE((N + N.transpose()).cwiseAbs().rowwise().sum().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("property: gravity vector is the gradient of the potential") {
  const RobotModel m = default_model();
  std::mt19937_64 rng(102);
  for (int k = 0; k < kDraws; ++k) {
    const Vec q = testing::random_configuration(m, rng);
    const Vec ref = testing::potential_gradient(m, q);
    REQUIRE((gravity_vector(m, q) - ref).cwiseAbs().maxCoeff() <= 1e-4 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("property: Jacobians agree with finite differences") {
  const RobotModel m = default_model();
  std::mt19937_64 rng(103);
  for (int k = 0; k < kDraws; ++k) {
    REQUIRE(testing::worst_jacobian_error(m, testing::random_configuration(m, rng)) <= 1e-5);
  }
}

TEST_CASE("property: forward kinematics returns proper rotations") {
  const RobotModel m = default_model();
  std::mt19937_64 rng(104);
  for (int k = 0; k < kDraws; ++k) {
    const Mat3 R = forward_kinematics(m, testing::random_configuration(m, rng)).pose.rotation();
    REQUIRE((R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(R.determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("property: every returned equilibrium meets the residual tolerance") {
  const RobotModel m = default_model();
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> steer(-rad(15.0), rad(15.0));
  for (int k = 0; k < kDraws; ++k) {
    const Vec q = testing::random_configuration(m, rng);
    const auto r = bem::solve_equilibrium_roll(m, q.tail(m.num_links()), steer(rng));
    if (!r.found) continue;
    REQUIRE(std::abs(bem::bem_residual(m, r.point.q, r.point.delta)) <= bem::kResidualTolerance);
    REQUIRE(std::abs(r.point.q[0]) <= bem::kRollGuard);
  }
}

TEST_CASE("property: steering torque is odd and the inverse is exact on the branch") {
  const RobotModel m = default_model();
  const double M = m.total_mass();
  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> u(-rad(15.0), rad(15.0));
  steering::SteeringLimits lim;
  for (int k = 0; k < kDraws; ++k) {
    const double d = u(rng);
    const double tau = steering::balance_torque_90(d, M, m.bike);
    REQUIRE(steering::balance_torque_90(-d, M, m.bike) == doctest::Approx(-tau).epsilon(1e-14));
    const auto c = control::torque_to_steering(m, tau, lim);
    REQUIRE_FALSE(c.saturated);
    REQUIRE(c.delta == doctest::Approx(d).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("property: Bezier curves stay in the hull of their control points") {
  std::mt19937_64 rng(107);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> s01(0.0, 1.0);
  for (int k = 0; k < kDraws; ++k) {
    BezierTrajectory tr;
    tr.degree = 7;
    tr.control_points = Mat(3, 8);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 8; ++j) tr.control_points(i, j) = g(rng);
    const Vec q = bezier_eval_s(tr, s01(rng)).q;
    for (int i = 0; i < 3; ++i) {
      REQUIRE(q[i] <= tr.control_points.row(i).maxCoeff() + 1e-12);
      REQUIRE(q[i] >= tr.control_points.row(i).minCoeff() - 1e-12);
    }
  }
}

TEST_CASE("property: roll law yields the designed error acceleration") {
  const RobotModel m = default_model();
  std::mt19937_64 rng(108);
  const control::BalanceGains gains;
  const int n = m.num_links();
  for (int k = 0; k < kDraws; ++k) {
    const Vec q = testing::random_configuration(m, rng, rad(8.0));
    const Vec qd = testing::random_velocity(m.dof(), rng, 0.5);
    const BezierSample ref{testing::random_configuration(m, rng, rad(8.0)), testing::random_velocity(m.dof(), rng, 0.3),
                           testing::random_velocity(m.dof(), rng, 0.5)};
    const double tau = control::balance_control(m, control::exact_measurement(q, qd), ref, gains).tau_b;
    const Mat D = mass_matrix(m, q);
    const double phi_dd = (tau - bias_forces(m, q, qd)[0] - D.row(0).tail(n).dot(ref.qddot.tail(n))) / D(0, 0);
    const double expected = ref.qddot[0] - gains.k_p * (q[0] - ref.q[0]) - gains.k_d * (qd[0] - ref.qdot[0]);
    REQUIRE(phi_dd == doctest::Approx(expected).epsilon(1e-8).scale(1.0));
  }
}
