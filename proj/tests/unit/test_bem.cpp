#include <doctest.h>

#include <random>

#include "../support/scenarios.hpp"
#include "bikebot/bem.hpp"
#include "bikebot/dynamics.hpp"
#include "bikebot/planner.hpp"
#include "bikebot/units.hpp"

using namespace bikebot;
using units::deg;
using units::rad;

TEST_CASE("symmetric posture balances at zero roll and zero steering") {
  const RobotModel m = default_model();
  const auto r = bem::solve_equilibrium_roll(m, m.home, 0.0);
  REQUIRE(r.found);
  CHECK(std::abs(r.point.q[0]) <= 1e-9);
}

TEST_CASE("equilibrium roll satisfies the torque balance") {
  const RobotModel m = default_model();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> steer(-rad(12.0), rad(12.0));
  int found = 0;
  for (int k = 0; k < 100; ++k) {
    const Vec q = testing::random_configuration(m, rng);
    const double d = steer(rng);
    const auto r = bem::solve_equilibrium_roll(m, q.tail(m.num_links()), d);
    if (!r.found) continue;
    ++found;
    CHECK(std::abs(gravity_torque_roll(m, r.point.q) -
                   steering::balance_torque_90(d, m.total_mass(), m.bike)) <= bem::kResidualTolerance);
    CHECK(std::abs(bem::bem_residual(m, r.point.q, d)) <= bem::kResidualTolerance);
  }
  CHECK(found > 50);
}

TEST_CASE("arm shifted toward +y tilts the equilibrium toward positive roll") {
  // G_b at zero roll is positive when arm mass sits at +y, and the platform's
  // restoring moment -m g h sin(phi) needs phi > 0 to cancel it.
  const RobotModel m = default_model();
  Vec theta = m.home;
  theta[0] += rad(-30.0);
  Vec q0(m.dof());
  q0 << 0.0, theta;
  const double gb0 = gravity_torque_roll(m, q0);
  const auto r = bem::solve_equilibrium_roll(m, theta, 0.0);
  REQUIRE(r.found);
  CHECK(r.point.q[0] * gb0 > 0.0);
}

TEST_CASE("steering inverse recovers the increment") {
  const RobotModel m = default_model();
  for (double d : {-12.0, -3.0, 0.0, 0.5, 10.0}) {
    const double tau = steering::balance_torque_90(rad(d), m.total_mass(), m.bike);
    const auto back = bem::steering_for_torque(m, tau, rad(15.0));
    REQUIRE(back);
    CHECK(deg(*back) == doctest::Approx(d).epsilon(1e-9).scale(1.0));
  }
  CHECK_FALSE(bem::steering_for_torque(m, 1e3, rad(15.0)));
  const auto p = bem::equilibrium_point(m, m.home_q(), rad(15.0));
  REQUIRE(p);
  CHECK(p->delta == doctest::Approx(0.0));
}

TEST_CASE("capability ordering and monotonicity in the steering range") {
  const RobotModel m = default_model();
  bem::CapabilityOptions narrow, wide;
  narrow.delta_range = rad(25.0);
  wide.delta_range = rad(50.0);
  for (auto s : {bem::Strategy::OneWheel, bem::Strategy::TwoWheel, bem::Strategy::TwoWheelArm}) {
    CAPTURE(bem::to_string(s));
    CHECK(bem::max_roll_capability(m, s, wide).phi_b_max >=
          bem::max_roll_capability(m, s, narrow).phi_b_max - 1e-9);
  }
  const double one = bem::max_roll_capability(m, bem::Strategy::OneWheel).phi_b_max;
  const double two = bem::max_roll_capability(m, bem::Strategy::TwoWheel).phi_b_max;
  const double arm = bem::max_roll_capability(m, bem::Strategy::TwoWheelArm).phi_b_max;
  CHECK(one < two);
  CHECK(two < arm);
}

TEST_CASE("two-wheel capability is the roll where platform torque meets the peak steering torque") {
  // M g h_eff sin(phi) = tau_max, with h_eff from the home-posture gravity torque.
  const RobotModel m = default_model();
  const auto est = bem::max_roll_capability(m, bem::Strategy::TwoWheel);
  const double tau_max = steering::max_balance_torque_90(rad(50.0), m.total_mass(), m.bike).torque;
  Vec q = m.home_q();
  q[0] = est.phi_b_max;
  CHECK(std::abs(gravity_torque_roll(m, q)) == doctest::Approx(tau_max).epsilon(1e-6));
}

TEST_CASE("massless arm makes the arm strategy equal the two-wheel strategy") {
  RobotModel m = default_model();
  for (auto& l : m.links) {
    l.mass = 1e-12;
    l.inertia = Mat3::Identity() * 1e-12;
  }
  const double two = bem::max_roll_capability(m, bem::Strategy::TwoWheel).phi_b_max;
  const double arm = bem::max_roll_capability(m, bem::Strategy::TwoWheelArm).phi_b_max;
  CHECK(arm == doctest::Approx(two).epsilon(1e-6));
}

TEST_CASE("velocity bound check") {
  const RobotModel m = default_model();
  const steering::SteeringLimits lim;
  const Vec q = m.home_q();
  CHECK(bem::velocity_bound_check(m, q, Vec::Zero(m.dof()), lim).satisfied);
  const auto fast = bem::velocity_bound_check(m, q, Vec::Constant(m.dof(), 5.0), lim);
  CHECK_FALSE(fast.satisfied);
  CHECK(fast.margin == doctest::Approx(fast.rhs - fast.lhs));
}

TEST_CASE("workspace membership of a pose generated on the manifold") {
  const RobotModel m = default_model();
  const auto c = testing::bem_configuration(m, {0, -15, 20, 0, 0, 0}, 3.0);
  const auto w = bem::workspace_contains(m, c.pose, default_weights(m.dof()), default_limits(m),
                                         std::nullopt, c.q);
  CHECK(w.contained);
  CHECK(w.pose_residual < 0.1);
  Pose far = c.pose;
  far.position.z() += 5.0;
  CHECK_FALSE(bem::workspace_contains(m, far, default_weights(m.dof()), default_limits(m)).contained);
}
