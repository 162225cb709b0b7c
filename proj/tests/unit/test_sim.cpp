#include <doctest.h>

#include <sstream>

#include "../support/scenarios.hpp"
#include "bikebot/errors.hpp"
#include "bikebot/sim.hpp"
#include "bikebot/units.hpp"

using namespace bikebot;
using units::deg;
using units::rad;

namespace {

sim::ControlSetup platform_gains() { return {control::BalanceGains{}, control::default_arm_gains(0)}; }

int csv_columns(const std::string& line) { return static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1; }

}  // namespace

TEST_CASE("roll recovery from 4 deg settles with the designed decay") {
  auto s = testing::roll_recovery(4.0, 12.0);
  const auto log = sim::run_scenario(s.model, s.plan, platform_gains(), {}, s.config);
  REQUIRE_FALSE(log.balance_loss_time);
  CHECK(std::abs(deg(log.e_b.front())) == doctest::Approx(4.0));
  CHECK(std::abs(deg(log.e_b.back())) < 0.1);
  std::vector<double> t, e;
  for (size_t k = 0; k < log.size() && log.time[k] <= 10.0; ++k) {
    t.push_back(log.time[k]);
    e.push_back(log.e_b[k]);
  }
  CHECK(control::fit_decay_rate(t, e, rad(0.01)) >= 0.9);
}

TEST_CASE("an equilibrium hold stays put") {
  const RobotModel m = default_model();
  const auto c = testing::bem_configuration(m, {0, -15, 20, 0, 0, 0}, 3.0);
  const auto plan = sim::hold_plan(c.q, 2.0);
  sim::SimConfig cfg;
  cfg.loss_envelope = rad(10.0);
  const auto log = sim::run_scenario(m, plan, {control::BalanceGains{}, control::default_arm_gains(6)}, {}, cfg);
  REQUIRE_FALSE(log.balance_loss_time);
  for (size_t k = 0; k < log.size(); ++k) {
    CHECK(std::abs(log.e_b[k]) < 1e-9);
    CHECK(log.phase[k] == 0);
  }
  CHECK(deg(log.delta.back()) == doctest::Approx(3.0).epsilon(1e-6));
  const auto he = sim::hold_errors(log, 1.0);
  CHECK(sim::stats(he.position).max < 1e-9);
}

TEST_CASE("larger roll pulses give larger roll errors") {
  auto s = testing::roll_recovery(0.0, 3.0);
  double prev = 0.0;
  for (double torque : {2.0, 4.0, 8.0}) {
    const auto log = sim::run_scenario(s.model, s.plan, platform_gains(), {{0.5, 0.2, torque}}, s.config);
    double peak = 0.0;
    for (double e : log.e_b) peak = std::max(peak, std::abs(e));
    CHECK(peak > prev);
    prev = peak;
  }
}

TEST_CASE("leaving the envelope stops the run and marks the loss") {
  auto s = testing::roll_recovery(4.0, 5.0);
  s.config.steering.delta_rate_max = rad(1.0);
  s.config.loss_envelope = rad(6.0);
  const auto log = sim::run_scenario(s.model, s.plan, platform_gains(), {}, s.config);
  REQUIRE(log.balance_loss_time);
  CHECK(log.balance_lost.back());
  CHECK(std::abs(log.q.back()[0]) > rad(6.0));
  CHECK(log.time.back() == doctest::Approx(*log.balance_loss_time));
}

TEST_CASE("quantized roll sensing makes the steering chatter") {
  auto s = testing::roll_recovery(0.0, 10.0);
  s.config.initial_q = Vec::Constant(1, rad(0.3));
  s.config.sensor_quantization = rad(0.1);
  const auto log = sim::run_scenario(s.model, s.plan, platform_gains(), {}, s.config);
  REQUIRE_FALSE(log.balance_loss_time);
  int reversals = 0;
  double last = 0.0;
  for (size_t k = 1; k < log.size(); ++k) {
    if (log.time[k] < 5.0) continue;
    const double d = log.delta[k] - log.delta[k - 1];
    if (std::abs(d) > 1e-12) {
      if (d * last < 0) ++reversals;
      last = d;
    }
  }
  CHECK(reversals >= 10);
}

TEST_CASE("noisy runs are reproducible per seed") {
  auto s = testing::roll_recovery(2.0, 2.0);
  s.config.imu_noise = rad(0.05);
  s.config.seed = 9;
  const auto a = sim::run_scenario(s.model, s.plan, platform_gains(), {}, s.config);
  const auto b = sim::run_scenario(s.model, s.plan, platform_gains(), {}, s.config);
  s.config.seed = 10;
  const auto c = sim::run_scenario(s.model, s.plan, platform_gains(), {}, s.config);
  std::ostringstream sa, sb, sc;
  sim::write_csv(sa, a);
  sim::write_csv(sb, b);
  sim::write_csv(sc, c);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str() != sc.str());
}

TEST_CASE("CSV rows match the header width") {
  const RobotModel m = default_model();
  const auto plan = sim::hold_plan(m.home_q(), 0.05);
  sim::SimConfig cfg;
  cfg.loss_envelope = rad(10.0);
  const auto log = sim::run_scenario(m, plan, {control::BalanceGains{}, control::default_arm_gains(6)}, {}, cfg);
  std::ostringstream os;
  sim::write_csv(os, log);
  std::istringstream is(os.str());
  std::string header, line;
  std::getline(is, header);
  CHECK(header == sim::csv_header(m.dof()));
  int rows = 0;
  while (std::getline(is, line)) {
    CHECK(csv_columns(line) == csv_columns(header));
    ++rows;
  }
  CHECK(rows == static_cast<int>(log.size()));
}

TEST_CASE("semi-implicit Euler agrees with RK4 for a short unforced step") {
  const RobotModel m = platform_only_model();
  const sim::State s{Vec::Constant(1, rad(2.0)), Vec::Zero(1)};
  const auto a = sim::step(m, s, Vec(Vec::Zero(1)), 1e-4, sim::Integrator::RK4);
  const auto b = sim::step(m, s, Vec(Vec::Zero(1)), 1e-4, sim::Integrator::SemiImplicitEuler);
  CHECK(a.q[0] == doctest::Approx(b.q[0]).epsilon(1e-7));
}

TEST_CASE("configuration validation") {
  sim::SimConfig c;
  CHECK_NOTHROW(c.validate());
  c.control_period = 1.5e-3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS((sim::Disturbance{0.0, 0.0, 1.0}.validate()), ConfigError);
  CHECK(sim::integrator_from_string("rk4") == sim::Integrator::RK4);
  CHECK(sim::integrator_from_string(sim::to_string(sim::Integrator::SemiImplicitEuler)) ==
        sim::Integrator::SemiImplicitEuler);
  CHECK_THROWS_AS(sim::integrator_from_string("euler"), ConfigError);
}

TEST_CASE("error statistics") {
  const auto s = sim::stats({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.max == doctest::Approx(4.0));
  CHECK(s.count == 4);
  CHECK(s.stddev > 0.0);
  CHECK(sim::stats({}).count == 0);
}
