#include "bikebot/bem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bikebot/dynamics.hpp"
#include "bikebot/units.hpp"

namespace bikebot::bem {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::OneWheel:
      return "one-wheel";
    case Strategy::TwoWheel:
      return "two-wheel";
    case Strategy::TwoWheelArm:
      return "two-wheel+arm";
  }
  return "unknown";
}

double bem_residual(const RobotModel& model, const Vec& q, double delta) {
  return gravity_torque_roll(model, q) -
         steering::balance_torque_90(delta, model.total_mass(), model.bike);
}

namespace {

Vec with_roll(double phi, const Vec& theta) {
  Vec q(theta.size() + 1);
  q[0] = phi;
  q.tail(theta.size()) = theta;
  return q;
}

// Bisection then secant polish of f on [a, b] with f(a) f(b) <= 0.
double bracketed_root(const std::function<double(double)>& f, double a, double b, double fa,
                      double fb, double ftol) {
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0) == (fa < 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
      fb = fm;
    }
    if (b - a < 1e-9) break;
  }
  // Secant polish inside the bracket.
  double x0 = a, x1 = b, f0 = fa, f1 = fb;
  for (int it = 0; it < 20; ++it) {
    if (std::abs(f1) <= ftol * 1e-3 || f1 == f0) break;
    double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
    if (x2 < a || x2 > b) x2 = 0.5 * (a + b);
    x0 = x1;
    f0 = f1;
    x1 = x2;
    f1 = f(x1);
  }
  return std::abs(f1) <= std::abs(f0) ? x1 : x0;
}

}  // namespace

EquilibriumResult solve_equilibrium_roll(const RobotModel& model, const Vec& theta, double delta,
                                         double phi_guard) {
  EquilibriumResult out;
  const double tau = steering::balance_torque_90(delta, model.total_mass(), model.bike);
  const auto f = [&](double phi) { return gravity_torque_roll(model, with_roll(phi, theta)) - tau; };

  // Scan outward from zero roll so the bracket nearest the upright is used.
  constexpr int kSteps = 40;
  const double step = phi_guard / kSteps;
  double best_a = 0, best_b = 0, fa_best = 0, fb_best = 0;
  bool have = false;
  const double f0 = f(0.0);
  if (f0 == 0.0) {
    have = true;
  } else {
    double prev_pos = 0.0, prev_neg = 0.0, fp = f0, fn = f0;
    for (int k = 1; k <= kSteps && !have; ++k) {
      const double xp = k * step, xn = -k * step;
      const double vp = f(xp), vn = f(xn);
      if ((vp <= 0) != (fp <= 0) || vp == 0.0) {
        best_a = prev_pos, best_b = xp, fa_best = fp, fb_best = vp;
        have = true;
      } else if ((vn <= 0) != (fn <= 0) || vn == 0.0) {
        best_a = xn, best_b = prev_neg, fa_best = vn, fb_best = fn;
        have = true;
      }
      prev_pos = xp, prev_neg = xn, fp = vp, fn = vn;
    }
  }
  if (!have) return out;

  const double phi =
      (f0 == 0.0) ? 0.0 : bracketed_root(f, best_a, best_b, fa_best, fb_best, kResidualTolerance);
  const Vec q = with_roll(phi, theta);
  out.point.q = q;
  out.point.delta = delta;
  out.point.tau_b = tau;
  out.point.residual = std::abs(gravity_torque_roll(model, q) - tau);
  out.found = out.point.residual <= kResidualTolerance;
  return out;
}

std::optional<double> steering_for_torque(const RobotModel& model, double tau, double delta_limit) {
  const double M = model.total_mass();
  const auto peak = steering::max_balance_torque_90(units::kPi / 2, M, model.bike);
  const double lim = std::min(std::abs(delta_limit), peak.delta);
  const auto t = [&](double d) { return steering::balance_torque_90(d, M, model.bike); };
  if (tau == 0.0) return 0.0;
  // tau_b90 is odd and decreasing on [-peak, peak].
  const double sign = tau > 0 ? -1.0 : 1.0;
  const double reach = std::abs(t(sign * lim));
  if (std::abs(tau) > reach) return std::nullopt;
  double a = 0.0, b = lim;
  for (int it = 0; it < 200 && b - a > 0.0; ++it) {
    const double m = 0.5 * (a + b);
    if (m == a || m == b) break;
    if (std::abs(t(sign * m)) < std::abs(tau)) {
      a = m;
    } else {
      b = m;
    }
  }
  return sign * 0.5 * (a + b);
}

std::optional<BemPoint> equilibrium_point(const RobotModel& model, const Vec& q,
                                          double delta_limit) {
  const double gb = gravity_torque_roll(model, q);
  const auto d = steering_for_torque(model, gb, delta_limit);
  if (!d) return std::nullopt;
  BemPoint p;
  p.q = q;
  p.delta = *d;
  p.tau_b = steering::balance_torque_90(*d, model.total_mass(), model.bike);
  p.residual = std::abs(gb - p.tau_b);
  return p;
}

namespace {

// Extremes of G_b over the searchable joints at fixed roll, by cyclic
// coordinate search on a grid refined by golden-section.
struct GbRange {
  double value;
  Vec theta;
};

GbRange coordinate_search(const RobotModel& model, double phi, bool maximize,
                          const CapabilityOptions& opt, Vec theta) {
  const int n = model.num_links();
  const int searched = opt.full_joint_search ? n : std::min(3, n);
  const double sgn = maximize ? 1.0 : -1.0;
  const auto value = [&](const Vec& th) {
    return sgn * gravity_torque_roll(model, with_roll(phi, th));
  };
  const auto lo = [&](int j) {
    return model.bounds.empty() ? -units::kPi : std::max(-units::kPi, model.bounds.lower[j + 1]);
  };
  const auto hi = [&](int j) {
    return model.bounds.empty() ? units::kPi : std::min(units::kPi, model.bounds.upper[j + 1]);
  };
  double best = value(theta);
  for (int sweep = 0; sweep < opt.coordinate_sweeps; ++sweep) {
    const double before = best;
    for (int j = 0; j < searched; ++j) {
      const double a0 = lo(j), b0 = hi(j);
      const double step = (b0 - a0) / opt.coordinate_grid;
      Vec th = theta;
      double bx = theta[j], bv = best;
      for (int k = 0; k <= opt.coordinate_grid; ++k) {
        th[j] = a0 + k * step;
        const double v = value(th);
        if (v > bv) {
          bv = v;
          bx = th[j];
        }
      }
      // Golden-section refinement around the best grid point.
      constexpr double g = 0.6180339887498949;
      double a = std::max(a0, bx - step), b = std::min(b0, bx + step);
      double c = b - g * (b - a), d = a + g * (b - a);
      th[j] = c;
      double fc = value(th);
      th[j] = d;
      double fd = value(th);
      while (b - a > 1e-9) {
        if (fc > fd) {
          b = d, d = c, fd = fc, c = b - g * (b - a);
          th[j] = c;
          fc = value(th);
        } else {
          a = c, c = d, fc = fd, d = a + g * (b - a);
          th[j] = d;
          fd = value(th);
        }
      }
      th[j] = 0.5 * (a + b);
      const double v = value(th);
      if (v > bv) {
        bv = v;
        bx = th[j];
      }
      theta[j] = bx;
      best = bv;
    }
    if (best - before <= 1e-12 * (1.0 + std::abs(best))) break;
  }
  return {sgn * best, theta};
}

// Best of several coordinate searches: warm starts plus the top cells of a
// coarse grid over the searched joints.
GbRange extreme_gb(const RobotModel& model, double phi, bool maximize, const CapabilityOptions& opt,
                   const std::vector<Vec>& warm) {
  const int n = model.num_links();
  const int searched = opt.full_joint_search ? n : std::min(3, n);
  const Vec home = model.home.size() == n ? model.home : Vec::Zero(n);
  const double sgn = maximize ? 1.0 : -1.0;
  std::vector<std::pair<double, Vec>> seeds;
  constexpr int kCells = 6;
  const int total = static_cast<int>(std::pow(kCells, std::min(searched, 3)));
  for (int c = 0; c < total; ++c) {
    Vec th = home;
    int code = c;
    for (int j = 0; j < std::min(searched, 3); ++j) {
      th[j] = -units::kPi + (code % kCells + 0.5) * 2.0 * units::kPi / kCells;
      code /= kCells;
    }
    seeds.emplace_back(sgn * gravity_torque_roll(model, with_roll(phi, th)), th);
  }
  std::stable_sort(seeds.begin(), seeds.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Vec> starts = warm;
  starts.push_back(home);
  for (size_t k = 0; k < std::min<size_t>(3, seeds.size()); ++k) starts.push_back(seeds[k].second);
  GbRange best{-std::numeric_limits<double>::infinity(), home};
  for (const Vec& s : starts) {
    const GbRange r = coordinate_search(model, phi, maximize, opt, s);
    if (sgn * r.value > sgn * best.value || !std::isfinite(best.value)) best = r;
  }
  return best;
}

}  // namespace

CapabilityEstimate max_roll_capability(const RobotModel& model, Strategy strategy,
                                       const CapabilityOptions& opt) {
  const double M = model.total_mass();
  CapabilityEstimate est;
  est.strategy = strategy;
  steering::TorquePeak peak;
  if (strategy == Strategy::OneWheel) {
    peak = steering::max_one_wheel_torque(opt.delta_range, M, model.bike);
  } else {
    peak = steering::max_balance_torque_90(opt.delta_range, M, model.bike);
  }
  est.tau_b_max = peak.torque;
  est.achieving_delta = peak.delta;
  const Vec home = model.home.size() == model.num_links() ? model.home : Vec::Zero(model.num_links());
  const bool use_arm = strategy == Strategy::TwoWheelArm && model.num_links() > 0;

  // Balanced at roll phi iff the attainable G_b interval meets [-tau_max, tau_max].
  std::vector<Vec> warm;
  const auto feasible = [&](double phi, Vec* theta_out) {
    if (!use_arm) {
      const double gb = gravity_torque_roll(model, with_roll(phi, home));
      if (theta_out) *theta_out = home;
      return std::abs(gb) <= peak.torque;
    }
    // Positive roll pulls G_b negative, so the arm pushes it up, and vice versa.
    const GbRange r = extreme_gb(model, phi, phi >= 0.0, opt, warm);
    if (theta_out) *theta_out = r.theta;
    warm = {r.theta};
    return phi >= 0.0 ? r.value >= -peak.torque : r.value <= peak.torque;
  };

  const auto side = [&](double dir, Vec& theta_at) {
    // Coarse scan from upright, then bisection on the first infeasible cell.
    constexpr int kScan = 80;
    const double step = opt.phi_guard / kScan;
    double good = 0.0;
    Vec th_good = home;
    if (!feasible(0.0, &th_good)) {
      theta_at = th_good;
      return 0.0;
    }
    double bad = -1.0;
    for (int k = 1; k <= kScan; ++k) {
      Vec th;
      if (feasible(dir * k * step, &th)) {
        good = k * step;
        th_good = th;
      } else {
        bad = k * step;
        break;
      }
    }
    if (bad < 0) {
      theta_at = th_good;
      return good;
    }
    while (bad - good > opt.phi_tolerance) {
      const double mid = 0.5 * (good + bad);
      Vec th;
      if (feasible(dir * mid, &th)) {
        good = mid;
        th_good = th;
      } else {
        bad = mid;
      }
    }
    theta_at = th_good;
    return good;
  };

  Vec th_pos, th_neg;
  const double pos = side(1.0, th_pos);
  const double neg = side(-1.0, th_neg);
  est.phi_b_max = std::min(pos, neg);
  est.achieving_theta = pos <= neg ? th_pos : th_neg;
  return est;
}

VelocityBound velocity_bound_check(const RobotModel& model, const Vec& q, const Vec& qdot,
                                   const steering::SteeringLimits& limits) {
  VelocityBound vb;
  vb.lhs = std::abs(gravity_gradient(model, q).dot(qdot));
  vb.rhs = steering::torque_rate_h_max(limits.delta_max, model.total_mass(), model.bike).value *
           limits.delta_rate_max;
  vb.margin = vb.rhs - vb.lhs;
  vb.satisfied = vb.margin >= 0.0;
  return vb;
}

}  // namespace bikebot::bem
