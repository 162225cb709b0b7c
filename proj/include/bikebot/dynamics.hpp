#pragma once

#include <vector>

#include "bikebot/model.hpp"

namespace bikebot {

/// Kinetic and potential energy per body (J).
struct EnergyBreakdown {
  double T_b = 0.0;
  double U_b = 0.0;
  std::vector<double> T_links;
  std::vector<double> U_links;

  [[nodiscard]] double kinetic() const;
  [[nodiscard]] double potential() const;
};

/// D(q) qdd + C(q, qd) qd + G(q) = tau, with the roll row/column first.
struct DynamicsMatrices {
  Mat D;
  Mat C;
  Vec G;

  [[nodiscard]] double D_bb() const { return D(0, 0); }
  [[nodiscard]] Eigen::RowVectorXd D_btheta() const { return D.row(0).tail(D.cols() - 1); }
  [[nodiscard]] Vec D_thetab() const { return D.col(0).tail(D.rows() - 1); }
  [[nodiscard]] Mat D_thetatheta() const { return D.bottomRightCorner(D.rows() - 1, D.cols() - 1); }
  [[nodiscard]] Eigen::RowVectorXd C_b() const { return C.row(0); }
  [[nodiscard]] Mat C_theta() const { return C.bottomRows(C.rows() - 1); }
  [[nodiscard]] double G_b() const { return G[0]; }
  [[nodiscard]] Vec G_theta() const { return G.tail(G.size() - 1); }
};

/// Finite-difference steps used by the numerical derivatives.
inline constexpr double kFirstDerivativeStep = 1e-6;
inline constexpr double kSecondDerivativeStep = 1e-4;

/// `delta` feeds the optional steering height-change hook; it is ignored otherwise.
EnergyBreakdown energies(const RobotModel& model, const Vec& q, const Vec& qdot,
                         double delta = 0.0);

Mat mass_matrix(const RobotModel& model, const Vec& q);

/// Christoffel construction from central differences of D; D_dot - 2C is skew.
Mat coriolis_matrix(const RobotModel& model, const Vec& q, const Vec& qdot);

/// G = dU/dq assembled from body Jacobians.
Vec gravity_vector(const RobotModel& model, const Vec& q, double delta = 0.0);

/// Total gravitational roll torque G_b(q).
double gravity_torque_roll(const RobotModel& model, const Vec& q);

/// J_G = dG_b/dq, central differences of the analytic G_b.
Eigen::RowVectorXd gravity_gradient(const RobotModel& model, const Vec& q);

/// J_G from the y rows of the body point Jacobians (no differencing of G_b).
/// Used where J_G is itself differentiated, e.g. inside constraint Jacobians.
Eigen::RowVectorXd gravity_gradient_exact(const RobotModel& model, const Vec& q);

/// Full Hessian of U, i.e. dG/dq (symmetric up to differencing error).
Mat gravity_jacobian(const RobotModel& model, const Vec& q);

/// Recursive Newton-Euler inverse dynamics; returns D qdd + C qd + G.
Vec inverse_dynamics(const RobotModel& model, const Vec& q, const Vec& qdot, const Vec& qddot);

/// C(q, qd) qd + G(q) via one Newton-Euler pass.
Vec bias_forces(const RobotModel& model, const Vec& q, const Vec& qdot);

DynamicsMatrices dynamics_matrices(const RobotModel& model, const Vec& q, const Vec& qdot);

}  // namespace bikebot
