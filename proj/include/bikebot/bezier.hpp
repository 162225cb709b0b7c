#pragma once

#include "bikebot/model.hpp"

namespace bikebot {

/// Degree-N Bezier curve per coordinate over normalised progress
/// s = (t - t0) / (tf - t0). Column j of `control_points` is p_j.
struct BezierTrajectory {
  int degree = 0;
  Mat control_points;  ///< (n+1) x (N+1)
  double t0 = 0.0;
  double tf = 1.0;

  [[nodiscard]] int dim() const { return static_cast<int>(control_points.rows()); }
  [[nodiscard]] double duration() const { return tf - t0; }
  void validate() const;
};

struct BezierSample {
  Vec q;
  Vec qdot;
  Vec qddot;
};

/// Bernstein basis b_{j,N}(s) for j = 0..N.
Vec bernstein_basis(int degree, double s);

/// Weights w such that q(s) = P w, qdot = P w1, qddot = P w2 (time derivatives).
struct BasisWeights {
  Vec w0, w1, w2;
};
BasisWeights basis_weights(int degree, double s, double duration);

/// de Casteljau on the control points and their hodographs. Throws
/// std::out_of_range when t lies outside [t0, tf] by more than 1e-12 (tf - t0).
BezierSample bezier_eval(const BezierTrajectory& traj, double t);
BezierSample bezier_eval_s(const BezierTrajectory& traj, double s);

/// Control points p_0..p_2 and p_{N-2}..p_N that reproduce the requested
/// boundary position, velocity and acceleration (time derivatives). Requires N >= 5.
void pin_boundary(BezierTrajectory& traj, const Vec& q0, const Vec& v0, const Vec& a0,
                  const Vec& q1, const Vec& v1, const Vec& a1);

}  // namespace bikebot
