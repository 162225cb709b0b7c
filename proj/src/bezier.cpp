#include "bikebot/bezier.hpp"

#include <cmath>
#include <stdexcept>

#include "bikebot/errors.hpp"

namespace bikebot {

void BezierTrajectory::validate() const {
  if (degree < 1 || control_points.cols() != degree + 1) {
    throw ConfigError("Bezier trajectory needs N+1 control points");
  }
  if (!(tf > t0)) throw ConfigError("Bezier trajectory needs tf > t0");
}

namespace {

// Evaluate a curve with control columns P at s by de Casteljau.
Vec de_casteljau(Mat P, double s) {
  const int n = static_cast<int>(P.cols());
  for (int r = 1; r < n; ++r) {
    for (int j = 0; j < n - r; ++j) P.col(j) = (1.0 - s) * P.col(j) + s * P.col(j + 1);
  }
  return P.col(0);
}

Mat hodograph(const Mat& P) {
  const int N = static_cast<int>(P.cols()) - 1;
  if (N < 1) return Mat::Zero(P.rows(), 1);
  return N * (P.rightCols(N) - P.leftCols(N));
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

Vec bernstein_basis(int degree, double s) {
  Vec b(degree + 1);
  for (int j = 0; j <= degree; ++j) {
    b[j] = binomial(degree, j) * std::pow(1.0 - s, degree - j) * std::pow(s, j);
  }
  return b;
}

BasisWeights basis_weights(int degree, double s, double duration) {
  const int N = degree;
  BasisWeights w;
  w.w0 = bernstein_basis(N, s);
  w.w1 = Vec::Zero(N + 1);
  w.w2 = Vec::Zero(N + 1);
  if (N >= 1) {
    const Vec b1 = bernstein_basis(N - 1, s);
    for (int j = 0; j < N; ++j) {
      w.w1[j] -= N * b1[j];
      w.w1[j + 1] += N * b1[j];
    }
    w.w1 /= duration;
  }
  if (N >= 2) {
    const Vec b2 = bernstein_basis(N - 2, s);
    const double c = N * (N - 1.0);
    for (int j = 0; j <= N - 2; ++j) {
      w.w2[j] += c * b2[j];
      w.w2[j + 1] -= 2.0 * c * b2[j];
      w.w2[j + 2] += c * b2[j];
    }
    w.w2 /= duration * duration;
  }
  return w;
}

BezierSample bezier_eval_s(const BezierTrajectory& traj, double s) {
  const double T = traj.duration();
  const Mat& P = traj.control_points;
  const Mat P1 = hodograph(P);
  const Mat P2 = hodograph(P1);
  BezierSample out;
  out.q = de_casteljau(P, s);
  out.qdot = de_casteljau(P1, s) / T;
  out.qddot = (traj.degree >= 2 ? de_casteljau(P2, s) : Vec::Zero(P.rows())) / (T * T);
  return out;
}

BezierSample bezier_eval(const BezierTrajectory& traj, double t) {
  const double T = traj.duration();
  const double slack = 1e-12 * T;
  if (t < traj.t0 - slack || t > traj.tf + slack) {
    throw std::out_of_range("bezier_eval: t outside [t0, tf]");
  }
  double s = (t - traj.t0) / T;
  s = std::min(1.0, std::max(0.0, s));
  return bezier_eval_s(traj, s);
}

void pin_boundary(BezierTrajectory& traj, const Vec& q0, const Vec& v0, const Vec& a0,
                  const Vec& q1, const Vec& v1, const Vec& a1) {
  const int N = traj.degree;
  if (N < 5) throw ConfigError("boundary pinning needs Bezier degree >= 5");
  const double T = traj.duration();
  auto& P = traj.control_points;
  // q'(0) = N (p1 - p0), q''(0) = N (N-1) (p2 - 2 p1 + p0), in s; time scaling by T.
  P.col(0) = q0;
  P.col(1) = q0 + v0 * T / N;
  P.col(2) = a0 * T * T / (N * (N - 1.0)) + 2.0 * P.col(1) - P.col(0);
  P.col(N) = q1;
  P.col(N - 1) = q1 - v1 * T / N;
  P.col(N - 2) = a1 * T * T / (N * (N - 1.0)) + 2.0 * P.col(N - 1) - P.col(N);
}

}  // namespace bikebot
