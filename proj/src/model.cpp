#include "bikebot/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bikebot/errors.hpp"
#include "bikebot/units.hpp"

#include <Eigen/Eigenvalues>

namespace bikebot {

using units::rad;

void BikebotParams::validate() const {
  if (!(m_b > 0 && I_b > 0 && h_G > 0 && l > 0 && R > 0 && g > 0)) {
    throw ConfigError("bikebot parameters must be strictly positive");
  }
  if (!(epsilon > 0 && epsilon < units::kPi / 2)) {
    throw ConfigError("caster angle must lie in (0, 90) deg");
  }
}

void LinkParams::validate() const {
  if (!(mass > 0)) throw ConfigError("link mass must be positive");
  if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ConfigError("link inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia);
  if (eig.eigenvalues().minCoeff() < -1e-12) {
    throw ConfigError("link inertia must be positive semidefinite");
  }
}

Vec3 LinkParams::midpoint_com(double d, double a, double alpha) {
  // Previous frame origin seen from this link's frame is -R_x(alpha)^T [a, 0, d].
  return -0.5 * Vec3(a, d * std::sin(alpha), d * std::cos(alpha));
}

bool ConfigBounds::contains(const Vec& q, double tol) const {
  if (empty()) return true;
  return ((q - lower).array() >= -tol).all() && ((upper - q).array() >= -tol).all();
}

Vec ConfigBounds::clamp(const Vec& q) const {
  if (empty()) return q;
  return q.cwiseMax(lower).cwiseMin(upper);
}

double RobotModel::arm_mass() const {
  double m = 0.0;
  for (const auto& link : links) m += link.mass;
  return m;
}

Vec RobotModel::home_q() const {
  Vec q = Vec::Zero(dof());
  if (home.size() == num_links()) q.tail(num_links()) = home;
  return q;
}

void RobotModel::validate() const {
  bike.validate();
  for (const auto& link : links) link.validate();
  const Mat3 r = mount.linear();
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10 ||
      std::abs(r.determinant() - 1.0) > 1e-10) {
    throw ConfigError("mount rotation must be orthonormal with determinant +1");
  }
  if (!bounds.empty()) {
    if (bounds.lower.size() != dof() || bounds.upper.size() != dof()) {
      throw ConfigError("configuration bounds must have n+1 entries");
    }
    if (((bounds.upper - bounds.lower).array() < 0).any()) {
      throw ConfigError("configuration bounds must satisfy lower <= upper");
    }
  }
  if (home.size() != 0 && home.size() != num_links()) {
    throw ConfigError("home posture must have n entries");
  }
}

BikebotParams default_bikebot_params() { return BikebotParams{}; }

std::vector<LinkParams> default_arm_links() {
  struct Row {
    double alpha_deg, a, d, mass, ixx, iyy, izz;
  };
  static constexpr Row rows[] = {
      {90, 0.0, 0.276, 1.0, 0.0022, 0.0006, 0.0023},
      {180, 0.41, 0.0, 1.5, 0.0041, 0.0255, 0.0217},
      {90, 0.0, -0.01, 0.8, 0.0029, 0.0027, 0.0004},
      {60, 0.0, -0.25, 0.3, 0.7085, 0.7405, 0.1782},
      {60, 0.0, -0.009, 0.3, 0.8275, 0.8520, 0.1708},
      {180, 0.0, 0.203, 0.6, 0.0048, 0.0048, 0.0002},
  };
  std::vector<LinkParams> links;
  for (const auto& r : rows) {
    LinkParams link;
    link.alpha = rad(r.alpha_deg);
    link.a = r.a;
    link.d = r.d;
    link.mass = r.mass;
    link.inertia = Vec3(r.ixx, r.iyy, r.izz).asDiagonal();
    link.com = LinkParams::midpoint_com(link.d, link.a, link.alpha);
    links.push_back(link);
  }
  return links;
}

Transform default_mount(const BikebotParams& bike) {
  Transform mount = Transform::Identity();
  mount.translation() = Vec3(0.0, 0.0, bike.h_G + 0.1);
  return mount;
}

RobotModel default_model() {
  RobotModel model;
  model.bike = default_bikebot_params();
  model.links = default_arm_links();
  model.mount = default_mount(model.bike);
  const int n = model.num_links();
  model.bounds.lower = Vec::Constant(n + 1, -2.0 * units::kPi);
  model.bounds.upper = Vec::Constant(n + 1, 2.0 * units::kPi);
  model.bounds.lower[0] = rad(-20.0);
  model.bounds.upper[0] = rad(20.0);
  // Arm folded in the vertical plane through the contact line: every link mass
  // center has y = 0, so the zero-roll configuration is in equilibrium.
  model.home = Vec::Zero(n);
  model.home << rad(90.0), rad(90.0), rad(90.0), 0.0, 0.0, 0.0;
  return model;
}

RobotModel platform_only_model() {
  RobotModel model;
  model.bike = default_bikebot_params();
  model.mount = default_mount(model.bike);
  model.bounds.lower = Vec::Constant(1, rad(-20.0));
  model.bounds.upper = Vec::Constant(1, rad(20.0));
  model.home = Vec::Zero(0);
  return model;
}

Vec Configuration::packed() const {
  Vec q(dim());
  q[0] = phi_b;
  q.tail(theta.size()) = theta;
  return q;
}

Configuration Configuration::unpack(const Vec& q) {
  if (q.size() < 1) throw DimensionMismatch("configuration vector is empty");
  return Configuration(q[0], q.tail(q.size() - 1));
}

Eigen::Matrix<double, 6, 1> Pose::vector() const {
  Eigen::Matrix<double, 6, 1> v;
  v << position, orientation;
  return v;
}

Pose Pose::from_vector(const Eigen::Matrix<double, 6, 1>& v) {
  Pose p;
  p.position = v.head<3>();
  p.orientation = v.tail<3>();
  return p;
}

Mat3 Pose::rotation() const {
  return (Eigen::AngleAxisd(orientation[0], Vec3::UnitZ()) *
          Eigen::AngleAxisd(orientation[1], Vec3::UnitY()) *
          Eigen::AngleAxisd(orientation[2], Vec3::UnitX()))
      .toRotationMatrix();
}

Pose Pose::from_transform(const Transform& T) {
  const Mat3 r = T.linear();
  Pose p;
  p.position = T.translation();
  const double sp = std::clamp(-r(2, 0), -1.0, 1.0);
  p.orientation[1] = std::asin(sp);
  p.orientation[0] = std::atan2(r(1, 0), r(0, 0));
  p.orientation[2] = std::atan2(r(2, 1), r(2, 2));
  for (int i = 0; i < 3; ++i) p.orientation[i] = units::wrap_angle(p.orientation[i]);
  return p;
}

Eigen::Matrix<double, 6, 1> pose_error_cm_deg(const Pose& target, const Pose& actual) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = 100.0 * (target.position - actual.position);
  for (int i = 0; i < 3; ++i) {
    e[3 + i] = units::deg(units::wrap_angle(target.orientation[i] - actual.orientation[i]));
  }
  return e;
}

double position_error(const Pose& a, const Pose& b) { return (a.position - b.position).norm(); }

double orientation_error(const Pose& a, const Pose& b) {
  Eigen::AngleAxisd aa(a.rotation().transpose() * b.rotation());
  return std::abs(aa.angle());
}

void check_dimension(const RobotModel& model, const Vec& q, const char* what) {
  if (q.size() != model.dof()) {
    std::ostringstream os;
    os << what << ": expected dimension " << model.dof() << ", got " << q.size();
    throw DimensionMismatch(os.str());
  }
}

}  // namespace bikebot
