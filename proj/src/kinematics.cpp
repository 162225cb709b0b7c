#include "bikebot/kinematics.hpp"

#include <cmath>
#include <stdexcept>

#include "bikebot/errors.hpp"

namespace bikebot {

Mat3 rot_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Transform link_transform(const LinkParams& link, double theta) {
  const double th = theta + link.theta_offset;
  Transform A = Transform::Identity();
  A.linear() = rot_z(th) * rot_x(link.alpha);
  A.translation() = Vec3(link.a * std::cos(th), link.a * std::sin(th), link.d);
  return A;
}

Vec3 ChainFrames::origin(int j) const {
  return j == 0 ? base.translation() : links[j - 1].translation();
}

Vec3 ChainFrames::z_axis(int j) const {
  return j == 0 ? base.linear().col(2) : links[j - 1].linear().col(2);
}

ChainFrames forward_kinematics(const RobotModel& model, const Vec& q) {
  check_dimension(model, q, "forward_kinematics");
  const int n = model.num_links();
  ChainFrames f;
  f.platform = Transform::Identity();
  f.platform.linear() = rot_x(q[0]);
  f.base = f.platform * model.mount;
  f.links.reserve(n);
  f.in_base.reserve(n);
  Transform t = Transform::Identity();
  for (int i = 0; i < n; ++i) {
    t = t * link_transform(model.links[i], q[i + 1]);
    f.in_base.push_back(t);
    f.links.push_back(f.base * t);
  }
  f.end_effector = n > 0 ? f.links.back() : f.base;
  f.pose = Pose::from_transform(f.end_effector);
  return f;
}

Vec3 link_com(const RobotModel& model, const ChainFrames& frames, int i) {
  return frames.links[i - 1] * model.links[i - 1].com;
}

Vec3 platform_com(const RobotModel& model, const ChainFrames& frames) {
  return frames.platform * Vec3(0.0, 0.0, model.bike.h_G);
}

Jacobian link_jacobian(const RobotModel& model, const Vec& q, int i) {
  const int n = model.num_links();
  if (i < 1 || i > n) throw std::out_of_range("link_jacobian: link index out of range");
  const ChainFrames f = forward_kinematics(model, q);
  const Vec3 p = f.in_base[i - 1] * model.links[i - 1].com;
  Jacobian J = Jacobian::Zero(6, n);
  for (int j = 1; j <= i; ++j) {
    Vec3 z, o;
    if (j == 1) {
      z = Vec3::UnitZ();
      o = Vec3::Zero();
    } else {
      z = f.in_base[j - 2].linear().col(2);
      o = f.in_base[j - 2].translation();
    }
    J.block<3, 1>(0, j - 1) = z.cross(p - o);
    J.block<3, 1>(3, j - 1) = z;
  }
  return J;
}

Jacobian point_jacobian(const RobotModel& model, const ChainFrames& frames, int body,
                        const Vec3& point) {
  const int n = model.num_links();
  Jacobian J = Jacobian::Zero(6, n + 1);
  const Vec3 ex = Vec3::UnitX();
  J.block<3, 1>(0, 0) = ex.cross(point);
  J.block<3, 1>(3, 0) = ex;
  for (int j = 1; j <= body; ++j) {
    const Vec3 z = frames.z_axis(j - 1);
    J.block<3, 1>(0, j) = z.cross(point - frames.origin(j - 1));
    J.block<3, 1>(3, j) = z;
  }
  return J;
}

Jacobian system_jacobian(const RobotModel& model, const Vec& q) {
  const ChainFrames f = forward_kinematics(model, q);
  return point_jacobian(model, f, model.num_links(), f.end_effector.translation());
}

}  // namespace bikebot
