#pragma once

#include <vector>

#include "bikebot/model.hpp"

namespace bikebot {

using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

Mat3 rot_x(double angle);
Mat3 rot_z(double angle);

/// DH link transform A^{i-1}_i: rotation R_z(theta) R_x(alpha), translation
/// [a cos(theta), a sin(theta), d]. `theta` excludes the link's offset.
Transform link_transform(const LinkParams& link, double theta);

/// All frames of one configuration. Transforms map frame coordinates into the
/// inertial frame unless noted.
struct ChainFrames {
  Transform platform;              ///< rolled platform frame B
  Transform base;                  ///< F_0 (arm base at S)
  std::vector<Transform> links;    ///< F_1..F_n
  std::vector<Transform> in_base;  ///< T_i: F_i -> F_0, i = 1..n
  Transform end_effector;          ///< F_n, or F_0 when n = 0
  Pose pose;                       ///< end-effector pose

  /// Origin and z axis of F_{j} for j = 0..n, inertial coordinates.
  [[nodiscard]] Vec3 origin(int j) const;
  [[nodiscard]] Vec3 z_axis(int j) const;
};

ChainFrames forward_kinematics(const RobotModel& model, const Vec& q);
inline ChainFrames forward_kinematics(const RobotModel& model, const Configuration& q) {
  return forward_kinematics(model, q.packed());
}

/// Mass-center position of link i (1-based) in the inertial frame.
Vec3 link_com(const RobotModel& model, const ChainFrames& frames, int i);
/// Platform mass center G in the inertial frame.
Vec3 platform_com(const RobotModel& model, const ChainFrames& frames);

/// 6 x n Jacobian from joint rates to the twist [v; w] of link i's mass center,
/// expressed in F_0. Columns beyond i are zero.
Jacobian link_jacobian(const RobotModel& model, const Vec& q, int i);

/// 6 x (n+1) Jacobian of a point rigidly attached to link `body` (0 = platform,
/// 1..n = arm links), inertial coordinates, first column the roll axis.
Jacobian point_jacobian(const RobotModel& model, const ChainFrames& frames, int body,
                        const Vec3& point);

/// 6 x (n+1) end-effector Jacobian J_e in the inertial frame.
Jacobian system_jacobian(const RobotModel& model, const Vec& q);

}  // namespace bikebot
