#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bikebot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Transform = Eigen::Isometry3d;

/// Physical parameters of the two-wheel steered platform.
struct BikebotParams {
  double m_b = 46.9;      ///< platform mass (kg)
  double I_b = 3.2;       ///< roll inertia about the mass-center roll axis (kg m^2)
  double h_G = 0.53;      ///< mass-center height above the contact line (m)
  double l = 1.2;         ///< wheelbase (m)
  double epsilon = 0.349065850398865915;  ///< caster angle (rad), 20 deg
  double R = 0.3;         ///< wheel radius (m)
  double g = 9.8;         ///< gravitational acceleration (m/s^2)

  void validate() const;
};

/// One revolute manipulator link in standard DH form plus its inertial data.
struct LinkParams {
  double theta_offset = 0.0;  ///< rad
  double d = 0.0;             ///< m
  double a = 0.0;             ///< m
  double alpha = 0.0;         ///< rad
  double mass = 0.0;          ///< kg
  Vec3 com = Vec3::Zero();    ///< mass center in the link frame (m)
  Mat3 inertia = Mat3::Zero();  ///< about the mass center, link-frame axes (kg m^2)

  void validate() const;

  /// Geometric midpoint of the link's a/d offsets, expressed in the link frame.
  static Vec3 midpoint_com(double d, double a, double alpha);
};

/// Box bounds on q = [phi_b, theta_1..theta_n]. Empty vectors mean unbounded.
struct ConfigBounds {
  Vec lower;
  Vec upper;

  [[nodiscard]] bool empty() const { return lower.size() == 0; }
  [[nodiscard]] bool contains(const Vec& q, double tol = 0.0) const;
  [[nodiscard]] Vec clamp(const Vec& q) const;
};

/// Steering-induced change of the platform mass-center height, dh_G(delta, phi_b).
using HeightChangeFn = std::function<double(double delta, double phi_b)>;

/// Bikebot platform + n-link arm. Immutable once built; all kinematic and
/// dynamic routines take it by const reference.
///
/// Frames: the inertial x axis runs along the contact line C2 -> C1, z points up,
/// and the origin is the ground projection of the platform mass center G.
/// The platform rolls about the x axis by phi_b; positive roll moves G toward -y.
/// The arm base frame F_0 sits at point S given by `mount` in the platform frame.
struct RobotModel {
  BikebotParams bike;
  std::vector<LinkParams> links;
  Transform mount = Transform::Identity();
  ConfigBounds bounds;
  Vec home;  ///< reference joint angles (n), used when a strategy keeps the arm fixed
  HeightChangeFn height_change;  ///< optional; null means dh_G = 0

  [[nodiscard]] int num_links() const { return static_cast<int>(links.size()); }
  [[nodiscard]] int dof() const { return num_links() + 1; }
  [[nodiscard]] double arm_mass() const;
  [[nodiscard]] double total_mass() const { return bike.m_b + arm_mass(); }
  /// Position of S (arm base origin) in the platform frame.
  [[nodiscard]] Vec3 p0() const { return mount.translation(); }
  /// Home configuration with zero roll.
  [[nodiscard]] Vec home_q() const;

  void validate() const;
};

/// Platform parameters of the prototype (SI units).
BikebotParams default_bikebot_params();
/// Six-link arm from the prototype's DH and inertia table.
std::vector<LinkParams> default_arm_links();
/// Default mount: S directly above G at height h_G + 0.1 m, F_0 axes aligned with the platform.
Transform default_mount(const BikebotParams& bike);
/// Full default model: prototype platform + arm + default mount, bounds and home posture.
RobotModel default_model();
/// Same platform with the arm removed (n = 0).
RobotModel platform_only_model();

/// q = [phi_b, theta^T]^T.
struct Configuration {
  double phi_b = 0.0;
  Vec theta;

  Configuration() = default;
  Configuration(double roll, Vec joints) : phi_b(roll), theta(std::move(joints)) {}

  [[nodiscard]] int dim() const { return static_cast<int>(theta.size()) + 1; }
  [[nodiscard]] Vec packed() const;
  static Configuration unpack(const Vec& q);
};

/// End-effector pose in the inertial frame. Orientation holds Z-Y-X Euler
/// angles ordered (yaw about z, pitch about y, roll about x).
struct Pose {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::Zero();

  [[nodiscard]] Eigen::Matrix<double, 6, 1> vector() const;
  static Pose from_vector(const Eigen::Matrix<double, 6, 1>& v);
  [[nodiscard]] Mat3 rotation() const;
  static Pose from_transform(const Transform& T);
};

/// Pose difference as (position in cm, orientation in deg) with wrapped angles.
/// This is the unit system of the pose tables and of the planner's pose term.
Eigen::Matrix<double, 6, 1> pose_error_cm_deg(const Pose& target, const Pose& actual);
/// Position error norm in metres and rotation-angle error in radians.
double position_error(const Pose& a, const Pose& b);
double orientation_error(const Pose& a, const Pose& b);

void check_dimension(const RobotModel& model, const Vec& q, const char* what);

}  // namespace bikebot
