#include "bikebot/dynamics.hpp"

#include <numeric>

#include "bikebot/kinematics.hpp"

namespace bikebot {

namespace {

// Platform rotational inertia about G in the platform frame: only the roll axis.
Mat3 platform_inertia(const RobotModel& model) {
  Mat3 I = Mat3::Zero();
  I(0, 0) = model.bike.I_b;
  return I;
}

Mat3 world_inertia(const Transform& frame, const Mat3& body_inertia) {
  const Mat3 R = frame.linear();
  return R * body_inertia * R.transpose();
}

}  // namespace

double EnergyBreakdown::kinetic() const {
  return std::accumulate(T_links.begin(), T_links.end(), T_b);
}

double EnergyBreakdown::potential() const {
  return std::accumulate(U_links.begin(), U_links.end(), U_b);
}

EnergyBreakdown energies(const RobotModel& model, const Vec& q, const Vec& qdot, double delta) {
  check_dimension(model, q, "energies");
  check_dimension(model, qdot, "energies");
  const auto& bike = model.bike;
  const ChainFrames f = forward_kinematics(model, q);
  EnergyBreakdown e;

  const Vec3 pG = platform_com(model, f);
  const Vec3 omega_b(qdot[0], 0.0, 0.0);
  const Vec3 vG = omega_b.cross(pG);
  e.T_b = 0.5 * omega_b.dot(platform_inertia(model) * omega_b) + 0.5 * bike.m_b * vG.squaredNorm();
  const double dh = model.height_change ? model.height_change(delta, q[0]) : 0.0;
  e.U_b = bike.m_b * bike.g * (pG.z() + dh);

  for (int i = 1; i <= model.num_links(); ++i) {
    const auto& link = model.links[i - 1];
    const Vec3 pc = link_com(model, f, i);
    const Eigen::Matrix<double, 6, 1> twist = point_jacobian(model, f, i, pc) * qdot;
    const Vec3 v = twist.head<3>();
    const Vec3 w = twist.tail<3>();
    const Mat3 Iw = world_inertia(f.links[i - 1], link.inertia);
    e.T_links.push_back(0.5 * link.mass * v.squaredNorm() + 0.5 * w.dot(Iw * w));
    e.U_links.push_back(link.mass * bike.g * pc.z());
  }
  return e;
}

Mat mass_matrix(const RobotModel& model, const Vec& q) {
  check_dimension(model, q, "mass_matrix");
  const ChainFrames f = forward_kinematics(model, q);
  const int dof = model.dof();
  Mat D = Mat::Zero(dof, dof);

  const auto accumulate_body = [&](int body, const Vec3& com, double mass, const Mat3& Iw) {
    const auto J = point_jacobian(model, f, body, com);
    const auto Jv = J.topRows<3>();
    const auto Jw = J.bottomRows<3>();
    D.noalias() += mass * Jv.transpose() * Jv;
    D.noalias() += Jw.transpose() * Iw * Jw;
  };

  accumulate_body(0, platform_com(model, f), model.bike.m_b,
                  world_inertia(f.platform, platform_inertia(model)));
  for (int i = 1; i <= model.num_links(); ++i) {
    const auto& link = model.links[i - 1];
    accumulate_body(i, link_com(model, f, i), link.mass, world_inertia(f.links[i - 1], link.inertia));
  }
  return 0.5 * (D + D.transpose());
}

Mat coriolis_matrix(const RobotModel& model, const Vec& q, const Vec& qdot) {
  check_dimension(model, qdot, "coriolis_matrix");
  const int dof = model.dof();
  std::vector<Mat> dD(dof);
  for (int i = 0; i < dof; ++i) {
    Vec qp = q, qm = q;
    qp[i] += kFirstDerivativeStep;
    qm[i] -= kFirstDerivativeStep;
    dD[i] = (mass_matrix(model, qp) - mass_matrix(model, qm)) / (2.0 * kFirstDerivativeStep);
  }
  Mat C = Mat::Zero(dof, dof);
  for (int k = 0; k < dof; ++k) {
    for (int j = 0; j < dof; ++j) {
      double c = 0.0;
      for (int i = 0; i < dof; ++i) {
        c += 0.5 * (dD[i](k, j) + dD[j](k, i) - dD[k](i, j)) * qdot[i];
      }
      C(k, j) = c;
    }
  }
  return C;
}

Vec gravity_vector(const RobotModel& model, const Vec& q, double delta) {
  check_dimension(model, q, "gravity_vector");
  const ChainFrames f = forward_kinematics(model, q);
  const double g = model.bike.g;
  Vec G = Vec::Zero(model.dof());
  {
    const auto J = point_jacobian(model, f, 0, platform_com(model, f));
    G += model.bike.m_b * g * J.row(2).transpose();
  }
  for (int i = 1; i <= model.num_links(); ++i) {
    const auto J = point_jacobian(model, f, i, link_com(model, f, i));
    G += model.links[i - 1].mass * g * J.row(2).transpose();
  }
  if (model.height_change) {
    const double h = kFirstDerivativeStep;
    G[0] += model.bike.m_b * g *
            (model.height_change(delta, q[0] + h) - model.height_change(delta, q[0] - h)) / (2 * h);
  }
  return G;
}

double gravity_torque_roll(const RobotModel& model, const Vec& q) {
  check_dimension(model, q, "gravity_torque_roll");
  const ChainFrames f = forward_kinematics(model, q);
  const double g = model.bike.g;
  // Roll column of a point Jacobian is e_x x p, whose z component is p_y.
  double Gb = model.bike.m_b * g * platform_com(model, f).y();
  for (int i = 1; i <= model.num_links(); ++i) {
    Gb += model.links[i - 1].mass * g * link_com(model, f, i).y();
  }
  if (model.height_change) {
    const double h = kFirstDerivativeStep;
    Gb += model.bike.m_b * g *
          (model.height_change(0.0, q[0] + h) - model.height_change(0.0, q[0] - h)) / (2 * h);
  }
  return Gb;
}

Eigen::RowVectorXd gravity_gradient(const RobotModel& model, const Vec& q) {
  const int dof = model.dof();
  Eigen::RowVectorXd JG(dof);
  for (int i = 0; i < dof; ++i) {
    Vec qp = q, qm = q;
    qp[i] += kFirstDerivativeStep;
    qm[i] -= kFirstDerivativeStep;
    JG[i] = (gravity_torque_roll(model, qp) - gravity_torque_roll(model, qm)) /
            (2.0 * kFirstDerivativeStep);
  }
  return JG;
}

Eigen::RowVectorXd gravity_gradient_exact(const RobotModel& model, const Vec& q) {
  check_dimension(model, q, "gravity_gradient_exact");
  const ChainFrames f = forward_kinematics(model, q);
  const double g = model.bike.g;
  Eigen::RowVectorXd JG =
      model.bike.m_b * g * point_jacobian(model, f, 0, platform_com(model, f)).row(1);
  for (int i = 1; i <= model.num_links(); ++i) {
    JG += model.links[i - 1].mass * g * point_jacobian(model, f, i, link_com(model, f, i)).row(1);
  }
  if (model.height_change) {
    const double h = kSecondDerivativeStep;
    JG[0] += model.bike.m_b * g *
             (model.height_change(0.0, q[0] + h) - 2.0 * model.height_change(0.0, q[0]) +
              model.height_change(0.0, q[0] - h)) /
             (h * h);
  }
  return JG;
}

Mat gravity_jacobian(const RobotModel& model, const Vec& q) {
  const int dof = model.dof();
  Mat H(dof, dof);
  for (int i = 0; i < dof; ++i) {
    Vec qp = q, qm = q;
    qp[i] += kFirstDerivativeStep;
    qm[i] -= kFirstDerivativeStep;
    H.col(i) = (gravity_vector(model, qp) - gravity_vector(model, qm)) / (2.0 * kFirstDerivativeStep);
  }
  return H;
}

Vec inverse_dynamics(const RobotModel& model, const Vec& q, const Vec& qdot, const Vec& qddot) {
  check_dimension(model, q, "inverse_dynamics");
  check_dimension(model, qdot, "inverse_dynamics");
  check_dimension(model, qddot, "inverse_dynamics");
  const ChainFrames f = forward_kinematics(model, q);
  const int dof = model.dof();

  // Body k is moved by joint k; body 0 is the platform, joint 0 the roll pivot.
  std::vector<Vec3> axis(dof), joint_point(dof), com(dof), omega(dof), alpha(dof), acc_joint(dof);
  std::vector<Mat3> inertia(dof);
  std::vector<double> mass(dof);
  axis[0] = Vec3::UnitX();
  joint_point[0] = Vec3::Zero();
  com[0] = platform_com(model, f);
  inertia[0] = world_inertia(f.platform, platform_inertia(model));
  mass[0] = model.bike.m_b;
  for (int k = 1; k < dof; ++k) {
    axis[k] = f.z_axis(k - 1);
    joint_point[k] = f.origin(k - 1);
    com[k] = link_com(model, f, k);
    inertia[k] = world_inertia(f.links[k - 1], model.links[k - 1].inertia);
    mass[k] = model.links[k - 1].mass;
  }

  // Gravity enters as an upward acceleration of the fixed pivot.
  Vec3 w_prev = Vec3::Zero(), a_prev = Vec3::Zero();
  Vec3 acc_prev(0.0, 0.0, model.bike.g);
  Vec3 point_prev = Vec3::Zero();
  for (int k = 0; k < dof; ++k) {
    const Vec3 d = joint_point[k] - point_prev;
    acc_joint[k] = acc_prev + a_prev.cross(d) + w_prev.cross(w_prev.cross(d));
    omega[k] = w_prev + axis[k] * qdot[k];
    alpha[k] = a_prev + axis[k] * qddot[k] + w_prev.cross(axis[k] * qdot[k]);
    w_prev = omega[k];
    a_prev = alpha[k];
    acc_prev = acc_joint[k];
    point_prev = joint_point[k];
  }

  Vec tau(dof);
  Vec3 f_child = Vec3::Zero(), n_child = Vec3::Zero();
  Vec3 child_point = Vec3::Zero();
  for (int k = dof - 1; k >= 0; --k) {
    const Vec3 r = com[k] - joint_point[k];
    const Vec3 a_com = acc_joint[k] + alpha[k].cross(r) + omega[k].cross(omega[k].cross(r));
    const Vec3 F = mass[k] * a_com;
    const Vec3 N = inertia[k] * alpha[k] + omega[k].cross(inertia[k] * omega[k]);
    Vec3 f_k = F + f_child;
    Vec3 n_k = N + r.cross(F) + n_child;
    if (k + 1 < dof) n_k += (child_point - joint_point[k]).cross(f_child);
    tau[k] = axis[k].dot(n_k);
    f_child = f_k;
    n_child = n_k;
    child_point = joint_point[k];
  }
  return tau;
}

Vec bias_forces(const RobotModel& model, const Vec& q, const Vec& qdot) {
  return inverse_dynamics(model, q, qdot, Vec::Zero(model.dof()));
}

DynamicsMatrices dynamics_matrices(const RobotModel& model, const Vec& q, const Vec& qdot) {
  DynamicsMatrices m;
  m.D = mass_matrix(model, q);
  m.C = coriolis_matrix(model, q, qdot);
  m.G = gravity_vector(model, q);
  return m;
}

}  // namespace bikebot
