#pragma once

#include <Eigen/Dense>

#include "handover/kinematics.hpp"

namespace handover {

struct Wrench {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();

  Vector6d stacked() const;
  static Wrench from_stacked(const Vector6d& v);
};

/// Virtual mass-damper-spring rendered by the admittance law.
///
/// M must be symmetric positive definite; D and K symmetric positive
/// semi-definite. make() checks these and factorises M once.
class AdmittanceParams {
public:
  static AdmittanceParams make(const Matrix6d& M, const Matrix6d& D, const Matrix6d& K,
                               double force_weight = 1.0);

  /// M = diag(8 kg | 0.5 kg m^2), K = diag(400 N/m | 20 N m/rad), D = 2 sqrt(K M).
  static AdmittanceParams defaults();

  /// Diagonal M and K with per-axis critical damping.
  static AdmittanceParams critically_damped(const Vector6d& mass, const Vector6d& stiffness,
                                            double force_weight = 1.0);

  const Matrix6d& M() const { return M_; }
  const Matrix6d& D() const { return D_; }
  const Matrix6d& K() const { return K_; }
  double force_weight() const { return force_weight_; }

  Vector6d solve_mass(const Vector6d& rhs) const { return llt_.solve(rhs); }

private:
  AdmittanceParams() = default;

  Matrix6d M_, D_, K_;
  double force_weight_ = 1.0;
  Eigen::LLT<Matrix6d> llt_;
};

/// Translation difference stacked over the axis-angle of R_des * R^T.
Vector6d pose_error(const Pose& x_des, const Pose& x);

/// M^-1 (D (xd_des - xd) + K (x_des - x) - F_ext) + xdd_des.
Vector6d admittance_accel(const AdmittanceParams& p, const Pose& x_des, const Vector6d& x_dot_des,
                          const Vector6d& x_ddot_des, const Pose& x, const Vector6d& x_dot,
                          const Wrench& f_ext);

/// One explicit Euler step: x_dot + x_ddot * T_r.
Vector6d integrate_velocity(const Vector6d& x_ddot, const Vector6d& x_dot_current, double T_r);

/// q_dot = damped_pinv(J(q), lambda) * x_dot.
Eigen::VectorXd cartesian_to_joint(const ManipulatorModel& model, const Eigen::VectorXd& q,
                                   const Vector6d& x_dot, double lambda);

/// Rotates a sensor-frame wrench into the control frame and scales it.
Wrench transform_wrench(const Eigen::Matrix3d& tool_rotation, const Wrench& raw, double force_weight);

}  // namespace handover
