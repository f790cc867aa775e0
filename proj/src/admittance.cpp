#include "handover/admittance.hpp"

#include <cmath>

namespace handover {

namespace {

bool symmetric(const Matrix6d& A) { return (A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-9; }

bool positive_semidefinite(const Matrix6d& A) {
  Eigen::SelfAdjointEigenSolver<Matrix6d> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-9;
}

}  // namespace

Vector6d Wrench::stacked() const {
  Vector6d v;
  v << force, torque;
  return v;
}

Wrench Wrench::from_stacked(const Vector6d& v) { return Wrench{v.head<3>(), v.tail<3>()}; }

AdmittanceParams AdmittanceParams::make(const Matrix6d& M, const Matrix6d& D, const Matrix6d& K,
                                        double force_weight) {
  if (!M.allFinite() || !D.allFinite() || !K.allFinite())
    throw Error("admittance matrices must be finite");
  if (!symmetric(M) || !symmetric(D) || !symmetric(K))
    throw Error("admittance matrices must be symmetric");
  if (!positive_semidefinite(D) || !positive_semidefinite(K))
    throw Error("damping and stiffness must be positive semi-definite");
  if (!(force_weight >= 0.0)) throw Error("force weight must be non-negative");
  AdmittanceParams p;
  p.llt_.compute(M);
  if (p.llt_.info() != Eigen::Success) throw Error("admittance mass matrix must be positive definite");
  p.M_ = M;
  p.D_ = D;
  p.K_ = K;
  p.force_weight_ = force_weight;
  return p;
}

AdmittanceParams AdmittanceParams::critically_damped(const Vector6d& mass, const Vector6d& stiffness,
                                                     double force_weight) {
  const Vector6d damping = 2.0 * (stiffness.cwiseProduct(mass)).cwiseSqrt();
  return make(mass.asDiagonal().toDenseMatrix(), damping.asDiagonal().toDenseMatrix(),
              stiffness.asDiagonal().toDenseMatrix(), force_weight);
}

AdmittanceParams AdmittanceParams::defaults() {
  Vector6d mass, stiffness;
  mass << 8.0, 8.0, 8.0, 0.5, 0.5, 0.5;
  stiffness << 400.0, 400.0, 400.0, 20.0, 20.0, 20.0;
  return critically_damped(mass, stiffness);
}

Vector6d pose_error(const Pose& x_des, const Pose& x) {
  Vector6d e;
  e.head<3>() = x_des.position - x.position;
  e.tail<3>() = rotation_log(x_des.rotation * x.rotation.transpose());
  return e;
}

Vector6d admittance_accel(const AdmittanceParams& p, const Pose& x_des, const Vector6d& x_dot_des,
                          const Vector6d& x_ddot_des, const Pose& x, const Vector6d& x_dot,
                          const Wrench& f_ext) {
  const Vector6d rhs = p.D() * (x_dot_des - x_dot) + p.K() * pose_error(x_des, x) - f_ext.stacked();
  return p.solve_mass(rhs) + x_ddot_des;
}

Vector6d integrate_velocity(const Vector6d& x_ddot, const Vector6d& x_dot_current, double T_r) {
  if (!(T_r > 0.0)) throw Error("cycle time must be positive");
  return x_dot_current + x_ddot * T_r;
}

Eigen::VectorXd cartesian_to_joint(const ManipulatorModel& model, const Eigen::VectorXd& q,
                                   const Vector6d& x_dot, double lambda) {
  return damped_pinv(jacobian(model, q), lambda) * x_dot;
}

Wrench transform_wrench(const Eigen::Matrix3d& tool_rotation, const Wrench& raw, double force_weight) {
  return Wrench{force_weight * (tool_rotation * raw.force), force_weight * (tool_rotation * raw.torque)};
}

}  // namespace handover
