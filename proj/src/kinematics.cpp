#include "handover/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace handover {

namespace {

struct Frames {
  std::vector<Eigen::Vector3d> origin;  // p_0 .. p_n
  std::vector<Eigen::Vector3d> axis;    // z_0 .. z_n
  Eigen::Vector3d ee;                   // tool point
  Eigen::Matrix3d ee_rotation;
};

Frames compute_frames(const ManipulatorModel& model, const Eigen::VectorXd& q) {
  const int n = model.joint_count();
  Frames f;
  f.origin.reserve(n + 1);
  f.axis.reserve(n + 1);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  f.origin.push_back(t.translation());
  f.axis.push_back(t.linear().col(2));
  for (int i = 0; i < n; ++i) {
    t = t * dh_transform(model.dh_rows()[i], q[i]);
    f.origin.push_back(t.translation());
    f.axis.push_back(t.linear().col(2));
  }
  const Eigen::Isometry3d ee = t * model.tool_transform().isometry();
  f.ee = ee.translation();
  f.ee_rotation = ee.linear();
  return f;
}

}  // namespace

Eigen::Isometry3d Pose::isometry() const {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = rotation;
  t.translation() = position;
  return t;
}

Pose Pose::from_isometry(const Eigen::Isometry3d& t) {
  return Pose{t.translation(), t.linear()};
}

bool is_rotation(const Eigen::Matrix3d& R, double tol) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

ManipulatorModel ManipulatorModel::make(std::vector<DhRow> dh_rows,
                                        Eigen::VectorXd q_dot_min, Eigen::VectorXd q_dot_max,
                                        Eigen::VectorXd q_ddot_min, Eigen::VectorXd q_ddot_max,
                                        Eigen::VectorXd link_masses, double payload_mass,
                                        Pose tool_transform) {
  const auto n = static_cast<Eigen::Index>(dh_rows.size());
  if (n < 1) throw Error("manipulator needs at least one joint");
  auto check_len = [n](const Eigen::VectorXd& v, const char* name) {
    if (v.size() != n) {
      std::ostringstream os;
      os << name << " has " << v.size() << " entries, expected " << n;
      throw DimensionError(os.str());
    }
  };
  check_len(q_dot_min, "q_dot_min");
  check_len(q_dot_max, "q_dot_max");
  check_len(q_ddot_min, "q_ddot_min");
  check_len(q_ddot_max, "q_ddot_max");
  check_len(link_masses, "link_masses");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(q_dot_min[i] < 0.0 && q_dot_max[i] > 0.0))
      throw Error("joint velocity bounds must satisfy min < 0 < max");
    if (!(q_ddot_min[i] < 0.0 && q_ddot_max[i] > 0.0))
      throw Error("joint acceleration bounds must satisfy min < 0 < max");
    if (!(link_masses[i] >= 0.0)) throw Error("link masses must be non-negative");
  }
  if (!(payload_mass >= 0.0)) throw Error("payload mass must be non-negative");
  if (!is_rotation(tool_transform.rotation))
    throw Error("tool rotation must be orthonormal with determinant +1");

  ManipulatorModel m;
  m.dh_ = std::move(dh_rows);
  m.q_dot_min_ = std::move(q_dot_min);
  m.q_dot_max_ = std::move(q_dot_max);
  m.q_ddot_min_ = std::move(q_ddot_min);
  m.q_ddot_max_ = std::move(q_ddot_max);
  m.link_masses_ = std::move(link_masses);
  m.payload_mass_ = payload_mass;
  m.tool_ = tool_transform;
  return m;
}

ManipulatorModel ManipulatorModel::default_cobot() {
  constexpr double half_pi = std::numbers::pi / 2.0;
  std::vector<DhRow> dh = {
      {0.0, half_pi, 0.1807, 0.0},
      {-0.6127, 0.0, 0.0, 0.0},
      {-0.57155, 0.0, 0.0, 0.0},
      {0.0, half_pi, 0.17415, 0.0},
      {0.0, -half_pi, 0.11985, 0.0},
      {0.0, 0.0, 0.11655, 0.0},
  };
  Eigen::VectorXd qd_max(6), qdd_max(6), masses(6);
  qd_max << 2.094, 2.094, 3.142, 3.142, 3.142, 3.142;
  qdd_max << 8.0, 8.0, 8.0, 8.0, 8.0, 8.0;
  masses << 7.369, 13.051, 3.989, 2.1, 1.98, 0.615;
  return make(std::move(dh), -qd_max, qd_max, -qdd_max, qdd_max, masses, 1.0);
}

void ManipulatorModel::check_joint_vector(const Eigen::VectorXd& v, const char* what) const {
  if (v.size() != joint_count()) {
    std::ostringstream os;
    os << what << " has " << v.size() << " entries, model has " << joint_count() << " joints";
    throw DimensionError(os.str());
  }
}

Eigen::Isometry3d dh_transform(const DhRow& row, double q) {
  const double theta = q + row.joint_offset;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(row.link_twist), sa = std::sin(row.link_twist);
  Eigen::Matrix4d m;
  m << ct, -st * ca, st * sa, row.link_length * ct,
       st, ct * ca, -ct * sa, row.link_length * st,
       0.0, sa, ca, row.link_offset,
       0.0, 0.0, 0.0, 1.0;
  return Eigen::Isometry3d(m);
}

Pose forward_kinematics(const ManipulatorModel& model, const Eigen::VectorXd& q) {
  model.check_joint_vector(q, "q");
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  for (int i = 0; i < model.joint_count(); ++i) t = t * dh_transform(model.dh_rows()[i], q[i]);
  return Pose::from_isometry(t * model.tool_transform().isometry());
}

Jacobian jacobian(const ManipulatorModel& model, const Eigen::VectorXd& q) {
  model.check_joint_vector(q, "q");
  const Frames f = compute_frames(model, q);
  const int n = model.joint_count();
  Jacobian J(6, n);
  for (int j = 0; j < n; ++j) {
    J.block<3, 1>(0, j) = f.axis[j].cross(f.ee - f.origin[j]);
    J.block<3, 1>(3, j) = f.axis[j];
  }
  return J;
}

Jacobian jacobian_dot(const ManipulatorModel& model, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& q_dot) {
  model.check_joint_vector(q, "q");
  model.check_joint_vector(q_dot, "q_dot");
  const Frames f = compute_frames(model, q);
  const int n = model.joint_count();

  // Angular velocity and origin velocity of every frame k = 0..n.
  std::vector<Eigen::Vector3d> omega(n + 1, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> p_dot(n + 1, Eigen::Vector3d::Zero());
  for (int k = 1; k <= n; ++k) {
    omega[k] = omega[k - 1] + f.axis[k - 1] * q_dot[k - 1];
    for (int j = 1; j <= k; ++j)
      p_dot[k] += f.axis[j - 1].cross(f.origin[k] - f.origin[j - 1]) * q_dot[j - 1];
  }
  Eigen::Vector3d ee_dot = Eigen::Vector3d::Zero();
  for (int j = 1; j <= n; ++j) ee_dot += f.axis[j - 1].cross(f.ee - f.origin[j - 1]) * q_dot[j - 1];

  Jacobian Jd(6, n);
  for (int j = 0; j < n; ++j) {
    const Eigen::Vector3d z_dot = omega[j].cross(f.axis[j]);
    Jd.block<3, 1>(0, j) = z_dot.cross(f.ee - f.origin[j]) + f.axis[j].cross(ee_dot - p_dot[j]);
    Jd.block<3, 1>(3, j) = z_dot;
  }
  return Jd;
}

std::vector<Eigen::Vector3d> link_positions(const ManipulatorModel& model, const Eigen::VectorXd& q) {
  model.check_joint_vector(q, "q");
  return compute_frames(model, q).origin;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> link_point_jacobian(const ManipulatorModel& model,
                                                             const Eigen::VectorXd& q,
                                                             int link_index) {
  model.check_joint_vector(q, "q");
  const int n = model.joint_count();
  if (link_index < 1 || link_index > n) {
    std::ostringstream os;
    os << "link index " << link_index << " outside [1, " << n << "]";
    throw Error(os.str());
  }
  const Frames f = compute_frames(model, q);
  Eigen::Matrix<double, 3, Eigen::Dynamic> Jp = Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, n);
  for (int j = 0; j < link_index; ++j) Jp.col(j) = f.axis[j].cross(f.origin[link_index] - f.origin[j]);
  return Jp;
}

Eigen::MatrixXd damped_pinv(const Eigen::MatrixXd& J, double lambda) {
  if (!(lambda >= 0.0)) throw Error("damping must be non-negative");
  const Eigen::Index rows = J.rows();
  const Eigen::MatrixXd JJt =
      J * J.transpose() + (lambda * lambda) * Eigen::MatrixXd::Identity(rows, rows);
  if (lambda == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(JJt);
    if (!lu.isInvertible())
      throw SingularConfiguration("Jacobian is rank deficient; undamped inverse undefined");
    return J.transpose() * lu.inverse();
  }
  return J.transpose() * JJt.ldlt().solve(Eigen::MatrixXd::Identity(rows, rows));
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.axis() * aa.angle();
}

Eigen::VectorXd solve_ik(const ManipulatorModel& model, const Pose& target,
                         const Eigen::VectorXd& q_seed, const IkOptions& opts) {
  model.check_joint_vector(q_seed, "q_seed");
  Eigen::VectorXd q = q_seed;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Pose current = forward_kinematics(model, q);
    Vector6d err;
    err.head<3>() = target.position - current.position;
    err.tail<3>() = rotation_log(target.rotation * current.rotation.transpose());
    if (err.norm() < opts.tolerance) return q;
    const Jacobian J = jacobian(model, q);
    q += damped_pinv(J, opts.damping) * err;
  }
  throw Error("inverse kinematics did not converge to the requested pose");
}

}  // namespace handover
