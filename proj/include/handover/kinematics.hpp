#pragma once

#include <Eigen/Dense>
#include <vector>

#include "handover/error.hpp"

namespace handover {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// One row of a standard Denavit-Hartenberg table.
struct DhRow {
  double link_length = 0.0;   // a [m]
  double link_twist = 0.0;    // alpha [rad]
  double link_offset = 0.0;   // d [m]
  double joint_offset = 0.0;  // theta offset [rad]
};

struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

  Eigen::Isometry3d isometry() const;
  static Pose from_isometry(const Eigen::Isometry3d& t);
};

struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd q_dot;
  double time = 0.0;
};

/// Kinematic and limit description of a serial arm.
///
/// Built through ManipulatorModel::make (or default_cobot), which validates
/// the limit ordering, the masses and the tool rotation. Instances are
/// immutable afterwards.
class ManipulatorModel {
public:
  static ManipulatorModel make(std::vector<DhRow> dh_rows,
                               Eigen::VectorXd q_dot_min, Eigen::VectorXd q_dot_max,
                               Eigen::VectorXd q_ddot_min, Eigen::VectorXd q_ddot_max,
                               Eigen::VectorXd link_masses, double payload_mass,
                               Pose tool_transform = {});

  /// Six-axis arm with the UR10e published DH table and link masses.
  static ManipulatorModel default_cobot();

  int joint_count() const { return static_cast<int>(dh_.size()); }
  const std::vector<DhRow>& dh_rows() const { return dh_; }
  const Eigen::VectorXd& q_dot_min() const { return q_dot_min_; }
  const Eigen::VectorXd& q_dot_max() const { return q_dot_max_; }
  const Eigen::VectorXd& q_ddot_min() const { return q_ddot_min_; }
  const Eigen::VectorXd& q_ddot_max() const { return q_ddot_max_; }
  const Eigen::VectorXd& link_masses() const { return link_masses_; }
  double payload_mass() const { return payload_mass_; }
  const Pose& tool_transform() const { return tool_; }

  void check_joint_vector(const Eigen::VectorXd& v, const char* what) const;

private:
  ManipulatorModel() = default;

  std::vector<DhRow> dh_;
  Eigen::VectorXd q_dot_min_, q_dot_max_, q_ddot_min_, q_ddot_max_;
  Eigen::VectorXd link_masses_;
  double payload_mass_ = 0.0;
  Pose tool_;
};

/// Homogeneous transform of a single DH row at joint angle q.
Eigen::Isometry3d dh_transform(const DhRow& row, double q);

/// End-effector pose, tool transform included.
Pose forward_kinematics(const ManipulatorModel& model, const Eigen::VectorXd& q);

/// Geometric Jacobian of the end-effector origin in the base frame.
/// Rows 0-2 are linear velocity, rows 3-5 angular velocity.
Jacobian jacobian(const ManipulatorModel& model, const Eigen::VectorXd& q);

/// Time derivative of jacobian() along q_dot.
Jacobian jacobian_dot(const ManipulatorModel& model, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& q_dot);

/// Base origin followed by the origin of every link frame (n + 1 points).
/// The tool transform is not applied.
std::vector<Eigen::Vector3d> link_positions(const ManipulatorModel& model, const Eigen::VectorXd& q);

/// Linear-velocity Jacobian (3 x n) of the origin of link frame `link_index`
/// (1-based). Columns beyond link_index are zero.
Eigen::Matrix<double, 3, Eigen::Dynamic> link_point_jacobian(const ManipulatorModel& model,
                                                             const Eigen::VectorXd& q,
                                                             int link_index);

/// J^T (J J^T + lambda^2 I)^-1. Throws SingularConfiguration for lambda == 0
/// and a rank-deficient J.
Eigen::MatrixXd damped_pinv(const Eigen::MatrixXd& J, double lambda);

/// Axis-angle vector of a rotation matrix (angle in [0, pi]).
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& R);

bool is_rotation(const Eigen::Matrix3d& R, double tol = 1e-9);

struct IkOptions {
  double damping = 0.05;
  int max_iterations = 500;
  double tolerance = 1e-9;
};

/// Damped least-squares inverse kinematics towards a full pose target.
/// Throws Error when the target is not reached within the iteration budget.
Eigen::VectorXd solve_ik(const ManipulatorModel& model, const Pose& target,
                         const Eigen::VectorXd& q_seed, const IkOptions& opts = {});

}  // namespace handover
