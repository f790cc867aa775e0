#pragma once

#include <Eigen/Dense>
#include <string_view>
#include <vector>

#include "handover/kinematics.hpp"

namespace handover {

enum class SsmFormula {
  corrected,  // stop exactly at the protective boundary
  verbatim,   // K = C + Z_d + Z_r - S_p and a "+ a_max T_r" tail, radicand floored at 0
};

/// ISO/TS 15066 constants shared by the SSM and PFL limits.
///
/// Lengths in m, time in s, forces in N, pressure in N/cm^2, area in cm^2.
/// Defaults use the hand/finger body-region values.
struct SafetyParams {
  double a_max = 2.0;
  double T_r = 0.1;
  double C = 0.0;
  double Z_d = 0.0;
  double Z_r = 0.0;
  double F_max = 140.0;
  double p_max = 190.0;
  double A = 1.0;
  double k_spring = 75000.0;
  double m_h = 0.6;
  double human_radius = 0.1;
  SsmFormula ssm_formula = SsmFormula::corrected;

  void validate() const;
  /// Transfer energy implied by the force limit, F_max^2 / (2 k).
  double max_energy() const { return F_max * F_max / (2.0 * k_spring); }
};

struct HumanState {
  Eigen::Vector3d hand_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d hand_velocity = Eigen::Vector3d::Zero();
};

enum class BindingConstraint { box, iso_limit, joint_velocity, joint_acceleration };

std::string_view to_string(BindingConstraint b);

struct ScalingResult {
  double alpha = 1.0;
  BindingConstraint binding = BindingConstraint::box;
  bool feasible = true;
};

/// Unit vector from the robot point towards the hand.
Eigen::Vector3d hr_versor(const Eigen::Vector3d& hand, const Eigen::Vector3d& robot_point);

/// Maximum robot speed towards the operator allowed by speed and separation
/// monitoring, floored at zero.
double ssm_limit(const SafetyParams& p, double separation, double v_h_toward_robot);

/// Half the moving link mass plus the payload.
double apparent_mass(const ManipulatorModel& model);

/// Reduced mass (1/m_r + 1/m_h)^-1.
double reduced_mass(double m_r, double m_h);

/// Contact-speed cap min(F_max, p_max A) / sqrt(mu k).
double pfl_limit(const SafetyParams& p, double m_r);

double combined_limit(double ssm, double pfl);

/// Row n^T Jp_i(q): signed speed of link point i towards the human per unit joint rate.
Eigen::RowVectorXd modified_jacobian(const ManipulatorModel& model, const Eigen::VectorXd& q,
                                     const Eigen::Vector3d& versor, int link_index);

/// Inputs of the one-variable scaling LP.
struct ScalingProblem {
  Eigen::VectorXd q_dot_adm;
  Eigen::VectorXd q_dot_current;
  Eigen::MatrixXd directed_rows;  // one J_ri per row
  Eigen::VectorXd v_max;          // one limit per row
  Eigen::VectorXd q_dot_min, q_dot_max;
  Eigen::VectorXd q_ddot_min, q_ddot_max;
  double T_r = 0.002;
};

/// Largest alpha in [0, 1] meeting the directed-speed, joint-velocity and
/// joint-acceleration constraints.
///
/// Each constraint c * alpha <= b is an upper bound (c > 0) or a lower bound
/// (c < 0) on alpha, so the LP reduces to an interval intersection. The speed
/// limits and the velocity box always admit alpha = 0. When the acceleration
/// box cannot be met inside that safe interval (the arm cannot brake in one
/// cycle), feasible is false and alpha is the safe value closest to the
/// acceleration-feasible set; the speed limits are never traded away.
ScalingResult optimal_alpha(const ScalingProblem& problem);

}  // namespace handover
