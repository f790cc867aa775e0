#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "handover/kinematics.hpp"

namespace handover {

/// Quintic joint-space point-to-point motion, sampled on a uniform grid.
///
/// Rows of `q`, `q_dot`, `q_ddot` are samples; columns are joints. The time
/// grid spans [0, duration] inclusive with round(duration * sample_rate)
/// samples.
struct QuinticTrajectory {
  Eigen::VectorXd start_q;
  Eigen::VectorXd end_q;
  double duration = 0.0;
  double sample_rate = 0.0;
  Eigen::VectorXd times;
  Eigen::MatrixXd q;
  Eigen::MatrixXd q_dot;
  Eigen::MatrixXd q_ddot;
};

/// Normalised quintic profile 6t^5 - 15t^4 + 10t^3 and its first two derivatives.
double quintic_profile(double tau);
double quintic_profile_d1(double tau);
double quintic_profile_d2(double tau);

QuinticTrajectory plan_quintic(const Eigen::VectorXd& start_q, const Eigen::VectorXd& end_q,
                               double duration, double sample_rate);

/// Natural cubic spline through vector-valued knots.
class CubicSpline {
public:
  CubicSpline() = default;
  /// values: one row per knot. Needs at least 4 knots and strictly increasing times.
  CubicSpline(Eigen::VectorXd knot_times, Eigen::MatrixXd values);

  /// Value (order 0) or derivative (order 1, 2) at t; t is clamped to the knot span.
  Eigen::VectorXd evaluate(double t, int order = 0) const;

  /// Evaluates the polynomial of one segment, without clamping or segment search.
  Eigen::VectorXd evaluate_segment(Eigen::Index segment, double t, int order) const;

  const Eigen::VectorXd& knot_times() const { return t_; }
  Eigen::Index segment_count() const { return t_.size() - 1; }
  double start_time() const { return t_[0]; }
  double end_time() const { return t_[t_.size() - 1]; }

private:
  Eigen::Index locate(double t) const;

  Eigen::VectorXd t_;
  Eigen::MatrixXd y_;
  Eigen::MatrixXd m_;  // second derivatives at knots
};

struct TrajectoryPoint {
  Eigen::VectorXd q;
  Eigen::VectorXd q_dot;
  Eigen::VectorXd q_ddot;
};

/// Three independent splines over position, velocity and acceleration samples.
struct SplineTrajectory {
  CubicSpline position;
  CubicSpline velocity;
  CubicSpline acceleration;

  double start_time() const { return position.start_time(); }
  double end_time() const { return position.end_time(); }
};

SplineTrajectory fit_cubic_spline(const QuinticTrajectory& traj);

/// Reference at path parameter s (clamped to the knot span).
TrajectoryPoint sample_spline(const SplineTrajectory& spline, double s);

/// Time-valued curvilinear abscissa with a linear time law.
struct PathParameter {
  double s = 0.0;
  double s_dot = 1.0;
  double s_end = 0.0;
};

/// s' = min(s_end, s + alpha * T_r).
PathParameter advance_parameter(const PathParameter& p, double alpha, double T_r);

struct CartesianReference {
  Pose x;
  Vector6d x_dot;
  Vector6d x_ddot;
};

/// x = FK(q), x_dot = J q_dot, x_ddot = J q_ddot + J_dot q_dot.
CartesianReference to_cartesian(const ManipulatorModel& model, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& q_dot, const Eigen::VectorXd& q_ddot);

/// CSV rows "t,q1..,qd1..,qdd1.." for plotting.
void write_trajectory_csv(std::ostream& out, const QuinticTrajectory& traj);

}  // namespace handover
