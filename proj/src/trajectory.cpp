#include "handover/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "handover/csv.hpp"

namespace handover {

double quintic_profile(double tau) {
  const double t3 = tau * tau * tau;
  return t3 * (10.0 + tau * (-15.0 + 6.0 * tau));
}

double quintic_profile_d1(double tau) {
  const double t2 = tau * tau;
  return t2 * (30.0 + tau * (-60.0 + 30.0 * tau));
}

double quintic_profile_d2(double tau) {
  return tau * (60.0 + tau * (-180.0 + 120.0 * tau));
}

QuinticTrajectory plan_quintic(const Eigen::VectorXd& start_q, const Eigen::VectorXd& end_q,
                               double duration, double sample_rate) {
  if (!(duration > 0.0)) throw Error("trajectory duration must be positive");
  if (!(sample_rate > 0.0)) throw Error("trajectory sample rate must be positive");
  if (start_q.size() != end_q.size() || start_q.size() == 0)
    throw DimensionError("start and end configurations differ in size");
  const auto samples = static_cast<Eigen::Index>(std::llround(duration * sample_rate));
  if (samples < 2) throw Error("trajectory needs at least two samples");

  QuinticTrajectory traj;
  traj.start_q = start_q;
  traj.end_q = end_q;
  traj.duration = duration;
  traj.sample_rate = sample_rate;
  traj.times = Eigen::VectorXd::LinSpaced(samples, 0.0, duration);
  const Eigen::Index n = start_q.size();
  traj.q.resize(samples, n);
  traj.q_dot.resize(samples, n);
  traj.q_ddot.resize(samples, n);
  const Eigen::RowVectorXd delta = (end_q - start_q).transpose();
  for (Eigen::Index k = 0; k < samples; ++k) {
    const double tau = traj.times[k] / duration;
    traj.q.row(k) = start_q.transpose() + delta * quintic_profile(tau);
    traj.q_dot.row(k) = delta * (quintic_profile_d1(tau) / duration);
    traj.q_ddot.row(k) = delta * (quintic_profile_d2(tau) / (duration * duration));
  }
  // Pin the end sample exactly to the goal.
  traj.q.row(samples - 1) = end_q.transpose();
  traj.q_dot.row(samples - 1).setZero();
  traj.q_ddot.row(samples - 1).setZero();
  return traj;
}

CubicSpline::CubicSpline(Eigen::VectorXd knot_times, Eigen::MatrixXd values)
    : t_(std::move(knot_times)), y_(std::move(values)) {
  const Eigen::Index n = t_.size();
  if (n < 4) throw Error("cubic spline needs at least 4 knots");
  if (y_.rows() != n) throw DimensionError("spline values must have one row per knot");
  for (Eigen::Index i = 1; i < n; ++i)
    if (!(t_[i] > t_[i - 1])) throw Error("spline knot times must be strictly increasing");

  // Natural end conditions: M_0 = M_{n-1} = 0; Thomas algorithm on the interior.
  const Eigen::Index cols = y_.cols();
  m_ = Eigen::MatrixXd::Zero(n, cols);
  const Eigen::Index inner = n - 2;
  Eigen::VectorXd diag(inner), upper(inner);
  Eigen::MatrixXd rhs(inner, cols);
  for (Eigen::Index i = 1; i <= inner; ++i) {
    const double h0 = t_[i] - t_[i - 1];
    const double h1 = t_[i + 1] - t_[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    upper[i - 1] = h1;
    rhs.row(i - 1) = 6.0 * ((y_.row(i + 1) - y_.row(i)) / h1 - (y_.row(i) - y_.row(i - 1)) / h0);
  }
  for (Eigen::Index i = 1; i < inner; ++i) {
    const double lower = t_[i + 1] - t_[i];  // h_i multiplies M_{i}
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs.row(i) -= w * rhs.row(i - 1);
  }
  m_.row(inner) = rhs.row(inner - 1) / diag[inner - 1];
  for (Eigen::Index i = inner - 2; i >= 0; --i)
    m_.row(i + 1) = (rhs.row(i) - upper[i] * m_.row(i + 2)) / diag[i];
}

Eigen::Index CubicSpline::locate(double t) const {
  const double* begin = t_.data();
  const double* end = begin + t_.size();
  const double* it = std::upper_bound(begin, end, t);
  Eigen::Index seg = static_cast<Eigen::Index>(it - begin) - 1;
  return std::clamp<Eigen::Index>(seg, 0, t_.size() - 2);
}

Eigen::VectorXd CubicSpline::evaluate_segment(Eigen::Index i, double t, int order) const {
  const double h = t_[i + 1] - t_[i];
  const double a = (t_[i + 1] - t) / h;
  const double b = (t - t_[i]) / h;
  switch (order) {
    case 0:
      return (a * y_.row(i) + b * y_.row(i + 1) +
              ((a * a * a - a) * m_.row(i) + (b * b * b - b) * m_.row(i + 1)) * (h * h / 6.0))
          .transpose();
    case 1:
      return ((y_.row(i + 1) - y_.row(i)) / h - (3.0 * a * a - 1.0) / 6.0 * h * m_.row(i) +
              (3.0 * b * b - 1.0) / 6.0 * h * m_.row(i + 1))
          .transpose();
    case 2:
      return (a * m_.row(i) + b * m_.row(i + 1)).transpose();
    default:
      throw Error("spline derivative order must be 0, 1 or 2");
  }
}

Eigen::VectorXd CubicSpline::evaluate(double t, int order) const {
  const double tc = std::clamp(t, start_time(), end_time());
  return evaluate_segment(locate(tc), tc, order);
}

SplineTrajectory fit_cubic_spline(const QuinticTrajectory& traj) {
  if (traj.times.size() < 4) throw Error("spline fitting needs at least 4 samples");
  return SplineTrajectory{CubicSpline(traj.times, traj.q), CubicSpline(traj.times, traj.q_dot),
                          CubicSpline(traj.times, traj.q_ddot)};
}

TrajectoryPoint sample_spline(const SplineTrajectory& spline, double s) {
  return TrajectoryPoint{spline.position.evaluate(s), spline.velocity.evaluate(s),
                         spline.acceleration.evaluate(s)};
}

PathParameter advance_parameter(const PathParameter& p, double alpha, double T_r) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("scaling factor must lie in [0, 1]");
  if (!(T_r > 0.0)) throw Error("cycle time must be positive");
  PathParameter next = p;
  next.s = std::min(p.s_end, p.s + alpha * T_r);
  next.s_dot = alpha;
  return next;
}

CartesianReference to_cartesian(const ManipulatorModel& model, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& q_dot, const Eigen::VectorXd& q_ddot) {
  model.check_joint_vector(q_ddot, "q_ddot");
  const Jacobian J = jacobian(model, q);
  CartesianReference ref;
  ref.x = forward_kinematics(model, q);
  ref.x_dot = J * q_dot;
  ref.x_ddot = J * q_ddot + jacobian_dot(model, q, q_dot) * q_dot;
  return ref;
}

void write_trajectory_csv(std::ostream& out, const QuinticTrajectory& traj) {
  csv::Writer w(out);
  const Eigen::Index n = traj.q.cols();
  std::vector<std::string> names{"t"};
  for (const char* prefix : {"q", "qd", "qdd"})
    for (Eigen::Index j = 0; j < n; ++j) names.push_back(prefix + std::to_string(j + 1));
  w.header(names);
  for (Eigen::Index k = 0; k < traj.times.size(); ++k) {
    w.field(traj.times[k]);
    for (Eigen::Index j = 0; j < n; ++j) w.field(traj.q(k, j));
    for (Eigen::Index j = 0; j < n; ++j) w.field(traj.q_dot(k, j));
    for (Eigen::Index j = 0; j < n; ++j) w.field(traj.q_ddot(k, j));
    w.end_row();
  }
}

}  // namespace handover
