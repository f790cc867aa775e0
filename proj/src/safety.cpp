#include "handover/safety.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace handover {

void SafetyParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string("safety parameter ") + name + " must be positive");
  };
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(std::string("safety parameter ") + name + " must be non-negative");
  };
  positive(a_max, "a_max");
  positive(T_r, "T_r");
  non_negative(C, "C");
  non_negative(Z_d, "Z_d");
  non_negative(Z_r, "Z_r");
  positive(F_max, "F_max");
  positive(p_max, "p_max");
  positive(A, "A");
  positive(k_spring, "k_spring");
  positive(m_h, "m_h");
  positive(human_radius, "human_radius");
}

std::string_view to_string(BindingConstraint b) {
  switch (b) {
    case BindingConstraint::box: return "box";
    case BindingConstraint::iso_limit: return "iso-limit";
    case BindingConstraint::joint_velocity: return "joint-velocity";
    case BindingConstraint::joint_acceleration: return "joint-acceleration";
  }
  return "unknown";
}

Eigen::Vector3d hr_versor(const Eigen::Vector3d& hand, const Eigen::Vector3d& robot_point) {
  const Eigen::Vector3d d = hand - robot_point;
  const double norm = d.norm();
  if (!(norm > 1e-12)) throw Error("hand and robot point coincide; direction undefined");
  return d / norm;
}

double ssm_limit(const SafetyParams& p, double separation, double v_h_toward_robot) {
  if (!(separation >= 0.0)) throw Error("separation must be non-negative");
  const double a_tr = p.a_max * p.T_r;
  const double v_h = v_h_toward_robot;
  if (p.ssm_formula == SsmFormula::verbatim) {
    const double k = p.C + p.Z_d + p.Z_r - separation;
    const double radicand = std::max(0.0, v_h * v_h + a_tr * a_tr + 2.0 * p.a_max * k);
    return std::max(0.0, std::sqrt(radicand) + a_tr - v_h);
  }
  const double margin = separation - p.C - p.Z_d - p.Z_r;
  if (margin < 0.0) return 0.0;
  const double radicand = v_h * v_h + a_tr * a_tr + 2.0 * p.a_max * margin;
  return std::max(0.0, std::sqrt(radicand) - a_tr - v_h);
}

double apparent_mass(const ManipulatorModel& model) {
  const double moving = model.link_masses().sum();
  if (!(moving + model.payload_mass() > 0.0)) throw Error("robot has no mass; apparent mass undefined");
  return moving / 2.0 + model.payload_mass();
}

double reduced_mass(double m_r, double m_h) {
  if (!(m_r > 0.0) || !(m_h > 0.0)) throw Error("masses must be positive");
  return 1.0 / (1.0 / m_r + 1.0 / m_h);
}

double pfl_limit(const SafetyParams& p, double m_r) {
  if (!(p.k_spring > 0.0) || !(p.F_max > 0.0) || !(p.p_max * p.A > 0.0))
    throw Error("PFL parameters must be positive");
  const double mu = reduced_mass(m_r, p.m_h);
  const double force = std::min(p.F_max, p.p_max * p.A);
  return force / std::sqrt(mu * p.k_spring);
}

double combined_limit(double ssm, double pfl) { return std::max(ssm, pfl); }

Eigen::RowVectorXd modified_jacobian(const ManipulatorModel& model, const Eigen::VectorXd& q,
                                     const Eigen::Vector3d& versor, int link_index) {
  if (std::abs(versor.norm() - 1.0) > 1e-9) throw Error("direction must be a unit vector");
  return versor.transpose() * link_point_jacobian(model, q, link_index);
}

namespace {

struct Bound {
  double value;
  BindingConstraint tag;
};

struct Interval {
  Bound lo{-std::numeric_limits<double>::infinity(), BindingConstraint::box};
  Bound hi{std::numeric_limits<double>::infinity(), BindingConstraint::box};
  bool constant_violation = false;

  // coef * alpha <= bound
  void add(double coef, double bound, BindingConstraint tag) {
    if (coef > 0.0) {
      const double v = bound / coef;
      if (v < hi.value) hi = {v, tag};
    } else if (coef < 0.0) {
      const double v = bound / coef;
      if (v > lo.value) lo = {v, tag};
    } else if (bound < 0.0) {
      constant_violation = true;
    }
  }
};

}  // namespace

ScalingResult optimal_alpha(const ScalingProblem& pb) {
  const Eigen::Index n = pb.q_dot_adm.size();
  if (pb.q_dot_current.size() != n || pb.q_dot_min.size() != n || pb.q_dot_max.size() != n ||
      pb.q_ddot_min.size() != n || pb.q_ddot_max.size() != n || pb.directed_rows.cols() != n ||
      pb.directed_rows.rows() != pb.v_max.size())
    throw DimensionError("scaling problem dimensions are inconsistent");
  if (!(pb.T_r > 0.0)) throw Error("cycle time must be positive");

  Interval safe;
  safe.lo = {0.0, BindingConstraint::box};
  safe.hi = {1.0, BindingConstraint::box};
  const Eigen::VectorXd directed = pb.directed_rows * pb.q_dot_adm;
  for (Eigen::Index i = 0; i < directed.size(); ++i)
    safe.add(directed[i], pb.v_max[i], BindingConstraint::iso_limit);
  for (Eigen::Index j = 0; j < n; ++j) {
    safe.add(pb.q_dot_adm[j], pb.q_dot_max[j], BindingConstraint::joint_velocity);
    safe.add(-pb.q_dot_adm[j], -pb.q_dot_min[j], BindingConstraint::joint_velocity);
  }

  Interval accel;
  for (Eigen::Index j = 0; j < n; ++j) {
    accel.add(pb.q_dot_adm[j], pb.q_ddot_max[j] * pb.T_r + pb.q_dot_current[j],
              BindingConstraint::joint_acceleration);
    accel.add(-pb.q_dot_adm[j], -(pb.q_ddot_min[j] * pb.T_r + pb.q_dot_current[j]),
              BindingConstraint::joint_acceleration);
  }

  const double lo = std::max(safe.lo.value, accel.lo.value);
  const Bound hi = accel.hi.value < safe.hi.value ? accel.hi : safe.hi;
  if (!safe.constant_violation && !accel.constant_violation && lo <= hi.value)
    return ScalingResult{hi.value, hi.tag, true};

  double target;
  if (accel.lo.value <= accel.hi.value)
    target = std::clamp(safe.hi.value, accel.lo.value, accel.hi.value);
  else
    target = 0.5 * (accel.lo.value + accel.hi.value);
  const double alpha = std::clamp(target, safe.lo.value, safe.hi.value);
  return ScalingResult{alpha, BindingConstraint::joint_acceleration, false};
}

}  // namespace handover
