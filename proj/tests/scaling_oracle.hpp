#pragma once

#include "handover/safety.hpp"
#include "support.hpp"

namespace testing {

using handover::ScalingProblem;

inline ScalingProblem random_problem(Gen& g, int n, int links) {
  ScalingProblem pb;
  pb.T_r = 0.002;
  pb.q_dot_adm = g.vector(n, -3.0, 3.0);
  pb.q_dot_max = g.vector(n, 0.5, 3.0);
  pb.q_dot_min = -g.vector(n, 0.5, 3.0);
  pb.q_ddot_max = g.vector(n, 50.0, 500.0);
  pb.q_ddot_min = -g.vector(n, 50.0, 500.0);
  // Current velocity near some scaled command so both feasible and infeasible cases occur.
  pb.q_dot_current = g.uniform() * pb.q_dot_adm + g.vector(n, -0.6, 0.6);
  pb.directed_rows = Eigen::MatrixXd::NullaryExpr(links, n, [&] { return g.uniform(-1.0, 1.0); });
  pb.v_max = g.vector(links, 0.0, 2.0);
  return pb;
}

inline bool satisfies(const ScalingProblem& pb, double a, double tol = 1e-12) {
  const Eigen::VectorXd u = a * pb.q_dot_adm;
  if (((pb.directed_rows * u - pb.v_max).array() > tol).any()) return false;
  if (((u - pb.q_dot_max).array() > tol).any() || ((pb.q_dot_min - u).array() > tol).any()) return false;
  const Eigen::VectorXd acc = (u - pb.q_dot_current) / pb.T_r;
  if (((acc - pb.q_ddot_max).array() > tol).any() || ((pb.q_ddot_min - acc).array() > tol).any()) return false;
  return true;
}

// Largest grid point in {0, 1e-3, ..., 1} meeting every constraint, or -1.
inline double grid_alpha(const ScalingProblem& pb) {
  for (int k = 1000; k >= 0; --k)
    if (satisfies(pb, k * 1e-3)) return k * 1e-3;
  return -1.0;
}

}  // namespace testing
