#include <doctest.h>

#include <numbers>

#include "handover/safety.hpp"
#include "scaling_oracle.hpp"
#include "support.hpp"

using namespace handover;
using testing::Gen;
using testing::grid_alpha;
using testing::random_problem;
using testing::satisfies;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent scalar evaluation of the contact-speed cap.
double pfl_oracle(double F, double k, double m_h, double m_r) {
  const double mu = m_r * m_h / (m_r + m_h);
  return F / std::sqrt(mu * k);
}

}  // namespace

TEST_CASE("human-robot versor") {
  CHECK((hr_versor(Eigen::Vector3d(1, 0, 0), Eigen::Vector3d::Zero()) - Eigen::Vector3d(1, 0, 0)).norm() == 0.0);
  Gen g(42);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector3d a = g.vec3(-2, 2), b = g.vec3(-2, 2);
    CHECK(std::abs(hr_versor(a, b).norm() - 1.0) <= 1e-12);
    CHECK((hr_versor(a, b) + hr_versor(b, a)).norm() <= 1e-15);
  }
  CHECK_THROWS(hr_versor(Eigen::Vector3d::Ones(), Eigen::Vector3d::Ones()));
}

TEST_CASE("speed and separation limit") {
  SafetyParams p;
  p.C = 0.05;
  p.Z_d = 0.1;
  p.Z_r = 0.02;
  CHECK(std::abs(ssm_limit(p, 0.17, 0.0)) <= 1e-9);
  CHECK(ssm_limit(p, 0.1, 0.0) == 0.0);

  SafetyParams q;
  q.a_max = 2.0;
  q.T_r = 0.1;
  CHECK(ssm_limit(q, 1.0, 0.0) == doctest::Approx(std::sqrt(0.04 + 4.0) - 0.2).epsilon(1e-12));
  CHECK(std::abs(ssm_limit(q, 1.0, 0.0) - 1.8100) <= 1e-3);
  CHECK(ssm_limit(q, 1.0, 0.5) < ssm_limit(q, 1.0, 0.2));
  CHECK_THROWS(ssm_limit(q, -0.1, 0.0));
}

TEST_CASE("verbatim speed and separation form is selectable") {
  SafetyParams p;
  p.ssm_formula = SsmFormula::verbatim;
  // Radicand floored at zero once the separation dominates, leaving a_max T_r - v_h.
  CHECK(ssm_limit(p, 5.0, 0.0) == doctest::Approx(p.a_max * p.T_r));
  CHECK(ssm_limit(p, 0.0, 0.0) == doctest::Approx(2.0 * p.a_max * p.T_r));
}

TEST_CASE("property: speed and separation monotonicity") {
  SafetyParams p;
  Gen g(12);
  for (int k = 0; k < 1000; ++k) {
    p.C = g.uniform(0, 0.2);
    p.Z_d = g.uniform(0, 0.1);
    p.Z_r = g.uniform(0, 0.1);
    const double s1 = g.uniform(0, 2), s2 = g.uniform(0, 2), v = g.uniform(-1, 2);
    CHECK(ssm_limit(p, std::min(s1, s2), v) <= ssm_limit(p, std::max(s1, s2), v));
    const double v1 = g.uniform(-1, 2), v2 = g.uniform(-1, 2), s = g.uniform(0, 2);
    CHECK(ssm_limit(p, s, std::max(v1, v2)) <= ssm_limit(p, s, std::min(v1, v2)));
    CHECK(ssm_limit(p, s, v) >= 0.0);
  }
}

TEST_CASE("apparent and reduced mass") {
  const auto m30 = ManipulatorModel::make({{1, 0, 0, 0}, {1, 0, 0, 0}}, -Eigen::Vector2d::Ones(),
                                          Eigen::Vector2d::Ones(), -Eigen::Vector2d::Ones(),
                                          Eigen::Vector2d::Ones(), Eigen::Vector2d(10, 20), 1.0);
  CHECK(apparent_mass(m30) == 16.0);
  const auto m2 = ManipulatorModel::make({{1, 0, 0, 0}}, -Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1),
                                         -Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1),
                                         Eigen::VectorXd::Constant(1, 2.0), 0.0);
  CHECK(apparent_mass(m2) == 1.0);
  const auto m0 = ManipulatorModel::make({{1, 0, 0, 0}}, -Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1),
                                         -Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1),
                                         Eigen::VectorXd::Zero(1), 0.0);
  CHECK_THROWS(apparent_mass(m0));
  CHECK(reduced_mass(16.0, 0.6) == doctest::Approx(16.0 * 0.6 / 16.6).epsilon(1e-14));
}

TEST_CASE("power and force limit") {
  SafetyParams p;
  p.F_max = 140;
  p.k_spring = 75000;
  p.m_h = 0.6;
  const double v = pfl_limit(p, 16.0);
  CHECK(v == doctest::Approx(pfl_oracle(140, 75000, 0.6, 16.0)).epsilon(1e-12));
  CHECK(std::abs(v - 0.672) <= 1e-3);
  CHECK(pfl_limit(p, 1e12) == doctest::Approx(140.0 / std::sqrt(0.6 * 75000)).epsilon(1e-9));

  SafetyParams doubled = p;
  doubled.F_max = 280;
  doubled.p_max = 1000;
  CHECK(pfl_limit(doubled, 16.0) == doctest::Approx(2.0 * v).epsilon(1e-12));

  SafetyParams pressure = p;
  pressure.p_max = 70;  // p A = 70 N is the stricter bound
  CHECK(pfl_limit(pressure, 16.0) == doctest::Approx(v / 2.0).epsilon(1e-12));

  SafetyParams bad = p;
  bad.k_spring = 0;
  CHECK_THROWS(pfl_limit(bad, 16.0));
  CHECK_THROWS(pfl_limit(p, 0.0));
}

TEST_CASE("combined limit is the larger of the two") {
  CHECK(combined_limit(0.0, 0.672) == 0.672);
  CHECK(combined_limit(1.81, 0.672) == 1.81);
  CHECK(combined_limit(0.5, 0.5) == 0.5);
}

TEST_CASE("modified jacobian") {
  const auto m = ManipulatorModel::default_cobot();
  Gen g(42);
  const Eigen::VectorXd q = g.vector(6, -kPi, kPi);
  const Eigen::Vector3d n = g.vec3(-1, 1).normalized();

  Vector6d twist = Vector6d::Zero();
  twist.head<3>() = n;
  const Eigen::VectorXd qd_along = damped_pinv(jacobian(m, q), 0.0) * twist;
  CHECK((modified_jacobian(m, q, n, 6) * qd_along)(0) == doctest::Approx(1.0).epsilon(1e-9));

  Eigen::Vector3d ortho = n.unitOrthogonal();
  twist.head<3>() = ortho;
  const Eigen::VectorXd qd_ortho = damped_pinv(jacobian(m, q), 0.0) * twist;
  CHECK(std::abs((modified_jacobian(m, q, n, 6) * qd_ortho)(0)) <= 1e-9);

  for (int link = 1; link <= 6; ++link) {
    const Eigen::RowVectorXd row = modified_jacobian(m, q, n, link);
    for (int j = 0; j < 6; ++j) {
      Eigen::VectorXd qp = q, qm = q;
      qp(j) += 1e-6;
      qm(j) -= 1e-6;
      const double fd = n.dot(link_positions(m, qp)[link] - link_positions(m, qm)[link]) / 2e-6;
      CHECK(std::abs(row(j) - fd) <= 1e-5);
      if (j >= link) CHECK(row(j) == 0.0);
    }
  }
  CHECK_THROWS(modified_jacobian(m, q, n, 0));
  CHECK_THROWS(modified_jacobian(m, q, n, 7));
  CHECK_THROWS(modified_jacobian(m, q, Eigen::Vector3d(1, 1, 0), 3));
}

TEST_CASE("scaling LP basic cases") {
  ScalingProblem pb;
  pb.q_dot_adm = Eigen::Vector2d(0.1, 0.1);
  pb.q_dot_current = pb.q_dot_adm;
  pb.q_dot_min = -Eigen::Vector2d::Ones();
  pb.q_dot_max = Eigen::Vector2d::Ones();
  pb.q_ddot_min = -Eigen::Vector2d::Constant(100);
  pb.q_ddot_max = Eigen::Vector2d::Constant(100);
  pb.directed_rows = Eigen::RowVector2d(1.0, 0.0);
  pb.v_max = Eigen::VectorXd::Constant(1, 5.0);
  auto r = optimal_alpha(pb);
  CHECK(r.alpha == 1.0);
  CHECK(r.binding == BindingConstraint::box);
  CHECK(r.feasible);

  pb.q_dot_adm = Eigen::Vector2d(2.0, 0.0);
  pb.q_dot_max = Eigen::Vector2d::Constant(5);
  pb.q_dot_current = Eigen::Vector2d(1.0, 0.0);
  pb.v_max(0) = 1.0;
  r = optimal_alpha(pb);
  CHECK(r.alpha == doctest::Approx(0.5));
  CHECK(r.binding == BindingConstraint::iso_limit);

  pb.v_max(0) = 10.0;
  pb.q_dot_max = Eigen::Vector2d(1.5, 1.0);
  pb.q_dot_current = Eigen::Vector2d(1.5, 0.0);
  r = optimal_alpha(pb);
  CHECK(r.alpha == doctest::Approx(0.75));
  CHECK(r.binding == BindingConstraint::joint_velocity);

  pb.q_dot_max = Eigen::Vector2d::Constant(5);
  pb.q_dot_current = Eigen::Vector2d::Zero();
  r = optimal_alpha(pb);
  CHECK(r.alpha == doctest::Approx(100 * 0.002 / 2.0));
  CHECK(r.binding == BindingConstraint::joint_acceleration);

  // Moving fast while the limit demands a stop: braking exceeds one cycle.
  pb.q_dot_current = Eigen::Vector2d(2.0, 0.0);
  pb.v_max(0) = 0.0;
  r = optimal_alpha(pb);
  CHECK_FALSE(r.feasible);
  CHECK(r.alpha == 0.0);
  CHECK((pb.directed_rows * (r.alpha * pb.q_dot_adm))(0) <= pb.v_max(0));

  pb.T_r = 0.0;
  CHECK_THROWS(optimal_alpha(pb));
  pb.T_r = 0.002;
  pb.v_max = Eigen::Vector2d::Ones();
  CHECK_THROWS_AS(optimal_alpha(pb), DimensionError);
}

TEST_CASE("property: scaling LP matches a grid search") {
  Gen g(42);
  int feasible = 0, infeasible = 0;
  for (int k = 0; k < 1000; ++k) {
    const ScalingProblem pb = random_problem(g, g.integer(1, 7), g.integer(1, 7));
    const ScalingResult r = optimal_alpha(pb);
    const double grid = grid_alpha(pb);
    CHECK(r.alpha >= 0.0);
    CHECK(r.alpha <= 1.0);
    // Speed limits and the velocity box hold on every instance.
    const Eigen::VectorXd u = r.alpha * pb.q_dot_adm;
    CHECK(((pb.directed_rows * u - pb.v_max).array() <= 1e-12).all());
    CHECK(((u - pb.q_dot_max).array() <= 1e-12).all());
    CHECK(((pb.q_dot_min - u).array() <= 1e-12).all());
    if (r.feasible) {
      ++feasible;
      CHECK(satisfies(pb, r.alpha, 1e-9));
      if (grid >= 0.0) CHECK(std::abs(r.alpha - grid) <= 1e-3);
    } else {
      ++infeasible;
      CHECK(grid < 0.0);
    }
  }
  CHECK(feasible > 300);
  CHECK(infeasible > 10);
}

TEST_CASE("property: scaling is monotone in the limits and the command") {
  Gen g(5);
  for (int k = 0; k < 1000; ++k) {
    ScalingProblem pb = random_problem(g, 6, 6);
    const ScalingResult base = optimal_alpha(pb);

    ScalingProblem tighter = pb;
    tighter.v_max(g.integer(0, 5)) *= g.uniform();
    const ScalingResult t = optimal_alpha(tighter);
    if (base.feasible && t.feasible) CHECK(t.alpha <= base.alpha + 1e-12);

    ScalingProblem inflated = pb;
    inflated.q_dot_adm *= g.uniform(1.0, 3.0);
    const ScalingResult i = optimal_alpha(inflated);
    if (base.feasible && i.feasible) CHECK(i.alpha <= base.alpha + 1e-12);
  }
}

TEST_CASE("property: combining both limits is never more conservative") {
  Gen g(77);
  SafetyParams p;
  const double pfl = pfl_limit(p, 16.0);
  for (int k = 0; k < 1000; ++k) {
    ScalingProblem pb = random_problem(g, 6, 6);
    Eigen::VectorXd ssm(6);
    for (int i = 0; i < 6; ++i) ssm(i) = ssm_limit(p, g.uniform(0, 1.5), g.uniform(-0.5, 1.0));
    pb.v_max = ssm;
    const double a_ssm = optimal_alpha(pb).alpha;
    pb.v_max = Eigen::VectorXd::Constant(6, pfl);
    const double a_pfl = optimal_alpha(pb).alpha;
    pb.v_max = ssm.cwiseMax(pfl);
    const double a_both = optimal_alpha(pb).alpha;
    CHECK(a_both >= a_ssm - 1e-12);
    CHECK(a_both >= a_pfl - 1e-12);
  }
}
