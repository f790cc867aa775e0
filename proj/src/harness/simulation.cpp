#include "handover/harness/simulation.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>

#include "handover/csv.hpp"
#include "handover/detector/release.hpp"
#include "handover/error.hpp"
#include "handover/safety.hpp"
#include "handover/trajectory.hpp"

namespace handover::harness {

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::success: return "success";
    case Outcome::premature_drop: return "premature_drop";
    case Outcome::failed_release: return "failed_release";
  }
  return "unknown";
}

detector::WrenchSample simulate_ft_sensor(const SensorState& state, double t, const std::array<double, 6>& noise) {
  double fz = 0.0;
  if (state.holding)
    fz = detector::evaluate_load(state.curve, t).fz + detector::disturbance_force(state.disturbances, t);
  return detector::sensor_wrench(fz, state.curve.com_offset, state.curve.noise_sigma, noise);
}

Eigen::VectorXd pd_controller(const Eigen::VectorXd& q_des, const Eigen::VectorXd& q_dot_des,
                              const Eigen::VectorXd& q, const Eigen::VectorXd& q_dot, const PdGains& gains) {
  return q_dot_des + gains.kp * (q_des - q) + gains.kd * (q_dot_des - q_dot);
}

Eigen::VectorXd handover_configuration(const Scenario& s) {
  const Pose grasp = forward_kinematics(s.robot, s.grasp_q);
  Pose target;
  target.position = s.handover_hand_position + s.delivery_offset;
  target.rotation = grasp.rotation;
  std::vector<Eigen::VectorXd> seeds;
  if (s.robot.joint_count() == 6) {
    // Elbow-up ready pose facing the target.
    constexpr double half_pi = std::numbers::pi / 2.0;
    Eigen::VectorXd ready(6);
    ready << std::atan2(target.position.y(), target.position.x()) + std::numbers::pi, -half_pi, half_pi,
        -half_pi, -half_pi, 0.0;
    seeds.push_back(ready);
  }
  seeds.push_back(s.grasp_q);
  std::string last_error;
  for (const auto& seed : seeds) {
    try {
      return solve_ik(s.robot, target, seed);
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  throw ConfigError("handover pose is unreachable: " + last_error);
}

std::vector<std::string> episode_log_header(int n) {
  std::vector<std::string> h{"t", "phase"};
  for (const char* prefix : {"q", "qd_cmd", "u"})
    for (int j = 1; j <= n; ++j) h.push_back(prefix + std::to_string(j));
  for (const char* name : {"x", "y", "z", "Fx", "Fy", "Fz", "Tx", "Ty", "Tz", "s", "alpha", "binding", "feasible",
                           "separation", "directed_speed", "speed_limit", "ssm_min", "pfl", "hand_x", "hand_y",
                           "hand_z", "sensor_Fz", "detector", "gripper_open", "transferred"})
    h.emplace_back(name);
  return h;
}

namespace {

enum class Phase { approach, hold, retreat };

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::approach: return "approach";
    case Phase::hold: return "hold";
    case Phase::retreat: return "retreat";
  }
  return "?";
}

struct SafetyFrame {
  ScalingProblem problem;
  double min_separation = std::numeric_limits<double>::infinity();
  double ssm_min = std::numeric_limits<double>::infinity();
};

SafetyFrame safety_frame(const Scenario& s, const Eigen::VectorXd& q, const HumanState& human, double pfl) {
  const int n = s.robot.joint_count();
  SafetyFrame f;
  f.problem.directed_rows = Eigen::MatrixXd::Zero(n, n);
  f.problem.v_max.resize(n);
  const auto points = link_positions(s.robot, q);
  for (int i = 1; i <= n; ++i) {
    const Eigen::Vector3d diff = human.hand_position - points[static_cast<std::size_t>(i)];
    const double dist = diff.norm();
    const double sep = std::max(0.0, dist - s.safety.human_radius);
    f.min_separation = std::min(f.min_separation, sep);
    if (dist < 1e-9) {
      // Hand inside the link point: no direction, keep the contact-speed cap.
      f.problem.v_max(i - 1) = pfl;
      f.ssm_min = 0.0;
      continue;
    }
    const Eigen::Vector3d versor = diff / dist;
    const double v_h = std::max(0.0, -human.hand_velocity.dot(versor));
    const double ssm = ssm_limit(s.safety, sep, v_h);
    f.ssm_min = std::min(f.ssm_min, ssm);
    f.problem.v_max(i - 1) = combined_limit(ssm, pfl);
    f.problem.directed_rows.row(i - 1) = modified_jacobian(s.robot, q, versor, i);
  }
  f.problem.q_dot_min = s.robot.q_dot_min();
  f.problem.q_dot_max = s.robot.q_dot_max();
  f.problem.q_ddot_min = s.robot.q_ddot_min();
  f.problem.q_ddot_max = s.robot.q_ddot_max();
  f.problem.T_r = s.control_period();
  return f;
}

}  // namespace

EpisodeMetrics run_handover(const Scenario& s, const EpisodeOptions& options) {
  s.validate();
  if (s.release == ReleaseKind::network && !options.network)
    throw ConfigError("release 'network' needs trained weights");

  const ManipulatorModel& robot = s.robot;
  const int n = robot.joint_count();
  const double T = s.control_period();
  const double pfl = pfl_limit(s.safety, apparent_mass(robot));

  const Eigen::VectorXd q_handover = handover_configuration(s);
  SplineTrajectory path = fit_cubic_spline(plan_quintic(s.grasp_q, q_handover, s.approach_duration, s.control_rate));
  PathParameter param{path.start_time(), 1.0, path.end_time()};

  SensorState sensor;
  sensor.curve.f_L0 = s.object_weight();
  sensor.curve.f_G0 = s.transfer.f_G0;
  sensor.curve.engagement_time = std::numeric_limits<double>::infinity();
  sensor.curve.transfer_duration = s.transfer.transfer_duration;
  sensor.curve.plateau_duration = s.transfer.plateau_duration;
  sensor.curve.pull_duration = s.transfer.pull_duration;
  sensor.curve.pull_magnitude = s.transfer.pull_magnitude;
  sensor.curve.residual_grip = s.transfer.residual_grip;
  sensor.curve.noise_sigma = s.transfer.noise_sigma;
  sensor.curve.com_offset = s.transfer.com_offset;
  const std::array<double, 6> no_noise{};
  const detector::WrenchSample tare = detector::sensor_wrench(-s.object_weight(), s.transfer.com_offset, 0.0, no_noise);
  std::mt19937_64 noise_rng(s.seed);

  std::unique_ptr<detector::NetworkReleaseDetector> net_detector;
  std::unique_ptr<detector::ThresholdRelease> threshold;
  std::vector<detector::WrenchSample> calibration;
  if (s.release == ReleaseKind::network)
    net_detector = std::make_unique<detector::NetworkReleaseDetector>(
        options.network, s.detector.probability_threshold, s.detector.consecutive_required);
  else
    threshold = std::make_unique<detector::ThresholdRelease>(s.detector.theta, s.detector.hold_samples,
                                                             s.detector.calibration_samples);

  EpisodeMetrics m;
  m.min_separation = std::numeric_limits<double>::infinity();
  Eigen::VectorXd q = s.grasp_q;
  Eigen::VectorXd q_dot = Eigen::VectorXd::Zero(n);
  // Jacobian at the configuration where the last joint velocity was applied.
  Jacobian J_applied = jacobian(robot, q);
  double alpha = 1.0;
  Phase phase = Phase::approach;
  bool holding = true;
  bool finished = false;
  double sum_compute = 0.0;

  std::optional<csv::Writer> log;
  if (options.log) {
    log.emplace(*options.log);
    log->header(episode_log_header(n));
  }

  const auto max_cycles = static_cast<long long>(std::llround(s.max_duration * s.control_rate));
  for (long long k = 0; k <= max_cycles && !finished; ++k) {
    const double t = static_cast<double>(k) * T;
    const auto noise = detector::draw_noise(noise_rng);
    const auto tic = std::chrono::steady_clock::now();

    // Sensing and release decision.
    const HumanState human = human_motion(s, t);
    sensor.holding = holding;
    const detector::WrenchSample reading = simulate_ft_sensor(sensor, t, noise);
    const bool armed = holding && phase == Phase::hold;
    bool open_now = false;
    double detector_value = std::numeric_limits<double>::quiet_NaN();
    if (net_detector) {
      if (armed)
        open_now = net_detector->push_and_infer(reading) == detector::ReleaseDecision::release;
      else
        net_detector->push(reading);
      detector_value = net_detector->last_probability();
    } else {
      if (!threshold->calibrated()) {
        calibration.push_back(reading);
        if (calibration.size() == static_cast<std::size_t>(s.detector.calibration_samples))
          threshold->calibrate(calibration);
      }
      if (threshold->calibrated()) {
        detector_value = std::abs(reading[2]) / threshold->static_load();
        if (armed) open_now = threshold->update(reading) == detector::ReleaseDecision::release;
      }
    }
    if (open_now) {
      holding = false;
      m.release_time = t;
      m.transferred_at_release = detector::evaluate_load(sensor.curve, t).transferred;
      m.outcome = m.transferred_at_release < 0.9 ? Outcome::premature_drop : Outcome::success;
      path = fit_cubic_spline(plan_quintic(q, s.grasp_q, s.retreat_duration, s.control_rate));
      param = PathParameter{path.start_time(), 1.0, path.end_time()};
      alpha = 1.0;
      phase = Phase::retreat;
    } else if (holding && phase == Phase::hold &&
               t > sensor.curve.schedule_end() + s.release_timeout) {
      m.outcome = Outcome::failed_release;
      finished = true;
    }

    // Reference along the path; s advances by the previous alpha.
    if (k > 0) param = advance_parameter(param, alpha, T);
    const TrajectoryPoint ref = sample_spline(path, param.s);
    if (phase == Phase::approach && param.s >= param.s_end) {
      phase = Phase::hold;
      m.arrival_time = t;
      m.engagement_time = std::max(s.receiver_engagement_time, t);
      sensor.curve.engagement_time = m.engagement_time;
      m.pull_onset = sensor.curve.pull_onset();
      for (const auto& d : s.disturbances) {
        const double anchor = d.anchor == DisturbanceAnchor::arrival ? m.arrival_time : m.engagement_time;
        sensor.disturbances.push_back({anchor + d.offset, d.peak, d.width});
      }
    } else if (phase == Phase::retreat && param.s >= param.s_end) {
      finished = true;
    }
    m.max_path_deviation = std::max(m.max_path_deviation, (q - ref.q).norm());

    // Controller.
    Eigen::VectorXd q_dot_cmd;
    Wrench f_ext;
    if (s.controller == ControllerKind::admittance) {
      const CartesianReference xr = to_cartesian(robot, ref.q, ref.q_dot, ref.q_ddot);
      const Pose x = forward_kinematics(robot, q);
      const Jacobian J = jacobian(robot, q);
      const Vector6d x_dot = J_applied * q_dot;
      J_applied = J;
      Wrench raw;
      for (int c = 0; c < 3; ++c) {
        raw.force(c) = reading[c] - (holding ? tare[c] : 0.0);
        raw.torque(c) = reading[c + 3] - (holding ? tare[c + 3] : 0.0);
      }
      f_ext = transform_wrench(x.rotation, raw, s.admittance.force_weight());
      const Vector6d x_ddot = admittance_accel(s.admittance, xr.x, xr.x_dot, xr.x_ddot, x, x_dot, f_ext);
      const Vector6d x_dot_adm = integrate_velocity(x_ddot, x_dot, T);
      q_dot_cmd = damped_pinv(J, s.pinv_damping) * x_dot_adm;
    } else {
      q_dot_cmd = pd_controller(ref.q, ref.q_dot, q, q_dot, s.pd);
    }

    // Safety scaling.
    SafetyFrame frame = safety_frame(s, q, human, pfl);
    frame.problem.q_dot_adm = q_dot_cmd;
    frame.problem.q_dot_current = q_dot;
    const ScalingResult scaling = optimal_alpha(frame.problem);
    const Eigen::VectorXd u = scaling.alpha * q_dot_cmd;

    if (options.measure_time) {
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - tic).count();
      sum_compute += dt;
      m.compute.max = std::max(m.compute.max, dt);
    }

    // Telemetry on the commanded velocity.
    const Eigen::VectorXd directed = frame.problem.directed_rows * u;
    const Eigen::VectorXd excess = directed - frame.problem.v_max;
    Eigen::Index worst = 0;
    excess.maxCoeff(&worst);
    m.max_directed_speed = std::max(m.max_directed_speed, directed.maxCoeff());
    m.max_limit_excess = std::max(m.max_limit_excess, excess(worst));
    if (excess(worst) > 1e-6) ++m.safety_violations;
    if (!scaling.feasible) ++m.accel_infeasible_cycles;
    m.min_separation = std::min(m.min_separation, frame.min_separation);

    if (log) {
      const Pose x = forward_kinematics(robot, q);
      const double transferred = holding ? detector::evaluate_load(sensor.curve, t).transferred : 1.0;
      log->field(t).field(phase_name(phase));
      for (const Eigen::VectorXd* v : std::initializer_list<const Eigen::VectorXd*>{&q, &q_dot_cmd, &u})
        for (int j = 0; j < n; ++j) log->field((*v)(j));
      for (int c = 0; c < 3; ++c) log->field(x.position(c));
      for (int c = 0; c < 3; ++c) log->field(f_ext.force(c));
      for (int c = 0; c < 3; ++c) log->field(f_ext.torque(c));
      log->field(param.s).field(scaling.alpha).field(to_string(scaling.binding));
      log->field(static_cast<long long>(scaling.feasible ? 1 : 0));
      log->field(frame.min_separation).field(directed(worst)).field(frame.problem.v_max(worst));
      log->field(frame.ssm_min).field(pfl);
      for (int c = 0; c < 3; ++c) log->field(human.hand_position(c));
      log->field(reading[2]).field(detector_value);
      log->field(static_cast<long long>(holding ? 0 : 1)).field(transferred);
      log->end_row();
    }

    // Ideal velocity-controlled plant.
    q += u * T;
    q_dot = u;
    alpha = scaling.alpha;
    m.end_time = t;
    m.cycles = k + 1;
  }

  if (holding && m.outcome != Outcome::failed_release) m.outcome = Outcome::failed_release;
  m.compute.cycles = m.cycles;
  m.compute.mean = m.cycles > 0 ? sum_compute / static_cast<double>(m.cycles) : 0.0;
  return m;
}

}  // namespace handover::harness
