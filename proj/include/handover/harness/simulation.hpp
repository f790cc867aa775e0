#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "handover/admittance.hpp"
#include "handover/detector/load_curve.hpp"
#include "handover/detector/network.hpp"
#include "handover/harness/scenario.hpp"

namespace handover::harness {

enum class Outcome { success, premature_drop, failed_release };
std::string to_string(Outcome o);

/// Wall-clock cost of the per-cycle computation. Reported on the console
/// only; never written to files, which must stay reproducible.
struct ComputeStats {
  double mean = 0.0;  // s
  double max = 0.0;   // s
  long long cycles = 0;
};

struct EpisodeMetrics {
  Outcome outcome = Outcome::failed_release;
  double release_time = -1.0;  // s, negative when the gripper never opened
  double arrival_time = -1.0;
  double engagement_time = -1.0;
  double pull_onset = -1.0;
  double transferred_at_release = 0.0;
  double min_separation = 0.0;      // m, over all links and cycles
  double max_directed_speed = 0.0;  // m/s, largest J_ri u
  double max_limit_excess = 0.0;    // m/s, largest J_ri u - v_max_i
  int safety_violations = 0;        // cycles with excess above 1e-6
  int accel_infeasible_cycles = 0;
  double max_path_deviation = 0.0;  // rad, |q - q_des(s)|
  double end_time = 0.0;
  long long cycles = 0;
  ComputeStats compute;

  /// Release time minus pull onset; only meaningful on success.
  double release_latency() const { return release_time - pull_onset; }
};

/// Inputs of the simulated wrist sensor.
struct SensorState {
  bool holding = true;
  detector::LoadCurveParams curve;  // engagement_time is +inf until known
  std::vector<detector::DisturbanceEvent> disturbances;
};

/// Object load (schedule plus disturbance pulses) when holding, nothing
/// otherwise, plus noise. `noise` holds six unit-normal draws.
detector::WrenchSample simulate_ft_sensor(const SensorState& state, double t, const std::array<double, 6>& noise);

/// q_dot_des + Kp (q_des - q) + Kd (q_dot_des - q_dot).
Eigen::VectorXd pd_controller(const Eigen::VectorXd& q_des, const Eigen::VectorXd& q_dot_des,
                              const Eigen::VectorXd& q, const Eigen::VectorXd& q_dot, const PdGains& gains);

struct EpisodeOptions {
  std::shared_ptr<const detector::LstmNetwork<float>> network;  // required for ReleaseKind::network
  std::ostream* log = nullptr;                                  // per-cycle CSV when set
  bool measure_time = true;
};

/// Joint configuration placing the gripper delivery_offset above the hand,
/// with the grasp orientation.
Eigen::VectorXd handover_configuration(const Scenario& s);

/// Runs one episode. Deterministic for a given scenario (and network).
EpisodeMetrics run_handover(const Scenario& s, const EpisodeOptions& options = {});

/// Column names of the per-cycle log.
std::vector<std::string> episode_log_header(int joints);

}  // namespace handover::harness
