#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "handover/admittance.hpp"
#include "handover/config.hpp"
#include "handover/detector/load_curve.hpp"
#include "handover/kinematics.hpp"
#include "handover/safety.hpp"

namespace handover::harness {

using detector::Range;

enum class ControllerKind { admittance, pd };
enum class ReleaseKind { network, threshold };

std::string to_string(ControllerKind c);
std::string to_string(ReleaseKind r);
ControllerKind parse_controller(std::string_view name);
ReleaseKind parse_release(std::string_view name);

struct HandWaypoint {
  double time = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

/// When a disturbance is measured from: the robot's arrival at the hand or
/// the receiver's first contact.
enum class DisturbanceAnchor { arrival, engagement };

struct ScenarioDisturbance {
  DisturbanceAnchor anchor = DisturbanceAnchor::engagement;
  double offset = 0.0;  // s relative to the anchor
  double peak = 0.0;    // N on sensor z
  double width = 0.1;   // s
};

/// Receiver behaviour once in contact (the detector's load-transfer model).
struct TransferProfile {
  double f_G0 = 20.0;
  double transfer_duration = 0.3;
  double plateau_duration = 0.15;
  double pull_duration = 0.12;
  double pull_magnitude = 1.0;
  double residual_grip = 2.0;
  double noise_sigma = 0.05;
  Eigen::Vector3d com_offset = Eigen::Vector3d(0.0, 0.0, 0.05);
};

struct PdGains {
  double kp = 5.0;  // 1/s
  double kd = 0.0;
};

struct DetectorSettings {
  double probability_threshold = 0.5;
  int consecutive_required = 5;
  double theta = 0.8;
  int hold_samples = 25;
  int calibration_samples = 250;
};

/// Pick configuration: gripper pointing down beside the base.
Eigen::VectorXd default_grasp_q();

/// One simulated handover.
///
/// Times are seconds from episode start. The robot leaves grasp_q holding the
/// object, moves so the gripper sits delivery_offset above
/// handover_hand_position, and waits for the receiver, who engages at
/// max(receiver_engagement_time, arrival). The tracked hand follows
/// hand_motion (or stays at handover_hand_position when empty).
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double object_mass = 0.5;
  Eigen::VectorXd grasp_q = default_grasp_q();
  Eigen::Vector3d handover_hand_position = Eigen::Vector3d(0.7, 0.0, 0.3);
  Eigen::Vector3d delivery_offset = Eigen::Vector3d(0.0, 0.0, 0.1);
  std::vector<HandWaypoint> hand_motion;
  double receiver_engagement_time = 4.0;
  TransferProfile transfer;
  std::vector<ScenarioDisturbance> disturbances;
  ControllerKind controller = ControllerKind::admittance;
  ReleaseKind release = ReleaseKind::network;
  double control_rate = 500.0;
  double sensor_rate = 500.0;
  double approach_duration = 3.0;
  double retreat_duration = 3.0;
  /// After the pull ends, how long the robot waits for a release.
  double release_timeout = 1.5;
  /// Hard cap on the episode length.
  double max_duration = 20.0;
  double pinv_damping = 1e-3;
  ManipulatorModel robot = ManipulatorModel::default_cobot();
  SafetyParams safety;
  AdmittanceParams admittance = AdmittanceParams::defaults();
  PdGains pd;
  DetectorSettings detector;

  /// Throws ConfigError on any inconsistency.
  void validate() const;
  double control_period() const { return 1.0 / control_rate; }
  double object_weight() const { return object_mass * 9.81; }
};

Scenario scenario_from_json(const config::Json& j);
config::Json to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Tracked hand position and its exact (right-continuous) derivative.
HumanState human_motion(const Scenario& s, double t);

/// Randomised but reproducible scenario for batch comparisons.
struct ScenarioRanges {
  Range hand_x{0.5, 0.9};
  Range hand_y{-0.4, 0.4};
  Range hand_z{0.1, 0.5};
  Range object_mass{0.2, 1.5};
  Range engagement_delay{0.6, 1.2};  // after nominal arrival
  Range transfer_duration{0.2, 0.45};
  Range plateau_duration{0.05, 0.3};
  Range pull_duration{0.08, 0.2};
  Range pull_magnitude{0.5, 2.0};
  Range noise_sigma{0.02, 0.1};
  int min_disturbances = 1;
  int max_disturbances = 3;
  Range disturbance_width{0.06, 0.2};
  double cancelling_fraction = 0.5;
  Range cancelling_peak{0.85, 1.15};  // x object weight
  Range general_peak{-0.6, 1.2};      // x object weight
  /// Pulses end before engagement + this fraction of the transfer ramp.
  double disturbance_horizon = 0.7;
};

/// `base` supplies everything not randomised (robot, gains, controller ...).
std::vector<Scenario> random_scenarios(const Scenario& base, const ScenarioRanges& ranges, int count,
                                       std::uint64_t seed, bool with_disturbances = true);

}  // namespace handover::harness
