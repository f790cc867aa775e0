#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace handover::detector {

/// Additive force pulse on the held object: flat top with short linear edges,
/// occupying [time, time + width].
struct DisturbanceEvent {
  double time = 0.0;   // s
  double peak = 0.0;   // N along the sensor z axis
  double width = 0.1;  // s
};

/// Load-transfer schedule seen by the giver's wrist sensor.
///
/// Sensor z carries the load with the held object reading negative. The
/// receiver engages at engagement_time, the load ramps linearly to zero over
/// transfer_duration, stays at zero for plateau_duration, then the receiver's
/// slight pull produces a triangular dip to -pull_magnitude lasting
/// pull_duration. Grip force follows the load linearly from f_G0 down to
/// residual_grip.
struct LoadCurveParams {
  double f_L0 = 5.0;
  double f_G0 = 20.0;
  double engagement_time = 1.0;
  double transfer_duration = 0.3;
  double plateau_duration = 0.15;
  double pull_duration = 0.12;
  double pull_magnitude = 1.0;
  double residual_grip = 2.0;
  double noise_sigma = 0.0;
  Eigen::Vector3d com_offset = Eigen::Vector3d(0.0, 0.0, 0.05);  // m, sensor frame
  std::vector<DisturbanceEvent> disturbance_events;
  std::uint64_t seed = 0;

  void validate() const;
  double pull_onset() const { return engagement_time + transfer_duration + plateau_duration; }
  double schedule_end() const { return pull_onset() + pull_duration; }
};

struct LoadState {
  double fz = 0.0;           // noise- and disturbance-free load reading [N]
  double transferred = 0.0;  // fraction of f_L0 taken by the receiver
  double grip = 0.0;         // giver grip force [N]
  bool release = false;      // ground-truth "gripper should open"
};

/// Noise-free schedule at time t (same time base as engagement_time).
LoadState evaluate_load(const LoadCurveParams& p, double t);

/// Sum of all disturbance pulses at time t.
double disturbance_force(const std::vector<DisturbanceEvent>& events, double t);

using WrenchSample = std::array<double, 6>;  // Fx Fy Fz Tx Ty Tz

/// Sensor wrench of a vertical force fz applied at com_offset, plus noise.
/// `noise` holds six unit-normal draws; force channels scale by sigma and
/// torque channels by sigma * 0.02 m.
WrenchSample sensor_wrench(double fz, const Eigen::Vector3d& com_offset, double sigma,
                           const std::array<double, 6>& noise);

/// Six unit-normal draws in channel order.
std::array<double, 6> draw_noise(std::mt19937_64& rng);

struct ForceSample {
  double time = 0.0;
  WrenchSample wrench{};
  int label = 0;
};

/// Samples the schedule at `rate` for round(duration * rate) samples.
std::vector<ForceSample> generate_handover_sequence(const LoadCurveParams& p, double duration, double rate);

struct Range {
  double min = 0.0;
  double max = 0.0;
  double sample(std::mt19937_64& rng) const;
};

/// Parameter distribution for synthetic datasets.
struct GeneratorRanges {
  Range f_L0{2.0, 15.0};
  Range f_G0{15.0, 40.0};
  Range engagement_time{0.6, 1.6};
  Range transfer_duration{0.2, 0.45};
  Range plateau_duration{0.05, 0.3};
  Range pull_duration{0.08, 0.2};
  Range pull_magnitude{0.5, 2.0};
  Range residual_grip{1.0, 3.0};
  Range noise_sigma{0.02, 0.1};
  Range tail_duration{0.2, 0.6};
  Range com_lateral{-0.03, 0.03};
  Range com_height{0.03, 0.1};
  double disturbance_probability = 0.6;  // per sequence
  int max_disturbances = 3;
  Range disturbance_width{0.03, 0.2};
  /// Fraction of pulses whose peak cancels the load reading.
  double cancelling_fraction = 0.5;
  Range cancelling_peak{0.85, 1.15};  // x f_L0
  Range general_peak{-0.6, 1.2};      // x f_L0
  /// Pulses stay before engagement + this fraction of the transfer ramp.
  double disturbance_horizon = 0.7;

  void validate() const;
};

struct SequenceSpec {
  LoadCurveParams curve;
  double duration = 0.0;
};

/// Draws one curve (with its own noise seed) and a duration covering it.
SequenceSpec sample_sequence_spec(const GeneratorRanges& ranges, std::mt19937_64& rng);

/// Disturbance pulses placed before the horizon of `curve`.
std::vector<DisturbanceEvent> sample_disturbances(const GeneratorRanges& ranges,
                                                  const LoadCurveParams& curve,
                                                  std::mt19937_64& rng, double earliest = 0.05);

}  // namespace handover::detector
