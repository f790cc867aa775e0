#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "handover/detector/load_curve.hpp"
#include "handover/detector/network.hpp"

namespace handover::detector {

enum class ReleaseDecision { hold, release };

/// Rolling FIFO of the latest readings feeding the classifier once full.
///
/// A release is declared after `consecutive_required` successive inferences
/// with class-1 output >= threshold; the decision then latches.
class NetworkReleaseDetector {
public:
  NetworkReleaseDetector(std::shared_ptr<const LstmNetwork<float>> net, double threshold = 0.5,
                         int consecutive_required = 5);

  /// Appends without running the network.
  void push(const WrenchSample& reading);
  ReleaseDecision push_and_infer(const WrenchSample& reading);

  bool full() const { return count_ >= window_; }
  std::size_t size() const { return count_ < window_ ? count_ : window_; }
  /// Buffer contents, oldest row first. Requires full().
  Eigen::Ref<const ForceWindow> window() const;

  bool released() const { return released_; }
  /// Class-1 output of the most recent inference, NaN before the first.
  double last_probability() const { return last_probability_; }
  std::size_t inference_count() const { return inferences_; }
  void reset();

private:
  std::shared_ptr<const LstmNetwork<float>> net_;
  double threshold_;
  int consecutive_required_;
  std::size_t window_;
  // Each reading is stored twice (rows i and i + window) so the latest
  // window is always one contiguous block.
  ForceWindow ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  int streak_ = 0;
  bool released_ = false;
  double last_probability_;
  std::size_t inferences_ = 0;
};

/// Force-threshold baseline: release once the measured load magnitude stays
/// at or below (1 - theta) of the calibrated static load for hold_samples.
class ThresholdRelease {
public:
  explicit ThresholdRelease(double theta = 0.8, int hold_samples = 25, int calibration_samples = 250);

  /// Static load from the mean |Fz| of the first calibration_samples readings.
  void calibrate(const std::vector<WrenchSample>& hold_phase);
  bool calibrated() const { return calibrated_; }
  double static_load() const { return f_L0_; }

  ReleaseDecision update(const WrenchSample& reading);
  bool released() const { return released_; }
  int calibration_samples() const { return calibration_samples_; }
  void reset();

private:
  double theta_;
  int hold_samples_;
  int calibration_samples_;
  double f_L0_ = 0.0;
  bool calibrated_ = false;
  int streak_ = 0;
  bool released_ = false;
};

}  // namespace handover::detector
