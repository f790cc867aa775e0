#include "handover/detector/release.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "handover/error.hpp"

namespace handover::detector {

NetworkReleaseDetector::NetworkReleaseDetector(std::shared_ptr<const LstmNetwork<float>> net, double threshold,
                                               int consecutive_required)
    : net_(std::move(net)),
      threshold_(threshold),
      consecutive_required_(consecutive_required),
      last_probability_(std::numeric_limits<double>::quiet_NaN()) {
  if (!net_) throw Error("release detector needs a network");
  if (net_->shape().input != kFeatureCount) throw DimensionError("network must take 6 wrench channels");
  if (consecutive_required_ < 1) throw Error("consecutive_required must be at least 1");
  window_ = static_cast<std::size_t>(net_->shape().window);
  ring_ = ForceWindow::Zero(static_cast<Eigen::Index>(2 * window_), kFeatureCount);
}

void NetworkReleaseDetector::push(const WrenchSample& reading) {
  for (int c = 0; c < kFeatureCount; ++c) {
    const auto v = static_cast<float>(reading[c]);
    ring_(static_cast<Eigen::Index>(head_), c) = v;
    ring_(static_cast<Eigen::Index>(head_ + window_), c) = v;
  }
  head_ = (head_ + 1) % window_;
  ++count_;
}

Eigen::Ref<const ForceWindow> NetworkReleaseDetector::window() const {
  if (!full()) throw Error("FIFO holds " + std::to_string(count_) + " of " + std::to_string(window_) + " readings");
  return ring_.middleRows(static_cast<Eigen::Index>(head_), static_cast<Eigen::Index>(window_));
}

ReleaseDecision NetworkReleaseDetector::push_and_infer(const WrenchSample& reading) {
  push(reading);
  if (released_) return ReleaseDecision::release;
  if (!full()) return ReleaseDecision::hold;
  last_probability_ = static_cast<double>(lstm_forward(*net_, window())(1));
  ++inferences_;
  streak_ = last_probability_ >= threshold_ ? streak_ + 1 : 0;
  if (streak_ >= consecutive_required_) released_ = true;
  return released_ ? ReleaseDecision::release : ReleaseDecision::hold;
}

void NetworkReleaseDetector::reset() {
  ring_.setZero();
  head_ = count_ = inferences_ = 0;
  streak_ = 0;
  released_ = false;
  last_probability_ = std::numeric_limits<double>::quiet_NaN();
}

ThresholdRelease::ThresholdRelease(double theta, int hold_samples, int calibration_samples)
    : theta_(theta), hold_samples_(hold_samples), calibration_samples_(calibration_samples) {
  if (!(theta > 0.0 && theta <= 1.0)) throw Error("theta must lie in (0, 1]");
  if (hold_samples < 1 || calibration_samples < 1) throw Error("sample counts must be positive");
}

void ThresholdRelease::calibrate(const std::vector<WrenchSample>& hold_phase) {
  if (hold_phase.size() < static_cast<std::size_t>(calibration_samples_))
    throw Error("threshold calibration needs " + std::to_string(calibration_samples_) + " samples, got " +
                std::to_string(hold_phase.size()));
  double sum = 0.0;
  for (int i = 0; i < calibration_samples_; ++i) sum += std::abs(hold_phase[static_cast<std::size_t>(i)][2]);
  f_L0_ = sum / calibration_samples_;
  calibrated_ = true;
}

ReleaseDecision ThresholdRelease::update(const WrenchSample& reading) {
  if (!calibrated_) throw Error("threshold release used before calibration");
  if (released_) return ReleaseDecision::release;
  streak_ = std::abs(reading[2]) <= (1.0 - theta_) * f_L0_ ? streak_ + 1 : 0;
  if (streak_ >= hold_samples_) released_ = true;
  return released_ ? ReleaseDecision::release : ReleaseDecision::hold;
}

void ThresholdRelease::reset() {
  streak_ = 0;
  released_ = false;
}

}  // namespace handover::detector
