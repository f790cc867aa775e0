#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "handover/detector/dataset.hpp"
#include "handover/detector/network.hpp"

namespace handover::detector {

struct TrainingConfig {
  int batch_size = 256;
  double learning_rate = 4e-3;
  int patience = 50;
  BalanceStrategy balance = BalanceStrategy::undersample;
  int window = kDefaultWindow;
  int stride = kDefaultStride;
  std::uint64_t seed = 1;
  int max_epochs = 1000;
  /// Caps the samples drawn per epoch after balancing (0 keeps all); the
  /// subset is fixed by the seed.
  std::size_t max_samples = 0;
  /// Samples per forward/backward pass; gradients are accumulated up to batch_size.
  int micro_batch = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Seeded initial weights with the wrench scaling used by the detector
/// (0.1 on forces, 1 on torques).
LstmNetwork<float> make_detector_network(const NetworkShape& shape, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingResult {
  LstmNetwork<float> best;
  double best_loss = 0.0;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

/// The samples (and class weights) one epoch iterates over: the balanced
/// training indices, capped at max_samples.
BalancedSet prepare_training_set(const WindowedDataset& data, const std::vector<std::size_t>& train_indices,
                                 const TrainingConfig& cfg);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Adam on the weighted BCE with early stopping on the epoch training loss.
///
/// Stops once `patience` consecutive epochs fail to improve on the best loss
/// (so patience 0 ends at the first non-improving epoch) or at max_epochs.
/// Returns the best parameters seen. Throws on a non-finite loss.
TrainingResult train(const LstmNetwork<float>& initial, const WindowedDataset& data,
                     const std::vector<std::size_t>& train_indices, const std::vector<std::size_t>& val_indices,
                     const TrainingConfig& cfg, const EpochCallback& on_epoch = {});

/// Mean weighted BCE over `indices`.
double evaluate_loss(const LstmNetwork<float>& net, const WindowedDataset& data,
                     const std::vector<std::size_t>& indices, std::array<double, 2> class_weights = {1.0, 1.0},
                     int micro_batch = 64);

/// Class-1 output for each index, in order.
std::vector<float> predict_release(const LstmNetwork<float>& net, const WindowedDataset& data,
                                   const std::vector<std::size_t>& indices, int micro_batch = 64);

/// Fraction of windows whose thresholded class-1 output matches the label.
double accuracy(const LstmNetwork<float>& net, const WindowedDataset& data,
                const std::vector<std::size_t>& indices, double threshold = 0.5);

}  // namespace handover::detector
