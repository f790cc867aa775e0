#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "handover/detector/load_curve.hpp"

namespace handover::detector {

constexpr int kFeatureCount = 6;
constexpr int kDefaultWindow = 500;
constexpr int kDefaultStride = 10;

/// Time-major force readings, oldest row first (rows x 6).
using SequenceMatrix = Eigen::Matrix<float, Eigen::Dynamic, kFeatureCount, Eigen::RowMajor>;
using ForceWindow = SequenceMatrix;

struct WindowRef {
  std::uint32_t sequence = 0;
  std::uint32_t end = 0;  // index one past the last row
  int label = 0;
};

/// Sliding windows referencing their source sequences (no copies).
struct WindowedDataset {
  std::vector<SequenceMatrix> sequences;
  std::vector<WindowRef> samples;
  int window = kDefaultWindow;
  int stride = kDefaultStride;
  std::size_t skipped_sequences = 0;

  ForceWindow materialize(std::size_t index) const;
  std::array<std::size_t, 2> class_counts() const;
};

SequenceMatrix to_matrix(const std::vector<ForceSample>& sequence);

/// floor((L - window) / stride) + 1 windows per sequence, labelled with the
/// last row. Sequences shorter than the window are skipped with a warning.
WindowedDataset window_dataset(const std::vector<std::vector<ForceSample>>& sequences,
                               int window = kDefaultWindow, int stride = kDefaultStride);

std::size_t expected_window_count(std::size_t length, int window, int stride);

enum class BalanceStrategy { weighted_loss, oversample, undersample };

BalanceStrategy parse_balance_strategy(const std::string& name);
std::string to_string(BalanceStrategy s);

struct BalancedSet {
  std::vector<std::size_t> indices;  // into WindowedDataset::samples
  std::array<double, 2> class_weights{1.0, 1.0};
};

/// Re-samples `indices` (or returns them with inverse-frequency weights
/// normalised to a per-sample mean of 1). Requires both classes.
BalancedSet balance_dataset(const WindowedDataset& data, const std::vector<std::size_t>& indices,
                            BalanceStrategy strategy, std::uint64_t seed);

/// One CSV per sequence: t,Fx,Fy,Fz,Tx,Ty,Tz,label.
void write_sequence_csv(const std::filesystem::path& path, const std::vector<ForceSample>& sequence);
std::vector<ForceSample> read_sequence_csv(const std::filesystem::path& path);

/// Reads every seq_*.csv in a directory in lexicographic order.
std::vector<std::vector<ForceSample>> read_dataset_dir(const std::filesystem::path& dir);

}  // namespace handover::detector
