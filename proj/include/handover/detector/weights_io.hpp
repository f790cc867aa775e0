#pragma once

#include <filesystem>

#include "handover/detector/network.hpp"

namespace handover::detector {

/// JSON weight file:
///
///   {"format": "handover-lstm-v1",
///    "shape": {"input", "hidden", "dense1", "dense2", "output", "window"},
///    "input_scale": [...],
///    "tensors": {"wx": {"shape": [rows, cols], "data": [...column-major...]}, ...}}
///
/// Tensor names: wx, wh, b (LSTM, gates i f g o), w1 b1, w2 b2, w3 b3.
void save_weights(const std::filesystem::path& path, const LstmNetwork<float>& net);

/// Throws on a missing file, wrong format tag, or any tensor whose shape
/// disagrees with the header (the message names the tensor and both shapes).
LstmNetwork<float> load_weights(const std::filesystem::path& path);

}  // namespace handover::detector
