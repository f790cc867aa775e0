#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "handover/detector/dataset.hpp"

namespace handover::detector {

/// Layer sizes of the release classifier: an LSTM over `window` timesteps of
/// `input` features, then dense(hidden->dense1) ReLU, dense(dense1->dense2)
/// ReLU, dense(dense2->output) and an elementwise sigmoid.
struct NetworkShape {
  int input = kFeatureCount;
  int hidden = 64;
  int dense1 = 512;
  int dense2 = 256;
  int output = 2;
  int window = kDefaultWindow;

  void validate() const;
  Eigen::Index parameter_count() const;
  bool operator==(const NetworkShape&) const = default;
};

/// Offsets of each tensor inside the flat parameter vector. Matrices are
/// stored column-major. LSTM gate blocks are ordered input, forget, cell, output.
struct ParameterLayout {
  explicit ParameterLayout(const NetworkShape& s);

  struct Slot {
    Eigen::Index offset, rows, cols;
  };
  Slot wx, wh, b, w1, b1, w2, b2, w3, b3;
  Eigen::Index total = 0;
};

template <typename S>
class LstmNetwork {
public:
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using MatMap = Eigen::Map<Mat>;
  using ConstMatMap = Eigen::Map<const Mat>;

  /// All-zero weights and biases, unit input scaling.
  explicit LstmNetwork(const NetworkShape& shape);

  /// Glorot-uniform recurrent/input weights, He-uniform dense weights, forget bias 1.
  static LstmNetwork initialized(const NetworkShape& shape, std::uint64_t seed);

  const NetworkShape& shape() const { return shape_; }
  const ParameterLayout& layout() const { return layout_; }

  Vec& parameters() { return params_; }
  const Vec& parameters() const { return params_; }

  /// Per-feature multiplier applied to raw readings before the LSTM.
  Vec& input_scale() { return input_scale_; }
  const Vec& input_scale() const { return input_scale_; }

  MatMap tensor(const ParameterLayout::Slot& s) {
    return MatMap(params_.data() + s.offset, s.rows, s.cols);
  }
  ConstMatMap tensor(const ParameterLayout::Slot& s) const {
    return ConstMatMap(params_.data() + s.offset, s.rows, s.cols);
  }

  template <typename T>
  LstmNetwork<T> cast() const {
    LstmNetwork<T> out(shape_);
    out.parameters() = params_.template cast<T>();
    out.input_scale() = input_scale_.template cast<T>();
    return out;
  }

private:
  NetworkShape shape_;
  ParameterLayout layout_;
  Vec params_;
  Vec input_scale_;
};

/// Activations kept for backpropagation through time. Column t * B + b of
/// the per-timestep buffers belongs to timestep t of batch element b.
template <typename S>
struct ForwardCache {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  int steps = 0;
  int batch = 0;
  Mat x;       // scaled inputs, input x (T*B)
  Mat gates;   // activated gates, 4H x (T*B)
  Mat cell;    // H x (T*B)
  Mat hidden;  // H x (T*B)
  Mat a1, a2;  // dense activations
  Mat probs;   // output x B
};

/// Packs windows (T x 6, oldest first) into the column layout used by
/// ForwardCache::x, without scaling.
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> pack_batch(const WindowedDataset& data,
                                                            const std::vector<std::size_t>& indices,
                                                            std::size_t begin, std::size_t end);

template <typename S>
void forward_batch(const LstmNetwork<S>& net, const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& raw_x,
                   int steps, int batch, ForwardCache<S>& cache);

/// Accumulates d(loss)/d(params) into `grad` for the cached batch.
///
/// The loss is sum_b weight_b * bce(target_b, probs_b) / normalizer, where
/// bce averages the per-output binary cross-entropy. Returns the
/// un-normalised weighted loss sum (double).
template <typename S>
double backward_batch(const LstmNetwork<S>& net, const ForwardCache<S>& cache,
                      const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& targets,
                      const Eigen::Matrix<S, Eigen::Dynamic, 1>& weights, double normalizer,
                      Eigen::Matrix<S, Eigen::Dynamic, 1>& grad);

/// Class probabilities for one window (rows = timesteps, oldest first).
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, 1> lstm_forward(const LstmNetwork<S>& net,
                                                 const Eigen::Ref<const ForceWindow>& window);

/// Mean over outputs of -(y log p + (1 - y) log(1 - p)), p clamped to [1e-7, 1 - 1e-7].
double bce_loss(const Eigen::Ref<const Eigen::VectorXd>& target, const Eigen::Ref<const Eigen::VectorXd>& predicted);

/// One-hot pair for a class label: (1, 0) means hold, (0, 1) means release.
Eigen::Vector2d one_hot(int label);

extern template class LstmNetwork<float>;
extern template class LstmNetwork<double>;

}  // namespace handover::detector
