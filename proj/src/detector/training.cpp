#include "handover/detector/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "handover/error.hpp"

namespace handover::detector {

void TrainingConfig::validate() const {
  if (batch_size < 1 || micro_batch < 1) throw Error("batch sizes must be positive");
  if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
  if (patience < 0) throw Error("patience must be non-negative");
  if (window < 1) throw Error("window must be positive");
  if (stride < 1) throw Error("stride must be at least 1");
  if (max_epochs < 1) throw Error("max_epochs must be positive");
}

namespace {

using MatF = Eigen::MatrixXf;
using VecF = Eigen::VectorXf;

void fill_targets(const WindowedDataset& data, const std::vector<std::size_t>& indices, std::size_t begin,
                  std::size_t end, const std::array<double, 2>& class_weights, MatF& targets, VecF& weights) {
  const auto B = static_cast<Eigen::Index>(end - begin);
  targets.resize(2, B);
  weights.resize(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const int label = data.samples[indices[begin + static_cast<std::size_t>(b)]].label;
    targets.col(b) = one_hot(label).cast<float>();
    weights(b) = static_cast<float>(class_weights[label ? 1 : 0]);
  }
}

}  // namespace

double evaluate_loss(const LstmNetwork<float>& net, const WindowedDataset& data,
                     const std::vector<std::size_t>& indices, std::array<double, 2> class_weights,
                     int micro_batch) {
  if (indices.empty()) throw Error("cannot evaluate the loss of an empty set");
  ForwardCache<float> cache;
  double total = 0.0;
  for (std::size_t begin = 0; begin < indices.size(); begin += static_cast<std::size_t>(micro_batch)) {
    const std::size_t end = std::min(indices.size(), begin + static_cast<std::size_t>(micro_batch));
    forward_batch(net, pack_batch<float>(data, indices, begin, end), data.window, static_cast<int>(end - begin),
                  cache);
    for (std::size_t k = begin; k < end; ++k) {
      const int label = data.samples[indices[k]].label;
      total += class_weights[label ? 1 : 0] *
               bce_loss(one_hot(label), cache.probs.col(static_cast<Eigen::Index>(k - begin)).cast<double>());
    }
  }
  return total / static_cast<double>(indices.size());
}

std::vector<float> predict_release(const LstmNetwork<float>& net, const WindowedDataset& data,
                                   const std::vector<std::size_t>& indices, int micro_batch) {
  std::vector<float> out;
  out.reserve(indices.size());
  ForwardCache<float> cache;
  for (std::size_t begin = 0; begin < indices.size(); begin += static_cast<std::size_t>(micro_batch)) {
    const std::size_t end = std::min(indices.size(), begin + static_cast<std::size_t>(micro_batch));
    forward_batch(net, pack_batch<float>(data, indices, begin, end), data.window, static_cast<int>(end - begin),
                  cache);
    for (Eigen::Index b = 0; b < cache.probs.cols(); ++b) out.push_back(cache.probs(1, b));
  }
  return out;
}

double accuracy(const LstmNetwork<float>& net, const WindowedDataset& data,
                const std::vector<std::size_t>& indices, double threshold) {
  if (indices.empty()) throw Error("cannot score an empty set");
  const auto p = predict_release(net, data, indices);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < indices.size(); ++k)
    if ((p[k] >= threshold ? 1 : 0) == data.samples[indices[k]].label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

LstmNetwork<float> make_detector_network(const NetworkShape& shape, std::uint64_t seed) {
  auto net = LstmNetwork<float>::initialized(shape, seed);
  for (int c = 0; c < std::min(3, shape.input); ++c) net.input_scale()(c) = 0.1f;
  return net;
}

BalancedSet prepare_training_set(const WindowedDataset& data, const std::vector<std::size_t>& train_indices,
                                 const TrainingConfig& cfg) {
  BalancedSet set = balance_dataset(data, train_indices, cfg.balance, cfg.seed);
  if (cfg.max_samples > 0 && set.indices.size() > cfg.max_samples) {
    std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
    std::shuffle(set.indices.begin(), set.indices.end(), rng);
    set.indices.resize(cfg.max_samples);
    std::sort(set.indices.begin(), set.indices.end());
  }
  return set;
}

TrainingResult train(const LstmNetwork<float>& initial, const WindowedDataset& data,
                     const std::vector<std::size_t>& train_indices, const std::vector<std::size_t>& val_indices,
                     const TrainingConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_indices.empty()) throw Error("training set is empty");
  if (initial.shape().window != data.window)
    throw DimensionError("network window " + std::to_string(initial.shape().window) +
                         " does not match dataset window " + std::to_string(data.window));

  const BalancedSet balanced = prepare_training_set(data, train_indices, cfg);
  std::vector<std::size_t> order = balanced.indices;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  LstmNetwork<float> net = initial;
  VecF& theta = net.parameters();
  const Eigen::Index P = theta.size();
  VecF m = VecF::Zero(P), v = VecF::Zero(P), grad(P);
  long long step = 0;

  TrainingResult result{initial, std::numeric_limits<double>::infinity(), 0, {}};
  int since_best = 0;
  ForwardCache<float> cache;
  MatF targets;
  VecF weights;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const double n = static_cast<double>(end - begin);
      grad.setZero();
      for (std::size_t mb = begin; mb < end; mb += static_cast<std::size_t>(cfg.micro_batch)) {
        const std::size_t mend = std::min(end, mb + static_cast<std::size_t>(cfg.micro_batch));
        forward_batch(net, pack_batch<float>(data, order, mb, mend), data.window, static_cast<int>(mend - mb),
                      cache);
        fill_targets(data, order, mb, mend, balanced.class_weights, targets, weights);
        epoch_loss += backward_batch(net, cache, targets, weights, n, grad);
      }
      ++step;
      const float lr = static_cast<float>(cfg.learning_rate);
      const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
      const float c1 = static_cast<float>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
      const float c2 = static_cast<float>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
      m = b1 * m + (1.0f - b1) * grad;
      v = b2 * v + (1.0f - b2) * grad.cwiseProduct(grad);
      theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + static_cast<float>(cfg.epsilon));
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss) || !theta.allFinite())
      throw Error("training diverged at epoch " + std::to_string(epoch));

    EpochRecord rec{epoch, epoch_loss, std::numeric_limits<double>::quiet_NaN()};
    if (!val_indices.empty()) rec.val_loss = evaluate_loss(net, data, val_indices, {1.0, 1.0}, cfg.micro_batch);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (epoch_loss < result.best_loss) {
      result.best_loss = epoch_loss;
      result.best_epoch = epoch;
      result.best = net;
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace handover::detector
