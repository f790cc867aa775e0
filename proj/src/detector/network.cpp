#include "handover/detector/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "handover/error.hpp"

namespace handover::detector {

void NetworkShape::validate() const {
  if (input < 1 || hidden < 1 || dense1 < 1 || dense2 < 1 || output < 1 || window < 1)
    throw Error("network sizes must be positive");
}

Eigen::Index NetworkShape::parameter_count() const { return ParameterLayout(*this).total; }

ParameterLayout::ParameterLayout(const NetworkShape& s) {
  Eigen::Index at = 0;
  auto slot = [&at](Eigen::Index rows, Eigen::Index cols) {
    Slot out{at, rows, cols};
    at += rows * cols;
    return out;
  };
  const Eigen::Index g = 4 * static_cast<Eigen::Index>(s.hidden);
  wx = slot(g, s.input);
  wh = slot(g, s.hidden);
  b = slot(g, 1);
  w1 = slot(s.dense1, s.hidden);
  b1 = slot(s.dense1, 1);
  w2 = slot(s.dense2, s.dense1);
  b2 = slot(s.dense2, 1);
  w3 = slot(s.output, s.dense2);
  b3 = slot(s.output, 1);
  total = at;
}

template <typename S>
LstmNetwork<S>::LstmNetwork(const NetworkShape& shape) : shape_(shape), layout_(shape) {
  shape_.validate();
  params_ = Vec::Zero(layout_.total);
  input_scale_ = Vec::Ones(shape_.input);
}

template <typename S>
LstmNetwork<S> LstmNetwork<S>::initialized(const NetworkShape& shape, std::uint64_t seed) {
  LstmNetwork net(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&](const ParameterLayout::Slot& s, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    auto m = net.tensor(s);
    // Fill column-major so the draw order is independent of Eigen internals.
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<S>(dist(rng));
  };
  const auto& L = net.layout_;
  const double h = shape.hidden;
  fill(L.wx, std::sqrt(6.0 / (shape.input + h)));
  fill(L.wh, std::sqrt(6.0 / (2.0 * h)));
  fill(L.w1, std::sqrt(6.0 / h));
  fill(L.w2, std::sqrt(6.0 / shape.dense1));
  fill(L.w3, std::sqrt(6.0 / (shape.dense2 + shape.output)));
  net.tensor(L.b).middleRows(shape.hidden, shape.hidden).setOnes();
  return net;
}

namespace {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return S(0.5) * (S(0.5) * x).tanh() + S(0.5);
}

// Gate update for one timestep on an H x B block. `z` holds pre-activations
// on entry and activations on exit; c_prev and c are H x B.
template <typename S, typename Z, typename CP, typename C, typename Hd>
void lstm_cell(int H, Z&& z, const CP& c_prev, C&& c, Hd&& h) {
  z.topRows(2 * H) = sigmoid(z.topRows(2 * H).array()).matrix();
  z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
  z.bottomRows(H) = sigmoid(z.bottomRows(H).array()).matrix();
  c = (z.middleRows(H, H).array() * c_prev.array() +
       z.topRows(H).array() * z.middleRows(2 * H, H).array())
          .matrix();
  h = (z.bottomRows(H).array() * c.array().tanh()).matrix();
}

}  // namespace

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> pack_batch(const WindowedDataset& data,
                                                            const std::vector<std::size_t>& indices,
                                                            std::size_t begin, std::size_t end) {
  const int T = data.window;
  const auto B = static_cast<Eigen::Index>(end - begin);
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> x(kFeatureCount, T * B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const WindowRef& ref = data.samples.at(indices.at(begin + static_cast<std::size_t>(b)));
    const SequenceMatrix& seq = data.sequences[ref.sequence];
    const Eigen::Index first = static_cast<Eigen::Index>(ref.end) - T;
    for (int t = 0; t < T; ++t) x.col(t * B + b) = seq.row(first + t).transpose().template cast<S>();
  }
  return x;
}

template <typename S>
void forward_batch(const LstmNetwork<S>& net, const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& raw_x,
                   int steps, int batch, ForwardCache<S>& cache) {
  const NetworkShape& sh = net.shape();
  const auto& L = net.layout();
  const int H = sh.hidden;
  const Eigen::Index TB = static_cast<Eigen::Index>(steps) * batch;
  if (raw_x.rows() != sh.input || raw_x.cols() != TB)
    throw DimensionError("batch input has shape " + std::to_string(raw_x.rows()) + "x" +
                         std::to_string(raw_x.cols()) + ", expected " + std::to_string(sh.input) + "x" +
                         std::to_string(TB));
  cache.steps = steps;
  cache.batch = batch;
  cache.x = net.input_scale().asDiagonal() * raw_x;
  cache.gates.noalias() = net.tensor(L.wx) * cache.x;
  cache.gates.colwise() += net.tensor(L.b).col(0);
  cache.cell.resize(H, TB);
  cache.hidden.resize(H, TB);

  const auto Wh = net.tensor(L.wh);
  using Mat = typename ForwardCache<S>::Mat;
  const Mat zero = Mat::Zero(H, batch);
  for (int t = 0; t < steps; ++t) {
    auto z = cache.gates.middleCols(static_cast<Eigen::Index>(t) * batch, batch);
    if (t > 0) z.noalias() += Wh * cache.hidden.middleCols(static_cast<Eigen::Index>(t - 1) * batch, batch);
    if (t > 0)
      lstm_cell<S>(H, z, cache.cell.middleCols(static_cast<Eigen::Index>(t - 1) * batch, batch),
                   cache.cell.middleCols(static_cast<Eigen::Index>(t) * batch, batch),
                   cache.hidden.middleCols(static_cast<Eigen::Index>(t) * batch, batch));
    else
      lstm_cell<S>(H, z, zero, cache.cell.leftCols(batch), cache.hidden.leftCols(batch));
  }

  const auto h_last = cache.hidden.rightCols(batch);
  cache.a1.noalias() = net.tensor(L.w1) * h_last;
  cache.a1.colwise() += net.tensor(L.b1).col(0);
  cache.a1 = cache.a1.cwiseMax(S(0));
  cache.a2.noalias() = net.tensor(L.w2) * cache.a1;
  cache.a2.colwise() += net.tensor(L.b2).col(0);
  cache.a2 = cache.a2.cwiseMax(S(0));
  cache.probs.noalias() = net.tensor(L.w3) * cache.a2;
  cache.probs.colwise() += net.tensor(L.b3).col(0);
  cache.probs = sigmoid(cache.probs.array()).matrix();
}

template <typename S>
double backward_batch(const LstmNetwork<S>& net, const ForwardCache<S>& cache,
                      const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& targets,
                      const Eigen::Matrix<S, Eigen::Dynamic, 1>& weights, double normalizer,
                      Eigen::Matrix<S, Eigen::Dynamic, 1>& grad) {
  using Mat = typename ForwardCache<S>::Mat;
  const NetworkShape& sh = net.shape();
  const ParameterLayout& L = net.layout();
  const int H = sh.hidden;
  const int B = cache.batch;
  const int T = cache.steps;
  if (targets.rows() != sh.output || targets.cols() != B || weights.size() != B)
    throw DimensionError("targets/weights do not match the cached batch");
  if (grad.size() != L.total) grad = Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(L.total);
  auto G = [&grad](const ParameterLayout::Slot& s) {
    return Eigen::Map<Mat>(grad.data() + s.offset, s.rows, s.cols);
  };

  double loss = 0.0;
  for (int b = 0; b < B; ++b)
    loss += static_cast<double>(weights(b)) *
            bce_loss(targets.col(b).template cast<double>(), cache.probs.col(b).template cast<double>());

  // d(mean-over-outputs BCE)/d(logit) = (p - y) / outputs.
  const S scale = static_cast<S>(1.0 / (normalizer * sh.output));
  Mat d_logit = ((cache.probs - targets) * weights.asDiagonal()) * scale;

  G(L.w3).noalias() += d_logit * cache.a2.transpose();
  G(L.b3).col(0) += d_logit.rowwise().sum();
  Mat d2 = net.tensor(L.w3).transpose() * d_logit;
  d2 = (cache.a2.array() > S(0)).select(d2, S(0));
  G(L.w2).noalias() += d2 * cache.a1.transpose();
  G(L.b2).col(0) += d2.rowwise().sum();
  Mat d1 = net.tensor(L.w2).transpose() * d2;
  d1 = (cache.a1.array() > S(0)).select(d1, S(0));
  const auto h_last = cache.hidden.rightCols(B);
  G(L.w1).noalias() += d1 * h_last.transpose();
  G(L.b1).col(0) += d1.rowwise().sum();

  Mat dh = net.tensor(L.w1).transpose() * d1;
  Mat dc = Mat::Zero(H, B);
  Mat dz(4 * H, static_cast<Eigen::Index>(T) * B);
  const auto Wh = net.tensor(L.wh);
  for (int t = T - 1; t >= 0; --t) {
    const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
    const auto gates = cache.gates.middleCols(col, B);
    const auto i = gates.topRows(H).array();
    const auto f = gates.middleRows(H, H).array();
    const auto g = gates.middleRows(2 * H, H).array();
    const auto o = gates.bottomRows(H).array();
    const Mat tc = cache.cell.middleCols(col, B).array().tanh().matrix();
    auto z = dz.middleCols(col, B);
    z.bottomRows(H) = (dh.array() * tc.array() * o * (S(1) - o)).matrix();
    dc.array() += dh.array() * o * (S(1) - tc.array().square());
    z.topRows(H) = (dc.array() * g * i * (S(1) - i)).matrix();
    z.middleRows(2 * H, H) = (dc.array() * i * (S(1) - g.square())).matrix();
    if (t > 0)
      z.middleRows(H, H) = (dc.array() * cache.cell.middleCols(col - B, B).array() * f * (S(1) - f)).matrix();
    else
      z.middleRows(H, H).setZero();
    dc.array() *= f;
    if (t > 0) dh.noalias() = Wh.transpose() * z;
  }

  G(L.wx).noalias() += dz * cache.x.transpose();
  G(L.b).col(0) += dz.rowwise().sum();
  if (T > 1) {
    const Eigen::Index n = static_cast<Eigen::Index>(T - 1) * B;
    G(L.wh).noalias() += dz.rightCols(n) * cache.hidden.leftCols(n).transpose();
  }
  return loss;
}

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, 1> lstm_forward(const LstmNetwork<S>& net,
                                                 const Eigen::Ref<const ForceWindow>& window) {
  const NetworkShape& sh = net.shape();
  if (window.rows() != sh.window || window.cols() != sh.input)
    throw DimensionError("window has shape " + std::to_string(window.rows()) + "x" +
                         std::to_string(window.cols()) + ", network expects " + std::to_string(sh.window) +
                         "x" + std::to_string(sh.input));
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  const auto& L = net.layout();
  const int H = sh.hidden;
  const Mat x = net.input_scale().asDiagonal() * window.transpose().template cast<S>();
  Mat zx = net.tensor(L.wx) * x;
  zx.colwise() += net.tensor(L.b).col(0);
  const auto Wh = net.tensor(L.wh);
  Vec h = Vec::Zero(H), c = Vec::Zero(H), z(4 * H);
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    z.noalias() = zx.col(t);
    z.noalias() += Wh * h;
    lstm_cell<S>(H, z, Vec(c), c, h);
  }
  Vec a1 = (net.tensor(L.w1) * h + net.tensor(L.b1).col(0)).cwiseMax(S(0));
  Vec a2 = (net.tensor(L.w2) * a1 + net.tensor(L.b2).col(0)).cwiseMax(S(0));
  Vec logits = net.tensor(L.w3) * a2 + net.tensor(L.b3).col(0);
  return sigmoid(logits.array()).matrix();
}

double bce_loss(const Eigen::Ref<const Eigen::VectorXd>& target, const Eigen::Ref<const Eigen::VectorXd>& predicted) {
  if (target.size() != predicted.size() || target.size() == 0)
    throw DimensionError("bce_loss needs equally sized non-empty vectors");
  constexpr double eps = 1e-7;
  double sum = 0.0;
  for (Eigen::Index k = 0; k < target.size(); ++k) {
    const double p = std::clamp(predicted(k), eps, 1.0 - eps);
    sum -= target(k) * std::log(p) + (1.0 - target(k)) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(target.size());
}

Eigen::Vector2d one_hot(int label) { return label ? Eigen::Vector2d(0.0, 1.0) : Eigen::Vector2d(1.0, 0.0); }

template class LstmNetwork<float>;
template class LstmNetwork<double>;

#define HANDOVER_INSTANTIATE(S)                                                                              \
  template Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> pack_batch<S>(                                  \
      const WindowedDataset&, const std::vector<std::size_t>&, std::size_t, std::size_t);                   \
  template void forward_batch<S>(const LstmNetwork<S>&, const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>&, \
                                 int, int, ForwardCache<S>&);                                               \
  template double backward_batch<S>(const LstmNetwork<S>&, const ForwardCache<S>&,                          \
                                    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>&,                \
                                    const Eigen::Matrix<S, Eigen::Dynamic, 1>&, double,                     \
                                    Eigen::Matrix<S, Eigen::Dynamic, 1>&);                                  \
  template Eigen::Matrix<S, Eigen::Dynamic, 1> lstm_forward<S>(const LstmNetwork<S>&,                       \
                                                              const Eigen::Ref<const ForceWindow>&);

HANDOVER_INSTANTIATE(float)
HANDOVER_INSTANTIATE(double)

#undef HANDOVER_INSTANTIATE

}  // namespace handover::detector
