#include <doctest.h>

#include <cmath>
#include <fstream>

#include "handover/detector/network.hpp"
#include "handover/detector/training.hpp"
#include "handover/detector/weights_io.hpp"
#include "support.hpp"

using namespace handover;
using namespace handover::detector;
using testing::Gen;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

NetworkShape tiny_shape(int hidden, int window) {
  NetworkShape s;
  s.hidden = hidden;
  s.dense1 = 5;
  s.dense2 = 4;
  s.window = window;
  return s;
}

LstmNetwork<double> random_net(const NetworkShape& shape, Gen& g, double scale) {
  LstmNetwork<double> net(shape);
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i) net.parameters()(i) = g.uniform(-scale, scale);
  net.input_scale() = g.vector(shape.input, 0.5, 1.5);
  return net;
}

ForceWindow random_window(Gen& g, int rows) {
  ForceWindow w(rows, kFeatureCount);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<float>(g.uniform(-2.0, 2.0));
  return w;
}

// Loss recomputed from scratch through forward_batch, for finite differences.
double batch_loss(const LstmNetwork<double>& net, const Eigen::MatrixXd& x, int steps, int batch,
                  const Eigen::MatrixXd& targets, const Eigen::VectorXd& weights, double normalizer) {
  ForwardCache<double> cache;
  forward_batch(net, x, steps, batch, cache);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) loss += weights(b) * bce_loss(targets.col(b), cache.probs.col(b));
  return loss / normalizer;
}

/// Two-class toy windows: class 1 has a late positive step on Fz.
WindowedDataset toy_dataset(int count, int window, std::uint64_t seed) {
  Gen g(seed);
  std::vector<std::vector<ForceSample>> seqs;
  for (int k = 0; k < count; ++k) {
    std::vector<ForceSample> seq(static_cast<std::size_t>(window));
    const int label = k % 2;
    for (int t = 0; t < window; ++t) {
      auto& s = seq[static_cast<std::size_t>(t)];
      s.time = t * 0.002;
      s.wrench[2] = -5.0 + (label && t > window / 2 ? 5.0 : 0.0) + g.uniform(-0.3, 0.3);
      s.label = label;
    }
    seqs.push_back(std::move(seq));
  }
  return window_dataset(seqs, window, 1);
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("shape validation and parameter count") {
  NetworkShape s;
  CHECK_NOTHROW(s.validate());
  const Eigen::Index H = 64, F = 6;
  CHECK(s.parameter_count() == 4 * H * F + 4 * H * H + 4 * H + 512 * H + 512 + 256 * 512 + 256 + 2 * 256 + 2);
  s.hidden = 0;
  CHECK_THROWS(s.validate());
}

TEST_CASE("zero network outputs one half") {
  const LstmNetwork<float> net(NetworkShape{});
  Gen g(1);
  const auto p = lstm_forward(net, random_window(g, 500));
  CHECK(p(0) == 0.5f);
  CHECK(p(1) == 0.5f);
}

TEST_CASE("window shape mismatch is rejected") {
  const LstmNetwork<float> net(NetworkShape{});
  CHECK_THROWS_AS(lstm_forward(net, ForceWindow::Zero(499, 6)), DimensionError);
}

TEST_CASE("single step hidden-size-one network matches a hand-unrolled cell") {
  NetworkShape s;
  s.hidden = 1;
  s.dense1 = 1;
  s.dense2 = 1;
  s.window = 1;
  LstmNetwork<double> net(s);
  const auto& L = net.layout();
  // Gate rows: input, forget, cell, output.
  const double wi[6] = {0.1, -0.2, 0.3, 0.05, 0.0, -0.1}, wf[6] = {0.2, 0.1, -0.1, 0.0, 0.3, 0.0},
               wg[6] = {-0.3, 0.2, 0.4, 0.1, -0.2, 0.2}, wo[6] = {0.05, 0.05, -0.2, 0.3, 0.1, 0.0};
  for (int c = 0; c < 6; ++c) {
    net.tensor(L.wx)(0, c) = wi[c];
    net.tensor(L.wx)(1, c) = wf[c];
    net.tensor(L.wx)(2, c) = wg[c];
    net.tensor(L.wx)(3, c) = wo[c];
  }
  const double bi = 0.1, bf = 1.0, bg = -0.2, bo = 0.3;
  net.tensor(L.b)(0, 0) = bi;
  net.tensor(L.b)(1, 0) = bf;
  net.tensor(L.b)(2, 0) = bg;
  net.tensor(L.b)(3, 0) = bo;
  net.tensor(L.wh).setConstant(0.7);  // unused on the first step
  net.tensor(L.w1)(0, 0) = 1.5;
  net.tensor(L.b1)(0, 0) = 0.1;
  net.tensor(L.w2)(0, 0) = -0.8;
  net.tensor(L.b2)(0, 0) = 0.9;
  net.tensor(L.w3)(0, 0) = 2.0;
  net.tensor(L.w3)(1, 0) = -1.0;
  net.tensor(L.b3)(0, 0) = -0.5;
  net.tensor(L.b3)(1, 0) = 0.25;

  ForceWindow x(1, 6);
  x << 0.5f, -1.0f, 2.0f, 0.25f, -0.5f, 1.0f;
  double zi = bi, zf = bf, zg = bg, zo = bo;
  for (int c = 0; c < 6; ++c) {
    zi += wi[c] * x(0, c);
    zf += wf[c] * x(0, c);
    zg += wg[c] * x(0, c);
    zo += wo[c] * x(0, c);
  }
  const double cell = sig(zf) * 0.0 + sig(zi) * std::tanh(zg);
  const double h = sig(zo) * std::tanh(cell);
  const double a1 = std::max(0.0, 1.5 * h + 0.1);
  const double a2 = std::max(0.0, -0.8 * a1 + 0.9);
  const Eigen::Vector2d expected(sig(2.0 * a2 - 0.5), sig(-1.0 * a2 + 0.25));
  CHECK((lstm_forward(net, x) - expected).norm() < 1e-12);
}

TEST_CASE("property: outputs stay inside (0, 1) and depend only on the window") {
  Gen g(2);
  const auto net = LstmNetwork<float>::initialized(tiny_shape(8, 40), 7);
  for (int k = 0; k < 50; ++k) {
    const ForceWindow w = random_window(g, 40) * 20.0f;
    const auto p = lstm_forward(net, w);
    CHECK(p.minCoeff() > 0.0f);
    CHECK(p.maxCoeff() < 1.0f);
    CHECK(lstm_forward(net, w) == p);
  }
}

TEST_CASE("batched forward agrees with single-window inference") {
  Gen g(3);
  const auto net = LstmNetwork<float>::initialized(tiny_shape(6, 30), 11);
  const WindowedDataset data = toy_dataset(7, 30, 4);
  const auto idx = iota(data.samples.size());
  ForwardCache<float> cache;
  forward_batch(net, pack_batch<float>(data, idx, 0, idx.size()), 30, static_cast<int>(idx.size()), cache);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto single = lstm_forward(net, data.materialize(b));
    CHECK((cache.probs.col(static_cast<Eigen::Index>(b)) - single).cwiseAbs().maxCoeff() < 1e-6f);
  }
}

TEST_CASE("binary cross-entropy") {
  const Eigen::Vector2d y(1, 0);
  CHECK(bce_loss(y, Eigen::Vector2d(1 - 1e-9, 1e-9)) < 1e-6);
  CHECK(bce_loss(y, Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
  CHECK(std::isfinite(bce_loss(y, Eigen::Vector2d(0.0, 1.0))));
  CHECK(bce_loss(y, Eigen::Vector2d(0.0, 1.0)) == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));
  Gen g(4);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector2d p(g.uniform(0.01, 0.99), g.uniform(0.01, 0.99));
    const Eigen::Vector2d t = one_hot(g.integer(0, 1));
    CHECK(bce_loss(t, p) == doctest::Approx(bce_loss(Eigen::Vector2d::Ones() - t, Eigen::Vector2d::Ones() - p)));
    CHECK(bce_loss(t, p) >= 0.0);
  }
  CHECK(one_hot(0) == Eigen::Vector2d(1, 0));
  CHECK(one_hot(1) == Eigen::Vector2d(0, 1));
}

TEST_CASE("gradient check on a three-step, two-unit network") {
  Gen g(42);
  const NetworkShape shape = tiny_shape(2, 3);
  LstmNetwork<double> net = random_net(shape, g, 0.8);
  const int steps = 3, batch = 4;
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(6, steps * batch, [&] { return g.uniform(-1.5, 1.5); });
  Eigen::MatrixXd targets(2, batch);
  for (int b = 0; b < batch; ++b) targets.col(b) = one_hot(b % 2);
  const Eigen::VectorXd weights = g.vector(batch, 0.5, 2.0);
  const double normalizer = 3.0;

  ForwardCache<double> cache;
  forward_batch(net, x, steps, batch, cache);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.parameters().size());
  const double loss_sum = backward_batch(net, cache, targets, weights, normalizer, grad);
  CHECK(loss_sum / normalizer == doctest::Approx(batch_loss(net, x, steps, batch, targets, weights, normalizer)));

  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < net.parameters().size(); ++i) {
    const double saved = net.parameters()(i);
    net.parameters()(i) = saved + h;
    const double up = batch_loss(net, x, steps, batch, targets, weights, normalizer);
    net.parameters()(i) = saved - h;
    const double down = batch_loss(net, x, steps, batch, targets, weights, normalizer);
    net.parameters()(i) = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(numeric - grad(i)) / std::max({std::abs(numeric), std::abs(grad(i)), 1e-6});
    worst = std::max(worst, rel);
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("backward accumulates into an existing gradient") {
  Gen g(5);
  const LstmNetwork<double> net = random_net(tiny_shape(3, 4), g, 0.5);
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(6, 8, [&] { return g.uniform(-1, 1); });
  Eigen::MatrixXd targets(2, 2);
  targets << 1, 0, 0, 1;
  ForwardCache<double> cache;
  forward_batch(net, x, 4, 2, cache);
  const Eigen::VectorXd ones2 = Eigen::VectorXd::Ones(2), ones3 = Eigen::VectorXd::Ones(3);
  Eigen::VectorXd once = Eigen::VectorXd::Zero(net.parameters().size()), twice = once;
  backward_batch(net, cache, targets, ones2, 1.0, once);
  backward_batch(net, cache, targets, ones2, 1.0, twice);
  backward_batch(net, cache, targets, ones2, 1.0, twice);
  CHECK((twice - 2.0 * once).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(backward_batch(net, cache, targets, ones3, 1.0, once), DimensionError);
}

TEST_CASE("initialisation is seeded") {
  const auto a = LstmNetwork<float>::initialized(tiny_shape(4, 10), 9);
  const auto b = LstmNetwork<float>::initialized(tiny_shape(4, 10), 9);
  const auto c = LstmNetwork<float>::initialized(tiny_shape(4, 10), 10);
  CHECK(a.parameters() == b.parameters());
  CHECK(a.parameters() != c.parameters());
  // Forget-gate bias starts at one.
  CHECK(a.tensor(a.layout().b).block(4, 0, 4, 1).isOnes());
}

TEST_CASE("training reduces the loss on a toy set") {
  const WindowedDataset data = toy_dataset(20, 12, 8);
  const auto idx = iota(data.samples.size());
  TrainingConfig cfg;
  cfg.window = 12;
  cfg.batch_size = 10;
  cfg.max_epochs = 200;
  cfg.patience = 200;
  cfg.learning_rate = 1e-2;
  const auto init = make_detector_network(tiny_shape(8, 12), 3);
  const double initial = evaluate_loss(init, data, idx);
  const TrainingResult r = train(init, data, idx, {}, cfg);
  CHECK(r.best_loss < initial);
  CHECK(evaluate_loss(r.best, data, idx) < 0.5 * initial);
  CHECK(accuracy(r.best, data, idx) == 1.0);
  CHECK(std::isnan(r.history.front().val_loss));
}

TEST_CASE("patience zero stops at the first epoch that fails to improve") {
  const WindowedDataset data = toy_dataset(20, 12, 8);
  const auto idx = iota(data.samples.size());
  TrainingConfig cfg;
  cfg.window = 12;
  cfg.batch_size = 4;
  cfg.max_epochs = 500;
  cfg.patience = 0;
  cfg.learning_rate = 0.05;
  const TrainingResult r = train(make_detector_network(tiny_shape(8, 12), 3), data, idx, idx, cfg);
  REQUIRE(static_cast<int>(r.history.size()) < cfg.max_epochs);
  CHECK(static_cast<int>(r.history.size()) == r.best_epoch + 1);
  for (std::size_t e = 1; e + 1 < r.history.size(); ++e)
    CHECK(r.history[e].train_loss < r.history[e - 1].train_loss);
  CHECK(r.history.back().train_loss >= r.best_loss);
  CHECK(std::isfinite(r.history.back().val_loss));
}

TEST_CASE("training is reproducible and reports divergence") {
  const WindowedDataset data = toy_dataset(10, 12, 8);
  const auto idx = iota(data.samples.size());
  TrainingConfig cfg;
  cfg.window = 12;
  cfg.batch_size = 4;
  cfg.max_epochs = 5;
  const auto init = make_detector_network(tiny_shape(4, 12), 3);
  const auto a = train(init, data, idx, {}, cfg);
  const auto b = train(init, data, idx, {}, cfg);
  CHECK(a.best.parameters() == b.best.parameters());
  CHECK(a.history.size() == b.history.size());

  auto broken = init;
  broken.parameters()(0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_WITH(train(broken, data, idx, {}, cfg), doctest::Contains("diverged at epoch 1"));

  TrainingConfig bad = cfg;
  bad.stride = 0;
  CHECK_THROWS(train(init, data, idx, {}, bad));
  CHECK_THROWS(train(init, data, {}, {}, cfg));
  CHECK_THROWS_AS(train(make_detector_network(tiny_shape(4, 13), 3), data, idx, {}, cfg), DimensionError);
}

TEST_CASE("epoch sample cap is seeded and balanced first") {
  const WindowedDataset data = toy_dataset(40, 12, 8);
  TrainingConfig cfg;
  cfg.max_samples = 10;
  const auto a = prepare_training_set(data, iota(data.samples.size()), cfg);
  const auto b = prepare_training_set(data, iota(data.samples.size()), cfg);
  CHECK(a.indices.size() == 10);
  CHECK(a.indices == b.indices);
}

TEST_CASE("weight file round trip") {
  testing::TempDir dir("weights");
  const auto net = make_detector_network(tiny_shape(5, 20), 4);
  save_weights(dir / "w.json", net);
  const auto back = load_weights(dir / "w.json");
  CHECK(back.shape() == net.shape());
  CHECK(back.parameters() == net.parameters());
  CHECK(back.input_scale() == net.input_scale());
}

TEST_CASE("corrupt weight files are rejected with the offending shape") {
  testing::TempDir dir("weights_bad");
  const auto net = make_detector_network(tiny_shape(5, 20), 4);
  save_weights(dir / "w.json", net);
  std::ifstream in(dir / "w.json");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  const std::string needle = "\"w1\"";
  auto at = text.find(needle);
  REQUIRE(at != std::string::npos);
  at = text.find("\"shape\"", at);
  const auto open = text.find('[', at), close = text.find(']', at);
  text.replace(open, close - open + 1, "[5,4]");
  std::ofstream(dir / "bad.json") << text;
  CHECK_THROWS_WITH(load_weights(dir / "bad.json"), doctest::Contains("w1"));
  CHECK_THROWS_WITH(load_weights(dir / "bad.json"), doctest::Contains("5x4"));
  CHECK_THROWS(load_weights(dir / "missing.json"));
  std::ofstream(dir / "junk.json") << "{\"format\": \"other\"}";
  CHECK_THROWS(load_weights(dir / "junk.json"));
}
