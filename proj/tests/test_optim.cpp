#include "ramcnn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ramcnn/errors.hpp"
#include "testutil.hpp"

using namespace ramcnn;

namespace {

ArchConfig tiny_arch(int input_length = 32, int n_classes = 2) {
  ArchConfig arch;
  arch.input_length = input_length;
  arch.conv_blocks = {{2, 3}, {2, 3}};
  arch.fc1_width = 4;
  arch.n_classes = n_classes;
  return arch;
}

LabeledDataset tiny_peak_dataset(int per_class, double noise, std::uint64_t seed) {
  Rng rng(seed);
  return gen_peak_dataset({8, 24}, per_class, 32, 3.0, noise, rng);
}

}  // namespace

TEST_CASE("adam_step: zero gradient leaves parameters unchanged") {
  const ArchConfig arch = tiny_arch();
  ModelParams p = init_model(arch, 1);
  const ModelParams before = p;
  AdamState state = init_adam(p);
  const Gradients zero = zeros_like(p);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step(p, zero, state, cfg);
  CHECK(p.fc1.weights == before.fc1.weights);
  CHECK(p.conv[0].weights == before.conv[0].weights);
  CHECK(state.t == 1);
}

TEST_CASE("adam_step: first step with constant gradient moves by about lr") {
  // Hand evaluation at t=1: m_hat = g, v_hat = g^2, step = lr*g/(|g|+eps).
  const ArchConfig arch = tiny_arch();
  ModelParams p = init_model(arch, 2);
  const ModelParams before = p;
  AdamState state = init_adam(p);
  Gradients g = zeros_like(p);
  for_each_tensor({&g}, [](std::vector<std::vector<double>*>& t) {
    std::fill(t[0]->begin(), t[0]->end(), 0.5);
  });
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step(p, g, state, cfg);
  const double expected_step = 0.1 * 0.5 / (0.5 + 1e-8);
  for (std::size_t i = 0; i < p.fc1.weights.size(); ++i)
    CHECK(p.fc1.weights[i] - before.fc1.weights[i] ==
          doctest::Approx(-expected_step).epsilon(1e-12));
}

TEST_CASE("adam_step with lr=0 is the identity on parameters") {
  const ArchConfig arch = tiny_arch();
  ModelParams p = init_model(arch, 3);
  const ModelParams before = p;
  AdamState state = init_adam(p);
  Gradients g = zeros_like(p);
  for_each_tensor({&g}, [](std::vector<std::vector<double>*>& t) {
    std::fill(t[0]->begin(), t[0]->end(), 1.0);
  });
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  adam_step(p, g, state, cfg);
  for_each_tensor({&p, const_cast<ModelParams*>(&before)},
                  [](std::vector<std::vector<double>*>& t) {
                    CHECK(*t[0] == *t[1]);
                  });
}

TEST_CASE("batch_gradients equals the averaged per-sample backward gradients") {
  ArchConfig arch = tiny_arch();
  arch.dropout_keep = 0.5;
  const ModelParams p = init_model(arch, 55);
  const LabeledDataset ds = tiny_peak_dataset(3, 0.02, 56);  // 6 samples
  TrainConfig cfg;
  cfg.seed = 57;
  const std::vector<int> indices = {0, 3, 1, 5};
  const int epoch = 2;

  Gradients batched = zeros_like(p);
  const BatchStats stats = batch_gradients(p, ds, indices, epoch, cfg, batched);

  Gradients reference = zeros_like(p);
  double loss_sum = 0.0;
  for (const int idx : indices) {
    Rng rng(mix_seed(cfg.seed, epoch + 11, static_cast<std::uint64_t>(idx) + 17));
    const auto fwd = forward(p, ds.spectra[idx].intensity, Mode::train, rng);
    const auto sm = softmax_cross_entropy(fwd.logits, ds.labels[idx]);
    loss_sum += sm.loss;
    Gradients g = backward(p, fwd.cache, sm.grad_logits);
    for_each_tensor({&reference, &g}, [](std::vector<std::vector<double>*>& t) {
      for (std::size_t i = 0; i < t[0]->size(); ++i) (*t[0])[i] += (*t[1])[i];
    });
  }
  Gradients* ref = &reference;
  for_each_tensor({ref}, [&](std::vector<std::vector<double>*>& t) {
    for (auto& v : *t[0]) v /= indices.size();
  });

  CHECK(stats.loss_sum == doctest::Approx(loss_sum).epsilon(1e-12));
  for_each_tensor({&batched, ref}, [&](std::vector<std::vector<double>*>& t) {
    for (std::size_t i = 0; i < t[0]->size(); ++i)
      CHECK(testutil::rel_err((*t[0])[i], (*t[1])[i], 1e-9) < 1e-9);
  });
}

TEST_CASE("train validates its inputs") {
  const ArchConfig arch = tiny_arch();
  const LabeledDataset ds = tiny_peak_dataset(3, 0.02, 5);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(arch, ds, cfg), DataError);
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train(arch, ds, cfg), DataError);

  TrainConfig ok;
  ok.epochs = 1;
  LabeledDataset empty;
  empty.n_classes = 2;
  CHECK_THROWS_AS(train(arch, empty, ok), DataError);

  const ArchConfig wrong = tiny_arch(32, 3);
  CHECK_THROWS_AS(train(wrong, ds, ok), DimensionError);
}

TEST_CASE("train memorizes a single sample") {
  const ArchConfig arch = tiny_arch();
  LabeledDataset one;
  one.n_classes = 2;
  Rng rng(6);
  one.spectra.push_back(lorentzian({8.0, 3.0, 1.0}, 32));
  one.labels.push_back(onehot(0, 2));
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 200;
  cfg.batch_size = 1;
  cfg.seed = 7;
  const TrainResult r = train(arch, one, cfg);
  CHECK(r.history.mean_loss.size() == 200);
  CHECK(r.history.train_accuracy.size() == 200);
  CHECK(r.history.mean_loss.back() < 0.01);
}

TEST_CASE("train is bitwise deterministic for a fixed seed") {
  const ArchConfig arch = tiny_arch();
  const LabeledDataset ds = tiny_peak_dataset(6, 0.02, 8);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 10;
  cfg.batch_size = 4;
  cfg.seed = 123;
  const TrainResult a = train(arch, ds, cfg);
  const TrainResult b = train(arch, ds, cfg);
  CHECK(a.history.mean_loss == b.history.mean_loss);
  CHECK(a.history.train_accuracy == b.history.train_accuracy);
  CHECK(a.params.fc1.weights == b.params.fc1.weights);
  CHECK(a.params.conv[1].weights == b.params.conv[1].weights);

  TrainConfig other = cfg;
  other.seed = 124;
  const TrainResult c = train(arch, ds, other);
  CHECK(a.history.mean_loss != c.history.mean_loss);
}

TEST_CASE("train on the small two-peak task halves its loss") {
  const ArchConfig arch = tiny_arch();
  const LabeledDataset ds = tiny_peak_dataset(8, 0.025, 9);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  cfg.seed = 10;
  const TrainResult r = train(arch, ds, cfg);
  CHECK(r.history.mean_loss.back() < 0.5 * r.history.mean_loss.front());
}

TEST_CASE("train aborts with a numeric error when the loss diverges") {
  const ArchConfig arch = tiny_arch();
  const LabeledDataset ds = tiny_peak_dataset(4, 0.02, 11);
  TrainConfig cfg;
  cfg.learning_rate = 1e100;  // parameters overflow on the first update
  cfg.epochs = 5;
  cfg.batch_size = 4;
  CHECK_THROWS_AS(train(arch, ds, cfg), NumericError);
}

TEST_CASE("evaluate: perfect on the model's own predictions, rejects empty") {
  const ArchConfig arch = tiny_arch();
  const ModelParams p = init_model(arch, 12);
  LabeledDataset ds = tiny_peak_dataset(4, 0.02, 13);
  for (std::size_t i = 0; i < ds.spectra.size(); ++i)
    ds.labels[i] = onehot(predict(p, ds.spectra[i].intensity).label, 2);
  CHECK(evaluate(p, ds) == 1.0);

  LabeledDataset empty;
  CHECK_THROWS_AS(evaluate(p, empty), DataError);
}

TEST_CASE("stratified_folds partition the dataset and preserve class balance") {
  const LabeledDataset ds = tiny_peak_dataset(10, 0.02, 14);  // 20 samples, 2 classes
  const std::vector<int> fold = stratified_folds(ds, 5, 42);
  REQUIRE(fold.size() == 20);
  std::vector<std::vector<int>> count(5, std::vector<int>(2, 0));
  for (std::size_t i = 0; i < fold.size(); ++i) {
    REQUIRE(fold[i] >= 0);
    REQUIRE(fold[i] < 5);
    count[fold[i]][label_index(ds.labels[i])] += 1;
  }
  for (int f = 0; f < 5; ++f)
    for (int c = 0; c < 2; ++c) CHECK(count[f][c] == 2);  // 10 per class over 5 folds

  CHECK(stratified_folds(ds, 5, 42) == fold);  // same seed, same folds
  CHECK(stratified_folds(ds, 5, 43) != fold);

  CHECK_THROWS_AS(stratified_folds(ds, 11, 1), DataError);  // class smaller than k
}

TEST_CASE("kfold_cv returns one accuracy per fold") {
  const ArchConfig arch = tiny_arch();
  const LabeledDataset ds = tiny_peak_dataset(10, 0.025, 15);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 15;
  cfg.batch_size = 8;
  cfg.seed = 16;
  cfg.kfold = 4;
  const KFoldResult r = kfold_cv(arch, ds, cfg);
  CHECK(r.fold_accuracy.size() == 4);
  for (double a : r.fold_accuracy) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
  CHECK(r.mean_accuracy() == doctest::Approx(std::accumulate(r.fold_accuracy.begin(),
                                                             r.fold_accuracy.end(), 0.0) /
                                             4.0));
}
