#pragma once

#include <cstdint>
#include <vector>

#include "ramcnn/model.hpp"
#include "ramcnn/specgen.hpp"

namespace ramcnn {

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 100;
  int batch_size = 32;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  int kfold = 0;  // 0 = plain training
};

struct AdamState {
  Gradients m;  // first moments, same shapes as the parameters
  Gradients v;  // second moments
  std::int64_t t = 0;
};

AdamState init_adam(const ModelParams& params);

// One bias-corrected Adam update, in place.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg);

struct TrainHistory {
  std::vector<double> mean_loss;       // per epoch
  std::vector<double> train_accuracy;  // per epoch, from the train-mode logits
  double test_accuracy = -1.0;         // filled by callers that evaluate
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

struct BatchStats {
  double loss_sum = 0.0;
  int correct = 0;
};

// Mean gradient over the dataset items in `indices`, computed with the
// batched FC-head engine the training loop uses (the FC1/FC2 products run
// once per batch instead of once per sample). Exposed so tests can check it
// against per-sample backward() gradients. `epoch` seeds the per-sample
// dropout streams together with cfg.seed.
BatchStats batch_gradients(const ModelParams& params, const LabeledDataset& dataset,
                           const std::vector<int>& indices, int epoch,
                           const TrainConfig& cfg, Gradients& out);

// Mini-batch training: seeded shuffle per epoch, gradients averaged over the
// batch, Adam updates. Deterministic for a fixed config.
TrainResult train(const ArchConfig& arch, const LabeledDataset& dataset, const TrainConfig& cfg);

// Fraction of spectra whose predicted argmax matches the label argmax.
double evaluate(const ModelParams& params, const LabeledDataset& dataset);

struct KFoldResult {
  std::vector<double> fold_accuracy;
  double pooled_accuracy = 0.0;  // all held-out predictions pooled
  std::vector<TrainHistory> fold_history;

  double mean_accuracy() const;
};

// Seeded stratified k-fold: per-class shuffle then round-robin assignment, so
// every fold preserves class proportions within one sample.
KFoldResult kfold_cv(const ArchConfig& arch, const LabeledDataset& dataset,
                     const TrainConfig& cfg);

// Fold assignment exposed for tests: fold index per dataset item.
std::vector<int> stratified_folds(const LabeledDataset& dataset, int k, std::uint64_t seed);

}  // namespace ramcnn
