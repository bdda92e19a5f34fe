#include "ramcnn/optim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ramcnn/errors.hpp"

namespace ramcnn {

AdamState init_adam(const ModelParams& params) {
  return AdamState{zeros_like(params), zeros_like(params), 0};
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0)) throw DataError("adam: learning rate must be >= 0");
  state.t += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const double lr = cfg.learning_rate, eps = cfg.adam_eps;

  // Read-only access to the gradient tensors through the shared visitor.
  Gradients& g = const_cast<Gradients&>(grads);
  for_each_tensor({&params, &g, &state.m, &state.v},
                  [&](std::vector<std::vector<double>*>& t) {
                    auto& theta = *t[0];
                    const auto& grad = *t[1];
                    auto& m = *t[2];
                    auto& v = *t[3];
                    if (theta.size() != grad.size())
                      throw DimensionError("adam: gradient shape does not match parameters");
                    for (std::size_t i = 0; i < theta.size(); ++i) {
                      m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                      v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                      const double mhat = m[i] / corr1;
                      const double vhat = v[i] / corr2;
                      theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
                    }
                  });
}

// ---------------------------------------------------------------------------
// Batched training engine.
//
// The per-sample ndcore ops stay the reference implementation (tests compare
// against them); training runs each conv layer across a chunk of samples as
// one im2col GEMM, and the FC head across the chunk as three GEMMs. All GEMM
// operands live in Eigen-owned scratch, which Eigen aligns identically on
// every allocation, so training is bitwise reproducible run to run.
// ---------------------------------------------------------------------------

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Cap on one layer's im2col buffer; chunks shrink when a layer would exceed it.
constexpr std::size_t kColumnsBudgetBytes = 128ull << 20;

struct LayerScratch {
  MatRM w;         // KO x (K*S)
  MatRM wt;        // (K*S) x KO, transposed copy: plain products beat A^T views
  MatRM padded;    // K x (chunk * (L + S - 1)), per-sample blocks
  MatRM columns;   // (K*S) x (chunk * L)
  MatRM act;       // KO x (chunk * L), after bias + leaky ReLU
  MatRM pooled;    // KO x (chunk * Lp)
  std::vector<int> argmax;  // KO * chunk * Lp, positions within each sample
  MatRM grad_act;  // KO x (chunk * L)
  MatRM grad_col;  // (K*S) x (chunk * L)
  MatRM grad_pad;  // K x (chunk * (L + S - 1))
  MatRM grad_w;    // KO x (K*S)
  MatRM grad_pooled;  // KO x (chunk * Lp): gradient arriving at this layer's output
};

struct EngineScratch {
  std::vector<LayerScratch> layers;
  MatRM a_rows;    // chunk x flat
  MatRM w1, w2;
  MatRM fc1_out, dropped, masks, logits, g2, g1, grad_a, gw1, gw2;
};

EngineScratch& engine() {
  static thread_local EngineScratch s;
  return s;
}

void validate_dataset(const ArchConfig& arch, const LabeledDataset& ds) {
  if (ds.spectra.empty()) throw DataError("train: dataset is empty");
  if (ds.spectra.size() != ds.labels.size())
    throw DimensionError("train: spectra/labels count mismatch");
  if (ds.n_classes != arch.n_classes)
    throw DimensionError("train: dataset has " + std::to_string(ds.n_classes) +
                         " classes, arch expects " + std::to_string(arch.n_classes));
  for (std::size_t i = 0; i < ds.spectra.size(); ++i) {
    if (static_cast<int>(ds.spectra[i].intensity.size()) != arch.input_length)
      throw DimensionError("train: spectrum " + std::to_string(i) + " has length " +
                           std::to_string(ds.spectra[i].intensity.size()) +
                           ", arch expects " + std::to_string(arch.input_length));
    if (static_cast<int>(ds.labels[i].size()) != arch.n_classes)
      throw DimensionError("train: label " + std::to_string(i) + " has wrong dimension");
  }
}

int argmax_of(const double* v, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct LayerDims {
  int in_ch, len, out_ch, size, pooled;
};

std::vector<LayerDims> layer_dims(const ModelParams& params) {
  std::vector<LayerDims> dims;
  int len = params.arch.input_length;
  int in_ch = 1;
  for (const auto& bank : params.conv) {
    dims.push_back({in_ch, len, bank.out_channels, bank.size, pooled_length(len)});
    in_ch = bank.out_channels;
    len = pooled_length(len);
  }
  return dims;
}

int chunk_size(const std::vector<LayerDims>& dims, int batch) {
  std::size_t worst = 0;
  for (const auto& d : dims)
    worst = std::max(worst, static_cast<std::size_t>(d.in_ch) * d.size * d.len * sizeof(double));
  const int fit = static_cast<int>(std::max<std::size_t>(1, kColumnsBudgetBytes / worst));
  return std::min(batch, fit);
}

// Forward one conv layer for `chunk` samples. `input` is K x (chunk * in_len)
// in per-sample blocks; on return s.pooled/argmax/act/columns hold the chunk.
void layer_forward(LayerScratch& s, const LayerDims& d, const ConvFilterBank& bank,
                   double leaky_alpha, const MatRM& input, int chunk) {
  const int padded_len = d.len + d.size - 1;
  const int left = (d.size - 1) / 2;
  const Eigen::Index ks = static_cast<Eigen::Index>(d.in_ch) * d.size;

  s.w.resize(d.out_ch, ks);
  std::copy(bank.weights.begin(), bank.weights.end(), s.w.data());

  s.padded.resize(d.in_ch, static_cast<Eigen::Index>(chunk) * padded_len);
  s.padded.setZero();
  for (int k = 0; k < d.in_ch; ++k)
    for (int j = 0; j < chunk; ++j)
      std::copy_n(input.row(k).data() + static_cast<std::size_t>(j) * d.len, d.len,
                  s.padded.row(k).data() + static_cast<std::size_t>(j) * padded_len + left);

  s.columns.resize(ks, static_cast<Eigen::Index>(chunk) * d.len);
  for (int k = 0; k < d.in_ch; ++k)
    for (int t = 0; t < d.size; ++t) {
      double* dst = s.columns.row(static_cast<Eigen::Index>(k) * d.size + t).data();
      const double* src = s.padded.row(k).data();
      for (int j = 0; j < chunk; ++j)
        std::copy_n(src + static_cast<std::size_t>(j) * padded_len + t, d.len,
                    dst + static_cast<std::size_t>(j) * d.len);
    }

  s.act.resize(d.out_ch, static_cast<Eigen::Index>(chunk) * d.len);
  s.act.noalias() = s.w * s.columns;
  for (int ko = 0; ko < d.out_ch; ++ko) {
    const double b = bank.bias[ko];
    double* row = s.act.row(ko).data();
    const Eigen::Index n = s.act.cols();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = row[i] + b;
      row[i] = v >= 0.0 ? v : leaky_alpha * v;
    }
  }

  s.pooled.resize(d.out_ch, static_cast<Eigen::Index>(chunk) * d.pooled);
  s.argmax.assign(static_cast<std::size_t>(d.out_ch) * chunk * d.pooled, 0);
  for (int ko = 0; ko < d.out_ch; ++ko) {
    const double* act = s.act.row(ko).data();
    double* pooled = s.pooled.row(ko).data();
    int* arg = s.argmax.data() + static_cast<std::size_t>(ko) * chunk * d.pooled;
    for (int j = 0; j < chunk; ++j) {
      const double* a = act + static_cast<std::size_t>(j) * d.len;
      double* o = pooled + static_cast<std::size_t>(j) * d.pooled;
      int* g = arg + static_cast<std::size_t>(j) * d.pooled;
      for (int p = 0; p < d.pooled; ++p) {
        const int x0 = 2 * p;
        int best = x0;
        if (x0 + 1 < d.len && a[x0 + 1] > a[x0]) best = x0 + 1;
        o[p] = a[best];
        g[p] = best;
      }
    }
  }
}

// Backward one conv layer from s.grad_pooled; adds weight/bias grads into
// acc and, unless `need_input_grad` is false, leaves the gradient at the
// layer input in s.grad_pad's interior (copied out by the caller).
void layer_backward(LayerScratch& s, const LayerDims& d, double leaky_alpha,
                    ConvFilterBank& acc, int chunk, bool need_input_grad) {
  const int padded_len = d.len + d.size - 1;
  const Eigen::Index ks = static_cast<Eigen::Index>(d.in_ch) * d.size;

  // Route pooled gradients to the winners and fold in the leaky slope; the
  // activation's sign equals the pre-activation's.
  s.grad_act.resize(d.out_ch, static_cast<Eigen::Index>(chunk) * d.len);
  s.grad_act.setZero();
  for (int ko = 0; ko < d.out_ch; ++ko) {
    const double* act = s.act.row(ko).data();
    const double* gp = s.grad_pooled.row(ko).data();
    double* ga = s.grad_act.row(ko).data();
    const int* arg = s.argmax.data() + static_cast<std::size_t>(ko) * chunk * d.pooled;
    for (int j = 0; j < chunk; ++j) {
      const std::size_t off = static_cast<std::size_t>(j) * d.len;
      for (int p = 0; p < d.pooled; ++p) {
        const int pos = arg[static_cast<std::size_t>(j) * d.pooled + p];
        const double g = gp[static_cast<std::size_t>(j) * d.pooled + p];
        ga[off + pos] = act[off + pos] >= 0.0 ? g : leaky_alpha * g;
      }
    }
  }

  s.grad_w.resize(d.out_ch, ks);
  s.grad_w.noalias() = s.grad_act * s.columns.transpose();
  for (std::size_t i = 0; i < acc.weights.size(); ++i) acc.weights[i] += s.grad_w.data()[i];
  for (int ko = 0; ko < d.out_ch; ++ko) {
    const double* row = s.grad_act.row(ko).data();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < s.grad_act.cols(); ++i) sum += row[i];
    acc.bias[ko] += sum;
  }

  if (!need_input_grad) return;
  s.grad_col.resize(ks, static_cast<Eigen::Index>(chunk) * d.len);
  s.grad_col.noalias() = s.w.transpose() * s.grad_act;
  s.grad_pad.resize(d.in_ch, static_cast<Eigen::Index>(chunk) * padded_len);
  s.grad_pad.setZero();
  for (int k = 0; k < d.in_ch; ++k) {
    double* pad = s.grad_pad.row(k).data();
    for (int t = 0; t < d.size; ++t) {
      const double* col = s.grad_col.row(static_cast<Eigen::Index>(k) * d.size + t).data();
      for (int j = 0; j < chunk; ++j) {
        double* dst = pad + static_cast<std::size_t>(j) * padded_len + t;
        const double* src = col + static_cast<std::size_t>(j) * d.len;
        for (int x = 0; x < d.len; ++x) dst[x] += src[x];
      }
    }
  }
}

}  // namespace

BatchStats batch_gradients(const ModelParams& params, const LabeledDataset& dataset,
                           const std::vector<int>& indices, int epoch,
                           const TrainConfig& cfg, Gradients& out) {
  const ArchConfig& arch = params.arch;
  const int batch = static_cast<int>(indices.size());
  if (batch < 1) throw DataError("batch_gradients: empty batch");
  const int flat = params.fc1.in_dim;
  const int fc1w = params.fc1.out_dim;
  const int classes = params.fc2.out_dim;
  const std::vector<LayerDims> dims = layer_dims(params);
  const int last = static_cast<int>(dims.size()) - 1;
  const int max_chunk = chunk_size(dims, batch);

  auto& s = engine();
  s.layers.resize(dims.size());
  s.w1.resize(flat, fc1w);
  std::copy(params.fc1.weights.begin(), params.fc1.weights.end(), s.w1.data());
  s.w2.resize(fc1w, classes);
  std::copy(params.fc2.weights.begin(), params.fc2.weights.end(), s.w2.data());

  for_each_tensor({&out}, [](std::vector<std::vector<double>*>& t) {
    std::fill(t[0]->begin(), t[0]->end(), 0.0);
  });

  BatchStats stats;
  std::vector<double> logits_row(classes);
  MatRM input0;

  for (int start = 0; start < batch; start += max_chunk) {
    const int chunk = std::min(max_chunk, batch - start);

    // Conv stack forward across the chunk.
    input0.resize(1, static_cast<Eigen::Index>(chunk) * arch.input_length);
    for (int j = 0; j < chunk; ++j) {
      const auto& spec = dataset.spectra[indices[start + j]].intensity;
      if (static_cast<int>(spec.size()) != arch.input_length)
        throw DimensionError("train: spectrum length mismatch");
      std::copy(spec.begin(), spec.end(),
                input0.data() + static_cast<std::size_t>(j) * arch.input_length);
    }
    for (std::size_t l = 0; l < dims.size(); ++l)
      layer_forward(s.layers[l], dims[l], params.conv[l], arch.leaky_alpha,
                    l == 0 ? input0 : s.layers[l - 1].pooled, chunk);

    // Flatten (position-major) into the head input rows.
    const auto& dlast = dims[last];
    s.a_rows.resize(chunk, flat);
    for (int j = 0; j < chunk; ++j) {
      double* row = s.a_rows.row(j).data();
      for (int k = 0; k < dlast.out_ch; ++k) {
        const double* pooled =
            s.layers[last].pooled.row(k).data() + static_cast<std::size_t>(j) * dlast.pooled;
        for (int x = 0; x < dlast.pooled; ++x) row[x * dlast.out_ch + k] = pooled[x];
      }
    }

    // FC head forward.
    s.fc1_out.resize(chunk, fc1w);
    s.fc1_out.noalias() = s.a_rows * s.w1;
    for (int j = 0; j < chunk; ++j) {
      double* row = s.fc1_out.row(j).data();
      for (int l = 0; l < fc1w; ++l) row[l] += params.fc1.bias[l];
    }
    s.masks.resize(chunk, fc1w);
    const double keep = arch.dropout_keep;
    for (int j = 0; j < chunk; ++j) {
      double* mask = s.masks.row(j).data();
      if (keep == 1.0) {
        std::fill(mask, mask + fc1w, 1.0);
      } else {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 11,
                         static_cast<std::uint64_t>(indices[start + j]) + 17));
        const double scale = 1.0 / keep;
        for (int l = 0; l < fc1w; ++l)
          mask[l] = uniform_real(rng, 0.0, 1.0) < keep ? scale : 0.0;
      }
    }
    s.dropped.resize(chunk, fc1w);
    s.dropped = s.fc1_out.cwiseProduct(s.masks);
    s.logits.resize(chunk, classes);
    s.logits.noalias() = s.dropped * s.w2;

    s.g2.resize(chunk, classes);
    for (int j = 0; j < chunk; ++j) {
      const double* row = s.logits.row(j).data();
      for (int c = 0; c < classes; ++c) logits_row[c] = row[c] + params.fc2.bias[c];
      const auto& label = dataset.labels[indices[start + j]];
      const auto sm = softmax_cross_entropy(logits_row, label);
      if (!std::isfinite(sm.loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", sample " + std::to_string(indices[start + j]));
      stats.loss_sum += sm.loss;
      if (argmax_of(logits_row.data(), classes) == label_index(label)) ++stats.correct;
      std::copy(sm.grad_logits.begin(), sm.grad_logits.end(), s.g2.row(j).data());
    }

    // FC head backward.
    s.gw.resize(fc1w, classes);
    s.gw.noalias() = s.dropped.transpose() * s.g2;
    for (std::size_t i = 0; i < out.fc2.weights.size(); ++i)
      out.fc2.weights[i] += s.gw.data()[i];
    for (int j = 0; j < chunk; ++j)
      for (int c = 0; c < classes; ++c) out.fc2.bias[c] += s.g2.row(j).data()[c];

    s.g1.resize(chunk, fc1w);
    s.g1.noalias() = s.g2 * s.w2.transpose();
    s.g1 = s.g1.cwiseProduct(s.masks);
    for (int j = 0; j < chunk; ++j)
      for (int l = 0; l < fc1w; ++l) out.fc1.bias[l] += s.g1.row(j).data()[l];
    s.gw.resize(flat, fc1w);
    s.gw.noalias() = s.a_rows.transpose() * s.g1;
    for (std::size_t i = 0; i < out.fc1.weights.size(); ++i)
      out.fc1.weights[i] += s.gw.data()[i];

    s.grad_a.resize(chunk, flat);
    s.grad_a.noalias() = s.g1 * s.w1.transpose();

    // Back through the conv stack.
    s.layers[last].grad_pooled.resize(dlast.out_ch,
                                      static_cast<Eigen::Index>(chunk) * dlast.pooled);
    for (int j = 0; j < chunk; ++j) {
      const double* row = s.grad_a.row(j).data();
      for (int k = 0; k < dlast.out_ch; ++k) {
        double* gp = s.layers[last].grad_pooled.row(k).data() +
                     static_cast<std::size_t>(j) * dlast.pooled;
        for (int x = 0; x < dlast.pooled; ++x) gp[x] = row[x * dlast.out_ch + k];
      }
    }
    for (int l = last; l >= 0; --l) {
      layer_backward(s.layers[l], dims[l], arch.leaky_alpha, out.conv[l], chunk, l > 0);
      if (l > 0) {
        // Interior of grad_pad is the gradient at the previous pooled output.
        const auto& d = dims[l];
        const int padded_len = d.len + d.size - 1;
        const int left = (d.size - 1) / 2;
        auto& prev = s.layers[l - 1];
        prev.grad_pooled.resize(d.in_ch, static_cast<Eigen::Index>(chunk) * d.len);
        for (int k = 0; k < d.in_ch; ++k) {
          const double* pad = s.layers[l].grad_pad.row(k).data();
          double* dst = prev.grad_pooled.row(k).data();
          for (int j = 0; j < chunk; ++j)
            std::copy_n(pad + static_cast<std::size_t>(j) * padded_len + left, d.len,
                        dst + static_cast<std::size_t>(j) * d.len);
        }
      }
    }
  }

  const double inv = 1.0 / batch;
  for_each_tensor({&out}, [&](std::vector<std::vector<double>*>& t) {
    for (auto& v : *t[0]) v *= inv;
  });
  return stats;
}

TrainResult train(const ArchConfig& arch, const LabeledDataset& dataset, const TrainConfig& cfg) {
  validate_arch(arch);
  validate_dataset(arch, dataset);
  if (cfg.epochs < 1) throw DataError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw DataError("train: batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw DataError("train: learning rate must be > 0");

  const int n = static_cast<int>(dataset.spectra.size());

  TrainResult result;
  result.params = init_model(arch, cfg.seed);
  AdamState adam = init_adam(result.params);
  Gradients grads = zeros_like(result.params);

  Rng shuffle_rng(mix_seed(cfg.seed, 0x5u));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> batch;

  result.history.mean_loss.reserve(cfg.epochs);
  result.history.train_accuracy.reserve(cfg.epochs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_in_place(order, shuffle_rng);
    double epoch_loss = 0.0;
    int epoch_correct = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - start);
      batch.assign(order.begin() + start, order.begin() + start + bs);
      const BatchStats stats =
          batch_gradients(result.params, dataset, batch, epoch, cfg, grads);
      epoch_loss += stats.loss_sum;
      epoch_correct += stats.correct;
      adam_step(result.params, grads, adam, cfg);
    }
    result.history.mean_loss.push_back(epoch_loss / n);
    result.history.train_accuracy.push_back(static_cast<double>(epoch_correct) / n);
  }
  return result;
}

double evaluate(const ModelParams& params, const LabeledDataset& dataset) {
  if (dataset.spectra.empty()) throw DataError("evaluate: dataset is empty");
  if (dataset.spectra.size() != dataset.labels.size())
    throw DimensionError("evaluate: spectra/labels count mismatch");
  int correct = 0;
  for (std::size_t i = 0; i < dataset.spectra.size(); ++i) {
    const auto pred = predict(params, dataset.spectra[i].intensity);
    if (pred.label == label_index(dataset.labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.spectra.size());
}

std::vector<int> stratified_folds(const LabeledDataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("kfold: k must be >= 2");
  std::vector<std::vector<int>> per_class(dataset.n_classes);
  for (std::size_t i = 0; i < dataset.labels.size(); ++i)
    per_class[label_index(dataset.labels[i])].push_back(static_cast<int>(i));
  for (int c = 0; c < dataset.n_classes; ++c)
    if (static_cast<int>(per_class[c].size()) < k)
      throw DataError("kfold: class " + std::to_string(c) + " has only " +
                      std::to_string(per_class[c].size()) + " samples, fewer than k=" +
                      std::to_string(k));
  std::vector<int> fold(dataset.labels.size(), -1);
  for (int c = 0; c < dataset.n_classes; ++c) {
    Rng rng(mix_seed(seed, 0xF01Du, static_cast<std::uint64_t>(c)));
    shuffle_in_place(per_class[c], rng);
    for (std::size_t j = 0; j < per_class[c].size(); ++j)
      fold[per_class[c][j]] = static_cast<int>(j % k);
  }
  return fold;
}

double KFoldResult::mean_accuracy() const {
  if (fold_accuracy.empty()) return 0.0;
  return std::accumulate(fold_accuracy.begin(), fold_accuracy.end(), 0.0) /
         static_cast<double>(fold_accuracy.size());
}

KFoldResult kfold_cv(const ArchConfig& arch, const LabeledDataset& dataset,
                     const TrainConfig& cfg) {
  validate_dataset(arch, dataset);
  const int k = cfg.kfold;
  if (static_cast<int>(dataset.spectra.size()) < k)
    throw DataError("kfold: dataset smaller than fold count");
  const std::vector<int> fold = stratified_folds(dataset, k, cfg.seed);

  KFoldResult result;
  int pooled_correct = 0;
  for (int f = 0; f < k; ++f) {
    LabeledDataset train_set, test_set;
    train_set.n_classes = test_set.n_classes = dataset.n_classes;
    for (std::size_t i = 0; i < dataset.spectra.size(); ++i) {
      auto& dst = (fold[i] == f) ? test_set : train_set;
      dst.spectra.push_back(dataset.spectra[i]);
      dst.labels.push_back(dataset.labels[i]);
      if (i < dataset.meta.size()) dst.meta.push_back(dataset.meta[i]);
    }
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = mix_seed(cfg.seed, 0xCF0Du, static_cast<std::uint64_t>(f));
    auto trained = train(arch, train_set, fold_cfg);
    const double acc = evaluate(trained.params, test_set);
    trained.history.test_accuracy = acc;
    pooled_correct += static_cast<int>(std::lround(acc * test_set.spectra.size()));
    result.fold_accuracy.push_back(acc);
    result.fold_history.push_back(std::move(trained.history));
  }
  result.pooled_accuracy =
      static_cast<double>(pooled_correct) / static_cast<double>(dataset.spectra.size());
  return result;
}

}  // namespace ramcnn
