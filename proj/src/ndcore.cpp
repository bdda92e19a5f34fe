#include "ramcnn/ndcore.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ramcnn/errors.hpp"

// Reproducibility note: every reduction here either runs in a fixed scalar
// order or inside Eigen GEMMs whose operands live in Eigen-owned (64-byte
// aligned) scratch. Nothing dispatches on the alignment of caller buffers, so
// results are bitwise stable across runs regardless of heap layout.

namespace ramcnn {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvScratch {
  MatRM weights;   // KO x (K*S)
  MatRM padded;    // K x (L + S - 1)
  MatRM columns;   // (K*S) x L, row k*S+t holds padded[k][t .. t+L)
  MatRM out;       // KO x L
  MatRM grad_out;  // KO x L
  MatRM grad_w;    // KO x (K*S)
  MatRM grad_pad;  // K x (L + S - 1)
  MatRM grad_col;  // (K*S) x L
};

ConvScratch& scratch() {
  static thread_local ConvScratch s;
  return s;
}

// Lays the same-padded input out so the convolution becomes one GEMM:
// out = W (KO x K*S) * columns (K*S x L).
void build_columns(const ChannelMap& input, int size, ConvScratch& s) {
  const int K = input.channels, L = input.length;
  s.padded.resize(K, L + size - 1);
  s.padded.setZero();
  const int left = (size - 1) / 2;
  for (int k = 0; k < K; ++k)
    std::copy_n(input.data.data() + static_cast<std::size_t>(k) * L, L,
                s.padded.row(k).data() + left);
  s.columns.resize(static_cast<Eigen::Index>(K) * size, L);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < size; ++t)
      s.columns.row(static_cast<Eigen::Index>(k) * size + t) = s.padded.row(k).segment(t, L);
}

void check_conv_shapes(const ChannelMap& input, const ConvFilterBank& f) {
  if (input.channels != f.in_channels)
    throw DimensionError("conv1d: input has " + std::to_string(input.channels) +
                         " channels, filter bank expects " + std::to_string(f.in_channels));
  if (f.size < 1 || f.out_channels < 1)
    throw DimensionError("conv1d: filter bank is empty");
  if (input.length < 1) throw DimensionError("conv1d: empty input");
}

}  // namespace

ChannelMap conv1d_forward(const ChannelMap& input, const ConvFilterBank& f) {
  check_conv_shapes(input, f);
  const int L = input.length;
  const Eigen::Index ks = static_cast<Eigen::Index>(f.in_channels) * f.size;
  auto& s = scratch();
  build_columns(input, f.size, s);
  s.weights.resize(f.out_channels, ks);
  std::copy(f.weights.begin(), f.weights.end(), s.weights.data());

  s.out.resize(f.out_channels, L);
  s.out.noalias() = s.weights * s.columns;

  ChannelMap out(f.out_channels, L);
  for (int ko = 0; ko < f.out_channels; ++ko) {
    const double b = f.bias[ko];
    const double* src = s.out.row(ko).data();
    double* dst = out.data.data() + static_cast<std::size_t>(ko) * L;
    for (int x = 0; x < L; ++x) dst[x] = src[x] + b;
  }
  return out;
}

ConvGrads conv1d_backward(const ChannelMap& grad_output, const ChannelMap& input,
                          const ConvFilterBank& f) {
  check_conv_shapes(input, f);
  if (grad_output.channels != f.out_channels || grad_output.length != input.length)
    throw DimensionError("conv1d_backward: grad_output shape does not match forward output");

  const int K = input.channels, L = input.length, S = f.size;
  const Eigen::Index ks = static_cast<Eigen::Index>(K) * S;
  auto& s = scratch();
  build_columns(input, S, s);
  s.weights.resize(f.out_channels, ks);
  std::copy(f.weights.begin(), f.weights.end(), s.weights.data());
  s.grad_out.resize(f.out_channels, L);
  std::copy(grad_output.data.begin(), grad_output.data.end(), s.grad_out.data());

  ConvGrads g{ChannelMap(K, L), ConvFilterBank(f.out_channels, K, S)};

  s.grad_w.resize(f.out_channels, ks);
  s.grad_w.noalias() = s.grad_out * s.columns.transpose();
  std::copy_n(s.grad_w.data(), g.filters.weights.size(), g.filters.weights.data());

  for (int ko = 0; ko < f.out_channels; ++ko) {
    double acc = 0.0;
    const double* row = s.grad_out.row(ko).data();
    for (int x = 0; x < L; ++x) acc += row[x];
    g.filters.bias[ko] = acc;
  }

  s.grad_col.resize(ks, L);
  s.grad_col.noalias() = s.weights.transpose() * s.grad_out;
  s.grad_pad.resize(K, L + S - 1);
  s.grad_pad.setZero();
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < S; ++t)
      s.grad_pad.row(k).segment(t, L) += s.grad_col.row(static_cast<Eigen::Index>(k) * S + t);

  const int left = (S - 1) / 2;
  for (int k = 0; k < K; ++k)
    std::copy_n(s.grad_pad.row(k).data() + left, L,
                g.input.data.data() + static_cast<std::size_t>(k) * L);
  return g;
}

std::vector<double> leaky_relu(const std::vector<double>& x, double alpha) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] >= 0.0 ? x[i] : alpha * x[i];
  return out;
}

std::vector<double> leaky_relu_backward(const std::vector<double>& grad_output,
                                        const std::vector<double>& input, double alpha) {
  if (grad_output.size() != input.size())
    throw DimensionError("leaky_relu_backward: size mismatch");
  std::vector<double> out(input.size());
  // Derivative at exactly 0 is taken as 1.
  for (std::size_t i = 0; i < input.size(); ++i)
    out[i] = input[i] >= 0.0 ? grad_output[i] : alpha * grad_output[i];
  return out;
}

PoolRecord maxpool2_forward(const ChannelMap& input) {
  if (input.length < 1 || input.channels < 1) throw DimensionError("maxpool2: empty input");
  const int out_len = pooled_length(input.length);
  PoolRecord rec;
  rec.input_length = input.length;
  rec.output = ChannelMap(input.channels, out_len);
  rec.argmax.assign(static_cast<std::size_t>(input.channels) * out_len, 0);
  for (int k = 0; k < input.channels; ++k) {
    for (int p = 0; p < out_len; ++p) {
      const int x0 = 2 * p;
      int best = x0;
      // A lone final element wins its window (right pad is -inf); strict >
      // keeps ties on the leftmost position.
      if (x0 + 1 < input.length && input.at(k, x0 + 1) > input.at(k, x0)) best = x0 + 1;
      rec.output.at(k, p) = input.at(k, best);
      rec.argmax[static_cast<std::size_t>(k) * out_len + p] = best;
    }
  }
  return rec;
}

ChannelMap maxpool2_backward(const ChannelMap& grad_output, const PoolRecord& rec) {
  if (grad_output.channels != rec.output.channels || grad_output.length != rec.output.length)
    throw DimensionError("maxpool2_backward: grad_output shape does not match pool record");
  ChannelMap grad_in(rec.output.channels, rec.input_length);
  for (int k = 0; k < grad_output.channels; ++k)
    for (int p = 0; p < grad_output.length; ++p)
      grad_in.at(k, rec.arg(k, p)) += grad_output.at(k, p);
  return grad_in;
}

std::vector<double> fc_forward(const std::vector<double>& input, const DenseWeights& d) {
  if (static_cast<int>(input.size()) != d.in_dim)
    throw DimensionError("fc_forward: input dim " + std::to_string(input.size()) +
                         " != weight rows " + std::to_string(d.in_dim));
  std::vector<double> out = d.bias;
  // Accumulates across input rows with the output index innermost; each
  // output's summation order is fixed by in_dim alone.
  for (int i = 0; i < d.in_dim; ++i) {
    const double xi = input[i];
    const double* row = d.weights.data() + static_cast<std::size_t>(i) * d.out_dim;
    for (int j = 0; j < d.out_dim; ++j) out[j] += xi * row[j];
  }
  return out;
}

DenseGrads fc_backward(const std::vector<double>& grad_output,
                       const std::vector<double>& input, const DenseWeights& d) {
  if (static_cast<int>(grad_output.size()) != d.out_dim ||
      static_cast<int>(input.size()) != d.in_dim)
    throw DimensionError("fc_backward: shape mismatch");
  DenseGrads g{std::vector<double>(d.in_dim), DenseWeights(d.in_dim, d.out_dim)};
  for (int i = 0; i < d.in_dim; ++i) {
    const double* row = d.weights.data() + static_cast<std::size_t>(i) * d.out_dim;
    double acc = 0.0;
    for (int j = 0; j < d.out_dim; ++j) acc += row[j] * grad_output[j];
    g.input[i] = acc;
    const double xi = input[i];
    double* grow = g.dense.weights.data() + static_cast<std::size_t>(i) * d.out_dim;
    for (int j = 0; j < d.out_dim; ++j) grow[j] = xi * grad_output[j];
  }
  g.dense.bias = grad_output;
  return g;
}

DropoutResult dropout(const std::vector<double>& input, double keep_prob, Mode mode, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw DataError("dropout: keep_prob must be in (0, 1]");
  DropoutResult r{input, std::vector<double>(input.size(), 1.0)};
  if (mode == Mode::infer || keep_prob == 1.0) return r;
  const double scale = 1.0 / keep_prob;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (uniform_real(rng, 0.0, 1.0) < keep_prob) {
      r.mask[i] = scale;
      r.output[i] = input[i] * scale;
    } else {
      r.mask[i] = 0.0;
      r.output[i] = 0.0;
    }
  }
  return r;
}

SoftmaxLoss softmax_cross_entropy(const std::vector<double>& logits,
                                  const std::vector<double>& onehot) {
  if (logits.size() != onehot.size() || logits.empty())
    throw DimensionError("softmax_cross_entropy: logits/label dimension mismatch");
  int true_idx = -1;
  for (std::size_t i = 0; i < onehot.size(); ++i) {
    if (onehot[i] == 1.0) {
      if (true_idx >= 0) throw DataError("softmax_cross_entropy: label is not one-hot");
      true_idx = static_cast<int>(i);
    } else if (onehot[i] != 0.0) {
      throw DataError("softmax_cross_entropy: label is not one-hot");
    }
  }
  if (true_idx < 0) throw DataError("softmax_cross_entropy: label is not one-hot");

  SoftmaxLoss r;
  r.probs.resize(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.probs[i] = std::exp(logits[i] - m);
    denom += r.probs[i];
  }
  for (auto& p : r.probs) p /= denom;
  // log(p_true) computed from logits directly; avoids log(0) for extreme gaps.
  r.loss = -(logits[true_idx] - m - std::log(denom));
  r.grad_logits = r.probs;
  r.grad_logits[true_idx] -= 1.0;
  return r;
}

}  // namespace ramcnn
