#pragma once

#include <vector>

#include "ramcnn/rng.hpp"

namespace ramcnn {

// A stack of 1D traces: `channels` rows of `length` samples, row-major.
struct ChannelMap {
  int channels = 0;
  int length = 0;
  std::vector<double> data;  // [channel][position]

  ChannelMap() = default;
  ChannelMap(int channels_, int length_)
      : channels(channels_), length(length_),
        data(static_cast<std::size_t>(channels_) * length_, 0.0) {}

  double& at(int k, int x) { return data[static_cast<std::size_t>(k) * length + x]; }
  double at(int k, int x) const { return data[static_cast<std::size_t>(k) * length + x]; }
};

// Weights of one convolutional layer, stride fixed at 1, same padding.
struct ConvFilterBank {
  int out_channels = 0;
  int in_channels = 0;
  int size = 0;                 // tap count
  std::vector<double> weights;  // [out][in][tap]
  std::vector<double> bias;     // [out]

  ConvFilterBank() = default;
  ConvFilterBank(int out, int in, int size_)
      : out_channels(out), in_channels(in), size(size_),
        weights(static_cast<std::size_t>(out) * in * size_, 0.0), bias(out, 0.0) {}

  double& w(int ko, int ki, int t) {
    return weights[(static_cast<std::size_t>(ko) * in_channels + ki) * size + t];
  }
  double w(int ko, int ki, int t) const {
    return weights[(static_cast<std::size_t>(ko) * in_channels + ki) * size + t];
  }
};

// Fully-connected layer weights, indexed [input][output].
struct DenseWeights {
  int in_dim = 0;
  int out_dim = 0;
  std::vector<double> weights;  // [input][output]
  std::vector<double> bias;     // [output]

  DenseWeights() = default;
  DenseWeights(int in, int out)
      : in_dim(in), out_dim(out),
        weights(static_cast<std::size_t>(in) * out, 0.0), bias(out, 0.0) {}

  double& w(int i, int j) { return weights[static_cast<std::size_t>(i) * out_dim + j]; }
  double w(int i, int j) const { return weights[static_cast<std::size_t>(i) * out_dim + j]; }
};

// Pooling output plus the winner positions needed to route gradients back.
struct PoolRecord {
  ChannelMap output;
  std::vector<int> argmax;  // [channel][pooled position] -> winning input position
  int input_length = 0;

  int arg(int k, int p) const {
    return argmax[static_cast<std::size_t>(k) * output.length + p];
  }
};

enum class Mode { train, infer };

// Pooled length under window-2/stride-2 pooling with -inf padding on the
// right: ceil(n / 2).
constexpr int pooled_length(int n) { return (n + 1) / 2; }

// --- convolution ------------------------------------------------------------

// Same-padded stride-1 convolution. Output length equals input length; the
// zero padding puts floor((size-1)/2) columns on the left.
ChannelMap conv1d_forward(const ChannelMap& input, const ConvFilterBank& filters);

struct ConvGrads {
  ChannelMap input;        // d loss / d input
  ConvFilterBank filters;  // d loss / d (weights, bias), same shapes as the bank
};

ConvGrads conv1d_backward(const ChannelMap& grad_output, const ChannelMap& input,
                          const ConvFilterBank& filters);

// --- activations ------------------------------------------------------------

std::vector<double> leaky_relu(const std::vector<double>& x, double alpha);
std::vector<double> leaky_relu_backward(const std::vector<double>& grad_output,
                                        const std::vector<double>& input, double alpha);

// --- pooling ----------------------------------------------------------------

// Non-overlapping windows of 2, stride 2; odd lengths behave as if padded on
// the right with -inf. Ties break to the leftmost position.
PoolRecord maxpool2_forward(const ChannelMap& input);
ChannelMap maxpool2_backward(const ChannelMap& grad_output, const PoolRecord& record);

// --- fully connected ---------------------------------------------------------

std::vector<double> fc_forward(const std::vector<double>& input, const DenseWeights& dense);

struct DenseGrads {
  std::vector<double> input;
  DenseWeights dense;
};

DenseGrads fc_backward(const std::vector<double>& grad_output,
                       const std::vector<double>& input, const DenseWeights& dense);

// --- dropout ----------------------------------------------------------------

struct DropoutResult {
  std::vector<double> output;
  std::vector<double> mask;  // per-entry multiplier: 0 or 1/keep_prob (all 1 in infer mode)
};

// Inverted dropout: kept entries are scaled by 1/keep_prob during training so
// inference applies no rescale at all.
DropoutResult dropout(const std::vector<double>& input, double keep_prob, Mode mode, Rng& rng);

// --- loss --------------------------------------------------------------------

struct SoftmaxLoss {
  double loss = 0.0;
  std::vector<double> probs;
  std::vector<double> grad_logits;  // probs - onehot
};

// Max-subtracted softmax followed by cross entropy against a one-hot label.
SoftmaxLoss softmax_cross_entropy(const std::vector<double>& logits,
                                  const std::vector<double>& onehot);

}  // namespace ramcnn
