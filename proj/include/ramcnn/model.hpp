#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ramcnn/ndcore.hpp"

namespace ramcnn {

struct ConvSpec {
  int filters = 64;
  int size = 8;
};

// The network: conv -> leaky ReLU -> maxpool/2, repeated per block, then
// flatten, FC1 (linear), dropout, FC2 -> logits.
struct ArchConfig {
  int input_length = 1451;
  std::vector<ConvSpec> conv_blocks = {{64, 8}, {64, 8}};
  int fc1_width = 128;
  double dropout_keep = 0.5;
  int n_classes = 3;
  double leaky_alpha = 0.2;
};

void validate_arch(const ArchConfig& arch);

// Length of the last pooling output, after all blocks.
int final_pooled_length(const ArchConfig& arch);
// Flattened dimension feeding FC1: final pooled length x last filter count.
int flattened_dim(const ArchConfig& arch);

struct ModelParams {
  ArchConfig arch;
  std::vector<ConvFilterBank> conv;
  DenseWeights fc1;  // flattened pool output -> fc1_width
  DenseWeights fc2;  // fc1_width -> n_classes
};

// Gradient tensors mirror the parameter tensors exactly.
using Gradients = ModelParams;

Gradients zeros_like(const ModelParams& params);

// Visits every parameter tensor (conv weights, conv bias per block, fc1
// weights/bias, fc2 weights/bias) of parallel structures in one fixed order.
void for_each_tensor(std::vector<ModelParams*> structs,
                     const std::function<void(std::vector<std::vector<double>*>&)>& fn);

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
ModelParams init_model(const ArchConfig& arch, std::uint64_t seed);

struct BlockCache {
  ChannelMap input;
  ChannelMap pre_act;   // conv output before the activation
  ChannelMap post_act;  // after leaky ReLU
  PoolRecord pool;
};

// Everything retained from a forward pass, for backprop and visualization.
struct ActivationCache {
  std::vector<BlockCache> blocks;
  std::vector<double> flat;      // A: last pool output flattened position-major
  std::vector<double> fc1_out;   // linear FC1 output (no activation)
  std::vector<double> dropout_mask;
  std::vector<double> dropped;   // fc1_out after dropout
  std::vector<double> logits;
  Mode mode = Mode::infer;
};

// Flatten is position-major: flat[x * channels + k] = map[k][x].
std::vector<double> flatten_position_major(const ChannelMap& map);
ChannelMap unflatten_position_major(const std::vector<double>& flat, int channels, int length);

struct ForwardResult {
  std::vector<double> logits;
  ActivationCache cache;
};

ForwardResult forward(const ModelParams& params, const std::vector<double>& input,
                      Mode mode, Rng& rng);

// Buffer-reusing variant for tight training loops.
void forward_into(const ModelParams& params, const std::vector<double>& input,
                  Mode mode, Rng& rng, ActivationCache& cache);

Gradients backward(const ModelParams& params, const ActivationCache& cache,
                   const std::vector<double>& grad_logits);

// The convolutional half on its own, for training loops that batch the FC
// head across samples: fills cache.blocks and cache.flat only.
void conv_stack_forward(const ModelParams& params, const std::vector<double>& input,
                        ActivationCache& cache);

// Backward through the conv blocks from the gradient at the flattened pool
// output; adds the conv parameter gradients into `acc`.
void conv_stack_backward(const ModelParams& params, const ActivationCache& cache,
                         const std::vector<double>& grad_flat, Gradients& acc);

struct Prediction {
  std::vector<double> probs;
  int label = 0;  // argmax; ties resolve to the lowest index
};

Prediction predict(const ModelParams& params, const std::vector<double>& input);

}  // namespace ramcnn
