#include "ramcnn/model.hpp"

#include <cmath>
#include <string>

#include "ramcnn/errors.hpp"

namespace ramcnn {

void validate_arch(const ArchConfig& arch) {
  if (arch.input_length < 1) throw DataError("arch: input_length must be >= 1");
  if (arch.conv_blocks.empty()) throw DataError("arch: at least one conv block required");
  for (const auto& b : arch.conv_blocks)
    if (b.filters < 1 || b.size < 1) throw DataError("arch: filter count and size must be >= 1");
  if (arch.fc1_width < 1) throw DataError("arch: fc1_width must be >= 1");
  if (arch.n_classes < 2) throw DataError("arch: n_classes must be >= 2");
  if (!(arch.dropout_keep > 0.0 && arch.dropout_keep <= 1.0))
    throw DataError("arch: dropout_keep must be in (0, 1]");
  if (!(arch.leaky_alpha >= 0.0 && arch.leaky_alpha < 1.0))
    throw DataError("arch: leaky_alpha must be in [0, 1)");
}

int final_pooled_length(const ArchConfig& arch) {
  int len = arch.input_length;
  for (std::size_t i = 0; i < arch.conv_blocks.size(); ++i) len = pooled_length(len);
  return len;
}

int flattened_dim(const ArchConfig& arch) {
  return final_pooled_length(arch) * arch.conv_blocks.back().filters;
}

Gradients zeros_like(const ModelParams& params) {
  Gradients g;
  g.arch = params.arch;
  for (const auto& c : params.conv)
    g.conv.emplace_back(c.out_channels, c.in_channels, c.size);
  g.fc1 = DenseWeights(params.fc1.in_dim, params.fc1.out_dim);
  g.fc2 = DenseWeights(params.fc2.in_dim, params.fc2.out_dim);
  return g;
}

void for_each_tensor(std::vector<ModelParams*> structs,
                     const std::function<void(std::vector<std::vector<double>*>&)>& fn) {
  const std::size_t n_blocks = structs.front()->conv.size();
  std::vector<std::vector<double>*> slots(structs.size());
  auto visit = [&](auto member) {
    for (std::size_t s = 0; s < structs.size(); ++s) slots[s] = member(*structs[s]);
    fn(slots);
  };
  for (std::size_t b = 0; b < n_blocks; ++b) {
    visit([b](ModelParams& p) { return &p.conv[b].weights; });
    visit([b](ModelParams& p) { return &p.conv[b].bias; });
  }
  visit([](ModelParams& p) { return &p.fc1.weights; });
  visit([](ModelParams& p) { return &p.fc1.bias; });
  visit([](ModelParams& p) { return &p.fc2.weights; });
  visit([](ModelParams& p) { return &p.fc2.bias; });
}

namespace {

void glorot_fill(std::vector<double>& w, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : w) v = uniform_real(rng, -limit, limit);
}

}  // namespace

ModelParams init_model(const ArchConfig& arch, std::uint64_t seed) {
  validate_arch(arch);
  Rng rng(seed);
  ModelParams p;
  p.arch = arch;
  int in_ch = 1;
  for (const auto& spec : arch.conv_blocks) {
    ConvFilterBank bank(spec.filters, in_ch, spec.size);
    glorot_fill(bank.weights, in_ch * spec.size, spec.filters * spec.size, rng);
    p.conv.push_back(std::move(bank));
    in_ch = spec.filters;
  }
  p.fc1 = DenseWeights(flattened_dim(arch), arch.fc1_width);
  glorot_fill(p.fc1.weights, p.fc1.in_dim, p.fc1.out_dim, rng);
  p.fc2 = DenseWeights(arch.fc1_width, arch.n_classes);
  glorot_fill(p.fc2.weights, p.fc2.in_dim, p.fc2.out_dim, rng);
  return p;
}

std::vector<double> flatten_position_major(const ChannelMap& map) {
  std::vector<double> flat(static_cast<std::size_t>(map.channels) * map.length);
  for (int x = 0; x < map.length; ++x)
    for (int k = 0; k < map.channels; ++k)
      flat[static_cast<std::size_t>(x) * map.channels + k] = map.at(k, x);
  return flat;
}

ChannelMap unflatten_position_major(const std::vector<double>& flat, int channels, int length) {
  if (flat.size() != static_cast<std::size_t>(channels) * length)
    throw DimensionError("unflatten: size mismatch");
  ChannelMap map(channels, length);
  for (int x = 0; x < length; ++x)
    for (int k = 0; k < channels; ++k)
      map.at(k, x) = flat[static_cast<std::size_t>(x) * channels + k];
  return map;
}

void conv_stack_forward(const ModelParams& params, const std::vector<double>& input,
                        ActivationCache& cache) {
  const ArchConfig& arch = params.arch;
  if (static_cast<int>(input.size()) != arch.input_length)
    throw DimensionError("forward: input length " + std::to_string(input.size()) +
                         " != arch input_length " + std::to_string(arch.input_length));
  for (double v : input)
    if (!std::isfinite(v)) throw DataError("forward: non-finite input intensity");

  cache.blocks.resize(params.conv.size());
  ChannelMap current(1, arch.input_length);
  current.data = input;
  for (std::size_t b = 0; b < params.conv.size(); ++b) {
    BlockCache& blk = cache.blocks[b];
    blk.input = std::move(current);
    blk.pre_act = conv1d_forward(blk.input, params.conv[b]);
    blk.post_act.channels = blk.pre_act.channels;
    blk.post_act.length = blk.pre_act.length;
    blk.post_act.data = leaky_relu(blk.pre_act.data, arch.leaky_alpha);
    blk.pool = maxpool2_forward(blk.post_act);
    current = blk.pool.output;
  }
  cache.flat = flatten_position_major(current);
}

void conv_stack_backward(const ModelParams& params, const ActivationCache& cache,
                         const std::vector<double>& grad_flat, Gradients& acc) {
  if (cache.blocks.size() != params.conv.size())
    throw DimensionError("conv_stack_backward: cache does not match params");
  const ChannelMap& last_pool = cache.blocks.back().pool.output;
  ChannelMap grad_map = unflatten_position_major(grad_flat, last_pool.channels,
                                                 last_pool.length);
  for (int b = static_cast<int>(params.conv.size()) - 1; b >= 0; --b) {
    const BlockCache& blk = cache.blocks[b];
    ChannelMap g_post = maxpool2_backward(grad_map, blk.pool);
    ChannelMap g_pre = g_post;
    g_pre.data = leaky_relu_backward(g_post.data, blk.pre_act.data, params.arch.leaky_alpha);
    auto gc = conv1d_backward(g_pre, blk.input, params.conv[b]);
    for (std::size_t i = 0; i < gc.filters.weights.size(); ++i)
      acc.conv[b].weights[i] += gc.filters.weights[i];
    for (std::size_t i = 0; i < gc.filters.bias.size(); ++i)
      acc.conv[b].bias[i] += gc.filters.bias[i];
    grad_map = std::move(gc.input);
  }
}

void forward_into(const ModelParams& params, const std::vector<double>& input,
                  Mode mode, Rng& rng, ActivationCache& cache) {
  cache.mode = mode;
  conv_stack_forward(params, input, cache);
  cache.fc1_out = fc_forward(cache.flat, params.fc1);
  auto drop = dropout(cache.fc1_out, params.arch.dropout_keep, mode, rng);
  cache.dropout_mask = std::move(drop.mask);
  cache.dropped = std::move(drop.output);
  cache.logits = fc_forward(cache.dropped, params.fc2);
}

ForwardResult forward(const ModelParams& params, const std::vector<double>& input,
                      Mode mode, Rng& rng) {
  ForwardResult r;
  forward_into(params, input, mode, rng, r.cache);
  r.logits = r.cache.logits;
  return r;
}

Gradients backward(const ModelParams& params, const ActivationCache& cache,
                   const std::vector<double>& grad_logits) {
  if (cache.flat.size() != static_cast<std::size_t>(params.fc1.in_dim) ||
      grad_logits.size() != static_cast<std::size_t>(params.fc2.out_dim))
    throw DimensionError("backward: cache does not match params");

  Gradients acc = zeros_like(params);

  auto g2 = fc_backward(grad_logits, cache.dropped, params.fc2);
  acc.fc2.weights = std::move(g2.dense.weights);
  acc.fc2.bias = std::move(g2.dense.bias);

  std::vector<double> g_fc1out = std::move(g2.input);
  for (std::size_t i = 0; i < g_fc1out.size(); ++i) g_fc1out[i] *= cache.dropout_mask[i];

  auto g1 = fc_backward(g_fc1out, cache.flat, params.fc1);
  acc.fc1.weights = std::move(g1.dense.weights);
  acc.fc1.bias = std::move(g1.dense.bias);

  conv_stack_backward(params, cache, g1.input, acc);
  return acc;
}

Prediction predict(const ModelParams& params, const std::vector<double>& input) {
  Rng rng(0);  // infer mode draws nothing
  auto fwd = forward(params, input, Mode::infer, rng);
  std::vector<double> probe(fwd.logits.size(), 0.0);
  probe[0] = 1.0;
  Prediction p;
  p.probs = softmax_cross_entropy(fwd.logits, probe).probs;
  p.label = 0;
  for (std::size_t i = 1; i < p.probs.size(); ++i)
    if (p.probs[i] > p.probs[p.label]) p.label = static_cast<int>(i);
  return p;
}

}  // namespace ramcnn
