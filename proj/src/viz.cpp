#include "ramcnn/viz.hpp"

#include <cmath>
#include <string>

#include "ramcnn/errors.hpp"

namespace ramcnn {

namespace {

void check_class(const ModelParams& params, int c) {
  if (c < 0 || c >= params.arch.n_classes)
    throw DataError("visualization: class index " + std::to_string(c) +
                    " out of range for a " + std::to_string(params.arch.n_classes) +
                    "-class model");
}

void check_infer_cache(const ActivationCache& cache) {
  if (cache.mode != Mode::infer)
    throw DataError("visualization: cache must come from an infer-mode forward");
}

// Gradient of the pre-softmax logit for class c at the FC1 output, after the
// dropout mask (identity in infer mode).
std::vector<double> logit_grad_at_fc1_out(const ModelParams& params,
                                          const ActivationCache& cache, int c) {
  std::vector<double> g(params.fc2.out_dim, 0.0);
  g[c] = 1.0;
  auto g2 = fc_backward(g, cache.dropped, params.fc2);
  for (std::size_t i = 0; i < g2.input.size(); ++i) g2.input[i] *= cache.dropout_mask[i];
  return g2.input;
}

ActivationCache infer_cache(const ModelParams& params, const std::vector<double>& input) {
  Rng rng(0);  // infer mode draws nothing
  return forward(params, input, Mode::infer, rng).cache;
}

}  // namespace

std::vector<double> gradcam_alpha(const ModelParams& params, const ActivationCache& cache,
                                  int c) {
  check_class(params, c);
  check_infer_cache(cache);
  const std::vector<double> g1 = logit_grad_at_fc1_out(params, cache, c);
  auto gf = fc_backward(g1, cache.flat, params.fc1);
  const ChannelMap& pool_out = cache.blocks.back().pool.output;
  const ChannelMap grad_pool =
      unflatten_position_major(gf.input, pool_out.channels, pool_out.length);
  std::vector<double> alpha(pool_out.channels, 0.0);
  // Sum over positions, exactly as printed (no mean).
  for (int k = 0; k < pool_out.channels; ++k)
    for (int x = 0; x < pool_out.length; ++x) alpha[k] += grad_pool.at(k, x);
  return alpha;
}

ContributionMap gradcam_map(const ModelParams& params, const std::vector<double>& input,
                            int c) {
  check_class(params, c);
  const ActivationCache cache = infer_cache(params, input);
  const std::vector<double> alpha = gradcam_alpha(params, cache, c);
  const ChannelMap& pool_out = cache.blocks.back().pool.output;
  std::vector<double> pooled(pool_out.length, 0.0);
  for (int x = 0; x < pool_out.length; ++x) {
    double v = 0.0;
    for (int k = 0; k < pool_out.channels; ++k) v += alpha[k] * pool_out.at(k, x);
    pooled[x] = v > 0.0 ? v : 0.0;
  }
  return ContributionMap{upsample_linear(pooled, params.arch.input_length), MapKind::gradcam, c};
}

std::vector<double> fc_beta(const ModelParams& params, const ActivationCache& cache, int c) {
  check_class(params, c);
  check_infer_cache(cache);
  const std::vector<double> g1 = logit_grad_at_fc1_out(params, cache, c);
  // Backprop to the FC1 weight matrix, then collapse over the flattened input
  // index, one beta per feature.
  auto gf = fc_backward(g1, cache.flat, params.fc1);
  std::vector<double> beta(params.fc1.out_dim, 0.0);
  for (int i = 0; i < params.fc1.in_dim; ++i)
    for (int l = 0; l < params.fc1.out_dim; ++l) beta[l] += gf.dense.w(i, l);
  return beta;
}

ImportanceWeights importance_weights(const ModelParams& params, const ActivationCache& cache,
                                     int c) {
  return ImportanceWeights{gradcam_alpha(params, cache, c), fc_beta(params, cache, c)};
}

ContributionMap fc_contribution_map(const ModelParams& params, const std::vector<double>& input,
                                    int c) {
  check_class(params, c);
  const ActivationCache cache = infer_cache(params, input);
  const std::vector<double> beta = fc_beta(params, cache, c);
  const ChannelMap& pool_out = cache.blocks.back().pool.output;
  const int K = pool_out.channels;
  std::vector<double> pooled(pool_out.length, 0.0);
  for (int x = 0; x < pool_out.length; ++x) {
    double mx = 0.0;
    for (int k = 0; k < K; ++k) {
      const int flat_idx = x * K + k;  // position-major flatten order
      double inner = 0.0;
      for (int l = 0; l < params.fc1.out_dim; ++l) inner += beta[l] * params.fc1.w(flat_idx, l);
      mx += cache.flat[flat_idx] * inner;
    }
    pooled[x] = mx;  // signed: negative contributions are meaningful
  }
  return ContributionMap{upsample_linear(pooled, params.arch.input_length), MapKind::fc_map, c};
}

std::vector<double> upsample_linear(const std::vector<double>& source, int target_len) {
  const int s = static_cast<int>(source.size());
  if (s < 2) throw DataError("upsample_linear: need at least 2 source samples");
  if (target_len < s) throw DataError("upsample_linear: target length must be >= source length");
  if (target_len == s) return source;

  std::vector<double> out(target_len, 0.0);
  const double stretch = static_cast<double>(target_len - 1) / static_cast<double>(s - 1);
  int prev_anchor = 0;
  out[0] = source[0];
  for (int p = 1; p < s; ++p) {
    const int anchor = static_cast<int>(std::llround(p * stretch));
    out[anchor] = source[p];
    for (int i = prev_anchor + 1; i < anchor; ++i) {
      const double t = static_cast<double>(i - prev_anchor) / (anchor - prev_anchor);
      out[i] = source[p - 1] + t * (source[p] - source[p - 1]);
    }
    prev_anchor = anchor;
  }
  return out;
}

}  // namespace ramcnn
