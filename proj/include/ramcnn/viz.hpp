#pragma once

#include <string>
#include <vector>

#include "ramcnn/model.hpp"

namespace ramcnn {

enum class MapKind { gradcam, fc_map };

// A per-channel importance trace aligned to the model input grid. gradcam
// maps are rectified (>= 0); fc maps keep their sign.
struct ContributionMap {
  std::vector<double> values;  // length = arch.input_length after upsampling
  MapKind kind = MapKind::gradcam;
  int target_class = 0;
};

struct ImportanceWeights {
  std::vector<double> alpha;  // one per last-pool channel
  std::vector<double> beta;   // one per FC1 feature
};

// alpha_k = sum_x d(logit_c) / d(pool_out[k][x]), from an infer-mode cache.
// The class score is the pre-softmax logit.
std::vector<double> gradcam_alpha(const ModelParams& params, const ActivationCache& cache,
                                  int target_class);

// Rectified alpha-weighted channel sum of the last pooling output, upsampled
// to the input grid.
ContributionMap gradcam_map(const ModelParams& params, const std::vector<double>& input,
                            int target_class);

// beta_l = sum over flattened inputs of d(logit_c) / d(fc1_weight[.][l]),
// computed by backprop to the FC1 weights.
std::vector<double> fc_beta(const ModelParams& params, const ActivationCache& cache,
                            int target_class);

ImportanceWeights importance_weights(const ModelParams& params, const ActivationCache& cache,
                                     int target_class);

// M_x = sum_k A[k][x] * (sum_l beta_l * fc1_weight[(x,k)][l]); signed, no
// rectification, upsampled to the input grid.
ContributionMap fc_contribution_map(const ModelParams& params, const std::vector<double>& input,
                                    int target_class);

// Endpoint-to-endpoint linear stretch: source sample p lands on target index
// round(p * (target_len-1)/(source_len-1)) and the gaps are filled linearly,
// so every source value (in particular min and max) appears in the output.
std::vector<double> upsample_linear(const std::vector<double>& source, int target_len);

}  // namespace ramcnn
