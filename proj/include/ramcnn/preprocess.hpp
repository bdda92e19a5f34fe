#pragma once

#include <vector>

#include "ramcnn/specgen.hpp"

namespace ramcnn {

// The fixed model grid: 350..1800 cm^-1 at 1 cm^-1.
inline constexpr double kGridStart = 350.0;
inline constexpr double kGridEnd = 1800.0;
inline constexpr int kGridLength = 1451;

// A measured trace before resampling: wavenumbers strictly increasing,
// at least 4 samples (the cubic spline needs them).
struct RawSpectrum {
  std::vector<double> wavenumber;  // cm^-1
  std::vector<double> counts;
};

struct ModelInput {
  std::vector<double> intensity;  // length kGridLength, max 1 unless degenerate
  bool degenerate = false;        // all-nonpositive input: left unnormalized
};

void validate_raw(const RawSpectrum& raw);

enum class BaselineMode { endpoints, least_squares };

// Removes the straight line through the first and last sample (default), or
// the least-squares line fit.
RawSpectrum subtract_linear_baseline(const RawSpectrum& raw,
                                     BaselineMode mode = BaselineMode::endpoints);

// Natural cubic spline through (wavenumber, counts) evaluated at every point
// of `grid`. Grid points outside the sampled range clamp to the nearest
// sample value.
std::vector<double> spline_resample(const RawSpectrum& raw, const std::vector<double>& grid);

std::vector<double> model_grid();

// Divide by max(v) when max(v) > 0; an all-nonpositive trace is returned
// unchanged and flagged through `warned` when given.
std::vector<double> normalize_intensity(const std::vector<double>& v, bool* warned = nullptr);

// Baseline subtraction -> spline resample onto 350..1800 -> max-normalize.
ModelInput preprocess_pipeline(const RawSpectrum& raw,
                               BaselineMode mode = BaselineMode::endpoints);

}  // namespace ramcnn
