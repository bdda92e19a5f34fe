#include "ramcnn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ramcnn/errors.hpp"

namespace ramcnn {

void validate_raw(const RawSpectrum& raw) {
  if (raw.wavenumber.size() != raw.counts.size())
    throw DimensionError("raw spectrum: wavenumber/counts length mismatch");
  if (raw.wavenumber.size() < 4)
    throw DataError("raw spectrum: need at least 4 samples for spline resampling");
  for (std::size_t i = 0; i < raw.wavenumber.size(); ++i) {
    if (!std::isfinite(raw.wavenumber[i]) || !std::isfinite(raw.counts[i]))
      throw DataError("raw spectrum: non-finite value at sample " + std::to_string(i));
    if (i > 0 && raw.wavenumber[i] <= raw.wavenumber[i - 1])
      throw DataError("raw spectrum: wavenumbers not strictly increasing at sample " +
                      std::to_string(i));
  }
}

RawSpectrum subtract_linear_baseline(const RawSpectrum& raw, BaselineMode mode) {
  validate_raw(raw);
  const std::size_t n = raw.wavenumber.size();
  double slope, intercept;
  if (mode == BaselineMode::endpoints) {
    slope = (raw.counts[n - 1] - raw.counts[0]) / (raw.wavenumber[n - 1] - raw.wavenumber[0]);
    intercept = raw.counts[0] - slope * raw.wavenumber[0];
  } else {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sx += raw.wavenumber[i];
      sy += raw.counts[i];
      sxx += raw.wavenumber[i] * raw.wavenumber[i];
      sxy += raw.wavenumber[i] * raw.counts[i];
    }
    const double dn = static_cast<double>(n);
    slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
    intercept = (sy - slope * sx) / dn;
  }
  RawSpectrum out = raw;
  for (std::size_t i = 0; i < n; ++i)
    out.counts[i] = raw.counts[i] - (slope * raw.wavenumber[i] + intercept);
  return out;
}

namespace {

// Second derivatives of the natural cubic spline, by the Thomas algorithm.
std::vector<double> natural_spline_m(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> m(n, 0.0);
  if (n < 3) return m;
  std::vector<double> diag(n - 2), upper(n - 2), rhs(n - 2);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x[i] - x[i - 1];
    const double h1 = x[i + 1] - x[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    upper[i - 1] = h1;
    rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
  }
  // Forward sweep: the sub-diagonal of row i is h_i = upper[i-1].
  for (std::size_t i = 1; i + 1 < n - 1; ++i) {
    const double w = upper[i - 1] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    const double next = (i + 1 <= n - 2) ? m[i + 1] : 0.0;
    m[i] = (rhs[i - 1] - upper[i - 1] * next) / diag[i - 1];
  }
  return m;
}

}  // namespace

std::vector<double> spline_resample(const RawSpectrum& raw, const std::vector<double>& grid) {
  validate_raw(raw);
  const auto& x = raw.wavenumber;
  const auto& y = raw.counts;
  const std::vector<double> m = natural_spline_m(x, y);

  std::vector<double> out(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double t = grid[g];
    if (t <= x.front()) {
      out[g] = y.front();
      continue;
    }
    if (t >= x.back()) {
      out[g] = y.back();
      continue;
    }
    const std::size_t seg =
        static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) - 1;
    const double h = x[seg + 1] - x[seg];
    const double a = (x[seg + 1] - t) / h;
    const double b = (t - x[seg]) / h;
    out[g] = a * y[seg] + b * y[seg + 1] +
             ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0;
  }
  return out;
}

std::vector<double> model_grid() {
  std::vector<double> g(kGridLength);
  for (int i = 0; i < kGridLength; ++i) g[i] = kGridStart + i;
  return g;
}

std::vector<double> normalize_intensity(const std::vector<double>& v, bool* warned) {
  if (warned) *warned = false;
  for (double x : v)
    if (!std::isfinite(x)) throw DataError("normalize: non-finite intensity");
  if (v.empty()) return v;
  const double m = *std::max_element(v.begin(), v.end());
  if (m <= 0.0) {
    if (warned) *warned = true;
    return v;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / m;
  return out;
}

ModelInput preprocess_pipeline(const RawSpectrum& raw, BaselineMode mode) {
  const RawSpectrum flat = subtract_linear_baseline(raw, mode);
  const std::vector<double> resampled = spline_resample(flat, model_grid());
  ModelInput in;
  in.intensity = normalize_intensity(resampled, &in.degenerate);
  return in;
}

}  // namespace ramcnn
