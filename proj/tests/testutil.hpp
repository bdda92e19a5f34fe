#pragma once

// Shared test helpers: independent brute-force oracles and a central
// finite-difference harness. Everything here must stay independent of the
// library's own computation paths.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ramcnn/ndcore.hpp"
#include "ramcnn/rng.hpp"

namespace testutil {

inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Naive same-padded convolution, nested loops only.
inline ramcnn::ChannelMap naive_conv1d(const ramcnn::ChannelMap& in,
                                       const ramcnn::ConvFilterBank& f) {
  const int left = (f.size - 1) / 2;
  ramcnn::ChannelMap out(f.out_channels, in.length);
  for (int ko = 0; ko < f.out_channels; ++ko)
    for (int x = 0; x < in.length; ++x) {
      double acc = f.bias[ko];
      for (int ki = 0; ki < f.in_channels; ++ki)
        for (int t = 0; t < f.size; ++t) {
          const int src = x + t - left;
          if (src >= 0 && src < in.length) acc += f.w(ko, ki, t) * in.at(ki, src);
        }
      out.at(ko, x) = acc;
    }
  return out;
}

// Naive dense layer, plain dot products.
inline std::vector<double> naive_fc(const std::vector<double>& x,
                                    const ramcnn::DenseWeights& d) {
  std::vector<double> y(d.out_dim);
  for (int j = 0; j < d.out_dim; ++j) {
    double acc = d.bias[j];
    for (int i = 0; i < d.in_dim; ++i) acc += d.w(i, j) * x[i];
    y[j] = acc;
  }
  return y;
}

// Central finite difference of a scalar-valued callable with respect to one
// entry of `x`.
template <typename F>
double central_diff(F&& f, std::vector<double>& x, std::size_t i, double h = 1e-6) {
  const double orig = x[i];
  x[i] = orig + h;
  const double fp = f();
  x[i] = orig - h;
  const double fm = f();
  x[i] = orig;
  return (fp - fm) / (2.0 * h);
}

inline std::vector<double> random_vector(ramcnn::Rng& rng, std::size_t n, double lo = -1.0,
                                         double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = ramcnn::uniform_real(rng, lo, hi);
  return v;
}

inline ramcnn::ChannelMap random_map(ramcnn::Rng& rng, int channels, int length,
                                     double lo = -1.0, double hi = 1.0) {
  ramcnn::ChannelMap m(channels, length);
  m.data = random_vector(rng, m.data.size(), lo, hi);
  return m;
}

}  // namespace testutil
