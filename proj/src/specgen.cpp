#include "ramcnn/specgen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ramcnn/errors.hpp"

namespace ramcnn {

namespace {

void validate_peak(const PeakSpec& p, int length) {
  if (!(p.fwhm > 0.0)) throw DataError("peak: fwhm must be > 0");
  if (!(p.amplitude > 0.0)) throw DataError("peak: amplitude must be > 0");
  if (p.position < 0.0 || p.position > length - 1)
    throw DataError("peak: position " + std::to_string(p.position) + " outside grid 0.." +
                    std::to_string(length - 1));
}

void add_lorentzian(std::vector<double>& intensity, const PeakSpec& p) {
  const double half = p.fwhm / 2.0;
  for (std::size_t x = 0; x < intensity.size(); ++x) {
    const double d = (static_cast<double>(x) - p.position) / half;
    intensity[x] += p.amplitude / (1.0 + d * d);
  }
}

std::vector<double> channel_grid(int length) {
  std::vector<double> g(length);
  for (int i = 0; i < length; ++i) g[i] = i;
  return g;
}

double max_intensity(const std::vector<double>& v) {
  return *std::max_element(v.begin(), v.end());
}

void max_normalize(std::vector<double>& v) {
  const double m = max_intensity(v);
  if (m > 0.0)
    for (auto& x : v) x /= m;
}

}  // namespace

std::vector<double> onehot(int index, int n) {
  if (index < 0 || index >= n) throw DataError("onehot: index out of range");
  std::vector<double> v(n, 0.0);
  v[index] = 1.0;
  return v;
}

int label_index(const std::vector<double>& onehot_label) {
  int idx = -1;
  for (std::size_t i = 0; i < onehot_label.size(); ++i) {
    if (onehot_label[i] == 1.0) {
      if (idx >= 0) throw DataError("label is not one-hot");
      idx = static_cast<int>(i);
    } else if (onehot_label[i] != 0.0) {
      throw DataError("label is not one-hot");
    }
  }
  if (idx < 0) throw DataError("label is not one-hot");
  return idx;
}

Spectrum lorentzian(const PeakSpec& peak, int length) {
  if (length < 1) throw DataError("lorentzian: length must be >= 1");
  validate_peak(peak, length);
  Spectrum s{channel_grid(length), std::vector<double>(length, 0.0)};
  add_lorentzian(s.intensity, peak);
  return s;
}

Spectrum add_white_noise(const Spectrum& s, double fraction, Rng& rng) {
  if (fraction < 0.0) throw DataError("add_white_noise: fraction must be >= 0");
  Spectrum out = s;
  const double bound = fraction * max_intensity(s.intensity);
  for (auto& v : out.intensity) v += uniform_real(rng, -bound, bound);
  return out;
}

LabeledDataset gen_peak_dataset(const std::vector<double>& positions, int per_class,
                                int length, double fwhm, double noise, Rng& rng) {
  return gen_common_peak_dataset(positions, per_class, 0, length, fwhm, noise, rng);
}

LabeledDataset gen_common_peak_dataset(const std::vector<double>& positions, int per_class,
                                       int n_random_peaks, int length, double fwhm,
                                       double noise, Rng& rng, const CommonPeakOptions& opts) {
  const int n_classes = static_cast<int>(positions.size());
  if (n_classes < 1) throw DataError("gen dataset: need at least one peak position");
  if (per_class < 1) throw DataError("gen dataset: per_class must be >= 1");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    validate_peak({positions[i], fwhm, 1.0}, length);
    for (std::size_t j = i + 1; j < positions.size(); ++j)
      if (positions[i] == positions[j]) throw DataError("gen dataset: duplicate peak positions");
  }

  const double excl = opts.exclusion_fwhm_mult * fwhm;
  auto excluded = [&](double x) {
    for (double p : positions)
      if (std::abs(x - p) < excl) return true;
    return false;
  };

  LabeledDataset ds;
  ds.n_classes = n_classes;
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      SampleMeta meta;
      meta.label = c;
      meta.defined_peaks.push_back({positions[c], fwhm, 1.0});
      Spectrum s{channel_grid(length), std::vector<double>(length, 0.0)};
      add_lorentzian(s.intensity, meta.defined_peaks[0]);
      for (int r = 0; r < n_random_peaks; ++r) {
        double pos;
        int attempts = 0;
        do {
          pos = uniform_real(rng, 0.0, length - 1.0);
          if (++attempts > 10000)
            throw DataError("gen dataset: exclusion zones leave no room for random peaks");
        } while (excluded(pos));
        PeakSpec p{pos, fwhm, uniform_real(rng, opts.random_amp_lo, opts.random_amp_hi)};
        meta.random_peaks.push_back(p);
        add_lorentzian(s.intensity, p);
      }
      if (noise > 0.0) s = add_white_noise(s, noise, rng);
      ds.spectra.push_back(std::move(s));
      ds.labels.push_back(onehot(c, n_classes));
      ds.meta.push_back(std::move(meta));
    }
  }
  return ds;
}

PureLibrary gen_pure_library(int n_classes, int length, Rng& rng, const LibraryOptions& opts) {
  if (n_classes < 2) throw DataError("gen_pure_library: n_classes must be >= 2");
  if (length < 4) throw DataError("gen_pure_library: length too small");

  // Reserve the strongest-peak position of every class first, pairwise
  // separated so classes stay distinguishable.
  std::vector<double> main_positions;
  for (int c = 0; c < n_classes; ++c) {
    double pos;
    int attempts = 0;
    bool ok;
    do {
      pos = uniform_real(rng, opts.edge_margin, length - 1.0 - opts.edge_margin);
      ok = true;
      for (double q : main_positions)
        if (std::abs(pos - q) < opts.min_main_separation) ok = false;
      if (++attempts > 100000)
        throw DataError("gen_pure_library: cannot place " + std::to_string(n_classes) +
                        " separated strongest peaks on a grid of " + std::to_string(length));
    } while (!ok);
    main_positions.push_back(pos);
  }

  PureLibrary lib;
  for (int c = 0; c < n_classes; ++c) {
    std::vector<PeakSpec> peaks;
    peaks.push_back({main_positions[c], uniform_real(rng, opts.fwhm_lo, opts.fwhm_hi),
                     uniform_real(rng, opts.main_amp_lo, opts.main_amp_hi)});
    const int n_peaks = static_cast<int>(uniform_int(rng, opts.peaks_lo, opts.peaks_hi));
    for (int i = 1; i < n_peaks; ++i)
      peaks.push_back({uniform_real(rng, opts.edge_margin, length - 1.0 - opts.edge_margin),
                       uniform_real(rng, opts.fwhm_lo, opts.fwhm_hi),
                       uniform_real(rng, opts.amp_lo, opts.amp_hi)});
    Spectrum s{channel_grid(length), std::vector<double>(length, 0.0)};
    for (const auto& p : peaks) add_lorentzian(s.intensity, p);
    max_normalize(s.intensity);
    lib.spectra.push_back(std::move(s));
    lib.peaks.push_back(std::move(peaks));
  }
  return lib;
}

Spectrum mix_spectra(const Spectrum& base, const Spectrum& other, double ratio) {
  if (base.grid.size() != other.grid.size() || base.grid != other.grid)
    throw DimensionError("mix_spectra: spectra are on different grids");
  if (!(ratio > 0.0)) throw DataError("mix_spectra: ratio must be > 0");
  Spectrum out = base;
  for (std::size_t i = 0; i < out.intensity.size(); ++i)
    out.intensity[i] += ratio * other.intensity[i];
  max_normalize(out.intensity);
  return out;
}

LabeledDataset gen_mixture_dataset(const PureLibrary& library, int mixes_per_pair, Rng& rng,
                                   double ratio_lo, double ratio_hi) {
  const int n = static_cast<int>(library.spectra.size());
  if (n < 2) throw DataError("gen_mixture_dataset: need at least two pure spectra");
  if (mixes_per_pair < 1) throw DataError("gen_mixture_dataset: mixes_per_pair must be >= 1");
  if (!(ratio_lo > 0.0 && ratio_hi >= ratio_lo))
    throw DataError("gen_mixture_dataset: invalid ratio range");

  LabeledDataset ds;
  ds.n_classes = n;
  for (int base = 0; base < n; ++base) {
    for (int other = 0; other < n; ++other) {
      if (other == base) continue;
      for (int m = 0; m < mixes_per_pair; ++m) {
        const double ratio = uniform_real(rng, ratio_lo, ratio_hi);
        ds.spectra.push_back(mix_spectra(library.spectra[base], library.spectra[other], ratio));
        ds.labels.push_back(onehot(base, n));
        SampleMeta meta;
        meta.label = base;
        meta.base_class = base;
        meta.other_class = other;
        meta.mix_ratio = ratio;
        ds.meta.push_back(std::move(meta));
      }
    }
  }
  return ds;
}

}  // namespace ramcnn
