#pragma once

#include <cstdint>
#include <vector>

#include "ramcnn/rng.hpp"

namespace ramcnn {

// One intensity trace on an explicit, strictly increasing grid. For synthetic
// data the grid is the channel index 0..length-1; ingested spectra carry
// wavenumbers in cm^-1.
struct Spectrum {
  std::vector<double> grid;
  std::vector<double> intensity;
};

struct PeakSpec {
  double position = 0.0;   // channel (grid units)
  double fwhm = 4.0;       // full width at half maximum, channels
  double amplitude = 1.0;
};

// Generation record kept per sample so experiments can score maps against the
// ground truth that produced each spectrum.
struct SampleMeta {
  int label = -1;
  std::vector<PeakSpec> defined_peaks;
  std::vector<PeakSpec> random_peaks;
  int base_class = -1;     // mixtures only
  int other_class = -1;    // mixtures only
  double mix_ratio = 0.0;  // mixtures only
};

struct LabeledDataset {
  std::vector<Spectrum> spectra;
  std::vector<std::vector<double>> labels;  // one-hot, dimension n_classes
  std::vector<SampleMeta> meta;
  int n_classes = 0;
};

std::vector<double> onehot(int index, int n);
int label_index(const std::vector<double>& onehot_label);

// Noise-free Lorentzian on channels 0..length-1:
//   amplitude / (1 + ((x - x0) / (fwhm/2))^2)
Spectrum lorentzian(const PeakSpec& peak, int length);

// Adds an independent uniform draw in +-fraction * max(intensity) per channel.
Spectrum add_white_noise(const Spectrum& s, double fraction, Rng& rng);

// Single defined peak per class at the given positions, unit amplitude, plus
// white noise. Label index = position index.
LabeledDataset gen_peak_dataset(const std::vector<double>& positions, int per_class,
                                int length, double fwhm, double noise, Rng& rng);

struct CommonPeakOptions {
  double random_amp_lo = 0.5;
  double random_amp_hi = 1.0;
  double exclusion_fwhm_mult = 3.0;  // keep random peaks out of +-mult*fwhm around defined peaks
};

// Class-defined peak plus n_random_peaks extra Lorentzians per spectrum, at
// uniform positions outside the exclusion zones; the random peaks are recorded
// in each sample's meta.
LabeledDataset gen_common_peak_dataset(const std::vector<double>& positions, int per_class,
                                       int n_random_peaks, int length, double fwhm,
                                       double noise, Rng& rng,
                                       const CommonPeakOptions& opts = {});

struct LibraryOptions {
  int peaks_lo = 4;
  int peaks_hi = 8;
  double amp_lo = 0.2;
  double amp_hi = 0.8;
  double main_amp_lo = 0.85;   // the designated strongest peak draws above the rest
  double main_amp_hi = 1.0;
  double fwhm_lo = 4.0;
  double fwhm_hi = 12.0;
  double min_main_separation = 40.0;  // channels between strongest peaks of different classes
  double edge_margin = 20.0;
};

struct PureLibrary {
  std::vector<Spectrum> spectra;              // one max-normalized spectrum per class
  std::vector<std::vector<PeakSpec>> peaks;   // per class; entry 0 is the strongest peak
};

// Synthetic pure-component library: each class gets a handful of random peaks
// with its strongest peak at a position disjoint from every other class's.
PureLibrary gen_pure_library(int n_classes, int length, Rng& rng,
                             const LibraryOptions& opts = {});

// base + ratio * other, then max-normalized to 1.
Spectrum mix_spectra(const Spectrum& base, const Spectrum& other, double ratio);

// For every ordered (base, other) class pair, mixes_per_pair mixtures with
// independent ratios in [ratio_lo, ratio_hi]. Labels carry only the base class.
LabeledDataset gen_mixture_dataset(const PureLibrary& library, int mixes_per_pair, Rng& rng,
                                   double ratio_lo = 0.1, double ratio_hi = 0.5);

}  // namespace ramcnn
