#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ramcnn/optim.hpp"
#include "ramcnn/specgen.hpp"
#include "ramcnn/viz.hpp"

namespace ramcnn {

// --- shared metrics -----------------------------------------------------------

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);

// Largest map value within +-window samples of `center` (both in sample units).
double map_window_max(const std::vector<double>& values, double center, double window);
double map_window_min(const std::vector<double>& values, double center, double window);

// Width (in samples) of the map lobe around `center` at half its height: the
// lobe peak is the maximum within +-window, the edges are the half-height
// crossings found walking outward, sub-sample interpolated. Infinite when the
// lobe peak is not positive.
double halfmax_lobe_width(const std::vector<double>& values, double center, double window);

// Worst relative gap, over all classes, between backprop fc_beta and its
// closed form fc2_w[l][c] * sum(A). Guards the linear-FC1 assumption.
double beta_closed_form_max_rel_err(const ModelParams& params, const std::vector<double>& input);

// Strongest peak of class `other` that sits at least min_sep channels from
// every peak of class `base`; falls back to the overall strongest.
PeakSpec distinctive_strongest_peak(const PureLibrary& lib, int base, int other,
                                    double min_sep = 15.0);

// --- filter parameter sweep (simulated 3-peak spectra) -------------------------

struct FilterSweepConfig {
  std::vector<double> positions = {100.0, 500.0, 1000.0};
  int length = 1024;
  double fwhm = 4.0;
  double noise = 0.025;
  int per_class = 20;
  std::vector<int> sizes = {8, 16, 32, 64, 128};
  std::vector<int> counts = {8, 16, 64, 256};
  int base_count = 64;  // filter count held fixed in the size sweep
  int base_size = 8;    // filter size held fixed in the count sweep
  double lr = 1e-3;
  int epochs = 12;
  int batch = 32;
  std::uint64_t seed = 1;
  int eval_spectra = 5;      // sharpness = median over this many test spectra
  int sharpness_class = 1;   // class whose defined peak anchors the lobe
  double lobe_window = 50.0;
};

struct SweepPoint {
  int filter_size = 0;
  int filter_count = 0;
  double sharpness = 0.0;  // half-max lobe width, channels; smaller is sharper
  double test_accuracy = 0.0;
  std::vector<std::string> files;
};

struct FilterSweepResult {
  std::vector<SweepPoint> size_sweep;
  std::vector<SweepPoint> count_sweep;
  std::vector<std::string> files;
};

// Trains one model per grid point and measures how tightly the fc map focuses
// on the 500 ch peak.
FilterSweepResult run_filter_sweep(const FilterSweepConfig& cfg,
                                   const std::optional<std::filesystem::path>& out_dir);

// Sharpness of a single (size, count) configuration; used for the per-seed
// size-8 vs size-128 comparison.
double sweep_sharpness(const FilterSweepConfig& cfg, int filter_size, int filter_count,
                       std::uint64_t seed);

// --- common-peak extraction (3 defined + random peaks) -------------------------

struct CommonPeakConfig {
  std::vector<double> positions = {100.0, 500.0, 1000.0};
  int length = 1024;
  double fwhm = 4.0;
  double noise = 0.025;
  int per_class_train = 100;
  int per_class_test = 10;
  int n_random_peaks = 3;
  int filters = 64;
  int filter_size = 8;
  double lr = 1e-4;
  int epochs = 100;
  int batch = 32;
  std::uint64_t seed = 1;
  double peak_window = 2.0;  // +-channels when reading a map at a peak
};

struct CommonPeakResult {
  double test_accuracy = 0.0;
  // Fraction of (test spectrum, random peak) pairs where the fc map at the
  // spectrum's defined peak exceeds the fc map at the random peak.
  double fc_localization_fraction = 0.0;
  // Fraction of test spectra whose gradcam map reaches >= 25% of its global
  // max on at least one of the spectrum's random peaks.
  double gradcam_random_highlight_fraction = 0.0;
  double beta_max_rel_err = 0.0;
  int test_spectra = 0;
  int pair_count = 0;
  TrainHistory history;
  std::vector<std::string> files;
};

CommonPeakResult run_common_peak(const CommonPeakConfig& cfg,
                                 const std::optional<std::filesystem::path>& out_dir);

// --- mixture experiment (synthetic pure library) --------------------------------

struct MixtureConfig {
  int classes = 8;
  int length = 1451;
  int mixes_per_pair = 5;
  double ratio_lo = 0.1;
  double ratio_hi = 0.5;
  int filters = 64;
  int filter_size = 8;
  double lr = 1e-3;
  int epochs = 30;
  int batch = 32;
  int kfold = 5;
  std::uint64_t seed = 1;
  double peak_window = 2.0;
  LibraryOptions library;
};

struct MixtureResult {
  std::vector<double> fold_accuracy;
  double mean_fold_accuracy = 0.0;
  double pooled_accuracy = 0.0;
  // Fraction of test mixtures whose base-class fc map correlates better with
  // the base pure spectrum than with the contaminant's.
  double correlation_fraction = 0.0;
  // Test mixtures whose fc map goes negative at the contaminant's distinctive
  // strongest peak.
  int negative_peak_count = 0;
  int test_count = 0;
  double beta_max_rel_err = 0.0;
  TrainHistory final_history;
  std::vector<std::string> files;
};

MixtureResult run_mixture(const MixtureConfig& cfg,
                          const std::optional<std::filesystem::path>& out_dir);

}  // namespace ramcnn
