#include "ramcnn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "ramcnn/errors.hpp"
#include "ramcnn/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ramcnn {

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw DimensionError("pearson_correlation: length mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

namespace {

std::pair<int, int> window_bounds(std::size_t size, double center, double window) {
  int lo = static_cast<int>(std::ceil(center - window));
  int hi = static_cast<int>(std::floor(center + window));
  lo = std::max(lo, 0);
  hi = std::min(hi, static_cast<int>(size) - 1);
  if (lo > hi) throw DataError("map window is outside the trace");
  return {lo, hi};
}

}  // namespace

double map_window_max(const std::vector<double>& values, double center, double window) {
  const auto [lo, hi] = window_bounds(values.size(), center, window);
  double m = values[lo];
  for (int i = lo + 1; i <= hi; ++i) m = std::max(m, values[i]);
  return m;
}

double map_window_min(const std::vector<double>& values, double center, double window) {
  const auto [lo, hi] = window_bounds(values.size(), center, window);
  double m = values[lo];
  for (int i = lo + 1; i <= hi; ++i) m = std::min(m, values[i]);
  return m;
}

double halfmax_lobe_width(const std::vector<double>& values, double center, double window) {
  const auto [lo, hi] = window_bounds(values.size(), center, window);
  int peak = lo;
  for (int i = lo + 1; i <= hi; ++i)
    if (values[i] > values[peak]) peak = i;
  const double top = values[peak];
  if (!(top > 0.0)) return std::numeric_limits<double>::infinity();
  const double half = top / 2.0;

  const int n = static_cast<int>(values.size());
  double left = 0.0;
  for (int i = peak; i >= 0; --i) {
    if (values[i] < half) {
      // Linear interpolation between samples i and i+1 for the crossing.
      left = i + (half - values[i]) / (values[i + 1] - values[i]);
      break;
    }
    if (i == 0) left = 0.0;
  }
  double right = n - 1.0;
  for (int i = peak; i < n; ++i) {
    if (values[i] < half) {
      right = i - (half - values[i]) / (values[i - 1] - values[i]);
      break;
    }
    if (i == n - 1) right = n - 1.0;
  }
  return right - left;
}

double beta_closed_form_max_rel_err(const ModelParams& params,
                                    const std::vector<double>& input) {
  Rng rng(0);
  const auto fwd = forward(params, input, Mode::infer, rng);
  double sum_a = 0.0;
  for (double a : fwd.cache.flat) sum_a += a;
  double worst = 0.0;
  for (int c = 0; c < params.arch.n_classes; ++c) {
    const std::vector<double> beta = fc_beta(params, fwd.cache, c);
    for (int l = 0; l < params.fc1.out_dim; ++l) {
      const double expected = params.fc2.w(l, c) * sum_a;
      const double denom = std::max({std::abs(expected), std::abs(beta[l]), 1e-300});
      worst = std::max(worst, std::abs(beta[l] - expected) / denom);
    }
  }
  return worst;
}

PeakSpec distinctive_strongest_peak(const PureLibrary& lib, int base, int other,
                                    double min_sep) {
  const auto& other_peaks = lib.peaks.at(other);
  const auto& base_peaks = lib.peaks.at(base);
  std::vector<PeakSpec> sorted = other_peaks;
  std::sort(sorted.begin(), sorted.end(),
            [](const PeakSpec& a, const PeakSpec& b) { return a.amplitude > b.amplitude; });
  for (const auto& p : sorted) {
    bool clear = true;
    for (const auto& q : base_peaks)
      if (std::abs(p.position - q.position) < min_sep) clear = false;
    if (clear) return p;
  }
  return sorted.front();
}

// --- filter sweep ---------------------------------------------------------------

namespace {

ArchConfig sweep_arch(const FilterSweepConfig& cfg, int filter_size, int filter_count) {
  ArchConfig arch;
  arch.input_length = cfg.length;
  arch.conv_blocks = {{filter_count, filter_size}, {filter_count, filter_size}};
  arch.n_classes = static_cast<int>(cfg.positions.size());
  return arch;
}

struct SweepEval {
  double sharpness = 0.0;
  double accuracy = 0.0;
  ModelParams params;
};

SweepEval sweep_train_and_measure(const FilterSweepConfig& cfg, int filter_size,
                                  int filter_count, std::uint64_t seed) {
  const ArchConfig arch = sweep_arch(cfg, filter_size, filter_count);
  Rng data_rng(mix_seed(seed, 0xDA7Au));
  const LabeledDataset train_set = gen_peak_dataset(cfg.positions, cfg.per_class, cfg.length,
                                                    cfg.fwhm, cfg.noise, data_rng);
  TrainConfig tc;
  tc.learning_rate = cfg.lr;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  tc.seed = seed;
  auto trained = train(arch, train_set, tc);

  Rng test_rng(mix_seed(seed, 0x7E57u));
  const LabeledDataset test_set = gen_peak_dataset(cfg.positions, cfg.eval_spectra, cfg.length,
                                                   cfg.fwhm, cfg.noise, test_rng);
  SweepEval ev;
  ev.accuracy = evaluate(trained.params, test_set);

  const double center = cfg.positions.at(cfg.sharpness_class);
  std::vector<double> widths;
  for (std::size_t i = 0; i < test_set.spectra.size(); ++i) {
    if (label_index(test_set.labels[i]) != cfg.sharpness_class) continue;
    const auto map =
        fc_contribution_map(trained.params, test_set.spectra[i].intensity, cfg.sharpness_class);
    widths.push_back(halfmax_lobe_width(map.values, center, cfg.lobe_window));
  }
  std::sort(widths.begin(), widths.end());
  ev.sharpness = widths[widths.size() / 2];
  ev.params = std::move(trained.params);
  return ev;
}

}  // namespace

double sweep_sharpness(const FilterSweepConfig& cfg, int filter_size, int filter_count,
                       std::uint64_t seed) {
  return sweep_train_and_measure(cfg, filter_size, filter_count, seed).sharpness;
}

FilterSweepResult run_filter_sweep(const FilterSweepConfig& cfg,
                                   const std::optional<fs::path>& out_dir) {
  FilterSweepResult result;
  json runs = json::array();

  auto run_point = [&](int size, int count, std::vector<SweepPoint>& into) {
    auto ev = sweep_train_and_measure(cfg, size, count, cfg.seed);
    SweepPoint pt{size, count, ev.sharpness, ev.accuracy, {}};
    if (out_dir) {
      Rng rng(mix_seed(cfg.seed, 0x3A9u));
      LabeledDataset probe = gen_peak_dataset(cfg.positions, 1, cfg.length, cfg.fwhm,
                                              cfg.noise, rng);
      const int c = cfg.sharpness_class;
      const auto& spectrum = probe.spectra[c];
      const auto map = fc_contribution_map(ev.params, spectrum.intensity, c);
      std::ostringstream stem;
      stem << "fcmap_size" << size << "_count" << count;
      const fs::path csv = *out_dir / (stem.str() + ".csv");
      const fs::path svg = *out_dir / (stem.str() + ".svg");
      write_map_csv(csv, spectrum.grid, map);
      write_overlay_svg(svg, spectrum.grid, spectrum.intensity, map,
                        "fc map, filter size " + std::to_string(size) + ", " +
                            std::to_string(count) + " filters");
      pt.files = {csv.string(), svg.string()};
    }
    json run;
    run["filter_size"] = size;
    run["filter_count"] = count;
    run["sharpness_halfmax_width_ch"] = pt.sharpness;
    run["test_accuracy"] = pt.test_accuracy;
    run["files"] = pt.files;
    runs.push_back(std::move(run));
    into.push_back(std::move(pt));
  };

  for (int size : cfg.sizes) run_point(size, cfg.base_count, result.size_sweep);
  for (int count : cfg.counts) run_point(cfg.base_size, count, result.count_sweep);

  if (out_dir) {
    json report;
    report["experiment"] = "filter_sweep";
    report["sharpness_metric"] =
        "half-maximum width (channels) of the fc contribution map lobe around the "
        "500 ch peak; smaller means the map focuses more tightly on the peak";
    report["config"] = {{"positions", cfg.positions},  {"length", cfg.length},
                        {"fwhm", cfg.fwhm},            {"noise", cfg.noise},
                        {"per_class", cfg.per_class},  {"lr", cfg.lr},
                        {"epochs", cfg.epochs},        {"batch", cfg.batch},
                        {"seed", cfg.seed},            {"base_count", cfg.base_count},
                        {"base_size", cfg.base_size}};
    report["runs"] = std::move(runs);
    const fs::path path = *out_dir / "report.json";
    write_text_atomic(path, report.dump(2) + "\n");
    result.files.push_back(path.string());
    for (const auto& lists : {&result.size_sweep, &result.count_sweep})
      for (const auto& pt : *lists)
        result.files.insert(result.files.end(), pt.files.begin(), pt.files.end());
  }
  return result;
}

// --- common peak ------------------------------------------------------------------

CommonPeakResult run_common_peak(const CommonPeakConfig& cfg,
                                 const std::optional<fs::path>& out_dir) {
  ArchConfig arch;
  arch.input_length = cfg.length;
  arch.conv_blocks = {{cfg.filters, cfg.filter_size}, {cfg.filters, cfg.filter_size}};
  arch.n_classes = static_cast<int>(cfg.positions.size());

  Rng train_rng(mix_seed(cfg.seed, 0xC031u));
  const LabeledDataset train_set =
      gen_common_peak_dataset(cfg.positions, cfg.per_class_train, cfg.n_random_peaks,
                              cfg.length, cfg.fwhm, cfg.noise, train_rng);
  Rng test_rng(mix_seed(cfg.seed, 0xC032u));
  const LabeledDataset test_set =
      gen_common_peak_dataset(cfg.positions, cfg.per_class_test, cfg.n_random_peaks,
                              cfg.length, cfg.fwhm, cfg.noise, test_rng);

  TrainConfig tc;
  tc.learning_rate = cfg.lr;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  tc.seed = cfg.seed;
  auto trained = train(arch, train_set, tc);

  CommonPeakResult result;
  result.history = std::move(trained.history);
  result.test_accuracy = evaluate(trained.params, test_set);
  result.test_spectra = static_cast<int>(test_set.spectra.size());
  result.beta_max_rel_err =
      beta_closed_form_max_rel_err(trained.params, test_set.spectra.front().intensity);

  int pairs_pass = 0, pair_count = 0, gradcam_pass = 0;
  for (std::size_t i = 0; i < test_set.spectra.size(); ++i) {
    const int c = label_index(test_set.labels[i]);
    const auto& meta = test_set.meta[i];
    const auto fcmap = fc_contribution_map(trained.params, test_set.spectra[i].intensity, c);
    const double at_defined =
        map_window_max(fcmap.values, meta.defined_peaks.front().position, cfg.peak_window);
    for (const auto& rp : meta.random_peaks) {
      ++pair_count;
      if (at_defined > map_window_max(fcmap.values, rp.position, cfg.peak_window)) ++pairs_pass;
    }

    const auto cam = gradcam_map(trained.params, test_set.spectra[i].intensity, c);
    const double global_max = *std::max_element(cam.values.begin(), cam.values.end());
    double at_random = 0.0;
    for (const auto& rp : meta.random_peaks)
      at_random = std::max(at_random, map_window_max(cam.values, rp.position, cfg.peak_window));
    if (global_max > 0.0 && at_random >= 0.25 * global_max) ++gradcam_pass;
  }
  result.pair_count = pair_count;
  result.fc_localization_fraction = static_cast<double>(pairs_pass) / pair_count;
  result.gradcam_random_highlight_fraction =
      static_cast<double>(gradcam_pass) / static_cast<double>(test_set.spectra.size());

  if (out_dir) {
    json report;
    report["experiment"] = "common_peak";
    report["config"] = {{"positions", cfg.positions},
                        {"length", cfg.length},
                        {"fwhm", cfg.fwhm},
                        {"noise", cfg.noise},
                        {"per_class_train", cfg.per_class_train},
                        {"per_class_test", cfg.per_class_test},
                        {"n_random_peaks", cfg.n_random_peaks},
                        {"lr", cfg.lr},
                        {"epochs", cfg.epochs},
                        {"batch", cfg.batch},
                        {"seed", cfg.seed}};
    report["test_accuracy"] = result.test_accuracy;
    report["fc_localization_fraction"] = result.fc_localization_fraction;
    report["gradcam_random_highlight_fraction"] = result.gradcam_random_highlight_fraction;
    report["beta_max_rel_err"] = result.beta_max_rel_err;

    json files = json::array();
    const std::size_t n_emit = std::min<std::size_t>(3, test_set.spectra.size());
    for (std::size_t i = 0; i < n_emit; ++i) {
      const int c = label_index(test_set.labels[i]);
      for (const char* method : {"fcmap", "gradcam"}) {
        const ContributionMap map =
            std::string(method) == "fcmap"
                ? fc_contribution_map(trained.params, test_set.spectra[i].intensity, c)
                : gradcam_map(trained.params, test_set.spectra[i].intensity, c);
        std::ostringstream stem;
        stem << method << "_test" << i << "_class" << c;
        const fs::path csv = *out_dir / (stem.str() + ".csv");
        const fs::path svg = *out_dir / (stem.str() + ".svg");
        write_map_csv(csv, test_set.spectra[i].grid, map);
        write_overlay_svg(svg, test_set.spectra[i].grid, test_set.spectra[i].intensity, map,
                          std::string(method) + " for class " + std::to_string(c));
        files.push_back(csv.string());
        files.push_back(svg.string());
        result.files.push_back(csv.string());
        result.files.push_back(svg.string());
      }
    }
    report["files"] = std::move(files);
    const fs::path path = *out_dir / "report.json";
    write_text_atomic(path, report.dump(2) + "\n");
    result.files.push_back(path.string());
  }
  return result;
}

// --- mixture -----------------------------------------------------------------------

MixtureResult run_mixture(const MixtureConfig& cfg, const std::optional<fs::path>& out_dir) {
  ArchConfig arch;
  arch.input_length = cfg.length;
  arch.conv_blocks = {{cfg.filters, cfg.filter_size}, {cfg.filters, cfg.filter_size}};
  arch.n_classes = cfg.classes;

  Rng lib_rng(mix_seed(cfg.seed, 0x11Bu));
  const PureLibrary lib = gen_pure_library(cfg.classes, cfg.length, lib_rng, cfg.library);
  Rng train_rng(mix_seed(cfg.seed, 0x313u));
  const LabeledDataset train_set =
      gen_mixture_dataset(lib, cfg.mixes_per_pair, train_rng, cfg.ratio_lo, cfg.ratio_hi);
  Rng test_rng(mix_seed(cfg.seed, 0x314u));
  const LabeledDataset test_set =
      gen_mixture_dataset(lib, cfg.mixes_per_pair, test_rng, cfg.ratio_lo, cfg.ratio_hi);

  TrainConfig tc;
  tc.learning_rate = cfg.lr;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  tc.seed = cfg.seed;
  tc.kfold = cfg.kfold;

  MixtureResult result;
  if (cfg.kfold >= 2) {
    const KFoldResult cv = kfold_cv(arch, train_set, tc);
    result.fold_accuracy = cv.fold_accuracy;
    result.mean_fold_accuracy = cv.mean_accuracy();
    result.pooled_accuracy = cv.pooled_accuracy;
  }

  auto trained = train(arch, train_set, tc);
  result.final_history = std::move(trained.history);
  result.test_count = static_cast<int>(test_set.spectra.size());
  result.beta_max_rel_err =
      beta_closed_form_max_rel_err(trained.params, test_set.spectra.front().intensity);

  int corr_pass = 0;
  int first_negative = -1;
  for (std::size_t i = 0; i < test_set.spectra.size(); ++i) {
    const auto& meta = test_set.meta[i];
    const auto map =
        fc_contribution_map(trained.params, test_set.spectra[i].intensity, meta.base_class);
    const double corr_base =
        pearson_correlation(map.values, lib.spectra[meta.base_class].intensity);
    const double corr_other =
        pearson_correlation(map.values, lib.spectra[meta.other_class].intensity);
    if (corr_base > corr_other) ++corr_pass;

    const PeakSpec distinctive =
        distinctive_strongest_peak(lib, meta.base_class, meta.other_class);
    if (map_window_min(map.values, distinctive.position, cfg.peak_window) < 0.0) {
      ++result.negative_peak_count;
      if (first_negative < 0) first_negative = static_cast<int>(i);
    }
  }
  result.correlation_fraction = static_cast<double>(corr_pass) / result.test_count;

  if (out_dir) {
    json report;
    report["experiment"] = "mixture";
    report["config"] = {{"classes", cfg.classes},   {"length", cfg.length},
                        {"mixes_per_pair", cfg.mixes_per_pair},
                        {"ratio_lo", cfg.ratio_lo}, {"ratio_hi", cfg.ratio_hi},
                        {"lr", cfg.lr},             {"epochs", cfg.epochs},
                        {"batch", cfg.batch},       {"kfold", cfg.kfold},
                        {"seed", cfg.seed}};
    report["fold_accuracy"] = result.fold_accuracy;
    report["mean_fold_accuracy"] = result.mean_fold_accuracy;
    report["pooled_accuracy"] = result.pooled_accuracy;
    report["correlation_fraction"] = result.correlation_fraction;
    report["negative_peak_count"] = result.negative_peak_count;
    report["test_count"] = result.test_count;
    report["beta_max_rel_err"] = result.beta_max_rel_err;

    json files = json::array();
    std::vector<int> to_emit;
    if (first_negative >= 0) to_emit.push_back(first_negative);
    for (int i = 0; static_cast<int>(to_emit.size()) < 3 && i < result.test_count; ++i)
      if (i != first_negative) to_emit.push_back(i);
    for (int idx : to_emit) {
      const auto& meta = test_set.meta[idx];
      const auto map =
          fc_contribution_map(trained.params, test_set.spectra[idx].intensity, meta.base_class);
      std::ostringstream stem;
      stem << "fcmap_mix" << idx << "_base" << meta.base_class << "_other" << meta.other_class;
      const fs::path csv = *out_dir / (stem.str() + ".csv");
      const fs::path svg = *out_dir / (stem.str() + ".svg");
      write_map_csv(csv, test_set.spectra[idx].grid, map);
      write_overlay_svg(svg, test_set.spectra[idx].grid, test_set.spectra[idx].intensity, map,
                        "fc map, base " + std::to_string(meta.base_class) + " mixed with " +
                            std::to_string(meta.other_class) + " at ratio " +
                            format_double(meta.mix_ratio));
      files.push_back(csv.string());
      files.push_back(svg.string());
      result.files.push_back(csv.string());
      result.files.push_back(svg.string());
    }
    report["files"] = std::move(files);
    const fs::path path = *out_dir / "report.json";
    write_text_atomic(path, report.dump(2) + "\n");
    result.files.push_back(path.string());
  }
  return result;
}

}  // namespace ramcnn
