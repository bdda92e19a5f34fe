#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "ramcnn/errors.hpp"
#include "ramcnn/experiments.hpp"
#include "ramcnn/io.hpp"
#include "ramcnn/model.hpp"
#include "ramcnn/optim.hpp"
#include "ramcnn/preprocess.hpp"
#include "ramcnn/specgen.hpp"
#include "ramcnn/viz.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ramcnn;

namespace {

// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct SynthOpts {
  std::string kind;
  std::string out;
  std::vector<double> positions = {100, 500, 1000};
  int per_class = 20;
  int length = 1024;
  double fwhm = 4.0;
  double noise = 0.025;
  int random_peaks = 3;
  int classes = 20;
  int per_pair = 5;
  std::uint64_t seed = 1;
};

int cmd_synth(const SynthOpts& o) {
  Rng rng(o.seed);
  DatasetBundle bundle;
  bundle.seed = o.seed;
  if (o.kind == "peaks") {
    bundle.dataset =
        gen_peak_dataset(o.positions, o.per_class, o.length, o.fwhm, o.noise, rng);
    bundle.recipe = "peaks";
  } else if (o.kind == "common") {
    bundle.dataset = gen_common_peak_dataset(o.positions, o.per_class, o.random_peaks,
                                             o.length, o.fwhm, o.noise, rng);
    bundle.recipe = "common";
  } else if (o.kind == "library") {
    const PureLibrary lib = gen_pure_library(o.classes, o.length, rng);
    LabeledDataset ds;
    ds.n_classes = o.classes;
    for (int c = 0; c < o.classes; ++c) {
      ds.spectra.push_back(lib.spectra[c]);
      ds.labels.push_back(onehot(c, o.classes));
      SampleMeta m;
      m.label = c;
      m.defined_peaks = lib.peaks[c];
      ds.meta.push_back(std::move(m));
    }
    bundle.dataset = std::move(ds);
    bundle.library = lib;
    bundle.recipe = "library";
  } else if (o.kind == "mixture") {
    const PureLibrary lib = gen_pure_library(o.classes, o.length, rng);
    bundle.dataset = gen_mixture_dataset(lib, o.per_pair, rng);
    bundle.library = lib;
    bundle.recipe = "mixture";
  } else {
    std::cerr << "unknown --kind '" << o.kind << "'\n";
    return kExitUsage;
  }
  write_dataset_bundle(o.out, bundle);
  std::cout << "wrote " << bundle.dataset.spectra.size() << " spectra to " << o.out << "\n";
  return 0;
}

struct IngestOpts {
  std::string csv;
  std::string labels;
  std::string out;
};

int cmd_ingest(const IngestOpts& o) {
  const auto raws = read_spectrum_csv(o.csv);

  std::map<std::string, int> label_by_id;
  int n_classes = 0;
  if (!o.labels.empty()) {
    std::istringstream in(read_text(o.labels));
    std::string line;
    std::getline(in, line);  // header id,class
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw DataError(o.labels + ": expected id,class rows");
      const int cls = std::stoi(line.substr(comma + 1));
      label_by_id[line.substr(0, comma)] = cls;
      n_classes = std::max(n_classes, cls + 1);
    }
  }

  DatasetBundle bundle;
  bundle.grid_start = kGridStart;
  bundle.recipe = "ingest:" + o.csv;
  bundle.dataset.n_classes = n_classes;
  for (const auto& named : raws) {
    if (named.raw.wavenumber.front() > kGridStart || named.raw.wavenumber.back() < kGridEnd)
      std::cerr << "warning: spectrum '" << named.id << "' covers "
                << named.raw.wavenumber.front() << ".." << named.raw.wavenumber.back()
                << " cm^-1; channels outside clamp to the nearest sample\n";
    const ModelInput in = preprocess_pipeline(named.raw);
    if (in.degenerate)
      std::cerr << "warning: spectrum '" << named.id << "' is all-nonpositive, not normalized\n";
    Spectrum s;
    s.grid = model_grid();
    s.intensity = in.intensity;
    bundle.dataset.spectra.push_back(std::move(s));
    SampleMeta m;
    if (auto it = label_by_id.find(named.id); it != label_by_id.end()) {
      m.label = it->second;
      bundle.dataset.labels.push_back(onehot(it->second, n_classes));
    } else {
      bundle.dataset.labels.push_back({});
    }
    bundle.dataset.meta.push_back(std::move(m));
  }
  write_dataset_bundle(o.out, bundle);
  std::cout << "ingested " << bundle.dataset.spectra.size() << " spectra to " << o.out << "\n";
  return 0;
}

struct TrainOpts {
  std::string data;
  std::string out;
  std::string history;
  double lr = 1e-4;
  int epochs = 100;
  int batch = 32;
  int kfold = 0;
  int filters = 64;
  int filter_size = 8;
  int fc1 = 128;
  double dropout_keep = 0.5;
  std::uint64_t seed = 1;
};

int cmd_train(const TrainOpts& o) {
  const DatasetBundle bundle = read_dataset_bundle(o.data);
  const LabeledDataset& ds = bundle.dataset;
  if (ds.n_classes < 2)
    throw DataError("dataset at " + o.data + " has no class labels; cannot train");

  ArchConfig arch;
  arch.input_length = static_cast<int>(ds.spectra.front().intensity.size());
  arch.conv_blocks = {{o.filters, o.filter_size}, {o.filters, o.filter_size}};
  arch.fc1_width = o.fc1;
  arch.dropout_keep = o.dropout_keep;
  arch.n_classes = ds.n_classes;

  TrainConfig tc;
  tc.learning_rate = o.lr;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.seed = o.seed;
  tc.kfold = o.kfold;

  json hist;
  if (o.kfold >= 2) {
    const KFoldResult cv = kfold_cv(arch, ds, tc);
    hist["fold_accuracy"] = cv.fold_accuracy;
    hist["mean_fold_accuracy"] = cv.mean_accuracy();
    hist["pooled_accuracy"] = cv.pooled_accuracy;
    std::cout << "fold accuracies:";
    for (double a : cv.fold_accuracy) std::cout << ' ' << a;
    std::cout << "  (mean " << cv.mean_accuracy() << ", pooled " << cv.pooled_accuracy << ")\n";
  }

  const TrainResult result = train(arch, ds, tc);
  Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.train_config = tc;
  ckpt.created = timestamp_now();
  save_checkpoint(o.out, ckpt);

  hist["mean_loss"] = result.history.mean_loss;
  hist["train_accuracy"] = result.history.train_accuracy;
  if (!o.history.empty()) write_text_atomic(o.history, hist.dump(2) + "\n");

  std::cout << "trained " << o.epochs << " epochs; final loss "
            << result.history.mean_loss.back() << ", train accuracy "
            << result.history.train_accuracy.back() << "; checkpoint " << o.out << "\n";
  return 0;
}

struct VisualizeOpts {
  std::string checkpoint;
  std::string data;
  std::string spectrum_csv;
  int index = -1;  // -1 = all spectra in the dataset
  int target_class = -1;  // -1 = predicted class
  std::string method = "fcmap";
  std::string out;
};

int cmd_visualize(const VisualizeOpts& o) {
  if (o.data.empty() && o.spectrum_csv.empty())
    throw DataError("visualize needs --data or --spectrum");
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const ModelParams& params = ckpt.params;

  std::vector<Spectrum> spectra;
  std::vector<std::string> names;
  if (!o.data.empty()) {
    const DatasetBundle bundle = read_dataset_bundle(o.data);
    for (std::size_t i = 0; i < bundle.dataset.spectra.size(); ++i) {
      if (o.index >= 0 && static_cast<int>(i) != o.index) continue;
      spectra.push_back(bundle.dataset.spectra[i]);
      names.push_back("spectrum" + std::to_string(i));
    }
  } else {
    for (const auto& named : read_spectrum_csv(o.spectrum_csv)) {
      const ModelInput in = preprocess_pipeline(named.raw);
      Spectrum s;
      s.grid = model_grid();
      s.intensity = in.intensity;
      spectra.push_back(std::move(s));
      names.push_back(named.id);
    }
  }
  if (spectra.empty()) throw DataError("no spectra selected for visualization");
  if (o.target_class >= params.arch.n_classes)
    throw DataError("--class " + std::to_string(o.target_class) + " out of range for a " +
                    std::to_string(params.arch.n_classes) + "-class model");

  fs::create_directories(o.out);
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    const auto& s = spectra[i];
    if (static_cast<int>(s.intensity.size()) != params.arch.input_length)
      throw DimensionError("spectrum length " + std::to_string(s.intensity.size()) +
                           " does not match checkpoint input length " +
                           std::to_string(params.arch.input_length));
    const int c =
        o.target_class >= 0 ? o.target_class : predict(params, s.intensity).label;
    const ContributionMap map = o.method == "gradcam"
                                    ? gradcam_map(params, s.intensity, c)
                                    : fc_contribution_map(params, s.intensity, c);
    const fs::path csv = fs::path(o.out) / (names[i] + "_" + o.method + ".csv");
    const fs::path svg = fs::path(o.out) / (names[i] + "_" + o.method + ".svg");
    write_map_csv(csv, s.grid, map);
    write_overlay_svg(svg, s.grid, s.intensity, map,
                      o.method + " for class " + std::to_string(c));
    std::cout << csv.string() << "\n" << svg.string() << "\n";
  }
  return 0;
}

struct ExperimentOpts {
  std::string name;
  std::string out;
  std::uint64_t seed = 1;
  int classes = 8;
  int epochs = -1;  // -1 = experiment default
  double lr = -1.0;
  int per_class = -1;
  std::vector<int> sizes;
  std::vector<int> counts;
};

int cmd_experiment(const ExperimentOpts& o) {
  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);
  if (o.name == "filter_sweep") {
    FilterSweepConfig cfg;
    cfg.seed = o.seed;
    if (o.epochs > 0) cfg.epochs = o.epochs;
    if (o.lr > 0) cfg.lr = o.lr;
    if (o.per_class > 0) cfg.per_class = o.per_class;
    if (!o.sizes.empty()) cfg.sizes = o.sizes;
    if (!o.counts.empty()) cfg.counts = o.counts;
    const auto result = run_filter_sweep(cfg, out_dir);
    for (const auto& pt : result.size_sweep)
      std::cout << "size " << pt.filter_size << " x" << pt.filter_count << ": sharpness "
                << pt.sharpness << " ch, accuracy " << pt.test_accuracy << "\n";
    for (const auto& pt : result.count_sweep)
      std::cout << "count " << pt.filter_count << " size " << pt.filter_size << ": sharpness "
                << pt.sharpness << " ch, accuracy " << pt.test_accuracy << "\n";
  } else if (o.name == "common_peak") {
    CommonPeakConfig cfg;
    cfg.seed = o.seed;
    if (o.epochs > 0) cfg.epochs = o.epochs;
    if (o.lr > 0) cfg.lr = o.lr;
    if (o.per_class > 0) cfg.per_class_train = o.per_class;
    const auto result = run_common_peak(cfg, out_dir);
    std::cout << "test accuracy " << result.test_accuracy << "\n"
              << "fc map localization: " << result.fc_localization_fraction * 100
              << "% of (spectrum, random-peak) pairs\n"
              << "gradcam random-peak highlight: "
              << result.gradcam_random_highlight_fraction * 100 << "% of spectra\n";
  } else if (o.name == "mixture") {
    MixtureConfig cfg;
    cfg.seed = o.seed;
    cfg.classes = o.classes;
    if (o.epochs > 0) cfg.epochs = o.epochs;
    if (o.lr > 0) cfg.lr = o.lr;
    const auto result = run_mixture(cfg, out_dir);
    std::cout << "fold accuracies:";
    for (double a : result.fold_accuracy) std::cout << ' ' << a;
    std::cout << " (mean " << result.mean_fold_accuracy << ")\n"
              << "correlation property: " << result.correlation_fraction * 100
              << "% of test mixtures\n"
              << "negative peak at contaminant: " << result.negative_peak_count << " of "
              << result.test_count << " mixtures\n";
  } else {
    std::cerr << "unknown experiment '" << o.name
              << "' (expected filter_sweep, common_peak, or mixture)\n";
    return kExitUsage;
  }
  std::cout << "report: " << (out_dir / "report.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"1D CNN for Raman-like spectra with gradient contribution maps"};
  app.require_subcommand(1);

  SynthOpts synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset bundle");
  synth_cmd->add_option("--kind", synth.kind, "peaks|common|library|mixture")->required();
  synth_cmd->add_option("--out", synth.out, "output dataset directory")->required();
  synth_cmd->add_option("--positions", synth.positions, "defined peak channels")->delimiter(',');
  synth_cmd->add_option("--per-class", synth.per_class, "spectra per class");
  synth_cmd->add_option("--length", synth.length, "channels per spectrum");
  synth_cmd->add_option("--fwhm", synth.fwhm, "peak FWHM in channels");
  synth_cmd->add_option("--noise", synth.noise, "white noise fraction of max");
  synth_cmd->add_option("--random-peaks", synth.random_peaks, "random peaks per spectrum");
  synth_cmd->add_option("--classes", synth.classes, "classes (library/mixture)");
  synth_cmd->add_option("--per-pair", synth.per_pair, "mixtures per class pair");
  synth_cmd->add_option("--seed", synth.seed, "RNG seed");

  IngestOpts ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "preprocess measured spectra from CSV");
  ingest_cmd->add_option("--csv", ingest.csv, "wavenumber,intensity[,spectrum_id] CSV")
      ->required();
  ingest_cmd->add_option("--labels", ingest.labels, "optional id,class CSV");
  ingest_cmd->add_option("--out", ingest.out, "output dataset directory")->required();

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a model on a dataset bundle");
  train_cmd->add_option("--data", train_opts.data, "dataset directory")->required();
  train_cmd->add_option("--out", train_opts.out, "checkpoint path")->required();
  train_cmd->add_option("--history", train_opts.history, "write history JSON here");
  train_cmd->add_option("--lr", train_opts.lr, "learning rate");
  train_cmd->add_option("--epochs", train_opts.epochs, "training epochs");
  train_cmd->add_option("--batch", train_opts.batch, "mini-batch size");
  train_cmd->add_option("--kfold", train_opts.kfold, "k-fold cross validation (0 = off)");
  train_cmd->add_option("--filters", train_opts.filters, "conv filters per layer");
  train_cmd->add_option("--filter-size", train_opts.filter_size, "conv filter size");
  train_cmd->add_option("--fc1", train_opts.fc1, "FC1 width");
  train_cmd->add_option("--dropout-keep", train_opts.dropout_keep, "dropout keep probability");
  train_cmd->add_option("--seed", train_opts.seed, "RNG seed");

  VisualizeOpts viz;
  auto* viz_cmd = app.add_subcommand("visualize", "emit contribution maps (CSV + SVG)");
  viz_cmd->add_option("--checkpoint", viz.checkpoint, "checkpoint path")->required();
  auto* viz_data = viz_cmd->add_option("--data", viz.data, "dataset directory");
  auto* viz_spec = viz_cmd->add_option("--spectrum", viz.spectrum_csv, "raw spectrum CSV");
  viz_cmd->add_option("--index", viz.index, "only this dataset index");
  viz_cmd->add_option("--class", viz.target_class, "target class (default: predicted)");
  viz_cmd->add_option("--method", viz.method, "gradcam|fcmap")
      ->check(CLI::IsMember({"gradcam", "fcmap"}));
  viz_cmd->add_option("--out", viz.out, "output directory")->required();
  viz_data->excludes(viz_spec);

  ExperimentOpts exp;
  auto* exp_cmd = app.add_subcommand("experiment", "run a full experiment pipeline");
  exp_cmd->add_option("name", exp.name, "filter_sweep|common_peak|mixture")->required();
  exp_cmd->add_option("--out", exp.out, "output directory")->required();
  exp_cmd->add_option("--seed", exp.seed, "RNG seed");
  exp_cmd->add_option("--classes", exp.classes, "mixture classes");
  exp_cmd->add_option("--epochs", exp.epochs, "override training epochs");
  exp_cmd->add_option("--lr", exp.lr, "override learning rate");
  exp_cmd->add_option("--per-class", exp.per_class, "override spectra per class");
  exp_cmd->add_option("--sizes", exp.sizes, "filter sizes to sweep")->delimiter(',');
  exp_cmd->add_option("--counts", exp.counts, "filter counts to sweep")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (ingest_cmd->parsed()) return cmd_ingest(ingest);
    if (train_cmd->parsed()) return cmd_train(train_opts);
    if (viz_cmd->parsed()) return cmd_visualize(viz);
    if (exp_cmd->parsed()) return cmd_experiment(exp);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
