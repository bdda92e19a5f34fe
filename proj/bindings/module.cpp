#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ramcnn/errors.hpp"
#include "ramcnn/experiments.hpp"
#include "ramcnn/io.hpp"
#include "ramcnn/model.hpp"
#include "ramcnn/optim.hpp"
#include "ramcnn/preprocess.hpp"
#include "ramcnn/specgen.hpp"
#include "ramcnn/viz.hpp"

namespace py = pybind11;
using namespace ramcnn;

PYBIND11_MODULE(_core, m) {
  m.doc() = "1D CNN for Raman-like spectra with gradient contribution maps";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<Spectrum>(m, "Spectrum")
      .def(py::init<>())
      .def_readwrite("grid", &Spectrum::grid)
      .def_readwrite("intensity", &Spectrum::intensity);

  py::class_<PeakSpec>(m, "PeakSpec")
      .def(py::init<double, double, double>(), py::arg("position"), py::arg("fwhm") = 4.0,
           py::arg("amplitude") = 1.0)
      .def_readwrite("position", &PeakSpec::position)
      .def_readwrite("fwhm", &PeakSpec::fwhm)
      .def_readwrite("amplitude", &PeakSpec::amplitude);

  py::class_<SampleMeta>(m, "SampleMeta")
      .def_readonly("label", &SampleMeta::label)
      .def_readonly("defined_peaks", &SampleMeta::defined_peaks)
      .def_readonly("random_peaks", &SampleMeta::random_peaks)
      .def_readonly("base_class", &SampleMeta::base_class)
      .def_readonly("other_class", &SampleMeta::other_class)
      .def_readonly("mix_ratio", &SampleMeta::mix_ratio);

  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def_readonly("spectra", &LabeledDataset::spectra)
      .def_readonly("labels", &LabeledDataset::labels)
      .def_readonly("meta", &LabeledDataset::meta)
      .def_readonly("n_classes", &LabeledDataset::n_classes)
      .def("__len__", [](const LabeledDataset& ds) { return ds.spectra.size(); });

  py::class_<PureLibrary>(m, "PureLibrary")
      .def_readonly("spectra", &PureLibrary::spectra)
      .def_readonly("peaks", &PureLibrary::peaks);

  py::class_<ConvSpec>(m, "ConvSpec")
      .def(py::init<int, int>(), py::arg("filters") = 64, py::arg("size") = 8)
      .def_readwrite("filters", &ConvSpec::filters)
      .def_readwrite("size", &ConvSpec::size);

  py::class_<ArchConfig>(m, "ArchConfig")
      .def(py::init<>())
      .def_readwrite("input_length", &ArchConfig::input_length)
      .def_readwrite("conv_blocks", &ArchConfig::conv_blocks)
      .def_readwrite("fc1_width", &ArchConfig::fc1_width)
      .def_readwrite("dropout_keep", &ArchConfig::dropout_keep)
      .def_readwrite("n_classes", &ArchConfig::n_classes)
      .def_readwrite("leaky_alpha", &ArchConfig::leaky_alpha);

  py::class_<ModelParams>(m, "ModelParams")
      .def_readonly("arch", &ModelParams::arch)
      .def("__repr__", [](const ModelParams& p) {
        return "<ModelParams input_length=" + std::to_string(p.arch.input_length) +
               " n_classes=" + std::to_string(p.arch.n_classes) + ">";
      });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("adam_beta1", &TrainConfig::adam_beta1)
      .def_readwrite("adam_beta2", &TrainConfig::adam_beta2)
      .def_readwrite("adam_eps", &TrainConfig::adam_eps)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("kfold", &TrainConfig::kfold);

  py::class_<TrainHistory>(m, "TrainHistory")
      .def_readonly("mean_loss", &TrainHistory::mean_loss)
      .def_readonly("train_accuracy", &TrainHistory::train_accuracy)
      .def_readonly("test_accuracy", &TrainHistory::test_accuracy);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("history", &TrainResult::history);

  py::class_<KFoldResult>(m, "KFoldResult")
      .def_readonly("fold_accuracy", &KFoldResult::fold_accuracy)
      .def_readonly("pooled_accuracy", &KFoldResult::pooled_accuracy)
      .def("mean_accuracy", &KFoldResult::mean_accuracy);

  py::enum_<MapKind>(m, "MapKind")
      .value("gradcam", MapKind::gradcam)
      .value("fc_map", MapKind::fc_map);

  py::class_<ContributionMap>(m, "ContributionMap")
      .def_readonly("values", &ContributionMap::values)
      .def_readonly("kind", &ContributionMap::kind)
      .def_readonly("target_class", &ContributionMap::target_class);

  py::class_<Prediction>(m, "Prediction")
      .def_readonly("probs", &Prediction::probs)
      .def_readonly("label", &Prediction::label);

  py::class_<RawSpectrum>(m, "RawSpectrum")
      .def(py::init<>())
      .def(py::init([](std::vector<double> w, std::vector<double> c) {
             return RawSpectrum{std::move(w), std::move(c)};
           }),
           py::arg("wavenumber"), py::arg("counts"))
      .def_readwrite("wavenumber", &RawSpectrum::wavenumber)
      .def_readwrite("counts", &RawSpectrum::counts);

  py::class_<ModelInput>(m, "ModelInput")
      .def_readonly("intensity", &ModelInput::intensity)
      .def_readonly("degenerate", &ModelInput::degenerate);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("format_version", &Checkpoint::format_version)
      .def_readonly("params", &Checkpoint::params)
      .def_readonly("train_config", &Checkpoint::train_config)
      .def_readonly("created", &Checkpoint::created);

  // generators
  m.def("lorentzian", &lorentzian, py::arg("peak"), py::arg("length"));
  m.def(
      "add_white_noise",
      [](const Spectrum& s, double fraction, std::uint64_t seed) {
        Rng rng(seed);
        return add_white_noise(s, fraction, rng);
      },
      py::arg("spectrum"), py::arg("fraction"), py::arg("seed"));
  m.def(
      "gen_peak_dataset",
      [](const std::vector<double>& positions, int per_class, int length, double fwhm,
         double noise, std::uint64_t seed) {
        Rng rng(seed);
        return gen_peak_dataset(positions, per_class, length, fwhm, noise, rng);
      },
      py::arg("positions"), py::arg("per_class"), py::arg("length"), py::arg("fwhm") = 4.0,
      py::arg("noise") = 0.025, py::arg("seed") = 1);
  m.def(
      "gen_common_peak_dataset",
      [](const std::vector<double>& positions, int per_class, int n_random_peaks, int length,
         double fwhm, double noise, std::uint64_t seed) {
        Rng rng(seed);
        return gen_common_peak_dataset(positions, per_class, n_random_peaks, length, fwhm,
                                       noise, rng);
      },
      py::arg("positions"), py::arg("per_class"), py::arg("n_random_peaks"), py::arg("length"),
      py::arg("fwhm") = 4.0, py::arg("noise") = 0.025, py::arg("seed") = 1);
  m.def(
      "gen_pure_library",
      [](int n_classes, int length, std::uint64_t seed) {
        Rng rng(seed);
        return gen_pure_library(n_classes, length, rng);
      },
      py::arg("n_classes"), py::arg("length"), py::arg("seed") = 1);
  m.def("mix_spectra", &mix_spectra, py::arg("base"), py::arg("other"), py::arg("ratio"));
  m.def(
      "gen_mixture_dataset",
      [](const PureLibrary& lib, int mixes_per_pair, std::uint64_t seed, double ratio_lo,
         double ratio_hi) {
        Rng rng(seed);
        return gen_mixture_dataset(lib, mixes_per_pair, rng, ratio_lo, ratio_hi);
      },
      py::arg("library"), py::arg("mixes_per_pair"), py::arg("seed") = 1,
      py::arg("ratio_lo") = 0.1, py::arg("ratio_hi") = 0.5);

  // preprocessing
  m.def("subtract_linear_baseline", &subtract_linear_baseline, py::arg("raw"),
        py::arg("mode") = BaselineMode::endpoints);
  py::enum_<BaselineMode>(m, "BaselineMode")
      .value("endpoints", BaselineMode::endpoints)
      .value("least_squares", BaselineMode::least_squares);
  m.def("spline_resample", &spline_resample, py::arg("raw"), py::arg("grid"));
  m.def("model_grid", &model_grid);
  m.def(
      "normalize_intensity",
      [](const std::vector<double>& v) { return normalize_intensity(v); }, py::arg("values"));
  m.def("preprocess_pipeline", &preprocess_pipeline, py::arg("raw"),
        py::arg("mode") = BaselineMode::endpoints);

  // model and training
  m.def("init_model", &init_model, py::arg("arch"), py::arg("seed"));
  m.def("train", &train, py::arg("arch"), py::arg("dataset"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("evaluate", &evaluate, py::arg("params"), py::arg("dataset"),
        py::call_guard<py::gil_scoped_release>());
  m.def("kfold_cv", &kfold_cv, py::arg("arch"), py::arg("dataset"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("predict", &predict, py::arg("params"), py::arg("input"));

  // visualization
  m.def("gradcam_map", &gradcam_map, py::arg("params"), py::arg("input"),
        py::arg("target_class"));
  m.def("fc_contribution_map", &fc_contribution_map, py::arg("params"), py::arg("input"),
        py::arg("target_class"));
  m.def("upsample_linear", &upsample_linear, py::arg("source"), py::arg("target_len"));

  // persistence
  m.def(
      "save_checkpoint",
      [](const std::filesystem::path& path, const ModelParams& params, const TrainConfig& cfg,
         const std::string& created) {
        save_checkpoint(path, Checkpoint{kCheckpointVersion, params, cfg, created});
      },
      py::arg("path"), py::arg("params"), py::arg("config") = TrainConfig{},
      py::arg("created") = "");
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.attr("__version__") = "0.1.0";
}
