#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ramcnn/model.hpp"
#include "ramcnn/optim.hpp"
#include "ramcnn/preprocess.hpp"
#include "ramcnn/specgen.hpp"
#include "ramcnn/viz.hpp"

namespace ramcnn {

// Writes via a temp file in the same directory plus rename, so readers never
// observe partial files.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

// Shortest round-trip decimal formatting (std::to_chars).
std::string format_double(double v);

// --- dataset bundle: spectra.csv + labels.csv + meta.json --------------------

struct DatasetBundle {
  LabeledDataset dataset;
  double grid_start = 0.0;  // grid is grid_start + i, one unit per channel
  std::uint64_t seed = 0;
  std::string recipe;       // generator description for the metadata record
  std::optional<PureLibrary> library;  // mixture bundles carry their pure library
};

void write_dataset_bundle(const std::filesystem::path& dir, const DatasetBundle& bundle);
DatasetBundle read_dataset_bundle(const std::filesystem::path& dir);

// --- spectrum CSV: header wavenumber,intensity[,spectrum_id] -----------------

struct NamedRawSpectrum {
  std::string id;
  RawSpectrum raw;
};

// Parses one or more spectra; rows are grouped by spectrum_id (a file without
// the id column holds a single spectrum). Malformed rows raise DataError with
// 1-based line numbers.
std::vector<NamedRawSpectrum> read_spectrum_csv(const std::filesystem::path& path);
void write_spectrum_csv(const std::filesystem::path& path,
                        const std::vector<NamedRawSpectrum>& spectra);

// --- checkpoint ---------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int format_version = kCheckpointVersion;
  ModelParams params;
  TrainConfig train_config;
  std::string created;  // ISO timestamp, preserved across load/save round trips
};

// JSON container; weight arrays are hexadecimal float literals so that
// save -> load -> save is byte-identical.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// --- map emission -------------------------------------------------------------

// Two columns: wavenumber, contribution.
void write_map_csv(const std::filesystem::path& path, const std::vector<double>& grid,
                   const ContributionMap& map);

// Input spectrum (max-normalized, black) overlaid with the contribution map
// (scaled to its own max magnitude, blue), zero line when the map is signed.
void write_overlay_svg(const std::filesystem::path& path, const std::vector<double>& grid,
                       const std::vector<double>& spectrum, const ContributionMap& map,
                       const std::string& title);

}  // namespace ramcnn
