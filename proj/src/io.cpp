#include "ramcnn/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ramcnn/errors.hpp"
#include "ramcnn/preprocess.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ramcnn {

void write_text_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    if (!out.good()) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string hexfloat(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_double(const std::string& s, const char* what) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || (end && *end != '\0'))
    throw DataError(std::string("cannot parse ") + what + ": '" + s + "'");
  return v;
}

json peaks_to_json(const std::vector<PeakSpec>& peaks) {
  json arr = json::array();
  for (const auto& p : peaks)
    arr.push_back({{"position", p.position}, {"fwhm", p.fwhm}, {"amplitude", p.amplitude}});
  return arr;
}

std::vector<PeakSpec> peaks_from_json(const json& arr) {
  std::vector<PeakSpec> peaks;
  for (const auto& j : arr)
    peaks.push_back({j.at("position").get<double>(), j.at("fwhm").get<double>(),
                     j.at("amplitude").get<double>()});
  return peaks;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void write_dataset_bundle(const fs::path& dir, const DatasetBundle& bundle) {
  const LabeledDataset& ds = bundle.dataset;
  if (ds.spectra.empty()) throw DataError("dataset bundle: nothing to write");
  fs::create_directories(dir);

  const std::size_t length = ds.spectra.front().intensity.size();
  std::ostringstream spectra;
  spectra << "id";
  for (std::size_t i = 0; i < length; ++i) spectra << ",v" << i;
  spectra << "\n";
  for (std::size_t r = 0; r < ds.spectra.size(); ++r) {
    if (ds.spectra[r].intensity.size() != length)
      throw DimensionError("dataset bundle: ragged spectra");
    spectra << r;
    for (double v : ds.spectra[r].intensity) spectra << ',' << format_double(v);
    spectra << "\n";
  }
  write_text_atomic(dir / "spectra.csv", spectra.str());

  std::ostringstream labels;
  labels << "id,class\n";
  for (std::size_t r = 0; r < ds.spectra.size(); ++r) {
    const int cls = ds.labels[r].empty() ? -1 : label_index(ds.labels[r]);
    labels << r << ',' << cls << "\n";
  }
  write_text_atomic(dir / "labels.csv", labels.str());

  json meta;
  meta["n_classes"] = ds.n_classes;
  meta["length"] = length;
  meta["grid_start"] = bundle.grid_start;
  meta["seed"] = bundle.seed;
  meta["recipe"] = bundle.recipe;
  json items = json::array();
  for (const auto& m : ds.meta) {
    json item;
    item["label"] = m.label;
    item["defined_peaks"] = peaks_to_json(m.defined_peaks);
    item["random_peaks"] = peaks_to_json(m.random_peaks);
    if (m.base_class >= 0) {
      item["base_class"] = m.base_class;
      item["other_class"] = m.other_class;
      item["mix_ratio"] = m.mix_ratio;
    }
    items.push_back(std::move(item));
  }
  meta["items"] = std::move(items);
  if (bundle.library) {
    json lib;
    json traces = json::array();
    for (const auto& s : bundle.library->spectra) traces.push_back(s.intensity);
    lib["spectra"] = std::move(traces);
    json peaks = json::array();
    for (const auto& p : bundle.library->peaks) peaks.push_back(peaks_to_json(p));
    lib["peaks"] = std::move(peaks);
    meta["library"] = std::move(lib);
  }
  write_text_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

DatasetBundle read_dataset_bundle(const fs::path& dir) {
  json meta;
  try {
    meta = json::parse(read_text(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw DataError("corrupt meta.json in " + dir.string() + ": " + e.what());
  }

  DatasetBundle bundle;
  bundle.grid_start = meta.at("grid_start").get<double>();
  bundle.seed = meta.at("seed").get<std::uint64_t>();
  bundle.recipe = meta.value("recipe", "");
  const std::size_t length = meta.at("length").get<std::size_t>();
  LabeledDataset& ds = bundle.dataset;
  ds.n_classes = meta.at("n_classes").get<int>();

  std::vector<double> grid(length);
  for (std::size_t i = 0; i < length; ++i) grid[i] = bundle.grid_start + static_cast<double>(i);

  // spectra.csv
  {
    std::istringstream in(read_text(dir / "spectra.csv"));
    std::string line;
    std::getline(in, line);  // header
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != length + 1)
        throw DataError("spectra.csv line " + std::to_string(lineno) + ": expected " +
                        std::to_string(length + 1) + " fields, got " +
                        std::to_string(fields.size()));
      Spectrum s;
      s.grid = grid;
      s.intensity.reserve(length);
      for (std::size_t i = 1; i < fields.size(); ++i)
        s.intensity.push_back(parse_double(fields[i], "intensity"));
      ds.spectra.push_back(std::move(s));
    }
  }

  // labels.csv
  {
    std::istringstream in(read_text(dir / "labels.csv"));
    std::string line;
    std::getline(in, line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != 2)
        throw DataError("labels.csv line " + std::to_string(lineno) + ": expected id,class");
      const int cls = static_cast<int>(parse_double(fields[1], "class index"));
      ds.labels.push_back(cls < 0 ? std::vector<double>{} : onehot(cls, ds.n_classes));
    }
  }
  if (ds.labels.size() != ds.spectra.size())
    throw DataError("dataset bundle: labels.csv row count does not match spectra.csv");

  for (const auto& j : meta.at("items")) {
    SampleMeta m;
    m.label = j.at("label").get<int>();
    m.defined_peaks = peaks_from_json(j.at("defined_peaks"));
    m.random_peaks = peaks_from_json(j.at("random_peaks"));
    m.base_class = j.value("base_class", -1);
    m.other_class = j.value("other_class", -1);
    m.mix_ratio = j.value("mix_ratio", 0.0);
    ds.meta.push_back(std::move(m));
  }
  if (ds.meta.size() != ds.spectra.size())
    throw DataError("dataset bundle: meta item count does not match spectra.csv");

  if (meta.contains("library")) {
    PureLibrary lib;
    for (const auto& trace : meta["library"].at("spectra")) {
      Spectrum s;
      s.grid = grid;
      s.intensity = trace.get<std::vector<double>>();
      lib.spectra.push_back(std::move(s));
    }
    for (const auto& p : meta["library"].at("peaks")) lib.peaks.push_back(peaks_from_json(p));
    bundle.library = std::move(lib);
  }
  return bundle;
}

std::vector<NamedRawSpectrum> read_spectrum_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  const bool has_id = header.size() == 3 && header[2] == "spectrum_id";
  // "contribution" keeps emitted map CSVs re-ingestible.
  const bool value_col = header.size() >= 2 &&
                         (header[1] == "intensity" || header[1] == "contribution");
  if (!(header.size() == 2 || has_id) || header[0] != "wavenumber" || !value_col)
    throw DataError(path.string() + " line 1: expected header wavenumber,intensity[,spectrum_id]");

  std::vector<NamedRawSpectrum> result;
  auto spectrum_for = [&](const std::string& id) -> NamedRawSpectrum& {
    for (auto& s : result)
      if (s.id == id) return s;
    result.push_back({id, {}});
    return result.back();
  };

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError(path.string() + " line " + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " fields");
    double w, v;
    try {
      w = parse_double(fields[0], "wavenumber");
      v = parse_double(fields[1], "intensity");
    } catch (const DataError& e) {
      throw DataError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
    auto& s = spectrum_for(has_id ? fields[2] : std::string("0"));
    if (!s.raw.wavenumber.empty() && w <= s.raw.wavenumber.back())
      throw DataError(path.string() + " line " + std::to_string(lineno) +
                      ": wavenumbers not strictly increasing");
    s.raw.wavenumber.push_back(w);
    s.raw.counts.push_back(v);
  }
  if (result.empty()) throw DataError(path.string() + ": no data rows");
  return result;
}

void write_spectrum_csv(const fs::path& path, const std::vector<NamedRawSpectrum>& spectra) {
  std::ostringstream out;
  const bool with_id = spectra.size() > 1;
  out << (with_id ? "wavenumber,intensity,spectrum_id\n" : "wavenumber,intensity\n");
  for (const auto& s : spectra)
    for (std::size_t i = 0; i < s.raw.wavenumber.size(); ++i) {
      out << format_double(s.raw.wavenumber[i]) << ',' << format_double(s.raw.counts[i]);
      if (with_id) out << ',' << s.id;
      out << "\n";
    }
  write_text_atomic(path, out.str());
}

namespace {

json hex_array(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(hexfloat(x));
  return arr;
}

std::vector<double> from_hex_array(const json& arr, std::size_t expected, const char* what) {
  if (arr.size() != expected)
    throw DataError(std::string("checkpoint: ") + what + " has " + std::to_string(arr.size()) +
                    " values, expected " + std::to_string(expected));
  std::vector<double> v;
  v.reserve(arr.size());
  for (const auto& j : arr) v.push_back(parse_double(j.get<std::string>(), what));
  return v;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  json j;
  j["format_version"] = ckpt.format_version;

  json arch;
  arch["input_length"] = p.arch.input_length;
  json blocks = json::array();
  for (const auto& b : p.arch.conv_blocks) blocks.push_back({b.filters, b.size});
  arch["conv_blocks"] = std::move(blocks);
  arch["fc1_width"] = p.arch.fc1_width;
  arch["dropout_keep"] = p.arch.dropout_keep;
  arch["n_classes"] = p.arch.n_classes;
  arch["leaky_alpha"] = p.arch.leaky_alpha;
  j["arch"] = std::move(arch);

  json conv = json::array();
  for (const auto& bank : p.conv) {
    json b;
    b["shape"] = {bank.out_channels, bank.in_channels, bank.size};
    b["weights"] = hex_array(bank.weights);
    b["bias"] = hex_array(bank.bias);
    conv.push_back(std::move(b));
  }
  json params;
  params["conv"] = std::move(conv);
  auto dense_json = [](const DenseWeights& d) {
    json b;
    b["shape"] = {d.in_dim, d.out_dim};
    b["weights"] = hex_array(d.weights);
    b["bias"] = hex_array(d.bias);
    return b;
  };
  params["fc1"] = dense_json(p.fc1);
  params["fc2"] = dense_json(p.fc2);
  j["params"] = std::move(params);

  json train;
  train["learning_rate"] = ckpt.train_config.learning_rate;
  train["epochs"] = ckpt.train_config.epochs;
  train["batch_size"] = ckpt.train_config.batch_size;
  train["adam_beta1"] = ckpt.train_config.adam_beta1;
  train["adam_beta2"] = ckpt.train_config.adam_beta2;
  train["adam_eps"] = ckpt.train_config.adam_eps;
  train["seed"] = ckpt.train_config.seed;
  train["kfold"] = ckpt.train_config.kfold;
  j["train"] = std::move(train);

  j["created"] = ckpt.created;
  write_text_atomic(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.format_version = j.at("format_version").get<int>();
    if (ckpt.format_version != kCheckpointVersion)
      throw DataError("checkpoint " + path.string() + ": unsupported format_version " +
                      std::to_string(ckpt.format_version));

    ArchConfig arch;
    const json& a = j.at("arch");
    arch.input_length = a.at("input_length").get<int>();
    arch.conv_blocks.clear();
    for (const auto& b : a.at("conv_blocks"))
      arch.conv_blocks.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
    arch.fc1_width = a.at("fc1_width").get<int>();
    arch.dropout_keep = a.at("dropout_keep").get<double>();
    arch.n_classes = a.at("n_classes").get<int>();
    arch.leaky_alpha = a.at("leaky_alpha").get<double>();
    validate_arch(arch);

    ModelParams& p = ckpt.params;
    p.arch = arch;
    const json& params = j.at("params");
    const json& conv = params.at("conv");
    if (conv.size() != arch.conv_blocks.size())
      throw DataError("checkpoint: conv bank count does not match arch");
    int in_ch = 1;
    for (std::size_t b = 0; b < conv.size(); ++b) {
      const auto shape = conv[b].at("shape").get<std::vector<int>>();
      if (shape.size() != 3 || shape[0] != arch.conv_blocks[b].filters || shape[1] != in_ch ||
          shape[2] != arch.conv_blocks[b].size)
        throw DataError("checkpoint: conv bank " + std::to_string(b) +
                        " shape does not match arch");
      ConvFilterBank bank(shape[0], shape[1], shape[2]);
      bank.weights = from_hex_array(conv[b].at("weights"),
                                    static_cast<std::size_t>(shape[0]) * shape[1] * shape[2],
                                    "conv weights");
      bank.bias = from_hex_array(conv[b].at("bias"), shape[0], "conv bias");
      p.conv.push_back(std::move(bank));
      in_ch = shape[0];
    }
    auto load_dense = [&](const json& d, int in_dim, int out_dim, const char* what) {
      const auto shape = d.at("shape").get<std::vector<int>>();
      if (shape.size() != 2 || shape[0] != in_dim || shape[1] != out_dim)
        throw DataError(std::string("checkpoint: ") + what + " shape does not match arch");
      DenseWeights dense(in_dim, out_dim);
      dense.weights = from_hex_array(d.at("weights"),
                                     static_cast<std::size_t>(in_dim) * out_dim, what);
      dense.bias = from_hex_array(d.at("bias"), out_dim, what);
      return dense;
    };
    p.fc1 = load_dense(params.at("fc1"), flattened_dim(arch), arch.fc1_width, "fc1");
    p.fc2 = load_dense(params.at("fc2"), arch.fc1_width, arch.n_classes, "fc2");

    const json& t = j.at("train");
    ckpt.train_config.learning_rate = t.at("learning_rate").get<double>();
    ckpt.train_config.epochs = t.at("epochs").get<int>();
    ckpt.train_config.batch_size = t.at("batch_size").get<int>();
    ckpt.train_config.adam_beta1 = t.at("adam_beta1").get<double>();
    ckpt.train_config.adam_beta2 = t.at("adam_beta2").get<double>();
    ckpt.train_config.adam_eps = t.at("adam_eps").get<double>();
    ckpt.train_config.seed = t.at("seed").get<std::uint64_t>();
    ckpt.train_config.kfold = t.at("kfold").get<int>();
    ckpt.created = j.at("created").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return ckpt;
}

void write_map_csv(const fs::path& path, const std::vector<double>& grid,
                   const ContributionMap& map) {
  if (grid.size() != map.values.size())
    throw DimensionError("map csv: grid/values length mismatch");
  std::ostringstream out;
  out << "wavenumber,contribution\n";
  for (std::size_t i = 0; i < grid.size(); ++i)
    out << format_double(grid[i]) << ',' << format_double(map.values[i]) << "\n";
  write_text_atomic(path, out.str());
}

namespace {

std::string polyline(const std::vector<double>& grid, const std::vector<double>& values,
                     double vmin, double vmax, const char* color) {
  const double W = 860.0, H = 240.0, X0 = 30.0, Y0 = 30.0;
  const double gmin = grid.front(), gmax = grid.back();
  std::ostringstream p;
  p << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double px = X0 + (grid[i] - gmin) / (gmax - gmin) * W;
    const double py = Y0 + H - (values[i] - vmin) / (vmax - vmin) * H;
    p << format_double(px) << ',' << format_double(py) << ' ';
  }
  p << "\"/>\n";
  return p.str();
}

}  // namespace

void write_overlay_svg(const fs::path& path, const std::vector<double>& grid,
                       const std::vector<double>& spectrum, const ContributionMap& map,
                       const std::string& title) {
  if (grid.size() != spectrum.size() || grid.size() != map.values.size())
    throw DimensionError("overlay svg: length mismatch");

  std::vector<double> spec_norm = normalize_intensity(spectrum);
  double mmax = 0.0;
  for (double v : map.values) mmax = std::max(mmax, std::abs(v));
  std::vector<double> map_norm(map.values.size());
  for (std::size_t i = 0; i < map.values.size(); ++i)
    map_norm[i] = mmax > 0.0 ? map.values[i] / mmax : 0.0;

  double vmin = 0.0, vmax = 1.0;
  for (double v : map_norm) vmin = std::min(vmin, v);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"920\" height=\"320\" "
         "viewBox=\"0 0 920 320\">\n";
  svg << "<text x=\"30\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" << title
      << "</text>\n";
  if (vmin < 0.0) {
    const double zero_y = 30.0 + 240.0 - (0.0 - vmin) / (vmax - vmin) * 240.0;
    svg << "<line x1=\"30\" x2=\"890\" y1=\"" << format_double(zero_y) << "\" y2=\""
        << format_double(zero_y) << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
  }
  svg << polyline(grid, spec_norm, vmin, vmax, "#000000");
  svg << polyline(grid, map_norm, vmin, vmax, "#1f5fbf");
  svg << "<text x=\"30\" y=\"300\" font-family=\"sans-serif\" font-size=\"11\">"
      << format_double(grid.front()) << "</text>\n";
  svg << "<text x=\"860\" y=\"300\" font-family=\"sans-serif\" font-size=\"11\">"
      << format_double(grid.back()) << "</text>\n";
  svg << "</svg>\n";
  write_text_atomic(path, svg.str());
}

}  // namespace ramcnn
