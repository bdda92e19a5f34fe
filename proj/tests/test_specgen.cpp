#include "ramcnn/specgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "ramcnn/errors.hpp"
#include "testutil.hpp"

using namespace ramcnn;

TEST_CASE("lorentzian: peak value, half maximum, symmetry") {
  const Spectrum s = lorentzian({500.0, 4.0, 1.0}, 1024);
  CHECK(s.intensity[500] == doctest::Approx(1.0));
  CHECK(s.intensity[498] == doctest::Approx(0.5));  // x0 - FWHM/2
  CHECK(s.intensity[502] == doctest::Approx(0.5));  // x0 + FWHM/2
  CHECK(s.intensity[498] == doctest::Approx(s.intensity[502]));
  CHECK(s.grid.size() == 1024);
  CHECK(s.grid[10] == 10.0);

  // Half-maximum identity holds for every generated peak.
  for (double fwhm : {2.0, 4.0, 16.0}) {
    const Spectrum t = lorentzian({300.0, fwhm, 2.5}, 1024);
    CHECK(t.intensity[300] == doctest::Approx(2.5));
    CHECK(t.intensity[static_cast<int>(300 + fwhm / 2)] == doctest::Approx(1.25));
  }
}

TEST_CASE("add_white_noise: bound and determinism") {
  const Spectrum clean = lorentzian({100.0, 4.0, 1.0}, 512);
  Rng rng(1);
  const Spectrum same = add_white_noise(clean, 0.0, rng);
  CHECK(same.intensity == clean.intensity);

  Rng r1(7), r2(7);
  const Spectrum a = add_white_noise(clean, 0.025, r1);
  const Spectrum b = add_white_noise(clean, 0.025, r2);
  CHECK(a.intensity == b.intensity);
  for (std::size_t i = 0; i < a.intensity.size(); ++i)
    CHECK(std::abs(a.intensity[i] - clean.intensity[i]) <= 0.025);
}

TEST_CASE("gen_peak_dataset: the 4.1 recipe gives 60 labeled spectra") {
  Rng rng(3);
  const LabeledDataset ds = gen_peak_dataset({100, 500, 1000}, 20, 1024, 4.0, 0.025, rng);
  CHECK(ds.spectra.size() == 60);
  CHECK(ds.n_classes == 3);
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    CHECK(ds.labels[i].size() == 3);
    double sum = 0;
    for (double v : ds.labels[i]) sum += v;
    CHECK(sum == 1.0);
    CHECK(label_index(ds.labels[i]) == static_cast<int>(i) / 20);
  }
}

TEST_CASE("gen_peak_dataset: noise-free spectra are pure Lorentzians") {
  Rng rng(4);
  const LabeledDataset ds = gen_peak_dataset({10, 40}, 1, 64, 4.0, 0.0, rng);
  const Spectrum pure = lorentzian({10.0, 4.0, 1.0}, 64);
  CHECK(ds.spectra[0].intensity == pure.intensity);
}

TEST_CASE("gen_common_peak_dataset: 300 spectra, meta matches the generator") {
  Rng rng(5);
  const LabeledDataset ds =
      gen_common_peak_dataset({100, 500, 1000}, 100, 3, 1024, 4.0, 0.025, rng);
  CHECK(ds.spectra.size() == 300);
  for (const auto& m : ds.meta) {
    CHECK(m.random_peaks.size() == 3);
    for (const auto& p : m.random_peaks) {
      // Outside the exclusion zone of every defined peak.
      for (double defined : {100.0, 500.0, 1000.0})
        CHECK(std::abs(p.position - defined) >= 3 * 4.0);
      CHECK(p.amplitude >= 0.5);
      CHECK(p.amplitude <= 1.0);
    }
  }
}

TEST_CASE("gen_common_peak_dataset: spectra reproduce from their own meta") {
  Rng rng(6);
  const LabeledDataset ds = gen_common_peak_dataset({30, 90}, 2, 3, 128, 4.0, 0.0, rng);
  for (std::size_t i = 0; i < ds.spectra.size(); ++i) {
    std::vector<double> rebuilt(128, 0.0);
    auto add = [&](const PeakSpec& p) {
      for (int x = 0; x < 128; ++x) {
        const double d = (x - p.position) / (p.fwhm / 2.0);
        rebuilt[x] += p.amplitude / (1.0 + d * d);
      }
    };
    for (const auto& p : ds.meta[i].defined_peaks) add(p);
    for (const auto& p : ds.meta[i].random_peaks) add(p);
    for (int x = 0; x < 128; ++x)
      CHECK(rebuilt[x] == doctest::Approx(ds.spectra[i].intensity[x]).epsilon(1e-12));
  }
}

TEST_CASE("gen_common_peak_dataset with zero random peaks reduces to gen_peak_dataset") {
  Rng r1(9), r2(9);
  const LabeledDataset a = gen_common_peak_dataset({20, 60}, 3, 0, 100, 4.0, 0.025, r1);
  const LabeledDataset b = gen_peak_dataset({20, 60}, 3, 100, 4.0, 0.025, r2);
  for (std::size_t i = 0; i < a.spectra.size(); ++i)
    CHECK(a.spectra[i].intensity == b.spectra[i].intensity);
}

TEST_CASE("gen_pure_library: normalized, deterministic, distinct strongest peaks") {
  Rng r1(11), r2(11);
  const PureLibrary a = gen_pure_library(20, 1451, r1);
  const PureLibrary b = gen_pure_library(20, 1451, r2);
  CHECK(a.spectra.size() == 20);
  for (int c = 0; c < 20; ++c) {
    CHECK(a.spectra[c].intensity == b.spectra[c].intensity);
    const double m = *std::max_element(a.spectra[c].intensity.begin(),
                                       a.spectra[c].intensity.end());
    CHECK(m == doctest::Approx(1.0));
    CHECK(a.peaks[c].size() >= 4);
    CHECK(a.peaks[c].size() <= 8);
    // Entry 0 is the designated strongest peak.
    for (std::size_t i = 1; i < a.peaks[c].size(); ++i)
      CHECK(a.peaks[c][0].amplitude > a.peaks[c][i].amplitude);
  }
  for (int c = 0; c < 20; ++c)
    for (int d = c + 1; d < 20; ++d)
      CHECK(std::abs(a.peaks[c][0].position - a.peaks[d][0].position) >= 40.0);
}

TEST_CASE("mix_spectra: self-mix is identity after normalization") {
  const Spectrum base = lorentzian({50.0, 6.0, 1.0}, 256);
  const Spectrum mixed = mix_spectra(base, base, 0.37);
  for (std::size_t i = 0; i < base.intensity.size(); ++i)
    CHECK(mixed.intensity[i] == doctest::Approx(base.intensity[i]));
}

TEST_CASE("mix_spectra: weighted sum then max-normalization") {
  Spectrum base = lorentzian({40.0, 4.0, 1.0}, 128);
  Spectrum other = lorentzian({90.0, 4.0, 1.0}, 128);
  const double ratio = 0.45;
  const Spectrum mixed = mix_spectra(base, other, ratio);
  std::vector<double> expected(128);
  double m = 0;
  for (int x = 0; x < 128; ++x) {
    expected[x] = base.intensity[x] + ratio * other.intensity[x];
    m = std::max(m, expected[x]);
  }
  for (int x = 0; x < 128; ++x)
    CHECK(mixed.intensity[x] == doctest::Approx(expected[x] / m));
  CHECK(*std::max_element(mixed.intensity.begin(), mixed.intensity.end()) ==
        doctest::Approx(1.0));
}

TEST_CASE("mix_spectra rejects mismatched grids and zero ratio") {
  const Spectrum a = lorentzian({10.0, 4.0, 1.0}, 64);
  const Spectrum b = lorentzian({10.0, 4.0, 1.0}, 65);
  CHECK_THROWS_AS(mix_spectra(a, b, 0.3), DimensionError);
  CHECK_THROWS_AS(mix_spectra(a, a, 0.0), DataError);
}

TEST_CASE("gen_mixture_dataset: counts, labels, and ratio range") {
  Rng lib_rng(13);
  const PureLibrary lib = gen_pure_library(20, 1451, lib_rng);
  Rng rng(14);
  const LabeledDataset ds = gen_mixture_dataset(lib, 5, rng);
  CHECK(ds.spectra.size() == 1900);  // 95 per class, 20 classes
  std::vector<int> per_class(20, 0);
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    CHECK(ds.labels[i].size() == 20);
    per_class[label_index(ds.labels[i])] += 1;
    CHECK(ds.meta[i].mix_ratio >= 0.1);
    CHECK(ds.meta[i].mix_ratio <= 0.5);
    CHECK(ds.meta[i].base_class != ds.meta[i].other_class);
    CHECK(ds.meta[i].base_class == label_index(ds.labels[i]));
  }
  for (int c = 0; c < 20; ++c) CHECK(per_class[c] == 95);

  Rng lib2(15);
  const PureLibrary two = gen_pure_library(2, 256, lib2);
  Rng rng2(16);
  CHECK(gen_mixture_dataset(two, 1, rng2).spectra.size() == 2);
}

TEST_CASE("generators are deterministic functions of the seed") {
  Rng r1(77), r2(77);
  const auto a = gen_common_peak_dataset({100, 500, 1000}, 4, 3, 1024, 4.0, 0.025, r1);
  const auto b = gen_common_peak_dataset({100, 500, 1000}, 4, 3, 1024, 4.0, 0.025, r2);
  for (std::size_t i = 0; i < a.spectra.size(); ++i)
    CHECK(a.spectra[i].intensity == b.spectra[i].intensity);
}
