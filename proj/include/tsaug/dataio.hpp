#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tsaug {

enum class Normalization { raw, znorm };

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& text);

struct LabeledSeries {
  std::vector<double> values;
  std::size_t label = 0;  // class id in [0, K)
  std::string id;
};

struct SeriesDataset {
  std::string name;
  std::vector<LabeledSeries> series;
  std::size_t num_classes = 0;
  std::size_t length = 0;
  Normalization normalization = Normalization::raw;
  // Original label value of each class id (ascending); empty means identity.
  std::vector<long long> label_map;

  std::size_t size() const { return series.size(); }
  bool empty() const { return series.empty(); }
  long long original_label(std::size_t class_id) const;

  // Throws std::invalid_argument naming the first violated invariant:
  // non-empty, K >= 2, shared length, labels < K, finite values.
  void validate() const;
};

// UCR text format: `label<delim>v1<delim>...<delim>vT` per line, delimiter
// (tab or comma) detected from the first line. Labels are integers and are
// remapped to 0..K-1 by ascending original value. A `<stem>.meta` sidecar, if
// present next to the file, restores the normalization tag.
SeriesDataset load_ucr(const std::filesystem::path& path);

// Writes original labels and 17-significant-digit values (tab-separated) plus
// the `.meta` sidecar (k, t, label_map, normalization).
void save_ucr(const SeriesDataset& dataset, const std::filesystem::path& path);

std::filesystem::path meta_path(const std::filesystem::path& data_path);

// Per-series z-normalization with population standard deviation. Constant
// series become all zeros and are reported in `warnings` (stderr if null).
SeriesDataset z_normalize(const SeriesDataset& dataset, std::vector<std::string>* warnings = nullptr);

enum class SynthKind { sine_vs_sawtooth, shifted_gaussians };

std::string to_string(SynthKind k);
SynthKind parse_synth_kind(const std::string& text);

struct SynthSpec {
  SynthKind kind = SynthKind::sine_vs_sawtooth;
  std::size_t n_per_class = 100;
  std::size_t length = 64;
  double noise_sd = 0.3;
  std::uint64_t seed = 7;
};

struct DatasetSplit {
  SeriesDataset train;
  SeriesDataset test;
};

// Two-class generators for desk-scale experiments; n_per_class series of each
// class in both splits. sine_vs_sawtooth: class 0 = sin(2 pi f t), class 1 = a
// sawtooth of the same frequency f ~ U[1, 3], t = i / T, plus N(0, noise_sd).
DatasetSplit synth_dataset(const SynthSpec& spec);

}  // namespace tsaug
