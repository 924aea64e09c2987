#include "tsaug/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "tsaug/rng.hpp"

namespace tsaug {

std::string to_string(Normalization n) { return n == Normalization::znorm ? "znorm" : "raw"; }

Normalization parse_normalization(const std::string& text) {
  if (text == "raw") return Normalization::raw;
  if (text == "znorm") return Normalization::znorm;
  throw std::invalid_argument("unknown normalization '" + text + "' (expected raw or znorm)");
}

std::string to_string(SynthKind k) {
  return k == SynthKind::sine_vs_sawtooth ? "sine_vs_sawtooth" : "shifted_gaussians";
}

SynthKind parse_synth_kind(const std::string& text) {
  if (text == "sine_vs_sawtooth") return SynthKind::sine_vs_sawtooth;
  if (text == "shifted_gaussians") return SynthKind::shifted_gaussians;
  throw std::invalid_argument("unknown synthetic dataset kind '" + text + "'");
}

long long SeriesDataset::original_label(std::size_t class_id) const {
  if (label_map.empty()) return static_cast<long long>(class_id);
  return label_map.at(class_id);
}

void SeriesDataset::validate() const {
  if (series.empty()) throw std::invalid_argument("dataset '" + name + "' is empty");
  if (num_classes < 2) throw std::invalid_argument("dataset '" + name + "' needs at least 2 classes");
  if (!label_map.empty() && label_map.size() != num_classes)
    throw std::invalid_argument("dataset '" + name + "' label map does not cover every class");
  for (std::size_t i = 0; i < series.size(); ++i) {
    const LabeledSeries& s = series[i];
    if (s.values.size() != length)
      throw std::invalid_argument("dataset '" + name + "': series " + std::to_string(i) + " has length " +
                                  std::to_string(s.values.size()) + ", expected " + std::to_string(length));
    if (s.label >= num_classes)
      throw std::invalid_argument("dataset '" + name + "': series " + std::to_string(i) + " label out of range");
    for (double v : s.values)
      if (!std::isfinite(v))
        throw std::invalid_argument("dataset '" + name + "': series " + std::to_string(i) + " has a non-finite value");
  }
}

std::filesystem::path meta_path(const std::filesystem::path& data_path) {
  std::filesystem::path p = data_path;
  return p.replace_extension(".meta");
}

namespace {

double parse_number(std::string_view field, std::size_t line_no) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\r')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size())
    throw std::invalid_argument("line " + std::to_string(line_no) + ": non-numeric field '" +
                                std::string(field) + "'");
  if (!std::isfinite(v))
    throw std::invalid_argument("line " + std::to_string(line_no) + ": missing or non-finite value");
  return v;
}

std::map<std::string, std::string> read_meta(const std::filesystem::path& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

SeriesDataset load_ucr(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());

  std::vector<std::pair<long long, std::vector<double>>> rows;
  std::string line;
  char delim = 0;
  std::size_t line_no = 0, width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (delim == 0) delim = line.find('\t') != std::string::npos ? '\t' : ',';
    std::vector<double> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t end = line.find(delim, pos);
      fields.push_back(parse_number(std::string_view(line).substr(pos, end - pos), line_no));
      if (end == std::string::npos) break;
      pos = end + 1;
    }
    if (fields.size() < 2)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected a label and at least one value");
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw std::invalid_argument("ragged row at line " + std::to_string(line_no) + ": " +
                                  std::to_string(fields.size() - 1) + " values, expected " +
                                  std::to_string(width - 1));
    const double raw_label = fields.front();
    if (raw_label != std::floor(raw_label) || std::abs(raw_label) > 9.0e15)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": label is not an integer");
    rows.emplace_back(static_cast<long long>(raw_label), std::vector<double>(fields.begin() + 1, fields.end()));
  }
  if (rows.empty()) throw std::invalid_argument("dataset file " + path.string() + " has no rows");

  SeriesDataset ds;
  ds.name = path.stem().string();
  ds.length = width - 1;
  for (const auto& r : rows) ds.label_map.push_back(r.first);
  std::sort(ds.label_map.begin(), ds.label_map.end());
  ds.label_map.erase(std::unique(ds.label_map.begin(), ds.label_map.end()), ds.label_map.end());
  ds.num_classes = ds.label_map.size();
  if (ds.num_classes < 2)
    throw std::invalid_argument("dataset file " + path.string() + " has fewer than 2 classes");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto it = std::lower_bound(ds.label_map.begin(), ds.label_map.end(), rows[i].first);
    ds.series.push_back({std::move(rows[i].second), static_cast<std::size_t>(it - ds.label_map.begin()),
                         std::to_string(i)});
  }

  const auto meta = meta_path(path);
  if (std::filesystem::exists(meta)) {
    const auto kv = read_meta(meta);
    if (auto it = kv.find("normalization"); it != kv.end()) ds.normalization = parse_normalization(it->second);
  }
  ds.validate();
  return ds;
}

void save_ucr(const SeriesDataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  char buf[40];
  for (const LabeledSeries& s : dataset.series) {
    out << dataset.original_label(s.label);
    for (double v : s.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());

  std::ofstream meta(meta_path(path), std::ios::binary | std::ios::trunc);
  meta << "k=" << dataset.num_classes << '\n' << "t=" << dataset.length << '\n' << "label_map=";
  for (std::size_t c = 0; c < dataset.num_classes; ++c)
    meta << (c ? "," : "") << c << ":" << dataset.original_label(c);
  meta << '\n' << "normalization=" << to_string(dataset.normalization) << '\n';
}

SeriesDataset z_normalize(const SeriesDataset& dataset, std::vector<std::string>* warnings) {
  SeriesDataset out = dataset;
  for (LabeledSeries& s : out.series) {
    const double n = static_cast<double>(s.values.size());
    double mu = 0.0;
    for (double v : s.values) mu += v;
    mu /= n;
    double ss = 0.0;
    for (double v : s.values) ss += (v - mu) * (v - mu);
    const double sd = std::sqrt(ss / n);
    if (sd == 0.0 || !std::isfinite(1.0 / sd)) {
      std::fill(s.values.begin(), s.values.end(), 0.0);
      const std::string msg = "z_normalize: series '" + s.id + "' is constant; mapped to zeros";
      if (warnings) warnings->push_back(msg);
      else std::cerr << "warning: " << msg << '\n';
      continue;
    }
    for (double& v : s.values) v = (v - mu) / sd;
  }
  out.normalization = Normalization::znorm;
  return out;
}

namespace {

std::vector<double> generate(SynthKind kind, std::size_t label, std::size_t T, double noise_sd, Rng& rng) {
  std::vector<double> v(T);
  if (kind == SynthKind::sine_vs_sawtooth) {
    const double f = rng.uniform(1.0, 3.0);
    for (std::size_t i = 0; i < T; ++i) {
      const double ft = f * static_cast<double>(i) / static_cast<double>(T);
      v[i] = label == 0 ? std::sin(2.0 * std::numbers::pi * ft) : 2.0 * (ft - std::floor(ft + 0.5));
    }
  } else {
    const double center = (label == 0 ? 0.35 : 0.65) + rng.uniform(-0.05, 0.05);
    const double amp = rng.uniform(0.8, 1.2);
    const double width = 0.08;
    for (std::size_t i = 0; i < T; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(T - 1);
      v[i] = amp * std::exp(-(t - center) * (t - center) / (2.0 * width * width));
    }
  }
  for (double& x : v) x += rng.normal(0.0, noise_sd);
  return v;
}

SeriesDataset make_split(const SynthSpec& spec, const std::string& split) {
  Rng rng(derive_seed(spec.seed, "synth/" + split));
  SeriesDataset ds;
  ds.name = to_string(spec.kind) + "_" + split;
  ds.num_classes = 2;
  ds.length = spec.length;
  ds.label_map = {0, 1};
  for (std::size_t i = 0; i < spec.n_per_class; ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      LabeledSeries s;
      s.label = c;
      s.values = generate(spec.kind, c, spec.length, spec.noise_sd, rng);
      s.id = split + "-" + std::to_string(ds.series.size());
      ds.series.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace

DatasetSplit synth_dataset(const SynthSpec& spec) {
  if (spec.n_per_class < 10) throw std::invalid_argument("synth_dataset: n_per_class must be at least 10");
  if (spec.length < 32) throw std::invalid_argument("synth_dataset: length must be at least 32");
  if (!(spec.noise_sd >= 0.0)) throw std::invalid_argument("synth_dataset: noise_sd must be non-negative");
  return {make_split(spec, "train"), make_split(spec, "test")};
}

}  // namespace tsaug
