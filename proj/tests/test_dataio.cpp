#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "tsaug/dataio.hpp"

using namespace tsaug;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tsaug_dataio_test";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_text(const std::string& name, const std::string& text) {
  const fs::path p = scratch(name);
  fs::remove(meta_path(p));
  std::ofstream(p) << text;
  return p;
}

// 1-NN (Euclidean) accuracy of test against train.
double one_nn_accuracy(const SeriesDataset& train, const SeriesDataset& test) {
  std::size_t hits = 0;
  for (const auto& q : test.series) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t label = 0;
    for (const auto& r : train.series) {
      double d = 0.0;
      for (std::size_t i = 0; i < q.values.size(); ++i) d += (q.values[i] - r.values[i]) * (q.values[i] - r.values[i]);
      if (d < best) best = d, label = r.label;
    }
    hits += label == q.label;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

}  // namespace

TEST(DataIo, MinimalFile) {
  const auto ds = load_ucr(write_text("minimal.tsv", "1\t0.5\t0.25\n2\t-1\t3\n"));
  EXPECT_EQ(ds.num_classes, 2u);
  EXPECT_EQ(ds.length, 2u);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.series[0].values, (std::vector<double>{0.5, 0.25}));
  EXPECT_EQ(ds.series[0].label, 0u);
  EXPECT_EQ(ds.series[1].label, 1u);
}

TEST(DataIo, CommaDelimitedAndNegativeLabels) {
  const auto ds = load_ucr(write_text("comma.csv", "-1,1,2,3\n3,4,5,6\n-1,0,0,0\n"));
  EXPECT_EQ(ds.label_map, (std::vector<long long>{-1, 3}));
  EXPECT_EQ(ds.series[1].label, 1u);
  EXPECT_EQ(ds.original_label(0), -1);
}

TEST(DataIo, RaggedRowNamesLine) {
  try {
    load_ucr(write_text("ragged.tsv", "1\t1\t2\t3\n2\t1\t2\n"));
    FAIL() << "ragged file accepted";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(DataIo, RejectsBadContent) {
  EXPECT_THROW(load_ucr(write_text("text.tsv", "1\t1\tabc\n2\t1\t2\n")), std::invalid_argument);
  EXPECT_THROW(load_ucr(write_text("oneclass.tsv", "1\t1\t2\n1\t3\t4\n")), std::invalid_argument);
  EXPECT_THROW(load_ucr(write_text("nan.tsv", "1\t1\tnan\n2\t3\t4\n")), std::invalid_argument);
  EXPECT_THROW(load_ucr(scratch("missing.tsv")), std::runtime_error);
}

TEST(DataIo, SaveLoadRoundTripIsBitExact) {
  SynthSpec spec;
  spec.n_per_class = 10;
  spec.length = 40;
  auto ds = z_normalize(synth_dataset(spec).train);
  const auto p = scratch("roundtrip.tsv");
  save_ucr(ds, p);
  const auto back = load_ucr(p);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.series[i].values, ds.series[i].values);
    EXPECT_EQ(back.series[i].label, ds.series[i].label);
  }
  EXPECT_EQ(back.normalization, Normalization::znorm);
}

TEST(DataIo, ZNormalizeExample) {
  SeriesDataset ds;
  ds.num_classes = 2;
  ds.length = 3;
  ds.series = {{{1, 2, 3}, 0, "a"}, {{5, 5, 5}, 1, "b"}};
  std::vector<std::string> warnings;
  const auto z = z_normalize(ds, &warnings);
  const double s = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(z.series[0].values[0], -1.0 / s, 1e-12);
  EXPECT_NEAR(z.series[0].values[1], 0.0, 1e-12);
  EXPECT_NEAR(z.series[0].values[2], 1.0 / s, 1e-12);
  EXPECT_EQ(z.series[1].values, (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_EQ(z.normalization, Normalization::znorm);
}

TEST(DataIo, ZNormalizeIsIdempotent) {
  SynthSpec spec;
  spec.n_per_class = 10;
  const auto once = z_normalize(synth_dataset(spec).train);
  const auto twice = z_normalize(once);
  for (std::size_t i = 0; i < once.size(); ++i)
    for (std::size_t t = 0; t < once.length; ++t)
      EXPECT_NEAR(twice.series[i].values[t], once.series[i].values[t], 1e-12);
}

TEST(DataIo, SynthIsDeterministicAndBalanced) {
  SynthSpec spec;
  spec.n_per_class = 25;
  const auto a = synth_dataset(spec), b = synth_dataset(spec);
  std::size_t ones = 0;
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train.series[i].values, b.train.series[i].values);
    ones += a.train.series[i].label;
  }
  EXPECT_EQ(a.train.size(), 50u);
  EXPECT_EQ(ones, 25u);
  spec.seed = 8;
  EXPECT_NE(synth_dataset(spec).train.series[0].values, a.train.series[0].values);
}

TEST(DataIo, NoiselessSynthIsSeparable) {
  for (SynthKind kind : {SynthKind::sine_vs_sawtooth, SynthKind::shifted_gaussians}) {
    SynthSpec spec;
    spec.kind = kind;
    spec.noise_sd = 0.0;
    spec.n_per_class = 30;
    const auto split = synth_dataset(spec);
    EXPECT_EQ(one_nn_accuracy(split.train, split.test), 1.0) << to_string(kind);
  }
}
