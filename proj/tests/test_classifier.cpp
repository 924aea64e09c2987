#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "support/gradcheck.hpp"
#include "tsaug/augment.hpp"
#include "tsaug/classifier.hpp"

using namespace tsaug;

namespace {

ClassifierModel untrained(std::size_t T, std::size_t K = 2, std::uint64_t seed = 1) {
  return ClassifierModel::initialize({.series_length = T, .num_classes = K}, seed);
}

std::vector<std::vector<double>> random_series(std::size_t n, std::size_t T, Rng& rng) {
  std::vector<std::vector<double>> out(n, std::vector<double>(T));
  for (auto& s : out)
    for (double& v : s) v = rng.normal();
  return out;
}

// Two classes separated by their mean level.
SeriesDataset separable(std::size_t per_class, std::size_t T, std::uint64_t seed) {
  Rng rng(seed);
  SeriesDataset ds;
  ds.num_classes = 2;
  ds.length = T;
  ds.label_map = {0, 1};
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    LabeledSeries s;
    s.label = i % 2;
    s.id = "s" + std::to_string(i);
    for (std::size_t t = 0; t < T; ++t) s.values.push_back((s.label ? 1.0 : -1.0) + rng.normal(0.0, 0.3));
    ds.series.push_back(std::move(s));
  }
  return ds;
}

double cross_entropy_of(const std::vector<double>& logits, std::size_t y) {
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return m + std::log(s) - logits[y];
}

}  // namespace

TEST(Classifier, ShapesAndSoftmax) {
  Rng rng(1);
  const auto m = untrained(20, 3);
  const auto p = predict(m, random_series(5, 20, rng));
  ASSERT_EQ(p.logits.size(), 5u);
  EXPECT_EQ(p.logits[0].size(), 3u);
  EXPECT_EQ(p.embeddings[0].size(), 128u);
  Graph g;
  for (const auto& row : p.logits) {
    Var s = softmax_lastdim(g.constant(Tensor({1, 3}, row)));
    EXPECT_NEAR(s.value()[0] + s.value()[1] + s.value()[2], 1.0, 1e-12);
  }
}

TEST(Classifier, RejectsLengthMismatch) {
  const auto m = untrained(20);
  const std::vector<std::vector<double>> bad{std::vector<double>(19, 0.0)};
  EXPECT_THROW(predict(m, bad), std::invalid_argument);
}

TEST(Classifier, ArchitectureCounts) {
  const ClassifierArch arch{.series_length = 64, .num_classes = 2};
  // Blocks of 58624, 214528 and 148608 parameters plus a 128x2 dense layer.
  EXPECT_EQ(classifier_parameter_count(arch), 422018u);
  const auto m = ClassifierModel::initialize(arch, 0);
  EXPECT_EQ(m.params().element_count(), 422018u);
  EXPECT_EQ(m.conv_layer_count(), kConvLayers);
  EXPECT_EQ(arch.embedding_dim(), 128u);
  EXPECT_EQ(classifier_parameter_count({.series_length = 16, .num_classes = 2}), 422018u);
}

TEST(Classifier, ZeroedBlockIsItsShortcut) {
  Rng rng(2);
  auto m = untrained(12);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const std::string& name = m.params().name(i);
    if (name.find(".conv") != std::string::npos)
      for (double& v : m.mutable_params().tensor(i).data()) v = 0.0;
  }
  for (Mode mode : {Mode::eval, Mode::train}) {
    Graph g;
    ClassifierGraph net(g, m, false);
    const auto f = net.forward(g.constant(make_input(random_series(3, 12, rng), 12)), mode);
    for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(f.block_outputs[b].value(), f.shortcut_outputs[b].value()) << b;
  }
}

TEST(Classifier, InputGradientMatchesFiniteDifferences) {
  Rng rng(3);
  const auto m = untrained(16);
  const auto series = random_series(1, 16, rng);
  const std::vector<std::size_t> label{1};
  const auto ig = input_loss_gradients(m, series, label);
  EXPECT_NEAR(ig.losses[0], cross_entropy_of(predict(m, series).logits[0], 1), 1e-12);
  const double h = 1e-5;
  for (std::size_t t = 0; t < 16; ++t) {
    auto up = series, down = series;
    up[0][t] += h;
    down[0][t] -= h;
    const double numeric =
        (cross_entropy_of(predict(m, up).logits[0], 1) - cross_entropy_of(predict(m, down).logits[0], 1)) / (2 * h);
    EXPECT_LT(tsaug::testing::relative_error(ig.gradients[0][t], numeric), 1e-3) << t;
  }
}

TEST(Classifier, BatchingDoesNotChangeResults) {
  Rng rng(4);
  const auto m = untrained(24);
  const auto series = random_series(70, 24, rng);
  std::vector<std::size_t> labels(70);
  for (std::size_t i = 0; i < 70; ++i) labels[i] = i % 2;
  const auto all = predict(m, series);
  const auto grads = input_loss_gradients(m, series, labels);
  for (std::size_t i : {0, 33, 63, 64, 69}) {
    const std::vector<std::vector<double>> single{series[i]};
    const std::vector<std::size_t> one{labels[i]};
    EXPECT_EQ(predict(m, single).logits[0], all.logits[i]) << i;
    EXPECT_EQ(input_loss_gradients(m, single, one).gradients[0], grads.gradients[i]) << i;
  }
}

TEST(Embedding, UnitNormDeterministicAndScaleInvariant) {
  Rng rng(5);
  const auto m = untrained(16);
  for (const auto& s : random_series(5, 16, rng)) {
    const auto e = normalized_embedding(m, s);
    double n2 = 0.0;
    for (double v : e) n2 += v * v;
    EXPECT_NEAR(std::sqrt(n2), 1.0, 1e-9);
    EXPECT_EQ(normalized_embedding(m, s), e);
  }
  const std::vector<double> raw{3.0, -1.0, 0.5};
  const auto base = normalize_embedding(raw);
  for (double c : {1e-6, 0.3, 7.0, 1e6}) {
    std::vector<double> scaled;
    for (double v : raw) scaled.push_back(c * v);
    const auto got = normalize_embedding(scaled);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], base[i], 1e-15);
  }
  bool degenerate = false;
  EXPECT_EQ(normalize_embedding(std::vector<double>{0.0, 0.0}, &degenerate), (std::vector<double>{1.0, 0.0}));
  EXPECT_TRUE(degenerate);
}

TEST(FeatSim, Examples) {
  const std::vector<double> e1{1, 0}, e2{0, 1}, m1{-1, 0};
  const double s = std::sqrt(0.5);
  // |a - n|^2 = 0.2 for unit a, n at angle acos(0.9).
  const std::vector<double> n{0.9, std::sqrt(1 - 0.81)};
  EXPECT_NEAR(feat_sim_loss(e1, e1, n, 0.2), 0.0, 1e-15);
  EXPECT_EQ(feat_sim_loss(e1, e1, e1, 0.2), 0.2);
  EXPECT_EQ(feat_sim_loss(e1, e2, m1, 0.2), 0.0);
  EXPECT_NEAR(feat_sim_loss(e1, e2, m1, 0.2, false), 2.0 + 0.2 - 4.0, 1e-15);
  const std::vector<double> diag{s, s};
  EXPECT_GE(feat_sim_loss(e1, e2, diag, 0.2), 0.0);
  EXPECT_THROW(feat_sim_loss(std::vector<double>{1.1, 0}, e1, e1, 0.2), std::invalid_argument);
}

TEST(Evaluate, Examples) {
  SeriesDataset ds;
  ds.num_classes = 2;
  ds.length = 1;
  ds.series = {{{0.0}, 1, "a"}};
  const std::vector<std::vector<double>> right{{0.1, 0.9}}, wrong{{0.9, 0.1}}, tie{{0.5, 0.5}};
  EXPECT_EQ(evaluate(right, ds, 2).accuracy, 1.0);
  const auto w = evaluate(wrong, ds, 2);
  EXPECT_EQ(w.accuracy, 0.0);
  EXPECT_EQ(w.confusion[1][0], 1u);
  EXPECT_EQ(evaluate(tie, ds, 2).predictions[0], 0u);
  EXPECT_THROW(evaluate(right, ds, 3), std::invalid_argument);
  ds.series.clear();
  EXPECT_THROW(evaluate(std::vector<std::vector<double>>{}, ds, 2), std::invalid_argument);
}

TEST(Evaluate, ModelScoringConservesCounts) {
  Rng rng(6);
  const auto m = untrained(16, 3);
  SeriesDataset ds;
  ds.num_classes = 3;
  ds.length = 16;
  ds.label_map = {0, 1, 2};
  for (std::size_t i = 0; i < 30; ++i) ds.series.push_back({random_series(1, 16, rng)[0], i % 3, std::to_string(i)});
  const auto r = evaluate(m, ds);
  std::size_t total = 0, diag = 0;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) total += r.confusion[a][b], diag += a == b ? r.confusion[a][b] : 0;
  EXPECT_EQ(total, 30u);
  EXPECT_DOUBLE_EQ(r.accuracy, diag / 30.0);

  // A one-sample dataset labelled with the model's own argmax scores 1.
  SeriesDataset one = ds;
  one.series.resize(1);
  one.series[0].label = r.predictions[0];
  EXPECT_EQ(evaluate(m, one).accuracy, 1.0);
}

TEST(Training, DeterministicForSeed) {
  const auto ds = separable(6, 16, 1);
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 5;
  c.seed = 9;
  const auto a = train_classifier(ds, c), b = train_classifier(ds, c);
  EXPECT_EQ(a, b);
  c.seed = 10;
  EXPECT_NE(train_classifier(ds, c).params(), a.params());
}

TEST(Training, CrossEntropyFallsOverSeeds) {
  const auto ds = separable(10, 16, 2);
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig c;
    c.epochs = 6;
    c.batch_size = 8;
    c.seed = seed;
    const auto m = train_classifier(ds, c);
    EXPECT_LT(m.provenance().final_epoch_ce, m.provenance().first_epoch_ce) << seed;
  }
}

TEST(Training, SeparableSetReachesFullTrainingAccuracy) {
  const auto ds = separable(20, 32, 3);
  TrainConfig c;
  c.epochs = 50;
  c.batch_size = 16;
  c.seed = 4;
  EXPECT_EQ(evaluate(train_classifier(ds, c), ds).accuracy, 1.0);
}

TEST(Training, FeatSimNeedsProvenance) {
  const auto ds = separable(4, 16, 4);
  TrainConfig c;
  c.epochs = 1;
  c.feat_sim_enabled = true;
  EXPECT_THROW(train_classifier(ds, c), std::invalid_argument);
  AugmentedDataset aug;
  aug.data = ds;
  EXPECT_THROW(train_classifier(ds, c, &aug), std::invalid_argument);
}

TEST(Training, FeatSimRunsWithLinks) {
  const auto ds = separable(4, 16, 5);
  AugmentedDataset aug;
  aug.data = ds;
  for (auto& s : aug.data.series) {
    aug.links.push_back({s.id + ".aug", s.id, AugmentMethod::rand_grad, 0});
    for (double& v : s.values) v += 0.01;
  }
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 6;
  c.feat_sim_enabled = true;
  const auto m = train_classifier(ds, c, &aug);
  EXPECT_EQ(m.provenance().train_size, 16u);
  EXPECT_TRUE(std::isfinite(m.provenance().final_epoch_ce));
}

TEST(Checkpoint, ClassifierRoundTrip) {
  const auto ds = separable(4, 16, 6);
  const auto m = train_classifier(ds, {.epochs = 1, .batch_size = 4, .seed = 3});
  const auto path = std::filesystem::temp_directory_path() / "tsaug_test.clf.tsr";
  save_classifier(m, path);
  const auto back = load_classifier(path);
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.provenance().config.seed, 3u);
  EXPECT_EQ(predict(back, std::vector<std::vector<double>>{ds.series[0].values}).logits,
            predict(m, std::vector<std::vector<double>>{ds.series[0].values}).logits);
  std::filesystem::remove(path);
}
