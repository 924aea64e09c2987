#include <gtest/gtest.h>

#include <cmath>

#include "tsaug/attacks.hpp"
#include "tsaug/augment.hpp"

using namespace tsaug;

namespace {

struct Toy {
  SeriesDataset train, test;
  ClassifierModel model;
};

const Toy& toy() {
  static const Toy t = [] {
    SynthSpec spec;
    spec.n_per_class = 20;
    spec.length = 32;
    spec.seed = 11;
    const auto split = synth_dataset(spec);
    Toy out{z_normalize(split.train), z_normalize(split.test), {}};
    out.model = train_classifier(out.train, {.epochs = 8, .batch_size = 16, .seed = 3});
    return out;
  }();
  return t;
}

double loss_of(const ClassifierModel& m, const std::vector<double>& z, std::size_t y) {
  const std::vector<std::vector<double>> one{z};
  const std::vector<std::size_t> label{y};
  return input_loss_gradients(m, one, label).losses[0];
}

}  // namespace

TEST(AttackConfig, Validation) {
  EXPECT_NO_THROW(AttackConfig::make(AttackKind::bim, 0.1).validate());
  EXPECT_NO_THROW(AttackConfig::make(AttackKind::bim, 0.3).validate());
  AttackConfig c = AttackConfig::make(AttackKind::bim, 0.1);
  c.bim_step = 0.005;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = AttackConfig::make(AttackKind::fgsm, -0.1);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(adversarial_path("out/test.tsv", AttackKind::bim).string(), "out/test.tsv.advbim");
}

TEST(Fgsm, ContractOnToyModel) {
  const Toy& t = toy();
  std::size_t ascended = 0;
  for (const auto& s : t.test.series) {
    EXPECT_EQ(fgsm(t.model, s.values, s.label, 0.0), s.values);
    const auto adv = fgsm(t.model, s.values, s.label, 0.1);
    const std::vector<std::vector<double>> one{s.values};
    const std::vector<std::size_t> label{s.label};
    const auto g = input_loss_gradients(t.model, one, label).gradients[0];
    for (std::size_t i = 0; i < adv.size(); ++i) {
      EXPECT_EQ(adv[i], s.values[i] + 0.1 * sign(g[i]));
      const double d = adv[i] - s.values[i];
      EXPECT_TRUE(d == 0.0 || std::abs(std::abs(d) - 0.1) < 1e-12);
    }
    ascended += loss_of(t.model, adv, s.label) >= loss_of(t.model, s.values, s.label);
  }
  EXPECT_GE(static_cast<double>(ascended), 0.9 * static_cast<double>(t.test.size()));
}

TEST(Bim, StaysInBallAndReducesToFgsm) {
  const Toy& t = toy();
  AttackConfig c = AttackConfig::make(AttackKind::bim, 0.1);
  for (std::size_t n = 0; n < 6; ++n) {
    const auto& s = t.test.series[n];
    std::vector<std::vector<double>> iterates;
    bim(t.model, s.values, s.label, c, &iterates);
    ASSERT_EQ(iterates.size(), c.bim_iters);
    for (const auto& it : iterates)
      for (std::size_t i = 0; i < it.size(); ++i) EXPECT_LE(std::abs(it[i] - s.values[i]), 0.1 + 1e-12);

    AttackConfig one = c;
    one.bim_iters = 1;
    one.bim_step = 0.1;
    EXPECT_EQ(bim(t.model, s.values, s.label, one), fgsm(t.model, s.values, s.label, 0.1));
  }
}

TEST(AttackDataset, DeterministicAndLeavesModelAlone) {
  const Toy& t = toy();
  const ClassifierModel before = t.model;
  const auto a = attack_dataset(t.model, t.test, AttackConfig::make(AttackKind::bim, 0.1));
  const auto b = attack_dataset(t.model, t.test, AttackConfig::make(AttackKind::bim, 0.1));
  EXPECT_EQ(t.model, before);
  EXPECT_EQ(a.accuracy, b.accuracy);
  for (std::size_t i = 0; i < t.test.size(); ++i) {
    EXPECT_EQ(a.adversarial.series[i].values, b.adversarial.series[i].values);
    EXPECT_EQ(a.adversarial.series[i].label, t.test.series[i].label);
  }
  // Per-sample results do not depend on what else is in the dataset.
  SeriesDataset head = t.test;
  head.series.resize(3);
  const auto h = attack_dataset(t.model, head, AttackConfig::make(AttackKind::bim, 0.1));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(h.adversarial.series[i].values, a.adversarial.series[i].values);
}

TEST(AttackDataset, ZeroEpsilonKeepsAccuracy) {
  const Toy& t = toy();
  const double clean = evaluate(t.model, t.test).accuracy;
  for (AttackKind k : {AttackKind::fgsm, AttackKind::bim})
    EXPECT_EQ(attack_dataset(t.model, t.test, AttackConfig::make(k, 0.0)).accuracy, clean);
}

TEST(AttackDataset, BimNoWeakerThanFgsmOnToyModel) {
  const Toy& t = toy();
  for (double eps : {0.1, 0.5}) {
    const double f = attack_dataset(t.model, t.test, AttackConfig::make(AttackKind::fgsm, eps)).accuracy;
    const double b = attack_dataset(t.model, t.test, AttackConfig::make(AttackKind::bim, eps)).accuracy;
    EXPECT_LE(b, f) << eps;
  }
}

TEST(AttackDataset, RandomLogitModelNearChance) {
  Rng rng(12);
  SeriesDataset ds;
  ds.num_classes = 2;
  ds.length = 32;
  ds.label_map = {0, 1};
  for (std::size_t i = 0; i < 500; ++i) {
    LabeledSeries s;
    s.label = rng.below(2);
    s.id = std::to_string(i);
    for (std::size_t k = 0; k < 32; ++k) s.values.push_back(rng.normal());
    ds.series.push_back(std::move(s));
  }
  // Logits ignore the input: zero output weights, random bias.
  auto m = ClassifierModel::initialize({.series_length = 32, .num_classes = 2}, 5);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    if (m.params().name(i) == "fc.w")
      for (double& v : m.mutable_params().tensor(i).data()) v = 0.0;
    if (m.params().name(i) == "fc.b")
      for (double& v : m.mutable_params().tensor(i).data()) v = rng.normal();
  }
  const double acc = attack_dataset(m, ds, AttackConfig::make(AttackKind::fgsm, 0.1)).accuracy;
  EXPECT_NEAR(acc, 0.5, 0.05);
}
