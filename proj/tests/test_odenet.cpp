#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tsaug/odenet.hpp"

using namespace tsaug;

namespace {

SeriesDataset dataset_from(std::function<double(double, std::size_t)> f, std::size_t n, std::size_t T) {
  SeriesDataset ds;
  ds.num_classes = 2;
  ds.length = T;
  ds.label_map = {0, 1};
  const TimeGrid grid = TimeGrid::normalized(T);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSeries s;
    s.label = i % 2;
    s.id = std::to_string(i);
    for (double t : grid.times) s.values.push_back(f(t, i));
    ds.series.push_back(std::move(s));
  }
  return ds;
}

}  // namespace

TEST(Rk4, ExactOnPolynomialFields) {
  const double z0 = 0.7, a = 0.3, b = 1.1;
  auto check = [&](auto field, auto antiderivative) {
    const double got = rk4_step(field, z0, a, b);
    EXPECT_NEAR(got, z0 + antiderivative(b) - antiderivative(a), 1e-12);
  };
  check([](double, double) { return 2.5; }, [](double t) { return 2.5 * t; });
  check([](double, double t) { return t; }, [](double t) { return t * t / 2; });
  check([](double, double t) { return 3 * t * t - t; }, [](double t) { return t * t * t - t * t / 2; });
  check([](double, double t) { return t * t * t - 2 * t + 1; },
        [](double t) { return t * t * t * t / 4 - t * t + t; });
}

TEST(Rk4, RejectsNonIncreasingTime) {
  auto f = [](double, double) { return 0.0; };
  EXPECT_THROW(rk4_step(f, 0.0, 1.0, 1.0), std::invalid_argument);
}

TEST(Rollout, TrivialFields) {
  const TimeGrid unit = TimeGrid::uniform(0.0, 1.0, 5);
  const auto ones = rollout_field([](double, double) { return 1.0; }, 2.0, unit);
  EXPECT_EQ(ones, (std::vector<double>{2, 3, 4, 5, 6}));
  const auto zero = rollout_field([](double, double) { return 0.0; }, -1.5, TimeGrid::normalized(7));
  EXPECT_EQ(zero, std::vector<double>(7, -1.5));
}

TEST(OdeNet, ZeroOutputModel) {
  const OdeNetModel m = OdeNetModel::initialize(3, true);
  EXPECT_EQ(field_eval(m, 0.4, 0.2), 0.0);
  const std::vector<double> values{1, -2, 3, 0.5};
  EXPECT_EQ(series_gradients(m, values), std::vector<double>(4, 0.0));
  const auto r = rollout(m, 0.25, TimeGrid::normalized(10));
  EXPECT_EQ(r, std::vector<double>(10, 0.25));
}

TEST(OdeNet, FieldRejectsNonFinite) {
  const OdeNetModel m = OdeNetModel::initialize(3);
  EXPECT_THROW(field_eval(m, std::nan(""), 0.0), std::domain_error);
}

TEST(OdeNet, GradientsArePureAndShaped) {
  const OdeNetModel m = OdeNetModel::initialize(9);
  const std::vector<double> values{0.1, 0.5, -0.3, 2.0, 1.0};
  const auto a = series_gradients(m, values), b = series_gradients(m, values);
  EXPECT_EQ(a.size(), values.size());
  EXPECT_EQ(a, b);
  EXPECT_EQ(rollout(m, 0.123, TimeGrid::normalized(6))[0], 0.123);
}

TEST(OdeNet, TrainingIsReproducible) {
  const auto ds = dataset_from([](double t, std::size_t i) { return std::sin(3 * t + 0.1 * i); }, 6, 16);
  OdeNetTrainConfig c;
  c.epochs = 5;
  c.batch_size = 32;
  c.seed = 4;
  EXPECT_EQ(train_odenet(ds, c), train_odenet(ds, c));
  c.seed = 5;
  EXPECT_NE(train_odenet(ds, c).params(), train_odenet(ds, {.epochs = 5, .batch_size = 32, .seed = 4}).params());
}

TEST(OdeNet, LossDecreasesOverSeeds) {
  const auto ds = dataset_from([](double t, std::size_t i) { return std::cos(4 * t) + 0.05 * i; }, 10, 24);
  for (std::uint64_t seed : {1, 2, 3}) {
    OdeNetTrainConfig c;
    c.epochs = 20;
    c.batch_size = 32;
    c.seed = seed;
    const auto m = train_odenet(ds, c);
    EXPECT_LT(m.provenance().final_mse, m.provenance().first_epoch_mse) << seed;
    EXPECT_TRUE(m.provenance().trained);
  }
}

TEST(OdeNet, ConstantSeriesGiveZeroField) {
  const auto ds = dataset_from([](double, std::size_t i) { return -1.0 + 0.1 * static_cast<double>(i); }, 20, 32);
  OdeNetTrainConfig c;
  c.epochs = 300;
  c.batch_size = 64;
  c.seed = 2;
  const auto m = train_odenet(ds, c);
  double worst = 0.0;
  for (const auto& s : ds.series)
    for (double g : series_gradients(m, s)) worst = std::max(worst, std::abs(g));
  EXPECT_LT(worst, 0.05);
}

TEST(OdeNet, LinearSeriesOneStepPredictions) {
  const std::size_t T = 32;
  const auto ds = dataset_from([](double t, std::size_t i) { return t + 0.05 * static_cast<double>(i) - 0.5; }, 20, T);
  OdeNetTrainConfig c;
  c.epochs = 300;
  c.batch_size = 64;
  c.seed = 2;
  const auto m = train_odenet(ds, c);
  const TimeGrid grid = TimeGrid::normalized(T);
  double worst = 0.0;
  for (const auto& s : ds.series)
    for (std::size_t i = 1; i < T; ++i)
      worst = std::max(worst, std::abs(integrate_step(m, s.values[i - 1], grid.times[i - 1], grid.times[i]) - s.values[i]));
  EXPECT_LT(worst, 0.02);
}

TEST(OdeNet, CheckpointRoundTrip) {
  const auto ds = dataset_from([](double t, std::size_t) { return t * t; }, 4, 12);
  const auto m = train_odenet(ds, {.epochs = 2, .batch_size = 16, .seed = 8});
  const auto path = std::filesystem::temp_directory_path() / "tsaug_test.odenet.tsr";
  save_odenet(m, path);
  const auto back = load_odenet(path);
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.provenance().final_mse, m.provenance().final_mse);
  EXPECT_EQ(field_eval(back, 0.3, 0.4), field_eval(m, 0.3, 0.4));
  std::filesystem::remove(path);
}
