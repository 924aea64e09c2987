#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "tsaug/adam.hpp"
#include "tsaug/checkpoint.hpp"

using namespace tsaug;

namespace {

NamedTensors one(double v) {
  NamedTensors t;
  t.add("p", Tensor::from({v}));
  return t;
}

}  // namespace

TEST(Adam, ZeroGradientWithoutDecayKeepsParameters) {
  NamedTensors p = one(1.25);
  AdamState s = AdamState::for_params(p, {});
  EXPECT_EQ(adam_step(p, one(0.0), s), p);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  for (double g : {3.0, -0.02}) {
    NamedTensors p = one(0.5);
    AdamState s = AdamState::for_params(p, {.learning_rate = 0.01});
    const double got = adam_step(p, one(g), s).at("p")[0];
    EXPECT_NEAR(got, 0.5 - 0.01 * (g > 0 ? 1 : -1), 1e-8);
  }
}

TEST(Adam, TwoStepsMatchClosedForm) {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
  const double g1 = 0.5, g2 = -1.5;
  NamedTensors p = one(2.0);
  AdamState s = AdamState::for_params(p, {.learning_rate = lr, .weight_decay = wd});
  p = adam_step(p, one(g1), s);
  p = adam_step(p, one(g2), s);

  double x = 2.0, m = 0, v = 0;
  const double gs[] = {g1, g2};
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * gs[t - 1];
    v = b2 * v + (1 - b2) * gs[t - 1] * gs[t - 1];
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    x -= lr * wd * x;
    x -= lr * mh / (std::sqrt(vh) + eps);
  }
  EXPECT_NEAR(p.at("p")[0], x, 1e-14);
  EXPECT_EQ(s.step_count, 2u);
}

TEST(Adam, DecoupledDecayWithZeroGradient) {
  NamedTensors p = one(4.0);
  AdamState s = AdamState::for_params(p, {.learning_rate = 0.1, .weight_decay = 0.5});
  EXPECT_DOUBLE_EQ(adam_step(p, one(0.0), s).at("p")[0], 4.0 * (1 - 0.05));
}

TEST(Adam, NonFiniteGradientLeavesStateUntouched) {
  NamedTensors p = one(1.0);
  AdamState s = AdamState::for_params(p, {});
  adam_step(p, one(0.3), s);
  const AdamState before = s;
  EXPECT_THROW(adam_step(p, one(std::numeric_limits<double>::infinity()), s), std::domain_error);
  EXPECT_EQ(s.step_count, before.step_count);
  EXPECT_EQ(s.first_moment, before.first_moment);
  EXPECT_EQ(s.second_moment, before.second_moment);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  NamedTensors t;
  t.add("w", Tensor({2, 3}, {1.0 / 3.0, -0.0, 1e-300, -7.5, 1e300, 0.1}));
  t.add("block0.bn.gamma", Tensor::from({std::nextafter(1.0, 2.0)}));
  std::stringstream buf;
  write_checkpoint(buf, t);
  const NamedTensors back = read_checkpoint(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.name(0), "w");
  EXPECT_EQ(back.tensor(0).shape(), (Shape{2, 3}));
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_EQ(std::signbit(back.tensor(0)[i]), std::signbit(t.tensor(0)[i]));
  EXPECT_EQ(back, t);
}

TEST(Checkpoint, HeaderLayout) {
  NamedTensors t;
  t.add("w", Tensor({2, 3}));
  std::stringstream buf;
  write_checkpoint(buf, t);
  const std::string text = buf.str();
  EXPECT_EQ(text.rfind("TSRAUG1\nw\tdtype=f64\tshape=2x3\nDATA\n", 0), 0u);
  EXPECT_EQ(text.size(), std::string("TSRAUG1\nw\tdtype=f64\tshape=2x3\nDATA\n").size() + 6 * 8);
}

TEST(Checkpoint, RejectsCorruptInput) {
  NamedTensors t;
  t.add("w", Tensor::from({1, 2}));
  std::stringstream good;
  write_checkpoint(good, t);
  const std::string text = good.str();

  std::stringstream magic("TSRAUG2\n" + text.substr(8));
  EXPECT_THROW(read_checkpoint(magic), std::runtime_error);
  std::stringstream truncated(text.substr(0, text.size() - 3));
  EXPECT_THROW(read_checkpoint(truncated), std::runtime_error);
  std::stringstream trailing(text + "x");
  EXPECT_THROW(read_checkpoint(trailing), std::runtime_error);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "tsaug_ckpt_test.tsr";
  NamedTensors t;
  t.add("a", Tensor::from({3, 1, 4, 1, 5}));
  save_checkpoint(path, t);
  EXPECT_EQ(load_checkpoint(path), t);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
}
