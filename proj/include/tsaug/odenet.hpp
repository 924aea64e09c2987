#pragma once

// Learned gradient field dz/dt = f(z, t) of a univariate series, fitted by
// one-step prediction through a classical RK4 step. The trained field is the
// time-gradient oracle for the input-gradient augmentations.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "tsaug/adam.hpp"
#include "tsaug/dataio.hpp"
#include "tsaug/ops.hpp"

namespace tsaug {

struct TimeGrid {
  std::vector<double> times;

  // t_i = i / (n - 1) on [0, 1]; the grid used when a dataset has no timestamps.
  static TimeGrid normalized(std::size_t n);
  static TimeGrid uniform(double t0, double dt, std::size_t n);

  std::size_t size() const { return times.size(); }
  // Strictly increasing with at least two points.
  void validate() const;
};

struct OdeNetTrainConfig {
  double learning_rate = 3e-4;
  double weight_decay = 1e-3;
  std::size_t epochs = 500;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
};

struct OdeNetProvenance {
  OdeNetTrainConfig config;
  bool trained = false;
  double first_epoch_mse = 0.0;
  double final_mse = 0.0;
};

inline constexpr std::size_t kOdeNetHidden = 25;

// Fully connected 2 -> 25 -> 25 -> 1; each hidden layer is followed by batch
// normalization and ELU. Input columns are (z, t).
class OdeNetModel {
 public:
  static OdeNetModel initialize(std::uint64_t seed, bool zero_output = false);

  const NamedTensors& params() const { return params_; }
  const std::array<BatchNormStats, 2>& bn_stats() const { return bn_; }
  const OdeNetProvenance& provenance() const { return provenance_; }

  // Field values for a batch of (z, t) pairs, batch norm in eval mode.
  std::vector<double> field(std::span<const double> z, std::span<const double> t) const;

  NamedTensors to_tensors() const;
  static OdeNetModel from_tensors(const NamedTensors& tensors);

  friend bool operator==(const OdeNetModel& a, const OdeNetModel& b) {
    return a.to_tensors() == b.to_tensors();
  }

 private:
  friend OdeNetModel train_odenet(const SeriesDataset&, const OdeNetTrainConfig&);

  NamedTensors params_;
  std::array<BatchNormStats, 2> bn_;
  OdeNetProvenance provenance_;
};

// f(z, t); throws std::domain_error on non-finite input.
double field_eval(const OdeNetModel& model, double z, double t);

// One classical Runge-Kutta step of dz/dt = field(z, t) over [t_prev, t_next].
template <class Field>
double rk4_step(Field&& field, double z_prev, double t_prev, double t_next) {
  if (!(t_next > t_prev)) throw std::invalid_argument("rk4_step: time must strictly increase");
  const double h = t_next - t_prev;
  const double k1 = field(z_prev, t_prev);
  const double k2 = field(z_prev + 0.5 * h * k1, t_prev + 0.5 * h);
  const double k3 = field(z_prev + 0.5 * h * k2, t_prev + 0.5 * h);
  const double k4 = field(z_prev + h * k3, t_next);
  return z_prev + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Iterated rk4_step over the grid; each prediction seeds the next step.
template <class Field>
std::vector<double> rollout_field(Field&& field, double z0, const TimeGrid& grid) {
  grid.validate();
  std::vector<double> out{z0};
  out.reserve(grid.size());
  for (std::size_t i = 1; i < grid.size(); ++i)
    out.push_back(rk4_step(field, out.back(), grid.times[i - 1], grid.times[i]));
  return out;
}

double integrate_step(const OdeNetModel& model, double z_prev, double t_prev, double t_next);
std::vector<double> rollout(const OdeNetModel& model, double z0, const TimeGrid& grid);

// Teacher-forced one-step training over every (series, i >= 1) pair pooled
// across the dataset, minimizing the MSE of the RK4 prediction of z(t_i) from
// the true z(t_{i-1}). Deterministic for a given seed.
OdeNetModel train_odenet(const SeriesDataset& dataset, const OdeNetTrainConfig& config);

// [f(z(t_i), t_i)] on the normalized grid of the series' own length.
std::vector<double> series_gradients(const OdeNetModel& model, const LabeledSeries& series);
std::vector<double> series_gradients(const OdeNetModel& model, std::span<const double> values);

void save_odenet(const OdeNetModel& model, const std::filesystem::path& path);
OdeNetModel load_odenet(const std::filesystem::path& path);

}  // namespace tsaug
