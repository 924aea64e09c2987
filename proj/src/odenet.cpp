#include "tsaug/odenet.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tsaug/checkpoint.hpp"
#include "tsaug/init.hpp"

namespace tsaug {

TimeGrid TimeGrid::normalized(std::size_t n) {
  if (n < 2) throw std::invalid_argument("TimeGrid needs at least two points");
  TimeGrid g;
  g.times.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.times[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

TimeGrid TimeGrid::uniform(double t0, double dt, std::size_t n) {
  if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid step must be positive");
  TimeGrid g;
  g.times.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.times[i] = t0 + dt * static_cast<double>(i);
  g.validate();
  return g;
}

void TimeGrid::validate() const {
  if (times.size() < 2) throw std::invalid_argument("TimeGrid needs at least two points");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw std::invalid_argument("TimeGrid must be strictly increasing");
}

namespace {

struct FieldVars {
  Var w1, b1, g1, be1, w2, b2, g2, be2, w3, b3;
};

FieldVars bind(Graph& g, const NamedTensors& p, bool trainable) {
  auto v = [&](const char* name) { return trainable ? g.parameter(p.at(name)) : g.constant(p.at(name)); };
  return {v("fc1.w"), v("fc1.b"), v("bn1.gamma"), v("bn1.beta"), v("fc2.w"),
          v("fc2.b"), v("bn2.gamma"), v("bn2.beta"), v("out.w"), v("out.b")};
}

// z, t: [batch, 1] -> [batch, 1]
Var field_graph(const FieldVars& p, Var z, Var t, std::array<BatchNormStats, 2>& stats, Mode mode) {
  const std::array<Var, 2> cols{z, t};
  Var x = concat_columns(cols);
  BatchNormStats next;
  Var h = dense(x, p.w1, p.b1);
  h = batch_norm(h, p.g1, p.be1, stats[0], mode, mode == Mode::train ? &next : nullptr);
  if (mode == Mode::train) stats[0] = next;
  h = elu(h);
  h = dense(h, p.w2, p.b2);
  h = batch_norm(h, p.g2, p.be2, stats[1], mode, mode == Mode::train ? &next : nullptr);
  if (mode == Mode::train) stats[1] = next;
  h = elu(h);
  return dense(h, p.w3, p.b3);
}

Tensor column(std::span<const double> v) { return Tensor({v.size(), 1}, std::vector<double>(v.begin(), v.end())); }

}  // namespace

OdeNetModel OdeNetModel::initialize(std::uint64_t seed, bool zero_output) {
  Rng rng(derive_seed(seed, "odenet/init"));
  OdeNetModel m;
  const std::size_t H = kOdeNetHidden;
  m.params_.add("fc1.w", uniform_fan_in({2, H}, 2, rng));
  m.params_.add("fc1.b", Tensor({H}));
  m.params_.add("bn1.gamma", filled({H}, 1.0));
  m.params_.add("bn1.beta", Tensor({H}));
  m.params_.add("fc2.w", uniform_fan_in({H, H}, H, rng));
  m.params_.add("fc2.b", Tensor({H}));
  m.params_.add("bn2.gamma", filled({H}, 1.0));
  m.params_.add("bn2.beta", Tensor({H}));
  m.params_.add("out.w", zero_output ? Tensor({H, 1}) : uniform_fan_in({H, 1}, H, rng));
  m.params_.add("out.b", Tensor({1}));
  m.bn_ = {BatchNormStats::fresh(H), BatchNormStats::fresh(H)};
  m.provenance_.config.seed = seed;
  return m;
}

std::vector<double> OdeNetModel::field(std::span<const double> z, std::span<const double> t) const {
  if (z.size() != t.size()) throw std::invalid_argument("field: z and t lengths differ");
  if (z.empty()) return {};
  for (std::size_t i = 0; i < z.size(); ++i)
    if (!std::isfinite(z[i]) || !std::isfinite(t[i])) throw std::domain_error("field: non-finite input");
  Graph g;
  const FieldVars p = bind(g, params_, false);
  auto stats = bn_;
  Var out = field_graph(p, g.constant(column(z)), g.constant(column(t)), stats, Mode::eval);
  return out.value().values();
}

NamedTensors OdeNetModel::to_tensors() const {
  NamedTensors t = params_;
  for (std::size_t i = 0; i < 2; ++i) {
    t.add("bn" + std::to_string(i + 1) + ".running_mean", bn_[i].running_mean);
    t.add("bn" + std::to_string(i + 1) + ".running_var", bn_[i].running_var);
  }
  const OdeNetTrainConfig& c = provenance_.config;
  t.add("meta.train", Tensor::from({c.learning_rate, c.weight_decay, static_cast<double>(c.epochs),
                                    static_cast<double>(c.batch_size), provenance_.trained ? 1.0 : 0.0,
                                    provenance_.first_epoch_mse, provenance_.final_mse}));
  t.add("meta.seed", pack_u64(c.seed));
  return t;
}

OdeNetModel OdeNetModel::from_tensors(const NamedTensors& t) {
  OdeNetModel m;
  for (const char* name : {"fc1.w", "fc1.b", "bn1.gamma", "bn1.beta", "fc2.w", "fc2.b", "bn2.gamma",
                           "bn2.beta", "out.w", "out.b"})
    m.params_.add(name, t.at(name));
  const std::size_t H = kOdeNetHidden;
  if (m.params_.at("fc1.w").shape() != Shape{2, H} || m.params_.at("fc2.w").shape() != Shape{H, H} ||
      m.params_.at("out.w").shape() != Shape{H, 1})
    throw std::runtime_error("odenet checkpoint: layer extents must be 2->25->25->1");
  for (std::size_t i = 0; i < 2; ++i) {
    m.bn_[i].running_mean = t.at("bn" + std::to_string(i + 1) + ".running_mean");
    m.bn_[i].running_var = t.at("bn" + std::to_string(i + 1) + ".running_var");
  }
  const Tensor& meta = t.at("meta.train");
  if (meta.size() != 7) throw std::runtime_error("odenet checkpoint: bad meta.train");
  m.provenance_.config = {meta[0], meta[1], static_cast<std::size_t>(meta[2]), static_cast<std::size_t>(meta[3]),
                          unpack_u64(t.at("meta.seed"))};
  m.provenance_.trained = meta[4] != 0.0;
  m.provenance_.first_epoch_mse = meta[5];
  m.provenance_.final_mse = meta[6];
  return m;
}

double field_eval(const OdeNetModel& model, double z, double t) {
  const double zs[1] = {z}, ts[1] = {t};
  return model.field(zs, ts)[0];
}

double integrate_step(const OdeNetModel& model, double z_prev, double t_prev, double t_next) {
  return rk4_step([&](double z, double t) { return field_eval(model, z, t); }, z_prev, t_prev, t_next);
}

std::vector<double> rollout(const OdeNetModel& model, double z0, const TimeGrid& grid) {
  return rollout_field([&](double z, double t) { return field_eval(model, z, t); }, z0, grid);
}

OdeNetModel train_odenet(const SeriesDataset& dataset, const OdeNetTrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train_odenet: empty dataset");
  const std::size_t T = dataset.length;
  for (const LabeledSeries& s : dataset.series)
    if (s.values.size() != T) throw std::invalid_argument("train_odenet: series lengths differ");
  if (T < 2) throw std::invalid_argument("train_odenet: series must have at least two points");
  if (config.batch_size < 2) throw std::invalid_argument("train_odenet: batch size must be at least 2");

  const TimeGrid grid = TimeGrid::normalized(T);
  struct Tuple {
    double z_prev, t_prev, t_next, z_true;
  };
  std::vector<Tuple> tuples;
  tuples.reserve(dataset.size() * (T - 1));
  for (const LabeledSeries& s : dataset.series)
    for (std::size_t i = 1; i < T; ++i) tuples.push_back({s.values[i - 1], grid.times[i - 1], grid.times[i], s.values[i]});
  if (tuples.size() < 2) throw std::invalid_argument("train_odenet: need at least two training pairs");

  OdeNetModel model = OdeNetModel::initialize(config.seed);
  model.provenance_.config = config;
  AdamState adam = AdamState::for_params(model.params_, {config.learning_rate, config.weight_decay});
  Rng rng(derive_seed(config.seed, "odenet/shuffle"));

  std::vector<std::size_t> order(tuples.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_sse = 0.0;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t end = std::min(order.size(), start + config.batch_size);
      if (order.size() - end == 1) end = order.size();  // never leave a batch of one
      const std::size_t B = end - start;
      std::vector<double> z(B), t0(B), h(B), half(B), sixth(B), tm(B), t1(B), target(B);
      for (std::size_t k = 0; k < B; ++k) {
        const Tuple& tp = tuples[order[start + k]];
        z[k] = tp.z_prev;
        t0[k] = tp.t_prev;
        t1[k] = tp.t_next;
        h[k] = tp.t_next - tp.t_prev;
        half[k] = 0.5 * h[k];
        sixth[k] = h[k] / 6.0;
        tm[k] = tp.t_prev + 0.5 * h[k];
        target[k] = tp.z_true;
      }
      Graph g;
      const FieldVars p = bind(g, model.params_, true);
      Var zv = g.constant(column(z));
      Var hv = g.constant(column(h));
      Var halfv = g.constant(column(half));
      Var t0v = g.constant(column(t0));
      Var tmv = g.constant(column(tm));
      Var t1v = g.constant(column(t1));
      auto stats = model.bn_;
      Var k1 = field_graph(p, zv, t0v, stats, Mode::train);
      Var k2 = field_graph(p, zv + halfv * k1, tmv, stats, Mode::train);
      Var k3 = field_graph(p, zv + halfv * k2, tmv, stats, Mode::train);
      Var k4 = field_graph(p, zv + hv * k3, t1v, stats, Mode::train);
      Var incr = k1 + k2 * 2.0 + k3 * 2.0 + k4;
      Var pred = zv + g.constant(column(sixth)) * incr;
      Var err = pred - g.constant(column(target));
      Var loss = mean(err * err);
      g.backward(loss);
      epoch_sse += loss.value().item() * static_cast<double>(B);

      NamedTensors grads;
      const std::array<Var, 10> vars{p.w1, p.b1, p.g1, p.be1, p.w2, p.b2, p.g2, p.be2, p.w3, p.b3};
      for (std::size_t i = 0; i < vars.size(); ++i) grads.add(model.params_.name(i), g.grad(vars[i]));
      model.params_ = adam_step(model.params_, grads, adam);
      model.bn_ = stats;
      start = end;
    }
    const double epoch_mse = epoch_sse / static_cast<double>(tuples.size());
    if (epoch == 0) model.provenance_.first_epoch_mse = epoch_mse;
    model.provenance_.final_mse = epoch_mse;
  }
  model.provenance_.trained = true;
  return model;
}

std::vector<double> series_gradients(const OdeNetModel& model, std::span<const double> values) {
  const TimeGrid grid = TimeGrid::normalized(values.size());
  return model.field(values, grid.times);
}

std::vector<double> series_gradients(const OdeNetModel& model, const LabeledSeries& series) {
  return series_gradients(model, series.values);
}

void save_odenet(const OdeNetModel& model, const std::filesystem::path& path) {
  save_checkpoint(path, model.to_tensors());
}

OdeNetModel load_odenet(const std::filesystem::path& path) { return OdeNetModel::from_tensors(load_checkpoint(path)); }

}  // namespace tsaug
