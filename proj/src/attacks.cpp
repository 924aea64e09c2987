#include "tsaug/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tsaug/augment.hpp"

namespace tsaug {

std::string to_string(AttackKind k) { return k == AttackKind::fgsm ? "fgsm" : "bim"; }

AttackKind parse_attack_kind(const std::string& text) {
  if (text == "fgsm") return AttackKind::fgsm;
  if (text == "bim") return AttackKind::bim;
  throw std::invalid_argument("unknown attack '" + text + "' (expected fgsm or bim)");
}

AttackConfig AttackConfig::make(AttackKind kind, double epsilon) {
  AttackConfig c;
  c.kind = kind;
  c.epsilon = epsilon;
  c.bim_step = epsilon / 10.0;
  c.bim_iters = 10;
  return c;
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("attack.epsilon must be >= 0");
  if (kind == AttackKind::bim) {
    if (bim_iters == 0) throw std::invalid_argument("attack.bim_iters must be positive");
    if (!(bim_step >= 0.0)) throw std::invalid_argument("attack.bim_step must be >= 0");
    // Relative slack: 10 * (eps / 10) can round just below eps.
    if (bim_step * static_cast<double>(bim_iters) < epsilon * (1.0 - 1e-12))
      throw std::invalid_argument("attack: bim_step * bim_iters must reach epsilon");
  }
}

namespace {

// One signed step for every series, projected into the ball around `origin`.
void signed_step(const ClassifierModel& model, std::vector<std::vector<double>>& current,
                 const std::vector<std::vector<double>>& origin, std::span<const std::size_t> labels, double step,
                 double epsilon) {
  const InputGradients g = input_loss_gradients(model, current, labels);
  for (std::size_t n = 0; n < current.size(); ++n) {
    for (std::size_t i = 0; i < current[n].size(); ++i) {
      const double moved = current[n][i] + step * sign(g.gradients[n][i]);
      current[n][i] = std::clamp(moved, origin[n][i] - epsilon, origin[n][i] + epsilon);
    }
  }
}

std::vector<std::vector<double>> run(const ClassifierModel& model, std::vector<std::vector<double>> series,
                                     std::span<const std::size_t> labels, const AttackConfig& config,
                                     std::vector<std::vector<double>>* iterates) {
  config.validate();
  const std::vector<std::vector<double>> origin = series;
  if (config.kind == AttackKind::fgsm) {
    const InputGradients g = input_loss_gradients(model, series, labels);
    for (std::size_t n = 0; n < series.size(); ++n)
      for (std::size_t i = 0; i < series[n].size(); ++i) series[n][i] += config.epsilon * sign(g.gradients[n][i]);
    return series;
  }
  for (std::size_t it = 0; it < config.bim_iters; ++it) {
    signed_step(model, series, origin, labels, config.bim_step, config.epsilon);
    if (iterates) iterates->push_back(series[0]);
  }
  return series;
}

}  // namespace

std::vector<double> fgsm(const ClassifierModel& model, std::span<const double> series, std::size_t label,
                         double epsilon) {
  AttackConfig c = AttackConfig::make(AttackKind::fgsm, epsilon);
  const std::size_t labels[1] = {label};
  return run(model, {std::vector<double>(series.begin(), series.end())}, labels, c, nullptr)[0];
}

std::vector<double> bim(const ClassifierModel& model, std::span<const double> series, std::size_t label,
                        const AttackConfig& config, std::vector<std::vector<double>>* iterates) {
  AttackConfig c = config;
  c.kind = AttackKind::bim;
  const std::size_t labels[1] = {label};
  return run(model, {std::vector<double>(series.begin(), series.end())}, labels, c, iterates)[0];
}

AttackResult attack_dataset(const ClassifierModel& model, const SeriesDataset& dataset, const AttackConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("attack_dataset: empty dataset");
  std::vector<std::vector<double>> values;
  std::vector<std::size_t> labels;
  for (const LabeledSeries& s : dataset.series) {
    values.push_back(s.values);
    labels.push_back(s.label);
  }
  AttackResult r;
  r.adversarial = dataset;
  r.adversarial.name = dataset.name + ".adv" + to_string(config.kind);
  const auto adv = run(model, std::move(values), labels, config, nullptr);
  for (std::size_t n = 0; n < adv.size(); ++n) r.adversarial.series[n].values = adv[n];
  r.accuracy = evaluate(model, r.adversarial).accuracy;
  return r;
}

std::filesystem::path adversarial_path(const std::filesystem::path& base, AttackKind kind) {
  std::filesystem::path p = base;
  p += ".adv" + to_string(kind);
  return p;
}

}  // namespace tsaug
