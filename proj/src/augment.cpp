#include "tsaug/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tsaug/dft.hpp"

namespace tsaug {

std::string to_string(AugmentMethod m) {
  switch (m) {
    case AugmentMethod::in_clamp_grad: return "in_clamp_grad";
    case AugmentMethod::in_sign_grad: return "in_sign_grad";
    case AugmentMethod::out_sign_grad: return "out_sign_grad";
    case AugmentMethod::rand_grad: return "rand_grad";
    case AugmentMethod::spec_den: return "spec_den";
  }
  throw std::logic_error("unknown augmentation method");
}

AugmentMethod parse_augment_method(const std::string& text) {
  for (AugmentMethod m : {AugmentMethod::in_clamp_grad, AugmentMethod::in_sign_grad, AugmentMethod::out_sign_grad,
                          AugmentMethod::rand_grad, AugmentMethod::spec_den})
    if (to_string(m) == text) return m;
  throw std::invalid_argument("unknown augmentation method '" + text +
                              "' (expected in_clamp_grad, in_sign_grad, out_sign_grad, rand_grad or spec_den)");
}

void AugmentConfig::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("augment.beta must be positive");
  if (!(epsilon_max >= 0.0)) throw std::invalid_argument("augment.epsilon_max must be non-negative");
  if (!(energy_fraction > 0.0 && energy_fraction < 1.0))
    throw std::invalid_argument("augment.energy_fraction must be in (0, 1)");
  if (!(perturb_fraction > 0.0 && perturb_fraction <= 1.0))
    throw std::invalid_argument("augment.perturb_fraction must be in (0, 1]");
}

double clamp(double x, double beta) {
  if (x >= beta) return beta;
  if (x <= -beta) return -beta;
  return x;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

namespace {

void check_lengths(const LabeledSeries& s, std::size_t n, const char* what) {
  if (s.values.size() != n)
    throw std::invalid_argument(std::string(what) + ": length " + std::to_string(n) + " != series length " +
                                std::to_string(s.values.size()));
}

AugmentedSeries derived(const LabeledSeries& s, AugmentMethod m) {
  return {s.values, s.label, s.id, m};
}

}  // namespace

AugmentedSeries in_clamp_grad(const LabeledSeries& series, std::span<const double> gradients, double beta) {
  check_lengths(series, gradients.size(), "in_clamp_grad gradients");
  AugmentedSeries out = derived(series, AugmentMethod::in_clamp_grad);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += clamp(gradients[i], beta);
  return out;
}

AugmentedSeries in_sign_grad(const LabeledSeries& series, std::span<const double> gradients, double epsilon_max,
                             Rng& rng, bool per_series) {
  check_lengths(series, gradients.size(), "in_sign_grad gradients");
  AugmentedSeries out = derived(series, AugmentMethod::in_sign_grad);
  const double shared = per_series ? rng.uniform(0.0, epsilon_max) : 0.0;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double eps = per_series ? shared : rng.uniform(0.0, epsilon_max);
    out.values[i] += eps * sign(gradients[i]);
  }
  return out;
}

AugmentedSeries out_sign_grad(const LabeledSeries& series, std::span<const double> loss_gradient,
                              std::span<const double> time_gradients, double beta) {
  check_lengths(series, loss_gradient.size(), "out_sign_grad loss gradient");
  check_lengths(series, time_gradients.size(), "out_sign_grad time gradients");
  AugmentedSeries out = derived(series, AugmentMethod::out_sign_grad);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] += sign(loss_gradient[i]) * std::abs(clamp(time_gradients[i], beta));
  return out;
}

AugmentedSeries out_sign_grad(const LabeledSeries& series, const ClassifierModel& classifier,
                              std::span<const double> time_gradients, double beta) {
  if (!classifier.provenance().trained) throw std::invalid_argument("out_sign_grad: classifier is untrained");
  const std::vector<std::vector<double>> one{series.values};
  const std::size_t label[1] = {series.label};
  const InputGradients g = input_loss_gradients(classifier, one, label);
  return out_sign_grad(series, g.gradients[0], time_gradients, beta);
}

AugmentedSeries rand_grad(const LabeledSeries& series, std::span<const double> time_gradients, double beta,
                          Rng& rng) {
  check_lengths(series, time_gradients.size(), "rand_grad time gradients");
  AugmentedSeries out = derived(series, AugmentMethod::rand_grad);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] += rng.sign() * std::abs(clamp(time_gradients[i], beta));
  return out;
}

AugmentedSeries spec_den(const LabeledSeries& series, const AugmentConfig& config, Rng& rng, SpecDenTrace* trace) {
  const std::size_t N = series.values.size();
  if (N < 8) throw std::invalid_argument("spec_den: series length must be at least 8");
  for (double v : series.values)
    if (!std::isfinite(v)) throw std::domain_error("spec_den: non-finite value");
  config.validate();

  std::vector<Complex> Z = dft(series.values);
  const std::vector<Complex> original = Z;
  const std::size_t half = N / 2;
  // Bins with a distinct conjugate partner count twice in the energy.
  auto weight = [&](std::size_t k) { return (k == 0 || (N % 2 == 0 && k == half)) ? 1.0 : 2.0; };
  auto bin_energy = [&](const Complex& c, std::size_t k) { return weight(k) * std::norm(c) / static_cast<double>(N); };

  std::vector<std::size_t> ranked(half + 1);
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(Z[a]) > std::abs(Z[b]); });

  const double total = energy(series.values);
  std::size_t C = ranked.size() - 1;
  double cumulative = 0.0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    cumulative += bin_energy(Z[ranked[r]], ranked[r]);
    if (cumulative >= config.energy_fraction * total) {
      C = r;
      break;
    }
  }

  // Self-conjugate bins (DC, Nyquist) are never perturbed: a complex change
  // there would leave an imaginary residue.
  std::vector<std::size_t> candidates;  // ranks
  for (std::size_t r = C + 1; r < ranked.size(); ++r)
    if (weight(ranked[r]) == 2.0) candidates.push_back(r);
  const auto pick = static_cast<std::size_t>(std::floor(config.perturb_fraction * static_cast<double>(candidates.size())));
  for (std::size_t i = 0; i < pick; ++i)
    std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
  candidates.resize(pick);
  std::sort(candidates.begin(), candidates.end());

  if (trace) {
    trace->ranked_bins = ranked;
    trace->cutoff_rank = C;
    trace->triples.clear();
  }

  const double mid_factor = config.specden_grow_middle ? 1.5 : 0.5;
  bool changed = false;
  for (std::size_t t = 0; t + 3 <= candidates.size(); t += 3) {
    const std::size_t k1 = ranked[candidates[t]], k2 = ranked[candidates[t + 1]], k3 = ranked[candidates[t + 2]];
    const Complex z1 = Z[k1], z2 = Z[k2], z3 = Z[k3];
    if (config.specden_complex_coefficients) {
      Z[k1] = z1 + z2 / 4.0;
      Z[k2] = z2 * mid_factor;
      Z[k3] = z3 + z2 / 4.0;
    } else {
      // Same update on magnitudes; every bin keeps its phase.
      auto with_magnitude = [](const Complex& c, double m) {
        const double a = std::abs(c);
        return a > 0.0 ? c * (m / a) : Complex(m, 0.0);
      };
      const double m2 = std::abs(z2);
      Z[k1] = with_magnitude(z1, std::abs(z1) + m2 / 4.0);
      Z[k2] = with_magnitude(z2, m2 * mid_factor);
      Z[k3] = with_magnitude(z3, std::abs(z3) + m2 / 4.0);
    }
    for (std::size_t k : {k1, k2, k3}) {
      Z[N - k] = std::conj(Z[k]);
      changed = changed || Z[k] != original[k];
    }
    if (trace) {
      SpecDenTriple tr;
      tr.bins = {k1, k2, k3};
      tr.energy_before = bin_energy(z1, k1) + bin_energy(z2, k2) + bin_energy(z3, k3);
      tr.energy_after = bin_energy(Z[k1], k1) + bin_energy(Z[k2], k2) + bin_energy(Z[k3], k3);
      trace->triples.push_back(tr);
    }
  }

  AugmentedSeries out = derived(series, AugmentMethod::spec_den);
  double residue = 0.0;
  if (changed) {
    const std::vector<Complex> x = inverse_dft(Z);
    for (std::size_t i = 0; i < N; ++i) {
      out.values[i] = x[i].real();
      residue = std::max(residue, std::abs(x[i].imag()));
    }
    if (!(residue < 1e-9)) throw std::domain_error("spec_den: inverse transform is not real");
  }
  if (trace) {
    trace->max_imaginary_residue = residue;
    trace->spectrum_before = original;
    trace->spectrum_after = Z;
  }
  return out;
}

AugmentedDataset augment_dataset(const SeriesDataset& dataset, const OdeNetModel* odenet,
                                 const ClassifierModel* classifier, const AugmentConfig& config) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("augment_dataset: empty dataset");
  const AugmentMethod m = config.method;
  if (m != AugmentMethod::spec_den && !odenet)
    throw std::invalid_argument("augment_dataset: " + to_string(m) + " needs a trained ODENet");
  if (m == AugmentMethod::out_sign_grad) {
    if (!classifier) throw std::invalid_argument("augment_dataset: out_sign_grad needs a classifier");
    if (!classifier->provenance().trained) throw std::invalid_argument("out_sign_grad: classifier is untrained");
  }

  InputGradients loss_grads;
  if (m == AugmentMethod::out_sign_grad) {
    std::vector<std::vector<double>> values;
    std::vector<std::size_t> labels;
    for (const LabeledSeries& s : dataset.series) {
      values.push_back(s.values);
      labels.push_back(s.label);
    }
    loss_grads = input_loss_gradients(*classifier, values, labels);
  }

  AugmentedDataset out;
  out.data.name = dataset.name + "+" + to_string(m);
  out.data.num_classes = dataset.num_classes;
  out.data.length = dataset.length;
  out.data.normalization = dataset.normalization;
  out.data.label_map = dataset.label_map;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const LabeledSeries& s = dataset.series[i];
    const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
    Rng rng(seed);
    std::vector<double> dzdt;
    if (m != AugmentMethod::spec_den) dzdt = series_gradients(*odenet, s);
    AugmentedSeries a;
    switch (m) {
      case AugmentMethod::in_clamp_grad: a = in_clamp_grad(s, dzdt, config.beta); break;
      case AugmentMethod::in_sign_grad:
        a = in_sign_grad(s, dzdt, config.epsilon_max, rng, config.epsilon_per_series);
        break;
      case AugmentMethod::out_sign_grad: a = out_sign_grad(s, loss_grads.gradients[i], dzdt, config.beta); break;
      case AugmentMethod::rand_grad: a = rand_grad(s, dzdt, config.beta, rng); break;
      case AugmentMethod::spec_den: a = spec_den(s, config, rng); break;
    }
    const std::string aug_id = s.id + ".aug";
    out.data.series.push_back({std::move(a.values), a.label, aug_id});
    out.links.push_back({aug_id, s.id, m, seed});
  }
  return out;
}

std::filesystem::path provenance_path(const std::filesystem::path& data_path) {
  std::filesystem::path p = data_path;
  p += ".prov.csv";
  return p;
}

void save_augmented(const AugmentedDataset& aug, const std::filesystem::path& path) {
  if (aug.links.size() != aug.data.size()) throw std::invalid_argument("save_augmented: provenance size mismatch");
  save_ucr(aug.data, path);
  std::ofstream out(provenance_path(path));
  if (!out) throw std::runtime_error("cannot write " + provenance_path(path).string());
  out << "aug_id,source_id,method,seed\n";
  for (const ProvenanceLink& l : aug.links)
    out << l.aug_id << ',' << l.source_id << ',' << to_string(l.method) << ',' << l.seed << '\n';
  if (!out) throw std::runtime_error("write failed: " + provenance_path(path).string());
}

AugmentedDataset load_augmented(const std::filesystem::path& path) {
  AugmentedDataset aug;
  aug.data = load_ucr(path);
  std::ifstream in(provenance_path(path));
  if (!in) throw std::runtime_error("missing provenance file " + provenance_path(path).string());
  std::string line;
  std::getline(in, line);
  if (line != "aug_id,source_id,method,seed")
    throw std::runtime_error(provenance_path(path).string() + ": bad header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 4)
      throw std::runtime_error(provenance_path(path).string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    aug.links.push_back({f[0], f[1], parse_augment_method(f[2]), std::stoull(f[3])});
  }
  if (aug.links.size() != aug.data.size())
    throw std::runtime_error(provenance_path(path).string() + ": " + std::to_string(aug.links.size()) +
                             " links for " + std::to_string(aug.data.size()) + " series");
  for (std::size_t i = 0; i < aug.links.size(); ++i) aug.data.series[i].id = aug.links[i].aug_id;
  return aug;
}

}  // namespace tsaug
