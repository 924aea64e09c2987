#pragma once

// Augmentation generators. Gradient-guided methods take the learned time
// gradient dz/dt from the ODENet; Out-Sign-Grad additionally takes the sign of
// the classifier's loss gradient; Spec-Den redistributes energy among the
// weakest DFT bins.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tsaug/classifier.hpp"
#include "tsaug/dataio.hpp"
#include "tsaug/odenet.hpp"
#include "tsaug/rng.hpp"

namespace tsaug {

enum class AugmentMethod { in_clamp_grad, in_sign_grad, out_sign_grad, rand_grad, spec_den };

std::string to_string(AugmentMethod m);
AugmentMethod parse_augment_method(const std::string& text);

struct AugmentConfig {
  AugmentMethod method = AugmentMethod::in_clamp_grad;
  double beta = 0.33;
  double epsilon_max = 0.33;
  double energy_fraction = 0.9;
  double perturb_fraction = 0.75;
  std::uint64_t seed = 0;
  // Grow the third bin by half its amplitude instead of shrinking it.
  bool specden_grow_middle = false;
  // Perturb complex coefficients instead of bin magnitudes (phase kept).
  bool specden_complex_coefficients = false;
  // One epsilon per series for in_sign_grad instead of one per time step.
  bool epsilon_per_series = false;

  void validate() const;
};

struct AugmentedSeries {
  std::vector<double> values;
  std::size_t label = 0;
  std::string source_id;
  AugmentMethod method = AugmentMethod::in_clamp_grad;
};

struct ProvenanceLink {
  std::string aug_id;
  std::string source_id;
  AugmentMethod method = AugmentMethod::in_clamp_grad;
  std::uint64_t seed = 0;
};

// `data.series[i]` was produced from the series `links[i].source_id`.
struct AugmentedDataset {
  SeriesDataset data;
  std::vector<ProvenanceLink> links;
};

// x inside (-beta, beta), otherwise +-beta.
double clamp(double x, double beta);
// -1, 0 or +1.
double sign(double x);

AugmentedSeries in_clamp_grad(const LabeledSeries& series, std::span<const double> gradients, double beta);
AugmentedSeries in_sign_grad(const LabeledSeries& series, std::span<const double> gradients, double epsilon_max,
                             Rng& rng, bool per_series = false);
// z + sign(dJ/dz) |clamp(dz/dt, beta)| with J the cross-entropy at the true label.
AugmentedSeries out_sign_grad(const LabeledSeries& series, const ClassifierModel& classifier,
                              std::span<const double> time_gradients, double beta);
// Same perturbation given a precomputed loss gradient.
AugmentedSeries out_sign_grad(const LabeledSeries& series, std::span<const double> loss_gradient,
                              std::span<const double> time_gradients, double beta);
AugmentedSeries rand_grad(const LabeledSeries& series, std::span<const double> time_gradients, double beta,
                          Rng& rng);

struct SpecDenTriple {
  std::array<std::size_t, 3> bins{};  // DFT bin indices, in rank order
  double energy_before = 0.0;         // sum of |Z|^2 over the three bins
  double energy_after = 0.0;
};

// Optional instrumentation of one spec_den call.
struct SpecDenTrace {
  std::vector<std::size_t> ranked_bins;  // bins 0..N/2 by descending magnitude
  std::size_t cutoff_rank = 0;           // C
  std::vector<SpecDenTriple> triples;
  double max_imaginary_residue = 0.0;
  std::vector<std::complex<double>> spectrum_before;
  std::vector<std::complex<double>> spectrum_after;
};

AugmentedSeries spec_den(const LabeledSeries& series, const AugmentConfig& config, Rng& rng,
                         SpecDenTrace* trace = nullptr);

// One augmented series per original; gradient methods need `odenet`,
// out_sign_grad also `classifier`. Series i draws from its own stream derived
// from (config.seed, i), so the result does not depend on scheduling.
AugmentedDataset augment_dataset(const SeriesDataset& dataset, const OdeNetModel* odenet,
                                 const ClassifierModel* classifier, const AugmentConfig& config);

// Dataset file plus the `aug_id,source_id,method,seed` sidecar.
std::filesystem::path provenance_path(const std::filesystem::path& data_path);
void save_augmented(const AugmentedDataset& aug, const std::filesystem::path& path);
AugmentedDataset load_augmented(const std::filesystem::path& path);

}  // namespace tsaug
