#pragma once

// Untargeted white-box l-infinity attacks on the classifier, using each
// sample's true label.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tsaug/classifier.hpp"
#include "tsaug/dataio.hpp"

namespace tsaug {

enum class AttackKind { fgsm, bim };

std::string to_string(AttackKind k);
AttackKind parse_attack_kind(const std::string& text);

struct AttackConfig {
  AttackKind kind = AttackKind::fgsm;
  double epsilon = 0.1;
  double bim_step = 0.01;
  std::size_t bim_iters = 10;

  // Default BIM schedule for a given radius: step epsilon / 10, 10 iterations.
  static AttackConfig make(AttackKind kind, double epsilon = 0.1);
  // Throws unless epsilon >= 0 and (for BIM) step * iters >= epsilon.
  void validate() const;
};

// z + epsilon * sign(dJ/dz).
std::vector<double> fgsm(const ClassifierModel& model, std::span<const double> series, std::size_t label,
                         double epsilon);

// Iterated signed steps, each projected back into the epsilon-ball around the
// original series. `iterates`, when given, receives every intermediate series.
std::vector<double> bim(const ClassifierModel& model, std::span<const double> series, std::size_t label,
                        const AttackConfig& config, std::vector<std::vector<double>>* iterates = nullptr);

struct AttackResult {
  SeriesDataset adversarial;
  double accuracy = 0.0;
};

// Perturbs every sample; deterministic and independent of batching.
AttackResult attack_dataset(const ClassifierModel& model, const SeriesDataset& dataset, const AttackConfig& config);

// "<path>.advfgsm" / "<path>.advbim"
std::filesystem::path adversarial_path(const std::filesystem::path& base, AttackKind kind);

}  // namespace tsaug
