#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsaug/attacks.hpp"
#include "tsaug/augment.hpp"
#include "tsaug/classifier.hpp"
#include "tsaug/config.hpp"
#include "tsaug/dataio.hpp"
#include "tsaug/odenet.hpp"

namespace tsaug {

// Failure inside one pipeline stage; what() starts with "[stage] ".
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  bool use_synth = true;
  SynthSpec synth;
  std::filesystem::path train_path, test_path;
  Normalization normalization = Normalization::znorm;
  OdeNetTrainConfig odenet;
  std::vector<AugmentMethod> methods;
  AugmentConfig augment;
  TrainConfig train;
  std::vector<AugmentMethod> feat_sim_methods;
  std::vector<AttackConfig> attacks;
  bool export_embeddings = true;
  std::filesystem::path out_dir = "out";
  bool allow_long = false;
  std::string config_hash;

  // Every key is optional except `seed`; unknown keys are rejected.
  static ExperimentConfig from_config(const ConfigFile& file);
  void validate() const;
};

// Help text listing every accepted config key with its default.
std::string experiment_config_help();

struct ReportRow {
  std::string method;       // baseline, an augmentation method, or best_input_grad
  std::string regularizer;  // none or feat_sim
  double true_acc = 0.0;    // percent
  std::optional<double> fgsm_acc, bim_acc;
  std::optional<double> intra_class_distance;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::uint64_t seed = 0;
  std::string config_hash;
  double wall_seconds = 0.0;
};

// Full pipeline into config.out_dir. Finished stages found on disk (same
// config hash) are loaded instead of recomputed. Progress goes to `log` when
// given.
ExperimentReport run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// `method,regularizer,true_acc,fgsm_acc,bim_acc,seed,config_hash`
void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path);

}  // namespace tsaug
