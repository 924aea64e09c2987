#include "tsaug/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "tsaug/attacks.hpp"
#include "tsaug/augment.hpp"
#include "tsaug/config.hpp"
#include "tsaug/experiment.hpp"
#include "tsaug/pca.hpp"

namespace tsaug {

namespace {

namespace fs = std::filesystem;

// Raised for bad user input detected after option parsing (exit code 1).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

AugmentConfig augment_config_from(const ConfigFile& f) {
  AugmentConfig c;
  c.method = parse_augment_method(f.get_or("augment.method", "in_clamp_grad"));
  c.beta = f.get_double("augment.beta", c.beta);
  c.epsilon_max = f.get_double("augment.epsilon_max", c.epsilon_max);
  c.energy_fraction = f.get_double("augment.energy_fraction", c.energy_fraction);
  c.perturb_fraction = f.get_double("augment.perturb_fraction", c.perturb_fraction);
  c.specden_grow_middle = f.get_bool("augment.specden_grow_middle", false);
  c.specden_complex_coefficients = f.get_bool("augment.specden_complex_coefficients", false);
  c.epsilon_per_series = f.get_bool("augment.epsilon_per_series", false);
  c.seed = f.get_u64("seed", 0);
  c.validate();
  return c;
}

AttackConfig attack_config_from(const ConfigFile& f, AttackKind kind) {
  AttackConfig c = AttackConfig::make(kind, f.get_double("attack.epsilon", 0.1));
  c.bim_step = f.get_double("attack.bim_step", c.bim_step);
  c.bim_iters = f.get_u64("attack.bim_iters", c.bim_iters);
  c.validate();
  return c;
}

template <class T>
void overlay(ConfigFile& cfg, const std::string& key, const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, std::string>) {
    cfg.set(key, *v);
  } else if constexpr (std::is_same_v<T, bool>) {
    cfg.set(key, *v ? "true" : "false");
  } else if constexpr (std::is_floating_point_v<T>) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    cfg.set(key, buf);
  } else {
    cfg.set(key, std::to_string(*v));
  }
}

const char* kFooter = R"(Config file keys (`key = value`, used by `run`; `augment` and `attack`
read the augment.* / attack.* keys as defaults, command-line flags win):
)";

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial robustness toolkit for univariate time-series classifiers", "tsaug"};
  app.footer(std::string(kFooter) + experiment_config_help() +
             "\n  augment.method                       method for the `augment` subcommand\n"
             "\nExit codes: 0 success, 1 usage error, 2 runtime failure.");
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "config file of `key = value` lines");
  app.add_option("--seed", seed, "root seed");
  app.add_option("--out", out_dir, "output directory");

  // synth
  auto* synth = app.add_subcommand("synth", "write a synthetic train/test pair in UCR format");
  std::string synth_kind = "sine_vs_sawtooth";
  std::size_t n_per_class = 100, length = 64;
  double noise_sd = 0.3;
  synth->add_option("--kind", synth_kind, "sine_vs_sawtooth or shifted_gaussians")->capture_default_str();
  synth->add_option("--n-per-class", n_per_class)->capture_default_str();
  synth->add_option("--length", length)->capture_default_str();
  synth->add_option("--noise-sd", noise_sd)->capture_default_str();

  // train-odenet
  auto* todenet = app.add_subcommand("train-odenet", "fit the gradient field on a training file");
  std::string data_path;
  OdeNetTrainConfig ode_cfg;
  todenet->add_option("--data", data_path, "UCR training file")->required();
  todenet->add_option("--epochs", ode_cfg.epochs)->capture_default_str();
  todenet->add_option("--batch-size", ode_cfg.batch_size)->capture_default_str();

  // augment
  auto* aug = app.add_subcommand("augment", "generate one augmented series per training series");
  std::string odenet_path, classifier_path;
  std::optional<std::string> method;
  std::optional<double> beta, epsilon_max, energy_fraction, perturb_fraction;
  std::optional<bool> grow_middle, complex_coeffs, eps_per_series;
  aug->add_option("--data", data_path, "UCR training file")->required();
  aug->add_option("--odenet", odenet_path, "ODENet checkpoint (gradient methods)");
  aug->add_option("--classifier", classifier_path, "classifier checkpoint (out_sign_grad)");
  aug->add_option("--method", method, "in_clamp_grad, in_sign_grad, out_sign_grad, rand_grad or spec_den");
  aug->add_option("--beta", beta, "clamp bound (0.33)");
  aug->add_option("--epsilon-max", epsilon_max, "In-Sign-Grad epsilon range (0.33)");
  aug->add_option("--energy-fraction", energy_fraction, "Spec-Den untouched energy (0.9)");
  aug->add_option("--perturb-fraction", perturb_fraction, "Spec-Den perturbed tail fraction (0.75)");
  aug->add_flag("--specden-grow-middle", grow_middle, "grow the middle bin of each triple");
  aug->add_flag("--specden-complex-coefficients", complex_coeffs, "perturb complex coefficients");
  aug->add_flag("--epsilon-per-series", eps_per_series, "one In-Sign-Grad epsilon per series");

  // train
  auto* train = app.add_subcommand("train", "train a classifier");
  std::string augmented_path, name = "classifier";
  TrainConfig train_cfg;
  bool no_hinge = false;
  train->add_option("--data", data_path, "UCR training file")->required();
  train->add_option("--augmented", augmented_path, "augmented file written by `augment`");
  train->add_flag("--feat-sim", train_cfg.feat_sim_enabled, "add the Feat-Sim triplet loss");
  train->add_option("--alpha", train_cfg.margin_alpha, "Feat-Sim margin")->capture_default_str();
  train->add_option("--lambda", train_cfg.feat_sim_weight, "Feat-Sim weight")->capture_default_str();
  train->add_flag("--no-hinge", no_hinge, "do not clip the triplet loss at zero");
  train->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  train->add_option("--batch-size", train_cfg.batch_size)->capture_default_str();
  train->add_option("--name", name, "checkpoint name")->capture_default_str();

  // attack
  auto* attack = app.add_subcommand("attack", "perturb a dataset with FGSM or BIM");
  std::string model_path, kind_name = "fgsm";
  std::optional<double> epsilon, bim_step;
  std::optional<std::size_t> bim_iters;
  attack->add_option("--model", model_path, "classifier checkpoint")->required();
  attack->add_option("--data", data_path, "UCR file to attack")->required();
  attack->add_option("--kind", kind_name, "fgsm or bim")->capture_default_str();
  attack->add_option("--epsilon", epsilon, "l-infinity radius (0.1)");
  attack->add_option("--bim-step", bim_step, "BIM step (epsilon / 10)");
  attack->add_option("--bim-iters", bim_iters, "BIM iterations (10)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "clean, FGSM and BIM accuracy as CSV");
  std::string eval_method = "model";
  eval->add_option("--model", model_path, "classifier checkpoint")->required();
  eval->add_option("--data", data_path, "UCR test file")->required();
  eval->add_option("--method", eval_method, "method label for the CSV row")->capture_default_str();
  eval->add_option("--epsilon", epsilon, "attack radius (0.1)");

  // run
  auto* run = app.add_subcommand("run", "full pipeline from a config file");
  bool allow_long = false;
  run->add_flag("--allow-long", allow_long, "permit runs on dataset files");

  // export-pca
  auto* pca = app.add_subcommand("export-pca", "2-D PCA of classifier embeddings");
  std::string tag;
  pca->add_option("--model", model_path, "classifier checkpoint")->required();
  pca->add_option("--data", data_path, "UCR file")->required();
  pca->add_option("--tag", tag, "file tag (default: model stem)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    ConfigFile cfg;
    if (!config_path.empty()) {
      if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path);
      try {
        cfg = ConfigFile::load(config_path);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }
    if (seed) cfg.set("seed", std::to_string(*seed));
    const fs::path dir = out_dir.empty() ? fs::path(cfg.get_or("out", ".")) : fs::path(out_dir);
    const std::uint64_t root_seed = cfg.get_u64("seed", 0);

    if (*synth) {
      SynthSpec spec;
      try {
        spec.kind = parse_synth_kind(synth_kind);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      spec.n_per_class = n_per_class;
      spec.length = length;
      spec.noise_sd = noise_sd;
      spec.seed = cfg.has("seed") ? root_seed : spec.seed;
      const DatasetSplit split = synth_dataset(spec);
      fs::create_directories(dir);
      const fs::path train_file = dir / (synth_kind + "_TRAIN.tsv"), test_file = dir / (synth_kind + "_TEST.tsv");
      save_ucr(split.train, train_file);
      save_ucr(split.test, test_file);
      out << train_file.string() << '\n' << test_file.string() << '\n';
    } else if (*todenet) {
      ode_cfg.seed = derive_seed(root_seed, "odenet");
      const SeriesDataset ds = load_ucr(data_path);
      const OdeNetModel m = train_odenet(ds, ode_cfg);
      fs::create_directories(dir);
      save_odenet(m, dir / "odenet.odenet.tsr");
      out << "final_mse=" << m.provenance().final_mse << '\n' << (dir / "odenet.odenet.tsr").string() << '\n';
    } else if (*aug) {
      overlay(cfg, "augment.method", method);
      overlay(cfg, "augment.beta", beta);
      overlay(cfg, "augment.epsilon_max", epsilon_max);
      overlay(cfg, "augment.energy_fraction", energy_fraction);
      overlay(cfg, "augment.perturb_fraction", perturb_fraction);
      overlay(cfg, "augment.specden_grow_middle", grow_middle);
      overlay(cfg, "augment.specden_complex_coefficients", complex_coeffs);
      overlay(cfg, "augment.epsilon_per_series", eps_per_series);
      AugmentConfig ac;
      try {
        ac = augment_config_from(cfg);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      ac.seed = derive_seed(root_seed, "augment/" + to_string(ac.method));
      const SeriesDataset ds = load_ucr(data_path);
      std::optional<OdeNetModel> ode;
      std::optional<ClassifierModel> clf;
      if (!odenet_path.empty()) ode = load_odenet(odenet_path);
      if (!classifier_path.empty()) clf = load_classifier(classifier_path);
      const AugmentedDataset a = augment_dataset(ds, ode ? &*ode : nullptr, clf ? &*clf : nullptr, ac);
      fs::create_directories(dir);
      const fs::path file = dir / (fs::path(data_path).stem().string() + "_" + to_string(ac.method) + ".tsv");
      save_augmented(a, file);
      out << file.string() << '\n';
    } else if (*train) {
      train_cfg.feat_sim_hinge = !no_hinge;
      train_cfg.seed = derive_seed(root_seed, "classifier");
      const SeriesDataset ds = load_ucr(data_path);
      std::optional<AugmentedDataset> a;
      if (!augmented_path.empty()) a = load_augmented(augmented_path);
      if (train_cfg.feat_sim_enabled && !a) throw UsageError("--feat-sim needs --augmented");
      const ClassifierModel m = train_classifier(ds, train_cfg, a ? &*a : nullptr);
      fs::create_directories(dir);
      save_classifier(m, dir / (name + ".clf.tsr"));
      out << "final_ce=" << m.provenance().final_epoch_ce << '\n' << (dir / (name + ".clf.tsr")).string() << '\n';
    } else if (*attack) {
      overlay(cfg, "attack.epsilon", epsilon);
      overlay(cfg, "attack.bim_step", bim_step);
      overlay(cfg, "attack.bim_iters", bim_iters);
      AttackConfig ac;
      try {
        ac = attack_config_from(cfg, parse_attack_kind(kind_name));
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const ClassifierModel m = load_classifier(model_path);
      const SeriesDataset ds = load_ucr(data_path);
      const AttackResult r = attack_dataset(m, ds, ac);
      fs::create_directories(dir);
      const fs::path file = adversarial_path(dir / fs::path(data_path).stem(), ac.kind);
      save_ucr(r.adversarial, file);
      out << to_string(ac.kind) << "_acc=" << pct(r.accuracy) << '\n' << file.string() << '\n';
    } else if (*eval) {
      overlay(cfg, "attack.epsilon", epsilon);
      AttackConfig fg, bi;
      try {
        fg = attack_config_from(cfg, AttackKind::fgsm);
        bi = attack_config_from(cfg, AttackKind::bim);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const ClassifierModel m = load_classifier(model_path);
      const SeriesDataset ds = load_ucr(data_path);
      const std::string row = ds.name + "," + eval_method + "," + pct(evaluate(m, ds).accuracy) + "," +
                              pct(attack_dataset(m, ds, fg).accuracy) + "," + pct(attack_dataset(m, ds, bi).accuracy) +
                              "," + std::to_string(m.provenance().config.seed);
      const std::string header = "dataset,method,true_acc,fgsm_acc,bim_acc,seed";
      out << header << '\n' << row << '\n';
      if (!out_dir.empty()) {
        fs::create_directories(dir);
        const fs::path file = dir / "evaluation.csv";
        const bool fresh = !fs::exists(file);
        std::ofstream f(file, std::ios::app);
        if (fresh) f << header << '\n';
        f << row << '\n';
      }
    } else if (*run) {
      if (config_path.empty()) throw UsageError("run needs --config <file>");
      ExperimentConfig ec;
      try {
        ec = ExperimentConfig::from_config(cfg);
      } catch (const std::invalid_argument& e) {
        throw UsageError(config_path + ": " + e.what());
      }
      ec.out_dir = dir;
      ec.allow_long = allow_long;
      const ExperimentReport r = run_experiment(ec, &err);
      std::ifstream report(dir / "report.csv");
      out << report.rdbuf();
      err << "wall-clock " << r.wall_seconds << " s\n";
    } else if (*pca) {
      const ClassifierModel m = load_classifier(model_path);
      const SeriesDataset ds = load_ucr(data_path);
      fs::create_directories(dir);
      const fs::path file = dir / ("embeddings_" + (tag.empty() ? fs::path(model_path).stem().stem().string() : tag) +
                                   ".csv");
      export_embeddings(m, ds, file);
      out << file.string() << '\n';
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace tsaug
