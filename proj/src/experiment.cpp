#include "tsaug/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <type_traits>

#include "tsaug/pca.hpp"

namespace tsaug {

namespace {

const std::vector<std::pair<std::string, std::string>>& known_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"seed", "root seed (required); every stage seed derives from it"},
      {"out", "output directory (default out; --out overrides)"},
      {"data.source", "synth or files (default synth)"},
      {"data.kind", "synthetic generator: sine_vs_sawtooth or shifted_gaussians"},
      {"data.n_per_class", "synthetic series per class and split (default 100)"},
      {"data.length", "synthetic series length (default 64)"},
      {"data.noise_sd", "synthetic noise standard deviation (default 0.3)"},
      {"data.seed", "synthetic generator seed (default: root seed)"},
      {"data.train", "UCR training file (data.source = files)"},
      {"data.test", "UCR test file (data.source = files)"},
      {"data.normalization", "znorm or raw (default znorm)"},
      {"odenet.epochs", "ODENet epochs (default 500)"},
      {"odenet.batch_size", "ODENet tuples per batch (default 256)"},
      {"odenet.learning_rate", "default 3e-4"},
      {"odenet.weight_decay", "default 1e-3"},
      {"augment.methods",
       "comma list of in_clamp_grad, in_sign_grad, out_sign_grad, rand_grad, spec_den (default all five)"},
      {"augment.beta", "clamp bound beta (default 0.33)"},
      {"augment.epsilon_max", "In-Sign-Grad epsilon range [0, epsilon_max] (default 0.33)"},
      {"augment.energy_fraction", "Spec-Den energy kept untouched (default 0.9)"},
      {"augment.perturb_fraction", "Spec-Den fraction of tail bins perturbed (default 0.75)"},
      {"augment.specden_grow_middle", "grow the middle bin of each triple instead of halving it (default false)"},
      {"augment.specden_complex_coefficients", "perturb complex coefficients, not magnitudes (default false)"},
      {"augment.epsilon_per_series", "one In-Sign-Grad epsilon per series (default false: per step)"},
      {"train.epochs", "classifier epochs (default 300)"},
      {"train.batch_size", "classifier batch size (default 64)"},
      {"train.learning_rate", "default 2e-4"},
      {"train.weight_decay", "default 1e-3"},
      {"train.feat_sim_methods", "augmentation methods also trained with Feat-Sim (default none)"},
      {"train.margin_alpha", "Feat-Sim margin alpha (default 0.2)"},
      {"train.feat_sim_weight", "Feat-Sim weight lambda (default 1.0)"},
      {"train.feat_sim_hinge", "hinge the triplet loss at zero (default true)"},
      {"attack.kinds", "comma list of fgsm, bim (default both)"},
      {"attack.epsilon", "l-infinity radius (default 0.1)"},
      {"attack.bim_step", "BIM step size (default epsilon / 10)"},
      {"attack.bim_iters", "BIM iterations (default 10)"},
      {"report.embeddings", "write embeddings_<tag>.csv PCA coordinates (default true)"},
  };
  return keys;
}

std::vector<AugmentMethod> parse_methods(const std::vector<std::string>& names) {
  std::vector<AugmentMethod> out;
  for (const std::string& n : names) {
    const AugmentMethod m = parse_augment_method(n);
    if (std::find(out.begin(), out.end(), m) != out.end()) throw std::invalid_argument("duplicate method " + n);
    out.push_back(m);
  }
  return out;
}

}  // namespace

std::string experiment_config_help() {
  std::string s;
  for (const auto& [k, v] : known_keys()) {
    s += "  " + k;
    s += std::string(k.size() < 36 ? 36 - k.size() : 1, ' ');
    s += v + "\n";
  }
  return s;
}

ExperimentConfig ExperimentConfig::from_config(const ConfigFile& f) {
  std::set<std::string> allowed;
  for (const auto& kv : known_keys()) allowed.insert(kv.first);
  for (const auto& [k, v] : f.entries())
    if (!allowed.contains(k)) throw std::invalid_argument("unknown config key '" + k + "'");
  if (!f.has("seed")) throw std::invalid_argument("config key 'seed' is required");

  ExperimentConfig c;
  c.seed = f.get_u64("seed", 0);
  c.out_dir = f.get_or("out", "out");
  const std::string source = f.get_or("data.source", "synth");
  if (source != "synth" && source != "files") throw std::invalid_argument("data.source must be synth or files");
  c.use_synth = source == "synth";
  c.synth.kind = parse_synth_kind(f.get_or("data.kind", "sine_vs_sawtooth"));
  c.synth.n_per_class = f.get_u64("data.n_per_class", c.synth.n_per_class);
  c.synth.length = f.get_u64("data.length", c.synth.length);
  c.synth.noise_sd = f.get_double("data.noise_sd", c.synth.noise_sd);
  c.synth.seed = f.get_u64("data.seed", c.seed);
  if (!c.use_synth) {
    c.train_path = f.get("data.train");
    c.test_path = f.get("data.test");
  }
  c.normalization = parse_normalization(f.get_or("data.normalization", "znorm"));

  c.odenet.epochs = f.get_u64("odenet.epochs", c.odenet.epochs);
  c.odenet.batch_size = f.get_u64("odenet.batch_size", c.odenet.batch_size);
  c.odenet.learning_rate = f.get_double("odenet.learning_rate", c.odenet.learning_rate);
  c.odenet.weight_decay = f.get_double("odenet.weight_decay", c.odenet.weight_decay);
  c.odenet.seed = derive_seed(c.seed, "odenet");

  c.methods = parse_methods(
      f.get_list("augment.methods", {"in_clamp_grad", "in_sign_grad", "out_sign_grad", "rand_grad", "spec_den"}));
  c.augment.beta = f.get_double("augment.beta", c.augment.beta);
  c.augment.epsilon_max = f.get_double("augment.epsilon_max", c.augment.epsilon_max);
  c.augment.energy_fraction = f.get_double("augment.energy_fraction", c.augment.energy_fraction);
  c.augment.perturb_fraction = f.get_double("augment.perturb_fraction", c.augment.perturb_fraction);
  c.augment.specden_grow_middle = f.get_bool("augment.specden_grow_middle", false);
  c.augment.specden_complex_coefficients = f.get_bool("augment.specden_complex_coefficients", false);
  c.augment.epsilon_per_series = f.get_bool("augment.epsilon_per_series", false);

  c.train.epochs = f.get_u64("train.epochs", c.train.epochs);
  c.train.batch_size = f.get_u64("train.batch_size", c.train.batch_size);
  c.train.learning_rate = f.get_double("train.learning_rate", c.train.learning_rate);
  c.train.weight_decay = f.get_double("train.weight_decay", c.train.weight_decay);
  c.train.margin_alpha = f.get_double("train.margin_alpha", c.train.margin_alpha);
  c.train.feat_sim_weight = f.get_double("train.feat_sim_weight", c.train.feat_sim_weight);
  c.train.feat_sim_hinge = f.get_bool("train.feat_sim_hinge", true);
  c.train.seed = derive_seed(c.seed, "classifier");
  c.feat_sim_methods = parse_methods(f.get_list("train.feat_sim_methods", {}));

  const double eps = f.get_double("attack.epsilon", 0.1);
  for (const std::string& k : f.get_list("attack.kinds", {"fgsm", "bim"})) {
    AttackConfig a = AttackConfig::make(parse_attack_kind(k), eps);
    a.bim_step = f.get_double("attack.bim_step", a.bim_step);
    a.bim_iters = f.get_u64("attack.bim_iters", a.bim_iters);
    c.attacks.push_back(a);
  }
  c.export_embeddings = f.get_bool("report.embeddings", true);
  c.config_hash = f.hash();
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  augment.validate();
  train.validate();
  for (const AttackConfig& a : attacks) a.validate();
  for (AugmentMethod m : feat_sim_methods)
    if (std::find(methods.begin(), methods.end(), m) == methods.end())
      throw std::invalid_argument("train.feat_sim_methods: " + to_string(m) + " is not in augment.methods");
  if (odenet.batch_size < 2) throw std::invalid_argument("odenet.batch_size must be at least 2");
  if (!use_synth && (train_path.empty() || test_path.empty()))
    throw std::invalid_argument("data.source = files needs data.train and data.test");
}

namespace {

using Clock = std::chrono::steady_clock;

class Pipeline {
 public:
  Pipeline(const ExperimentConfig& config, std::ostream* log) : c_(config), log_(log), dir_(config.out_dir) {}

  ExperimentReport run();

 private:
  template <class F>
  auto stage(const std::string& name, F&& body) -> decltype(body()) {
    const auto t0 = Clock::now();
    if (log_) *log_ << "[" << name << "] " << (done_.contains(name) ? "resuming" : "running") << std::endl;
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        finish(name, t0);
      } else {
        auto r = body();
        finish(name, t0);
        return r;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

  void finish(const std::string& name, Clock::time_point t0) {
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    timings_.emplace_back(name, secs);
    if (!done_.contains(name)) {
      done_.insert(name);
      std::ofstream(dir_ / "stages.done", std::ios::app) << name << '\n';
    }
  }

  bool resumable(const std::string& name, std::initializer_list<std::filesystem::path> files) const {
    if (!done_.contains(name)) return false;
    for (const auto& f : files)
      if (!std::filesystem::exists(f)) return false;
    return true;
  }

  void setup();
  void load_data();
  ClassifierModel classifier(const std::string& tag, const AugmentedDataset* aug, bool feat_sim);
  ReportRow score(const std::string& tag, const ClassifierModel& model, const std::string& method,
                  const std::string& regularizer);

  const ExperimentConfig& c_;
  std::ostream* log_;
  std::filesystem::path dir_;
  std::set<std::string> done_;
  std::vector<std::pair<std::string, double>> timings_;
  SeriesDataset train_, test_;
};

void Pipeline::setup() {
  stage("setup", [&] {
    std::filesystem::create_directories(dir_ / "data");
    std::filesystem::create_directories(dir_ / "models");
    std::filesystem::create_directories(dir_ / "augmented");
    std::filesystem::create_directories(dir_ / "adversarial");
    const auto manifest = dir_ / "manifest.txt";
    if (std::filesystem::exists(manifest)) {
      std::ifstream in(manifest);
      std::string line;
      std::getline(in, line);
      if (line != "config_hash=" + c_.config_hash)
        throw std::runtime_error(dir_.string() + " holds a run with a different config (" + line +
                                 "); use a fresh --out directory");
      std::ifstream stages(dir_ / "stages.done");
      for (std::string s; std::getline(stages, s);)
        if (!s.empty()) done_.insert(s);
    } else {
      std::ofstream(manifest) << "config_hash=" << c_.config_hash << '\n' << "seed=" << c_.seed << '\n';
      std::filesystem::remove(dir_ / "stages.done");
    }
  });
}

void Pipeline::load_data() {
  stage("data", [&] {
    const auto train_file = dir_ / "data" / "train.tsv", test_file = dir_ / "data" / "test.tsv";
    if (resumable("data", {train_file, test_file})) {
      train_ = load_ucr(train_file);
      test_ = load_ucr(test_file);
      return;
    }
    if (c_.use_synth) {
      DatasetSplit split = synth_dataset(c_.synth);
      train_ = std::move(split.train);
      test_ = std::move(split.test);
    } else {
      if (!c_.allow_long)
        throw std::runtime_error("dataset-file runs can take hours; pass --allow-long to run them");
      train_ = load_ucr(c_.train_path);
      test_ = load_ucr(c_.test_path);
      if (train_.length != test_.length || train_.label_map != test_.label_map)
        throw std::runtime_error("train and test files differ in length or label set");
    }
    if (c_.normalization == Normalization::znorm) {
      if (train_.normalization != Normalization::znorm) train_ = z_normalize(train_);
      if (test_.normalization != Normalization::znorm) test_ = z_normalize(test_);
    }
    save_ucr(train_, train_file);
    save_ucr(test_, test_file);
    // Reload so a fresh run and a resumed run see identical ids.
    train_ = load_ucr(train_file);
    test_ = load_ucr(test_file);
  });
}

ClassifierModel Pipeline::classifier(const std::string& tag, const AugmentedDataset* aug, bool feat_sim) {
  return stage("train/" + tag, [&] {
    const auto path = dir_ / "models" / (tag + ".clf.tsr");
    if (resumable("train/" + tag, {path})) return load_classifier(path);
    TrainConfig tc = c_.train;
    tc.feat_sim_enabled = feat_sim;
    ClassifierModel m = train_classifier(train_, tc, aug);
    save_classifier(m, path);
    return m;
  });
}

ReportRow Pipeline::score(const std::string& tag, const ClassifierModel& model, const std::string& method,
                          const std::string& regularizer) {
  ReportRow row;
  row.method = method;
  row.regularizer = regularizer;
  stage("evaluate/" + tag, [&] {
    std::vector<std::vector<double>> values;
    for (const LabeledSeries& s : test_.series) values.push_back(s.values);
    const Predictions p = predict(model, values);
    row.true_acc = 100.0 * evaluate(p.logits, test_, model.arch().num_classes).accuracy;
    row.intra_class_distance = mean_intra_class_distance(p.embeddings, test_);
    if (c_.export_embeddings) export_embeddings(p.embeddings, test_, dir_ / ("embeddings_" + tag + ".csv"));
  });
  for (const AttackConfig& a : c_.attacks) {
    const std::string name = "attack/" + tag + "/" + to_string(a.kind);
    const double acc = stage(name, [&] {
      const auto path = adversarial_path(dir_ / "adversarial" / (tag + "-" + to_string(a.kind)), a.kind);
      SeriesDataset adv;
      if (resumable(name, {path})) {
        adv = load_ucr(path);
      } else {
        adv = attack_dataset(model, test_, a).adversarial;
        save_ucr(adv, path);
      }
      return 100.0 * evaluate(model, adv).accuracy;
    });
    (a.kind == AttackKind::fgsm ? row.fgsm_acc : row.bim_acc) = acc;
  }
  return row;
}

ExperimentReport Pipeline::run() {
  const auto t0 = Clock::now();
  setup();
  load_data();

  ExperimentReport report;
  report.seed = c_.seed;
  report.config_hash = c_.config_hash;

  const ClassifierModel baseline = classifier("baseline", nullptr, false);
  report.rows.push_back(score("baseline", baseline, "baseline", "none"));

  const bool need_odenet = std::any_of(c_.methods.begin(), c_.methods.end(),
                                       [](AugmentMethod m) { return m != AugmentMethod::spec_den; });
  std::optional<OdeNetModel> odenet;
  if (need_odenet) {
    odenet = stage("odenet", [&] {
      const auto path = dir_ / "models" / "odenet.odenet.tsr";
      if (resumable("odenet", {path})) return load_odenet(path);
      OdeNetModel m = train_odenet(train_, c_.odenet);
      save_odenet(m, path);
      return m;
    });
  }

  for (AugmentMethod m : c_.methods) {
    const std::string tag = to_string(m);
    const AugmentedDataset aug = stage("augment/" + tag, [&] {
      const auto path = dir_ / "augmented" / (tag + ".tsv");
      if (resumable("augment/" + tag, {path, provenance_path(path)})) return load_augmented(path);
      AugmentConfig ac = c_.augment;
      ac.method = m;
      ac.seed = derive_seed(c_.seed, "augment/" + tag);
      // Out-Sign-Grad takes its loss gradients from the baseline classifier.
      AugmentedDataset a = augment_dataset(train_, odenet ? &*odenet : nullptr, &baseline, ac);
      save_augmented(a, path);
      return load_augmented(path);
    });
    const ClassifierModel model = classifier(tag, &aug, false);
    report.rows.push_back(score(tag, model, tag, "none"));
    if (std::find(c_.feat_sim_methods.begin(), c_.feat_sim_methods.end(), m) != c_.feat_sim_methods.end()) {
      const ClassifierModel fs = classifier(tag + "+fs", &aug, true);
      report.rows.push_back(score(tag + "+fs", fs, tag, "feat_sim"));
    }
  }

  // Per-column best of the two input-gradient methods.
  const ReportRow *clamp = nullptr, *sign = nullptr;
  for (const ReportRow& r : report.rows) {
    if (r.regularizer != "none") continue;
    if (r.method == "in_clamp_grad") clamp = &r;
    if (r.method == "in_sign_grad") sign = &r;
  }
  if (clamp && sign) {
    ReportRow best;
    best.method = "best_input_grad";
    best.regularizer = "none";
    best.true_acc = std::max(clamp->true_acc, sign->true_acc);
    if (clamp->fgsm_acc && sign->fgsm_acc) best.fgsm_acc = std::max(*clamp->fgsm_acc, *sign->fgsm_acc);
    if (clamp->bim_acc && sign->bim_acc) best.bim_acc = std::max(*clamp->bim_acc, *sign->bim_acc);
    report.rows.push_back(best);
  }

  stage("report", [&] {
    write_report_csv(report, dir_ / "report.csv");
    std::ofstream stats(dir_ / "embedding_stats.csv");
    stats << "method,regularizer,intra_class_distance\n";
    char buf[64];
    for (const ReportRow& r : report.rows) {
      if (!r.intra_class_distance) continue;
      std::snprintf(buf, sizeof buf, "%.17g", *r.intra_class_distance);
      stats << r.method << ',' << r.regularizer << ',' << buf << '\n';
    }
  });

  report.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  std::ofstream wall(dir_ / "wallclock.txt");
  for (const auto& [name, secs] : timings_) wall << name << ' ' << secs << '\n';
  wall << "total " << report.wall_seconds << '\n';
  return report;
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, std::ostream* log) {
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
  return Pipeline(config, log).run();
}

void write_report_csv(const ExperimentReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,regularizer,true_acc,fgsm_acc,bim_acc,seed,config_hash\n";
  for (const ReportRow& r : report.rows)
    out << r.method << ',' << r.regularizer << ',' << cell(r.true_acc) << ',' << cell(r.fgsm_acc) << ','
        << cell(r.bim_acc) << ',' << report.seed << ',' << report.config_hash << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace tsaug
