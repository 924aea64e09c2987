#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsaug/cli.hpp"
#include "tsaug/config.hpp"
#include "tsaug/experiment.hpp"

using namespace tsaug;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tsaug");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ConfigFile parse(const std::string& text) {
  std::istringstream in(text);
  return ConfigFile::parse(in);
}

}  // namespace

TEST(Config, ParsesKeysCommentsAndLists) {
  const auto c = parse("# comment\nseed = 7\n\naugment.methods = spec_den, rand_grad\ntrain.feat_sim_hinge = false\n");
  EXPECT_EQ(c.get_u64("seed", 0), 7u);
  EXPECT_EQ(c.get_list("augment.methods", {}), (std::vector<std::string>{"spec_den", "rand_grad"}));
  EXPECT_FALSE(c.get_bool("train.feat_sim_hinge", true));
  EXPECT_EQ(c.get_double("augment.beta", 0.33), 0.33);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse("seed 7\n"), std::invalid_argument);
  EXPECT_THROW(parse("seed = 1\nseed = 2\n"), std::invalid_argument);
  EXPECT_THROW(parse("a.b.c = 1\n"), std::invalid_argument);
  EXPECT_THROW(parse("seed = x\n").get_u64("seed", 0), std::invalid_argument);
}

TEST(Config, HashIgnoresOrderAndTracksValues) {
  const auto a = parse("seed = 1\ntrain.epochs = 3\n");
  const auto b = parse("train.epochs = 3\nseed = 1\n");
  const auto c = parse("seed = 1\ntrain.epochs = 4\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(ExperimentConfig, RequiresSeedAndKnownKeys) {
  EXPECT_THROW(ExperimentConfig::from_config(parse("train.epochs = 3\n")), std::invalid_argument);
  EXPECT_THROW(ExperimentConfig::from_config(parse("seed = 1\ntrain.epoch = 3\n")), std::invalid_argument);
  EXPECT_THROW(ExperimentConfig::from_config(parse("seed = 1\naugment.methods = spec_den\n"
                                                   "train.feat_sim_methods = rand_grad\n")),
               std::invalid_argument);
  const auto ok = ExperimentConfig::from_config(parse("seed = 1\naugment.methods =\n"));
  EXPECT_TRUE(ok.methods.empty());
  EXPECT_EQ(ok.seed, 1u);
}

TEST(Cli, HelpListsEveryKey) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* key : {"augment.beta", "augment.epsilon_max", "augment.energy_fraction", "augment.perturb_fraction",
                          "augment.methods", "augment.specden_grow_middle", "augment.specden_complex_coefficients",
                          "augment.epsilon_per_series", "attack.kinds", "attack.epsilon", "attack.bim_step",
                          "attack.bim_iters"})
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
}

TEST(Cli, UsageErrorsExitOne) {
  const auto missing = cli({"--config", "/nonexistent/missing.cfg", "run"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("/nonexistent/missing.cfg"), std::string::npos);
  EXPECT_EQ(cli({"no-such-command"}).code, 1);
  EXPECT_EQ(cli({"attack", "--kind", "fgsm"}).code, 1);
}

TEST(Cli, RuntimeFailureExitsTwo) {
  const auto r = cli({"train", "--data", "/nonexistent/train.tsv"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/train.tsv"), std::string::npos);
}

TEST(Cli, SynthIsDeterministic) {
  const auto a = fresh_dir("tsaug_cli_synth_a"), b = fresh_dir("tsaug_cli_synth_b");
  ASSERT_EQ(cli({"--out", a.string(), "synth", "--kind", "sine_vs_sawtooth", "--seed", "7"}).code, 0);
  ASSERT_EQ(cli({"--seed", "7", "--out", b.string(), "synth", "--kind", "sine_vs_sawtooth"}).code, 0);
  EXPECT_EQ(slurp(a / "sine_vs_sawtooth_TRAIN.tsv"), slurp(b / "sine_vs_sawtooth_TRAIN.tsv"));
  EXPECT_EQ(slurp(a / "sine_vs_sawtooth_TEST.tsv"), slurp(b / "sine_vs_sawtooth_TEST.tsv"));
  EXPECT_FALSE(slurp(a / "sine_vs_sawtooth_TRAIN.tsv").empty());
}

TEST(Cli, SubcommandChain) {
  const auto d = fresh_dir("tsaug_cli_chain");
  const std::string out = d.string();
  ASSERT_EQ(cli({"--seed", "3", "--out", out, "synth", "--n-per-class", "10", "--length", "32"}).code, 0);
  const std::string train = (d / "sine_vs_sawtooth_TRAIN.tsv").string(), test = (d / "sine_vs_sawtooth_TEST.tsv").string();
  ASSERT_EQ(cli({"--seed", "3", "--out", out, "train-odenet", "--data", train, "--epochs", "2"}).code, 0);
  const auto a = cli({"--seed", "3", "--out", out, "augment", "--data", train, "--odenet",
                      (d / "odenet.odenet.tsr").string(), "--method", "in_clamp_grad"});
  ASSERT_EQ(a.code, 0) << a.err;
  const std::string aug = (d / "sine_vs_sawtooth_TRAIN_in_clamp_grad.tsv").string();
  ASSERT_TRUE(fs::exists(aug));
  ASSERT_TRUE(fs::exists(provenance_path(aug)));
  const auto t = cli({"--seed", "3", "--out", out, "train", "--data", train, "--augmented", aug, "--feat-sim",
                      "--epochs", "1", "--batch-size", "8", "--name", "icg_fs"});
  ASSERT_EQ(t.code, 0) << t.err;
  const std::string model = (d / "icg_fs.clf.tsr").string();
  const auto e = cli({"--out", out, "evaluate", "--model", model, "--data", test, "--method", "icg_fs"});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(e.out.rfind("dataset,method,true_acc,fgsm_acc,bim_acc,seed\n", 0), 0u);
  EXPECT_TRUE(fs::exists(d / "evaluation.csv"));
  EXPECT_EQ(cli({"--out", out, "attack", "--model", model, "--data", test, "--kind", "bim"}).code, 0);
  EXPECT_TRUE(fs::exists(d / "sine_vs_sawtooth_TEST.advbim"));
  EXPECT_EQ(cli({"--out", out, "export-pca", "--model", model, "--data", test}).code, 0);
  EXPECT_TRUE(fs::exists(d / "embeddings_icg_fs.csv"));
}
