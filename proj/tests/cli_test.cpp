#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rlbd/cli/commands.hpp"
#include "rlbd/cli/config.hpp"
#include "rlbd/cli/io.hpp"
#include "rlbd/error.hpp"
#include "rlbd/nn/checkpoint.hpp"
#include "rlbd/attacks/infrectrorl.hpp"

using namespace rlbd;
using namespace rlbd::cli;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / (std::string("rlbd_cli_") + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path dir(const std::string& name) const { return root_ / name; }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(std::move(args), out_, err_);
  }

  // Small training run shared by several tests.
  fs::path trained(const std::string& name, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"train", "-s", "output_dir=" + dir(name).string(), "-s", "train.total_steps=4000",
                                  "-s", "train.hidden=16,16", "-s", "seed=3"};
    args.insert(args.end(), extra.begin(), extra.end());
    EXPECT_EQ(run(args), 0) << err_.str();
    return dir(name) / "checkpoint.json";
  }

  fs::path root_;
  std::ostringstream out_;
  std::ostringstream err_;
};

std::map<std::string, std::string> directory_bytes(const fs::path& d) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(d)) files[entry.path().filename().string()] = read_text_file(entry.path());
  return files;
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  const RunConfig c;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
}

TEST(Config, ModifiedValuesRoundTrip) {
  RunConfig c;
  c.set("train.lr", "0.001");
  c.set("train.hidden", "32, 8");
  c.set("attack.kind", "trojanentrl");
  c.set("eval.schedule", "probability:0.3");
  c.set("attack.trigger.mask", "1,0,1,0");
  c.set("attack.trigger.pattern", "0.5,0,0.1,0");
  c.set("env.chain.gamma", "0.95");
  const auto text = serialize_config(c);
  const auto back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(serialize_config(back), text);
  EXPECT_EQ(back.get_uints("train.hidden"), (std::vector<std::uint64_t>{32, 8}));
  EXPECT_EQ(back.get_real("train.lr"), 0.001);
}

TEST(Config, JsonFlatAndNestedAgree) {
  const auto flat = parse_config(R"({"train.lr": 0.002, "env.grid": 6, "attack.kind": "infrectro"})");
  const auto nested = parse_config(R"({"train": {"lr": 0.002}, "env": {"grid": 6}, "attack": {"kind": "infrectro"}})");
  const auto kv = parse_config("train.lr = 0.002\n# comment\nenv.grid = 6\nattack.kind = infrectro\n");
  EXPECT_EQ(flat, nested);
  EXPECT_EQ(flat, kv);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config("nonsense.key = 1"), ConfigError);
  EXPECT_THROW(parse_config("train.lr = 0.1\ntrain.lr = 0.2"), ConfigError);
  EXPECT_THROW(parse_config("train.lr = fast"), ConfigError);
  EXPECT_THROW(parse_config("train.n_envs = -3"), ConfigError);
  EXPECT_THROW(parse_config("attack.kind = sneaky"), ConfigError);
  EXPECT_THROW(parse_config("just some words"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"lr": 0.1}, "train.lr": 0.2})"), ConfigError);
}

TEST(Config, ChainDiscountMustBeBelowOne) {
  RunConfig c;
  c.set("env.chain.gamma", "1");
  EXPECT_THROW(chain_config(c), ConfigError);
  c.set("env.chain.gamma", "0.9");
  EXPECT_EQ(chain_config(c).horizon, 132u);
}

TEST(Config, BuildersUseDefaults) {
  const RunConfig c;
  EXPECT_EQ(train_config(c).total_steps, 200000u);
  EXPECT_EQ(eval_config(c).episodes, 150u);
  EXPECT_EQ(injection_config(c).lambda, 0.1);
  EXPECT_EQ(poison_config(c).poison_rate, 0.00025);
  EXPECT_EQ(theorem_config(c).instances, 20u);
  EXPECT_EQ(backdoor::trigger_support(attack_trigger(c)), (std::vector<std::size_t>{0, 1, 8, 9}));
}

TEST(Io, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(CliTest, MalformedConfigWritesNothing) {
  const auto cfg = dir("bad.cfg");
  {
    std::ofstream f(cfg);
    f << "output_dir = " << dir("out").string() << "\ntrain.lr = banana\n";
  }
  EXPECT_EQ(run({"train", "--config", cfg.string()}), kExitConfig);
  EXPECT_FALSE(fs::exists(dir("out")));
  EXPECT_EQ(run({"train", "-s", "output_dir=" + dir("out").string(), "-s", "no.such.key=1"}), kExitConfig);
  EXPECT_FALSE(fs::exists(dir("out")));
  EXPECT_EQ(run({"bound-check", "-s", "output_dir=" + dir("out").string(), "-s", "env.chain.gamma=1"}), kExitConfig);
  EXPECT_FALSE(fs::exists(dir("out")));
  EXPECT_EQ(run({"frobnicate"}), kExitConfig);
}

TEST_F(CliTest, MissingCheckpointIsArtifactError) {
  EXPECT_EQ(run({"eval", "--checkpoint", dir("nope.json").string(), "-s", "output_dir=" + dir("o").string()}),
            kExitArtifact);
  EXPECT_EQ(run({"inject", "-s", "output_dir=" + dir("o").string()}), kExitConfig);
}

TEST_F(CliTest, TrainWritesArtifactsAndManifest) {
  const auto ckpt = trained("benign");
  const auto files = directory_bytes(dir("benign"));
  for (const char* name : {"checkpoint.json", "curve.csv", "config.txt", "train_summary.json", "manifest.json"}) {
    EXPECT_TRUE(files.count(name)) << name;
  }
  EXPECT_FALSE(files.count("poison_audit.csv"));
  const auto manifest = nlohmann::json::parse(files.at("manifest.json"));
  EXPECT_EQ(manifest["command"], "train");
  for (const auto& f : manifest["files"]) {
    EXPECT_EQ(f["sha256"], sha256_hex(files.at(f["path"].get<std::string>())));
  }
  const auto loaded = nn::load_checkpoint(ckpt);
  EXPECT_FALSE(loaded.metadata.injected);
  EXPECT_EQ(loaded.metadata.train_steps, 4000u);
}

TEST_F(CliTest, TrojanTrainingRecordsAudit) {
  const auto ckpt = trained("trojan", {"-s", "attack.kind=trojanentrl", "-s", "attack.trojanentrl.audit=true", "-s",
                                       "attack.trojanentrl.poison_rate=0.01"});
  EXPECT_TRUE(fs::exists(dir("trojan") / "poison_audit.csv"));
  EXPECT_FALSE(nn::load_checkpoint(ckpt).metadata.injected);
  EXPECT_NE(out_.str().find("poisoned transitions:"), std::string::npos);
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  trained("a");
  trained("b");
  auto a = directory_bytes(dir("a"));
  auto b = directory_bytes(dir("b"));
  // config.txt records output_dir and therefore differs; everything else must match.
  a.erase("config.txt");
  b.erase("config.txt");
  a.erase("manifest.json");
  b.erase("manifest.json");
  EXPECT_EQ(a, b);
}

TEST_F(CliTest, InjectDiffMatchesReportAndRoundTrips) {
  const auto clean_path = trained("clean");
  ASSERT_EQ(run({"inject", "--checkpoint", clean_path.string(), "-s", "output_dir=" + dir("inj").string(), "-s",
                 "attack.infrectro.samples=200"}),
            0)
      << err_.str();
  const auto clean = nn::load_checkpoint(clean_path);
  const auto text = read_text_file(dir("inj") / "checkpoint.json");
  const auto backdoored = nn::parse_checkpoint(text);
  EXPECT_TRUE(backdoored.metadata.injected);
  EXPECT_EQ(nn::serialize_checkpoint(backdoored), text);
  const auto report = nlohmann::json::parse(read_text_file(dir("inj") / "injection_report.json"));
  EXPECT_EQ(attacks::count_modified_parameters(clean.policy.body(), backdoored.policy.body()),
            report["weights_modified"].get<std::size_t>());
  EXPECT_EQ(report["equivalence_violations"], 0);
  EXPECT_TRUE(err_.str().empty());

  ASSERT_EQ(run({"inject", "--checkpoint", (dir("inj") / "checkpoint.json").string(), "-s",
                 "output_dir=" + dir("inj2").string(), "-s", "attack.infrectro.samples=50", "-s", "seed=9"}),
            0)
      << err_.str();
  EXPECT_NE(err_.str().find("warning: checkpoint is already injected"), std::string::npos);
}

TEST_F(CliTest, EvalNeverScheduleComparesAgainstItself) {
  const auto ckpt = trained("clean");
  ASSERT_EQ(run({"eval", "--checkpoint", ckpt.string(), "-s", "output_dir=" + dir("ev").string(), "-s",
                 "eval.schedule=never", "-s", "eval.episodes=20"}),
            0)
      << err_.str();
  const auto report = nlohmann::json::parse(read_text_file(dir("ev") / "eval_report.json"));
  EXPECT_EQ(report["cda_pct"], 100.0);
  EXPECT_FALSE(report.contains("asr_pct") && !report["asr_pct"].is_null());
  EXPECT_NE(out_.str().find("CDA 100.00%"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir("ev") / "episodes_clean.csv"));
}

TEST_F(CliTest, EvalInjectedPolicyPrintsAsr) {
  const auto ckpt = trained("clean");
  ASSERT_EQ(run({"inject", "--checkpoint", ckpt.string(), "-s", "output_dir=" + dir("inj").string(), "-s",
                 "attack.infrectro.samples=100"}),
            0);
  ASSERT_EQ(run({"eval", "--checkpoint", (dir("inj") / "checkpoint.json").string(), "-s",
                 "output_dir=" + dir("ev").string(), "-s", "eval.episodes=20", "-s", "eval.benign_checkpoint=" + ckpt.string(),
                 "-s", "eval.trigger_report=" + (dir("inj") / "injection_report.json").string()}),
            0)
      << err_.str();
  EXPECT_NE(out_.str().find("ASR 100.00%"), std::string::npos) << out_.str();
}

TEST_F(CliTest, BoundCheckIsDeterministic) {
  const std::vector<std::string> common{"-s", "theory.instances=1", "-s", "theory.rollouts=300", "-s",
                                        "theory.tv_states=200"};
  auto args_for = [&](const std::string& name) {
    std::vector<std::string> args{"bound-check", "-s", "output_dir=" + dir(name).string()};
    args.insert(args.end(), common.begin(), common.end());
    return args;
  };
  ASSERT_EQ(run(args_for("a")), 0) << err_.str();
  ASSERT_EQ(run(args_for("b")), 0) << err_.str();
  EXPECT_EQ(read_text_file(dir("a") / "bound_report.json"), read_text_file(dir("b") / "bound_report.json"));
}

TEST_F(CliTest, AblateRejectsUnknownAxisAndSweeps) {
  const auto ckpt = trained("clean");
  EXPECT_EQ(run({"ablate", "--checkpoint", ckpt.string(), "-s", "output_dir=" + dir("ab").string(), "-s",
                 "ablate.axis=temperature"}),
            kExitConfig);
  EXPECT_FALSE(fs::exists(dir("ab")));
  ASSERT_EQ(run({"ablate", "--checkpoint", ckpt.string(), "-s", "output_dir=" + dir("ab").string(), "-s",
                 "ablate.axis=trigger_side", "-s", "ablate.values=1,2", "-s", "eval.episodes=10", "-s",
                 "attack.infrectro.samples=50"}),
            0)
      << err_.str();
  const auto csv = read_text_file(dir("ab") / "ablation.csv");
  EXPECT_EQ(csv.rfind("value,mean_return,asr,cda,aer,clean_return,triggered_target_prob\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
