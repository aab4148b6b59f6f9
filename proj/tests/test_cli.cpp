// End-to-end runs of the msinr binary on a tiny configuration.
#include "msinr/checkpoint.hpp"
#include "msinr/image_io.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "msinr_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(MSINR_CLI) + " " + args + " > " + (kRoot / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string last_log() {
  std::ifstream in(kRoot / "last.log");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tiny_config() {
  const fs::path p = kRoot / "tiny.json";
  std::ofstream(p) << R"({
    "preset": "desk",
    "arch": {"width": 8, "hidden_layers": 1},
    "data": {"synth_n": 3, "size": 8},
    "meta": {"outer_steps": 4, "retrain_steps": 2, "precision": "f64"},
    "prune": {"kappa_fraction": 0.5, "probe_signals": 2},
    "eval": {"budget": 3, "n_signals": 2},
    "widths": [8, 6, 4]
  })";
  return "--config " + p.string();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }
  static void TearDownTestSuite() { fs::remove_all(kRoot); }
  static std::string out(const std::string& name) { return " -q --out " + (kRoot / name).string(); }
};

}  // namespace

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run("eval --precision f16"), 2);
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(run("meta-train --preset nope" + out("bad")), 2);
  std::ofstream(kRoot / "unknown.json") << R"({"mystery": 1})";
  EXPECT_EQ(run("meta-train --config " + (kRoot / "unknown.json").string() + out("bad")), 2);
  EXPECT_EQ(run("meta-train " + tiny_config() + " --preset desk" + out("bad")), 2);
}

TEST_F(Cli, DataErrorsExitWithThree) {
  std::ofstream(kRoot / "junk.ckpt") << "junk";
  EXPECT_EQ(run("prune-loop " + tiny_config() + " --init " + (kRoot / "junk.ckpt").string() + out("bad")), 3);
  EXPECT_EQ(run("fit " + tiny_config() + " --image " + (kRoot / "missing.png").string() + out("bad")), 3);
  const fs::path empty = kRoot / "empty_dir";
  fs::create_directories(empty);
  EXPECT_EQ(run("eval " + tiny_config() + " --data " + empty.string() + out("bad")), 3) << last_log();
}

TEST_F(Cli, SynthData) {
  ASSERT_EQ(run("synth-data " + tiny_config() + " --format ppm" + out("synth")), 0) << last_log();
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(kRoot / "synth" / "train")) {
    ++n;
    EXPECT_EQ(msinr::read_image(e.path()).width, 8u);
  }
  EXPECT_EQ(n, 3u);
  EXPECT_TRUE(fs::exists(kRoot / "synth" / "config.json"));
}

TEST_F(Cli, MetaTrainPruneEvalPipeline) {
  const std::string cfg = tiny_config();
  ASSERT_EQ(run("meta-train " + cfg + out("pipe")), 0) << last_log();
  const auto meta = kRoot / "pipe" / "meta.ckpt";
  ASSERT_TRUE(fs::exists(meta));
  EXPECT_TRUE(fs::exists(kRoot / "pipe" / "meta_loss.csv"));

  // Resuming from the checkpoint works and re-saves it.
  ASSERT_EQ(run("meta-train " + cfg + " --init " + meta.string() + out("resume")), 0) << last_log();

  ASSERT_EQ(run("prune-loop " + cfg + " --init " + meta.string() + out("pipe")), 0) << last_log();
  std::vector<fs::path> rounds;
  for (const auto& e : fs::directory_iterator(kRoot / "pipe"))
    if (e.path().filename().string().rfind("round_", 0) == 0) rounds.push_back(e.path());
  ASSERT_FALSE(rounds.empty());
  std::sort(rounds.begin(), rounds.end());
  const auto last = msinr::load_checkpoint(rounds.back());
  EXPECT_LE(last.mask.survivors(), last.mask.prunable_count() / 2);

  ASSERT_EQ(run("eval " + cfg + " " + rounds.back().string() + " --render" + out("eval")), 0) << last_log();
  for (const char* f : {"eval.csv", "signals.csv", "summary.json", "ckpt0_best.png", "ckpt0_worst.png"})
    EXPECT_TRUE(fs::exists(kRoot / "eval" / f)) << f;
  std::ifstream in(kRoot / "eval" / "summary.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["reports"][0]["n_signals"], 2);
  EXPECT_EQ(j["reports"][0]["budget"], 3);
  EXPECT_EQ(j["config"]["arch"]["width"], 8);

  // Baselines on the same data.
  std::ofstream(kRoot / "dn.json") << R"({"preset": "desk", "arch": {"width": 8, "hidden_layers": 1},
    "data": {"synth_n": 3, "size": 8}, "meta": {"outer_steps": 2, "precision": "f64"},
    "prune": {"method": "dense_narrow"}, "eval": {"budget": 2, "n_signals": 2}, "widths": [8, 6, 4]})";
  ASSERT_EQ(run("eval --config " + (kRoot / "dn.json").string() + " --target-params 40" + out("dn")), 0)
      << last_log();
  std::ofstream(kRoot / "os.json") << R"({"preset": "desk", "arch": {"width": 8, "hidden_layers": 1},
    "data": {"synth_n": 3, "size": 8}, "prune": {"method": "oneshot", "kappa_fraction": 0.3},
    "eval": {"budget": 4, "n_signals": 2}, "widths": [8, 6, 4]})";
  ASSERT_EQ(run("eval --config " + (kRoot / "os.json").string() + " " + meta.string() + out("os")), 0) << last_log();
  EXPECT_EQ(run("eval --config " + (kRoot / "os.json").string() + out("os")), 2);
}

TEST_F(Cli, FitWritesArtifacts) {
  ASSERT_EQ(run("fit " + tiny_config() + " --steps 5" + out("fit")), 0) << last_log();
  for (const char* f : {"fit.csv", "fit.png", "fit.ckpt"}) EXPECT_TRUE(fs::exists(kRoot / "fit" / f)) << f;
  EXPECT_NE(last_log().find("after 5 steps"), std::string::npos);
}

TEST_F(Cli, TicketAndReport) {
  std::ofstream(kRoot / "ticket.json") << R"({"preset": "ticket", "arch": {"width": 8, "hidden_layers": 1},
    "data": {"synth_n": 2, "size": 8}, "ticket": {"train_steps": 3, "rounds": 2}, "widths": [8, 6, 4]})";
  ASSERT_EQ(run("ticket --config " + (kRoot / "ticket.json").string() + out("ticket")), 0) << last_log();
  EXPECT_TRUE(fs::exists(kRoot / "ticket" / "tradeoff.csv"));

  std::ofstream(kRoot / "report.json") << R"({"preset": "desk", "arch": {"width": 8, "hidden_layers": 1},
    "data": {"synth_n": 3, "size": 8}, "meta": {"outer_steps": 2, "retrain_steps": 1, "precision": "f64"},
    "prune": {"kappa_fraction": 0.6, "probe_signals": 2}, "eval": {"budget": 2, "n_signals": 2, "levels": 1},
    "widths": [8, 6, 4, 2]})";
  ASSERT_EQ(run("report --config " + (kRoot / "report.json").string() + " --seeds 0 1" + out("report")), 0)
      << last_log();
  std::ifstream in(kRoot / "report" / "ordering.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line.rfind("seed", 0) != 0) ++rows;
  EXPECT_EQ(rows, 2u);
}
