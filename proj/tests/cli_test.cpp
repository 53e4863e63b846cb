#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "demix/wav_io.hpp"
#include "support.hpp"

namespace demix {
namespace {

namespace fs = std::filesystem;
using testing::random_waveform;
using testing::ScratchDir;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct RunResult {
  int code = -1;
  std::string out;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

class CliTest : public ::testing::Test {
 protected:
  /// Runs the demix binary with `args`; stdout and stderr are captured together.
  RunResult demix(const std::string& args) {
    const fs::path log = dir_ / "cli.log";
    const std::string cmd = quote(DEMIX_CLI) + " " + args + " > " + quote(log.string()) + " 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
  }

  std::string path(const std::string& rel) { return quote((dir_ / rel).string()); }

  void make_dataset(int tracks) {
    const RunResult r = demix("make-dataset -o " + path("data") + " -n " + std::to_string(tracks) +
                              " --duration 2 --rate 8000 --seed 5 --source-seconds 2.5 --pool-size 3");
    ASSERT_EQ(r.code, 0) << r.out;
  }

  ScratchDir dir_;
};

TEST_F(CliTest, PassthroughPresetIsAnIdentity) {
  save_wav(random_waveform(2, 22050, 1), dir_ / "mix.wav");
  const RunResult r = demix("separate -c passthrough -i " + path("mix.wav") + " -o " + path("out"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(dir_ / "out" / "mix.wav"), slurp(dir_ / "mix.wav"));
}

TEST_F(CliTest, PoolsAndProceduralSourcesCombine) {
  fs::create_directories(dir_ / "vox");
  for (int i = 0; i < 2; ++i) save_wav(random_waveform(2, 12000, 40 + i, 0.5, 8000), dir_ / "vox" / ("v" + std::to_string(i) + ".wav"));
  RunResult r = demix("make-dataset -o " + path("data") + " -n 2 --duration 1 --rate 8000 --pool vocals=" + path("vox") +
                      " --procedural bass drums other --pool-size 2 --source-seconds 1.5");
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* s : {"mixture", "vocals", "bass", "drums", "other"}) {
    EXPECT_TRUE(fs::is_regular_file(dir_ / "data" / "track001" / (std::string(s) + ".wav"))) << s;
  }
  r = demix("make-dataset -o " + path("dup") + " -n 1 --duration 1 --rate 8000 --pool vocals=" + path("vox") +
            " --procedural vocals");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("both"), std::string::npos) << r.out;
}

TEST_F(CliTest, OracleDatasetEndToEnd) {
  make_dataset(3);
  RunResult r = demix("separate -c test-oracle -i " + path("data") + " -o " + path("pred") + " -j 4");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("separated 3 of 3 tracks"), std::string::npos) << r.out;
  for (const char* s : {"vocals", "bass", "drums", "other"}) {
    EXPECT_TRUE(fs::is_regular_file(dir_ / "pred" / "track000" / (std::string(s) + ".wav"))) << s;
  }
  r = demix("evaluate -d " + path("data") + " -p " + path("pred") + " -r " + path("report.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto report = nlohmann::json::parse(slurp(dir_ / "report.json"));
  EXPECT_GT(report.at("total").get<double>(), 8.0);
  EXPECT_EQ(report.at("n_records").get<int>(), 3);
}

TEST_F(CliTest, SeparationIsReproducibleForAFixedSeed) {
  make_dataset(1);
  ASSERT_EQ(demix("separate -c test-oracle --seed 9 -i " + path("data") + " -o " + path("a")).code, 0);
  ASSERT_EQ(demix("separate -c test-oracle --seed 9 -i " + path("data") + " -o " + path("b") + " -j 3").code, 0);
  ASSERT_EQ(demix("separate -c test-oracle --seed 10 -i " + path("data") + " -o " + path("c")).code, 0);
  const auto a = slurp(dir_ / "a" / "track000" / "vocals.wav");
  EXPECT_EQ(a, slurp(dir_ / "b" / "track000" / "vocals.wav"));
  EXPECT_NE(a, slurp(dir_ / "c" / "track000" / "vocals.wav"));
}

TEST_F(CliTest, MissingConfigIsAUsageError) {
  save_wav(random_waveform(1, 100, 1), dir_ / "mix.wav");
  const RunResult r = demix("separate -c no-such-config -i " + path("mix.wav") + " -o " + path("out"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("not found"), std::string::npos) << r.out;
  EXPECT_EQ(demix("separate -c passthrough -i " + path("absent.wav") + " -o " + path("out")).code, 1);
  EXPECT_EQ(demix("frobnicate").code, 1);
  EXPECT_EQ(demix("separate -i x").code, 1);
}

TEST_F(CliTest, FailingBackendGivesPartialExit) {
  make_dataset(2);
  const nlohmann::json cfg = {
      {"name", "broken"},
      {"pipeline", "single"},
      {"backend",
       {{"name", "crash"},
        {"kind", "external"},
        {"stems", {"vocals"}},
        {"command",
         {DEMIX_FAKE_SEPARATOR, "--input", "{input}", "--output-dir", "{output_dir}", "--stems", "vocals", "--mode",
          "fail"}},
        {"timeout_seconds", 30},
        {"chunk", {{"seconds", 0}}}}}};
  std::ofstream(dir_ / "broken.json") << cfg.dump();
  const RunResult r = demix("separate -c " + path("broken.json") + " -i " + path("data") + " -o " + path("pred"));
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("separated 0 of 2 tracks"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("status 3"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvaluateMissingStemPolicies) {
  make_dataset(2);
  for (const char* id : {"track000", "track001"}) {
    fs::create_directories(dir_ / "pred" / id);
    for (const char* s : {"vocals", "bass", "drums"}) {
      fs::copy_file(dir_ / "data" / id / (std::string(s) + ".wav"), dir_ / "pred" / id / (std::string(s) + ".wav"));
    }
  }
  RunResult r = demix("evaluate -d " + path("data") + " -p " + path("pred"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("other.wav"), std::string::npos) << r.out;
  r = demix("evaluate --missing zeros -d " + path("data") + " -p " + path("pred") + " -r " + path("r.json"));
  EXPECT_EQ(r.code, 0) << r.out;
  const auto report = nlohmann::json::parse(slurp(dir_ / "r.json"));
  EXPECT_EQ(report.at("per_stem").at("other").get<double>(), 0.0);
  r = demix("evaluate --stems vocals -d " + path("data") + " -p " + path("pred"));
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST_F(CliTest, LeaderboardSubmitViewAndErrors) {
  make_dataset(1);
  ASSERT_EQ(demix("separate -c test-oracle -i " + path("data") + " -o " + path("pred")).code, 0);
  ASSERT_EQ(demix("evaluate -d " + path("data") + " -p " + path("pred") + " -r " + path("r.json")).code, 0);
  RunResult r = demix("leaderboard -s " + path("board.jsonl") + " --submit " + path("r.json") +
                      " --name oracle-run --submitted-at 2024-06-01T00:00:00Z");
  ASSERT_EQ(r.code, 0) << r.out;
  r = demix("leaderboard -s " + path("board.jsonl") + " --sort vocals");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("oracle-run"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("vocals*"), std::string::npos) << r.out;

  r = demix("leaderboard -s " + path("board.jsonl") + " --sort piano");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("instrum"), std::string::npos) << r.out;

  r = demix("leaderboard -s " + path("board.jsonl") + " --submit " + path("r.json") +
            " --name bad --submitted-at yesterday");
  EXPECT_EQ(r.code, 1);

  { std::ofstream(dir_ / "board.jsonl", std::ios::app) << "garbage\n"; }
  const std::string before = slurp(dir_ / "board.jsonl");
  r = demix("leaderboard -s " + path("board.jsonl") + " --submit " + path("r.json") + " --name again");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(slurp(dir_ / "board.jsonl"), before);
}

TEST_F(CliTest, OptimizeWeightsWritesBestVectors) {
  make_dataset(2);
  const RunResult r = demix("optimize-weights -c test-oracle -d " + path("data") +
                            " --grid 0:2 --stems vocals bass --cache " + path("cache") + " --output " + path("w.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto w = nlohmann::json::parse(slurp(dir_ / "w.json"));
  EXPECT_EQ(w.at("vocals").at("weights").size(), 3u);
  EXPECT_EQ(w.at("bass").at("weights").size(), 4u);
  EXPECT_FALSE(w.contains("drums"));
  // A second run reads the cache and agrees.
  const RunResult again = demix("optimize-weights -c test-oracle --grid 0:2 --stems vocals bass --cache " +
                                path("cache") + " --output " + path("w2.json"));
  ASSERT_EQ(again.code, 0) << again.out;
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "w2.json")).at("vocals").at("weights"), w.at("vocals").at("weights"));
}

TEST_F(CliTest, BackendsListsPresetsAndMembers) {
  RunResult r = demix("backends");
  EXPECT_EQ(r.code, 0);
  for (const char* p : {"mdx23", "cdx23", "test-oracle", "passthrough"}) EXPECT_NE(r.out.find(p), std::string::npos);
  r = demix("backends -c mdx23");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("complement"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace demix
