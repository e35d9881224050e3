#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ihgnn/cli.hpp"
#include "ihgnn/snapshot.hpp"
#include "ihgnn/training.hpp"

namespace ihgnn {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> records(const std::string& text) {
  std::vector<json> r;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) r.push_back(json::parse(line));
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ihgnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void generate_small() {
    const auto r = run({"generate", "--out", path("data"), "--users", "60", "--queries", "20",
                        "--products", "80", "--words", "40", "--clusters", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

TEST_F(CliTest, GradcheckExample) {
  const auto r = run({"gradcheck", "--d", "3", "--layers", "2", "--order", "3", "--seed", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto rec = records(r.out);
  ASSERT_EQ(rec.size(), 2u);
  EXPECT_LE(rec[1]["max_relative_error"].get<double>(), 1e-4);
  EXPECT_TRUE(rec[1]["passed"].get<bool>());
}

TEST_F(CliTest, GradcheckVariants) {
  for (const auto& extra : std::vector<std::vector<std::string>>{
           {"--subset", "up", "--unweighted", "--order", "1"},
           {"--subset", "qp", "--order", "2"},
           {"--unweighted", "--order", "1"},
           {"--order", "1"}}) {
    std::vector<std::string> args = {"gradcheck", "--d", "3"};
    args.insert(args.end(), extra.begin(), extra.end());
    EXPECT_EQ(run(args).code, 0);
  }
}

TEST_F(CliTest, GenerateWritesDataset) {
  generate_small();
  EXPECT_TRUE(fs::exists(path("data/interactions.tsv")));
  EXPECT_TRUE(fs::exists(path("data/query_words.tsv")));
}

TEST_F(CliTest, TrainZeroEpochsWritesInitialization) {
  generate_small();
  const auto r = run({"train", "--data", path("data"), "--model", path("m.json"), "--epochs", "0",
                      "--d", "4", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rec = records(r.out);
  ASSERT_EQ(rec.size(), 2u);
  EXPECT_EQ(rec[0]["record"], "config");
  EXPECT_EQ(rec[1]["record"], "summary");
  EXPECT_EQ(rec[1]["epochs_run"], 0);
  EXPECT_TRUE(rec[1]["selected_epoch"].is_null());

  const auto snap = load_snapshot(path("m.json"));
  Rng rng(3);
  EXPECT_EQ(snap.params, initialize_parameters(snap.config, snap.counts, snap.word_count, rng));
}

TEST_F(CliTest, ConfigEchoHasResolvedDefaults) {
  generate_small();
  const auto r = run({"train", "--data", path("data"), "--model", path("m.json"), "--epochs", "1",
                      "--d", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto config = records(r.out).front();
  EXPECT_EQ(config["model"]["d"], 4);
  EXPECT_EQ(config["model"]["layers"], 2);
  EXPECT_EQ(config["model"]["order"], 3);
  EXPECT_EQ(config["model"]["lambda"], 0.5);
  EXPECT_EQ(config["model"]["subset"], "uqp");
  EXPECT_EQ(config["train"]["lr"], 0.001);
  EXPECT_EQ(config["train"]["batch_size"], 100);
  EXPECT_EQ(config["train"]["negatives"], 10);
  EXPECT_EQ(config["train"]["epochs"], 1);
  EXPECT_EQ(config["train"]["patience"], 10);
  EXPECT_EQ(config["seed"], 1);
}

TEST_F(CliTest, TrainIsByteDeterministic) {
  generate_small();
  const std::vector<std::string> args = {"train", "--data", "../data", "--model", "m.json",
                                         "--report", "r.jsonl", "--epochs", "2", "--d", "4"};
  const auto cwd = fs::current_path();
  for (const char* sub : {"a", "b"}) {
    fs::create_directories(dir_ / sub);
    fs::current_path(dir_ / sub);
    const auto r = run(args);
    fs::current_path(cwd);
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(dir_ / "a/m.json"), slurp(dir_ / "b/m.json"));
  EXPECT_EQ(slurp(dir_ / "a/r.jsonl"), slurp(dir_ / "b/r.jsonl"));
  EXPECT_FALSE(slurp(dir_ / "a/r.jsonl").empty());
}

TEST_F(CliTest, RecordTimingAddsSeconds) {
  generate_small();
  const auto r = run({"train", "--data", path("data"), "--model", path("m.json"), "--epochs", "1",
                      "--d", "4", "--record-timing"});
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(records(r.out)[1].contains("seconds"));
}

TEST_F(CliTest, EvaluateEmitsMetrics) {
  generate_small();
  ASSERT_EQ(run({"train", "--data", path("data"), "--model", path("m.json"), "--epochs", "1",
                 "--d", "4"}).code,
            0);
  const auto r = run({"evaluate", "--data", path("data"), "--model", path("m.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = records(r.out).back();
  EXPECT_EQ(m["record"], "metrics");
  for (const char* key : {"k", "hr", "ndcg", "map", "evaluated_keys", "skipped_keys"}) {
    EXPECT_TRUE(m.contains(key)) << key;
  }
  EXPECT_EQ(m["k"], 10);
}

TEST_F(CliTest, EvaluateRejectsForeignSnapshot) {
  generate_small();
  ASSERT_EQ(run({"train", "--data", path("data"), "--model", path("m.json"), "--epochs", "0",
                 "--d", "4"}).code,
            0);
  ASSERT_EQ(run({"generate", "--out", path("other"), "--users", "61", "--queries", "20",
                 "--products", "80", "--words", "40", "--clusters", "4"}).code,
            0);
  EXPECT_EQ(run({"evaluate", "--data", path("other"), "--model", path("m.json")}).code, 2);
}

TEST_F(CliTest, AblateDefaultSpecGivesSixRecords) {
  const auto r = run({"ablate", "--epochs", "1", "--d", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rec = records(r.out);
  ASSERT_EQ(rec.size(), 7u);
  const std::vector<std::string> names = {"IHGNN-up", "IHGNN-qp", "HyperGCN",
                                          "IHGNN-O1", "IHGNN-O2", "IHGNN-O3"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_EQ(rec[i + 1]["record"], "metrics");
    EXPECT_EQ(rec[i + 1]["variant"], names[i]);
    EXPECT_TRUE(rec[i + 1].contains("ndcg"));
  }
  EXPECT_EQ(rec[0]["synthetic"]["users"], 300);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"bogus"}).code, 1);
  EXPECT_EQ(run({"gradcheck", "--no-such-flag"}).code, 1);
  EXPECT_EQ(run({"gradcheck", "--order", "3", "--unweighted"}).code, 1);
  EXPECT_EQ(run({"gradcheck", "--subset", "uq"}).code, 1);
  EXPECT_EQ(run({"train", "--model", "x"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, MissingFilesAreDataErrors) {
  const auto r = run({"train", "--data", path("nowhere"), "--model", path("m.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(path("nowhere")), std::string::npos) << r.err;
  EXPECT_EQ(run({"evaluate", "--data", path("nowhere"), "--model", path("none.json")}).code, 2);
}

TEST_F(CliTest, DivergenceIsANumericalFailure) {
  generate_small();
  const auto r = run({"train", "--data", path("data"), "--model", path("m.json"), "--epochs", "2",
                      "--d", "4", "--lr", "1e308"});
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_FALSE(fs::exists(path("m.json")));
}

}  // namespace
}  // namespace ihgnn
