#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli/commands.hpp"
#include "fscil/binary_io.hpp"
#include "fscil/metrics.hpp"
#include "fscil/optimizer.hpp"

namespace fs = std::filesystem;
using fscil::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  args.insert(args.begin(), "-q");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliRun : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("fscil_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  void make_data() {
    const auto r = call({"gen-synthetic-data", "--out-dir", dir.string(), "--base-classes", "3", "--inc-classes", "2",
                         "--train", "3", "--test", "2", "--points", "64", "--per-session", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  std::vector<std::string> tiny_train(const fs::path& run_dir) {
    return {"train", "--schedule", (dir / "schedule.json").string(), "--base", (dir / "base.json").string(),
            "--inc", (dir / "inc.json").string(), "--run-dir", run_dir.string(), "--set", "feature_dim=8",
            "--set", "point_dim=8", "--set", "n_views=2", "--set", "base_epochs=1", "--set", "inc_epochs=1",
            "--set", "shots=2", "--set", "n_aug=1"};
  }

  fs::path dir;
};

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(call({}).code, 2);
  EXPECT_EQ(call({"no-such-command"}).code, 2);
  EXPECT_EQ(call({"gen-benchmark", "--suite", "xyz"}).code, 2);
  EXPECT_EQ(call({"gen-benchmark"}).code, 2);
  EXPECT_EQ(call({"report", "--predictions", "/nonexistent.csv", "--schedule", "/nonexistent.json"}).code, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto r = call({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("gen-benchmark"), std::string::npos);
}

TEST(Cli, GenBenchmarkShippedSuites) {
  const auto s2s = call({"gen-benchmark", "--suite", "s2s"});
  EXPECT_EQ(s2s.code, 0) << s2s.err;
  EXPECT_EQ(s2s.out, "7 sessions: 55,4,4,4,4,4,4\n");
  const auto s2r = call({"gen-benchmark", "--suite", "s2r"});
  EXPECT_EQ(s2r.out, "12 sessions: 55,4,4,4,4,4,4,4,4,4,4,1\n");
}

TEST_F(CliRun, GenBenchmarkWritesByteStableSchedule) {
  ASSERT_EQ(call({"gen-benchmark", "--suite", "s2r", "--out", (dir / "a.json").string()}).code, 0);
  ASSERT_EQ(call({"gen-benchmark", "--suite", "s2r", "--out", (dir / "b.json").string()}).code, 0);
  EXPECT_EQ(fscil::io::read_file(dir / "a.json"), fscil::io::read_file(dir / "b.json"));
}

TEST_F(CliRun, GenSyntheticData) {
  make_data();
  EXPECT_TRUE(fs::exists(dir / "base.json"));
  EXPECT_TRUE(fs::exists(dir / "inc.json"));
  const auto sched = nlohmann::json::parse(fscil::io::read_text_file(dir / "schedule.json"));
  EXPECT_EQ(sched["sessions"].size(), 3u);
}

TEST_F(CliRun, BadManifestIsRuntimeError) {
  fscil::io::write_text_file(dir / "bad.json", R"({"name": "x", "classes": ["a", "a"]})");
  const auto r = call({"gen-benchmark", "--base", (dir / "bad.json").string(), "--inc", (dir / "bad.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("duplicate"), std::string::npos);
}

TEST_F(CliRun, UnknownConfigKeyIsUsageError) {
  make_data();
  auto args = tiny_train(dir / "run");
  args.push_back("--set");
  args.push_back("learning_rate=1");
  EXPECT_EQ(call(args).code, 2);
}

TEST_F(CliRun, TrainEvalReportRoundTrip) {
  make_data();
  const fs::path run_dir = dir / "run";
  const auto trained = call(tiny_train(run_dir));
  ASSERT_EQ(trained.code, 0) << trained.err;
  for (const char* f : {"predictions.csv", "report.json", "report.txt", "config.json", "training.json", "basis.pcv"})
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  for (int b = 1; b <= 3; ++b) {
    const auto cp = fscil::read_checkpoint(run_dir / "checkpoints" / ("session_0" + std::to_string(b) + ".ckpt"));
    EXPECT_TRUE(cp.optimizer.has_value());
  }

  const auto evaluated = call({"eval", "--run-dir", run_dir.string(), "--out", (dir / "eval.csv").string()});
  ASSERT_EQ(evaluated.code, 0) << evaluated.err;
  const auto train_log = fscil::read_prediction_log(run_dir / "predictions.csv");
  const auto eval_log = fscil::read_prediction_log(dir / "eval.csv");
  std::vector<fscil::PredictionRow> last;
  for (const auto& r : train_log.rows)
    if (r.session == 3) last.push_back(r);
  ASSERT_EQ(last.size(), eval_log.rows.size());
  for (std::size_t i = 0; i < last.size(); ++i) EXPECT_EQ(last[i].pred_label, eval_log.rows[i].pred_label);

  const auto reported = call({"report", "--predictions", (run_dir / "predictions.csv").string(), "--schedule",
                              (dir / "schedule.json").string(), "--out", (dir / "report.json").string()});
  ASSERT_EQ(reported.code, 0) << reported.err;
  const auto a = nlohmann::json::parse(fscil::io::read_text_file(dir / "report.json"));
  const auto b = nlohmann::json::parse(fscil::io::read_text_file(run_dir / "report.json"));
  EXPECT_EQ(a["micro"], b["micro"]);
  EXPECT_EQ(a["macro"], b["macro"]);
}

TEST_F(CliRun, EmbedAndFitBasis) {
  make_data();
  const auto emb = call({"embed", "--manifest", (dir / "base.json").string(), "--kind", "depth", "--split", "train",
                         "--out", (dir / "depth.json").string(), "--set", "feature_dim=8", "--set", "n_views=2"});
  ASSERT_EQ(emb.code, 0) << emb.err;
  EXPECT_TRUE(fs::exists(dir / "depth.emb1"));
  const auto fit = call({"fit-basis", "--embeddings", (dir / "depth.json").string(), "--energy", "0.9", "--out",
                         (dir / "basis.pcv").string()});
  ASSERT_EQ(fit.code, 0) << fit.err;
  EXPECT_NE(fit.out.find("of C=8"), std::string::npos);
}
