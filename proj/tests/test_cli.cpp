#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("trafficgp-cli-" + std::string(info->name()) + "-" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  [[nodiscard]] std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name), std::ios::binary) << content;
    return path(name);
  }

  std::string config(const std::string& name, const json& j) const { return write(name, j.dump(2)); }

  /// Runs the CLI with stdout/stderr captured; returns the exit status.
  int run(const std::string& args) {
    const std::string cmd = std::string(TRAFFICGP_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  [[nodiscard]] std::string read(const std::string& name) const {
    std::ifstream f(path(name), std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
  }

  [[nodiscard]] json read_json(const std::string& name) const { return json::parse(read(name)); }

  fs::path dir_;
};

json synthetic(int n, int seed) { return {{"n_points", n}, {"seed", seed}}; }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_F(Cli, GenerateDefaultsTo700Rows) {
  ASSERT_EQ(run("generate --out " + path("a.csv")), 0);
  const auto csv = read("a.csv");
  EXPECT_EQ(count_lines(csv), 701u);
  EXPECT_EQ(csv.rfind("time_h,value\n", 0), 0u);
}

TEST_F(Cli, GenerateIsReproducible) {
  const auto cfg = config("c.json", {{"data", {{"synthetic", synthetic(200, 42)}}}});
  ASSERT_EQ(run("generate --config " + cfg + " --out " + path("a.csv")), 0);
  ASSERT_EQ(run("generate --config " + cfg + " --out " + path("b.csv")), 0);
  EXPECT_EQ(read("a.csv"), read("b.csv"));
  EXPECT_EQ(count_lines(read("a.csv")), 201u);
}

TEST_F(Cli, InvalidJsonIsConfigErrorWithLocation) {
  const auto cfg = write("bad.json", "{\n  \"data\": {\n    \"synthetic\": [1,,2]\n  }\n}\n");
  EXPECT_EQ(run("train --config " + cfg), 2);
  const auto err = read("stderr.txt");
  EXPECT_NE(err.find("line 3"), std::string::npos) << err;
}

TEST_F(Cli, UnknownKeyIsConfigError) {
  const auto cfg = config("c.json", {{"train", {{"mode", "admm"}, {"learning_rate", 0.1}}}});
  EXPECT_EQ(run("train --config " + cfg), 2);
  EXPECT_NE(read("stderr.txt").find("learning_rate"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("train --mode sideways"), 2);
  EXPECT_EQ(run("worker"), 2);
  EXPECT_EQ(run("worker --listen nonsense"), 2);
  EXPECT_EQ(run("benchmark --k-list 2,x"), 2);
  EXPECT_EQ(run("--help"), 0);
  const auto csv_cfg = config("c.json", {{"data", {{"csv", path("none.csv")}}}});
  EXPECT_EQ(run("generate --config " + csv_cfg), 2);
}

TEST_F(Cli, CentralizedTrainReport) {
  const auto cfg = config("c.json", {{"data", {{"synthetic", synthetic(140, 3)}}},
                                     {"train", {{"mode", "centralized"}, {"optim", {{"max_iters", 15}}}}},
                                     {"output", path("out")}});
  ASSERT_EQ(run("train --config " + cfg), 0) << read("stderr.txt");
  const auto rep = read_json("out/train_report.json");
  EXPECT_EQ(rep["status"], "ok");
  EXPECT_EQ(rep["mode"], "centralized");
  EXPECT_EQ(rep["n_train"], 120);
  EXPECT_EQ(rep["theta_star"].size(), 7u);
  const auto trace = rep["objective_trace"].get<std::vector<double>>();
  ASSERT_GE(trace.size(), 2u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1]);
  EXPECT_TRUE(fs::exists(path("out/train_timing.json")));
  EXPECT_FALSE(rep.dump().find("wall") != std::string::npos);
}

TEST_F(Cli, AdmmWithTooFewPointsIsRuntimeError) {
  const auto cfg = config("c.json", {{"data", {{"synthetic", synthetic(30, 1)}}},
                                     {"train", {{"mode", "admm"}, {"admm", {{"k_workers", 4}}}}},
                                     {"output", path("out")}});
  EXPECT_EQ(run("train --config " + cfg), 3);
  const auto rep = read_json("out/train_report.json");
  EXPECT_EQ(rep["status"], "error");
  EXPECT_EQ(rep["error"]["code"], "INSUFFICIENT_DATA");
}

TEST_F(Cli, AdmmTrainThenEvaluateAllStrategies) {
  const json base = {{"data", {{"synthetic", synthetic(140, 5)}}},
                     {"train", {{"mode", "admm"}, {"admm", {{"k_workers", 2}, {"max_outer", 3}}}}},
                     {"predict", {{"strategy", "rbcm"}, {"benchmark", {"sod", "centralized"}}}},
                     {"output", path("out")}};
  const auto cfg = config("c.json", base);
  ASSERT_EQ(run("train --config " + cfg), 0) << read("stderr.txt");
  const auto tr = read_json("out/train_report.json");
  EXPECT_EQ(tr["executor"], "in-process");
  EXPECT_EQ(tr["history"].size(), 3u);
  EXPECT_EQ(tr["iterations"], 3);

  ASSERT_EQ(run("evaluate --config " + cfg), 0) << read("stderr.txt");
  const auto ev = read_json("out/eval_report.json");
  EXPECT_EQ(ev["strategy"], "rbcm");
  EXPECT_EQ(ev["n_test"], 20);
  for (const auto* s : {"rbcm", "sod", "centralized"}) {
    ASSERT_TRUE(ev["strategies"].contains(s)) << s;
    EXPECT_GT(ev["strategies"][s]["rmse"].get<double>(), 0.0);
    EXPECT_GT(ev["strategies"][s]["mape_percent"].get<double>(), 0.0);
  }
  EXPECT_EQ(ev["metrics"], ev["strategies"]["rbcm"]);
  const auto pred = read("out/predictions.csv");
  EXPECT_EQ(count_lines(pred), 21u);
  EXPECT_EQ(pred.rfind("time_h,actual,mean,variance\n", 0), 0u);
}

TEST_F(Cli, EvaluateOnDifferentDataIsModelMismatch) {
  const auto train_cfg = config("t.json", {{"data", {{"synthetic", synthetic(100, 1)}}},
                                           {"train", {{"optim", {{"max_iters", 3}}}}},
                                           {"output", path("out")}});
  ASSERT_EQ(run("train --config " + train_cfg), 0);
  const auto eval_cfg = config("e.json", {{"data", {{"synthetic", synthetic(100, 2)}}},
                                          {"predict", {{"strategy", "centralized"}}},
                                          {"output", path("eval")}});
  EXPECT_EQ(run("evaluate --config " + eval_cfg + " --model " + path("out/train_report.json")), 3);
  EXPECT_EQ(read_json("eval/eval_report.json")["error"]["code"], "MODEL_MISMATCH");
}

TEST_F(Cli, FusionStrategyNeedsAdmmModel) {
  const auto cfg = config("c.json", {{"data", {{"synthetic", synthetic(100, 1)}}},
                                     {"train", {{"optim", {{"max_iters", 3}}}}},
                                     {"output", path("out")}});
  ASSERT_EQ(run("train --config " + cfg), 0);
  EXPECT_EQ(run("evaluate --config " + cfg + " --strategy rbcm"), 3);
  EXPECT_EQ(read_json("out/eval_report.json")["error"]["code"], "MODEL_MISMATCH");
  EXPECT_EQ(run("evaluate --config " + cfg + " --model " + path("missing.json")), 3);
}

TEST_F(Cli, CentralizedEvaluateOnNoiselessSeasonalData) {
  // Pure weekly + daily sinusoids: the periodic kernel extrapolates almost exactly.
  const json data = {{"synthetic",
                      {{"n_points", 240}, {"smooth_noise_sigma", 0.0}, {"white_noise_sigma", 0.0}, {"seed", 0}}},
                     {"split", {{"train_fraction", 200.0 / 240.0}}}};
  const auto cfg = config("c.json", {{"data", data},
                                     {"train", {{"mode", "centralized"}, {"optim", {{"max_iters", 60}}}}},
                                     {"predict", {{"strategy", "centralized"}}},
                                     {"output", path("out")}});
  ASSERT_EQ(run("train --config " + cfg), 0) << read("stderr.txt");
  ASSERT_EQ(run("evaluate --config " + cfg), 0) << read("stderr.txt");
  const auto ev = read_json("out/eval_report.json");
  EXPECT_LT(ev["metrics"]["mape_percent"].get<double>(), 0.5);
}

TEST_F(Cli, BenchmarkWritesOneRowPerK) {
  const auto cfg = config("c.json", {{"data", {{"synthetic", synthetic(140, 2)}}},
                                     {"benchmark", {{"outer_iterations", 1}, {"repetitions", 1}}},
                                     {"output", path("out")}});
  ASSERT_EQ(run("benchmark --config " + cfg + " --k-list 1,2"), 0) << read("stderr.txt");
  const auto csv = read("out/benchmark.csv");
  EXPECT_EQ(csv.rfind("K,mean_local_update_ms,total_train_s\n", 0), 0u);
  EXPECT_EQ(count_lines(csv), 3u);
  EXPECT_EQ(read_json("out/benchmark_report.json")["rows"].size(), 2u);
}
