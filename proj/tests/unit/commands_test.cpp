// Copyright (c) 2026 The hiertune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <gtest/gtest.h>

#include "hiertune/commands.hpp"
#include "hiertune/error.hpp"

namespace hiertune {
namespace {

const std::filesystem::path kBenchmarks = std::filesystem::path(HIERTUNE_SOURCE_DIR) / "workloads/benchmarks.json";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

int column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  ADD_FAILURE() << "missing column " << name;
  return 0;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(HIERTUNE_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Commands : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           (std::string("hiertune-cmd-") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
    workload_ = dir_ / "small.json";
    std::ofstream(workload_) << R"({"networks": [{"name": "small", "target": {"tiling_levels": 2},
      "subgraphs": [
        {"id": "mm", "name": "mm", "weight": 2, "nodes": [{"kind": "MatMul", "shape": {"M": 64, "K": 64, "N": 64}}]},
        {"id": "sm", "name": "sm", "weight": 1, "nodes": [{"kind": "Softmax", "shape": {"i": 64, "j": 32}}]}]}]})";
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  RunConfig small(const std::string& sub, std::int64_t trials) const {
    RunConfig cfg;
    cfg.workload = workload_;
    cfg.tuner.trials = trials;
    cfg.tuner.k = 16;
    cfg.tuner.tracks = 16;
    cfg.tuner.stopping.lambda = 5;
    cfg.tuner.stopping.min_tracks = 2;
    cfg.tuner.rl.hidden = {32};
    cfg.tuner.gbt.trees = 10;
    cfg.out = dir_ / sub;
    return cfg;
  }

  std::filesystem::path dir_;
  std::filesystem::path workload_;
};

TEST_F(Commands, TuneGemmSmall) {
  RunConfig cfg;
  cfg.workload = kBenchmarks;
  cfg.network = "gemm-s";
  cfg.tuner.trials = 200;
  cfg.out = dir_ / "gemm-s";
  auto outcome = cmd_tune(cfg);
  EXPECT_LE(outcome.report.trials, 200);
  EXPECT_GT(outcome.report.f_estimate, 0.0);
  auto summary = nlohmann::json::parse(slurp(cfg.out / "summary.json"));
  EXPECT_EQ(summary["trials"].get<std::int64_t>(), outcome.report.trials);
  EXPECT_DOUBLE_EQ(summary["f_estimate_s"].get<double>(), outcome.report.f_estimate);

  // Totals replayed from the trajectory agree with the summary.
  auto replay = replay_trajectory(cfg.out / "trajectory.jsonl");
  EXPECT_EQ(replay.total_measured, outcome.report.trials);
  EXPECT_EQ(replay.allocations, outcome.report.allocations);
  EXPECT_DOUBLE_EQ(replay.final_f, outcome.report.f_estimate);
  EXPECT_TRUE(replay.rounds_within_k);
  EXPECT_TRUE(replay.episodes_within_budget);
}

TEST_F(Commands, ResumeContinuesExactly) {
  auto cfg = small("whole", 160);
  cmd_tune(cfg);

  auto part = small("part", 160);
  part.validate();
  auto net = load_network(part.workload, part.network);
  TuningSession session(net, part.tuner, make_backend(part, net));
  session.metadata = part.to_json().dump();
  for (int r = 0; r < 4; ++r) session.run_round();
  std::filesystem::create_directories(part.out);
  session.save(part.out / "checkpoint.bin");

  RunConfig only_out;
  only_out.out = part.out;
  auto resumed = cmd_tune(only_out, true);
  EXPECT_TRUE(slurp(part.out / "trajectory.jsonl") == slurp(cfg.out / "trajectory.jsonl"));
  EXPECT_EQ(slurp(part.out / "allocation.csv"), slurp(cfg.out / "allocation.csv"));
  EXPECT_EQ(resumed.report.f_estimate, nlohmann::json::parse(slurp(cfg.out / "summary.json"))["f_estimate_s"].get<double>());
}

TEST_F(Commands, TuneIsReproducible) {
  cmd_tune(small("a", 96));
  cmd_tune(small("b", 96));
  for (const char* f : {"trajectory.jsonl", "allocation.csv"}) {
    EXPECT_TRUE(slurp(dir_ / "a" / f) == slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(Commands, CompareNormalizesToBestRun) {
  auto cfg = small("compare", 64);
  EXPECT_THROW(cmd_compare(cfg, {SearcherKind::Hierarchical}, {0}), ValidationError);
  auto runs = cmd_compare(cfg, {SearcherKind::Hierarchical, SearcherKind::Random}, {0, 1});
  ASSERT_EQ(runs.size(), 4u);
  auto rows = read_csv(cfg.out / "compare_summary.csv");
  ASSERT_EQ(rows.size(), 5u);
  const auto& header = rows[0];
  const int norm = column(header, "normalized_performance");
  column(header, "seed");
  column(header, "trials_to_match_reference");
  double best = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = std::stod(rows[i][norm]);
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
    best = std::max(best, v);
  }
  EXPECT_DOUBLE_EQ(best, 1.0);
  for (const auto& r : runs) EXPECT_TRUE(std::filesystem::exists(r.trajectory));
  EXPECT_TRUE(std::filesystem::exists(cfg.out / "compare_curves.csv"));
}

TEST_F(Commands, SweepShapes) {
  auto cfg = small("sweep-lambda", 32);
  auto rows = cmd_sweep(cfg, "lambda", {"10", "20", "40", "80"}, {0});
  EXPECT_EQ(rows.size(), 4u);
  EXPECT_EQ(read_csv(cfg.out / "sweep.csv").size(), 5u);
  auto rho = small("sweep-rho", 32);
  EXPECT_EQ(cmd_sweep(rho, "rho", {"0.25", "0.5", "0.75"}, {0}).size(), 3u);
  EXPECT_THROW(cmd_sweep(rho, "rho", {}, {0}), ValidationError);
  EXPECT_THROW(cmd_sweep(rho, "gamma", {"0.5"}, {0}), ValidationError);
}

TEST_F(Commands, ReportSideBySide) {
  cmd_tune(small("adaptive", 96));
  auto fixed = small("fixed", 96);
  fixed.tuner.searcher = SearcherKind::HierarchicalFixedLength;
  cmd_tune(fixed);
  const auto a = dir_ / "adaptive.jsonl";
  const auto b = dir_ / "fixed.jsonl";
  std::filesystem::copy_file(dir_ / "adaptive" / "trajectory.jsonl", a);
  std::filesystem::copy_file(dir_ / "fixed" / "trajectory.jsonl", b);
  auto outcome = cmd_report({a, b}, dir_ / "report");
  ASSERT_EQ(outcome.replays.size(), 2u);
  EXPECT_EQ(outcome.skipped_lines, 0);
  auto hist = read_csv(dir_ / "report" / "critical_steps.csv");
  ASSERT_EQ(hist.size(), 11u);
  EXPECT_EQ(hist[0].size(), 6u);
  EXPECT_EQ(hist[0][2], "adaptive_count");
  EXPECT_EQ(hist[0][4], "fixed_count");
  EXPECT_TRUE(std::filesystem::exists(dir_ / "report" / "totals.csv"));
}

TEST_F(Commands, ReportSkipsGarbage) {
  cmd_tune(small("run", 48));
  auto log = dir_ / "broken.jsonl";
  std::filesystem::copy_file(dir_ / "run" / "trajectory.jsonl", log);
  std::ofstream(log, std::ios::app) << "{not json\n";
  auto outcome = cmd_report({log}, dir_ / "report");
  EXPECT_EQ(outcome.skipped_lines, 1);
  EXPECT_EQ(outcome.replays[0].total_measured, 48);
}

TEST_F(Commands, CliExitCodes) {
  const auto w = workload_.string();
  const auto out = (dir_ / "cli").string();
  EXPECT_EQ(run_cli("tune --workload " + w + " --trials 32 --hyper tracks=8 --out " + out), 0);
  EXPECT_EQ(run_cli("tune --workload " + w + " --hyper rho=1.5 --out " + out), 2);
  EXPECT_EQ(run_cli("tune --workload " + w + " --searcher ansor --out " + out), 2);
  EXPECT_EQ(run_cli("tune --workload /nonexistent.json --out " + out), 2);
  EXPECT_EQ(run_cli("tune --bogus-flag"), 2);
  EXPECT_EQ(run_cli("compare --workload " + w + " --searchers hier --out " + out), 2);
  EXPECT_EQ(run_cli("tune --resume --out " + (dir_ / "nothing-here").string()), 3);
}

}  // namespace
}  // namespace hiertune
