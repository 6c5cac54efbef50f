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

// Command-line front end: tune, compare, sweep and report.

#include <iostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "hiertune/commands.hpp"
#include "hiertune/error.hpp"

namespace {

using namespace hiertune;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::pair<std::string, std::string> split_kv(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError(fmt::format("expected key=value, got '{}'", kv));
  return {kv.substr(0, eq), kv.substr(eq + 1)};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto next = s.find(',', pos);
    auto part = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (!part.empty()) out.push_back(part);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

// "0-9" or "1,4,7".
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split_list(s)) {
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoull(part));
      } else {
        const auto lo = std::stoull(part.substr(0, dash));
        const auto hi = std::stoull(part.substr(dash + 1));
        if (hi < lo) throw ValidationError(fmt::format("empty seed range '{}'", part));
        for (auto v = lo; v <= hi; ++v) out.push_back(v);
      }
    } catch (const std::logic_error&) {
      throw ValidationError(fmt::format("bad seed list '{}'", s));
    }
  }
  if (out.empty()) throw ValidationError("no seeds given");
  return out;
}

struct CommonFlags {
  std::string workload;
  std::string network;
  std::string searcher = "hier";
  std::int64_t trials = 1000;
  std::uint64_t seed = 0;
  std::string backend = "sim";
  std::string command;
  double r_min = 1.0;
  double timeout = 60.0;
  std::string out;
  std::vector<std::string> hyper;
  std::vector<std::string> sim;

  void add(CLI::App* app, bool with_searcher) {
    app->add_option("--workload", workload, "Workload JSON file")->required();
    app->add_option("--network", network, "Network name inside the workload file");
    if (with_searcher) {
      app->add_option("--searcher", searcher,
                      "hier | hier-greedy-subgraph | hier-fixed | evolutionary | random");
    }
    app->add_option("--trials", trials, "Measurement budget");
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--backend", backend, "sim | external");
    app->add_option("--command", command, "Measurement command for the external backend");
    app->add_option("--r-min", r_min, "Minimum seconds of repeated measurement (external backend)");
    app->add_option("--timeout", timeout, "Seconds per candidate (external backend)");
    app->add_option("--out", out, "Output directory");
    app->add_option("--hyper", hyper, "Hyperparameter override key=value (repeatable)");
    app->add_option("--sim", sim, "Simulator override key=value (repeatable)");
  }

  RunConfig build() const {
    RunConfig cfg;
    cfg.workload = workload;
    cfg.network = network;
    cfg.tuner.searcher = searcher_from_string(searcher);
    cfg.tuner.trials = trials;
    cfg.tuner.seed = seed;
    for (const auto& kv : hyper) {
      const auto [k, v] = split_kv(kv);
      cfg.tuner.apply(k, v);
    }
    cfg.backend = backend;
    cfg.command = command;
    cfg.min_repeat_seconds = r_min;
    cfg.timeout_seconds = timeout;
    for (const auto& kv : sim) cfg.sim.push_back(split_kv(kv));
    cfg.out = out;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical auto-scheduler for tensor programs"};
  app.require_subcommand(1);

  CommonFlags tune_flags;
  bool resume = false;
  auto* tune = app.add_subcommand("tune", "Run one tuning session");
  tune_flags.add(tune, true);
  tune->add_flag("--resume", resume, "Continue from <out>/checkpoint.bin");
  // With --resume everything comes from the checkpoint.
  tune->get_option("--workload")->required(false);

  CommonFlags cmp_flags;
  std::string searchers = "hier,evolutionary";
  std::string cmp_seeds = "0-9";
  auto* compare = app.add_subcommand("compare", "Compare searchers on identical budgets and seeds");
  cmp_flags.add(compare, false);
  compare->add_option("--searchers", searchers, "Comma-separated searchers; the first is the reference");
  compare->add_option("--seeds", cmp_seeds, "Seeds, e.g. 0-9 or 1,2,5");

  CommonFlags sweep_flags;
  std::string param;
  std::string values;
  std::string sweep_seeds = "0";
  auto* sweep = app.add_subcommand("sweep", "Sweep an adaptive-stopping parameter");
  sweep_flags.add(sweep, true);
  sweep->add_option("--param", param, "lambda | rho")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--seeds", sweep_seeds, "Seeds, e.g. 0-4");

  std::vector<std::string> logs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Analyse trajectory logs");
  report->add_option("logs", logs, "Trajectory logs (JSONL)")->required();
  report->add_option("--out", report_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*tune) {
      auto cfg = tune_flags.build();
      if (resume && cfg.out.empty()) throw ValidationError("--resume needs --out");
      if (!resume && cfg.workload.empty()) throw ValidationError("--workload is required");
      const auto outcome = cmd_tune(cfg, resume);
      const auto& r = outcome.report;
      fmt::print("network {} searcher {} seed {}: {} trials in {} rounds, f = {} s, wall {:.2f} s\n", r.network,
                 to_string(r.searcher), r.seed, r.trials, r.rounds, format_number(r.f_estimate),
                 outcome.wall_seconds);
      fmt::print("artifacts in {}\n", outcome.out.string());
    } else if (*compare) {
      auto cfg = cmp_flags.build();
      std::vector<SearcherKind> kinds;
      for (const auto& s : split_list(searchers)) kinds.push_back(searcher_from_string(s));
      const auto runs = cmd_compare(cfg, kinds, parse_seeds(cmp_seeds));
      for (const auto& r : runs) {
        fmt::print("{:<22} seed {:>3}: f = {} s, normalized {:.4f}\n", to_string(r.searcher), r.seed,
                   format_number(r.report.f_estimate), r.normalized_performance);
      }
    } else if (*sweep) {
      auto cfg = sweep_flags.build();
      const auto rows = cmd_sweep(cfg, param, split_list(values), parse_seeds(sweep_seeds));
      for (const auto& r : rows) {
        fmt::print("{} = {:<6} normalized performance {:.4f}, normalized round time {:.4f}\n", param, r.value,
                   r.normalized_performance, r.normalized_round_time);
      }
    } else if (*report) {
      const auto out = report_out.empty() ? default_out_root() / "report" : std::filesystem::path(report_out);
      const auto outcome = cmd_report({logs.begin(), logs.end()}, out);
      if (outcome.skipped_lines > 0) {
        fmt::print(stderr, "warning: skipped {} unreadable log lines\n", outcome.skipped_lines);
      }
      fmt::print("reports in {}\n", out.string());
    }
  } catch (const ValidationError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
