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

#include "hiertune/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "hiertune/error.hpp"

namespace hiertune {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

NetworkSpec load(const RunConfig& cfg) { return load_network(cfg.workload, cfg.network); }

}  // namespace

void RunConfig::validate() const {
  if (workload.empty()) throw ValidationError("a workload file is required");
  if (!std::filesystem::exists(workload)) {
    throw ValidationError(fmt::format("workload file '{}' does not exist", workload.string()));
  }
  if (backend != "sim" && backend != "external") {
    throw ValidationError(fmt::format("unknown backend '{}' (expected sim or external)", backend));
  }
  if (backend == "external" && command.empty()) throw ValidationError("the external backend needs a command");
  if (!(min_repeat_seconds >= 0)) throw ValidationError("r_min must be >= 0");
  if (!(timeout_seconds > 0)) throw ValidationError("timeout must be > 0");
  tuner.validate();
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["workload"] = workload.string();
  j["network"] = network;
  j["tuner"] = tuner.to_json();
  j["backend"] = backend;
  j["command"] = command;
  j["r_min"] = min_repeat_seconds;
  j["timeout_s"] = timeout_seconds;
  auto sim_j = nlohmann::ordered_json::array();
  for (const auto& [k, v] : sim) sim_j.push_back({k, v});
  j["sim"] = sim_j;
  j["out"] = out.string();
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::ordered_json& j) {
  RunConfig c;
  c.workload = j.at("workload").get<std::string>();
  c.network = j.at("network").get<std::string>();
  c.tuner = TunerConfig::from_json(j.at("tuner"));
  c.backend = j.at("backend").get<std::string>();
  c.command = j.at("command").get<std::string>();
  c.min_repeat_seconds = j.at("r_min").get<double>();
  c.timeout_seconds = j.at("timeout_s").get<double>();
  for (const auto& kv : j.at("sim")) c.sim.emplace_back(kv[0].get<std::string>(), kv[1].get<std::string>());
  c.out = j.at("out").get<std::string>();
  return c;
}

std::filesystem::path default_out_root() {
  if (const char* env = std::getenv("HIERTUNE_OUT_DIR"); env && *env) return env;
  return "hiertune-out";
}

SimHwParams resolve_sim(const RunConfig& cfg, const NetworkSpec& net) {
  SimHwParams p;
  p.apply(net.sim_overrides);
  for (const auto& [k, v] : cfg.sim) p.apply(k, v);
  return p;
}

std::shared_ptr<MeasureBackend> make_backend(const RunConfig& cfg, const NetworkSpec& net) {
  if (cfg.backend == "external") {
    return std::make_shared<ExternalCommandBackend>(
        ExternalCommandBackend::Options{cfg.command, cfg.min_repeat_seconds, cfg.timeout_seconds});
  }
  return std::make_shared<SimulatedBackend>(resolve_sim(cfg, net));
}

TuneOutcome cmd_tune(const RunConfig& given, bool resume) {
  const auto t0 = Clock::now();
  std::filesystem::path out = given.out.empty() ? default_out_root() / "tune" : given.out;
  std::filesystem::create_directories(out);
  const auto checkpoint = out / "checkpoint.bin";
  const auto trajectory = out / "trajectory.jsonl";

  RunConfig cfg = given;
  std::unique_ptr<TuningSession> session;
  if (resume) {
    try {
      cfg = RunConfig::from_json(nlohmann::ordered_json::parse(TuningSession::read_metadata(checkpoint)));
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(fmt::format("checkpoint run configuration is corrupt: {}", e.what()));
    }
    cfg.out = out;
    const auto net = load(cfg);
    session = TuningSession::resume(checkpoint, make_backend(cfg, net));
  } else {
    cfg.validate();
    auto net = load(cfg);
    auto backend = make_backend(cfg, net);
    session = std::make_unique<TuningSession>(std::move(net), cfg.tuner, std::move(backend));
    session->metadata = cfg.to_json().dump();
  }
  write_lines(trajectory, session->log_lines());
  auto report = tune_network(*session, [&](const TuningSession& s) {
    write_lines(trajectory, s.log_lines());
    s.save(checkpoint);
  });

  TuneOutcome outcome;
  outcome.report = report;
  outcome.out = out;
  outcome.wall_seconds = seconds_since(t0);

  nlohmann::ordered_json summary;
  summary["network"] = report.network;
  summary["searcher"] = std::string(to_string(report.searcher));
  summary["seed"] = std::to_string(report.seed);
  summary["trials"] = report.trials;
  summary["rounds"] = report.rounds;
  summary["f_estimate_s"] = std::isfinite(report.f_estimate) ? nlohmann::ordered_json(report.f_estimate) : nlohmann::ordered_json();
  auto subgraphs = nlohmann::ordered_json::array();
  const auto& net = session->network();
  for (std::size_t n = 0; n < net.subgraphs.size(); ++n) {
    subgraphs.push_back({{"id", net.subgraphs[n].id},
                         {"trials", report.allocations[n]},
                         {"best_s", std::isfinite(report.best_times[n]) ? nlohmann::ordered_json(report.best_times[n])
                                                                        : nlohmann::ordered_json()},
                         {"best_schedule", report.best_schedules[n]}});
  }
  summary["subgraphs"] = subgraphs;
  summary["wall_s"] = outcome.wall_seconds;
  std::ofstream(out / "summary.json") << summary.dump(2) << '\n';

  CsvWriter alloc({"subgraph", "weight", "trials", "best_s", "contribution_pct"});
  for (const auto& row : allocation_report(*session)) {
    alloc.row({row.subgraph, std::to_string(row.weight), std::to_string(row.trials), format_number(row.best_time),
               format_number(row.contribution_pct)});
  }
  alloc.save(out / "allocation.csv");
  return outcome;
}

std::vector<CompareRun> cmd_compare(const RunConfig& base, const std::vector<SearcherKind>& searchers,
                                    const std::vector<std::uint64_t>& seeds) {
  if (searchers.size() < 2) throw ValidationError("compare needs at least two searchers");
  if (seeds.empty()) throw ValidationError("compare needs at least one seed");
  base.validate();
  const auto out = base.out.empty() ? default_out_root() / "compare" : base.out;
  std::filesystem::create_directories(out / "runs");
  const auto net = load(base);

  std::vector<CompareRun> runs;
  for (auto searcher : searchers) {
    for (auto seed : seeds) {
      TunerConfig cfg = base.tuner;
      cfg.searcher = searcher;
      cfg.seed = seed;
      if (cfg.trials != base.tuner.trials || cfg.k != base.tuner.k) {
        throw ValidationError("all compared searchers must share the trial budget and round size");
      }
      const auto t0 = Clock::now();
      TuningSession session(net, cfg, make_backend(base, net));
      CompareRun run;
      run.searcher = searcher;
      run.seed = seed;
      run.report = tune_network(session);
      run.wall_seconds = seconds_since(t0);
      run.trajectory = out / "runs" / fmt::format("{}-seed{}.jsonl", to_string(searcher), seed);
      write_lines(run.trajectory, session.log_lines());
      runs.push_back(std::move(run));
    }
  }
  double best_f = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) best_f = std::min(best_f, r.report.f_estimate);
  for (auto& r : runs) {
    r.normalized_performance = std::isfinite(r.report.f_estimate) ? best_f / r.report.f_estimate : 0.0;
    const CompareRun* ref = nullptr;
    for (const auto& c : runs) {
      if (c.searcher == searchers.front() && c.seed == r.seed) ref = &c;
    }
    for (const auto& p : r.report.curve) {
      if (p.f_estimate <= ref->report.f_estimate) {
        r.trials_to_match = p.trials;
        break;
      }
    }
  }

  CsvWriter curves({"searcher", "seed", "round", "trials", "f_estimate_s"});
  CsvWriter summary({"searcher", "seed", "trials", "final_f_s", "trials_to_match_reference", "normalized_performance",
                     "wall_s"});
  for (const auto& r : runs) {
    for (std::size_t i = 0; i < r.report.curve.size(); ++i) {
      curves.row({std::string(to_string(r.searcher)), std::to_string(r.seed), std::to_string(i),
                  std::to_string(r.report.curve[i].trials), format_number(r.report.curve[i].f_estimate)});
    }
    summary.row({std::string(to_string(r.searcher)), std::to_string(r.seed), std::to_string(r.report.trials),
                 format_number(r.report.f_estimate), r.trials_to_match ? std::to_string(*r.trials_to_match) : "",
                 format_number(r.normalized_performance), format_number(r.wall_seconds)});
  }
  curves.save(out / "compare_curves.csv");
  summary.save(out / "compare_summary.csv");
  return runs;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& base, const std::string& param, const std::vector<std::string>& values,
                                const std::vector<std::uint64_t>& seeds) {
  if (param != "lambda" && param != "rho") throw ValidationError("sweep parameter must be lambda or rho");
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  if (seeds.empty()) throw ValidationError("sweep needs at least one seed");
  base.validate();
  // Reject bad values before spending any time.
  for (const auto& v : values) {
    TunerConfig probe = base.tuner;
    probe.apply(param, v);
    probe.validate();
  }
  const auto out = base.out.empty() ? default_out_root() / "sweep" : base.out;
  std::filesystem::create_directories(out);
  const auto net = load(base);

  std::vector<SweepRow> rows;
  for (const auto& v : values) {
    SweepRow row;
    row.value = v;
    double round_seconds = 0.0;
    int rounds = 0;
    for (auto seed : seeds) {
      TunerConfig cfg = base.tuner;
      cfg.apply(param, v);
      cfg.seed = seed;
      TuningSession session(net, cfg, make_backend(base, net));
      const auto t0 = Clock::now();
      const auto report = tune_network(session);
      round_seconds += seconds_since(t0);
      rounds += report.rounds;
      row.mean_best_f += report.f_estimate / static_cast<double>(seeds.size());
    }
    row.mean_round_seconds = rounds > 0 ? round_seconds / rounds : 0.0;
    rows.push_back(row);
  }
  double best_f = std::numeric_limits<double>::infinity();
  double max_time = 0.0;
  for (const auto& r : rows) {
    best_f = std::min(best_f, r.mean_best_f);
    max_time = std::max(max_time, r.mean_round_seconds);
  }
  CsvWriter csv({param, "mean_best_f_s", "normalized_performance", "mean_round_wall_s", "normalized_round_time"});
  for (auto& r : rows) {
    r.normalized_performance = best_f / r.mean_best_f;
    r.normalized_round_time = max_time > 0 ? r.mean_round_seconds / max_time : 0.0;
    csv.row({r.value, format_number(r.mean_best_f), format_number(r.normalized_performance),
             format_number(r.mean_round_seconds), format_number(r.normalized_round_time)});
  }
  csv.save(out / "sweep.csv");
  return rows;
}

ReportOutcome cmd_report(const std::vector<std::filesystem::path>& logs, const std::filesystem::path& out) {
  if (logs.empty()) throw ValidationError("report needs at least one trajectory log");
  std::filesystem::create_directories(out);
  ReportOutcome outcome;
  for (const auto& path : logs) {
    outcome.replays.push_back(replay_trajectory(path));
    outcome.skipped_lines += outcome.replays.back().skipped_lines;
  }
  auto label = [&](std::size_t i) { return logs[i].stem().string(); };

  std::vector<std::string> header{"bin_lo", "bin_hi"};
  for (std::size_t i = 0; i < logs.size(); ++i) {
    header.push_back(label(i) + "_count");
    header.push_back(label(i) + "_fraction");
  }
  CsvWriter critical(header);
  for (int b = 0; b < 10; ++b) {
    std::vector<std::string> row{format_number(b / 10.0), format_number((b + 1) / 10.0)};
    for (const auto& r : outcome.replays) {
      std::int64_t total = 0;
      for (auto c : r.critical_histogram) total += c;
      row.push_back(std::to_string(r.critical_histogram[b]));
      row.push_back(format_number(total > 0 ? static_cast<double>(r.critical_histogram[b]) / total : 0.0));
    }
    critical.row(row);
  }
  critical.save(out / "critical_steps.csv");

  CsvWriter alloc({"log", "subgraph", "weight", "trials", "best_s", "contribution_pct"});
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& r = outcome.replays[i];
    double total = 0.0;
    for (std::size_t n = 0; n < r.subgraphs.size() && n < r.final_best.size(); ++n) {
      if (std::isfinite(r.final_best[n])) total += static_cast<double>(r.weights[n]) * r.final_best[n];
    }
    for (std::size_t n = 0; n < r.subgraphs.size(); ++n) {
      const double best = n < r.final_best.size() ? r.final_best[n] : std::numeric_limits<double>::infinity();
      const double pct = total > 0 && std::isfinite(best) ? 100.0 * static_cast<double>(r.weights[n]) * best / total : 0.0;
      alloc.row({label(i), r.subgraphs[n], std::to_string(r.weights[n]), std::to_string(r.allocations[n]),
                 format_number(best), format_number(pct)});
    }
  }
  alloc.save(out / "allocation.csv");

  static const char* kBuckets[] = {"below_-10pct", "-10pct_to_0", "zero", "0_to_10pct", "above_10pct"};
  CsvWriter imp({"log", "predicted_improvement", "steps", "fraction"});
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& r = outcome.replays[i];
    std::int64_t total = 0;
    for (auto c : r.improvement) total += c;
    for (int b = 0; b < 5; ++b) {
      imp.row({label(i), kBuckets[b], std::to_string(r.improvement[b]),
               format_number(total > 0 ? static_cast<double>(r.improvement[b]) / total : 0.0)});
    }
  }
  imp.save(out / "improvement.csv");

  CsvWriter totals({"log", "searcher", "rounds", "episodes", "total_trials", "final_f_s", "skipped_lines"});
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const auto& r = outcome.replays[i];
    totals.row({label(i), r.searcher, std::to_string(r.rounds), std::to_string(r.episodes),
                std::to_string(r.total_measured), format_number(r.final_f), std::to_string(r.skipped_lines)});
  }
  totals.save(out / "totals.csv");
  return outcome;
}

}  // namespace hiertune
