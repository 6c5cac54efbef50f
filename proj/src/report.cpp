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

#include "hiertune/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "hiertune/error.hpp"

namespace hiertune {

TrajectoryReplay replay_trajectory(const std::vector<std::string>& lines) {
  TrajectoryReplay r;
  for (const auto& line : lines) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      ++r.skipped_lines;
      continue;
    }
    if (!j.is_object() || !j.contains("type")) {
      ++r.skipped_lines;
      continue;
    }
    try {
      const auto type = j["type"].get<std::string>();
      if (type == "header") {
        r.network = j["network"].get<std::string>();
        const auto& cfg = j["config"];
        r.searcher = cfg["searcher"].get<std::string>();
        r.trial_budget = cfg["trials"].get<std::int64_t>();
        r.k = cfg["k"].get<int>();
        for (const auto& sg : j["subgraphs"]) {
          r.subgraphs.push_back(sg["id"].get<std::string>());
          r.weights.push_back(sg["weight"].get<std::int64_t>());
        }
        r.allocations.assign(r.subgraphs.size(), 0);
      } else if (type == "episode") {
        ++r.episodes;
        const auto visited = j["visited"].get<std::int64_t>();
        r.max_episode_visited = std::max(r.max_episode_visited, visited);
        if (visited > j["budget"].get<std::int64_t>()) r.episodes_within_budget = false;
        const auto hist = j["critical_histogram"].get<std::vector<std::int64_t>>();
        for (std::size_t b = 0; b < hist.size() && b < 10; ++b) r.critical_histogram[b] += hist[b];
        const auto imp = j["improvement_histogram"].get<std::vector<std::int64_t>>();
        for (std::size_t b = 0; b < imp.size() && b < 5; ++b) r.improvement[b] += imp[b];
      } else if (type == "measure") {
        ++r.rounds;
        const int measured = j["measured"].get<int>();
        const int sg = j["subgraph"].get<int>();
        if (sg < 0 || sg >= static_cast<int>(r.allocations.size())) throw std::out_of_range("subgraph");
        r.total_measured += measured;
        r.allocations[sg] += measured;
        r.max_round_measured = std::max(r.max_round_measured, measured);
        if (measured > j["k_limit"].get<int>() || measured > r.k) r.rounds_within_k = false;
        r.reported_allocations = j["allocations"].get<std::vector<std::int64_t>>();
        r.reported_total = j["total_trials"].get<std::int64_t>();
        r.final_best.clear();
        for (const auto& b : j["best_s"]) {
          r.final_best.push_back(b.is_null() ? std::numeric_limits<double>::infinity() : b.get<double>());
        }
        const auto& f = j["f_estimate_s"];
        r.final_f = f.is_null() ? std::numeric_limits<double>::infinity() : f.get<double>();
        r.curve.push_back({r.reported_total, r.final_f});
      }
    } catch (const std::exception&) {
      ++r.skipped_lines;
    }
  }
  return r;
}

TrajectoryReplay replay_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open trajectory '{}'", path.string()));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return replay_trajectory(lines);
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}'", tmp.string()));
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw Error(fmt::format("cannot write '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row(header); }

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw Error("CSV row has the wrong number of fields");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ += ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      out_ += '"';
      for (char c : f) {
        if (c == '"') out_ += '"';
        out_ += c;
      }
      out_ += '"';
    } else {
      out_ += f;
    }
  }
  out_ += '\n';
}

void CsvWriter::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << out_;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.10g}", v);
}

}  // namespace hiertune
