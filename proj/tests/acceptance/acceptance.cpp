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


// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails. Runs take roughly a quarter of an hour on one core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "hiertune/bandit.hpp"
#include "hiertune/commands.hpp"
#include "hiertune/rl.hpp"

using namespace hiertune;

namespace {

const std::filesystem::path kBenchmarks = std::filesystem::path(HIERTUNE_SOURCE_DIR) / "workloads/benchmarks.json";

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
std::vector<std::filesystem::path> budget_logs;

void criterion(const std::string& id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("exception: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  fmt::print("{} {} {}: {} ({:.1f} s)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail, secs);
  std::fflush(stdout);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::filesystem::path out_root() { return default_out_root() / "acceptance"; }

RunConfig base(const std::string& network, std::int64_t trials, const std::string& sub) {
  RunConfig cfg;
  cfg.workload = kBenchmarks;
  cfg.network = network;
  cfg.tuner.trials = trials;
  cfg.out = out_root() / sub;
  return cfg;
}

std::vector<std::uint64_t> seeds(int n) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), 0);
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome a1() {
  const auto count = enumerate_tilings(1024, 4);
  auto target = TargetConfig::cpu();
  target.unroll_depths = {0, 16};
  auto sg = make_subgraph("gemm-l", "gemm-l", {make_op(OpKind::MatMul, {{"M", 1024}, {"K", 1024}, {"N", 1024}})}, 1);
  const auto size = space_size(generate_sketches(sg, target).at(0)).convert_to<double>();
  const bool ok = count == 286 && std::abs(size / 1.87e8 - 1.0) <= 0.01;
  return {ok, fmt::format("tilings(1024, 4) = {}, GEMM-L space = {:.4e}", count, size)};
}

Outcome a2() {
  auto cfg = base("gemm64-needle", 800, "a2");
  const auto net = load_network(cfg.workload, cfg.network);
  const auto hw = resolve_sim(cfg, net);
  const auto& sg = net.subgraphs.at(0);
  const auto sketches = generate_sketches(sg, net.target);
  double oracle = std::numeric_limits<double>::infinity();
  std::uint64_t states = 0;
  for (const auto& sk : sketches) {
    SketchContext ctx(sg, sk);
    const auto r = brute_force_best(ctx, hw);
    oracle = std::min(oracle, r.best_time);
    states += r.states;
  }
  const auto runs = cmd_compare(cfg, {SearcherKind::Hierarchical, SearcherKind::Random}, seeds(10));
  int hier = 0, random = 0;
  for (const auto& r : runs) {
    budget_logs.push_back(r.trajectory);
    const bool hit = r.report.best_times.at(0) <= 1.05 * oracle;
    (r.searcher == SearcherKind::Hierarchical ? hier : random) += hit;
  }
  return {hier >= 8 && random <= 4,
          fmt::format("oracle {:.4e} s over {} states; within 5%: hier {}/10, random {}/10", oracle, states, hier,
                      random)};
}

Outcome a3() {
  auto cfg = base("gemm-m-deep", 1280, "a3");
  const auto runs = cmd_compare(cfg, {SearcherKind::HierarchicalFixedLength, SearcherKind::Hierarchical}, seeds(10));
  std::map<std::uint64_t, std::optional<std::int64_t>> fixed, adaptive;
  std::array<std::int64_t, 10> hist_fixed{}, hist_adaptive{};
  for (const auto& r : runs) {
    budget_logs.push_back(r.trajectory);
    const auto replay = replay_trajectory(r.trajectory);
    const bool is_fixed = r.searcher == SearcherKind::HierarchicalFixedLength;
    (is_fixed ? fixed : adaptive)[r.seed] = r.trials_to_match;
    auto& h = is_fixed ? hist_fixed : hist_adaptive;
    for (int b = 0; b < 10; ++b) h[b] += replay.critical_histogram[b];
  }
  int wins = 0;
  std::string pairs;
  for (const auto& [seed, f] : fixed) {
    const auto a = adaptive[seed];
    if (a && f && *a < *f) ++wins;
    pairs += fmt::format(" {}:{}/{}", seed, f ? std::to_string(*f) : "-", a ? std::to_string(*a) : "-");
  }
  auto last = [](const std::array<std::int64_t, 10>& h) {
    const auto total = std::accumulate(h.begin(), h.end(), std::int64_t{0});
    return total > 0 ? static_cast<double>(h[9]) / total : 0.0;
  };
  const bool ok = wins >= 7 && last(hist_adaptive) > last(hist_fixed);
  return {ok, fmt::format("adaptive reached the fixed-length final best sooner in {}/10 seeds (fixed/adaptive "
                          "trials:{}); last-decile critical steps adaptive {:.3f} vs fixed {:.3f}",
                          wins, pairs, last(hist_adaptive), last(hist_fixed))};
}

Outcome a4() {
  auto cfg = base("two-phase", 1280, "a4");
  const auto net = load_network(cfg.workload, cfg.network);
  const int steady = net.index_of("steady");
  const auto runs =
      cmd_compare(cfg, {SearcherKind::HierarchicalNoSubgraphBandit, SearcherKind::Hierarchical}, seeds(10));
  std::map<std::uint64_t, double> f_greedy, f_bandit;
  std::vector<double> b_greedy, b_bandit;
  for (const auto& r : runs) {
    budget_logs.push_back(r.trajectory);
    const bool bandit = r.searcher == SearcherKind::Hierarchical;
    (bandit ? f_bandit : f_greedy)[r.seed] = r.report.f_estimate;
    (bandit ? b_bandit : b_greedy).push_back(static_cast<double>(r.report.allocations.at(steady)));
  }
  int no_worse = 0;
  for (const auto& [seed, f] : f_greedy) no_worse += f_bandit[seed] <= f;
  const double mg = median(b_greedy), mb = median(b_bandit);
  return {no_worse >= 7 && mb > mg,
          fmt::format("bandit f <= greedy f in {}/10 seeds; median trials on the steady subgraph bandit {} vs "
                      "greedy {}",
                      no_worse, mb, mg)};
}

Outcome a5() {
  auto sg = make_subgraph("mm", "mm", {make_op(OpKind::MatMul, {{"M", 512}, {"K", 512}, {"N", 512}})}, 1);
  const auto sketches = generate_sketches(sg, TargetConfig::cpu());
  std::string names;
  for (const auto& s : sketches) names += (names.empty() ? "" : "; ") + s.describe();
  return {sketches.size() == 3, fmt::format("{} sketches ({})", sketches.size(), names)};
}

Outcome a6() {
  const double p[3] = {0.2, 0.5, 0.8};
  BanditConfig cfg;
  cfg.c = 0.25;
  cfg.tau = 1000;
  std::vector<double> fractions;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    SlidingWindowStats stats(3, cfg.tau);
    int late = 0;
    for (int t = 0; t < 1000; ++t) {
      const int arm = swucb_select(stats, window_q(stats), cfg);
      stats.record(arm, u(rng) < p[arm] ? 1.0 : 0.0);
      if (t >= 900 && arm == 2) ++late;
    }
    fractions.push_back(late / 100.0);
  }
  const double m = median(fractions);
  return {m >= 0.9, fmt::format("median share of the best arm in the last 100 steps {:.2f}", m)};
}

Outcome a7() {
  // Finite differences on a 16-unit actor-critic.
  ActionSpace space{4};
  Rng rng(7);
  const int features = 6;
  PolicyNet policy(features, space, {16}, rng);
  ValueNet value(features, {16}, rng);
  policy.net.weights.back() *= 50.0;
  std::normal_distribution<double> n01;
  std::vector<Transition> data;
  for (int i = 0; i < 8; ++i) {
    Transition t;
    t.state = Eigen::VectorXd::NullaryExpr(features, [&] { return n01(rng); });
    t.mask.assign(space.total(), true);
    t.action = {static_cast<int>(1 + rng() % (space.size(kTiling) - 1)), static_cast<int>(rng() % 3), 1,
                static_cast<int>(rng() % 3)};
    t.advantage = n01(rng);
    t.value_target = n01(rng);
    const auto probs = action_probabilities(policy, policy.net.forward(t.state), t.mask);
    for (int h = 0; h < kNumSubspaces; ++h) t.log_prob += std::log(probs[h][t.action[h]]);
    data.push_back(t);
  }
  std::vector<const Transition*> batch;
  for (const auto& t : data) batch.push_back(&t);
  RlConfig cfg;
  const auto g = ppo_gradients(policy, value, batch, cfg);
  double worst = 0.0;
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const bool actor = i % 2 == 0;
    auto& net = actor ? policy.net : value.net;
    const auto k = static_cast<Eigen::Index>(rng() % net.num_params());
    const double saved = net.param(k);
    auto loss = [&] {
      const auto l = ppo_gradients(policy, value, batch, cfg).loss;
      return actor ? l.policy_loss : l.value_loss;
    };
    net.param(k) = saved + h;
    const double up = loss();
    net.param(k) = saved - h;
    const double down = loss();
    net.param(k) = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = Mlp<double>::grad_at(actor ? g.policy : g.value, k);
    worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
  }

  // Masked softmax invariants.
  int softmax_bad = 0;
  for (int c = 0; c < 1000; ++c) {
    const int n = 1 + static_cast<int>(rng() % 50);
    Eigen::VectorXd z = Eigen::VectorXd::NullaryExpr(n, [&] { return 10 * n01(rng); });
    std::vector<bool> valid(n);
    for (int i = 0; i < n; ++i) valid[i] = rng() % 2 == 0;
    valid[rng() % n] = true;
    const auto q = masked_softmax<double>(z, valid);
    double mass = 0;
    for (int i = 0; i < n; ++i) {
      if (!valid[i] && q[i] != 0.0) ++softmax_bad;
      if (valid[i]) mass += q[i];
    }
    if (std::abs(mass - 1.0) > 1e-6) ++softmax_bad;
  }

  // Batched advantage against the scalar formula.
  int adv_bad = 0;
  for (int b = 0; b < 10; ++b) {
    Eigen::VectorXd r = Eigen::VectorXd::Random(64), vn = Eigen::VectorXd::Random(64), vc = Eigen::VectorXd::Random(64);
    const auto a = advantage(r, vn, vc, 0.9);
    for (int i = 0; i < 64; ++i) adv_bad += a[i] != advantage(r[i], vn[i], vc[i], 0.9);
  }
  return {worst < 1e-3 && softmax_bad == 0 && adv_bad == 0,
          fmt::format("max relative gradient error {:.2e} over 100 points; softmax violations {}; advantage "
                      "mismatches {}",
                      worst, softmax_bad, adv_bad)};
}

Outcome a8() {
  auto cfg = base("gemm64-needle", 640, "a8-first");
  cmd_tune(cfg);
  auto again = base("gemm64-needle", 640, "a8-second");
  cmd_tune(again);
  const bool same = slurp(cfg.out / "trajectory.jsonl") == slurp(again.out / "trajectory.jsonl") &&
                    slurp(cfg.out / "allocation.csv") == slurp(again.out / "allocation.csv");

  // Interrupted copy: checkpoint after five rounds, then resume through the CLI path.
  auto part = base("gemm64-needle", 640, "a8-resumed");
  std::filesystem::remove_all(part.out);
  std::filesystem::create_directories(part.out);
  const auto net = load_network(part.workload, part.network);
  TuningSession session(net, part.tuner, make_backend(part, net));
  session.metadata = part.to_json().dump();
  for (int r = 0; r < 5; ++r) session.run_round();
  session.save(part.out / "checkpoint.bin");
  RunConfig resume;
  resume.out = part.out;
  cmd_tune(resume, true);
  const bool resumed = slurp(part.out / "trajectory.jsonl") == slurp(cfg.out / "trajectory.jsonl");
  return {same && resumed, fmt::format("repeat run identical: {}; resume at round 5 identical: {}", same, resumed)};
}

Outcome a9() {
  int bad = 0;
  std::string first_problem;
  for (const auto& path : budget_logs) {
    const auto r = replay_trajectory(path);
    const auto sum = std::accumulate(r.allocations.begin(), r.allocations.end(), std::int64_t{0});
    std::vector<std::string> problems;
    if (sum != r.total_measured) problems.push_back("allocations do not add up");
    if (r.reported_total != r.total_measured || r.reported_allocations != r.allocations) {
      problems.push_back("reported totals disagree with the round records");
    }
    if (r.total_measured > r.trial_budget) problems.push_back("budget exceeded");
    if (!r.rounds_within_k || r.max_round_measured > r.k) problems.push_back("a round measured more than K");
    if (!r.episodes_within_budget) problems.push_back("an episode exceeded its candidate budget");
    if (r.skipped_lines > 0) problems.push_back("unreadable log lines");
    if (!problems.empty()) {
      ++bad;
      if (first_problem.empty()) first_problem = path.filename().string() + ": " + problems.front();
    }
  }
  return {!budget_logs.empty() && bad == 0,
          fmt::format("{} logs replayed, {} with violations{}", budget_logs.size(), bad,
                      first_problem.empty() ? "" : " (" + first_problem + ")")};
}

}  // namespace

int main() {
  criterion("A1", "search-space combinatorics", a1);
  criterion("A2", "oracle optimality on GEMM 64^3", a2);
  criterion("A3", "adaptive stopping efficiency on GEMM-M", a3);
  criterion("A4", "subgraph bandit ablation", a4);
  criterion("A5", "matmul sketch count", a5);
  criterion("A6", "SW-UCB on a Bernoulli bandit", a6);
  criterion("A7", "actor-critic numerics", a7);
  criterion("A8", "determinism and resume", a8);
  criterion("A9", "budget conservation by log replay", a9);
  fmt::print("{} of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
