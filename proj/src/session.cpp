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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "hiertune/error.hpp"
#include "hiertune/tuner.hpp"

namespace hiertune {

std::string_view to_string(SearcherKind k) {
  switch (k) {
    case SearcherKind::Hierarchical: return "hier";
    case SearcherKind::HierarchicalNoSubgraphBandit: return "hier-greedy-subgraph";
    case SearcherKind::HierarchicalFixedLength: return "hier-fixed";
    case SearcherKind::Evolutionary: return "evolutionary";
    case SearcherKind::Random: return "random";
  }
  return "?";
}

SearcherKind searcher_from_string(std::string_view name) {
  for (auto k : {SearcherKind::Hierarchical, SearcherKind::HierarchicalNoSubgraphBandit,
                 SearcherKind::HierarchicalFixedLength, SearcherKind::Evolutionary, SearcherKind::Random}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError(fmt::format(
      "unknown searcher '{}' (expected hier, hier-greedy-subgraph, hier-fixed, evolutionary or random)", name));
}

bool uses_policy(SearcherKind k) {
  return k == SearcherKind::Hierarchical || k == SearcherKind::HierarchicalNoSubgraphBandit ||
         k == SearcherKind::HierarchicalFixedLength;
}

// ---------------------------------------------------------------------------
// Configuration

int TunerConfig::effective_track_length() const {
  if (track_length > 0) return track_length;
  return stopping.lambda > 0 ? 2 * stopping.lambda : 40;
}

void TunerConfig::validate() const {
  if (trials < 1) throw ValidationError("trial budget must be > 0");
  if (k < 1) throw ValidationError("measurements per round must be >= 1");
  if (tracks < 1) throw ValidationError("initial track count must be >= 1");
  if (track_length < 0) throw ValidationError("track length must be >= 0");
  bandit.validate();
  rl.validate();
  stopping.validate();
  gbt.validate();
}

namespace {

double parse_double(std::string_view key, std::string_view value) {
  std::string v(value);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  if (v == "true") return 1.0;
  if (v == "false") return 0.0;
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("hyperparameter '{}' needs a number, got '{}'", key, value));
  }
}

int parse_int(std::string_view key, std::string_view value) {
  const double d = parse_double(key, value);
  if (d != std::floor(d) || std::abs(d) > 2e9) {
    throw ValidationError(fmt::format("hyperparameter '{}' needs an integer, got '{}'", key, value));
  }
  return static_cast<int>(d);
}

std::string unquote(std::string_view value) {
  std::string v(value);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return v;
}

}  // namespace

void TunerConfig::apply(std::string_view key, std::string_view value) {
  if (key == "searcher") searcher = searcher_from_string(unquote(value));
  else if (key == "trials") trials = static_cast<std::int64_t>(parse_double(key, value));
  else if (key == "k") k = parse_int(key, value);
  else if (key == "tracks") tracks = parse_int(key, value);
  else if (key == "track_length") track_length = parse_int(key, value);
  else if (key == "seed") seed = static_cast<std::uint64_t>(std::stoull(unquote(value)));
  else if (key == "c") bandit.c = parse_double(key, value);
  else if (key == "tau") bandit.tau = parse_int(key, value);
  else if (key == "alpha") bandit.alpha = parse_double(key, value);
  else if (key == "beta") bandit.beta = parse_double(key, value);
  else if (key == "delta_t") bandit.delta_t = parse_int(key, value);
  else if (key == "lr_actor") rl.lr_actor = parse_double(key, value);
  else if (key == "lr_critic") rl.lr_critic = parse_double(key, value);
  else if (key == "gamma") rl.gamma = parse_double(key, value);
  else if (key == "train_interval") rl.train_interval = parse_int(key, value);
  else if (key == "w_mse") rl.w_mse = parse_double(key, value);
  else if (key == "w_entropy") rl.w_entropy = parse_double(key, value);
  else if (key == "clip") rl.clip = parse_double(key, value);
  else if (key == "minibatch") rl.minibatch = parse_int(key, value);
  else if (key == "epochs") rl.epochs = parse_int(key, value);
  else if (key == "buffer_capacity") rl.buffer_capacity = parse_int(key, value);
  else if (key == "normalize_advantage") rl.normalize_advantage = parse_double(key, value) != 0.0;
  else if (key == "hidden") {
    rl.hidden.clear();
    const auto v = unquote(value);
    std::size_t pos = 0;
    while (pos <= v.size()) {
      const auto next = v.find('x', pos);
      const auto part = v.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      if (!part.empty()) rl.hidden.push_back(parse_int(key, part));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
  } else if (key == "lambda") {
    const auto v = unquote(value);
    stopping.lambda = (v == "inf" || v == "0") ? 0 : parse_int(key, v);
  } else if (key == "rho") stopping.rho = parse_double(key, value);
  else if (key == "min_tracks") stopping.min_tracks = parse_int(key, value);
  else if (key == "gbt_trees") gbt.trees = parse_int(key, value);
  else if (key == "gbt_depth") gbt.max_depth = parse_int(key, value);
  else if (key == "gbt_learning_rate") gbt.learning_rate = parse_double(key, value);
  else if (key == "gbt_lambda") gbt.lambda = parse_double(key, value);
  else if (key == "gbt_max_examples") gbt.max_examples = parse_int(key, value);
  else throw ValidationError(fmt::format("unknown hyperparameter '{}'", key));
}

nlohmann::ordered_json TunerConfig::to_json() const {
  nlohmann::ordered_json j;
  j["searcher"] = std::string(to_string(searcher));
  j["trials"] = trials;
  j["k"] = k;
  j["tracks"] = tracks;
  j["track_length"] = track_length;
  j["seed"] = std::to_string(seed);
  j["c"] = bandit.c;
  j["tau"] = bandit.tau;
  j["alpha"] = bandit.alpha;
  j["beta"] = bandit.beta;
  j["delta_t"] = bandit.delta_t;
  j["lr_actor"] = rl.lr_actor;
  j["lr_critic"] = rl.lr_critic;
  j["gamma"] = rl.gamma;
  j["train_interval"] = rl.train_interval;
  j["w_mse"] = rl.w_mse;
  j["w_entropy"] = rl.w_entropy;
  j["clip"] = rl.clip;
  j["minibatch"] = rl.minibatch;
  j["epochs"] = rl.epochs;
  j["buffer_capacity"] = rl.buffer_capacity;
  j["normalize_advantage"] = rl.normalize_advantage;
  std::string hidden;
  for (std::size_t i = 0; i < rl.hidden.size(); ++i) hidden += (i ? "x" : "") + std::to_string(rl.hidden[i]);
  j["hidden"] = hidden;
  j["lambda"] = stopping.lambda;
  j["rho"] = stopping.rho;
  j["min_tracks"] = stopping.min_tracks;
  j["gbt_trees"] = gbt.trees;
  j["gbt_depth"] = gbt.max_depth;
  j["gbt_learning_rate"] = gbt.learning_rate;
  j["gbt_lambda"] = gbt.lambda;
  j["gbt_max_examples"] = gbt.max_examples;
  return j;
}

TunerConfig TunerConfig::from_json(const nlohmann::ordered_json& j) {
  TunerConfig cfg;
  for (const auto& [key, value] : j.items()) {
    cfg.apply(key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Session

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ModificationAction random_valid_action(const ActionMask& mask, const ActionSpace& space, Rng& rng,
                                       std::array<int, kNumSubspaces>* index) {
  for (int h = 0; h < kNumSubspaces; ++h) {
    std::vector<int> valid;
    for (int k = 0; k < static_cast<int>(mask.valid[h].size()); ++k) {
      if (mask.valid[h][k]) valid.push_back(k);
    }
    (*index)[h] = valid[std::uniform_int_distribution<std::size_t>(0, valid.size() - 1)(rng)];
  }
  return space.decode(*index);
}

nlohmann::ordered_json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

TuningSession::TuningSession(NetworkSpec net, TunerConfig cfg, std::shared_ptr<MeasureBackend> backend)
    : net_(std::move(net)),
      cfg_(std::move(cfg)),
      backend_(std::move(backend)),
      layout_(FeatureLayout::for_target(net_.target)),
      rng_(cfg_.seed),
      subgraph_window_(static_cast<int>(net_.subgraphs.size()), cfg_.bandit.tau),
      stats_(static_cast<int>(net_.subgraphs.size())),
      model_(layout_.size(), cfg_.gbt) {
  validate(net_);
  cfg_.validate();
  if (!backend_) throw ValidationError("a measurement backend is required");
  runtime_.resize(net_.subgraphs.size());
  for (std::size_t n = 0; n < net_.subgraphs.size(); ++n) {
    auto& rt = runtime_[n];
    const auto& sg = net_.subgraphs[n];
    rt.sketches = generate_sketches(sg, net_.target);
    int iters = 0;
    for (const auto& sk : rt.sketches) {
      if (static_cast<int>(sk.space.tiled_dims.size()) > layout_.max_dims) {
        throw ValidationError(fmt::format("subgraph '{}' has {} tiled dimensions, above max_feature_dims {}", sg.id,
                                          sk.space.tiled_dims.size(), layout_.max_dims));
      }
      iters = std::max(iters, sk.space.num_tiled_loops());
    }
    rt.contexts.reserve(rt.sketches.size());
    for (const auto& sk : rt.sketches) rt.contexts.emplace_back(sg, sk);
    rt.space.num_iters = iters;
    rt.sketch_window = SlidingWindowStats(static_cast<int>(rt.sketches.size()), cfg_.bandit.tau);
    if (uses_policy(cfg_.searcher)) rt.agent.emplace(layout_.size(), rt.space, cfg_.rl, rng_);
  }
}

bool TuningSession::finished() const {
  if (consumed_ >= cfg_.trials) return true;
  return std::all_of(runtime_.begin(), runtime_.end(), [](const SubgraphRuntime& rt) { return rt.exhausted; });
}

void TuningSession::emit(nlohmann::ordered_json j) { log_.push_back(j.dump()); }

double TuningSession::f_estimate() const {
  std::vector<double> g;
  for (const auto& rt : runtime_) g.push_back(rt.best_time);
  return net_.weighted_latency(g);
}

int TuningSession::greedy_subgraph() const {
  int best = -1;
  double best_r = -kInf;
  for (int n = 0; n < static_cast<int>(runtime_.size()); ++n) {
    if (runtime_[n].exhausted) continue;
    const double r = subgraph_reward(stats_, net_, n, cfg_.bandit, cfg_.k);
    if (best < 0 || r > best_r) {
      best = n;
      best_r = r;
    }
  }
  return best;
}

int TuningSession::choose_subgraph(nlohmann::ordered_json& log) {
  const int count = static_cast<int>(runtime_.size());
  auto scores_json = nlohmann::ordered_json::array();
  int choice = -1;
  switch (cfg_.searcher) {
    case SearcherKind::Hierarchical:
    case SearcherKind::HierarchicalFixedLength: {
      auto scores = swucb_scores(subgraph_window_, window_q(subgraph_window_), cfg_.bandit);
      for (int n = 0; n < count; ++n) {
        if (runtime_[n].exhausted) scores[n] = -kInf;
        scores_json.push_back(finite_or_null(scores[n]));
      }
      choice = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
      break;
    }
    case SearcherKind::HierarchicalNoSubgraphBandit:
    case SearcherKind::Evolutionary: {
      for (int n = 0; n < count; ++n) {
        scores_json.push_back(finite_or_null(subgraph_reward(stats_, net_, n, cfg_.bandit, cfg_.k)));
      }
      choice = greedy_subgraph();
      break;
    }
    case SearcherKind::Random: {
      std::vector<int> open;
      for (int n = 0; n < count; ++n) {
        if (!runtime_[n].exhausted) open.push_back(n);
      }
      choice = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng_)];
      break;
    }
  }
  log["subgraph"] = choice;
  log["subgraph_scores"] = scores_json;
  return choice;
}

int TuningSession::choose_sketch(int subgraph, nlohmann::ordered_json& log) {
  auto& rt = runtime_[subgraph];
  const int count = static_cast<int>(rt.sketches.size());
  int choice = 0;
  auto scores_json = nlohmann::ordered_json::array();
  if (uses_policy(cfg_.searcher)) {
    const auto scores = swucb_scores(rt.sketch_window, window_q(rt.sketch_window), cfg_.bandit);
    for (double s : scores) scores_json.push_back(finite_or_null(s));
    choice = static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  } else {
    choice = std::uniform_int_distribution<int>(0, count - 1)(rng_);
  }
  log["sketch"] = choice;
  log["sketch_scores"] = scores_json;
  return choice;
}

EpisodeResult TuningSession::run_episode(int subgraph, int sketch_index) {
  auto& rt = runtime_.at(subgraph);
  const auto& sketch = rt.sketches.at(sketch_index);
  const auto& ctx = rt.contexts[sketch_index];
  const bool rl = uses_policy(cfg_.searcher) && rt.agent.has_value();

  StoppingConfig sc = cfg_.stopping;
  if (cfg_.searcher == SearcherKind::HierarchicalFixedLength || cfg_.searcher == SearcherKind::Evolutionary) {
    sc.lambda = 0;
  }
  sc.min_tracks = std::min(sc.min_tracks, cfg_.tracks);
  const std::int64_t budget = static_cast<std::int64_t>(cfg_.tracks) * cfg_.effective_track_length();

  EpisodeResult out;
  out.budget = budget;
  const auto initial = sample_initial_schedules(sketch, cfg_.tracks, rng_);
  Eigen::MatrixXd current = featurize_batch(initial, ctx, layout_);
  const Eigen::VectorXd initial_scores = model_.predict(current);
  TrackSet ts(initial, std::vector<double>(initial_scores.data(), initial_scores.data() + initial_scores.size()), sc,
              budget);
  out.heap.states = initial;
  out.heap.scores.assign(initial_scores.data(), initial_scores.data() + initial_scores.size());
  // Advantages summed over the current cull window; culls rank on this rather
  // than on a single step's TD error.
  std::vector<double> window_advantage(cfg_.tracks, 0.0);

  int step_index = 0;
  while (!ts.done()) {
    const auto stepping = ts.stepping();
    if (stepping.empty()) break;
    const auto m = static_cast<Eigen::Index>(stepping.size());
    Eigen::MatrixXd x(layout_.size(), m);
    std::vector<ActionMask> masks;
    std::vector<std::vector<bool>> flat;
    for (Eigen::Index i = 0; i < m; ++i) {
      const int t = stepping[i];
      x.col(i) = current.col(t);
      masks.push_back(action_mask(ts.tracks()[t].current(), sketch, rt.space));
      flat.push_back(flatten(masks.back()));
    }
    std::vector<SampledAction> sampled(m);
    if (rl) {
      sampled = select_actions(rt.agent->policy, x, flat, rng_);
    } else {
      for (Eigen::Index i = 0; i < m; ++i) random_valid_action(masks[i], rt.space, rng_, &sampled[i].index);
    }
    std::vector<ScheduleState> next;
    next.reserve(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      next.push_back(apply_action(ts.tracks()[stepping[i]].current(), rt.space.decode(sampled[i].index), sketch));
    }
    const Eigen::MatrixXd xn = featurize_batch(next, ctx, layout_);
    const Eigen::VectorXd sn = model_.predict(xn);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd vn = Eigen::VectorXd::Zero(m);
    if (rl) {
      v = value_estimate(rt.agent->value, x);
      vn = value_estimate(rt.agent->value, xn);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const int t = stepping[i];
      const double r = reward(ts.tracks()[t].scores.back(), sn[i]);
      const double a = advantage(r, vn[i], v[i], cfg_.rl.gamma);
      window_advantage[t] += a;
      if (r < -0.1) ++out.improvement[0];
      else if (r < 0) ++out.improvement[1];
      else if (r == 0) ++out.improvement[2];
      else if (r <= 0.1) ++out.improvement[3];
      else ++out.improvement[4];
      if (rl) {
        Transition tr;
        tr.state = x.col(i);
        tr.action = sampled[i].index;
        tr.next_state = xn.col(i);
        tr.reward = r;
        tr.advantage = a;
        tr.value_target = r + cfg_.rl.gamma * vn[i];
        tr.log_prob = sampled[i].log_prob;
        tr.mask = std::move(flat[i]);
        rt.agent->buffer.push(std::move(tr));
        ++out.transitions;
      }
      current.col(t) = xn.col(i);
      out.heap.states.push_back(next[i]);
      out.heap.scores.push_back(sn[i]);
      ts.advance(t, std::move(next[i]), sn[i]);
    }
    ts.end_step();
    if (rl && step_index % cfg_.rl.train_interval == 0) {
      out.last_loss = rt.agent->train(cfg_.rl, rng_);
      ++out.trainings;
    }
    ++step_index;
    if (!ts.done() && should_cull(ts.step(), sc.lambda)) {
      std::vector<double> adv;
      for (int t : ts.alive()) adv.push_back(window_advantage[t]);
      std::fill(window_advantage.begin(), window_advantage.end(), 0.0);
      auto ev = ts.cull(adv);
      if (!ev.eliminated.empty()) out.culls.push_back(std::move(ev));
    }
  }
  out.steps = ts.step();
  out.visited = ts.used();
  std::vector<std::vector<double>> histories;
  for (const auto& t : ts.tracks()) {
    out.track_lengths.push_back(t.steps);
    histories.push_back(t.scores);
  }
  out.critical = critical_step_stats(histories);
  return out;
}

VisitHeap TuningSession::random_heap(int subgraph, int sketch_index, int count) {
  auto& rt = runtime_.at(subgraph);
  const auto& sketch = rt.sketches.at(sketch_index);
  VisitHeap heap;
  std::unordered_set<std::string> taken;
  for (int attempt = 0; attempt < 50 * count && static_cast<int>(heap.states.size()) < count; ++attempt) {
    auto s = sample_initial_schedules(sketch, 1, rng_).front();
    auto key = s.canonical();
    if (rt.measured.count(key) || !taken.insert(std::move(key)).second) continue;
    heap.states.push_back(std::move(s));
    heap.scores.push_back(0.0);
  }
  return heap;
}

RoundResult TuningSession::measure_round(int subgraph, int sketch_index, const VisitHeap& heap, int k) {
  auto& rt = runtime_.at(subgraph);
  const auto& sketch = rt.sketches.at(sketch_index);
  const auto& ctx = rt.contexts[sketch_index];
  const auto& sg = net_.subgraphs[subgraph];

  std::vector<std::string> keys;
  std::vector<int> origin;
  for (std::size_t i = 0; i < heap.states.size(); ++i) {
    auto key = heap.states[i].canonical();
    if (rt.measured.count(key)) continue;
    keys.push_back(std::move(key));
    origin.push_back(static_cast<int>(i));
  }
  std::vector<ScheduleState> chosen;
  std::unordered_set<std::string> chosen_keys;
  if (!keys.empty()) {
    Eigen::VectorXd scores(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) scores[i] = heap.scores[origin[i]];
    for (int idx : rank_scores(scores, keys, k).indices) {
      chosen.push_back(heap.states[origin[idx]]);
      chosen_keys.insert(keys[idx]);
    }
  }
  // Top up with uniform samples when the search did not visit enough new schedules.
  int filled = 0;
  for (int attempt = 0; attempt < 50 * k && static_cast<int>(chosen.size()) < k; ++attempt) {
    auto s = sample_initial_schedules(sketch, 1, rng_).front();
    auto key = s.canonical();
    if (rt.measured.count(key) || chosen_keys.count(key)) continue;
    chosen_keys.insert(std::move(key));
    chosen.push_back(std::move(s));
    ++filled;
  }

  RoundResult res;
  res.round = round_;
  res.subgraph = subgraph;
  res.sketch = sketch_index;
  res.measured = static_cast<int>(chosen.size());
  std::vector<MeasureRequest> requests;
  for (const auto& s : chosen) requests.push_back({&ctx, s, net_.name + "/" + sg.id});
  std::vector<MeasureResult> results;
  if (!requests.empty()) results = backend_->measure_batch(requests);
  if (results.size() != requests.size()) throw Error("measurement backend returned a wrong number of results");

  std::optional<ScheduleState> round_best_state;
  for (std::size_t i = 0; i < results.size(); ++i) {
    rt.measured.insert(chosen[i].canonical());
    const auto& r = results[i];
    if (!r.valid) continue;
    ++res.valid;
    if (cfg_.searcher != SearcherKind::Random) model_.add_example(subgraph, featurize(chosen[i], ctx, layout_), r.throughput);
    if (!res.round_best_time || r.time_seconds < *res.round_best_time) {
      res.round_best_time = r.time_seconds;
      round_best_state = chosen[i];
    }
  }
  consumed_ += res.measured;
  const double previous_best = rt.best_time;
  if (res.round_best_time && *res.round_best_time < rt.best_time) {
    rt.best_time = *res.round_best_time;
    rt.best_state = round_best_state;
  }
  if (rt.best_time > previous_best) throw Error("best time increased");
  stats_.record_round(subgraph, res.measured, res.round_best_time, sg.flops);
  if (res.measured == 0) rt.exhausted = true;

  TrainingReport fit;
  if (cfg_.searcher != SearcherKind::Random && model_.dataset_size() > 0) fit = model_.fit();

  if (res.round_best_time && stats_.best_throughput[subgraph] > 0) {
    res.x_t = (sg.flops / *res.round_best_time) / stats_.best_throughput[subgraph];
  }
  rt.sketch_window.record(sketch_index, res.x_t);
  res.reward = subgraph_reward(stats_, net_, subgraph, cfg_.bandit, cfg_.k);
  if (std::isfinite(res.reward)) subgraph_window_.record(subgraph, res.reward);
  curve_.push_back({consumed_, f_estimate()});

  nlohmann::ordered_json j;
  j["type"] = "measure";
  j["round"] = round_;
  j["subgraph"] = subgraph;
  j["sketch"] = sketch_index;
  j["k_limit"] = k;
  j["measured"] = res.measured;
  j["valid"] = res.valid;
  j["filled"] = filled;
  j["round_best_s"] = res.round_best_time ? nlohmann::ordered_json(*res.round_best_time) : nlohmann::ordered_json();
  j["x_t"] = res.x_t;
  j["reward"] = finite_or_null(res.reward);
  j["total_trials"] = consumed_;
  j["allocations"] = stats_.trials;
  auto best = nlohmann::ordered_json::array();
  for (const auto& r : runtime_) best.push_back(finite_or_null(r.best_time));
  j["best_s"] = best;
  j["f_estimate_s"] = finite_or_null(f_estimate());
  j["model_loss"] = {fit.loss_before, fit.loss_after};
  emit(std::move(j));
  return res;
}

RoundResult TuningSession::run_round() {
  if (finished()) throw ValidationError("the tuning budget is already spent");
  if (round_ == 0 && log_.empty()) {
    nlohmann::ordered_json h;
    h["type"] = "header";
    h["network"] = net_.name;
    h["config"] = cfg_.to_json();
    auto sgs = nlohmann::ordered_json::array();
    for (std::size_t n = 0; n < net_.subgraphs.size(); ++n) {
      const auto& sg = net_.subgraphs[n];
      auto sketches = nlohmann::ordered_json::array();
      for (const auto& sk : runtime_[n].sketches) sketches.push_back(sk.describe());
      sgs.push_back({{"id", sg.id}, {"weight", sg.weight}, {"flops", sg.flops}, {"sketches", sketches}});
    }
    h["subgraphs"] = sgs;
    emit(std::move(h));
  }
  nlohmann::ordered_json sel;
  sel["type"] = "select";
  sel["round"] = round_;
  const int n = choose_subgraph(sel);
  const int u = choose_sketch(n, sel);
  emit(std::move(sel));

  const int k = static_cast<int>(std::min<std::int64_t>(cfg_.k, cfg_.trials - consumed_));
  RoundResult res;
  if (cfg_.searcher == SearcherKind::Random) {
    res = measure_round(n, u, random_heap(n, u, k), k);
  } else {
    auto ep = run_episode(n, u);
    nlohmann::ordered_json e;
    e["type"] = "episode";
    e["round"] = round_;
    e["subgraph"] = n;
    e["sketch"] = u;
    e["steps"] = ep.steps;
    e["visited"] = ep.visited;
    e["budget"] = ep.budget;
    auto culls = nlohmann::ordered_json::array();
    for (const auto& c : ep.culls) culls.push_back({{"step", c.step}, {"eliminated", c.eliminated}, {"cut", c.cut}});
    e["culls"] = culls;
    e["track_lengths"] = ep.track_lengths;
    e["critical_positions"] = ep.critical.positions;
    e["critical_histogram"] = ep.critical.histogram;
    e["improvement_histogram"] = ep.improvement;
    e["transitions"] = ep.transitions;
    e["trainings"] = ep.trainings;
    if (ep.last_loss) {
      e["loss"] = {{"policy", ep.last_loss->policy_loss},
                   {"value", ep.last_loss->value_loss},
                   {"entropy", ep.last_loss->entropy}};
    }
    emit(std::move(e));
    res = measure_round(n, u, ep.heap, k);
  }
  ++round_;
  return res;
}

TuneReport TuningSession::report() const {
  TuneReport r;
  r.network = net_.name;
  r.searcher = cfg_.searcher;
  r.seed = cfg_.seed;
  r.trials = consumed_;
  r.rounds = round_;
  r.f_estimate = f_estimate();
  r.allocations = stats_.trials;
  for (const auto& rt : runtime_) {
    r.best_times.push_back(rt.best_time);
    r.best_schedules.push_back(rt.best_state ? rt.best_state->canonical() : std::string());
  }
  r.curve = curve_;
  return r;
}

}  // namespace hiertune
