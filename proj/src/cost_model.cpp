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

#include "hiertune/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

#include "hiertune/error.hpp"

namespace hiertune {

void GbtConfig::validate() const {
  if (trees < 1 || max_depth < 1 || min_child < 1 || max_examples < 1) {
    throw ValidationError("cost model sizes must be >= 1");
  }
  if (!(learning_rate > 0 && learning_rate <= 1)) throw ValidationError("cost model learning rate must lie in (0, 1]");
  if (!(lambda >= 0)) throw ValidationError("cost model lambda must be >= 0");
}

double RegressionTree::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  int n = 0;
  while (!nodes[n].leaf()) n = x[nodes[n].feature] <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
  return nodes[n].value;
}

namespace {

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Grows one tree level by level on gradients g (hessians are all one).
RegressionTree grow_tree(const Eigen::MatrixXd& x, const std::vector<std::vector<int>>& sorted,
                         const Eigen::VectorXd& g, const GbtConfig& cfg) {
  const auto n = static_cast<int>(x.cols());
  const auto features = static_cast<int>(x.rows());
  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<int> node_of(n, 0);
  std::vector<int> active{0};
  std::vector<double> sum_g(1, g.sum());
  std::vector<double> count(1, n);

  for (int depth = 0; depth < cfg.max_depth && !active.empty(); ++depth) {
    const int nodes = static_cast<int>(tree.nodes.size());
    std::vector<char> is_active(nodes, 0);
    for (int a : active) is_active[a] = 1;
    std::vector<Split> best(nodes);
    std::vector<double> gl(nodes);
    std::vector<double> hl(nodes);
    std::vector<double> last(nodes);
    for (int f = 0; f < features; ++f) {
      std::fill(gl.begin(), gl.end(), 0.0);
      std::fill(hl.begin(), hl.end(), 0.0);
      for (int i : sorted[f]) {
        const int nd = node_of[i];
        if (nd < 0 || !is_active[nd]) continue;
        const double v = x(f, i);
        if (hl[nd] >= cfg.min_child && v > last[nd] && count[nd] - hl[nd] >= cfg.min_child) {
          const double gr = sum_g[nd] - gl[nd];
          const double hr = count[nd] - hl[nd];
          const double gain = gl[nd] * gl[nd] / (hl[nd] + cfg.lambda) + gr * gr / (hr + cfg.lambda) -
                              sum_g[nd] * sum_g[nd] / (count[nd] + cfg.lambda);
          if (gain > best[nd].gain + 1e-12) best[nd] = {gain, f, 0.5 * (last[nd] + v)};
        }
        gl[nd] += g[i];
        hl[nd] += 1.0;
        last[nd] = v;
      }
    }
    std::vector<int> next;
    for (int a : active) {
      if (best[a].feature < 0) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      tree.nodes[a].feature = best[a].feature;
      tree.nodes[a].threshold = best[a].threshold;
      tree.nodes[a].left = left;
      tree.nodes[a].right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    sum_g.resize(tree.nodes.size(), 0.0);
    count.resize(tree.nodes.size(), 0.0);
    for (int c : next) {
      sum_g[c] = 0.0;
      count[c] = 0.0;
    }
    for (int i = 0; i < n; ++i) {
      const int nd = node_of[i];
      if (nd < 0) continue;
      const auto& node = tree.nodes[nd];
      if (node.leaf()) {
        if (is_active[nd]) node_of[i] = -1 - nd;  // finalized leaf
        continue;
      }
      const int child = x(node.feature, i) <= node.threshold ? node.left : node.right;
      node_of[i] = child;
      sum_g[child] += g[i];
      count[child] += 1.0;
    }
    active = std::move(next);
  }
  // Leaf weights: -G / (H + lambda).
  std::vector<double> leaf_g(tree.nodes.size(), 0.0);
  std::vector<double> leaf_h(tree.nodes.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    const int nd = node_of[i] < 0 ? -1 - node_of[i] : node_of[i];
    leaf_g[nd] += g[i];
    leaf_h[nd] += 1.0;
  }
  for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
    if (tree.nodes[k].leaf()) tree.nodes[k].value = -leaf_g[k] / (leaf_h[k] + cfg.lambda);
  }
  return tree;
}

std::vector<std::vector<int>> presort(const Eigen::MatrixXd& x) {
  std::vector<std::vector<int>> sorted(x.rows());
  for (Eigen::Index f = 0; f < x.rows(); ++f) {
    auto& order = sorted[f];
    order.resize(x.cols());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x(f, a) < x(f, b); });
  }
  return sorted;
}

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) { return (pred - y).squaredNorm() / y.size(); }

}  // namespace

void GbtEnsemble::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbtConfig& cfg) {
  if (y.size() == 0) throw ValidationError("cannot fit the cost model on an empty dataset");
  trees_.clear();
  base_ = y.mean();
  learning_rate_ = cfg.learning_rate;
  fitted_ = true;
  boost(x, y, cfg, cfg.trees);
}

void GbtEnsemble::boost(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbtConfig& cfg, int rounds) {
  if (!fitted_) {
    fit(x, y, cfg);
    return;
  }
  const auto sorted = presort(x);
  Eigen::VectorXd pred = predict_batch(x);
  for (int r = 0; r < rounds; ++r) {
    const Eigen::VectorXd g = pred - y;
    auto tree = grow_tree(x, sorted, g, cfg);
    for (Eigen::Index i = 0; i < x.cols(); ++i) pred[i] += learning_rate_ * tree.predict(x.col(i));
    trees_.push_back(std::move(tree));
  }
}

double GbtEnsemble::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  double s = base_;
  for (const auto& t : trees_) s += learning_rate_ * t.predict(x);
  return s;
}

Eigen::VectorXd GbtEnsemble::predict_batch(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) out[i] = predict(x.col(i));
  return out;
}

std::string GbtEnsemble::dump() const {
  std::string out = fmt::format("base {:.17g}\nlearning_rate {:.17g}\ntrees {}\n", base_, learning_rate_, trees_.size());
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    out += fmt::format("tree {}\n", t);
    for (std::size_t k = 0; k < trees_[t].nodes.size(); ++k) {
      const auto& n = trees_[t].nodes[k];
      if (n.leaf()) {
        out += fmt::format("  {} leaf {:.17g}\n", k, n.value);
      } else {
        out += fmt::format("  {} f{} <= {:.17g} ? {} : {}\n", k, n.feature, n.threshold, n.left, n.right);
      }
    }
  }
  return out;
}

void GbtEnsemble::save(BinaryWriter& out) const {
  out.u8(fitted_ ? 1 : 0);
  out.f64(base_);
  out.f64(learning_rate_);
  out.u64(trees_.size());
  for (const auto& t : trees_) {
    out.u64(t.nodes.size());
    for (const auto& n : t.nodes) {
      out.i64(n.feature);
      out.f64(n.threshold);
      out.i64(n.left);
      out.i64(n.right);
      out.f64(n.value);
    }
  }
}

void GbtEnsemble::load(BinaryReader& in) {
  fitted_ = in.u8() != 0;
  base_ = in.f64();
  learning_rate_ = in.f64();
  const auto count = in.u64();
  trees_.clear();
  for (std::uint64_t t = 0; t < count; ++t) {
    RegressionTree tree;
    const auto nodes = in.u64();
    if (nodes > in.remaining()) throw CheckpointError("corrupt tree size");
    for (std::uint64_t k = 0; k < nodes; ++k) {
      TreeNode n;
      n.feature = static_cast<int>(in.i64());
      n.threshold = in.f64();
      n.left = static_cast<int>(in.i64());
      n.right = static_cast<int>(in.i64());
      n.value = in.f64();
      tree.nodes.push_back(n);
    }
    trees_.push_back(std::move(tree));
  }
}

SurrogateModel::SurrogateModel(int features, GbtConfig cfg) : features_(features), cfg_(cfg) { cfg_.validate(); }

Eigen::VectorXd SurrogateModel::predict(const Eigen::MatrixXd& x) const {
  if (x.rows() != features_) {
    throw ValidationError(fmt::format("cost model expects {} features, got {}", features_, x.rows()));
  }
  if (!trained()) return Eigen::VectorXd::Ones(x.cols());
  return ensemble_.predict_batch(x).cwiseMax(floor_);
}

double SurrogateModel::predict(const Eigen::VectorXd& x) const {
  return predict(Eigen::MatrixXd(x))[0];
}

void SurrogateModel::add_example(int subgraph, const Eigen::VectorXd& features, double throughput) {
  if (features.size() != features_) {
    throw ValidationError(fmt::format("cost model expects {} features, got {}", features_, features.size()));
  }
  if (!(throughput > 0) || !std::isfinite(throughput)) return;
  subgraph_.push_back(subgraph);
  x_.push_back(features);
  throughput_.push_back(throughput);
  trim();
}

void SurrogateModel::trim() {
  const auto excess = static_cast<std::ptrdiff_t>(subgraph_.size()) - cfg_.max_examples;
  if (excess <= 0) return;
  subgraph_.erase(subgraph_.begin(), subgraph_.begin() + excess);
  x_.erase(x_.begin(), x_.begin() + excess);
  throughput_.erase(throughput_.begin(), throughput_.begin() + excess);
}

Eigen::VectorXd SurrogateModel::targets() const {
  int max_sg = 0;
  for (int s : subgraph_) max_sg = std::max(max_sg, s);
  std::vector<double> best(max_sg + 1, 0.0);
  for (std::size_t i = 0; i < subgraph_.size(); ++i) best[subgraph_[i]] = std::max(best[subgraph_[i]], throughput_[i]);
  Eigen::VectorXd y(subgraph_.size());
  for (std::size_t i = 0; i < subgraph_.size(); ++i) y[i] = throughput_[i] / best[subgraph_[i]];
  return y;
}

TrainingReport SurrogateModel::fit() {
  TrainingReport report;
  report.examples = subgraph_.size();
  if (subgraph_.empty()) return report;
  Eigen::MatrixXd x(features_, subgraph_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) x.col(i) = x_[i];
  const Eigen::VectorXd y = targets();
  const bool had_model = trained();
  report.loss_before = had_model ? mse(ensemble_.predict_batch(x), y) : mse(Eigen::VectorXd::Ones(y.size()), y);
  GbtEnsemble fresh;
  fresh.fit(x, y, cfg_);
  const double fresh_loss = mse(fresh.predict_batch(x), y);
  if (!had_model || fresh_loss <= report.loss_before) {
    ensemble_ = std::move(fresh);
    report.loss_after = fresh_loss;
  } else {
    ensemble_.boost(x, y, cfg_, cfg_.trees);
    report.loss_after = mse(ensemble_.predict_batch(x), y);
    report.boosted_on_previous = true;
  }
  report.trees = ensemble_.trees().size();
  floor_ = std::max(1e-6, y.minCoeff());
  ++rounds_;
  return report;
}

void SurrogateModel::save(BinaryWriter& out) const {
  out.i64(features_);
  out.i64(rounds_);
  out.f64(floor_);
  ensemble_.save(out);
  out.u64(subgraph_.size());
  for (std::size_t i = 0; i < subgraph_.size(); ++i) {
    out.i64(subgraph_[i]);
    out.f64(throughput_[i]);
    out.matrix(x_[i]);
  }
}

void SurrogateModel::load(BinaryReader& in) {
  features_ = static_cast<int>(in.i64());
  rounds_ = in.i64();
  floor_ = in.f64();
  if (!(floor_ > 0)) throw CheckpointError("corrupt cost model floor");
  ensemble_.load(in);
  const auto n = in.u64();
  if (n > in.remaining()) throw CheckpointError("corrupt cost model dataset size");
  subgraph_.clear();
  x_.clear();
  throughput_.clear();
  for (std::uint64_t i = 0; i < n; ++i) {
    subgraph_.push_back(static_cast<int>(in.i64()));
    throughput_.push_back(in.f64());
    x_.push_back(in.matrix<double>().col(0));
  }
}

double reward(double score_prev, double score_next) {
  const double prev = std::max(score_prev, 1e-6);
  return (std::max(score_next, 1e-6) - prev) / prev;
}

Eigen::VectorXd reward(const Eigen::VectorXd& score_prev, const Eigen::VectorXd& score_next) {
  Eigen::VectorXd r(score_prev.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = reward(score_prev[i], score_next[i]);
  return r;
}

RankResult rank_scores(const Eigen::VectorXd& scores, const std::vector<std::string>& keys, int k) {
  if (k < 1) throw ValidationError("top-K needs K >= 1");
  if (static_cast<std::size_t>(scores.size()) != keys.size()) throw ValidationError("one key per score is required");
  std::vector<int> distinct;
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (seen.insert(keys[i]).second) distinct.push_back(static_cast<int>(i));
  }
  std::stable_sort(distinct.begin(), distinct.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  RankResult r;
  r.fewer_than_k = static_cast<int>(distinct.size()) < k;
  if (!r.fewer_than_k) distinct.resize(k);
  r.indices = std::move(distinct);
  return r;
}

}  // namespace hiertune
