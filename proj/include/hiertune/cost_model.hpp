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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hiertune/binary_io.hpp"

namespace hiertune {

struct GbtConfig {
  int trees = 50;
  int max_depth = 6;
  double learning_rate = 0.3;
  double lambda = 1.0;
  int min_child = 1;
  int max_examples = 10000;

  void validate() const;
};

struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  bool operator==(const RegressionTree&) const = default;
};

/// Squared-loss gradient boosting with exact greedy splits.
class GbtEnsemble {
 public:
  /// Fresh fit: base = mean target, then `cfg.trees` rounds.
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbtConfig& cfg);
  /// Adds `rounds` trees fitted to the residuals of the current ensemble.
  void boost(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbtConfig& cfg, int rounds);

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& x) const;

  bool empty() const { return !fitted_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  std::string dump() const;

  void save(BinaryWriter& out) const;
  void load(BinaryReader& in);

 private:
  bool fitted_ = false;
  double base_ = 0.0;
  double learning_rate_ = 0.3;
  std::vector<RegressionTree> trees_;
};

struct TrainingReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::size_t examples = 0;
  std::size_t trees = 0;
  bool boosted_on_previous = false;
};

/// Learned schedule scorer (higher is better). Examples are stored with their
/// raw throughput and normalized by the best throughput of their subgraph at
/// fit time, so every target lies in (0, 1].
class SurrogateModel {
 public:
  SurrogateModel() = default;
  SurrogateModel(int features, GbtConfig cfg);

  int features() const { return features_; }
  bool trained() const { return !ensemble_.empty(); }
  std::int64_t rounds() const { return rounds_; }

  /// One score per column; 1.0 everywhere before the first fit. Trained
  /// predictions are clamped below at the smallest target of the last fit, so
  /// boosting undershoot cannot produce near-zero scores.
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  double predict(const Eigen::VectorXd& x) const;

  void add_example(int subgraph, const Eigen::VectorXd& features, double throughput);
  /// Refits on the most recent examples. If the fresh ensemble does not beat
  /// the previous one on the new data, boosting continues from the previous one.
  TrainingReport fit();

  std::size_t dataset_size() const { return subgraph_.size(); }
  /// Training targets of the examples used by the last fit, in dataset order.
  Eigen::VectorXd targets() const;
  std::string dump() const { return ensemble_.dump(); }

  void save(BinaryWriter& out) const;
  void load(BinaryReader& in);

 private:
  void trim();

  int features_ = 0;
  GbtConfig cfg_;
  GbtEnsemble ensemble_;
  std::int64_t rounds_ = 0;
  double floor_ = 1e-6;
  std::vector<int> subgraph_;
  std::vector<Eigen::VectorXd> x_;
  std::vector<double> throughput_;
};

/// Relative improvement of the predicted score: (C(next) - C(prev)) / C(prev).
double reward(double score_prev, double score_next);
Eigen::VectorXd reward(const Eigen::VectorXd& score_prev, const Eigen::VectorXd& score_next);

struct RankResult {
  std::vector<int> indices;
  bool fewer_than_k = false;
};

/// Indices of the K highest scores among distinct keys; the first visit of a
/// key represents it and ties keep visit order.
RankResult rank_scores(const Eigen::VectorXd& scores, const std::vector<std::string>& keys, int k);

}  // namespace hiertune
