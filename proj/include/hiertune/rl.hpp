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

#include <array>
#include <deque>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hiertune/nn.hpp"
#include "hiertune/schedule.hpp"

namespace hiertune {

struct RlConfig {
  double lr_actor = 3e-4;
  double lr_critic = 1e-3;
  double gamma = 0.9;
  int train_interval = 2;
  double w_mse = 0.5;
  double w_entropy = 0.01;
  double clip = 0.2;
  int minibatch = 256;
  int epochs = 1;
  int buffer_capacity = 4096;
  std::vector<int> hidden{128, 128};
  bool normalize_advantage = false;

  void validate() const;
};

using JointAction = std::array<int, kNumSubspaces>;

/// Flattened mask over the concatenated heads.
std::vector<bool> flatten(const ActionMask& mask);

/// Actor: features -> concatenated logits of the four action heads.
struct PolicyNet {
  PolicyNet() = default;
  PolicyNet(int features, const ActionSpace& space, const std::vector<int>& hidden, Rng& rng);

  /// Offset of each head inside the concatenated output.
  int head_offset(int subspace) const;

  ActionSpace space;
  Mlp<double> net;
};

/// Critic: features -> V(s).
struct ValueNet {
  ValueNet() = default;
  ValueNet(int features, const std::vector<int>& hidden, Rng& rng);

  Mlp<double> net;
};

struct Transition {
  Eigen::VectorXd state;
  JointAction action{};
  Eigen::VectorXd next_state;
  double reward = 0.0;
  double advantage = 0.0;
  /// Bootstrapped critic target r + gamma V(s') fixed at interaction time.
  double value_target = 0.0;
  /// Joint log-probability of `action` under the behavior policy.
  double log_prob = 0.0;
  std::vector<bool> mask;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity = 4096) : capacity_(capacity) {}

  void push(Transition t);
  /// min(n, size) distinct transitions drawn uniformly.
  std::vector<const Transition*> sample(int n, Rng& rng) const;

  std::size_t size() const { return items_.size(); }
  int capacity() const { return capacity_; }
  const std::deque<Transition>& items() const { return items_; }

  void save(BinaryWriter& out) const;
  void load(BinaryReader& in);

 private:
  int capacity_;
  std::deque<Transition> items_;
};

struct SampledAction {
  JointAction index{};
  double log_prob = 0.0;
};

/// Per-head probabilities of one state.
std::array<Eigen::VectorXd, kNumSubspaces> action_probabilities(const PolicyNet& policy,
                                                                const Eigen::VectorXd& logits,
                                                                const std::vector<bool>& mask);

/// Samples one joint action per column of `states`.
std::vector<SampledAction> select_actions(const PolicyNet& policy, const Eigen::MatrixXd& states,
                                          const std::vector<std::vector<bool>>& masks, Rng& rng);

double advantage(double r, double v_next, double v_curr, double gamma);
Eigen::VectorXd advantage(const Eigen::VectorXd& r, const Eigen::VectorXd& v_next, const Eigen::VectorXd& v_curr,
                          double gamma);

Eigen::VectorXd value_estimate(const ValueNet& value, const Eigen::MatrixXd& states);

struct LossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
};

struct PpoGradients {
  LossReport loss;
  Mlp<double>::Gradients policy;
  Mlp<double>::Gradients value;
};

/// Losses and their analytic gradients on a batch. Policy loss is the negated
/// clipped surrogate minus the entropy bonus; value loss is w_mse times the MSE
/// against the stored targets.
PpoGradients ppo_gradients(const PolicyNet& policy, const ValueNet& value,
                           std::span<const Transition* const> batch, const RlConfig& cfg);

/// One optimizer step on each network. Throws NumericError on non-finite losses.
LossReport ppo_update(PolicyNet& policy, ValueNet& value, Adam<double>& actor_opt, Adam<double>& critic_opt,
                      std::span<const Transition* const> batch, const RlConfig& cfg);

/// Actor, critic, their optimizers and the replay buffer of one subgraph.
struct ActorCritic {
  ActorCritic() = default;
  ActorCritic(int features, const ActionSpace& space, const RlConfig& cfg, Rng& rng);

  /// Samples minibatches from the buffer and runs `cfg.epochs` updates.
  LossReport train(const RlConfig& cfg, Rng& rng);

  void save(BinaryWriter& out) const;
  void load(BinaryReader& in);

  PolicyNet policy;
  ValueNet value;
  Adam<double> actor_opt;
  Adam<double> critic_opt;
  ReplayBuffer buffer;
  std::int64_t updates = 0;
};

}  // namespace hiertune
