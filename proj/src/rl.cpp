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

#include "hiertune/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "hiertune/error.hpp"

namespace hiertune {

void RlConfig::validate() const {
  if (!(lr_actor > 0 && lr_critic > 0)) throw ValidationError("learning rates must be > 0");
  if (!(gamma >= 0 && gamma <= 1)) throw ValidationError("gamma must lie in [0, 1]");
  if (train_interval < 1) throw ValidationError("train interval must be >= 1");
  if (!(w_mse >= 0 && w_entropy >= 0)) throw ValidationError("loss weights must be >= 0");
  if (!(clip > 0 && clip < 1)) throw ValidationError("clip must lie in (0, 1)");
  if (minibatch < 1 || epochs < 1 || buffer_capacity < 1) {
    throw ValidationError("minibatch, epochs and buffer capacity must be >= 1");
  }
  for (int h : hidden) {
    if (h < 1) throw ValidationError("hidden layer sizes must be >= 1");
  }
}

std::vector<bool> flatten(const ActionMask& mask) {
  std::vector<bool> out;
  for (const auto& head : mask.valid) out.insert(out.end(), head.begin(), head.end());
  return out;
}

namespace {

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

PolicyNet::PolicyNet(int features, const ActionSpace& s, const std::vector<int>& hidden, Rng& rng)
    : space(s), net(layer_sizes(features, hidden, s.total()), rng, 0.01) {}

int PolicyNet::head_offset(int subspace) const {
  int off = 0;
  for (int h = 0; h < subspace; ++h) off += space.size(h);
  return off;
}

ValueNet::ValueNet(int features, const std::vector<int>& hidden, Rng& rng)
    : net(layer_sizes(features, hidden, 1), rng) {}

void ReplayBuffer::push(Transition t) {
  items_.push_back(std::move(t));
  while (static_cast<int>(items_.size()) > capacity_) items_.pop_front();
}

std::vector<const Transition*> ReplayBuffer::sample(int n, Rng& rng) const {
  const int size = static_cast<int>(items_.size());
  n = std::min(n, size);
  std::vector<int> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first n slots become the sample.
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> pick(i, size - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<const Transition*> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(&items_[idx[i]]);
  return out;
}

void ReplayBuffer::save(BinaryWriter& out) const {
  out.i64(capacity_);
  out.u64(items_.size());
  for (const auto& t : items_) {
    out.matrix(t.state);
    out.matrix(t.next_state);
    for (int a : t.action) out.i64(a);
    out.f64(t.reward);
    out.f64(t.advantage);
    out.f64(t.value_target);
    out.f64(t.log_prob);
    out.u64(t.mask.size());
    for (bool b : t.mask) out.u8(b ? 1 : 0);
  }
}

void ReplayBuffer::load(BinaryReader& in) {
  capacity_ = static_cast<int>(in.i64());
  const auto n = in.u64();
  items_.clear();
  for (std::uint64_t i = 0; i < n; ++i) {
    Transition t;
    t.state = in.matrix<double>().col(0);
    t.next_state = in.matrix<double>().col(0);
    for (int& a : t.action) a = static_cast<int>(in.i64());
    t.reward = in.f64();
    t.advantage = in.f64();
    t.value_target = in.f64();
    t.log_prob = in.f64();
    const auto m = in.u64();
    if (m > in.remaining()) throw CheckpointError("corrupt transition mask");
    t.mask.resize(m);
    for (std::uint64_t k = 0; k < m; ++k) t.mask[k] = in.u8() != 0;
    items_.push_back(std::move(t));
  }
}

std::array<Eigen::VectorXd, kNumSubspaces> action_probabilities(const PolicyNet& policy,
                                                                const Eigen::VectorXd& logits,
                                                                const std::vector<bool>& mask) {
  std::array<Eigen::VectorXd, kNumSubspaces> probs;
  for (int h = 0; h < kNumSubspaces; ++h) {
    const int off = policy.head_offset(h);
    const int n = policy.space.size(h);
    std::vector<bool> valid(mask.begin() + off, mask.begin() + off + n);
    probs[h] = masked_softmax<double>(logits.segment(off, n), valid);
  }
  return probs;
}

std::vector<SampledAction> select_actions(const PolicyNet& policy, const Eigen::MatrixXd& states,
                                          const std::vector<std::vector<bool>>& masks, Rng& rng) {
  if (masks.size() != static_cast<std::size_t>(states.cols())) {
    throw ValidationError("one mask per state is required");
  }
  const Eigen::MatrixXd logits = policy.net.forward(states);
  std::vector<SampledAction> out(states.cols());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < states.cols(); ++i) {
    const auto probs = action_probabilities(policy, logits.col(i), masks[i]);
    for (int h = 0; h < kNumSubspaces; ++h) {
      const auto& p = probs[h];
      const double x = u(rng);
      double acc = 0.0;
      int choice = -1;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        if (p[k] <= 0) continue;
        choice = static_cast<int>(k);
        acc += p[k];
        if (x < acc) break;
      }
      out[i].index[h] = choice;
      out[i].log_prob += std::log(p[choice]);
    }
  }
  return out;
}

double advantage(double r, double v_next, double v_curr, double gamma) { return r + gamma * v_next - v_curr; }

Eigen::VectorXd advantage(const Eigen::VectorXd& r, const Eigen::VectorXd& v_next, const Eigen::VectorXd& v_curr,
                          double gamma) {
  return r + gamma * v_next - v_curr;
}

Eigen::VectorXd value_estimate(const ValueNet& value, const Eigen::MatrixXd& states) {
  return value.net.forward(states).row(0).transpose();
}

PpoGradients ppo_gradients(const PolicyNet& policy, const ValueNet& value,
                           std::span<const Transition* const> batch, const RlConfig& cfg) {
  if (batch.empty()) throw ValidationError("empty training batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const int features = static_cast<int>(batch.front()->state.size());
  Eigen::MatrixXd x(features, n);
  Eigen::VectorXd adv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.col(i) = batch[i]->state;
    adv[i] = batch[i]->advantage;
  }
  if (cfg.normalize_advantage && n > 1) {
    const double mean = adv.mean();
    const double sd = std::sqrt((adv.array() - mean).square().mean());
    adv = (adv.array() - mean) / (sd + 1e-8);
  }

  PpoGradients out;
  Mlp<double>::Cache pc;
  const Eigen::MatrixXd logits = policy.net.forward(x, &pc);
  Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(logits.rows(), n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = *batch[i];
    const auto probs = action_probabilities(policy, logits.col(i), t.mask);
    double logp = 0.0;
    for (int h = 0; h < kNumSubspaces; ++h) logp += std::log(probs[h][t.action[h]]);
    const double ratio = std::exp(logp - t.log_prob);
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double a = adv[i];
    const bool unclipped_active = ratio * a <= clipped * a;
    out.loss.policy_loss -= std::min(ratio * a, clipped * a) * inv_n;
    // d(-surrogate)/d logp
    const double dlogp = unclipped_active ? -ratio * a * inv_n : 0.0;
    for (int h = 0; h < kNumSubspaces; ++h) {
      const auto& p = probs[h];
      const int off = policy.head_offset(h);
      double entropy = 0.0;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        if (p[k] > 0) entropy -= p[k] * std::log(p[k]);
      }
      out.loss.entropy += entropy * inv_n;
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        if (p[k] <= 0) continue;
        const double onehot = k == t.action[h] ? 1.0 : 0.0;
        double g = dlogp * (onehot - p[k]);
        // d(-w H)/dz_k = w p_k (log p_k + H)
        g += cfg.w_entropy * p[k] * (std::log(p[k]) + entropy) * inv_n;
        dlogits(off + k, i) = g;
      }
    }
  }
  out.loss.policy_loss -= cfg.w_entropy * out.loss.entropy;
  out.policy = policy.net.backward(pc, dlogits);

  Mlp<double>::Cache vc;
  const Eigen::MatrixXd v = value.net.forward(x, &vc);
  Eigen::MatrixXd dv(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double err = batch[i]->value_target - v(0, i);
    out.loss.value_loss += cfg.w_mse * err * err * inv_n;
    dv(0, i) = -2.0 * cfg.w_mse * err * inv_n;
  }
  out.value = value.net.backward(vc, dv);
  return out;
}

LossReport ppo_update(PolicyNet& policy, ValueNet& value, Adam<double>& actor_opt, Adam<double>& critic_opt,
                      std::span<const Transition* const> batch, const RlConfig& cfg) {
  auto g = ppo_gradients(policy, value, batch, cfg);
  const auto& l = g.loss;
  if (!std::isfinite(l.policy_loss) || !std::isfinite(l.value_loss) || !std::isfinite(l.entropy)) {
    throw NumericError(fmt::format("non-finite loss in policy update (policy {}, value {}, entropy {}, batch {})",
                                   l.policy_loss, l.value_loss, l.entropy, batch.size()));
  }
  actor_opt.step(policy.net, g.policy, cfg.lr_actor);
  critic_opt.step(value.net, g.value, cfg.lr_critic);
  if (!policy.net.finite() || !value.net.finite()) throw NumericError("non-finite network parameters after update");
  return l;
}

ActorCritic::ActorCritic(int features, const ActionSpace& space, const RlConfig& cfg, Rng& rng)
    : policy(features, space, cfg.hidden, rng), value(features, cfg.hidden, rng), buffer(cfg.buffer_capacity) {}

LossReport ActorCritic::train(const RlConfig& cfg, Rng& rng) {
  LossReport last;
  if (buffer.size() == 0) return last;
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto batch = buffer.sample(cfg.minibatch, rng);
    last = ppo_update(policy, value, actor_opt, critic_opt, batch, cfg);
    ++updates;
  }
  return last;
}

void ActorCritic::save(BinaryWriter& out) const {
  out.i64(policy.space.num_iters);
  policy.net.save(out);
  value.net.save(out);
  actor_opt.save(out);
  critic_opt.save(out);
  buffer.save(out);
  out.i64(updates);
}

void ActorCritic::load(BinaryReader& in) {
  policy.space.num_iters = static_cast<int>(in.i64());
  policy.net.load(in);
  value.net.load(in);
  actor_opt.load(in);
  critic_opt.load(in);
  buffer.load(in);
  updates = in.i64();
}

}  // namespace hiertune
