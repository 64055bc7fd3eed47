// Copyright 2026 The Abstain Authors.
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

// Group Relative Policy Optimization over the contextual softmax policy:
// group-normalized advantages, a clipped importance-weighted surrogate, a k3
// KL penalty toward a frozen reference policy, its exact gradient, and the
// training loop.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "abstain/common.hpp"
#include "abstain/item.hpp"
#include "abstain/policy.hpp"
#include "abstain/reward.hpp"
#include "abstain/textmetrics.hpp"

namespace abstain {

struct GrpoConfig {
  int group_size = 4;
  double clip_eps = 0.2;
  double kl_beta = 0.01;
  double lr = 1e-2;
  int outer_iters = 300;
  int inner_steps = 1;
  int batch_size = 16;
  double std_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (group_size < 2) throw UsageError("group_size must be >= 2");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw UsageError("clip_eps must be in (0,1)");
    if (!(kl_beta >= 0.0)) throw UsageError("kl_beta must be >= 0");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw UsageError("lr must be finite and >= 0");
    if (outer_iters < 0) throw UsageError("outer_iters must be >= 0");
    if (inner_steps < 1) throw UsageError("inner_steps must be >= 1");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (!(std_eps >= 0.0)) throw UsageError("std_eps must be >= 0");
  }
};

struct RolloutGroup {
  SynthQAItem item;
  std::vector<ActionId> actions;
  std::vector<std::string> rendered;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  std::vector<double> rewards;
  std::vector<double> advantages;

  std::size_t size() const { return actions.size(); }
};

struct IterationRecord {
  int iteration = 0;
  double mean_reward = 0.0;
  double abstain_rate = 0.0;
  double kl = 0.0;
  double objective = 0.0;
  ConfusionCounts confusion;
  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

using TrainLog = std::vector<IterationRecord>;

// (r - mean) / (population std + std_eps); a group with zero spread maps to
// all zeros.
inline std::vector<double> compute_advantages(std::span<const double> rewards,
                                              double std_eps = 1e-8) {
  if (rewards.size() < 2) throw UsageError("compute_advantages: group size < 2");
  std::vector<double> adv(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) {
    return adv;
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / (sd + std_eps);
  return adv;
}

inline double importance_ratio(double logp_new, double logp_old) {
  return std::exp(logp_new - logp_old);
}

struct SurrogateTerm {
  double value;
  // d value / d ratio on the selected branch.
  double d_ratio;
};

// min(r*A, clip(r, 1-eps, 1+eps)*A). Exact ties take the unclipped branch.
inline SurrogateTerm surrogate_term(double ratio, double advantage, double eps) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
  if (unclipped <= clipped) return {unclipped, advantage};
  return {clipped, 0.0};
}

inline double clipped_term(double ratio, double advantage, double eps) {
  return surrogate_term(ratio, advantage, eps).value;
}

// k3 estimator u - log u - 1 with u = pi_ref / pi_theta.
inline double kl_k3(double logp_theta, double logp_ref) {
  const double log_u = logp_ref - logp_theta;
  return std::expm1(log_u) - log_u;
}

namespace detail {

inline void check_groups(std::span<const RolloutGroup> groups, const GrpoConfig& cfg) {
  const auto g = static_cast<std::size_t>(cfg.group_size);
  for (const auto& grp : groups) {
    if (grp.actions.size() != g || grp.rendered.size() != g || grp.logp_old.size() != g ||
        grp.logp_ref.size() != g || grp.rewards.size() != g || grp.advantages.size() != g) {
      throw UsageError("RolloutGroup: group-size mismatch");
    }
  }
}

}  // namespace detail

// Mean over groups of (1/G) sum_i [clipped surrogate - beta * k3].
inline double grpo_objective(const PolicyParams& params, std::span<const RolloutGroup> groups,
                             const GrpoConfig& cfg) {
  detail::check_groups(groups, cfg);
  if (groups.empty()) return 0.0;
  double total = 0.0;
  for (const auto& grp : groups) {
    const LogitRow lp = log_softmax(params.logits()[grp.item.feature.row()]);
    double acc = 0.0;
    for (std::size_t i = 0; i < grp.size(); ++i) {
      const double logp = lp[grp.actions[i].index()];
      acc += clipped_term(importance_ratio(logp, grp.logp_old[i]), grp.advantages[i],
                          cfg.clip_eps) -
             cfg.kl_beta * kl_k3(logp, grp.logp_ref[i]);
    }
    total += acc / static_cast<double>(grp.size());
  }
  return total / static_cast<double>(groups.size());
}

// Exact gradient of grpo_objective with respect to the logits. A term whose
// min selects the clipped branch contributes nothing through the ratio.
inline LogitTable grpo_gradient(const PolicyParams& params, std::span<const RolloutGroup> groups,
                                const GrpoConfig& cfg) {
  detail::check_groups(groups, cfg);
  LogitTable grad = zero_table();
  if (groups.empty()) return grad;
  for (const auto& grp : groups) {
    const std::size_t row = grp.item.feature.row();
    const LogitRow lp = log_softmax(params.logits()[row]);
    LogitRow p;
    for (std::size_t k = 0; k < kNumActions; ++k) p[k] = std::exp(lp[k]);
    const double scale = 1.0 / (static_cast<double>(grp.size()) * static_cast<double>(groups.size()));
    for (std::size_t i = 0; i < grp.size(); ++i) {
      const std::size_t a = grp.actions[i].index();
      const double ratio = importance_ratio(lp[a], grp.logp_old[i]);
      const SurrogateTerm s = surrogate_term(ratio, grp.advantages[i], cfg.clip_eps);
      const double u = std::exp(grp.logp_ref[i] - lp[a]);
      // d/d logp of [surrogate - beta * k3]; chain through d logp / d logits.
      const double coef = (s.d_ratio * ratio + cfg.kl_beta * (u - 1.0)) * scale;
      for (std::size_t k = 0; k < kNumActions; ++k) grad[row][k] -= coef * p[k];
      grad[row][a] += coef;
    }
  }
  return grad;
}

// Anything that can hand out questions and score a rendered completion.
template <class E>
concept RolloutEnvironment =
    requires(const E& env, Rng& rng, const SynthQAItem& item, ActionId a,
             const std::string& rendered, RewardVariant v) {
      { env.sample_item(rng) } -> std::convertible_to<const SynthQAItem&>;
      { env.score(item, a, rendered, v) } -> std::convertible_to<double>;
    };

// Samples uniformly (with replacement) from a fixed dataset and scores with
// the rule-based reward.
class DatasetEnv {
 public:
  explicit DatasetEnv(std::vector<SynthQAItem> items) : items_(std::move(items)) {
    if (items_.empty()) throw UsageError("DatasetEnv: empty dataset");
  }
  const SynthQAItem& sample_item(Rng& rng) const {
    return items_[static_cast<std::size_t>(uniform_index(rng, items_.size()))];
  }
  double score(const SynthQAItem& item, ActionId, const std::string& rendered,
               RewardVariant v) const {
    return total_reward(rendered, item.gold, v).total;
  }
  const std::vector<SynthQAItem>& items() const { return items_; }

 private:
  std::vector<SynthQAItem> items_;
};

// One question per feature row and a fixed reward per action: the target
// action pays `best`, everything else pays `other`. A sanity environment for
// checking that the optimizer finds an obvious argmax.
class BanditEnv {
 public:
  BanditEnv(ActionId target, double best, double other)
      : target_(target), best_(best), other_(other) {
    for (std::size_t r = 0; r < kNumFeatures; ++r) {
      SynthQAItem item;
      item.id = "bandit-" + std::to_string(r);
      item.question = "bandit arm for row " + std::to_string(r);
      item.gold = GoldAnswer::answerable({"alpha"});
      item.candidate_a = "alpha";
      item.candidate_b = "beta";
      item.feature = ContextFeature::from_row(r);
      items_.push_back(std::move(item));
    }
  }
  const SynthQAItem& sample_item(Rng& rng) const {
    return items_[static_cast<std::size_t>(uniform_index(rng, items_.size()))];
  }
  double score(const SynthQAItem&, ActionId a, const std::string&, RewardVariant) const {
    return a == target_ ? best_ : other_;
  }

 private:
  ActionId target_;
  double best_;
  double other_;
  std::vector<SynthQAItem> items_;
};

template <RolloutEnvironment Env>
RolloutGroup rollout_group(const PolicyParams& old_params, const PolicyParams& ref_params,
                           const SynthQAItem& item, const Env& env, RewardVariant variant,
                           const GrpoConfig& cfg, Rng& rng) {
  RolloutGroup grp;
  grp.item = item;
  const ContextFeature f = item.feature;
  const LogitRow lp_old = log_softmax(old_params.logits()[f.row()]);
  const LogitRow lp_ref = log_softmax(ref_params.logits()[f.row()]);
  for (int i = 0; i < cfg.group_size; ++i) {
    const ActionId a = sample_action(old_params, f, rng);
    std::string text = render_completion(a, item);
    grp.rewards.push_back(env.score(item, a, text, variant));
    grp.actions.push_back(a);
    grp.rendered.push_back(std::move(text));
    grp.logp_old.push_back(lp_old[a.index()]);
    grp.logp_ref.push_back(lp_ref[a.index()]);
  }
  grp.advantages = compute_advantages(grp.rewards, cfg.std_eps);
  return grp;
}

struct TrainResult {
  PolicyParams params;
  TrainLog log;
};

// params0 doubles as the frozen reference policy.
template <RolloutEnvironment Env>
TrainResult train_rl(const PolicyParams& params0, const Env& env, RewardVariant variant,
                     const GrpoConfig& cfg,
                     const std::function<void(const IterationRecord&)>& on_iteration = {}) {
  cfg.validate();
  Rng rng(cfg.seed);
  const PolicyParams ref = params0;
  TrainResult result{params0, {}};
  result.log.reserve(static_cast<std::size_t>(cfg.outer_iters));

  for (int it = 0; it < cfg.outer_iters; ++it) {
    const PolicyParams old = result.params;
    std::vector<RolloutGroup> groups;
    groups.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      groups.push_back(rollout_group(old, ref, env.sample_item(rng), env, variant, cfg, rng));
    }

    IterationRecord rec;
    rec.iteration = it;
    std::size_t n = 0, abstained = 0;
    std::vector<std::pair<Prediction, GoldAnswer>> pairs;
    for (const auto& grp : groups) {
      for (std::size_t i = 0; i < grp.size(); ++i) {
        rec.mean_reward += grp.rewards[i];
        rec.kl += kl_k3(grp.logp_old[i], grp.logp_ref[i]);
        const Prediction pred = prediction_from_answer(parse_completion(grp.rendered[i]).answer);
        if (!pred) ++abstained;
        pairs.emplace_back(pred, grp.item.gold);
        ++n;
      }
    }
    rec.mean_reward /= static_cast<double>(n);
    rec.kl /= static_cast<double>(n);
    rec.abstain_rate = static_cast<double>(abstained) / static_cast<double>(n);
    rec.confusion = abstention_confusion(pairs);

    for (int step = 0; step < cfg.inner_steps; ++step) {
      if (step == 0) {
        rec.objective = grpo_objective(result.params, groups, cfg);
        if (!std::isfinite(rec.objective)) {
          throw NumericalError("non-finite GRPO objective at iteration " + std::to_string(it));
        }
      }
      result.params.step(grpo_gradient(result.params, groups, cfg), cfg.lr);
    }
    if (!std::isfinite(rec.mean_reward) || !std::isfinite(rec.kl)) {
      throw NumericalError("non-finite training statistics at iteration " + std::to_string(it));
    }
    if (on_iteration) on_iteration(rec);
    result.log.push_back(rec);
  }
  return result;
}

// Per-pair metric scores. When either side abstains, every lexical score is 1
// if both abstain and 0 otherwise.
struct PairScores {
  double r1 = 0.0;
  double r2 = 0.0;
  double rl = 0.0;
  double sem = 0.0;
  double em = 0.0;
};

inline PairScores pair_scores(std::string_view answer, const GoldAnswer& gold) {
  const bool abstains = is_no_answer(answer);
  if (abstains || gold.is_no_answer()) {
    const double v = abstains && gold.is_no_answer() ? 1.0 : 0.0;
    return {v, v, v, v, v};
  }
  return {rouge_n(answer, gold, 1).f1, rouge_n(answer, gold, 2).f1, rouge_l(answer, gold).f1,
          semantic_sim(answer, gold), exact_match(answer, gold)};
}

struct EvalRow {
  std::string id;
  ActionId action;
  std::string answer;
  PairScores scores;
  ConfusionCounts confusion;
  double reward = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_reward = 0.0;
  double em_rate = 0.0;
  double abstain_rate = 0.0;
  PairScores mean_scores;
  ConfusionCounts confusion;
};

template <class ActionFn>
EvalReport evaluate_actions(std::span<const SynthQAItem> dataset, ActionFn&& choose,
                            RewardVariant variant = RewardVariant::RougePlusEM) {
  if (dataset.empty()) throw UsageError("evaluate: empty dataset");
  EvalReport rep;
  std::size_t abstained = 0;
  for (const auto& item : dataset) {
    EvalRow row;
    row.id = item.id;
    row.action = choose(item);
    const std::string rendered = render_completion(row.action, item);
    row.answer = parse_completion(rendered).answer;
    row.scores = pair_scores(row.answer, item.gold);
    const Prediction pred = prediction_from_answer(row.answer);
    const std::pair<Prediction, GoldAnswer> one[] = {{pred, item.gold}};
    row.confusion = abstention_confusion(one);
    row.reward = total_reward(rendered, item.gold, variant).total;
    if (!pred) ++abstained;

    rep.mean_reward += row.reward;
    rep.mean_scores.r1 += row.scores.r1;
    rep.mean_scores.r2 += row.scores.r2;
    rep.mean_scores.rl += row.scores.rl;
    rep.mean_scores.sem += row.scores.sem;
    rep.mean_scores.em += row.scores.em;
    rep.confusion += row.confusion;
    rep.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(dataset.size());
  rep.mean_reward /= n;
  rep.mean_scores.r1 /= n;
  rep.mean_scores.r2 /= n;
  rep.mean_scores.rl /= n;
  rep.mean_scores.sem /= n;
  rep.mean_scores.em /= n;
  rep.em_rate = rep.mean_scores.em;
  rep.abstain_rate = static_cast<double>(abstained) / n;
  return rep;
}

// Greedy (argmax) decoding.
inline EvalReport evaluate_policy(const PolicyParams& params, std::span<const SynthQAItem> dataset,
                                  RewardVariant variant = RewardVariant::RougePlusEM) {
  return evaluate_actions(
      dataset, [&](const SynthQAItem& item) { return greedy_action(params, item.feature); },
      variant);
}

// Mean reward of the stochastic policy: each action's reward weighted by its
// probability, with no sampling.
inline double expected_reward(const PolicyParams& params, std::span<const SynthQAItem> dataset,
                              RewardVariant variant = RewardVariant::RougePlusEM) {
  if (dataset.empty()) throw UsageError("expected_reward: empty dataset");
  double total = 0.0;
  for (const auto& item : dataset) {
    const LogitRow p = action_probs(params, item.feature);
    for (std::size_t k = 0; k < kNumActions; ++k) {
      const ActionId a = ActionId::from_index(k);
      total += p[k] * total_reward(render_completion(a, item), item.gold, variant).total;
    }
  }
  return total / static_cast<double>(dataset.size());
}

// The action a gold-aware predictor would take.
inline ActionId oracle_action(const SynthQAItem& item) {
  if (item.gold.is_no_answer()) return {Choice::Abstain, true};
  if (exact_match(item.candidate_a, item.gold) == 1.0) return {Choice::AnswerA, true};
  if (exact_match(item.candidate_b, item.gold) == 1.0) return {Choice::AnswerB, true};
  return {Choice::AnswerA, true};
}

// Mean over feature rows of the total variation distance between two policies.
inline double mean_total_variation(const PolicyParams& a, const PolicyParams& b) {
  double tv = 0.0;
  for (std::size_t r = 0; r < kNumFeatures; ++r) {
    const auto f = ContextFeature::from_row(r);
    const LogitRow pa = action_probs(a, f), pb = action_probs(b, f);
    double d = 0.0;
    for (std::size_t k = 0; k < kNumActions; ++k) d += std::abs(pa[k] - pb[k]);
    tv += 0.5 * d;
  }
  return tv / static_cast<double>(kNumFeatures);
}

}  // namespace abstain
