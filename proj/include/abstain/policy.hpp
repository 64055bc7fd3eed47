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

// A contextual softmax policy over six discrete completions. It stands in for
// a language model: each completion is one decision, so the probability of a
// rendered completion is exactly the probability of its action.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "abstain/common.hpp"
#include "abstain/item.hpp"
#include "abstain/reward.hpp"

namespace abstain {

inline constexpr std::size_t kNumActions = 6;

enum class Choice { AnswerA = 0, AnswerB = 1, Abstain = 2 };

struct ActionId {
  Choice choice = Choice::Abstain;
  bool formatted = true;

  std::size_t index() const {
    return static_cast<std::size_t>(choice) * 2 + (formatted ? 0 : 1);
  }
  static ActionId from_index(std::size_t i) {
    if (i >= kNumActions) throw UsageError("ActionId: index out of range");
    return {static_cast<Choice>(i / 2), i % 2 == 0};
  }
  std::string name() const {
    static constexpr std::array<const char*, 3> kChoice = {"answer_a", "answer_b", "abstain"};
    std::string n = kChoice[static_cast<std::size_t>(choice)];
    if (!formatted) n += "_raw";
    return n;
  }
  friend bool operator==(const ActionId&, const ActionId&) = default;
};

using LogitRow = std::array<double, kNumActions>;
using LogitTable = std::array<LogitRow, kNumFeatures>;

inline LogitTable zero_table() {
  LogitTable t{};
  for (auto& r : t) r.fill(0.0);
  return t;
}

inline LogitTable& operator+=(LogitTable& a, const LogitTable& b) {
  for (std::size_t f = 0; f < kNumFeatures; ++f)
    for (std::size_t k = 0; k < kNumActions; ++k) a[f][k] += b[f][k];
  return a;
}

inline LogitTable scaled(const LogitTable& t, double s) {
  LogitTable out = t;
  for (auto& r : out)
    for (auto& v : r) v *= s;
  return out;
}

inline bool all_finite(const LogitTable& t) {
  for (const auto& r : t)
    for (double v : r)
      if (!std::isfinite(v)) return false;
  return true;
}

// Logits indexed by (feature row, action index). Rows are independent
// softmax distributions.
class PolicyParams {
 public:
  PolicyParams() : logits_(zero_table()) {}
  explicit PolicyParams(const LogitTable& logits) : logits_(logits) {
    if (!all_finite(logits_)) throw NumericalError("PolicyParams: non-finite logit");
  }

  const LogitTable& logits() const { return logits_; }
  double at(std::size_t row, std::size_t action) const { return logits_[row][action]; }

  // Gradient ascent step. Throws if the result is not finite.
  void step(const LogitTable& grad, double lr) {
    LogitTable next = logits_;
    for (std::size_t f = 0; f < kNumFeatures; ++f)
      for (std::size_t k = 0; k < kNumActions; ++k) next[f][k] += lr * grad[f][k];
    if (!all_finite(next)) throw NumericalError("policy update produced non-finite logits");
    logits_ = next;
  }

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
  LogitTable logits_;
};

inline LogitRow log_softmax(const LogitRow& row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double v : row) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  LogitRow out;
  for (std::size_t k = 0; k < kNumActions; ++k) out[k] = row[k] - lse;
  return out;
}

inline LogitRow action_probs(const PolicyParams& params, ContextFeature f) {
  LogitRow lp = log_softmax(params.logits()[f.row()]);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

inline double action_log_prob(const PolicyParams& params, ContextFeature f, ActionId a) {
  return log_softmax(params.logits()[f.row()])[a.index()];
}

inline ActionId sample_action(const PolicyParams& params, ContextFeature f, Rng& rng) {
  const LogitRow p = action_probs(params, f);
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < kNumActions; ++k) {
    acc += p[k];
    if (u < acc) return ActionId::from_index(k);
  }
  // u landed in the rounding gap above the cumulative sum.
  for (std::size_t k = kNumActions; k-- > 0;) {
    if (p[k] > 0.0) return ActionId::from_index(k);
  }
  return ActionId::from_index(kNumActions - 1);
}

inline ActionId sample_action(const PolicyParams& params, ContextFeature f,
                              std::uint64_t seed) {
  Rng rng(seed);
  return sample_action(params, f, rng);
}

// Argmax action; lowest index wins ties.
inline ActionId greedy_action(const PolicyParams& params, ContextFeature f) {
  const auto& row = params.logits()[f.row()];
  return ActionId::from_index(
      static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
}

inline std::string chosen_text(ActionId a, const SynthQAItem& item) {
  switch (a.choice) {
    case Choice::AnswerA: return item.candidate_a;
    case Choice::AnswerB: return item.candidate_b;
    case Choice::Abstain: return std::string(kNoAnswer);
  }
  return {};
}

inline std::string render_completion(ActionId a, const SynthQAItem& item) {
  const std::string x = chosen_text(a, item);
  if (!a.formatted) return x;
  std::string think = "The evidence ";
  switch (item.feature.evidence) {
    case Evidence::Supports: think += "supports a single answer"; break;
    case Evidence::Contradicts: think += "is contradictory"; break;
    case Evidence::NoEvidence: think += "does not cover the asked period"; break;
  }
  think += ". Candidates are " + item.candidate_a + " and " + item.candidate_b + ".";
  think += a.choice == Choice::Abstain ? " I cannot determine the answer."
                                       : " The answer is " + x + ".";
  return render_completion_text(think, x);
}

// d log pi(a|f) / d logits: onehot(a) - softmax on row f, zero elsewhere.
inline LogitTable grad_log_prob(const PolicyParams& params, ContextFeature f, ActionId a) {
  LogitTable g = zero_table();
  const LogitRow p = action_probs(params, f);
  auto& row = g[f.row()];
  for (std::size_t k = 0; k < kNumActions; ++k) row[k] = -p[k];
  row[a.index()] += 1.0;
  return g;
}

struct ExpertTrace {
  ContextFeature feature;
  ActionId action;
  std::string rendered;
  GoldAnswer gold;
};

// A proposed completion is trusted when its answer exactly matches the gold
// or it abstains on an unanswerable question.
inline bool is_trusted_completion(const std::string& rendered, const GoldAnswer& gold) {
  const ParsedCompletion pc = parse_completion(rendered);
  const bool abstains = is_no_answer(pc.answer);
  if (gold.is_no_answer()) return abstains;
  return !abstains && exact_match(pc.answer, gold) == 1.0;
}

// Every formatted choice is proposed for every item and only the trusted ones
// are kept.
inline std::vector<ExpertTrace> make_expert_traces(std::span<const SynthQAItem> items) {
  std::vector<ExpertTrace> traces;
  for (const auto& item : items) {
    for (Choice c : {Choice::AnswerA, Choice::AnswerB, Choice::Abstain}) {
      const ActionId a{c, true};
      std::string rendered = render_completion(a, item);
      if (!is_trusted_completion(rendered, item.gold)) continue;
      traces.push_back({item.feature, a, std::move(rendered), item.gold});
      break;
    }
  }
  return traces;
}

// Mean negative log-likelihood of the trace actions.
inline double sft_loss(const PolicyParams& params, std::span<const ExpertTrace> traces) {
  if (traces.empty()) throw UsageError("sft_loss: empty trace list");
  double loss = 0.0;
  for (const auto& t : traces) loss -= action_log_prob(params, t.feature, t.action);
  return loss / static_cast<double>(traces.size());
}

inline LogitTable sft_gradient(const PolicyParams& params, std::span<const ExpertTrace> traces) {
  LogitTable g = zero_table();
  for (const auto& t : traces) g += grad_log_prob(params, t.feature, t.action);
  return scaled(g, 1.0 / static_cast<double>(traces.size()));
}

inline constexpr double kDefaultSftLr = 0.5;
inline constexpr int kDefaultSftEpochs = 200;

// Full-batch gradient ascent on the mean log-likelihood.
inline PolicyParams sft_train(PolicyParams params, std::span<const ExpertTrace> traces,
                              double lr = kDefaultSftLr, int epochs = kDefaultSftEpochs) {
  if (traces.empty()) throw UsageError("sft_train: empty trace list");
  if (epochs < 0) throw UsageError("sft_train: negative epoch count");
  for (int e = 0; e < epochs; ++e) params.step(sft_gradient(params, traces), lr);
  return params;
}

}  // namespace abstain
