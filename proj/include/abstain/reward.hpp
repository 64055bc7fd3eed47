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

// Rule-based reward for <think>/<answer> completions: a format reward plus a
// piecewise answer reward that pays for correct abstention and penalizes both
// hallucinated answers and over-abstention.

#pragma once

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "abstain/textmetrics.hpp"

namespace abstain {

inline constexpr double kFormatReward = 0.5;
inline constexpr double kAbstainReward = 1.0;
inline constexpr std::string_view kNoAnswer = "No Answer";

struct ParsedCompletion {
  std::string raw;
  std::optional<std::string> think;
  std::string answer;
  bool format_ok = false;
};

enum class RewardVariant { RougePlusEM, RougeOnly, RougePlusSem, RougePlusSemPlusEM };

inline std::string_view to_string(RewardVariant v) {
  switch (v) {
    case RewardVariant::RougePlusEM: return "rouge+em";
    case RewardVariant::RougeOnly: return "rouge";
    case RewardVariant::RougePlusSem: return "rouge+sem";
    case RewardVariant::RougePlusSemPlusEM: return "rouge+sem+em";
  }
  return "?";
}

inline RewardVariant reward_variant_from_string(std::string_view s) {
  for (auto v : {RewardVariant::RougePlusEM, RewardVariant::RougeOnly,
                 RewardVariant::RougePlusSem, RewardVariant::RougePlusSemPlusEM}) {
    if (to_string(v) == s) return v;
  }
  throw UsageError("unknown reward variant: " + std::string(s));
}

struct RewardBreakdown {
  double format = 0.0;
  double answer = 0.0;
  double total = 0.0;
};

namespace detail {

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace detail

// Accepts exactly `<think>T</think><answer>A</answer>` with only whitespace
// outside and between the two blocks. Tags are case-sensitive.
inline ParsedCompletion parse_completion(std::string_view raw) {
  ParsedCompletion pc;
  pc.raw = std::string(raw);
  pc.answer = detail::trim(raw);

  static constexpr std::string_view kOpenThink = "<think>", kCloseThink = "</think>",
                                    kOpenAnswer = "<answer>", kCloseAnswer = "</answer>";
  for (auto tag : {kOpenThink, kCloseThink, kOpenAnswer, kCloseAnswer}) {
    if (detail::count_occurrences(raw, tag) != 1) return pc;
  }
  const auto ot = raw.find(kOpenThink), ct = raw.find(kCloseThink);
  const auto oa = raw.find(kOpenAnswer), ca = raw.find(kCloseAnswer);
  if (!(ot < ct && ct < oa && oa < ca)) return pc;
  if (!detail::is_blank(raw.substr(0, ot))) return pc;
  const auto think_end = ct + kCloseThink.size();
  if (!detail::is_blank(raw.substr(think_end, oa - think_end))) return pc;
  if (!detail::is_blank(raw.substr(ca + kCloseAnswer.size()))) return pc;

  const auto think_begin = ot + kOpenThink.size();
  const auto answer_begin = oa + kOpenAnswer.size();
  pc.think = std::string(raw.substr(think_begin, ct - think_begin));
  pc.answer = detail::trim(raw.substr(answer_begin, ca - answer_begin));
  pc.format_ok = true;
  return pc;
}

inline std::string render_completion_text(std::string_view think, std::string_view answer) {
  std::string out;
  out.reserve(think.size() + answer.size() + 36);
  out += "<think>";
  out += think;
  out += "</think><answer>";
  out += answer;
  out += "</answer>";
  return out;
}

inline double format_reward(const ParsedCompletion& pc) {
  return pc.format_ok ? kFormatReward : 0.0;
}

inline bool is_no_answer(std::string_view answer) {
  const TokenSeq t = normalize_text(answer);
  return t.size() == 2 && t[0] == "no" && t[1] == "answer";
}

inline Prediction prediction_from_answer(std::string_view answer) {
  if (is_no_answer(answer)) return std::nullopt;
  return std::string(answer);
}

// Score for a non-abstaining prediction against an answerable gold.
inline double answer_match_score(std::string_view pred, const GoldAnswer& gold,
                                 RewardVariant variant) {
  double score = rouge_l(pred, gold).f1;
  switch (variant) {
    case RewardVariant::RougePlusEM:
      score += exact_match(pred, gold);
      break;
    case RewardVariant::RougeOnly:
      break;
    case RewardVariant::RougePlusSem:
      score += semantic_sim(pred, gold);
      break;
    case RewardVariant::RougePlusSemPlusEM:
      score += semantic_sim(pred, gold) + exact_match(pred, gold);
      break;
  }
  return score;
}

inline double answer_reward(std::string_view pred, const GoldAnswer& gold,
                            RewardVariant variant = RewardVariant::RougePlusEM) {
  const bool pred_abstains = is_no_answer(pred);
  if (pred_abstains && gold.is_no_answer()) return kAbstainReward;
  if (!pred_abstains && !gold.is_no_answer()) {
    return answer_match_score(pred, gold, variant);
  }
  return 0.0;
}

inline RewardBreakdown total_reward(std::string_view raw, const GoldAnswer& gold,
                                    RewardVariant variant = RewardVariant::RougePlusEM) {
  const ParsedCompletion pc = parse_completion(raw);
  RewardBreakdown r;
  r.format = format_reward(pc);
  r.answer = answer_reward(pc.answer, gold, variant);
  r.total = r.format + r.answer;
  return r;
}

}  // namespace abstain
