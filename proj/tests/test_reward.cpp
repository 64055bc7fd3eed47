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

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

#include "abstain/reward.hpp"

namespace abstain {
namespace {

const auto kAllVariants = {RewardVariant::RougePlusEM, RewardVariant::RougeOnly,
                           RewardVariant::RougePlusSem, RewardVariant::RougePlusSemPlusEM};

GoldAnswer gold(std::string s) { return GoldAnswer::answerable({std::move(s)}); }

TEST(ParseCompletion, Examples) {
  const auto a = parse_completion("<think>t</think><answer>Paris</answer>");
  EXPECT_TRUE(a.format_ok);
  EXPECT_EQ(a.think, "t");
  EXPECT_EQ(a.answer, "Paris");

  const auto b = parse_completion("Paris");
  EXPECT_FALSE(b.format_ok);
  EXPECT_FALSE(b.think.has_value());
  EXPECT_EQ(b.answer, "Paris");

  const auto c = parse_completion("<answer>x</answer><think>y</think>");
  EXPECT_FALSE(c.format_ok);
  EXPECT_EQ(c.answer, "<answer>x</answer><think>y</think>");
}

TEST(ParseCompletion, AllowsOnlyWhitespaceOutsideBlocks) {
  EXPECT_TRUE(parse_completion("  <think>a</think>\n <answer> b </answer>\t").format_ok);
  EXPECT_EQ(parse_completion("<think>a</think><answer> b </answer>").answer, "b");
  EXPECT_FALSE(parse_completion("x<think>a</think><answer>b</answer>").format_ok);
  EXPECT_FALSE(parse_completion("<think>a</think>x<answer>b</answer>").format_ok);
  EXPECT_FALSE(parse_completion("<think>a</think><answer>b</answer>.").format_ok);
}

TEST(ParseCompletion, RejectsRepeatedOrMissingTags) {
  EXPECT_FALSE(parse_completion("<think>a</think><answer>b</answer><answer>c</answer>").format_ok);
  EXPECT_FALSE(parse_completion("<think>a</think><think>b</think><answer>c</answer>").format_ok);
  EXPECT_FALSE(parse_completion("<answer>b</answer>").format_ok);
  EXPECT_FALSE(parse_completion("<think>a<answer>b</answer></think>").format_ok);
  EXPECT_FALSE(parse_completion("<THINK>a</THINK><answer>b</answer>").format_ok);
  EXPECT_FALSE(parse_completion("").format_ok);
}

TEST(ParseCompletion, RenderParseRoundTrip) {
  std::mt19937_64 rng(4);
  const std::string alphabet = "ab <>/.xyz\n";
  for (int trial = 0; trial < 300; ++trial) {
    std::string think, answer;
    for (auto n = rng() % 10; n > 0; --n) think += alphabet[rng() % 3];
    for (auto n = 1 + rng() % 10; n > 0; --n) answer += alphabet[rng() % 3];
    const auto pc = parse_completion(render_completion_text(think, answer));
    ASSERT_TRUE(pc.format_ok);
    ASSERT_EQ(*pc.think, think);
    ASSERT_EQ(pc.answer, detail::trim(answer));
    const auto again = parse_completion(render_completion_text(*pc.think, pc.answer));
    ASSERT_EQ(again.think, pc.think);
    ASSERT_EQ(again.answer, pc.answer);
  }
}

TEST(FormatReward, Examples) {
  EXPECT_EQ(format_reward(parse_completion("<think></think><answer>x</answer>")), 0.5);
  EXPECT_EQ(format_reward(parse_completion("x")), 0.0);
  EXPECT_EQ(format_reward(parse_completion("")), 0.0);
}

TEST(IsNoAnswer, Examples) {
  EXPECT_TRUE(is_no_answer("No Answer"));
  EXPECT_TRUE(is_no_answer("no  answer."));
  EXPECT_TRUE(is_no_answer("NO ANSWER"));
  EXPECT_FALSE(is_no_answer("No"));
  EXPECT_FALSE(is_no_answer("no answer here"));
}

TEST(AnswerReward, Examples) {
  for (auto v : kAllVariants) EXPECT_EQ(answer_reward("No Answer", GoldAnswer::no_answer(), v), 1.0);
  EXPECT_EQ(answer_reward("x", GoldAnswer::no_answer()), 0.0);
  EXPECT_DOUBLE_EQ(answer_reward("paris", gold("paris"), RewardVariant::RougePlusEM), 2.0);
}

TEST(AnswerReward, VariantsComposeComponents) {
  const auto g = gold("tranmere rovers");
  const std::string p = "tranmere";
  const double rl = rouge_l(p, g).f1, sem = semantic_sim(p, g);
  EXPECT_DOUBLE_EQ(answer_reward(p, g, RewardVariant::RougeOnly), rl);
  EXPECT_DOUBLE_EQ(answer_reward(p, g, RewardVariant::RougePlusEM), rl);
  EXPECT_DOUBLE_EQ(answer_reward(p, g, RewardVariant::RougePlusSem), rl + sem);
  EXPECT_DOUBLE_EQ(answer_reward(p, g, RewardVariant::RougePlusSemPlusEM), rl + sem);
  EXPECT_DOUBLE_EQ(answer_reward("tranmere rovers", g, RewardVariant::RougePlusSemPlusEM), 3.0);
}

TEST(TotalReward, Examples) {
  const auto a = total_reward("<think>t</think><answer>No Answer</answer>", GoldAnswer::no_answer());
  EXPECT_EQ(a.format, 0.5);
  EXPECT_EQ(a.answer, 1.0);
  EXPECT_EQ(a.total, 1.5);

  const auto b = total_reward("garbage", gold("x"));
  EXPECT_EQ(b.format, 0.0);
  EXPECT_DOUBLE_EQ(b.answer, rouge_l("garbage", gold("x")).f1 + exact_match("garbage", gold("x")));
  EXPECT_EQ(b.total, b.format + b.answer);

  const auto c = total_reward("<think></think><answer></answer>", gold("x"));
  EXPECT_EQ(c.format, 0.5);
  EXPECT_EQ(c.answer, 0.0);
  EXPECT_EQ(c.total, 0.5);
}

TEST(TotalReward, ScoresAnswerSegmentOnly) {
  const auto r = total_reward("<think>paris</think><answer>london</answer>", gold("paris"));
  EXPECT_EQ(r.answer, 0.0);
}

// Random completions drawn from a small grammar of well-formed, malformed and
// abstaining outputs.
std::string random_completion(std::mt19937_64& rng) {
  static const std::vector<std::string> answers = {"paris",  "london",    "No Answer", "no answer.",
                                                   "",       "paris city", "the paris", "NO ANSWER"};
  const auto& ans = answers[rng() % answers.size()];
  switch (rng() % 4) {
    case 0: return "<think>hm</think><answer>" + ans + "</answer>";
    case 1: return ans;
    case 2: return "<answer>" + ans + "</answer>";
    default: return " <think></think>\n<answer>" + ans + "</answer> ";
  }
}

TEST(TotalReward, BoundsAndAsymmetryProperties) {
  std::mt19937_64 rng(8);
  const std::vector<GoldAnswer> golds = {gold("paris"), gold("london"), GoldAnswer::no_answer()};
  for (int trial = 0; trial < 2000; ++trial) {
    const auto raw = random_completion(rng);
    const auto& g = golds[rng() % golds.size()];
    const auto em = total_reward(raw, g, RewardVariant::RougePlusEM);
    ASSERT_GE(em.total, 0.0);
    ASSERT_LE(em.total, 2.5);
    ASSERT_TRUE(em.format == 0.0 || em.format == 0.5);
    ASSERT_DOUBLE_EQ(em.total, em.format + em.answer);
    const auto all = total_reward(raw, g, RewardVariant::RougePlusSemPlusEM);
    ASSERT_LE(all.total, 3.5);
    ASSERT_LE(all.answer, 3.0);

    const auto pc = parse_completion(raw);
    if (g.is_no_answer() && !is_no_answer(pc.answer)) {
      ASSERT_EQ(em.answer, 0.0) << raw;
      ASSERT_LE(em.total, 0.5);
    }
    if (!g.is_no_answer() && is_no_answer(pc.answer)) {
      ASSERT_EQ(em.answer, 0.0) << raw;
    }
  }
}

TEST(TotalReward, AbstainingIsOptimalOnUnanswerable) {
  const double best = total_reward("<think></think><answer>No Answer</answer>",
                                   GoldAnswer::no_answer()).total;
  EXPECT_EQ(best, 1.5);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const auto raw = random_completion(rng);
    ASSERT_LE(total_reward(raw, GoldAnswer::no_answer()).total, best);
  }
}

TEST(RewardVariant, NamesRoundTrip) {
  for (auto v : kAllVariants) EXPECT_EQ(reward_variant_from_string(to_string(v)), v);
  EXPECT_THROW(reward_variant_from_string("bleu"), UsageError);
}

}  // namespace
}  // namespace abstain
