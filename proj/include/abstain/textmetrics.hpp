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

// Text normalization, ROUGE / exact match, a deterministic stand-in for a
// learned semantic similarity, and abstention confusion counts.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "abstain/common.hpp"

namespace abstain {

// Normalized word tokens: non-empty, lowercase, no whitespace.
using TokenSeq = std::vector<std::string>;

// Ground truth for one question: one or more accepted aliases, or the
// question is unanswerable.
class GoldAnswer {
 public:
  static GoldAnswer answerable(std::vector<std::string> aliases) {
    if (aliases.empty()) throw UsageError("GoldAnswer: empty alias list");
    for (const auto& a : aliases) {
      if (a.empty()) throw UsageError("GoldAnswer: empty alias");
    }
    return GoldAnswer(std::move(aliases));
  }
  static GoldAnswer no_answer() { return GoldAnswer({}); }

  bool is_no_answer() const { return aliases_.empty(); }
  const std::vector<std::string>& aliases() const { return aliases_; }

  friend bool operator==(const GoldAnswer&, const GoldAnswer&) = default;

 private:
  explicit GoldAnswer(std::vector<std::string> aliases)
      : aliases_(std::move(aliases)) {}
  std::vector<std::string> aliases_;
};

struct ScoreTriple {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static ScoreTriple from_counts(std::size_t overlap, std::size_t candidate_total,
                                 std::size_t reference_total) {
    ScoreTriple s;
    if (candidate_total == 0 || reference_total == 0) return s;
    s.precision = static_cast<double>(overlap) / static_cast<double>(candidate_total);
    s.recall = static_cast<double>(overlap) / static_cast<double>(reference_total);
    if (s.precision + s.recall > 0.0) {
      s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    return s;
  }
};

// tp: abstained on unanswerable. fp: abstained on answerable.
// fn_: answered an unanswerable question. Answered-answerable pairs are not
// counted anywhere.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn_ = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn_ += o.fn_;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// A model prediction; std::nullopt means the model abstained.
using Prediction = std::optional<std::string>;

// SQuAD-style: lowercase, strip ASCII punctuation, drop a/an/the, split on
// whitespace.
inline TokenSeq normalize_text(std::string_view raw) {
  std::string cleaned;
  cleaned.reserve(raw.size());
  for (const char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::ispunct(c)) continue;
    cleaned.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
  }
  TokenSeq out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && cur != "a" && cur != "an" && cur != "the") {
      out.push_back(cur);
    }
    cur.clear();
  };
  for (const char ch : cleaned) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return out;
}

inline std::string join_tokens(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

inline std::size_t lcs_length(std::span<const std::string> x,
                              std::span<const std::string> y) {
  if (x.empty() || y.empty()) return 0;
  std::vector<std::size_t> prev(y.size() + 1, 0), cur(y.size() + 1, 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

namespace detail {

inline const std::vector<std::string>& require_answerable(const GoldAnswer& gold,
                                                          const char* what) {
  if (gold.is_no_answer()) {
    throw UsageError(std::string(what) + ": reference is No-Answer");
  }
  return gold.aliases();
}

// Alias-wise maximum by F1; the first alias wins ties.
template <class ScoreFn>
ScoreTriple best_alias(const GoldAnswer& gold, const char* what, ScoreFn&& fn) {
  ScoreTriple best;
  bool first = true;
  for (const auto& alias : require_answerable(gold, what)) {
    const ScoreTriple s = fn(normalize_text(alias));
    if (first || s.f1 > best.f1) best = s;
    first = false;
  }
  return best;
}

inline std::map<TokenSeq, std::size_t> ngram_counts(const TokenSeq& tokens,
                                                    std::size_t n) {
  std::map<TokenSeq, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[TokenSeq(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

inline ScoreTriple rouge_l(std::string_view candidate, const GoldAnswer& references) {
  const TokenSeq cand = normalize_text(candidate);
  return detail::best_alias(references, "rouge_l", [&](const TokenSeq& ref) {
    return ScoreTriple::from_counts(lcs_length(cand, ref), cand.size(), ref.size());
  });
}

inline ScoreTriple rouge_n(std::string_view candidate, const GoldAnswer& references,
                           int n) {
  if (n != 1 && n != 2) throw UsageError("rouge_n: n must be 1 or 2");
  const auto order = static_cast<std::size_t>(n);
  const TokenSeq cand = normalize_text(candidate);
  const auto cand_counts = detail::ngram_counts(cand, order);
  std::size_t cand_total = 0;
  for (const auto& [gram, c] : cand_counts) cand_total += c;
  return detail::best_alias(references, "rouge_n", [&](const TokenSeq& ref) {
    const auto ref_counts = detail::ngram_counts(ref, order);
    std::size_t ref_total = 0, overlap = 0;
    for (const auto& [gram, c] : ref_counts) {
      ref_total += c;
      if (auto it = cand_counts.find(gram); it != cand_counts.end()) {
        overlap += std::min(c, it->second);
      }
    }
    return ScoreTriple::from_counts(overlap, cand_total, ref_total);
  });
}

inline double exact_match(std::string_view candidate, const GoldAnswer& references) {
  const TokenSeq cand = normalize_text(candidate);
  for (const auto& alias : detail::require_answerable(references, "exact_match")) {
    if (normalize_text(alias) == cand) return 1.0;
  }
  return 0.0;
}

// Character 3-gram counts of the normalized text, keyed by a 64-bit FNV-1a
// hash. Texts shorter than three characters contribute themselves as a
// single gram.
inline std::map<std::uint64_t, double> char_trigram_counts(std::string_view text) {
  const std::string norm = join_tokens(normalize_text(text));
  std::map<std::uint64_t, double> counts;
  if (norm.empty()) return counts;
  if (norm.size() < 3) {
    counts[detail::fnv1a(norm)] += 1.0;
    return counts;
  }
  for (std::size_t i = 0; i + 3 <= norm.size(); ++i) {
    counts[detail::fnv1a(std::string_view(norm).substr(i, 3))] += 1.0;
  }
  return counts;
}

// Cosine similarity of character 3-gram count vectors. Both empty -> 1,
// one empty -> 0.
inline double semantic_sim(std::string_view candidate, std::string_view reference) {
  const auto a = char_trigram_counts(candidate);
  const auto b = char_trigram_counts(reference);
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [k, v] : a) {
    na += v * v;
    if (auto it = b.find(k); it != b.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : b) nb += v * v;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

// Best semantic_sim over the aliases of an answerable gold.
inline double semantic_sim(std::string_view candidate, const GoldAnswer& references) {
  double best = 0.0;
  for (const auto& alias : detail::require_answerable(references, "semantic_sim")) {
    best = std::max(best, semantic_sim(candidate, alias));
  }
  return best;
}

inline ConfusionCounts abstention_confusion(
    std::span<const std::pair<Prediction, GoldAnswer>> pairs) {
  ConfusionCounts c;
  for (const auto& [pred, gold] : pairs) {
    const bool abstained = !pred.has_value();
    if (abstained && gold.is_no_answer()) ++c.tp;
    else if (abstained) ++c.fp;
    else if (gold.is_no_answer()) ++c.fn_;
  }
  return c;
}

}  // namespace abstain
