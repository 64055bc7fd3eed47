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

// Implicit evidence extraction: temporal sub-context filtering, a temporal KG
// quadruple store, and semantic / lexical top-k fact retrieval.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "abstain/common.hpp"
#include "abstain/item.hpp"
#include "abstain/textmetrics.hpp"

namespace abstain {

inline constexpr int kFloorYear = 0;
inline constexpr int kHorizonYear = 9999;
inline constexpr std::size_t kDefaultTopK = 10;
inline constexpr std::size_t kDefaultMaxKeywords = 5;

// Recognized forms, scanned left to right:
//   "from YYYY to|until YYYY", "YYYY-YYYY" (hyphen, en or em dash)
//   "since|after [Month] YYYY"  -> [YYYY+1, horizon]
//   "before|until [Month] YYYY" -> [floor, YYYY-1]
//   "YYY0s"                     -> the decade
//   bare "YYYY"                 -> that year
inline std::vector<TimeInterval> parse_time_expressions(std::string_view sentence) {
  static const std::regex kPattern(
      R"(\bfrom\s+(\d{4})\s+(?:to|until)\s+(\d{4})\b)"
      R"(|\b(\d{4})\s*(?:-|–|—)\s*(\d{4})\b)"
      R"(|\b(?:since|after)\s+(?:[a-z]+\.?\s+)?(\d{4})\b)"
      R"(|\b(?:before|until)\s+(?:[a-z]+\.?\s+)?(\d{4})\b)"
      R"(|\b(\d{3}0)s\b)"
      R"(|\b(\d{4})\b)",
      std::regex::ECMAScript | std::regex::icase | std::regex::optimize);

  std::vector<TimeInterval> out;
  const std::string text(sentence);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kPattern);
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    auto year = [&](int g) { return std::stoi(m[g].str()); };
    auto range = [&](int a, int b) {
      const int x = year(a), y = year(b);
      out.emplace_back(std::min(x, y), std::max(x, y));
    };
    if (m[1].matched) range(1, 2);
    else if (m[3].matched) range(3, 4);
    else if (m[5].matched) out.emplace_back(year(5) + 1, std::max(year(5) + 1, kHorizonYear));
    else if (m[6].matched) out.emplace_back(std::min(kFloorYear, year(6) - 1), year(6) - 1);
    else if (m[7].matched) out.emplace_back(year(7), year(7) + 9);
    else if (m[8].matched) out.emplace_back(year(8), year(8));
  }
  return out;
}

// Splits after '.' or ';' when followed by whitespace or the end of text.
// Sentences keep their terminator and are trimmed of surrounding whitespace.
inline std::vector<std::string> split_sentences(std::string_view context) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < context.size(); ++i) {
    const char c = context[i];
    const bool boundary =
        (c == '.' || c == ';') &&
        (i + 1 == context.size() || std::isspace(static_cast<unsigned char>(context[i + 1])));
    if (!boundary) continue;
    std::string s = detail::trim(context.substr(begin, i + 1 - begin));
    if (!s.empty()) out.push_back(std::move(s));
    begin = i + 1;
  }
  std::string tail = detail::trim(context.substr(begin));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

inline std::vector<std::string> extract_time_sentences(const TimeInterval& question_interval,
                                                       std::string_view context) {
  std::vector<std::string> kept;
  for (auto& s : split_sentences(context)) {
    const auto intervals = parse_time_expressions(s);
    if (std::any_of(intervals.begin(), intervals.end(),
                    [&](const TimeInterval& t) { return t.intersects(question_interval); })) {
      kept.push_back(std::move(s));
    }
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Temporal knowledge graph.

struct Quadruple {
  std::string head;
  std::string relation;
  std::string tail;
  std::optional<std::string> timestamp;

  void validate() const {
    if (head.empty() || relation.empty() || tail.empty()) {
      throw DataError("Quadruple: head, relation and tail must be non-empty");
    }
  }
  friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

inline std::string kg_sentence(const Quadruple& q) {
  std::string s = q.head + " " + q.relation + " " + q.tail;
  if (q.timestamp) s += " " + *q.timestamp;
  return s;
}

class KGStore {
 public:
  KGStore() = default;
  explicit KGStore(std::vector<Quadruple> quads) {
    for (auto& q : quads) add(std::move(q));
  }

  void add(Quadruple q) {
    q.validate();
    sentences_.push_back(kg_sentence(q));
    quads_.push_back(std::move(q));
  }

  const std::vector<Quadruple>& quads() const { return quads_; }
  const std::vector<std::string>& sentences() const { return sentences_; }
  std::size_t size() const { return quads_.size(); }
  bool empty() const { return quads_.empty(); }

 private:
  std::vector<Quadruple> quads_;
  std::vector<std::string> sentences_;
};

inline nlohmann::json to_json(const Quadruple& q) {
  return {{"head", q.head},
          {"relation", q.relation},
          {"tail", q.tail},
          {"timestamp", q.timestamp ? nlohmann::json(*q.timestamp) : nlohmann::json(nullptr)}};
}

inline Quadruple quadruple_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("quadruple must be a JSON object");
  Quadruple q;
  for (const char* key : {"head", "relation", "tail"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw DataError(std::string("quadruple: missing string field '") + key + "'");
    }
  }
  q.head = j["head"].get<std::string>();
  q.relation = j["relation"].get<std::string>();
  q.tail = j["tail"].get<std::string>();
  if (j.contains("timestamp") && !j["timestamp"].is_null()) {
    if (!j["timestamp"].is_string()) throw DataError("quadruple: timestamp must be string or null");
    q.timestamp = j["timestamp"].get<std::string>();
  }
  q.validate();
  return q;
}

inline KGStore read_kg_store(std::istream& in) {
  KGStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    try {
      store.add(quadruple_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("line " + std::to_string(lineno) + ": malformed JSON (" + e.what() + ")");
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return store;
}

inline void write_kg_store(std::ostream& out, const KGStore& store) {
  for (const auto& q : store.quads()) out << to_json(q).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Embeddings.

template <class E>
concept EmbeddingContract = requires(const E& e, std::string_view text) {
  { e.embed(text) } -> std::convertible_to<std::vector<double>>;
  { e.dimension() } -> std::convertible_to<std::size_t>;
};

// Character 3-gram counts (see char_trigram_counts) folded into a fixed
// number of buckets. Text that normalizes to nothing embeds to zero.
class HashedTrigramEmbedder {
 public:
  explicit HashedTrigramEmbedder(std::size_t dimension = 512) : dim_(dimension) {
    if (dim_ == 0) throw UsageError("embedding dimension must be positive");
  }
  std::size_t dimension() const { return dim_; }
  std::vector<double> embed(std::string_view text) const {
    std::vector<double> v(dim_, 0.0);
    for (const auto& [key, count] : char_trigram_counts(text)) v[key % dim_] += count;
    return v;
  }

 private:
  std::size_t dim_;
};

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw UsageError("cosine_similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

template <class Score>
struct ScoredQuad {
  Quadruple quad;
  Score score;
  std::size_t index;  // position in the store
};

namespace detail {

// Descending by score, ascending store index on ties; first k.
template <class Score>
std::vector<ScoredQuad<Score>> rank(const KGStore& store, std::vector<Score> scores,
                                    std::size_t k) {
  std::vector<std::size_t> idx(store.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  idx.resize(std::min(k, idx.size()));
  std::vector<ScoredQuad<Score>> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back({store.quads()[i], scores[i], i});
  return out;
}

inline void check_query(const KGStore& store, std::size_t k) {
  if (store.empty()) throw UsageError("top-k retrieval over an empty store");
  if (k < 1) throw UsageError("top-k retrieval needs k >= 1");
}

inline constexpr std::array<std::string_view, 120> kStopwords = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
    "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
    "between", "both", "but", "by", "can", "could", "did", "do", "does", "doing",
    "down", "during", "each", "few", "for", "from", "had", "has", "have", "having",
    "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if",
    "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my",
    "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "out", "over", "own", "same", "she", "should", "so",
    "some", "such", "than", "that", "the", "their", "theirs", "them", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
    "very", "was", "we", "were", "what", "when", "where", "which", "while", "who",
    "whom", "why", "will", "with", "would", "you", "your"
};

}  // namespace detail

inline bool is_stopword(std::string_view token) {
  return std::find(detail::kStopwords.begin(), detail::kStopwords.end(), token) !=
         detail::kStopwords.end();
}

template <EmbeddingContract Embedder = HashedTrigramEmbedder>
std::vector<ScoredQuad<double>> topk_semantic(const KGStore& store, std::string_view query,
                                              std::size_t k = kDefaultTopK,
                                              const Embedder& embedder = Embedder{}) {
  detail::check_query(store, k);
  const auto q = embedder.embed(query);
  std::vector<double> scores;
  scores.reserve(store.size());
  for (const auto& s : store.sentences()) scores.push_back(cosine_similarity(q, embedder.embed(s)));
  return detail::rank(store, std::move(scores), k);
}

// Stopword-filtered normalized tokens ranked by frequency, then length
// (longer first), then lexicographically.
inline std::vector<std::string> extract_keywords(std::string_view question,
                                                 std::size_t max_k = kDefaultMaxKeywords) {
  if (max_k < 1) throw UsageError("extract_keywords: max_k must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (auto& t : normalize_text(question)) {
    if (!is_stopword(t)) ++freq[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
    return a.first < b.first;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < max_k; ++i) out.push_back(ranked[i].first);
  return out;
}

// Number of question keywords found among the normalized tokens of the
// quadruple's four fields.
inline std::size_t keyword_overlap(const Quadruple& q, const std::vector<std::string>& keywords) {
  std::set<std::string> tokens;
  for (const std::string* field : {&q.head, &q.relation, &q.tail}) {
    for (auto& t : normalize_text(*field)) tokens.insert(std::move(t));
  }
  if (q.timestamp) {
    for (auto& t : normalize_text(*q.timestamp)) tokens.insert(std::move(t));
  }
  std::size_t n = 0;
  for (const auto& kw : keywords) n += tokens.count(kw);
  return n;
}

inline std::vector<ScoredQuad<std::size_t>> topk_lexical(
    const KGStore& store, std::string_view question, std::size_t k = kDefaultTopK,
    std::size_t max_keywords = kDefaultMaxKeywords) {
  detail::check_query(store, k);
  const auto keywords = extract_keywords(question, max_keywords);
  std::vector<std::size_t> scores;
  scores.reserve(store.size());
  for (const auto& q : store.quads()) scores.push_back(keyword_overlap(q, keywords));
  return detail::rank(store, std::move(scores), k);
}

// Pattern-based quadruple extraction for sentences shaped like
// "<head> <relation phrase> <tail> from YYYY to YYYY." where the relation
// phrase is one of `relation_phrases`.
inline std::vector<Quadruple> rule_based_quadruples(
    std::string_view context,
    std::span<const std::string> relation_phrases = {}) {
  static const std::vector<std::string> kDefaultPhrases = {
      "played for", "worked for", "held the position of", "was married to", "lived in"};
  const auto& phrases = relation_phrases.empty()
                            ? std::span<const std::string>(kDefaultPhrases)
                            : relation_phrases;
  static const std::regex kScope(R"(^(.*?)\s+from\s+(\d{4})\s+to\s+(\d{4})[.;]?$)");
  std::vector<Quadruple> out;
  for (const auto& sentence : split_sentences(context)) {
    std::smatch m;
    if (!std::regex_match(sentence, m, kScope)) continue;
    const std::string body = m[1].str();
    for (const auto& phrase : phrases) {
      const auto pos = body.find(" " + phrase + " ");
      if (pos == std::string::npos) continue;
      Quadruple q{body.substr(0, pos), phrase, body.substr(pos + phrase.size() + 2),
                  m[2].str() + "–" + m[3].str()};
      if (q.head.empty() || q.tail.empty()) continue;
      out.push_back(std::move(q));
      break;
    }
  }
  return out;
}

inline std::string rephrase_quadruple(const Quadruple& q) {
  std::string s = q.head + "'s " + q.relation + " was " + q.tail;
  if (q.timestamp) s += " during " + *q.timestamp;
  return s + ".";
}

inline std::string rephrase_quadruples(std::span<const Quadruple> quads) {
  std::string out;
  for (std::size_t i = 0; i < quads.size(); ++i) {
    if (i) out += '\n';
    out += rephrase_quadruple(quads[i]);
  }
  return out;
}

}  // namespace abstain
