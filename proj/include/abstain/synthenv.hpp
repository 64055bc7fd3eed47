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

// Synthetic temporal QA generation with a controlled share of unanswerable
// questions, the answerability rule behind it, TimeQA-style ingestion, and the
// abstained multiple-choice builder.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "abstain/common.hpp"
#include "abstain/item.hpp"
#include "abstain/textmetrics.hpp"

namespace abstain {

inline constexpr double kDefaultUnanswerableRatio = 0.124;
inline constexpr std::string_view kDistractorCandidate = "unknown";

struct GenConfig {
  std::size_t n_items = 1000;
  double p_unans = kDefaultUnanswerableRatio;
  double difficulty_mix = 0.5;  // fraction of Hard items
  double ambiguity = 0.3;       // probability that the observed evidence is corrupted
  std::uint64_t seed = 0;

  void validate() const {
    auto frac = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string(name) + " must be in [0,1]");
    };
    frac(p_unans, "p_unans");
    frac(difficulty_mix, "difficulty_mix");
    frac(ambiguity, "ambiguity");
  }

  std::size_t unanswerable_count() const {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n_items) * p_unans));
  }
};

// Exactly one distinct object inside the window answers the question; none or
// several conflicting ones make it unanswerable.
inline GoldAnswer answerability_oracle(std::span<const TemporalFact> facts,
                                       const TimeSpecifier& spec) {
  const TimeInterval w = spec.window();
  std::set<std::string> objects;
  for (const auto& f : facts) {
    if (f.scope.intersects(w)) objects.insert(f.object);
  }
  if (objects.size() == 1) return GoldAnswer::answerable({*objects.begin()});
  return GoldAnswer::no_answer();
}

// Evidence the facts really provide, before observation noise.
inline Evidence true_evidence(std::span<const TemporalFact> facts, const TimeSpecifier& spec) {
  const TimeInterval w = spec.window();
  std::set<std::string> objects;
  for (const auto& f : facts) {
    if (f.scope.intersects(w)) objects.insert(f.object);
  }
  if (objects.empty()) return Evidence::NoEvidence;
  return objects.size() == 1 ? Evidence::Supports : Evidence::Contradicts;
}

// Noise hides evidence but never fabricates support: Supports turns into
// NoEvidence or Contradicts, and the two unsupported states swap.
inline Evidence corrupt_evidence(Evidence e, Rng& rng) {
  switch (e) {
    case Evidence::Supports:
      return bernoulli(rng, 0.5) ? Evidence::NoEvidence : Evidence::Contradicts;
    case Evidence::NoEvidence: return Evidence::Contradicts;
    case Evidence::Contradicts: return Evidence::NoEvidence;
  }
  return e;
}

namespace detail {

struct RelationTemplate {
  const char* relation;
  const char* verb;      // context sentence: "<subject> <verb> <object> from A to B."
  const char* question;  // "{s}" subject, "{p}" time phrase
};

inline constexpr std::array<RelationTemplate, 5> kRelations = {{
    {"member of sports team", "played for", "Which team did {s} play for {p}?"},
    {"employer", "worked for", "Which employer did {s} work for {p}?"},
    {"position held", "held the position of", "What position did {s} hold {p}?"},
    {"spouse", "was married to", "Who was the spouse of {s} {p}?"},
    {"residence", "lived in", "Where did {s} live {p}?"},
}};

inline constexpr std::array<const char*, 24> kFirstNames = {
    "Anna", "George", "Josep", "Maria", "Pierre", "Elena", "Tomas", "Ingrid",
    "Rafael", "Yuki", "Amara", "Lukas", "Sofia", "Dmitri", "Nadia", "Oskar",
    "Leila", "Hugo", "Freya", "Mateo", "Keiko", "Viktor", "Ines", "Callum"};

inline constexpr std::array<const char*, 24> kLastNames = {
    "Karina", "Moorhouse", "Rull", "Lindqvist", "Fabre", "Marchetti", "Novak", "Haugen",
    "Okafor", "Tanaka", "Duarte", "Brennan", "Volkov", "Castillo", "Weber", "Nakamura",
    "Adeyemi", "Rossi", "Kowalski", "Larsen", "Moreau", "Petrov", "Silva", "Fischer"};

// Single-token objects so that distinct objects never share a word.
inline constexpr std::array<const char*, 40> kObjects = {
    "Aldermoor", "Brackenfield", "Corrowdale", "Dunmarsh", "Elderbrook", "Fenwither",
    "Glenhollow", "Harrowgate", "Ironvale", "Jasperton", "Kestrelmoor", "Larkspire",
    "Millbarrow", "Northwick", "Oakhurst", "Pennrock", "Quarrydown", "Ravensholt",
    "Saltmere", "Thornbury", "Umberlee", "Valecrest", "Westerholm", "Yarrowfield",
    "Ashcombe", "Birchmont", "Coldharbour", "Dovecliff", "Emberley", "Foxbridge",
    "Greymouth", "Hollinsby", "Ivybank", "Juniperfell", "Kingsreach", "Lowmoor",
    "Marshfield", "Nettlecombe", "Otterburn", "Pinefold"};

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

inline TimeSpecifier random_specifier(bool hard, Rng& rng) {
  const int year = uniform_int(rng, 1900, 2010);
  if (!hard) {
    if (bernoulli(rng, 0.5)) return TimeSpecifier::in_year(year);
    return TimeSpecifier::between(year, year + uniform_int(rng, 1, 4));
  }
  switch (uniform_index(rng, 3)) {
    case 0: return TimeSpecifier::after(year);
    case 1: return TimeSpecifier::before(year);
    default: return TimeSpecifier::early_decade(year - year % 10);
  }
}

// A scope that intersects the window.
inline TimeInterval scope_inside(const TimeInterval& w, Rng& rng) {
  int anchor;
  if (w.start > kEarliestYear && w.end < kLatestYear) {
    anchor = uniform_int(rng, w.start, w.end);
  } else if (w.start > kEarliestYear) {
    anchor = w.start + uniform_int(rng, 0, 3);
  } else {
    anchor = w.end - uniform_int(rng, 0, 3);
  }
  return {anchor - uniform_int(rng, 0, 3), anchor + uniform_int(rng, 0, 3)};
}

// A scope disjoint from the window, on a random open side.
inline TimeInterval scope_outside(const TimeInterval& w, Rng& rng) {
  const bool can_before = w.start > kEarliestYear;
  const bool can_after = w.end < kLatestYear;
  const bool before = can_before && (!can_after || bernoulli(rng, 0.5));
  const int gap = uniform_int(rng, 0, 3);
  const int len = uniform_int(rng, 0, 4);
  if (before) {
    const int end = w.start - 1 - gap;
    return {end - len, end};
  }
  const int start = w.end + 1 + gap;
  return {start, start + len};
}

inline std::string fill(std::string tmpl, const std::string& s, const std::string& p) {
  if (auto pos = tmpl.find("{s}"); pos != std::string::npos) tmpl.replace(pos, 3, s);
  if (auto pos = tmpl.find("{p}"); pos != std::string::npos) tmpl.replace(pos, 3, p);
  return tmpl;
}

}  // namespace detail

inline std::string fact_sentence(const TemporalFact& f, std::string_view verb) {
  return f.subject + " " + std::string(verb) + " " + f.object + " from " +
         std::to_string(f.scope.start) + " to " + std::to_string(f.scope.end) + ".";
}

inline std::vector<SynthQAItem> generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t n_unans = cfg.unanswerable_count();
  std::vector<char> unanswerable(cfg.n_items, 0);
  std::fill_n(unanswerable.begin(), n_unans, 1);
  shuffle(unanswerable, rng);

  std::vector<SynthQAItem> items;
  items.reserve(cfg.n_items);
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    const bool hard = bernoulli(rng, cfg.difficulty_mix);
    const TimeSpecifier spec = detail::random_specifier(hard, rng);
    const auto& rel = detail::kRelations[uniform_index(rng, detail::kRelations.size())];
    const std::string subject =
        std::string(detail::kFirstNames[uniform_index(rng, detail::kFirstNames.size())]) + " " +
        detail::kLastNames[uniform_index(rng, detail::kLastNames.size())];
    const auto o1 = uniform_index(rng, detail::kObjects.size());
    auto o2 = uniform_index(rng, detail::kObjects.size() - 1);
    if (o2 >= o1) ++o2;
    const std::string first = detail::kObjects[o1];
    const std::string second = detail::kObjects[o2];

    const TimeInterval w = spec.window();
    std::vector<TemporalFact> facts;
    if (!unanswerable[i]) {
      facts.push_back({subject, rel.relation, first, detail::scope_inside(w, rng)});
      facts.push_back({subject, rel.relation, second, detail::scope_outside(w, rng)});
    } else if (bernoulli(rng, 0.5)) {
      facts.push_back({subject, rel.relation, first, detail::scope_outside(w, rng)});
      facts.push_back({subject, rel.relation, second, detail::scope_outside(w, rng)});
    } else {
      facts.push_back({subject, rel.relation, first, detail::scope_inside(w, rng)});
      facts.push_back({subject, rel.relation, second, detail::scope_inside(w, rng)});
    }
    std::sort(facts.begin(), facts.end(), [](const TemporalFact& a, const TemporalFact& b) {
      return std::tie(a.scope.start, a.scope.end, a.object) <
             std::tie(b.scope.start, b.scope.end, b.object);
    });

    SynthQAItem item;
    item.id = "synth-" + std::to_string(cfg.seed) + "-" + std::to_string(i);
    item.question = detail::fill(rel.question, subject, spec.phrase());
    for (const auto& f : facts) {
      if (!item.context.empty()) item.context += ' ';
      item.context += fact_sentence(f, rel.verb);
    }
    item.gold = answerability_oracle(facts, spec);
    if (item.gold.is_no_answer() != static_cast<bool>(unanswerable[i])) {
      throw std::logic_error("generate_dataset: constructed facts disagree with the oracle");
    }
    // Easy questions list the answer first; hard ones give no positional cue.
    const bool swap = item.gold.is_no_answer() || hard ? bernoulli(rng, 0.5) : false;
    item.candidate_a = swap ? second : first;
    item.candidate_b = swap ? first : second;

    Evidence ev = true_evidence(facts, spec);
    if (bernoulli(rng, cfg.ambiguity)) ev = corrupt_evidence(ev, rng);
    item.feature = {ev, spec.is_hard() ? Difficulty::Hard : Difficulty::Easy};
    item.facts = std::move(facts);
    item.specifier = spec;
    items.push_back(std::move(item));
  }
  return items;
}

// TimeQA-style JSON-Lines: {question, context, targets[, idx]}; an empty
// target list means unanswerable. Blank lines are skipped.
inline std::vector<SynthQAItem> ingest_timeqa(std::istream& in) {
  std::vector<SynthQAItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    const auto where = "line " + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(where + "expected a JSON object");
    for (const char* key : {"question", "context", "targets"}) {
      if (!j.contains(key)) throw DataError(where + "missing field '" + key + "'");
    }
    if (!j["question"].is_string() || !j["context"].is_string()) {
      throw DataError(where + "question and context must be strings");
    }
    if (!j["targets"].is_array()) throw DataError(where + "targets must be a list");

    std::vector<std::string> targets;
    for (const auto& t : j["targets"]) {
      if (!t.is_string()) throw DataError(where + "targets must contain strings");
      if (!t.get<std::string>().empty()) targets.push_back(t.get<std::string>());
    }

    SynthQAItem item;
    if (j.contains("idx") && j["idx"].is_string()) {
      item.id = j["idx"].get<std::string>();
    } else if (j.contains("idx") && j["idx"].is_number_integer()) {
      item.id = std::to_string(j["idx"].get<long long>());
    } else {
      item.id = "timeqa-" + std::to_string(lineno);
    }
    item.question = j["question"].get<std::string>();
    item.context = j["context"].get<std::string>();
    item.gold = targets.empty() ? GoldAnswer::no_answer() : GoldAnswer::answerable(targets);
    item.candidate_a = targets.empty() ? std::string(kDistractorCandidate) : targets.front();
    item.candidate_b = std::string(kDistractorCandidate);
    item.feature = {Evidence::NoEvidence, Difficulty::Easy};
    items.push_back(std::move(item));
  }
  return items;
}

inline std::vector<SynthQAItem> ingest_timeqa_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return ingest_timeqa(in);
}

// ---------------------------------------------------------------------------
// Abstained multiple choice.

struct McSourceRecord {
  std::string question;
  std::vector<std::string> options;  // four options, labeled A..D in order
  std::string answer_key;            // "A".."D"
};

struct LabeledOption {
  std::string label;
  std::string text;
  friend bool operator==(const LabeledOption&, const LabeledOption&) = default;
};

inline constexpr std::string_view kUnanswerableKey = "D";

struct MCItem {
  std::string question;
  std::vector<LabeledOption> options;
  std::string answer_key;
  bool unanswerable = false;
};

inline constexpr double kDefaultAbstainRatio = 0.12;

namespace detail {

inline std::size_t key_index(const std::string& key) {
  if (key.size() == 1 && key[0] >= 'A' && key[0] <= 'D') return static_cast<std::size_t>(key[0] - 'A');
  return 4;
}

inline void validate_mc(const McSourceRecord& r, std::size_t i) {
  const auto where = "record " + std::to_string(i) + ": ";
  if (r.options.size() != 4) throw DataError(where + "expected exactly 4 options");
  if (key_index(r.answer_key) >= 4) throw DataError(where + "answer key not among options");
  const std::set<std::string> distinct(r.options.begin(), r.options.end());
  if (distinct.size() != 4) throw DataError(where + "duplicate option text");
}

}  // namespace detail

// floor(ratio * N) records lose their correct option and are relabeled with
// the placeholder key D; the rest lose one random incorrect option. Survivors
// keep their order and are relabeled A, B, C.
inline std::vector<MCItem> build_abstained_mc(std::span<const McSourceRecord> records,
                                              double ratio = kDefaultAbstainRatio,
                                              std::uint64_t seed = 0) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw UsageError("ratio must be in [0,1]");
  for (std::size_t i = 0; i < records.size(); ++i) detail::validate_mc(records[i], i);

  Rng rng(seed);
  const auto n = records.size();
  const auto n_selected =
      std::min(n, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle(order, rng);
  std::vector<char> selected(n, 0);
  for (std::size_t i = 0; i < n_selected; ++i) selected[order[i]] = 1;

  std::vector<MCItem> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    const std::size_t correct = detail::key_index(r.answer_key);
    std::size_t removed = correct;
    if (!selected[i]) {
      std::size_t k = static_cast<std::size_t>(uniform_index(rng, 3));
      removed = k >= correct ? k + 1 : k;
    }
    MCItem item;
    item.question = r.question;
    item.unanswerable = selected[i] != 0;
    item.answer_key = std::string(kUnanswerableKey);
    for (std::size_t k = 0; k < 4; ++k) {
      if (k == removed) continue;
      const std::string label(1, static_cast<char>('A' + item.options.size()));
      if (k == correct) item.answer_key = label;
      item.options.push_back({label, r.options[k]});
    }
    out.push_back(std::move(item));
  }
  return out;
}

inline std::vector<McSourceRecord> read_mc_source(std::istream& in) {
  std::vector<McSourceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    const auto where = "line " + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("question") || !j.contains("options") ||
        !j.contains("answer_key")) {
      throw DataError(where + "expected {question, options, answer_key}");
    }
    McSourceRecord r;
    try {
      r.question = j.at("question").get<std::string>();
      r.options = j.at("options").get<std::vector<std::string>>();
      const auto& key = j.at("answer_key");
      if (key.is_number_integer()) {
        const auto k = key.get<int>();
        r.answer_key = k >= 0 && k < 4 ? std::string(1, static_cast<char>('A' + k)) : "?";
      } else {
        r.answer_key = key.get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace abstain
