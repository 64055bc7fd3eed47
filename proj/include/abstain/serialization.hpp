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

// JSON / JSON-Lines encodings of datasets, checkpoints, configs and training
// logs. Field names are part of the on-disk format; do not rename them.

#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abstain/common.hpp"
#include "abstain/grpo.hpp"
#include "abstain/item.hpp"
#include "abstain/policy.hpp"
#include "abstain/synthenv.hpp"

namespace abstain {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Gold answers and items.

inline json to_json(const GoldAnswer& g) {
  if (g.is_no_answer()) return {{"kind", "no_answer"}};
  return {{"kind", "answerable"}, {"aliases", g.aliases()}};
}

inline GoldAnswer gold_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "no_answer") return GoldAnswer::no_answer();
  if (kind == "answerable") {
    return GoldAnswer::answerable(j.at("aliases").get<std::vector<std::string>>());
  }
  throw DataError("unknown gold kind: " + kind);
}

inline json to_json(const TimeSpecifier& s) {
  json j = {{"kind", to_string(s.kind())}};
  switch (s.kind()) {
    case TimeSpecifier::Kind::Between:
      j["start"] = s.first();
      j["end"] = s.second();
      break;
    case TimeSpecifier::Kind::EarlyDecade:
      j["decade"] = s.first();
      break;
    default:
      j["year"] = s.first();
  }
  return j;
}

inline TimeSpecifier specifier_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "in_year") return TimeSpecifier::in_year(j.at("year").get<int>());
  if (kind == "between") {
    return TimeSpecifier::between(j.at("start").get<int>(), j.at("end").get<int>());
  }
  if (kind == "after") return TimeSpecifier::after(j.at("year").get<int>());
  if (kind == "before") return TimeSpecifier::before(j.at("year").get<int>());
  if (kind == "early_decade") return TimeSpecifier::early_decade(j.at("decade").get<int>());
  throw DataError("unknown specifier kind: " + kind);
}

inline Evidence evidence_from_string(const std::string& s) {
  for (auto e : kAllEvidence) {
    if (to_string(e) == s) return e;
  }
  throw DataError("unknown evidence: " + s);
}

inline Difficulty difficulty_from_string(const std::string& s) {
  if (s == "easy") return Difficulty::Easy;
  if (s == "hard") return Difficulty::Hard;
  throw DataError("unknown difficulty: " + s);
}

inline json to_json(const SynthQAItem& item) {
  json facts = json::array();
  for (const auto& f : item.facts) {
    facts.push_back({{"subject", f.subject},
                     {"relation", f.relation},
                     {"object", f.object},
                     {"start", f.scope.start},
                     {"end", f.scope.end}});
  }
  return {{"id", item.id},
          {"question", item.question},
          {"context", item.context},
          {"specifier", item.specifier ? to_json(*item.specifier) : json(nullptr)},
          {"facts", facts},
          {"gold", to_json(item.gold)},
          {"candidates", {item.candidate_a, item.candidate_b}},
          {"feature",
           {{"evidence", to_string(item.feature.evidence)},
            {"difficulty", to_string(item.feature.difficulty)}}}};
}

inline SynthQAItem item_from_json(const json& j) {
  try {
    SynthQAItem item;
    item.id = j.at("id").get<std::string>();
    item.question = j.at("question").get<std::string>();
    item.context = j.value("context", std::string());
    if (j.contains("specifier") && !j["specifier"].is_null()) {
      item.specifier = specifier_from_json(j["specifier"]);
    }
    for (const auto& f : j.value("facts", json::array())) {
      item.facts.push_back({f.at("subject").get<std::string>(), f.at("relation").get<std::string>(),
                            f.at("object").get<std::string>(),
                            TimeInterval(f.at("start").get<int>(), f.at("end").get<int>())});
    }
    item.gold = gold_from_json(j.at("gold"));
    const auto cands = j.at("candidates").get<std::vector<std::string>>();
    if (cands.size() != 2) throw DataError("candidates must hold exactly two strings");
    item.candidate_a = cands[0];
    item.candidate_b = cands[1];
    const auto& feat = j.at("feature");
    item.feature = {evidence_from_string(feat.at("evidence").get<std::string>()),
                    difficulty_from_string(feat.at("difficulty").get<std::string>())};
    return item;
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset record: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("dataset record: ") + e.what());
  }
}

inline void write_dataset(std::ostream& out, std::span<const SynthQAItem> items) {
  for (const auto& item : items) out << to_json(item).dump() << '\n';
}

inline std::vector<SynthQAItem> read_dataset(std::istream& in) {
  std::vector<SynthQAItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    try {
      items.push_back(item_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(lineno) + ": malformed JSON (" + e.what() + ")");
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return items;
}

// Reads either the generated dataset format or TimeQA-style records,
// deciding from the first non-blank line.
inline std::vector<SynthQAItem> load_any_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  while (std::getline(in, line) && detail::is_blank(line)) {
  }
  in.clear();
  in.seekg(0);
  bool timeqa = false;
  if (!line.empty()) {
    try {
      const auto j = json::parse(line);
      timeqa = j.is_object() && j.contains("targets");
    } catch (const json::parse_error&) {
      throw DataError(path + ": line 1 is not JSON");
    }
  }
  return timeqa ? ingest_timeqa(in) : read_dataset(in);
}

// ---------------------------------------------------------------------------
// Multiple choice.

inline json to_json(const MCItem& m) {
  json opts = json::array();
  for (const auto& o : m.options) opts.push_back({{"label", o.label}, {"text", o.text}});
  return {{"question", m.question},
          {"options", opts},
          {"answer_key", m.answer_key},
          {"unanswerable", m.unanswerable}};
}

// ---------------------------------------------------------------------------
// Policy checkpoint: row-major logits with feature and action names.

inline json to_json(const PolicyParams& p) {
  json features = json::array(), actions = json::array(), rows = json::array();
  for (std::size_t r = 0; r < kNumFeatures; ++r) features.push_back(ContextFeature::from_row(r).name());
  for (std::size_t a = 0; a < kNumActions; ++a) actions.push_back(ActionId::from_index(a).name());
  for (const auto& row : p.logits()) rows.push_back(row);
  return {{"features", features}, {"actions", actions}, {"logits", rows}};
}

inline PolicyParams params_from_json(const json& j) {
  try {
    const auto features = j.at("features").get<std::vector<std::string>>();
    const auto actions = j.at("actions").get<std::vector<std::string>>();
    const auto rows = j.at("logits").get<std::vector<std::vector<double>>>();
    if (features.size() != kNumFeatures || actions.size() != kNumActions ||
        rows.size() != kNumFeatures) {
      throw DataError("checkpoint must be a 6x6 table");
    }
    LogitTable t{};
    for (std::size_t r = 0; r < kNumFeatures; ++r) {
      if (features[r] != ContextFeature::from_row(r).name()) {
        throw DataError("checkpoint feature " + std::to_string(r) + " is '" + features[r] + "'");
      }
      if (rows[r].size() != kNumActions) throw DataError("checkpoint must be a 6x6 table");
      for (std::size_t a = 0; a < kNumActions; ++a) t[r][a] = rows[r][a];
    }
    for (std::size_t a = 0; a < kNumActions; ++a) {
      if (actions[a] != ActionId::from_index(a).name()) {
        throw DataError("checkpoint action " + std::to_string(a) + " is '" + actions[a] + "'");
      }
    }
    return PolicyParams(t);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const NumericalError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Configs and logs.

inline json to_json(const GenConfig& c) {
  return {{"n_items", c.n_items},
          {"p_unans", c.p_unans},
          {"difficulty_mix", c.difficulty_mix},
          {"ambiguity", c.ambiguity},
          {"seed", c.seed}};
}

inline GenConfig gen_config_from_json(const json& j, GenConfig c = {}) {
  c.n_items = j.value("n_items", c.n_items);
  c.p_unans = j.value("p_unans", c.p_unans);
  c.difficulty_mix = j.value("difficulty_mix", c.difficulty_mix);
  c.ambiguity = j.value("ambiguity", c.ambiguity);
  c.seed = j.value("seed", c.seed);
  return c;
}

inline json to_json(const GrpoConfig& c) {
  return {{"group_size", c.group_size}, {"clip_eps", c.clip_eps},
          {"kl_beta", c.kl_beta},       {"lr", c.lr},
          {"outer_iters", c.outer_iters}, {"inner_steps", c.inner_steps},
          {"batch_size", c.batch_size}, {"std_eps", c.std_eps},
          {"seed", c.seed}};
}

inline GrpoConfig grpo_config_from_json(const json& j, GrpoConfig c = {}) {
  c.group_size = j.value("group_size", c.group_size);
  c.clip_eps = j.value("clip_eps", c.clip_eps);
  c.kl_beta = j.value("kl_beta", c.kl_beta);
  c.lr = j.value("lr", c.lr);
  c.outer_iters = j.value("outer_iters", c.outer_iters);
  c.inner_steps = j.value("inner_steps", c.inner_steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.std_eps = j.value("std_eps", c.std_eps);
  c.seed = j.value("seed", c.seed);
  return c;
}

inline json to_json(const IterationRecord& r) {
  return {{"iteration", r.iteration},   {"mean_reward", r.mean_reward},
          {"abstain_rate", r.abstain_rate}, {"kl", r.kl},
          {"objective", r.objective},   {"tp", r.confusion.tp},
          {"fp", r.confusion.fp},       {"fn", r.confusion.fn_}};
}

inline IterationRecord record_from_json(const json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.mean_reward = j.at("mean_reward").get<double>();
  r.abstain_rate = j.at("abstain_rate").get<double>();
  r.kl = j.at("kl").get<double>();
  r.objective = j.at("objective").get<double>();
  r.confusion = {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
                 j.at("fn").get<std::size_t>()};
  return r;
}

inline void write_train_log(std::ostream& out, const TrainLog& log) {
  for (const auto& r : log) out << to_json(r).dump() << '\n';
}

inline TrainLog read_train_log(std::istream& in) {
  TrainLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::is_blank(line)) continue;
    try {
      log.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("train log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace abstain
