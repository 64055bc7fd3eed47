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

// Command implementations behind the `abstain` tool. Each command is a pure
// function of its options, seed and input files, and writes its artifacts
// into the directory it is given.

#pragma once

#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abstain/common.hpp"
#include "abstain/grpo.hpp"
#include "abstain/policy.hpp"
#include "abstain/remote_extract.hpp"
#include "abstain/report.hpp"
#include "abstain/retrieval.hpp"
#include "abstain/serialization.hpp"
#include "abstain/synthenv.hpp"

namespace abstain::cli {

namespace fs = std::filesystem;

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline nlohmann::json read_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// gen / build-mc

struct GenResult {
  std::size_t n_items = 0;
  std::size_t n_unanswerable = 0;
};

inline GenResult cmd_gen(const GenConfig& cfg, const fs::path& out_path) {
  const auto items = generate_dataset(cfg);
  std::ostringstream s;
  write_dataset(s, items);
  write_text(out_path, s.str());
  GenResult r{items.size(), 0};
  for (const auto& it : items) r.n_unanswerable += it.gold.is_no_answer() ? 1 : 0;
  return r;
}

inline std::vector<MCItem> cmd_build_mc(const fs::path& in_path, const fs::path& out_path,
                                        double ratio, std::uint64_t seed) {
  std::ifstream in(in_path);
  if (!in) throw DataError("cannot open " + in_path.string());
  const auto records = read_mc_source(in);
  const auto items = build_abstained_mc(records, ratio, seed);
  std::ostringstream s;
  for (const auto& m : items) s << to_json(m).dump() << '\n';
  write_text(out_path, s.str());
  return items;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string data_path;
  std::string eval_path;  // empty: evaluate on the training data
  std::string out_dir;
  GrpoConfig grpo;
  RewardVariant variant = RewardVariant::RougePlusEM;
  bool sft = false;
  double sft_lr = kDefaultSftLr;
  int sft_epochs = kDefaultSftEpochs;
};

inline nlohmann::json to_json(const TrainOptions& o) {
  return {{"command", "train"},
          {"data", o.data_path},
          {"eval_data", o.eval_path},
          {"out", o.out_dir},
          {"reward_variant", to_string(o.variant)},
          {"sft", {{"enabled", o.sft}, {"lr", o.sft_lr}, {"epochs", o.sft_epochs}}},
          {"grpo", abstain::to_json(o.grpo)}};
}

inline TrainOptions train_options_from_json(const nlohmann::json& j, TrainOptions o = {}) {
  try {
    o.data_path = j.value("data", o.data_path);
    o.eval_path = j.value("eval_data", o.eval_path);
    o.out_dir = j.value("out", o.out_dir);
    if (j.contains("reward_variant")) {
      o.variant = reward_variant_from_string(j["reward_variant"].get<std::string>());
    }
    if (j.contains("sft")) {
      const auto& s = j["sft"];
      o.sft = s.value("enabled", o.sft);
      o.sft_lr = s.value("lr", o.sft_lr);
      o.sft_epochs = s.value("epochs", o.sft_epochs);
    }
    if (j.contains("grpo")) o.grpo = grpo_config_from_json(j["grpo"], o.grpo);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return o;
}

struct TrainOutcome {
  PolicyParams initial;  // the reference policy
  PolicyParams final_params;
  TrainLog log;
  EvalReport eval;
};

inline TrainOutcome run_training(std::span<const SynthQAItem> train_items,
                                 std::span<const SynthQAItem> eval_items, const TrainOptions& o) {
  TrainOutcome out;
  if (o.sft) {
    const auto traces = make_expert_traces(train_items);
    if (traces.empty()) throw DataError("no trusted expert traces in the training data");
    out.initial = sft_train(PolicyParams{}, traces, o.sft_lr, o.sft_epochs);
  }
  const DatasetEnv env(std::vector<SynthQAItem>(train_items.begin(), train_items.end()));
  auto result = train_rl(out.initial, env, o.variant, o.grpo);
  out.final_params = result.params;
  out.log = std::move(result.log);
  out.eval = evaluate_policy(out.final_params, eval_items, o.variant);
  return out;
}

// Writes config.json first, then train_log.jsonl, policy.json, summary.csv
// and curves.svg.
inline TrainOutcome cmd_train(const TrainOptions& o) {
  o.grpo.validate();
  if (o.out_dir.empty()) throw UsageError("train: output directory is required");
  if (o.sft && (!(o.sft_lr >= 0.0) || o.sft_epochs < 0)) throw UsageError("train: bad SFT settings");
  const fs::path out(o.out_dir);
  if (o.data_path.empty() || !fs::exists(o.data_path)) {
    throw UsageError("train: dataset file not found: " + o.data_path);
  }
  if (!o.eval_path.empty() && !fs::exists(o.eval_path)) {
    throw UsageError("train: eval dataset not found: " + o.eval_path);
  }
  fs::create_directories(out);
  write_text(out / "config.json", to_json(o).dump(2) + "\n");

  const auto train_items = load_any_dataset(o.data_path);
  if (train_items.empty()) throw DataError("train: dataset is empty");
  const auto eval_items = o.eval_path.empty() ? train_items : load_any_dataset(o.eval_path);
  if (eval_items.empty()) throw DataError("train: eval dataset is empty");

  TrainOutcome res = run_training(train_items, eval_items, o);

  std::ostringstream log_s, csv_s;
  write_train_log(log_s, res.log);
  write_text(out / "train_log.jsonl", log_s.str());
  write_text(out / "policy.json", abstain::to_json(res.final_params).dump(2) + "\n");
  write_summary_csv(csv_s, res.eval);
  write_text(out / "summary.csv", csv_s.str());
  write_text(out / "curves.svg",
             render_curves_svg({{out.filename().string(), res.log, res.eval.confusion}}));
  return res;
}

// ---------------------------------------------------------------------------
// eval

inline EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& data, RewardVariant variant,
                           const fs::path& out_csv) {
  if (!fs::exists(checkpoint)) throw UsageError("eval: checkpoint not found: " + checkpoint.string());
  if (!fs::exists(data)) throw UsageError("eval: dataset not found: " + data.string());
  const PolicyParams params = params_from_json(read_json_file(checkpoint));
  const auto items = load_any_dataset(data.string());
  if (items.empty()) throw UsageError("eval: dataset is empty");
  EvalReport rep = evaluate_policy(params, items, variant);
  std::ostringstream s;
  write_summary_csv(s, rep);
  write_text(out_csv, s.str());
  return rep;
}

// ---------------------------------------------------------------------------
// sweep

enum class SweepAxis { PUnans, Beta, RewardVariant };

inline SweepAxis sweep_axis_from_string(std::string_view s) {
  if (s == "p_unans") return SweepAxis::PUnans;
  if (s == "beta") return SweepAxis::Beta;
  if (s == "reward_variant") return SweepAxis::RewardVariant;
  throw UsageError("unknown sweep axis: " + std::string(s));
}

struct SweepOptions {
  SweepAxis axis = SweepAxis::PUnans;
  std::vector<std::string> values;
  GenConfig train_gen;             // training data; p_unans overridden on that axis
  std::size_t eval_items = 1000;   // held-out set drawn with seed + 1
  TrainOptions train;              // data paths and out_dir are filled per run
  std::string out_dir;
  bool parallel = false;
};

inline constexpr std::string_view kSweepHeader =
    "value,final_mean_reward,abstain_rate,em,tp,fp,fn,kl,tv";

struct SweepRow {
  std::string value;
  double final_mean_reward = 0.0;
  double abstain_rate = 0.0;
  double em = 0.0;  // percent
  ConfusionCounts confusion;
  double kl = 0.0;  // mean KL estimate over the last (up to) 10 iterations
  double tv = 0.0;  // mean total variation from the reference policy
};

inline std::vector<SweepRow> cmd_sweep(const SweepOptions& o) {
  if (o.values.size() < 2) throw UsageError("sweep: need at least two values");
  if (o.out_dir.empty()) throw UsageError("sweep: output directory is required");
  std::set<std::string> seen;
  for (const auto& v : o.values) {
    std::string key = v;
    if (o.axis != SweepAxis::RewardVariant) {
      try {
        key = std::to_string(std::stod(v));
      } catch (const std::exception&) {
        throw UsageError("sweep: not a number: " + v);
      }
    }
    if (!seen.insert(key).second) throw UsageError("sweep: duplicate value " + v);
  }

  auto run_one = [&](const std::string& value) {
    TrainOptions t = o.train;
    GenConfig gen = o.train_gen;
    switch (o.axis) {
      case SweepAxis::PUnans: gen.p_unans = std::stod(value); break;
      case SweepAxis::Beta: t.grpo.kl_beta = std::stod(value); break;
      case SweepAxis::RewardVariant: t.variant = reward_variant_from_string(value); break;
    }
    GenConfig eval_gen = gen;
    eval_gen.n_items = o.eval_items;
    eval_gen.seed = gen.seed + 1;
    const fs::path dir = fs::path(o.out_dir) / (value);
    cmd_gen(gen, dir / "train.jsonl");
    cmd_gen(eval_gen, dir / "eval.jsonl");
    t.data_path = (dir / "train.jsonl").string();
    t.eval_path = (dir / "eval.jsonl").string();
    t.out_dir = dir.string();
    const TrainOutcome res = cmd_train(t);

    SweepRow row;
    row.value = value;
    row.final_mean_reward = res.log.empty() ? 0.0 : res.log.back().mean_reward;
    row.abstain_rate = res.eval.abstain_rate;
    row.em = 100.0 * res.eval.em_rate;
    row.confusion = res.eval.confusion;
    const std::size_t tail = std::min<std::size_t>(10, res.log.size());
    for (std::size_t i = res.log.size() - tail; i < res.log.size(); ++i) row.kl += res.log[i].kl;
    if (tail) row.kl /= static_cast<double>(tail);
    row.tv = mean_total_variation(res.final_params, res.initial);
    return row;
  };

  std::vector<SweepRow> rows;
  if (o.parallel) {
    std::vector<std::future<SweepRow>> futures;
    for (const auto& v : o.values) futures.push_back(std::async(std::launch::async, run_one, v));
    for (auto& f : futures) rows.push_back(f.get());
  } else {
    for (const auto& v : o.values) rows.push_back(run_one(v));
  }

  std::ostringstream s;
  s << kSweepHeader << '\n';
  for (const auto& r : rows) {
    s << csv_field(r.value) << ',' << fmt_fixed(r.final_mean_reward) << ','
      << fmt_fixed(r.abstain_rate) << ',' << fmt_fixed(r.em, 2) << ',' << r.confusion.tp << ','
      << r.confusion.fp << ',' << r.confusion.fn_ << ',' << fmt_fixed(r.kl, 8) << ','
      << fmt_fixed(r.tv, 8) << '\n';
  }
  write_text(fs::path(o.out_dir) / "sweep_summary.csv", s.str());
  return rows;
}

// ---------------------------------------------------------------------------
// report

inline constexpr std::string_view kAggregateHeader =
    "run,iterations,final_mean_reward,final_abstain_rate,final_kl,tp,fp,fn";

// TP/FP/FN come from the "all" row of summary.csv when present, else from
// the last training iteration.
inline std::vector<RunCurves> load_runs(const std::vector<std::string>& run_dirs) {
  std::vector<RunCurves> runs;
  for (const auto& d : run_dirs) {
    const fs::path dir(d);
    const fs::path log_path = dir / "train_log.jsonl";
    if (!fs::exists(log_path)) throw DataError("report: missing " + log_path.string());
    std::ifstream in(log_path);
    RunCurves rc;
    rc.name = dir.filename().empty() ? dir.parent_path().filename().string()
                                     : dir.filename().string();
    rc.log = read_train_log(in);
    if (!rc.log.empty()) rc.final_confusion = rc.log.back().confusion;
    if (const fs::path summary = dir / "summary.csv"; fs::exists(summary)) {
      std::istringstream csv(read_text(summary));
      std::string line;
      while (std::getline(csv, line)) {
        if (line.rfind("all,", 0) != 0) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (cells.size() != 9) throw DataError("report: malformed " + summary.string());
        rc.final_confusion = {std::stoul(cells[6]), std::stoul(cells[7]), std::stoul(cells[8])};
      }
    }
    runs.push_back(std::move(rc));
  }
  return runs;
}

inline std::vector<RunCurves> cmd_report(const std::vector<std::string>& run_dirs,
                                         const fs::path& out_dir) {
  if (run_dirs.empty()) throw UsageError("report: no run directories given");
  auto runs = load_runs(run_dirs);
  write_text(out_dir / "curves.svg", render_curves_svg(runs));
  std::ostringstream s;
  s << kAggregateHeader << '\n';
  for (const auto& r : runs) {
    const IterationRecord last = r.log.empty() ? IterationRecord{} : r.log.back();
    s << csv_field(r.name) << ',' << r.log.size() << ',' << fmt_fixed(last.mean_reward) << ','
      << fmt_fixed(last.abstain_rate) << ',' << fmt_fixed(last.kl, 8) << ','
      << r.final_confusion.tp << ',' << r.final_confusion.fp << ',' << r.final_confusion.fn_
      << '\n';
  }
  write_text(out_dir / "aggregate.csv", s.str());
  return runs;
}

// ---------------------------------------------------------------------------
// extract

enum class ExtractMode { SubContext, KgSemantic, KgLexical };

inline ExtractMode extract_mode_from_string(std::string_view s) {
  if (s == "subcontext") return ExtractMode::SubContext;
  if (s == "kg-semantic") return ExtractMode::KgSemantic;
  if (s == "kg-lexical") return ExtractMode::KgLexical;
  throw UsageError("unknown extract mode: " + std::string(s));
}

struct ExtractOptions {
  std::string data_path;
  std::string out_path;
  ExtractMode mode = ExtractMode::SubContext;
  std::size_t k = kDefaultTopK;
  std::optional<ExtractionClientConfig> remote;
};

inline ExtractionClientConfig extraction_config_from_json(const nlohmann::json& j) {
  ExtractionClientConfig c;
  try {
    c.endpoint = j.at("endpoint").get<std::string>();
    c.model = j.at("model").get<std::string>();
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("remote config: ") + e.what());
  }
  c.validate();
  return c;
}

// The time scope a question asks about: the specifier window for generated
// items, otherwise the hull of the time expressions in the question text.
inline TimeInterval question_interval(const SynthQAItem& item) {
  if (item.specifier) return item.specifier->window();
  const auto spans = parse_time_expressions(item.question);
  if (spans.empty()) return {kEarliestYear, kLatestYear};
  TimeInterval hull = spans.front();
  for (const auto& s : spans) hull = {std::min(hull.start, s.start), std::max(hull.end, s.end)};
  return hull;
}

struct ExtractSummary {
  std::size_t items = 0;
  std::size_t fallbacks = 0;
};

inline ExtractSummary cmd_extract(const ExtractOptions& o) {
  if (o.k < 1) throw UsageError("extract: k must be >= 1");
  if (!fs::exists(o.data_path)) throw UsageError("extract: dataset not found: " + o.data_path);
  const auto items = load_any_dataset(o.data_path);
  ExtractSummary summary;
  std::ostringstream s;
  for (const auto& item : items) {
    const auto kind = o.mode == ExtractMode::SubContext ? PromptKind::SubContext : PromptKind::KG;
    const auto outcome =
        extract_with_fallback(o.remote, kind, item.question, question_interval(item), item.context);
    nlohmann::json rec = {{"id", item.id},
                          {"source", outcome.source},
                          {"fallback_reason", outcome.fallback_reason
                                                  ? nlohmann::json(*outcome.fallback_reason)
                                                  : nlohmann::json(nullptr)}};
    if (outcome.fallback_reason) ++summary.fallbacks;
    if (kind == PromptKind::SubContext) {
      rec["sub_context"] = std::get<std::vector<std::string>>(outcome.result);
    } else {
      const KGStore store(std::get<std::vector<Quadruple>>(outcome.result));
      nlohmann::json quads = nlohmann::json::array(), retrieved = nlohmann::json::array();
      for (const auto& q : store.quads()) quads.push_back(to_json(q));
      std::vector<Quadruple> top;
      if (!store.empty()) {
        if (o.mode == ExtractMode::KgSemantic) {
          for (const auto& r : topk_semantic(store, item.question, o.k)) {
            retrieved.push_back({{"index", r.index}, {"score", r.score}});
            top.push_back(r.quad);
          }
        } else {
          for (const auto& r : topk_lexical(store, item.question, o.k)) {
            retrieved.push_back({{"index", r.index}, {"score", r.score}});
            top.push_back(r.quad);
          }
        }
      }
      rec["quadruples"] = quads;
      rec["retrieved"] = retrieved;
      rec["rephrased"] = rephrase_quadruples(top);
    }
    s << rec.dump() << '\n';
    ++summary.items;
  }
  write_text(o.out_path, s.str());
  return summary;
}

}  // namespace abstain::cli
