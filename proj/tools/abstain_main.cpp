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

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "abstain/cli.hpp"

namespace {

using abstain::cli::kExitData;
using abstain::cli::kExitNumerical;
using abstain::cli::kExitOk;
using abstain::cli::kExitUsage;

struct GrpoFlags {
  abstain::GrpoConfig cfg;
  std::string variant = "rouge+em";
  bool sft = false;
  double sft_lr = abstain::kDefaultSftLr;
  int sft_epochs = abstain::kDefaultSftEpochs;
};

// Registers the flags shared by `train` and `sweep`.
void add_training_flags(CLI::App* cmd, GrpoFlags& f) {
  cmd->add_option("--group-size", f.cfg.group_size, "completions sampled per prompt");
  cmd->add_option("--clip-eps", f.cfg.clip_eps, "ratio clip epsilon");
  cmd->add_option("--beta", f.cfg.kl_beta, "KL penalty weight");
  cmd->add_option("--lr", f.cfg.lr, "learning rate");
  cmd->add_option("--iters", f.cfg.outer_iters, "outer iterations");
  cmd->add_option("--inner-steps", f.cfg.inner_steps, "gradient steps per batch");
  cmd->add_option("--batch-size", f.cfg.batch_size, "prompts per iteration");
  cmd->add_option("--std-eps", f.cfg.std_eps, "advantage denominator epsilon");
  cmd->add_option("--seed", f.cfg.seed, "training seed");
  cmd->add_option("--variant", f.variant, "rouge+em | rouge | rouge+sem | rouge+sem+em");
  cmd->add_flag("--sft-traces", f.sft, "warm-start with SFT on trusted expert traces");
  cmd->add_option("--sft-lr", f.sft_lr, "SFT learning rate");
  cmd->add_option("--sft-epochs", f.sft_epochs, "SFT epochs");
}

// Copies every flag the user actually passed on top of `o`.
void apply_training_flags(const CLI::App* cmd, const GrpoFlags& f, abstain::cli::TrainOptions& o) {
  auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--group-size")) o.grpo.group_size = f.cfg.group_size;
  if (given("--clip-eps")) o.grpo.clip_eps = f.cfg.clip_eps;
  if (given("--beta")) o.grpo.kl_beta = f.cfg.kl_beta;
  if (given("--lr")) o.grpo.lr = f.cfg.lr;
  if (given("--iters")) o.grpo.outer_iters = f.cfg.outer_iters;
  if (given("--inner-steps")) o.grpo.inner_steps = f.cfg.inner_steps;
  if (given("--batch-size")) o.grpo.batch_size = f.cfg.batch_size;
  if (given("--std-eps")) o.grpo.std_eps = f.cfg.std_eps;
  if (given("--seed")) o.grpo.seed = f.cfg.seed;
  if (given("--variant")) o.variant = abstain::reward_variant_from_string(f.variant);
  if (given("--sft-traces")) o.sft = f.sft;
  if (given("--sft-lr")) o.sft_lr = f.sft_lr;
  if (given("--sft-epochs")) o.sft_epochs = f.sft_epochs;
}

int run(int argc, char** argv) {
  namespace cli = abstain::cli;
  CLI::App app{"Abstention-aware GRPO training on synthetic temporal QA"};
  app.require_subcommand(1);

  // gen
  abstain::GenConfig gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic QA dataset");
  gen_cmd->add_option("--n", gen.n_items, "number of items");
  gen_cmd->add_option("--p-unans", gen.p_unans, "fraction of unanswerable items");
  gen_cmd->add_option("--difficulty-mix", gen.difficulty_mix, "fraction of hard items");
  gen_cmd->add_option("--ambiguity", gen.ambiguity, "evidence corruption probability");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen_out, "output JSONL path")->required();

  // build-mc
  std::string mc_in, mc_out;
  double mc_ratio = abstain::kDefaultAbstainRatio;
  std::uint64_t mc_seed = 0;
  auto* mc_cmd = app.add_subcommand("build-mc", "build an abstention-augmented MC set");
  mc_cmd->add_option("--in", mc_in, "source MC JSONL")->required();
  mc_cmd->add_option("--out", mc_out, "output JSONL path")->required();
  mc_cmd->add_option("--ratio", mc_ratio, "fraction of questions made unanswerable");
  mc_cmd->add_option("--seed", mc_seed, "selection seed");

  // extract
  cli::ExtractOptions ex;
  std::string ex_mode = "subcontext", ex_remote;
  auto* ex_cmd = app.add_subcommand("extract", "time-scoped sub-context or KG extraction");
  ex_cmd->add_option("--data", ex.data_path, "dataset JSONL (generated or TimeQA)")->required();
  ex_cmd->add_option("--out", ex.out_path, "output JSONL path")->required();
  ex_cmd->add_option("--mode", ex_mode, "subcontext | kg-semantic | kg-lexical");
  ex_cmd->add_option("--k", ex.k, "number of quadruples to retrieve");
  ex_cmd->add_option("--remote-config", ex_remote, "JSON config for a remote extractor");

  // train
  GrpoFlags tf;
  std::string t_data, t_eval, t_out, t_config;
  auto* train_cmd = app.add_subcommand("train", "optional SFT warm start, then GRPO");
  train_cmd->add_option("--data", t_data, "training dataset JSONL");
  train_cmd->add_option("--eval-data", t_eval, "held-out dataset for the final summary");
  train_cmd->add_option("--out", t_out, "run directory");
  train_cmd->add_option("--config", t_config, "run config JSON; flags override it");
  add_training_flags(train_cmd, tf);

  // eval
  std::string e_ckpt, e_data, e_out, e_variant = "rouge+em";
  auto* eval_cmd = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval_cmd->add_option("--checkpoint", e_ckpt, "policy.json")->required();
  eval_cmd->add_option("--data", e_data, "dataset JSONL")->required();
  eval_cmd->add_option("--out", e_out, "summary CSV path")->required();
  eval_cmd->add_option("--variant", e_variant, "reward variant");

  // sweep
  GrpoFlags sf;
  cli::SweepOptions sw;
  std::string s_axis, s_values;
  auto* sweep_cmd = app.add_subcommand("sweep", "train one run per value of an axis");
  sweep_cmd->add_option("--axis", s_axis, "p_unans | beta | reward_variant")->required();
  sweep_cmd->add_option("--values", s_values, "comma-separated values")->required();
  sweep_cmd->add_option("--out", sw.out_dir, "sweep directory")->required();
  sweep_cmd->add_option("--n", sw.train_gen.n_items, "training items per run");
  sweep_cmd->add_option("--eval-n", sw.eval_items, "held-out items per run");
  sweep_cmd->add_option("--p-unans", sw.train_gen.p_unans, "unanswerable fraction");
  sweep_cmd->add_option("--difficulty-mix", sw.train_gen.difficulty_mix, "hard fraction");
  sweep_cmd->add_option("--ambiguity", sw.train_gen.ambiguity, "evidence corruption probability");
  sweep_cmd->add_option("--data-seed", sw.train_gen.seed, "generator seed");
  sweep_cmd->add_flag("--parallel", sw.parallel, "run values concurrently");
  add_training_flags(sweep_cmd, sf);

  // report
  std::vector<std::string> r_runs;
  std::string r_out;
  auto* report_cmd = app.add_subcommand("report", "aggregate curves and counts across runs");
  report_cmd->add_option("--runs", r_runs, "run directories")->required();
  report_cmd->add_option("--out", r_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*gen_cmd) {
    gen.validate();
    const auto r = cli::cmd_gen(gen, gen_out);
    std::printf("wrote %zu items (%zu unanswerable, fraction %.4f) to %s\n", r.n_items,
                r.n_unanswerable,
                r.n_items ? static_cast<double>(r.n_unanswerable) / static_cast<double>(r.n_items)
                          : 0.0,
                gen_out.c_str());
  } else if (*mc_cmd) {
    const auto items = cli::cmd_build_mc(mc_in, mc_out, mc_ratio, mc_seed);
    std::size_t n_unans = 0;
    for (const auto& m : items) n_unans += m.unanswerable ? 1 : 0;
    std::printf("wrote %zu questions (%zu unanswerable) to %s\n", items.size(), n_unans,
                mc_out.c_str());
  } else if (*ex_cmd) {
    ex.mode = cli::extract_mode_from_string(ex_mode);
    if (!ex_remote.empty()) ex.remote = cli::extraction_config_from_json(cli::read_json_file(ex_remote));
    const auto s = cli::cmd_extract(ex);
    std::printf("extracted %zu items (%zu fell back to rule-based) to %s\n", s.items, s.fallbacks,
                ex.out_path.c_str());
  } else if (*train_cmd) {
    cli::TrainOptions o;
    if (!t_config.empty()) o = cli::train_options_from_json(cli::read_json_file(t_config));
    if (!t_data.empty()) o.data_path = t_data;
    if (!t_eval.empty()) o.eval_path = t_eval;
    if (!t_out.empty()) o.out_dir = t_out;
    apply_training_flags(train_cmd, tf, o);
    if (o.data_path.empty()) throw abstain::UsageError("train: --data is required");
    const auto res = cli::cmd_train(o);
    std::printf("trained %zu iterations; eval mean reward %.4f, abstain rate %.4f\n",
                res.log.size(), res.eval.mean_reward, res.eval.abstain_rate);
  } else if (*eval_cmd) {
    const auto rep = cli::cmd_eval(e_ckpt, e_data, abstain::reward_variant_from_string(e_variant),
                                   e_out);
    std::printf("mean reward %.4f, EM %.2f%%, abstain rate %.4f, TP %zu FP %zu FN %zu\n",
                rep.mean_reward, 100.0 * rep.em_rate, rep.abstain_rate, rep.confusion.tp,
                rep.confusion.fp, rep.confusion.fn_);
  } else if (*sweep_cmd) {
    sw.axis = cli::sweep_axis_from_string(s_axis);
    std::stringstream vs(s_values);
    for (std::string v; std::getline(vs, v, ',');) {
      if (!v.empty()) sw.values.push_back(v);
    }
    apply_training_flags(sweep_cmd, sf, sw.train);
    sw.train_gen.validate();
    const auto rows = cli::cmd_sweep(sw);
    for (const auto& r : rows) {
      std::printf("%s: final reward %.4f, abstain %.4f, kl %.6f\n", r.value.c_str(),
                  r.final_mean_reward, r.abstain_rate, r.kl);
    }
  } else if (*report_cmd) {
    const auto runs = cli::cmd_report(r_runs, r_out);
    std::printf("aggregated %zu runs into %s\n", runs.size(), r_out.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const abstain::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const abstain::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const abstain::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
