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

#include <sys/wait.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "abstain/cli.hpp"

namespace abstain {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    static std::atomic<int> counter{0};
    dir_ = fs::temp_directory_path() /
           ("abstain_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& rel) const { return dir_ / rel; }

  int run(const std::string& args) const {
    const std::string cmd = std::string("\"") + ABSTAIN_TOOL_PATH + "\" " + args + " >>\"" +
                            path("tool.log").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string gen(const std::string& name, const std::string& extra = "") const {
    const auto p = path(name).string();
    EXPECT_EQ(run("gen --out " + p + " " + extra), 0);
    return p;
  }

  fs::path dir_;
};

std::string slurp(const fs::path& p) { return cli::read_text(p); }

std::vector<SynthQAItem> load(const fs::path& p) { return load_any_dataset(p.string()); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

TEST_F(CliTest, GenWritesRequestedUnanswerableCount) {
  const auto out = path("a/b/c/data.jsonl");
  ASSERT_EQ(run("gen --n 1000 --p-unans 0.5 --seed 7 --out " + out.string()), 0);
  ASSERT_TRUE(fs::exists(out));
  const auto items = load(out);
  ASSERT_EQ(items.size(), 1000u);
  std::size_t unans = 0;
  for (const auto& it : items) unans += it.gold.is_no_answer() ? 1 : 0;
  EXPECT_EQ(unans, 500u);
  EXPECT_NE(slurp(path("tool.log")).find("500 unanswerable"), std::string::npos);
}

TEST_F(CliTest, GenRejectsBadFractions) {
  EXPECT_EQ(run("gen --p-unans 1.5 --out " + path("x.jsonl").string()), 2);
  EXPECT_EQ(run("gen --ambiguity -0.1 --out " + path("x.jsonl").string()), 2);
  EXPECT_EQ(run("gen --difficulty-mix 2 --out " + path("x.jsonl").string()), 2);
  EXPECT_FALSE(fs::exists(path("x.jsonl")));
}

TEST_F(CliTest, UnknownSubcommandAndMissingFlagsAreUsageErrors) {
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("gen"), 2);
  EXPECT_EQ(run("train --out " + path("r").string()), 2);
  EXPECT_EQ(run("train --data " + path("missing.jsonl").string() + " --out " + path("r").string()),
            2);
}

TEST_F(CliTest, TrainWritesArtifactsWithResolvedDefaults) {
  const auto data = gen("d.jsonl", "--n 200 --seed 3");
  const auto out = path("run");
  ASSERT_EQ(run("train --data " + data + " --out " + out.string() + " --iters 15"), 0);
  for (const char* f : {"config.json", "train_log.jsonl", "policy.json", "summary.csv", "curves.svg"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const json cfg = cli::read_json_file(out / "config.json");
  const json& g = cfg.at("grpo");
  EXPECT_EQ(g.at("group_size").get<int>(), 4);
  EXPECT_DOUBLE_EQ(g.at("clip_eps").get<double>(), 0.2);
  EXPECT_DOUBLE_EQ(g.at("kl_beta").get<double>(), 0.01);
  EXPECT_DOUBLE_EQ(g.at("lr").get<double>(), 1e-2);
  EXPECT_EQ(g.at("outer_iters").get<int>(), 15);
  EXPECT_EQ(g.at("inner_steps").get<int>(), 1);
  EXPECT_EQ(g.at("batch_size").get<int>(), 16);
  EXPECT_DOUBLE_EQ(g.at("std_eps").get<double>(), 1e-8);
  EXPECT_EQ(g.at("seed").get<std::uint64_t>(), 0u);
  EXPECT_EQ(cfg.at("reward_variant").get<std::string>(), "rouge+em");
  EXPECT_FALSE(cfg.at("sft").at("enabled").get<bool>());
  EXPECT_DOUBLE_EQ(cfg.at("sft").at("lr").get<double>(), kDefaultSftLr);
  EXPECT_EQ(cfg.at("sft").at("epochs").get<int>(), kDefaultSftEpochs);
  EXPECT_EQ(cfg.at("data").get<std::string>(), data);

  std::ifstream log(out / "train_log.jsonl");
  EXPECT_EQ(read_train_log(log).size(), 15u);
  EXPECT_NO_THROW(params_from_json(cli::read_json_file(out / "policy.json")));
  const auto rows = read_csv(out / "summary.csv");
  ASSERT_EQ(rows.size(), 202u);
  EXPECT_EQ(rows.back()[0], "all");
}

TEST_F(CliTest, ConfigJsonAloneReproducesTheRun) {
  const auto data = gen("d.jsonl", "--n 150 --seed 4");
  ASSERT_EQ(run("train --data " + data + " --out " + path("r1").string() +
                " --iters 12 --seed 9 --group-size 8"),
            0);
  ASSERT_EQ(run("train --config " + path("r1/config.json").string() + " --out " +
                path("r2").string()),
            0);
  EXPECT_EQ(slurp(path("r1/train_log.jsonl")), slurp(path("r2/train_log.jsonl")));
  EXPECT_EQ(slurp(path("r1/summary.csv")), slurp(path("r2/summary.csv")));
}

TEST_F(CliTest, BetaZeroRunsWithoutKlPenalty) {
  const auto data = gen("d.jsonl", "--n 150 --seed 5");
  ASSERT_EQ(run("train --data " + data + " --out " + path("r").string() + " --iters 10 --beta 0"),
            0);
  const json cfg = cli::read_json_file(path("r/config.json"));
  EXPECT_EQ(cfg.at("grpo").at("kl_beta").get<double>(), 0.0);
}

TEST_F(CliTest, SameSeedGivesIdenticalLogsAndSummaries) {
  const auto data = gen("d.jsonl", "--n 300 --seed 6");
  const std::string common = "train --data " + data + " --iters 30 --seed 11 --out ";
  ASSERT_EQ(run(common + path("a").string()), 0);
  ASSERT_EQ(run(common + path("b").string()), 0);
  ASSERT_EQ(run("train --data " + data + " --iters 30 --seed 12 --out " + path("c").string()), 0);
  EXPECT_EQ(slurp(path("a/train_log.jsonl")), slurp(path("b/train_log.jsonl")));
  EXPECT_EQ(slurp(path("a/summary.csv")), slurp(path("b/summary.csv")));
  EXPECT_NE(slurp(path("a/train_log.jsonl")), slurp(path("c/train_log.jsonl")));
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  const auto data = gen("d.jsonl", "--n 100 --seed 8");
  const json base = {{"data", data},
                     {"out", path("from_config").string()},
                     {"reward_variant", "rouge"},
                     {"grpo", {{"lr", 0.05}, {"group_size", 8}, {"outer_iters", 5}}}};
  cli::write_text(path("cfg.json"), base.dump());
  ASSERT_EQ(run("train --config " + path("cfg.json").string() + " --group-size 2 --out " +
                path("flag_out").string()),
            0);
  EXPECT_FALSE(fs::exists(path("from_config")));
  const json cfg = cli::read_json_file(path("flag_out/config.json"));
  EXPECT_EQ(cfg.at("grpo").at("group_size").get<int>(), 2);
  EXPECT_DOUBLE_EQ(cfg.at("grpo").at("lr").get<double>(), 0.05);
  EXPECT_EQ(cfg.at("grpo").at("outer_iters").get<int>(), 5);
  EXPECT_DOUBLE_EQ(cfg.at("grpo").at("clip_eps").get<double>(), 0.2);
  EXPECT_EQ(cfg.at("reward_variant").get<std::string>(), "rouge");
}

TEST_F(CliTest, BadConfigValuesAreUsageErrors) {
  const auto data = gen("d.jsonl", "--n 50");
  cli::write_text(path("typed.json"), json{{"data", data}, {"grpo", {{"lr", "fast"}}}}.dump());
  EXPECT_EQ(run("train --config " + path("typed.json").string() + " --out " + path("r").string()),
            2);
  EXPECT_EQ(run("train --data " + data + " --out " + path("r").string() + " --clip-eps 1.5"), 2);
  EXPECT_EQ(run("train --data " + data + " --out " + path("r").string() + " --variant bogus"), 2);
}

TEST_F(CliTest, SftWarmStartRuns) {
  const auto data = gen("d.jsonl", "--n 200 --seed 2");
  ASSERT_EQ(run("train --data " + data + " --out " + path("r").string() +
                " --iters 5 --sft-traces --sft-epochs 20"),
            0);
  EXPECT_TRUE(cli::read_json_file(path("r/config.json")).at("sft").at("enabled").get<bool>());
}

// Easy items with uncorrupted evidence: answering A on Supports and
// abstaining elsewhere is always right.
PolicyParams oracle_table() {
  LogitTable t = zero_table();
  for (std::size_t r = 0; r < kNumFeatures; ++r) {
    const auto f = ContextFeature::from_row(r);
    const ActionId a = f.evidence == Evidence::Supports ? ActionId{Choice::AnswerA, true}
                                                        : ActionId{Choice::Abstain, true};
    t[r][a.index()] = 10.0;
  }
  return PolicyParams(t);
}

TEST_F(CliTest, EvalOracleCheckpointIsPerfect) {
  const auto data = gen("d.jsonl", "--n 300 --p-unans 0.4 --difficulty-mix 0 --ambiguity 0 --seed 5");
  cli::write_text(path("oracle.json"), to_json(oracle_table()).dump());
  ASSERT_EQ(run("eval --checkpoint " + path("oracle.json").string() + " --data " + data +
                " --out " + path("eval/summary.csv").string()),
            0);
  const auto rows = read_csv(path("eval/summary.csv"));
  ASSERT_EQ(rows.size(), 302u);
  EXPECT_EQ(slurp(path("eval/summary.csv")).substr(0, kSummaryHeader.size() + 1),
            std::string(kSummaryHeader) + "\n");
  const auto& all = rows.back();
  ASSERT_EQ(all.size(), 9u);
  EXPECT_EQ(all[0], "all");
  EXPECT_EQ(all[5], "100.00");
  EXPECT_EQ(all[6], "120");
  EXPECT_EQ(all[7], "0");
  EXPECT_EQ(all[8], "0");
}

TEST_F(CliTest, EvalErrors) {
  cli::write_text(path("oracle.json"), to_json(oracle_table()).dump());
  cli::write_text(path("empty.jsonl"), "\n");
  EXPECT_EQ(run("eval --checkpoint " + path("oracle.json").string() + " --data " +
                path("empty.jsonl").string() + " --out " + path("s.csv").string()),
            2);
  const auto data = gen("d.jsonl", "--n 20");
  EXPECT_EQ(run("eval --checkpoint " + path("nope.json").string() + " --data " + data +
                " --out " + path("s.csv").string()),
            2);
  cli::write_text(path("broken.json"), R"({"features": [], "actions": [], "logits": []})");
  EXPECT_EQ(run("eval --checkpoint " + path("broken.json").string() + " --data " + data +
                " --out " + path("s.csv").string()),
            3);
}

TEST_F(CliTest, MalformedDatasetIsDataError) {
  cli::write_text(path("bad.jsonl"), "{\"id\": \n");
  EXPECT_EQ(run("train --data " + path("bad.jsonl").string() + " --out " + path("r").string()), 3);
  cli::write_text(path("bad2.jsonl"), "{\"id\": \"x\"}\n");
  EXPECT_EQ(run("train --data " + path("bad2.jsonl").string() + " --out " + path("r").string()),
            3);
}

TEST_F(CliTest, DivergentUpdateIsNumericalError) {
  const auto data = gen("d.jsonl", "--n 100 --seed 1");
  EXPECT_EQ(run("train --data " + data + " --out " + path("r").string() +
                " --iters 20 --lr 1e308 --inner-steps 4"),
            4);
}

TEST_F(CliTest, SweepValidatesValues) {
  const auto out = path("sw").string();
  EXPECT_EQ(run("sweep --axis beta --values 0.5 --out " + out), 2);
  EXPECT_EQ(run("sweep --axis beta --values 0.5,0.50 --out " + out), 2);
  EXPECT_EQ(run("sweep --axis reward_variant --values rouge,rouge --out " + out), 2);
  EXPECT_EQ(run("sweep --axis beta --values 0.1,abc --out " + out), 2);
  EXPECT_EQ(run("sweep --axis gamma --values 1,2 --out " + out), 2);
}

TEST_F(CliTest, DataRatioSweepAbstainsMoreAtHalf) {
  const auto out = path("sw");
  ASSERT_EQ(run("sweep --axis p_unans --values 0.124,0.5 --n 1000 --eval-n 500 --out " +
                out.string()),
            0);
  const auto rows = read_csv(out / "sweep_summary.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(slurp(out / "sweep_summary.csv").substr(0, cli::kSweepHeader.size()),
            cli::kSweepHeader);
  EXPECT_EQ(rows[1][0], "0.124");
  EXPECT_EQ(rows[2][0], "0.5");
  EXPECT_GT(std::stod(rows[2][2]), std::stod(rows[1][2]));
  for (const char* v : {"0.124", "0.5"}) {
    for (const char* f : {"config.json", "train_log.jsonl", "policy.json", "summary.csv",
                          "curves.svg", "train.jsonl", "eval.jsonl"}) {
      EXPECT_TRUE(fs::exists(out / v / f)) << v << "/" << f;
    }
  }
}

TEST_F(CliTest, BetaSweepKlIsMonotone) {
  const auto out = path("sw");
  ASSERT_EQ(run("sweep --axis beta --values 0,0.01,10 --n 1000 --eval-n 200 --parallel --out " +
                out.string()),
            0);
  const auto rows = read_csv(out / "sweep_summary.csv");
  ASSERT_EQ(rows.size(), 4u);
  const double kl0 = std::stod(rows[1][7]), kl1 = std::stod(rows[2][7]), kl2 = std::stod(rows[3][7]);
  const double tv0 = std::stod(rows[1][8]), tv1 = std::stod(rows[2][8]), tv2 = std::stod(rows[3][8]);
  EXPECT_GE(kl0, kl1);
  EXPECT_GT(kl1, kl2);
  EXPECT_GE(tv0, tv1);
  EXPECT_GT(tv1, tv2);
  for (const char* v : {"0", "0.01", "10"}) {
    const json cfg = cli::read_json_file(out / v / "config.json");
    EXPECT_DOUBLE_EQ(cfg.at("grpo").at("kl_beta").get<double>(), std::stod(v));
  }
}

TEST_F(CliTest, ParallelSweepMatchesSequential) {
  const std::string args = "sweep --axis reward_variant --values rouge,rouge+em --n 200 --eval-n 50 --iters 10 --out ";
  ASSERT_EQ(run(args + path("seq").string()), 0);
  ASSERT_EQ(run(args + path("par").string() + " --parallel"), 0);
  EXPECT_EQ(slurp(path("seq/sweep_summary.csv")), slurp(path("par/sweep_summary.csv")));
}

TEST_F(CliTest, ReportAggregatesRuns) {
  const auto data = gen("d.jsonl", "--n 100 --seed 1");
  ASSERT_EQ(run("train --data " + data + " --iters 8 --out " + path("runA").string()), 0);
  ASSERT_EQ(run("train --data " + data + " --iters 12 --seed 3 --out " + path("runB").string()), 0);
  ASSERT_EQ(run("report --runs " + path("runA").string() + " " + path("runB").string() +
                " --out " + path("rep").string()),
            0);
  const auto rows = read_csv(path("rep/aggregate.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "runA");
  EXPECT_EQ(rows[1][1], "8");
  EXPECT_EQ(rows[2][0], "runB");
  EXPECT_EQ(rows[2][1], "12");
  const auto summary_all = read_csv(path("runA/summary.csv")).back();
  EXPECT_EQ(rows[1][5], summary_all[6]);
  EXPECT_EQ(rows[1][6], summary_all[7]);
  EXPECT_EQ(rows[1][7], summary_all[8]);

  const auto svg = slurp(path("rep/curves.svg"));
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  EXPECT_NO_THROW(boost::property_tree::read_xml(in, tree));
  EXPECT_EQ(count_of(svg, "class=\"reward\""), 2u);
  EXPECT_EQ(count_of(svg, "class=\"abstain\""), 2u);
}

TEST_F(CliTest, ReportSingleRunHasOneCurvePair) {
  const auto data = gen("d.jsonl", "--n 100 --seed 1");
  ASSERT_EQ(run("train --data " + data + " --iters 5 --out " + path("only").string()), 0);
  ASSERT_EQ(run("report --runs " + path("only").string() + " --out " + path("rep").string()), 0);
  const auto svg = slurp(path("rep/curves.svg"));
  EXPECT_EQ(count_of(svg, "class=\"reward\""), 1u);
  EXPECT_EQ(count_of(svg, "class=\"abstain\""), 1u);
  EXPECT_EQ(read_csv(path("rep/aggregate.csv")).size(), 2u);
}

TEST_F(CliTest, ReportMissingLogIsDataError) {
  fs::create_directories(path("empty_run"));
  EXPECT_EQ(run("report --runs " + path("empty_run").string() + " --out " + path("rep").string()),
            3);
}

TEST_F(CliTest, BuildMc) {
  std::ostringstream src;
  for (int i = 0; i < 100; ++i) {
    src << json{{"question", "q" + std::to_string(i)},
                {"options", {"w" + std::to_string(i), "x", "y", "z"}},
                {"answer_key", std::string(1, static_cast<char>('A' + i % 4))}}
               .dump()
        << '\n';
  }
  cli::write_text(path("src.jsonl"), src.str());
  ASSERT_EQ(run("build-mc --in " + path("src.jsonl").string() + " --out " +
                path("mc/out.jsonl").string() + " --seed 4"),
            0);
  std::istringstream in(slurp(path("mc/out.jsonl")));
  std::size_t n = 0, unans = 0;
  for (std::string line; std::getline(in, line); ++n) {
    const json j = json::parse(line);
    ASSERT_EQ(j.at("options").size(), 3u);
    const auto key = j.at("answer_key").get<std::string>();
    if (j.at("unanswerable").get<bool>()) {
      ++unans;
      EXPECT_EQ(key, "D");
    } else {
      EXPECT_TRUE(key == "A" || key == "B" || key == "C");
    }
  }
  EXPECT_EQ(n, 100u);
  EXPECT_EQ(unans, 12u);

  cli::write_text(path("bad.jsonl"), R"({"question": "q", "options": ["a"], "answer_key": "A"})");
  EXPECT_EQ(run("build-mc --in " + path("bad.jsonl").string() + " --out " +
                path("o.jsonl").string()),
            3);
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

TEST_F(CliTest, ExtractModes) {
  const auto data = gen("d.jsonl", "--n 20 --seed 2");
  ASSERT_EQ(run("extract --data " + data + " --out " + path("sub.jsonl").string()), 0);
  for (const auto& r : read_jsonl(path("sub.jsonl"))) {
    EXPECT_EQ(r.at("source"), "rule-based");
    EXPECT_TRUE(r.at("fallback_reason").is_null());
    EXPECT_TRUE(r.at("sub_context").is_array());
  }
  EXPECT_EQ(read_jsonl(path("sub.jsonl")).size(), 20u);

  for (const char* mode : {"kg-semantic", "kg-lexical"}) {
    const auto out = path(std::string(mode) + ".jsonl");
    ASSERT_EQ(run("extract --mode " + std::string(mode) + " --k 1 --data " + data + " --out " +
                  out.string()),
              0);
    const auto recs = read_jsonl(out);
    ASSERT_EQ(recs.size(), 20u);
    for (const auto& r : recs) {
      EXPECT_GE(r.at("quadruples").size(), 1u);
      EXPECT_EQ(r.at("retrieved").size(), 1u);
      EXPECT_EQ(r.at("rephrased").size(), 1u);
    }
  }
  EXPECT_EQ(run("extract --mode graph --data " + data + " --out " + path("x.jsonl").string()), 2);
  EXPECT_EQ(run("extract --k 0 --data " + data + " --out " + path("x.jsonl").string()), 2);
}

TEST_F(CliTest, ExtractFallsBackWhenRemoteIsUnreachable) {
  const auto data = gen("d.jsonl", "--n 5 --seed 2");
  cli::write_text(path("remote.json"), json{{"endpoint", "http://127.0.0.1:1/v1/chat"},
                                            {"model", "m"},
                                            {"api_key_env", "ABSTAIN_CLI_TEST_KEY"},
                                            {"timeout_seconds", 1.0}}
                                           .dump());
  ::setenv("ABSTAIN_CLI_TEST_KEY", "secret", 1);
  ASSERT_EQ(run("extract --mode kg-lexical --remote-config " + path("remote.json").string() +
                " --data " + data + " --out " + path("kg.jsonl").string()),
            0);
  for (const auto& r : read_jsonl(path("kg.jsonl"))) {
    EXPECT_EQ(r.at("source"), "rule-based");
    ASSERT_TRUE(r.at("fallback_reason").is_string());
    EXPECT_FALSE(r.at("fallback_reason").get<std::string>().empty());
  }
  cli::write_text(path("remote_bad.json"), R"({"endpoint": "ftp://x", "model": "m"})");
  EXPECT_EQ(run("extract --remote-config " + path("remote_bad.json").string() + " --data " + data +
                " --out " + path("x.jsonl").string()),
            2);
}

}  // namespace
}  // namespace abstain
