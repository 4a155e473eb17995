#include <gtest/gtest.h>

#include <fstream>

#include "refswap/config.hpp"
#include "refswap/pipeline.hpp"
#include "refswap/rng.hpp"
#include "refswap/swap.hpp"
#include "testing.hpp"

namespace refswap {
namespace {

using testing::synthetic_config;
using testing::TempDir;
namespace fs = std::filesystem;

RunConfig config_in(const TempDir& dir, const json& extra = json::object()) {
  return parse_run_config(synthetic_config(dir / "run", extra), dir.path());
}

void run_through(const RunConfig& cfg, Stage last) {
  for (Stage s : {Stage::kIngest, Stage::kAnnotate, Stage::kSwap, Stage::kGenerate,
                  Stage::kJudge, Stage::kScore, Stage::kReport, Stage::kFlips}) {
    run_stage(s, cfg);
    if (s == last) return;
  }
}

TEST(Pipeline, MissingPrerequisiteNamesProducer) {
  TempDir dir;
  RunConfig cfg = config_in(dir);
  try {
    run_stage(Stage::kScore, cfg);
    FAIL() << "expected PrerequisiteError";
  } catch (const PrerequisiteError& e) {
    EXPECT_NE(e.missing().find("verdicts.jsonl"), std::string::npos);
    EXPECT_EQ(e.producer(), "judge");
  }
  EXPECT_EQ(producer_of("swaps.jsonl"), "swap");
  EXPECT_EQ(producer_of("nothing.txt"), "");
}

TEST(Pipeline, SecondRunSkipsUntilInputsOrConfigChange) {
  TempDir dir;
  RunConfig cfg = config_in(dir);
  run_through(cfg, Stage::kAnnotate);
  EXPECT_FALSE(run_stage(Stage::kSwap, cfg).skipped);
  std::string first = read_file(cfg.output_dir / "swaps.jsonl");
  EXPECT_TRUE(run_stage(Stage::kSwap, cfg).skipped);
  EXPECT_FALSE(run_stage(Stage::kSwap, cfg, StageOptions{true, std::nullopt}).skipped);
  EXPECT_EQ(read_file(cfg.output_dir / "swaps.jsonl"), first);

  RunConfig other_seed = config_in(dir, {{"run_seed", 8}});
  EXPECT_FALSE(run_stage(Stage::kSwap, other_seed).skipped);
  EXPECT_NE(read_file(cfg.output_dir / "swaps.jsonl"), first);
}

TEST(Pipeline, TamperedOutputIsRebuilt) {
  TempDir dir;
  RunConfig cfg = config_in(dir);
  run_stage(Stage::kIngest, cfg);
  std::string good = read_file(cfg.output_dir / "instances.jsonl");
  std::ofstream(cfg.output_dir / "instances.jsonl") << "tampered\n";
  EXPECT_FALSE(run_stage(Stage::kIngest, cfg).skipped);
  EXPECT_EQ(read_file(cfg.output_dir / "instances.jsonl"), good);
}

TEST(Pipeline, ManifestRecordsEveryStage) {
  TempDir dir;
  RunConfig cfg = config_in(dir);
  run_through(cfg, Stage::kGenerate);
  auto lines = read_jsonl<json>(cfg.output_dir / kManifestFile);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[2]["stage"], "swap");
  EXPECT_EQ(lines[2]["run_seed"], 7);
  EXPECT_TRUE(lines[2]["outputs"].contains("swaps.jsonl"));
  EXPECT_TRUE(lines[2]["config"].contains("swap"));
  EXPECT_EQ(lines[3]["counts"]["triplets"], 400);
}

TEST(Pipeline, SameConfigReproducesArtifactsByteForByte) {
  TempDir a, b;
  RunConfig ca = config_in(a), cb = config_in(b);
  run_through(ca, Stage::kScore);
  run_through(cb, Stage::kScore);
  for (const char* f : {"instances.jsonl", "annotated.jsonl", "swaps.jsonl",
                        "meta_instances.jsonl", "triplets.jsonl", "verdicts.jsonl",
                        "report.json"}) {
    EXPECT_EQ(read_file(ca.output_dir / f), read_file(cb.output_dir / f)) << f;
  }
}

TEST(Pipeline, ReferenceFaithfulEndToEnd) {
  TempDir dir;
  RunConfig cfg = config_in(dir, {{"judge", {{"strategies", {"standard", "cot"}}}}});
  run_through(cfg, Stage::kFlips);
  json report = json::parse(read_file(cfg.output_dir / "report.json"));
  ASSERT_EQ(report["reports"].size(), 2u);
  for (const auto& r : report["reports"]) {
    EXPECT_EQ(r["acc_o"], 1.0);
    EXPECT_EQ(r["acc_s"], 1.0);
    EXPECT_EQ(r["n"], 100);
  }
  auto verdicts = read_jsonl<Verdict>(cfg.output_dir / "verdicts.jsonl");
  EXPECT_EQ(verdicts.size(), 4u * 100u * 2u);
  EXPECT_TRUE(fs::exists(cfg.output_dir / "report.md"));
  EXPECT_TRUE(read_jsonl<json>(cfg.output_dir / "flips.jsonl").empty());
}

TEST(Pipeline, SelfConsistencySampleCounts) {
  TempDir dir;
  RunConfig cfg = config_in(dir, {{"judge", {{"strategies", {"self_consistency"}},
                                             {"sc_k", 3}}}});
  run_through(cfg, Stage::kJudge);
  EXPECT_EQ(read_jsonl<Verdict>(cfg.output_dir / "verdicts.jsonl").size(), 400u);
  EXPECT_EQ(read_jsonl<Verdict>(cfg.output_dir / "samples.jsonl").size(), 1200u);
}

TEST(Pipeline, PopularitySwapsUseTheList) {
  TempDir dir;
  RunConfig cfg = config_in(dir, {{"swap", {{"strategy", "popularity_low"},
                                            {"popularity_k", 10}}}});
  run_stage(Stage::kIngest, cfg);
  run_stage(Stage::kAnnotate, cfg);
  run_stage(Stage::kPopularityBuild, cfg);
  run_stage(Stage::kSwap, cfg);
  auto list = popularity_list_from_csv(read_file(cfg.output_dir / "popularity_low.csv"),
                                       PopularityBucket::kLow);
  EXPECT_EQ(list.entries.size(), 10u);
  auto swaps = read_jsonl<SwappedInstance>(cfg.output_dir / "swaps.jsonl");
  EXPECT_EQ(swaps.size(), 40u);  // PERSON instances only
  for (const auto& s : swaps) {
    const auto& name = std::get<PopularityEntryName>(s.swap.donor).value;
    EXPECT_TRUE(std::any_of(list.entries.begin(), list.entries.end(),
                            [&](const PopularityEntry& e) { return e.name == name; }));
  }
}

TEST(Pipeline, OnlyIdsReswapTouchesJustThoseIds) {
  TempDir dir;
  RunConfig cfg = config_in(dir);
  run_through(cfg, Stage::kSwap);
  auto before = read_jsonl<SwappedInstance>(cfg.output_dir / "swaps.jsonl");
  std::ofstream(dir / "ids.txt") << "popqa:s003\npopqa:s050\n";

  EXPECT_THROW(run_stage(Stage::kSwap, cfg, StageOptions{false, dir / "ids.txt"}),
               ValidationError);  // attempt 0 would redraw the same donors
  RunConfig retry = config_in(dir, {{"swap", {{"attempt", 1}}}});
  run_stage(Stage::kSwap, retry, StageOptions{false, dir / "ids.txt"});
  auto after = read_jsonl<SwappedInstance>(cfg.output_dir / "swaps.jsonl");
  ASSERT_EQ(after.size(), before.size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < after.size(); ++i) {
    bool targeted = after[i].base.id == "popqa:s003" || after[i].base.id == "popqa:s050";
    if (!targeted) EXPECT_EQ(after[i], before[i]);
    if (after[i].swap != before[i].swap) ++changed;
    if (targeted) EXPECT_EQ(after[i].swap.seed, derive_instance_seed(7, after[i].base.id, 1));
  }
  EXPECT_LE(changed, 2u);
}

TEST(Pipeline, SamplingAndFalsePremiseFilter) {
  TempDir dir;
  json ds = {{"path", testing::fixture("freshqa_like.csv").string()},
             {"dataset_id", "freshqa"},
             {"skip_leading_rows", 2},
             {"exclude_false_premise", true},
             {"sample_n", 20},
             {"field_map",
              {{"question_field", "question"}, {"answer_field", "answer_0"},
               {"id_field", "id"}, {"freshness_field", "fact_type"},
               {"false_premise_field", "false_premise"}}}};
  RunConfig cfg = config_in(dir, {{"datasets", json::array({ds})}});
  auto outcome = run_stage(Stage::kIngest, cfg);
  auto kept = read_jsonl<QaInstance>(cfg.output_dir / "instances.jsonl");
  EXPECT_EQ(kept.size(), 20u);
  for (const auto& q : kept) EXPECT_FALSE(q.false_premise.value_or(false));
  EXPECT_EQ(outcome.counts["datasets"]["freshqa_like.csv"]["false_premise_removed"], 12);
}

}  // namespace
}  // namespace refswap
