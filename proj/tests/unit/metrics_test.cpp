#include <gtest/gtest.h>

#include "refswap/metrics.hpp"
#include "testing.hpp"

namespace refswap {
namespace {

using testing::make_meta;
using testing::make_verdict;
constexpr Polarity O = Polarity::kOriginal;
constexpr Polarity S = Polarity::kSwapped;
constexpr Label C = Label::kCorrect;
constexpr Label I = Label::kIncorrect;

// A verdict that is right (or wrong) for its triplet.
Verdict judged(const std::string& id, Polarity a, Polarity b, bool right,
               const std::string& strategy = "standard") {
  Label truth = ground_truth_label(a, b);
  Label said = right ? truth : (truth == C ? I : C);
  return make_verdict(id, a, b, said, "j", strategy);
}

TEST(Accuracy, ThreeOfFourCorrect) {
  std::vector<Verdict> v = {judged("q1", O, O, true), judged("q1", O, S, true),
                            judged("q2", O, O, true), judged("q2", O, S, false)};
  EXPECT_DOUBLE_EQ(accuracy(v, O), 0.75);
  auto t = tally(v, O);
  EXPECT_EQ(t.n, 2u);
  EXPECT_EQ(t.correct_o, 2u);
  EXPECT_EQ(t.correct_s, 1u);
}

TEST(Accuracy, InstanceNeedsBothCandidateVerdicts) {
  std::vector<Verdict> v = {judged("q1", O, O, true), judged("q1", O, S, true),
                            judged("q2", O, O, false),  // (o, s) failed
                            judged("q1", S, O, false), judged("q1", S, S, true)};
  EXPECT_DOUBLE_EQ(accuracy(v, O), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(v, S), 0.5);
}

TEST(Accuracy, UndefinedWithoutInstances) {
  std::vector<Verdict> v = {judged("q1", O, O, true)};
  EXPECT_THROW(accuracy(v, O), UndefinedReportError);
  EXPECT_THROW(accuracy(std::vector<Verdict>{}, S), UndefinedReportError);
}

TEST(Accuracy, RejectsMixedOrDuplicateInput) {
  std::vector<Verdict> mixed = {judged("q1", O, O, true), judged("q1", O, S, true, "cot")};
  EXPECT_THROW(tally(mixed, O), ArgumentError);
  std::vector<Verdict> dup = {judged("q1", O, O, true), judged("q1", O, O, false)};
  EXPECT_THROW(tally(dup, O), ArgumentError);
}

TEST(Rpag, SignedDifference) {
  EXPECT_DOUBLE_EQ(rpag(0.95, 0.60), 0.35);
  EXPECT_DOUBLE_EQ(rpag(0.5, 0.75), -0.25);
  EXPECT_THROW(rpag(1.2, 0.5), ArgumentError);
  EXPECT_THROW(rpag(0.5, -0.1), ArgumentError);
}

TEST(Pairing, CellAccuracies) {
  std::vector<Verdict> v = {judged("q1", O, O, true),  judged("q1", O, S, true),
                            judged("q1", S, O, false), judged("q1", S, S, false),
                            judged("q2", O, O, true),  judged("q2", O, S, false),
                            judged("q2", S, O, true),  judged("q2", S, S, false)};
  auto cells = pairing_breakdown(v);
  EXPECT_DOUBLE_EQ(cells.at({O, O}), 1.0);
  EXPECT_DOUBLE_EQ(cells.at({O, S}), 0.5);
  EXPECT_DOUBLE_EQ(cells.at({S, O}), 0.5);
  EXPECT_DOUBLE_EQ(cells.at({S, S}), 0.0);
}

std::vector<MetaEvalInstance> two_datasets() {
  auto a = make_meta("a", "Ada Lovelace", "Alan Turing");
  auto b = make_meta("b", "Paris", "Rome", EntityType::kLocation);
  b.base.dataset_id = DatasetId::kFreshQa;
  b.base.freshness = Freshness::kFastChanging;
  return {a, b};
}

std::vector<Verdict> all_right(const std::vector<std::string>& ids,
                               const std::string& judge = "j") {
  std::vector<Verdict> v;
  for (const auto& id : ids) {
    for (auto [a, b] : kTripletOrder) {
      v.push_back(make_verdict(id, a, b, ground_truth_label(a, b), judge));
    }
  }
  return v;
}

TEST(Stratify, DisjointExhaustiveWithUnspecified) {
  auto attrs = index_attributes(two_datasets());
  auto v = all_right({"a", "b"});
  auto by_fresh = stratify(v, attrs, StratifyKey::kFreshness, 1);
  ASSERT_EQ(by_fresh.size(), 2u);
  EXPECT_EQ(by_fresh.at("unspecified").n, 1u);
  EXPECT_EQ(by_fresh.at("fast_changing").n, 1u);
  auto by_type = stratify(v, attrs, StratifyKey::kEntityType, 1);
  EXPECT_EQ(by_type.at("PERSON").n + by_type.at("LOCATION").n, 2u);
  EXPECT_EQ(stratify_key_from_string("popularity_bucket"), StratifyKey::kPopularityBucket);
}

TEST(ScoreReport, LowNAndMixedLabels) {
  auto attrs = index_attributes(two_datasets());
  auto r = score_report(all_right({"a", "b"}), attrs, 10);
  EXPECT_TRUE(r.low_n);
  EXPECT_EQ(r.dataset_id, "mixed");
  EXPECT_EQ(r.swap_strategy, "type_preserving");
  EXPECT_DOUBLE_EQ(r.acc_o, 1.0);
  EXPECT_DOUBLE_EQ(r.rpag, 0.0);
  json j = r;
  EXPECT_EQ(j["n"], 2);
  EXPECT_EQ(j["pairing"]["so"], 1.0);
}

TEST(ScoreReport, UndefinedIsRecordedNotNan) {
  auto attrs = index_attributes(two_datasets());
  std::vector<Verdict> v = {make_verdict("a", O, O, C), make_verdict("a", O, S, I)};
  auto r = score_report(v, attrs, 1);
  ASSERT_TRUE(r.undefined);
  json j = r;
  EXPECT_FALSE(j.contains("rpag"));
  EXPECT_TRUE(j.contains("undefined"));
}

TEST(ScoreAll, GroupsByJudgeAndDataset) {
  auto attrs = index_attributes(two_datasets());
  auto v = all_right({"a", "b"}, "j1");
  auto v2 = all_right({"a"}, "j2");
  v.insert(v.end(), v2.begin(), v2.end());
  auto reports = score_all(v, attrs, {StratifyKey::kDataset}, 1);
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_EQ(reports[0].judge_id, "j1");
  EXPECT_EQ(reports[0].dataset_id, "custom");
  EXPECT_EQ(reports[1].dataset_id, "freshqa");
  EXPECT_EQ(reports[2].judge_id, "j2");
  EXPECT_EQ(reports[0].strata.at("dataset").size(), 1u);
  v.push_back(make_verdict("ghost", O, O, C, "j1"));
  EXPECT_THROW(score_all(v, attrs, {}, 1), ArgumentError);
}

// Eight triplets over two instances; strategy 1 is right on the first five,
// strategy 2 on triplets 1, 3, 5 and 6.
TEST(Flips, EightTripletFixture) {
  std::vector<Verdict> first, second;
  std::size_t k = 0;
  for (const char* id : {"q1", "q2"}) {
    for (auto [a, b] : kTripletOrder) {
      first.push_back(judged(id, a, b, k < 5, "standard"));
      second.push_back(judged(id, a, b, k == 1 || k == 3 || k == 5 || k == 6, "cot"));
      ++k;
    }
  }
  auto flips = flip_analysis(first, second);
  ASSERT_EQ(flips.size(), 3u);
  EXPECT_EQ(flips[0].instance_id, "q1");
  EXPECT_EQ(flips[0].reference_polarity, O);
  EXPECT_EQ(flips[0].candidate_polarity, O);
  EXPECT_EQ(flips[1].reference_polarity, S);
  EXPECT_EQ(flips[1].candidate_polarity, O);
  EXPECT_EQ(flips[2].instance_id, "q2");
  EXPECT_EQ(flips[2].ground_truth, C);
  EXPECT_EQ(flips[0].strategy1, "standard");
  EXPECT_EQ(flips[0].strategy2, "cot");

  EXPECT_EQ(sample_flips(flips, 10, 1).size(), 3u);
  auto two = sample_flips(flips, 2, 1);
  EXPECT_EQ(two.size(), 2u);
  EXPECT_EQ(two, sample_flips(flips, 2, 1));

  second.pop_back();
  EXPECT_THROW(flip_analysis(first, second), ArgumentError);
}

}  // namespace
}  // namespace refswap
