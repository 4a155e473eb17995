#include <gtest/gtest.h>

#include <fstream>

#include "refswap/review.hpp"
#include "testing.hpp"

namespace refswap {
namespace {

using testing::make_meta;
using testing::TempDir;

std::vector<MetaEvalInstance> items(int n) {
  std::vector<MetaEvalInstance> out;
  for (int i = 0; i < n; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "q%02d", i);
    out.push_back(make_meta(id, std::string("Orig Name ") + id, std::string("Swap Name ") + id));
  }
  return out;
}

ReviewDecision decide(const std::string& id, ReviewStage stage, ReviewState state,
                      std::optional<std::string> edit = std::nullopt) {
  return ReviewDecision{id, stage, state, std::move(edit), "tester", ""};
}

void accept_all(ReviewStore& store, const std::string& id) {
  for (ReviewStage st : kAllReviewStages) store.submit(decide(id, st, ReviewState::kAccepted));
}

TEST(ReviewStore, FreshItemsArePending) {
  ReviewStore store(items(12), "");
  auto page = store.list(ReviewStage::kSwap, StatusFilter::kPending, "", 50);
  EXPECT_EQ(page.items.size(), 12u);
  EXPECT_FALSE(page.next_cursor);
  EXPECT_EQ(store.list(std::nullopt, StatusFilter::kAny, "", 100).items.size(), 48u);
}

TEST(ReviewStore, AcceptingFiveLeavesSevenPending) {
  ReviewStore store(items(12), "");
  for (int i = 0; i < 5; ++i) {
    store.submit(decide(items(12)[i].base.id, ReviewStage::kSwap, ReviewState::kAccepted));
  }
  EXPECT_EQ(store.list(ReviewStage::kSwap, StatusFilter::kPending, "", 50).items.size(), 7u);
  EXPECT_EQ(store.list(ReviewStage::kSwap, StatusFilter::kAccepted, "", 50).items.size(), 5u);
  EXPECT_EQ(store.list(ReviewStage::kNer, StatusFilter::kPending, "", 50).items.size(), 12u);
}

TEST(ReviewStore, LatestDecisionWinsAndLogKeepsBoth) {
  ReviewStore store(items(3), "");
  store.submit(decide("q01", ReviewStage::kNer, ReviewState::kRejected));
  store.submit(decide("q01", ReviewStage::kNer, ReviewState::kAccepted));
  EXPECT_EQ(store.log().size(), 2u);
  EXPECT_EQ(store.latest().at({"q01", ReviewStage::kNer}).decision, ReviewState::kAccepted);
  EXPECT_EQ(replay(store.log()), store.latest());
}

TEST(ReviewStore, PaginationCoversEveryItemOnce) {
  ReviewStore store(items(7), "");
  std::vector<std::string> seen;
  std::string cursor;
  for (;;) {
    auto page = store.list(ReviewStage::kNer, StatusFilter::kAny, cursor, 3);
    for (const auto& it : page.items) seen.push_back(it.instance_id);
    if (!page.next_cursor) break;
    cursor = *page.next_cursor;
  }
  ASSERT_EQ(seen.size(), 7u);
  EXPECT_TRUE(std::is_sorted(seen.begin(), seen.end()));
  EXPECT_THROW(store.list(ReviewStage::kNer, StatusFilter::kAny, "bogus", 3), ArgumentError);
}

TEST(ReviewStore, UnknownInstanceAndPendingDecision) {
  ReviewStore store(items(1), "");
  EXPECT_THROW(store.submit(decide("nope", ReviewStage::kNer, ReviewState::kAccepted)),
               NotFoundError);
  json pending = {{"instance_id", "q00"}, {"stage", "ner"}, {"decision", "pending"}};
  EXPECT_THROW(pending.get<ReviewDecision>(), ValidationError);
}

TEST(ReviewStore, EditsAreValidated) {
  ReviewStore store(items(1), "");
  // A swapped reference equal to the original under normalization.
  EXPECT_THROW(store.submit(decide("q00", ReviewStage::kSwap, ReviewState::kEdited,
                                   std::string("orig name q00!"))),
               ValidationError);
  EXPECT_THROW(store.submit(decide("q00", ReviewStage::kNer, ReviewState::kEdited,
                                   std::string("SPACESHIP"))),
               ValidationError);
  EXPECT_THROW(store.submit(decide("q00", ReviewStage::kCandidateS, ReviewState::kEdited,
                                   std::string("Unrelated sentence."))),
               ValidationError);
  EXPECT_TRUE(store.log().empty());
  auto stored = store.submit(decide("q00", ReviewStage::kNer, ReviewState::kEdited,
                                    std::string("ORGANIZATION")));
  EXPECT_FALSE(stored.timestamp.empty());
}

TEST(ReviewStore, SwapEditFlowsIntoExport) {
  ReviewStore store(items(1), "");
  accept_all(store, "q00");
  store.submit(decide("q00", ReviewStage::kSwap, ReviewState::kEdited, std::string("Zed Other")));
  store.submit(decide("q00", ReviewStage::kCandidateS, ReviewState::kEdited,
                      std::string("It was Zed Other.")));
  auto out = store.export_reviewed();
  ASSERT_EQ(out.instances.size(), 1u);
  EXPECT_EQ(out.instances[0].swap.swapped_reference, "Zed Other");
  EXPECT_EQ(out.instances[0].candidate_swapped, "It was Zed Other.");
  EXPECT_EQ(out.instances[0].review.at(ReviewStage::kSwap), ReviewState::kEdited);
}

TEST(ReviewStore, StaleCandidateAfterSwapEditIsInvalid) {
  ReviewStore store(items(1), "");
  accept_all(store, "q00");
  store.submit(decide("q00", ReviewStage::kSwap, ReviewState::kEdited, std::string("Zed Other")));
  auto out = store.export_reviewed();
  EXPECT_TRUE(out.instances.empty());
  ASSERT_EQ(out.invalid.size(), 1u);
  EXPECT_EQ(out.invalid[0].first, "q00");
}

TEST(ReviewStore, RejectingOneOfTenExportsNine) {
  auto all = items(10);
  ReviewStore store(all, "");
  for (const auto& m : all) accept_all(store, m.base.id);
  store.submit(decide("q04", ReviewStage::kCandidateO, ReviewState::kRejected));
  auto out = store.export_reviewed();
  ASSERT_EQ(out.instances.size(), 9u);
  for (const auto& m : out.instances) {
    EXPECT_NE(m.base.id, "q04");
    EXPECT_EQ(check_invariants(m), "");
  }
}

TEST(ReviewStore, PendingOnlyWithFlag) {
  ReviewStore store(items(4), "");
  accept_all(store, "q00");
  store.submit(decide("q01", ReviewStage::kNer, ReviewState::kRejected));
  EXPECT_EQ(store.export_reviewed(false).instances.size(), 1u);
  EXPECT_EQ(store.export_reviewed(true).instances.size(), 3u);
}

TEST(ReviewStore, LogSurvivesRestart) {
  TempDir dir;
  std::filesystem::path log = dir / "decisions.jsonl";
  {
    ReviewStore store(items(3), log);
    store.submit(decide("q00", ReviewStage::kNer, ReviewState::kRejected));
    store.submit(decide("q02", ReviewStage::kSwap, ReviewState::kAccepted));
    store.submit(decide("q00", ReviewStage::kNer, ReviewState::kAccepted));
  }
  ReviewStore again(items(3), log);
  EXPECT_EQ(again.log().size(), 3u);
  EXPECT_EQ(again.latest(), replay(read_jsonl<ReviewDecision>(log)));
  EXPECT_EQ(again.latest().at({"q00", ReviewStage::kNer}).decision, ReviewState::kAccepted);
  auto stats = again.stats();
  EXPECT_EQ(stats.instances, 3u);
  EXPECT_EQ(stats.decisions, 3u);
  EXPECT_EQ(stats.by_stage[ReviewStage::kSwap][ReviewState::kAccepted], 1u);
  EXPECT_EQ(stats.by_stage[ReviewStage::kSwap][ReviewState::kPending], 2u);
}

TEST(ReviewStore, DuplicateIdsRejected) {
  auto dup = items(2);
  dup[1].base.id = dup[0].base.id;
  EXPECT_THROW(ReviewStore(dup, ""), ValidationError);
}

}  // namespace
}  // namespace refswap
