#include <gtest/gtest.h>

#include "refswap/annotate.hpp"
#include "testing.hpp"

namespace refswap {
namespace {

Gazetteer shipped() { return Gazetteer::load(REFSWAP_GAZETTEER_DIR); }

TEST(Heuristic, AnswerPatternsWin) {
  Gazetteer g = shipped();
  EXPECT_EQ(heuristic_annotate("When did it start?", "July 28, 1914", g), EntityType::kDate);
  EXPECT_EQ(heuristic_annotate("When was it built?", "1889", g), EntityType::kDate);
  EXPECT_EQ(heuristic_annotate("How many people live there?", "1889", g), EntityType::kNumeric);
  EXPECT_EQ(heuristic_annotate("Who knows?", "the 1920s", g), EntityType::kDate);
  EXPECT_EQ(heuristic_annotate("What is the height?", "8,849 metres", g), EntityType::kNumeric);
  EXPECT_EQ(heuristic_annotate("Who?", "twenty-one", g), EntityType::kNumeric);
  EXPECT_EQ(heuristic_annotate("When?", "44 BC", g), EntityType::kDate);
}

TEST(Heuristic, GazetteerBeforeQuestionCue) {
  Gazetteer g = shipped();
  EXPECT_EQ(heuristic_annotate("Who hosted the games?", "Paris", g), EntityType::kLocation);
  EXPECT_EQ(heuristic_annotate("Where did she work?", "NASA", g), EntityType::kOrganization);
  EXPECT_EQ(heuristic_annotate("What was the name?", "Gianluigi Buffon", g),
            EntityType::kPerson);
}

TEST(Heuristic, QuestionCueThenOther) {
  Gazetteer g;
  EXPECT_EQ(heuristic_annotate("Who was king when the war began?", "Zorbo Quint", g),
            EntityType::kPerson);
  EXPECT_EQ(heuristic_annotate("Where is Zorbo?", "Quintville", g), EntityType::kLocation);
  EXPECT_EQ(heuristic_annotate("What colour is it?", "blue", g), EntityType::kOther);
}

TEST(Gazetteer, NormalizedLookupAndMissingDir) {
  Gazetteer g;
  g.add(EntityType::kPerson, "The Edge");
  EXPECT_EQ(g.lookup("edge!"), EntityType::kPerson);
  EXPECT_FALSE(g.lookup("Bono"));
  EXPECT_GT(shipped().size(), 100u);
  EXPECT_THROW(Gazetteer::load("/nonexistent/gazetteer"), ValidationError);
}

TEST(EntityLabel, FirstTaxonomyToken) {
  EXPECT_EQ(parse_entity_label("PERSON"), EntityType::kPerson);
  EXPECT_EQ(parse_entity_label("The type is: LOCATION."), EntityType::kLocation);
  EXPECT_EQ(parse_entity_label("SCIENTIFIC_TERM"), EntityType::kScientificTerm);
  EXPECT_FALSE(parse_entity_label("no idea"));
}

TEST(ModelAnnotator, ParsesRepliesAndCountsUnparseable) {
  MockBackend backend("ner", MockJudgeSpec{MockKind::kScripted, std::nullopt,
                                           std::vector<std::string>{"PERSON", "garbage",
                                                                    "It is a LOCATION."}});
  RetryPolicy retry;
  retry.initial_backoff = std::chrono::milliseconds(0);
  ModelAnnotator a(backend, PromptLibrary::builtin(), retry);
  EXPECT_EQ(a.annotate("Who?", "Ada"), EntityType::kPerson);
  EXPECT_EQ(a.annotate("Who?", "Ada"), EntityType::kOther);
  EXPECT_EQ(a.annotate("Where?", "Rome"), EntityType::kLocation);
  EXPECT_EQ(a.unparseable(), 1u);
}

TEST(AnnotateAll, KeepsOrderTypesAndSourceLabels) {
  std::vector<QaInstance> in = {
      testing::make_qa("a", "When was it?", "1914", std::nullopt),
      testing::make_qa("b", "Who?", "Bob", EntityType::kOrganization),
      testing::make_qa("c", "Where?", "Paris", std::nullopt),
  };
  HeuristicAnnotator h(shipped());
  AnnotationReport report;
  auto out = annotate_all(in, h, 2, &report);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].id, "a");
  EXPECT_EQ(out[0].entity_type, EntityType::kDate);
  EXPECT_EQ(out[1].entity_type, EntityType::kOrganization);  // source label kept
  EXPECT_EQ(out[2].entity_type, EntityType::kLocation);
  EXPECT_EQ(report.counts[EntityType::kDate], 1u);
  EXPECT_TRUE(report.failures.empty());
}

TEST(AnnotateAll, TransportFailureBecomesOtherAndIsReported) {
  MockBackend backend("ner", MockJudgeSpec{MockKind::kScripted, std::nullopt,
                                           std::vector<std::string>{}});
  RetryPolicy retry;
  retry.initial_backoff = std::chrono::milliseconds(0);
  ModelAnnotator a(backend, PromptLibrary::builtin(), retry);
  AnnotationReport report;
  auto out = annotate_all({testing::make_qa("a", "Who?", "Ada", std::nullopt)}, a, 1, &report);
  EXPECT_EQ(out[0].entity_type, EntityType::kOther);
  ASSERT_EQ(report.failures.size(), 1u);
  EXPECT_EQ(report.failures[0].instance_id, "a");
}

}  // namespace
}  // namespace refswap
