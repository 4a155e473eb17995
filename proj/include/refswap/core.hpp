#pragma once

// Shared domain types for swapped-reference meta-evaluation, answer
// normalization and the triplet labeling rule.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace refswap {

enum class EntityType {
  kPerson,
  kLocation,
  kOrganization,
  kDate,
  kNumeric,
  kScientificTerm,
  kCreativeWork,
  kOther,
};

inline constexpr std::array<EntityType, 8> kAllEntityTypes = {
    EntityType::kPerson,         EntityType::kLocation,
    EntityType::kOrganization,   EntityType::kDate,
    EntityType::kNumeric,        EntityType::kScientificTerm,
    EntityType::kCreativeWork,   EntityType::kOther,
};

enum class DatasetId { kNqOpen, kPopQa, kSciQ, kFreshQa, kCustom };

enum class Freshness { kNeverChanging, kSlowChanging, kFastChanging };

enum class SwapStrategy {
  kTypePreserving,
  kTypeChanging,
  kPopularityHigh,
  kPopularityLow,
  kEvaluatorKnowledge,
};

enum class ReviewStage { kNer, kSwap, kCandidateO, kCandidateS };

inline constexpr std::array<ReviewStage, 4> kAllReviewStages = {
    ReviewStage::kNer, ReviewStage::kSwap, ReviewStage::kCandidateO,
    ReviewStage::kCandidateS};

enum class ReviewState { kPending, kAccepted, kRejected, kEdited };

enum class Polarity { kOriginal, kSwapped };

enum class Label { kCorrect, kIncorrect };

enum class Grade { kA, kB, kC, kUnparseable };

// Token <-> enum. Parsers throw ValidationError on unknown tokens, except
// entity_type_from_string which maps anything unknown to OTHER.
std::string_view to_string(EntityType v);
std::string_view to_string(DatasetId v);
std::string_view to_string(Freshness v);
std::string_view to_string(SwapStrategy v);
std::string_view to_string(ReviewStage v);
std::string_view to_string(ReviewState v);
std::string_view to_string(Polarity v);
std::string_view to_string(Label v);
std::string_view to_string(Grade v);

EntityType entity_type_from_string(std::string_view s);
std::optional<EntityType> parse_entity_type_strict(std::string_view s);
DatasetId dataset_id_from_string(std::string_view s);
Freshness freshness_from_string(std::string_view s);
SwapStrategy swap_strategy_from_string(std::string_view s);
ReviewStage review_stage_from_string(std::string_view s);
ReviewState review_state_from_string(std::string_view s);
Polarity polarity_from_string(std::string_view s);
Label label_from_string(std::string_view s);
Grade grade_from_string(std::string_view s);

struct QaInstance {
  std::string id;
  DatasetId dataset_id = DatasetId::kCustom;
  std::string question;
  std::string original_reference;
  std::optional<EntityType> entity_type;
  std::optional<Freshness> freshness;
  std::optional<std::uint64_t> popularity_pageviews;
  std::optional<bool> false_premise;

  bool operator==(const QaInstance&) const = default;
};

struct DonorInstanceId {
  std::string value;
  bool operator==(const DonorInstanceId&) const = default;
};
struct PopularityEntryName {
  std::string value;
  bool operator==(const PopularityEntryName&) const = default;
};
struct EvaluatorModelId {
  std::string value;
  bool operator==(const EvaluatorModelId&) const = default;
};

using Donor = std::variant<DonorInstanceId, PopularityEntryName, EvaluatorModelId>;

struct SwapRecord {
  SwapStrategy strategy = SwapStrategy::kTypePreserving;
  std::string swapped_reference;
  Donor donor;
  std::uint64_t seed = 0;

  bool operator==(const SwapRecord&) const = default;
};

// Intermediate artifact between the swap and candidate-generation stages.
struct SwappedInstance {
  QaInstance base;
  SwapRecord swap;

  bool operator==(const SwappedInstance&) const = default;
};

using ReviewMap = std::map<ReviewStage, ReviewState>;

ReviewMap pending_review();

struct MetaEvalInstance {
  QaInstance base;
  SwapRecord swap;
  std::string candidate_original;
  std::string candidate_swapped;
  ReviewMap review = pending_review();

  const std::string& reference(Polarity p) const {
    return p == Polarity::kOriginal ? base.original_reference
                                    : swap.swapped_reference;
  }
  const std::string& candidate(Polarity p) const {
    return p == Polarity::kOriginal ? candidate_original : candidate_swapped;
  }

  bool operator==(const MetaEvalInstance&) const = default;
};

struct EvalTriplet {
  std::string instance_id;
  Polarity reference_polarity = Polarity::kOriginal;
  Polarity candidate_polarity = Polarity::kOriginal;
  Label label = Label::kCorrect;

  bool operator==(const EvalTriplet&) const = default;
};

struct Verdict {
  std::string instance_id;
  Polarity reference_polarity = Polarity::kOriginal;
  Polarity candidate_polarity = Polarity::kOriginal;
  std::string judge_id;
  std::string strategy_id;
  int sample_index = 0;
  std::string raw_output;
  Grade parsed_grade = Grade::kUnparseable;
  Label label = Label::kIncorrect;

  bool operator==(const Verdict&) const = default;
};

/// SQuAD-style answer normalization: NFKC, lowercase, punctuation removed,
/// whitespace collapsed, leading articles ("a", "an", "the") stripped.
/// Idempotent. Operates on UTF-8.
std::string normalize_answer(std::string_view text);

/// True when the normalized needle occurs in the normalized haystack on
/// token boundaries. Both arguments are raw (unnormalized) text.
bool normalized_contains(std::string_view haystack, std::string_view needle);

/// Token-boundary containment over already-normalized strings.
bool contains_tokens(std::string_view normalized_haystack,
                     std::string_view normalized_needle);

bool same_answer(std::string_view a, std::string_view b);

Label ground_truth_label(Polarity reference, Polarity candidate);

/// The four (a, b) combinations in fixed order (o,o), (o,s), (s,o), (s,s).
/// Throws ReviewedOutError when any review stage is rejected.
std::vector<EvalTriplet> make_triplets(const MetaEvalInstance& instance);

inline constexpr std::array<std::pair<Polarity, Polarity>, 4> kTripletOrder = {{
    {Polarity::kOriginal, Polarity::kOriginal},
    {Polarity::kOriginal, Polarity::kSwapped},
    {Polarity::kSwapped, Polarity::kOriginal},
    {Polarity::kSwapped, Polarity::kSwapped},
}};

// Invariant checks. Each returns an empty string when the value is clean,
// otherwise a description of the violated rule.
std::string check_invariants(const QaInstance& instance);
std::string check_invariants(const QaInstance& owner, const SwapRecord& swap);
std::string check_invariants(const MetaEvalInstance& instance);

std::string trim(std::string_view s);

}  // namespace refswap
