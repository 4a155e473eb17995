#include "refswap/core.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cctype>
#include <cstring>

#include "refswap/errors.hpp"

namespace refswap {

namespace {

template <typename E, std::size_t N>
struct TokenTable {
  std::array<std::pair<E, std::string_view>, N> entries;

  std::string_view name(E v) const {
    for (const auto& [e, s] : entries) {
      if (e == v) return s;
    }
    return "?";
  }

  std::optional<E> find(std::string_view s) const {
    for (const auto& [e, name] : entries) {
      if (name == s) return e;
    }
    return std::nullopt;
  }
};

constexpr TokenTable<EntityType, 8> kEntityTypes{{{
    {EntityType::kPerson, "PERSON"},
    {EntityType::kLocation, "LOCATION"},
    {EntityType::kOrganization, "ORGANIZATION"},
    {EntityType::kDate, "DATE"},
    {EntityType::kNumeric, "NUMERIC"},
    {EntityType::kScientificTerm, "SCIENTIFIC_TERM"},
    {EntityType::kCreativeWork, "CREATIVE_WORK"},
    {EntityType::kOther, "OTHER"},
}}};

constexpr TokenTable<DatasetId, 5> kDatasets{{{
    {DatasetId::kNqOpen, "nq_open"},
    {DatasetId::kPopQa, "popqa"},
    {DatasetId::kSciQ, "sciq"},
    {DatasetId::kFreshQa, "freshqa"},
    {DatasetId::kCustom, "custom"},
}}};

constexpr TokenTable<Freshness, 3> kFreshness{{{
    {Freshness::kNeverChanging, "never_changing"},
    {Freshness::kSlowChanging, "slow_changing"},
    {Freshness::kFastChanging, "fast_changing"},
}}};

constexpr TokenTable<SwapStrategy, 5> kSwapStrategies{{{
    {SwapStrategy::kTypePreserving, "type_preserving"},
    {SwapStrategy::kTypeChanging, "type_changing"},
    {SwapStrategy::kPopularityHigh, "popularity_high"},
    {SwapStrategy::kPopularityLow, "popularity_low"},
    {SwapStrategy::kEvaluatorKnowledge, "evaluator_knowledge"},
}}};

constexpr TokenTable<ReviewStage, 4> kStages{{{
    {ReviewStage::kNer, "ner"},
    {ReviewStage::kSwap, "swap"},
    {ReviewStage::kCandidateO, "candidate_o"},
    {ReviewStage::kCandidateS, "candidate_s"},
}}};

constexpr TokenTable<ReviewState, 4> kStates{{{
    {ReviewState::kPending, "pending"},
    {ReviewState::kAccepted, "accepted"},
    {ReviewState::kRejected, "rejected"},
    {ReviewState::kEdited, "edited"},
}}};

constexpr TokenTable<Polarity, 2> kPolarities{{{
    {Polarity::kOriginal, "o"},
    {Polarity::kSwapped, "s"},
}}};

constexpr TokenTable<Label, 2> kLabels{{{
    {Label::kCorrect, "Correct"},
    {Label::kIncorrect, "Incorrect"},
}}};

constexpr TokenTable<Grade, 4> kGrades{{{
    {Grade::kA, "A"},
    {Grade::kB, "B"},
    {Grade::kC, "C"},
    {Grade::kUnparseable, "UNPARSEABLE"},
}}};

template <typename Table>
auto parse_or_throw(const Table& table, std::string_view s, const char* what) {
  if (auto v = table.find(s)) return *v;
  throw ValidationError(std::string("unknown ") + what + " '" + std::string(s) +
                        "'");
}

// Lowercase ASCII with '-' and ' ' folded to '_', for lenient enum parsing.
std::string fold_token(std::string_view s, bool upper) {
  std::string out = trim(s);
  for (char& c : out) {
    if (c == '-' || c == ' ') c = '_';
    c = upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
              : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool is_separator(UChar32 cp) {
  return u_isUWhiteSpace(cp) || u_charType(cp) == U_CONTROL_CHAR;
}

bool is_punctuation(UChar32 cp) {
  if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
  return u_ispunct(cp);
}

bool is_article(std::string_view token) {
  return token == "a" || token == "an" || token == "the";
}

std::string normalize_pass(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFKC unavailable");

  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u = nfkc->normalize(u, status);
  u.toLower(icu::Locale::getRoot());
  u = nfkc->normalize(u, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");

  std::vector<std::string> tokens;
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string utf8;
    current.toUTF8String(utf8);
    tokens.push_back(std::move(utf8));
    current.remove();
  };
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    UChar32 cp = u.char32At(i);
    if (is_separator(cp)) {
      flush();
    } else if (!is_punctuation(cp)) {
      current.append(cp);
    }
  }
  flush();

  std::size_t first = 0;
  while (tokens.size() - first > 1 && is_article(tokens[first])) ++first;

  std::string out;
  for (std::size_t i = first; i < tokens.size(); ++i) {
    if (!out.empty()) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace

std::string_view to_string(EntityType v) { return kEntityTypes.name(v); }
std::string_view to_string(DatasetId v) { return kDatasets.name(v); }
std::string_view to_string(Freshness v) { return kFreshness.name(v); }
std::string_view to_string(SwapStrategy v) { return kSwapStrategies.name(v); }
std::string_view to_string(ReviewStage v) { return kStages.name(v); }
std::string_view to_string(ReviewState v) { return kStates.name(v); }
std::string_view to_string(Polarity v) { return kPolarities.name(v); }
std::string_view to_string(Label v) { return kLabels.name(v); }
std::string_view to_string(Grade v) { return kGrades.name(v); }

EntityType entity_type_from_string(std::string_view s) {
  return parse_entity_type_strict(s).value_or(EntityType::kOther);
}

std::optional<EntityType> parse_entity_type_strict(std::string_view s) {
  return kEntityTypes.find(fold_token(s, /*upper=*/true));
}

DatasetId dataset_id_from_string(std::string_view s) {
  return parse_or_throw(kDatasets, s, "dataset_id");
}
Freshness freshness_from_string(std::string_view s) {
  return parse_or_throw(kFreshness, fold_token(s, /*upper=*/false),
                        "freshness");
}
SwapStrategy swap_strategy_from_string(std::string_view s) {
  return parse_or_throw(kSwapStrategies, s, "swap strategy");
}
ReviewStage review_stage_from_string(std::string_view s) {
  return parse_or_throw(kStages, s, "review stage");
}
ReviewState review_state_from_string(std::string_view s) {
  return parse_or_throw(kStates, s, "review state");
}
Polarity polarity_from_string(std::string_view s) {
  return parse_or_throw(kPolarities, s, "polarity");
}
Label label_from_string(std::string_view s) {
  return parse_or_throw(kLabels, s, "label");
}
Grade grade_from_string(std::string_view s) {
  return parse_or_throw(kGrades, s, "grade");
}

ReviewMap pending_review() {
  ReviewMap m;
  for (ReviewStage st : kAllReviewStages) m[st] = ReviewState::kPending;
  return m;
}

std::string trim(std::string_view s) {
  auto is_space = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

std::string normalize_answer(std::string_view text) {
  // Punctuation removal can bring a combining mark next to a new base
  // character, so a single pass is not always a fixpoint.
  std::string current = normalize_pass(text);
  for (int i = 0; i < 8; ++i) {
    std::string next = normalize_pass(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

bool contains_tokens(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + 1)) {
    bool left_ok = pos == 0 || haystack[pos - 1] == ' ';
    std::size_t end = pos + needle.size();
    bool right_ok = end == haystack.size() || haystack[end] == ' ';
    if (left_ok && right_ok) return true;
  }
  return false;
}

bool normalized_contains(std::string_view haystack, std::string_view needle) {
  return contains_tokens(normalize_answer(haystack), normalize_answer(needle));
}

bool same_answer(std::string_view a, std::string_view b) {
  return normalize_answer(a) == normalize_answer(b);
}

Label ground_truth_label(Polarity reference, Polarity candidate) {
  return reference == candidate ? Label::kCorrect : Label::kIncorrect;
}

std::vector<EvalTriplet> make_triplets(const MetaEvalInstance& instance) {
  for (const auto& [stage, state] : instance.review) {
    if (state == ReviewState::kRejected) {
      throw ReviewedOutError(instance.base.id);
    }
  }
  std::vector<EvalTriplet> out;
  out.reserve(kTripletOrder.size());
  for (const auto& [a, b] : kTripletOrder) {
    out.push_back({instance.base.id, a, b, ground_truth_label(a, b)});
  }
  return out;
}

std::string check_invariants(const QaInstance& instance) {
  if (trim(instance.id).empty()) return "id must be non-empty";
  if (trim(instance.question).empty()) return "question must be non-empty";
  if (trim(instance.original_reference).empty()) {
    return "original_reference must be non-empty";
  }
  if (instance.freshness && instance.dataset_id != DatasetId::kFreshQa) {
    return "freshness is only defined for freshqa instances";
  }
  return {};
}

std::string check_invariants(const QaInstance& owner, const SwapRecord& swap) {
  if (trim(swap.swapped_reference).empty()) {
    return "swapped_reference must be non-empty";
  }
  if (same_answer(swap.swapped_reference, owner.original_reference)) {
    return "swapped_reference must differ from original_reference under "
           "normalization";
  }
  bool popularity = swap.strategy == SwapStrategy::kPopularityHigh ||
                    swap.strategy == SwapStrategy::kPopularityLow;
  if (popularity && owner.entity_type != EntityType::kPerson) {
    return "popularity swaps require a PERSON instance";
  }
  bool donor_ok = false;
  switch (swap.strategy) {
    case SwapStrategy::kTypePreserving:
    case SwapStrategy::kTypeChanging:
      donor_ok = std::holds_alternative<DonorInstanceId>(swap.donor);
      break;
    case SwapStrategy::kPopularityHigh:
    case SwapStrategy::kPopularityLow:
      donor_ok = std::holds_alternative<PopularityEntryName>(swap.donor);
      break;
    case SwapStrategy::kEvaluatorKnowledge:
      donor_ok = std::holds_alternative<EvaluatorModelId>(swap.donor);
      break;
  }
  if (!donor_ok) return "donor kind does not match swap strategy";
  return {};
}

std::string check_invariants(const MetaEvalInstance& instance) {
  if (auto e = check_invariants(instance.base); !e.empty()) return e;
  if (auto e = check_invariants(instance.base, instance.swap); !e.empty()) {
    return e;
  }
  if (trim(instance.candidate_original).empty() ||
      trim(instance.candidate_swapped).empty()) {
    return "candidates must be non-empty";
  }
  if (!normalized_contains(instance.candidate_original,
                           instance.base.original_reference)) {
    return "candidate_original is not aligned with original_reference";
  }
  if (!normalized_contains(instance.candidate_swapped,
                           instance.swap.swapped_reference)) {
    return "candidate_swapped is not aligned with swapped_reference";
  }
  return {};
}

}  // namespace refswap
