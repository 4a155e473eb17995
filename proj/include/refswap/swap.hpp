#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refswap/backend.hpp"
#include "refswap/core.hpp"
#include "refswap/prompts.hpp"

namespace refswap {

enum class PopularityBucket { kHigh, kLow };

std::string_view to_string(PopularityBucket b);
PopularityBucket popularity_bucket_from_string(std::string_view s);

struct PopularityEntry {
  std::string name;
  std::uint64_t pageviews = 0;
  bool operator==(const PopularityEntry&) const = default;
};

/// Top (high) or bottom (low) k PERSON names by pageviews.
struct PopularityList {
  std::vector<PopularityEntry> entries;
  PopularityBucket bucket = PopularityBucket::kHigh;
  std::size_t k = 0;
};

/// k most (high) or least (low) viewed distinct PERSON names. A name seen
/// several times keeps its largest pageview count. Ties are broken by
/// normalized name ascending. Throws ArgumentError when fewer than k names
/// qualify.
PopularityList build_popularity_list(const std::vector<QaInstance>& instances,
                                     std::size_t k, PopularityBucket bucket);

/// CSV with header "name,pageviews". Reading validates the ordering for the
/// given bucket and name distinctness.
std::string popularity_list_to_csv(const PopularityList& list);
PopularityList popularity_list_from_csv(std::string_view csv, PopularityBucket bucket);

// Type-preserving / type-changing swaps draw a donor uniformly from the
// eligible pool members with the per-instance seed
// derive_instance_seed(run_seed, instance.id, attempt): the donor index is the
// first SplitMix64(seed).below(|eligible|) draw. Eligible donors have an
// entity type, a different id, and an answer that differs from the instance's
// under normalization; TP additionally requires the same type and TC a
// different one. Throws SwapSkip when nothing is eligible.
SwapRecord swap_type_preserving(const QaInstance& instance,
                                const std::vector<QaInstance>& pool,
                                std::uint64_t run_seed, unsigned attempt = 0);
SwapRecord swap_type_changing(const QaInstance& instance,
                              const std::vector<QaInstance>& pool,
                              std::uint64_t run_seed, unsigned attempt = 0);

/// Uniform draw from list entries whose name differs from the original
/// reference; `pinned` forces a single entry instead. PERSON instances only.
SwapRecord swap_popularity(const QaInstance& instance, const PopularityList& list,
                           std::uint64_t run_seed,
                           const std::optional<std::string>& pinned = std::nullopt,
                           unsigned attempt = 0);

enum class EvaluatorOutcome { kSwapped, kAgreed, kUnevaluated };

struct EvaluatorSwapResult {
  EvaluatorOutcome outcome = EvaluatorOutcome::kAgreed;
  std::optional<SwapRecord> record;
  std::string prediction;
  std::string error;
};

/// Queries the evaluator with the QA prompt at temperature 0 and swaps in its
/// short answer when it disagrees with the original reference.
EvaluatorSwapResult swap_evaluator_knowledge(const QaInstance& instance,
                                             ModelBackend& qa_backend,
                                             const PromptLibrary& prompts,
                                             const RetryPolicy& retry);

struct SwapSkipEntry {
  std::string instance_id;
  std::string reason;
};

void to_json(json& j, const SwapSkipEntry& v);

struct SwapRunOptions {
  SwapStrategy strategy = SwapStrategy::kTypePreserving;
  std::uint64_t run_seed = 0;
  unsigned attempt = 0;
  const PopularityList* popularity = nullptr;       // popularity strategies
  std::optional<std::string> pinned_entity;         // popularity strategies
  ModelBackend* evaluator = nullptr;                // evaluator_knowledge
  const PromptLibrary* prompts = nullptr;           // evaluator_knowledge
  RetryPolicy retry;
  std::size_t parallelism = 8;
};

struct SwapRunResult {
  std::vector<SwappedInstance> swapped;
  std::vector<SwapSkipEntry> skips;
  std::size_t agreed = 0;       // evaluator_knowledge only
  std::size_t unevaluated = 0;  // evaluator_knowledge only
};

/// Applies one strategy to every instance. Dataset-internal strategies draw
/// donors only from the instance's own dataset. Output keeps input order.
SwapRunResult swap_all(const std::vector<QaInstance>& instances,
                       const SwapRunOptions& options);

}  // namespace refswap
