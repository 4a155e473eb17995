#pragma once

#include <string>
#include <vector>

#include "refswap/backend.hpp"
#include "refswap/core.hpp"
#include "refswap/prompts.hpp"

namespace refswap {

enum class CandidateMode { kModel, kTemplate };

struct CandidateGenPolicy {
  CandidateMode mode = CandidateMode::kTemplate;
  int max_retries = 2;
};

/// The deterministic fallback sentence:
///   The answer to the question "<question>" is <reference>.
std::string template_candidate(std::string_view question, std::string_view reference);

struct CandidateStats {
  std::size_t model_accepted = 0;
  std::size_t template_fallbacks = 0;  // model mode only
};

/// One declarative sentence whose normalized form contains the normalized
/// reference. Model mode asks the backend (original or swapped prompt at
/// temperature 0) up to 1 + max_retries times and falls back to the template
/// when no reply is aligned or the backend fails.
std::string generate_candidate(std::string_view question, std::string_view reference,
                               Polarity polarity, const CandidateGenPolicy& policy,
                               ModelBackend* backend, const PromptLibrary& prompts,
                               const RetryPolicy& retry, CandidateStats* stats = nullptr);

/// Builds quintuples with both candidates and all review stages pending.
std::vector<MetaEvalInstance> attach_candidates(
    const std::vector<SwappedInstance>& inputs, const CandidateGenPolicy& policy,
    ModelBackend* backend, const PromptLibrary& prompts, const RetryPolicy& retry,
    std::size_t parallelism = 8, CandidateStats* stats = nullptr);

}  // namespace refswap
