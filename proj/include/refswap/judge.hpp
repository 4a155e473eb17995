#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "refswap/backend.hpp"
#include "refswap/core.hpp"
#include "refswap/prompts.hpp"

namespace refswap {

enum class StrategyId { kStandard, kDirect, kCot, kSelfConsistency, kCotSelfConsistency };

std::string_view to_string(StrategyId id);
StrategyId strategy_id_from_string(std::string_view s);

struct PromptStrategy {
  StrategyId id = StrategyId::kStandard;
  int k = 1;
  double sc_temperature = 0.6;

  /// Non-SC strategies get k = 1; SC strategies get sc_k samples (default 5).
  static PromptStrategy make(StrategyId id, int sc_k = 5, double sc_temperature = 0.6);

  bool self_consistent() const {
    return id == StrategyId::kSelfConsistency || id == StrategyId::kCotSelfConsistency;
  }
  /// 0 for single-sample strategies, sc_temperature otherwise.
  double temperature() const { return self_consistent() ? sc_temperature : 0.0; }
  std::string_view template_name() const;
  std::string name() const { return std::string(to_string(id)); }
};

/// Question, reference and candidate resolved for one (a, b) pairing.
struct ResolvedTriplet {
  EvalTriplet triplet;
  std::string question;
  std::string reference;
  std::string candidate;
};

ResolvedTriplet resolve(const MetaEvalInstance& instance, const EvalTriplet& triplet);

std::string render_prompt(const ResolvedTriplet& triplet, const PromptStrategy& strategy,
                          const PromptLibrary& prompts);

/// Last standalone A/B/C letter in the output; UNPARSEABLE when there is none.
Grade parse_grade(std::string_view raw_output);

/// A -> Correct; B, C, UNPARSEABLE -> Incorrect. UNPARSEABLE bumps the counter.
Label grade_to_label(Grade grade, std::atomic<std::size_t>* parse_failures = nullptr);

/// Strict majority wins; an exact tie is Incorrect. Empty input throws
/// ArgumentError.
Label aggregate_majority(std::span<const Label> labels);

/// SHA-256 (hex) over a length-prefixed encoding of
/// (judge_id, prompt, temperature, max_tokens, sample_index):
///   "refswap-cache-v1\n"
///   "judge_id:<len>:<judge_id>\n" "prompt:<len>:<prompt>\n"
///   "temperature:<shortest round-trip decimal>\n"
///   "max_tokens:<int>\n" "sample_index:<int>\n"
std::string cache_key(std::string_view judge_id, std::string_view prompt,
                      const SamplingParams& params);

/// Content-addressed response cache: one <key>.json blob per completion,
/// written atomically. Concurrent writers of the same key are idempotent.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, std::string_view judge_id,
           const SamplingParams& params, const std::string& output);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct JudgeCounters {
  std::atomic<std::size_t> backend_calls{0};
  std::atomic<std::size_t> cache_hits{0};
  std::atomic<std::size_t> parse_failures{0};
};

struct JudgeOptions {
  int max_tokens = 1024;
  RetryPolicy retry;
  ResponseCache* cache = nullptr;
};

struct TripletJudgement {
  Verdict verdict;               // aggregated
  std::vector<Verdict> samples;  // one per sample_index
};

/// Samples the judge k times (temperature 0 for k = 1) and aggregates. For
/// self-consistency the aggregated verdict has sample_index 0, raw_output
/// listing the sample grades ("A,A,B,B,B") and parsed_grade A when the
/// majority label is Correct, otherwise the most frequent non-A grade.
/// Transport failure after retries throws TransportError.
TripletJudgement judge_triplet(const ResolvedTriplet& triplet, ModelBackend& judge,
                               const PromptStrategy& strategy,
                               const PromptLibrary& prompts, const JudgeOptions& options,
                               JudgeCounters* counters = nullptr);

struct JudgeFailure {
  EvalTriplet triplet;
  std::string judge_id;
  std::string strategy_id;
  std::string error;
};

void to_json(json& j, const JudgeFailure& v);

struct JudgeRunResult {
  std::vector<Verdict> verdicts;  // judge, strategy, instance, triplet order
  std::vector<Verdict> samples;
  std::vector<JudgeFailure> failures;
  std::vector<EvalTriplet> triplets;  // every triplet emitted, instance order
  std::size_t reviewed_out = 0;
};

/// Judges every triplet of every non-rejected instance with every judge and
/// strategy, on at most `parallelism` worker threads.
JudgeRunResult run_judging(const std::vector<MetaEvalInstance>& instances,
                           const std::vector<ModelBackend*>& judges,
                           const std::vector<PromptStrategy>& strategies,
                           const PromptLibrary& prompts, const JudgeOptions& options,
                           std::size_t parallelism, JudgeCounters* counters = nullptr);

}  // namespace refswap
