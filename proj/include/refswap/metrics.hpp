#pragma once

// ACC^o / ACC^s / RPAG scoring of judge verdicts against the triplet labels.
//
// For reference polarity a, an instance counts toward N_a only when both of
// its (a, o) and (a, s) verdicts are present; a failed triplet therefore drops
// the instance from that polarity symmetrically.
//
//   ACC^a = (1 / 2 N_a) * sum_i sum_b [verdict_i^{a,b} == label^{a,b}]
//   RPAG  = ACC^o - ACC^s   (signed)

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "refswap/core.hpp"
#include "refswap/model_json.hpp"

namespace refswap {

/// Zero usable instances for a polarity. Reported, never written as NaN.
class UndefinedReportError : public Error {
 public:
  explicit UndefinedReportError(const std::string& what)
      : Error(ErrorKind::kArgument, what) {}
};

using Cell = std::pair<Polarity, Polarity>;  // (reference a, candidate b)

struct PolarityTally {
  std::size_t n = 0;          // instances with both b verdicts
  std::size_t correct_o = 0;  // correct (a, o) verdicts among them
  std::size_t correct_s = 0;  // correct (a, s) verdicts among them
};

/// Verdicts for one judge and strategy; mixing either is an ArgumentError, as
/// is a repeated (instance, a, b) key.
PolarityTally tally(std::span<const Verdict> verdicts, Polarity a);

double accuracy(std::span<const Verdict> verdicts, Polarity a);

/// Signed difference; inputs outside [0, 1] are an ArgumentError.
double rpag(double acc_o, double acc_s);

std::map<Cell, double> pairing_breakdown(std::span<const Verdict> verdicts);

/// Attributes used for slicing, taken from the meta-evaluation instances.
struct InstanceAttributes {
  DatasetId dataset_id = DatasetId::kCustom;
  SwapStrategy swap_strategy = SwapStrategy::kTypePreserving;
  std::optional<Freshness> freshness;
  std::optional<EntityType> entity_type;
};

using AttributeIndex = std::unordered_map<std::string, InstanceAttributes>;

AttributeIndex index_attributes(const std::vector<MetaEvalInstance>& instances);

enum class StratifyKey { kSwapStrategy, kDataset, kFreshness, kPopularityBucket, kEntityType };

std::string_view to_string(StratifyKey k);
StratifyKey stratify_key_from_string(std::string_view s);

/// Slice name of an instance; "unspecified" when the attribute is absent.
std::string slice_of(const InstanceAttributes& attrs, StratifyKey key);

struct ScoreReport {
  std::string judge_id;
  std::string strategy_id;
  std::string dataset_id;     // "mixed" when verdicts span datasets
  std::string swap_strategy;  // "mixed" when verdicts span strategies
  std::size_t n = 0;          // instances with at least one verdict
  PolarityTally tally_o;
  PolarityTally tally_s;
  double acc_o = 0;
  double acc_s = 0;
  double rpag = 0;
  std::map<Cell, double> pairing;
  bool low_n = false;
  std::optional<std::string> undefined;  // set instead of accuracies
  std::map<std::string, std::map<std::string, ScoreReport>> strata;
};

void to_json(json& j, const ScoreReport& r);

/// Scores one judge/strategy verdict set. Undefined polarities are recorded in
/// `undefined` rather than thrown. low_n is set when min(N_o, N_s) < min_n.
ScoreReport score_report(std::span<const Verdict> verdicts, const AttributeIndex& attrs,
                         std::size_t min_n = 10);

/// Exhaustive, disjoint partition of verdicts by an instance attribute.
std::map<std::string, ScoreReport> stratify(std::span<const Verdict> verdicts,
                                            const AttributeIndex& attrs, StratifyKey key,
                                            std::size_t min_n = 10);

/// One report per (judge, strategy, dataset, swap strategy) group, each with
/// the requested strata attached.
std::vector<ScoreReport> score_all(const std::vector<Verdict>& verdicts,
                                   const AttributeIndex& attrs,
                                   const std::vector<StratifyKey>& strata,
                                   std::size_t min_n = 10);

struct FlipRecord {
  std::string instance_id;
  Polarity reference_polarity = Polarity::kOriginal;
  Polarity candidate_polarity = Polarity::kOriginal;
  std::string judge_id;
  std::string strategy1;
  std::string strategy2;
  Label ground_truth = Label::kCorrect;
  std::string raw_output1;
  std::string raw_output2;

  bool operator==(const FlipRecord&) const = default;
};

void to_json(json& j, const FlipRecord& v);

/// Triplets judged correctly under the first verdict set and incorrectly
/// under the second, in the first set's order. Both sets must cover exactly
/// the same (judge, instance, a, b) keys.
std::vector<FlipRecord> flip_analysis(std::span<const Verdict> first,
                                      std::span<const Verdict> second);

/// Deterministic subset of at most n flips, in original order.
std::vector<FlipRecord> sample_flips(const std::vector<FlipRecord>& flips, std::size_t n,
                                     std::uint64_t seed);

}  // namespace refswap
