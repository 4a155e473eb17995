#include "refswap/swap.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "refswap/ingest.hpp"
#include "refswap/rng.hpp"

namespace refswap {

namespace {

struct PreparedPool {
  const std::vector<QaInstance>* members = nullptr;
  std::vector<std::string> normalized;

  explicit PreparedPool(const std::vector<QaInstance>& pool) : members(&pool) {
    normalized.reserve(pool.size());
    for (const auto& q : pool) normalized.push_back(normalize_answer(q.original_reference));
  }
};

SwapRecord dataset_internal_swap(const QaInstance& instance, const PreparedPool& pool,
                                 std::uint64_t run_seed, unsigned attempt,
                                 bool preserve_type) {
  if (!instance.entity_type) {
    throw SwapSkip(instance.id, "instance has no entity type");
  }
  const std::string own = normalize_answer(instance.original_reference);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.members->size(); ++i) {
    const QaInstance& donor = (*pool.members)[i];
    if (!donor.entity_type || donor.id == instance.id) continue;
    if (pool.normalized[i] == own || pool.normalized[i].empty()) continue;
    bool same_type = *donor.entity_type == *instance.entity_type;
    if (same_type == preserve_type) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw SwapSkip(instance.id, preserve_type ? "no same-type donor"
                                              : "no different-type donor");
  }
  const std::uint64_t seed = derive_instance_seed(run_seed, instance.id, attempt);
  SplitMix64 rng(seed);
  const QaInstance& donor = (*pool.members)[eligible[rng.below(eligible.size())]];
  return SwapRecord{preserve_type ? SwapStrategy::kTypePreserving
                                  : SwapStrategy::kTypeChanging,
                    donor.original_reference, DonorInstanceId{donor.id}, seed};
}

}  // namespace

std::string_view to_string(PopularityBucket b) {
  return b == PopularityBucket::kHigh ? "high" : "low";
}

PopularityBucket popularity_bucket_from_string(std::string_view s) {
  if (s == "high") return PopularityBucket::kHigh;
  if (s == "low") return PopularityBucket::kLow;
  throw ValidationError("unknown popularity bucket '" + std::string(s) + "'");
}

PopularityList build_popularity_list(const std::vector<QaInstance>& instances,
                                     std::size_t k, PopularityBucket bucket) {
  if (k == 0) throw ArgumentError("popularity list size k must be positive");
  struct Candidate {
    std::string name;
    std::string key;
    std::uint64_t pageviews;
  };
  std::unordered_map<std::string, std::size_t> index;
  std::vector<Candidate> candidates;
  for (const auto& q : instances) {
    if (q.entity_type != EntityType::kPerson || !q.popularity_pageviews) continue;
    std::string key = normalize_answer(q.original_reference);
    if (key.empty()) continue;
    auto [it, inserted] = index.emplace(key, candidates.size());
    if (inserted) {
      candidates.push_back({q.original_reference, key, *q.popularity_pageviews});
    } else {
      auto& c = candidates[it->second];
      c.pageviews = std::max(c.pageviews, *q.popularity_pageviews);
    }
  }
  if (candidates.size() < k) {
    throw ArgumentError("need " + std::to_string(k) +
                        " distinct PERSON names with pageviews, found " +
                        std::to_string(candidates.size()));
  }
  std::sort(candidates.begin(), candidates.end(),
            [bucket](const Candidate& a, const Candidate& b) {
              if (a.pageviews != b.pageviews) {
                return bucket == PopularityBucket::kHigh ? a.pageviews > b.pageviews
                                                         : a.pageviews < b.pageviews;
              }
              return a.key < b.key;
            });
  PopularityList list;
  list.bucket = bucket;
  list.k = k;
  for (std::size_t i = 0; i < k; ++i) {
    list.entries.push_back({candidates[i].name, candidates[i].pageviews});
  }
  return list;
}

std::string popularity_list_to_csv(const PopularityList& list) {
  std::string out = "name,pageviews\n";
  for (const auto& e : list.entries) {
    std::string name = e.name;
    if (name.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : name) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      name = quoted + "\"";
    }
    out += name + "," + std::to_string(e.pageviews) + "\n";
  }
  return out;
}

PopularityList popularity_list_from_csv(std::string_view csv, PopularityBucket bucket) {
  std::vector<CsvRow> rows = parse_csv(csv);
  if (rows.empty() || rows[0].fields.size() != 2 || trim(rows[0].fields[0]) != "name" ||
      trim(rows[0].fields[1]) != "pageviews") {
    throw ValidationError("popularity list must start with header 'name,pageviews'");
  }
  PopularityList list;
  list.bucket = bucket;
  std::vector<std::string> keys;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.malformed || row.fields.size() != 2) {
      throw ValidationError("popularity list line " + std::to_string(row.line) +
                            ": expected name,pageviews");
    }
    PopularityEntry e;
    e.name = trim(row.fields[0]);
    try {
      std::size_t used = 0;
      e.pageviews = std::stoull(trim(row.fields[1]), &used);
    } catch (const std::exception&) {
      throw ValidationError("popularity list line " + std::to_string(row.line) +
                            ": bad pageviews");
    }
    std::string key = normalize_answer(e.name);
    if (key.empty() || std::find(keys.begin(), keys.end(), key) != keys.end()) {
      throw ValidationError("popularity list line " + std::to_string(row.line) +
                            ": empty or duplicate name '" + e.name + "'");
    }
    if (!list.entries.empty()) {
      const auto& prev = list.entries.back();
      bool ordered = bucket == PopularityBucket::kHigh ? prev.pageviews >= e.pageviews
                                                       : prev.pageviews <= e.pageviews;
      if (!ordered) {
        throw ValidationError("popularity list line " + std::to_string(row.line) +
                              ": entries out of order for bucket " +
                              std::string(to_string(bucket)));
      }
    }
    keys.push_back(std::move(key));
    list.entries.push_back(std::move(e));
  }
  list.k = list.entries.size();
  if (list.k == 0) throw ValidationError("popularity list is empty");
  return list;
}

SwapRecord swap_type_preserving(const QaInstance& instance,
                                const std::vector<QaInstance>& pool,
                                std::uint64_t run_seed, unsigned attempt) {
  return dataset_internal_swap(instance, PreparedPool(pool), run_seed, attempt, true);
}

SwapRecord swap_type_changing(const QaInstance& instance,
                              const std::vector<QaInstance>& pool,
                              std::uint64_t run_seed, unsigned attempt) {
  return dataset_internal_swap(instance, PreparedPool(pool), run_seed, attempt, false);
}

SwapRecord swap_popularity(const QaInstance& instance, const PopularityList& list,
                           std::uint64_t run_seed,
                           const std::optional<std::string>& pinned, unsigned attempt) {
  if (instance.entity_type != EntityType::kPerson) {
    throw SwapSkip(instance.id, "popularity swaps need a PERSON instance");
  }
  const std::string own = normalize_answer(instance.original_reference);
  const std::string pinned_key = pinned ? normalize_answer(*pinned) : std::string();
  std::vector<const PopularityEntry*> eligible;
  for (const auto& e : list.entries) {
    std::string key = normalize_answer(e.name);
    if (key == own) continue;
    if (pinned && key != pinned_key) continue;
    eligible.push_back(&e);
  }
  if (eligible.empty()) {
    throw SwapSkip(instance.id, pinned ? "pinned entity equals the original reference "
                                         "or is not in the list"
                                       : "no eligible popularity entry");
  }
  const std::uint64_t seed = derive_instance_seed(run_seed, instance.id, attempt);
  SplitMix64 rng(seed);
  const PopularityEntry& chosen = *eligible[rng.below(eligible.size())];
  return SwapRecord{list.bucket == PopularityBucket::kHigh ? SwapStrategy::kPopularityHigh
                                                           : SwapStrategy::kPopularityLow,
                    chosen.name, PopularityEntryName{chosen.name}, seed};
}

EvaluatorSwapResult swap_evaluator_knowledge(const QaInstance& instance,
                                             ModelBackend& qa_backend,
                                             const PromptLibrary& prompts,
                                             const RetryPolicy& retry) {
  EvaluatorSwapResult result;
  const std::string prompt =
      fill_template(prompts.get(kPromptQa), {{"question", instance.question}});
  PromptContext ctx{TaskKind::kQa, instance.question, instance.original_reference, "", ""};
  std::string reply;
  try {
    reply = complete_with_retry(qa_backend, prompt, SamplingParams{0.0, 64, 0}, &ctx,
                                retry);
  } catch (const TransportError& e) {
    result.outcome = EvaluatorOutcome::kUnevaluated;
    result.error = e.what();
    return result;
  }
  result.prediction = extract_short_answer(reply);
  if (normalize_answer(result.prediction).empty()) {
    result.outcome = EvaluatorOutcome::kUnevaluated;
    result.error = "empty prediction";
    return result;
  }
  if (same_answer(result.prediction, instance.original_reference)) {
    result.outcome = EvaluatorOutcome::kAgreed;
    return result;
  }
  result.outcome = EvaluatorOutcome::kSwapped;
  result.record = SwapRecord{SwapStrategy::kEvaluatorKnowledge, result.prediction,
                             EvaluatorModelId{qa_backend.backend_id()}, 0};
  return result;
}

void to_json(json& j, const SwapSkipEntry& v) {
  j = json{{"instance_id", v.instance_id}, {"reason", v.reason}};
}

SwapRunResult swap_all(const std::vector<QaInstance>& instances,
                       const SwapRunOptions& options) {
  SwapRunResult result;
  std::vector<std::optional<SwapRecord>> records(instances.size());
  std::vector<std::string> skip_reasons(instances.size());

  switch (options.strategy) {
    case SwapStrategy::kTypePreserving:
    case SwapStrategy::kTypeChanging: {
      std::map<DatasetId, std::vector<QaInstance>> by_dataset;
      for (const auto& q : instances) by_dataset[q.dataset_id].push_back(q);
      std::map<DatasetId, PreparedPool> pools;
      for (const auto& [id, members] : by_dataset) pools.emplace(id, PreparedPool(members));
      bool preserve = options.strategy == SwapStrategy::kTypePreserving;
      for (std::size_t i = 0; i < instances.size(); ++i) {
        try {
          records[i] = dataset_internal_swap(instances[i],
                                             pools.at(instances[i].dataset_id),
                                             options.run_seed, options.attempt, preserve);
        } catch (const SwapSkip& s) {
          skip_reasons[i] = s.reason();
        }
      }
      break;
    }
    case SwapStrategy::kPopularityHigh:
    case SwapStrategy::kPopularityLow: {
      if (!options.popularity) throw ValidationError("popularity swap needs a list");
      auto expected = options.strategy == SwapStrategy::kPopularityHigh
                          ? PopularityBucket::kHigh
                          : PopularityBucket::kLow;
      if (options.popularity->bucket != expected) {
        throw ValidationError("popularity list bucket does not match strategy");
      }
      for (std::size_t i = 0; i < instances.size(); ++i) {
        try {
          records[i] = swap_popularity(instances[i], *options.popularity,
                                       options.run_seed, options.pinned_entity,
                                       options.attempt);
        } catch (const SwapSkip& s) {
          skip_reasons[i] = s.reason();
        }
      }
      break;
    }
    case SwapStrategy::kEvaluatorKnowledge: {
      if (!options.evaluator || !options.prompts) {
        throw ValidationError("evaluator_knowledge swap needs an evaluator backend");
      }
      std::vector<EvaluatorSwapResult> outcomes(instances.size());
      parallel_for(instances.size(), options.parallelism, [&](std::size_t i) {
        outcomes[i] = swap_evaluator_knowledge(instances[i], *options.evaluator,
                                               *options.prompts, options.retry);
      });
      for (std::size_t i = 0; i < instances.size(); ++i) {
        switch (outcomes[i].outcome) {
          case EvaluatorOutcome::kSwapped:
            records[i] = outcomes[i].record;
            break;
          case EvaluatorOutcome::kAgreed:
            ++result.agreed;
            skip_reasons[i] = "evaluator agrees with the original reference";
            break;
          case EvaluatorOutcome::kUnevaluated:
            ++result.unevaluated;
            skip_reasons[i] = "unevaluated: " + outcomes[i].error;
            break;
        }
      }
      break;
    }
  }

  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (records[i]) {
      result.swapped.push_back({instances[i], *records[i]});
    } else {
      result.skips.push_back({instances[i].id, skip_reasons[i]});
    }
  }
  return result;
}

}  // namespace refswap
