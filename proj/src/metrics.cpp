#include "refswap/metrics.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "refswap/rng.hpp"

namespace refswap {

namespace {

struct PairSlots {
  const Verdict* o = nullptr;  // candidate polarity o
  const Verdict* s = nullptr;  // candidate polarity s
};

bool is_correct(const Verdict& v) {
  return v.label == ground_truth_label(v.reference_polarity, v.candidate_polarity);
}

void check_single_run(std::span<const Verdict> verdicts) {
  if (verdicts.empty()) return;
  const auto& first = verdicts.front();
  for (const auto& v : verdicts) {
    if (v.judge_id != first.judge_id || v.strategy_id != first.strategy_id) {
      throw ArgumentError("verdicts mix judges or strategies (" + first.judge_id + "/" +
                          first.strategy_id + " vs " + v.judge_id + "/" +
                          v.strategy_id + ")");
    }
  }
}

std::string triplet_key(const Verdict& v) {
  return v.instance_id + "|" + std::string(to_string(v.reference_polarity)) +
         std::string(to_string(v.candidate_polarity));
}

// instance id -> slots for one reference polarity, in first-seen order.
std::vector<std::pair<std::string, PairSlots>> collect(std::span<const Verdict> verdicts,
                                                       Polarity a) {
  check_single_run(verdicts);
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::pair<std::string, PairSlots>> out;
  std::set<std::string> seen;
  for (const auto& v : verdicts) {
    if (!seen.insert(triplet_key(v)).second) {
      throw ArgumentError("duplicate verdict for " + triplet_key(v));
    }
    if (v.reference_polarity != a) continue;
    auto [it, inserted] = index.emplace(v.instance_id, out.size());
    if (inserted) out.push_back({v.instance_id, {}});
    PairSlots& slots = out[it->second].second;
    (v.candidate_polarity == Polarity::kOriginal ? slots.o : slots.s) = &v;
  }
  return out;
}

std::string mixed_or(const std::set<std::string>& values) {
  if (values.size() == 1) return *values.begin();
  return values.empty() ? "none" : "mixed";
}

}  // namespace

PolarityTally tally(std::span<const Verdict> verdicts, Polarity a) {
  PolarityTally t;
  for (const auto& [id, slots] : collect(verdicts, a)) {
    if (!slots.o || !slots.s) continue;
    ++t.n;
    t.correct_o += is_correct(*slots.o) ? 1 : 0;
    t.correct_s += is_correct(*slots.s) ? 1 : 0;
  }
  return t;
}

double accuracy(std::span<const Verdict> verdicts, Polarity a) {
  PolarityTally t = tally(verdicts, a);
  if (t.n == 0) {
    throw UndefinedReportError(std::string("no usable instances under reference "
                                           "polarity ") +
                               std::string(to_string(a)));
  }
  return static_cast<double>(t.correct_o + t.correct_s) / (2.0 * static_cast<double>(t.n));
}

double rpag(double acc_o, double acc_s) {
  if (!(acc_o >= 0.0 && acc_o <= 1.0) || !(acc_s >= 0.0 && acc_s <= 1.0)) {
    throw ArgumentError("accuracies must lie in [0, 1]");
  }
  return acc_o - acc_s;
}

std::map<Cell, double> pairing_breakdown(std::span<const Verdict> verdicts) {
  std::map<Cell, double> cells;
  for (Polarity a : {Polarity::kOriginal, Polarity::kSwapped}) {
    PolarityTally t = tally(verdicts, a);
    if (t.n == 0) {
      throw UndefinedReportError(std::string("no usable instances under reference "
                                             "polarity ") +
                                 std::string(to_string(a)));
    }
    const double n = static_cast<double>(t.n);
    cells[{a, Polarity::kOriginal}] = static_cast<double>(t.correct_o) / n;
    cells[{a, Polarity::kSwapped}] = static_cast<double>(t.correct_s) / n;
  }
  return cells;
}

AttributeIndex index_attributes(const std::vector<MetaEvalInstance>& instances) {
  AttributeIndex idx;
  for (const auto& m : instances) {
    idx[m.base.id] = InstanceAttributes{m.base.dataset_id, m.swap.strategy,
                                        m.base.freshness, m.base.entity_type};
  }
  return idx;
}

std::string_view to_string(StratifyKey k) {
  switch (k) {
    case StratifyKey::kSwapStrategy:
      return "swap_strategy";
    case StratifyKey::kDataset:
      return "dataset";
    case StratifyKey::kFreshness:
      return "freshness";
    case StratifyKey::kPopularityBucket:
      return "popularity_bucket";
    case StratifyKey::kEntityType:
      return "entity_type";
  }
  return "?";
}

StratifyKey stratify_key_from_string(std::string_view s) {
  for (StratifyKey k : {StratifyKey::kSwapStrategy, StratifyKey::kDataset,
                        StratifyKey::kFreshness, StratifyKey::kPopularityBucket,
                        StratifyKey::kEntityType}) {
    if (to_string(k) == s) return k;
  }
  throw ArgumentError("unknown stratify key '" + std::string(s) + "'");
}

std::string slice_of(const InstanceAttributes& attrs, StratifyKey key) {
  switch (key) {
    case StratifyKey::kSwapStrategy:
      return std::string(to_string(attrs.swap_strategy));
    case StratifyKey::kDataset:
      return std::string(to_string(attrs.dataset_id));
    case StratifyKey::kFreshness:
      return attrs.freshness ? std::string(to_string(*attrs.freshness)) : "unspecified";
    case StratifyKey::kPopularityBucket:
      if (attrs.swap_strategy == SwapStrategy::kPopularityHigh) return "high";
      if (attrs.swap_strategy == SwapStrategy::kPopularityLow) return "low";
      return "unspecified";
    case StratifyKey::kEntityType:
      return attrs.entity_type ? std::string(to_string(*attrs.entity_type))
                               : "unspecified";
  }
  return "unspecified";
}

void to_json(json& j, const ScoreReport& r) {
  j = json{{"judge_id", r.judge_id},
           {"strategy_id", r.strategy_id},
           {"dataset_id", r.dataset_id},
           {"swap_strategy", r.swap_strategy},
           {"n", r.n},
           {"n_o", r.tally_o.n},
           {"n_s", r.tally_s.n},
           {"low_n", r.low_n}};
  if (r.undefined) {
    j["undefined"] = *r.undefined;
  } else {
    j["acc_o"] = r.acc_o;
    j["acc_s"] = r.acc_s;
    j["rpag"] = r.rpag;
    json cells = json::object();
    for (const auto& [cell, acc] : r.pairing) {
      cells[std::string(to_string(cell.first)) + std::string(to_string(cell.second))] = acc;
    }
    j["pairing"] = cells;
  }
  if (!r.strata.empty()) {
    json strata = json::object();
    for (const auto& [key, slices] : r.strata) {
      json s = json::object();
      for (const auto& [name, slice] : slices) s[name] = slice;
      strata[key] = s;
    }
    j["strata"] = strata;
  }
}

ScoreReport score_report(std::span<const Verdict> verdicts, const AttributeIndex& attrs,
                         std::size_t min_n) {
  check_single_run(verdicts);
  ScoreReport r;
  std::set<std::string> datasets, swaps, instances;
  for (const auto& v : verdicts) {
    instances.insert(v.instance_id);
    if (auto it = attrs.find(v.instance_id); it != attrs.end()) {
      datasets.insert(std::string(to_string(it->second.dataset_id)));
      swaps.insert(std::string(to_string(it->second.swap_strategy)));
    }
  }
  if (!verdicts.empty()) {
    r.judge_id = verdicts.front().judge_id;
    r.strategy_id = verdicts.front().strategy_id;
  }
  r.dataset_id = mixed_or(datasets);
  r.swap_strategy = mixed_or(swaps);
  r.n = instances.size();
  r.tally_o = tally(verdicts, Polarity::kOriginal);
  r.tally_s = tally(verdicts, Polarity::kSwapped);
  r.low_n = std::min(r.tally_o.n, r.tally_s.n) < min_n;
  if (r.tally_o.n == 0 || r.tally_s.n == 0) {
    r.undefined = r.tally_o.n == 0 ? "no usable instances under reference polarity o"
                                   : "no usable instances under reference polarity s";
    return r;
  }
  r.acc_o = accuracy(verdicts, Polarity::kOriginal);
  r.acc_s = accuracy(verdicts, Polarity::kSwapped);
  r.rpag = rpag(r.acc_o, r.acc_s);
  r.pairing = pairing_breakdown(verdicts);
  return r;
}

std::map<std::string, ScoreReport> stratify(std::span<const Verdict> verdicts,
                                            const AttributeIndex& attrs, StratifyKey key,
                                            std::size_t min_n) {
  std::map<std::string, std::vector<Verdict>> parts;
  for (const auto& v : verdicts) {
    auto it = attrs.find(v.instance_id);
    std::string slice = it == attrs.end() ? "unspecified" : slice_of(it->second, key);
    parts[slice].push_back(v);
  }
  std::map<std::string, ScoreReport> out;
  for (const auto& [slice, vs] : parts) out[slice] = score_report(vs, attrs, min_n);
  return out;
}

std::vector<ScoreReport> score_all(const std::vector<Verdict>& verdicts,
                                   const AttributeIndex& attrs,
                                   const std::vector<StratifyKey>& strata,
                                   std::size_t min_n) {
  using GroupKey = std::tuple<std::string, std::string, std::string, std::string>;
  std::vector<GroupKey> order;
  std::map<GroupKey, std::vector<Verdict>> groups;
  for (const auto& v : verdicts) {
    auto it = attrs.find(v.instance_id);
    if (it == attrs.end()) {
      throw ArgumentError("verdict for unknown instance '" + v.instance_id + "'");
    }
    GroupKey key{v.judge_id, v.strategy_id, std::string(to_string(it->second.dataset_id)),
                 std::string(to_string(it->second.swap_strategy))};
    auto [g, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    g->second.push_back(v);
  }
  std::vector<ScoreReport> out;
  for (const auto& key : order) {
    const auto& vs = groups.at(key);
    ScoreReport r = score_report(vs, attrs, min_n);
    for (StratifyKey k : strata) {
      r.strata[std::string(to_string(k))] = stratify(vs, attrs, k, min_n);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void to_json(json& j, const FlipRecord& v) {
  j = json{{"instance_id", v.instance_id},
           {"reference_polarity", std::string(to_string(v.reference_polarity))},
           {"candidate_polarity", std::string(to_string(v.candidate_polarity))},
           {"judge_id", v.judge_id},
           {"strategy1", v.strategy1},
           {"strategy2", v.strategy2},
           {"ground_truth", std::string(to_string(v.ground_truth))},
           {"raw_output1", v.raw_output1},
           {"raw_output2", v.raw_output2}};
}

std::vector<FlipRecord> flip_analysis(std::span<const Verdict> first,
                                      std::span<const Verdict> second) {
  auto key = [](const Verdict& v) { return v.judge_id + "|" + triplet_key(v); };
  std::unordered_map<std::string, const Verdict*> by_key;
  for (const auto& v : second) {
    if (!by_key.emplace(key(v), &v).second) {
      throw ArgumentError("duplicate verdict in second set: " + key(v));
    }
  }
  std::vector<std::string> missing;
  std::set<std::string> first_keys;
  for (const auto& v : first) {
    first_keys.insert(key(v));
    if (!by_key.count(key(v))) missing.push_back(key(v) + " (absent from second set)");
  }
  for (const auto& v : second) {
    if (!first_keys.count(key(v))) missing.push_back(key(v) + " (absent from first set)");
  }
  if (!missing.empty()) {
    std::string msg = "verdict sets cover different triplets: ";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
      msg += (i ? ", " : "") + missing[i];
    }
    if (missing.size() > 10) msg += ", ... (" + std::to_string(missing.size()) + " total)";
    throw ArgumentError(msg);
  }
  std::vector<FlipRecord> flips;
  for (const auto& v1 : first) {
    const Verdict& v2 = *by_key.at(key(v1));
    if (is_correct(v1) && !is_correct(v2)) {
      flips.push_back({v1.instance_id, v1.reference_polarity, v1.candidate_polarity,
                       v1.judge_id, v1.strategy_id, v2.strategy_id,
                       ground_truth_label(v1.reference_polarity, v1.candidate_polarity),
                       v1.raw_output, v2.raw_output});
    }
  }
  return flips;
}

std::vector<FlipRecord> sample_flips(const std::vector<FlipRecord>& flips, std::size_t n,
                                     std::uint64_t seed) {
  if (n >= flips.size()) return flips;
  std::vector<FlipRecord> out;
  for (std::size_t i : sample_indices(flips.size(), n, seed)) out.push_back(flips[i]);
  return out;
}

}  // namespace refswap
