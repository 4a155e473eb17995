#include "refswap/review.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <mutex>

namespace refswap {

namespace {

std::string str(std::string_view s) { return std::string(s); }

constexpr std::string_view kCursorSep = "\x1f";

std::string encode_cursor(const std::string& id, ReviewStage stage) {
  return id + str(kCursorSep) + str(to_string(stage));
}

}  // namespace

void to_json(json& j, const ReviewDecision& v) {
  j = json{{"instance_id", v.instance_id},
           {"stage", str(to_string(v.stage))},
           {"decision", str(to_string(v.decision))},
           {"reviewer", v.reviewer},
           {"timestamp", v.timestamp}};
  if (v.edited_value) j["edited_value"] = *v.edited_value;
}

void from_json(const json& j, ReviewDecision& v) {
  v.instance_id = require_string(j, "instance_id");
  v.stage = review_stage_from_string(require_string(j, "stage"));
  v.decision = review_state_from_string(require_string(j, "decision"));
  if (v.decision == ReviewState::kPending) {
    throw ValidationError("decision must be accepted, rejected or edited");
  }
  v.edited_value.reset();
  if (auto it = j.find("edited_value"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ValidationError("edited_value must be a string");
    v.edited_value = it->get<std::string>();
  }
  v.reviewer = j.value("reviewer", std::string());
  v.timestamp = j.value("timestamp", std::string());
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

StatusFilter status_filter_from_string(std::string_view s) {
  if (s.empty() || s == "pending") return StatusFilter::kPending;
  if (s == "accepted") return StatusFilter::kAccepted;
  if (s == "rejected") return StatusFilter::kRejected;
  if (s == "edited") return StatusFilter::kEdited;
  if (s == "any" || s == "all") return StatusFilter::kAny;
  throw ArgumentError("unknown status filter '" + str(s) + "'");
}

void to_json(json& j, const ReviewItem& v) {
  const auto& m = v.instance;
  j = json{{"instance_id", v.instance_id},
           {"stage", str(to_string(v.stage))},
           {"status", str(to_string(v.status))},
           {"dataset_id", str(to_string(m.base.dataset_id))},
           {"question", m.base.question},
           {"original_reference", m.base.original_reference},
           {"swapped_reference", m.swap.swapped_reference},
           {"swap_strategy", str(to_string(m.swap.strategy))},
           {"candidate_original", m.candidate_original},
           {"candidate_swapped", m.candidate_swapped},
           {"entity_type", m.base.entity_type ? json(str(to_string(*m.base.entity_type)))
                                              : json(nullptr)}};
}

void to_json(json& j, const ReviewStats& v) {
  json stages = json::object();
  for (const auto& [stage, counts] : v.by_stage) {
    json c = json::object();
    for (const auto& [state, n] : counts) c[str(to_string(state))] = n;
    stages[str(to_string(stage))] = c;
  }
  j = json{{"instances", v.instances}, {"decisions", v.decisions}, {"stages", stages}};
}

LatestDecisions replay(const std::vector<ReviewDecision>& log) {
  LatestDecisions latest;
  for (const auto& d : log) latest[{d.instance_id, d.stage}] = d;
  return latest;
}

void apply_edit(MetaEvalInstance& m, ReviewStage stage, const std::string& value) {
  if (trim(value).empty()) throw ValidationError("edited_value must be non-empty");
  switch (stage) {
    case ReviewStage::kNer: {
      auto type = parse_entity_type_strict(trim(value));
      if (!type) throw ValidationError("'" + value + "' is not an entity type");
      m.base.entity_type = *type;
      if (auto rule = check_invariants(m.base, m.swap); !rule.empty()) {
        throw ValidationError(rule);
      }
      return;
    }
    case ReviewStage::kSwap: {
      SwapRecord swap = m.swap;
      swap.swapped_reference = value;
      if (auto rule = check_invariants(m.base, swap); !rule.empty()) {
        throw ValidationError(rule);
      }
      m.swap = std::move(swap);
      return;
    }
    case ReviewStage::kCandidateO:
      if (!normalized_contains(value, m.base.original_reference)) {
        throw ValidationError("candidate_original is not aligned with original_reference");
      }
      m.candidate_original = value;
      return;
    case ReviewStage::kCandidateS:
      if (!normalized_contains(value, m.swap.swapped_reference)) {
        throw ValidationError("candidate_swapped is not aligned with swapped_reference");
      }
      m.candidate_swapped = value;
      return;
  }
}

ReviewStore::ReviewStore(std::vector<MetaEvalInstance> instances,
                         std::filesystem::path log_path)
    : instances_(std::move(instances)), log_path_(std::move(log_path)) {
  std::sort(instances_.begin(), instances_.end(),
            [](const auto& a, const auto& b) { return a.base.id < b.base.id; });
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (!by_id_.emplace(instances_[i].base.id, i).second) {
      throw ValidationError("duplicate instance id '" + instances_[i].base.id + "'");
    }
  }
  std::error_code ec;
  if (!log_path_.empty() && std::filesystem::exists(log_path_, ec)) {
    log_ = read_jsonl<ReviewDecision>(log_path_);
  }
  latest_ = replay(log_);
}

ReviewState ReviewStore::state_of(std::size_t index, ReviewStage stage) const {
  const auto& m = instances_[index];
  if (auto it = latest_.find({m.base.id, stage}); it != latest_.end()) {
    return it->second.decision;
  }
  auto it = m.review.find(stage);
  return it == m.review.end() ? ReviewState::kPending : it->second;
}

MetaEvalInstance ReviewStore::effective(std::size_t index) const {
  MetaEvalInstance m = instances_[index];
  // Swap edits go first so candidate edits are read against the edited reference.
  for (ReviewStage stage : {ReviewStage::kNer, ReviewStage::kSwap, ReviewStage::kCandidateO,
                            ReviewStage::kCandidateS}) {
    auto it = latest_.find({m.base.id, stage});
    if (it == latest_.end()) continue;
    m.review[stage] = it->second.decision;
    if (it->second.decision != ReviewState::kEdited) continue;
    const std::string& v = *it->second.edited_value;
    switch (stage) {  // validated at submit time
      case ReviewStage::kNer:
        m.base.entity_type = entity_type_from_string(v);
        break;
      case ReviewStage::kSwap:
        m.swap.swapped_reference = v;
        break;
      case ReviewStage::kCandidateO:
        m.candidate_original = v;
        break;
      case ReviewStage::kCandidateS:
        m.candidate_swapped = v;
        break;
    }
  }
  return m;
}

ReviewPage ReviewStore::list(std::optional<ReviewStage> stage, StatusFilter status,
                             const std::string& cursor, std::size_t limit) const {
  std::shared_lock lock(mu_);
  std::size_t start_index = 0;
  int start_stage = 0;
  if (!cursor.empty()) {
    auto sep = cursor.find(kCursorSep);
    if (sep == std::string::npos) throw ArgumentError("malformed cursor");
    auto it = by_id_.find(cursor.substr(0, sep));
    if (it == by_id_.end()) throw ArgumentError("cursor refers to an unknown instance");
    ReviewStage s;
    try {
      s = review_stage_from_string(cursor.substr(sep + kCursorSep.size()));
    } catch (const ValidationError&) {
      throw ArgumentError("malformed cursor");
    }
    start_index = it->second;
    start_stage = static_cast<int>(s) + 1;
  }
  if (limit == 0) limit = 50;

  auto matches = [&](ReviewState st) {
    switch (status) {
      case StatusFilter::kPending:
        return st == ReviewState::kPending;
      case StatusFilter::kAccepted:
        return st == ReviewState::kAccepted;
      case StatusFilter::kRejected:
        return st == ReviewState::kRejected;
      case StatusFilter::kEdited:
        return st == ReviewState::kEdited;
      case StatusFilter::kAny:
        return true;
    }
    return false;
  };

  ReviewPage page;
  for (std::size_t i = start_index; i < instances_.size(); ++i) {
    for (ReviewStage s : kAllReviewStages) {
      if (i == start_index && static_cast<int>(s) < start_stage) continue;
      if (stage && s != *stage) continue;
      ReviewState st = state_of(i, s);
      if (!matches(st)) continue;
      if (page.items.size() == limit) {
        const auto& last = page.items.back();
        page.next_cursor = encode_cursor(last.instance_id, last.stage);
        return page;
      }
      page.items.push_back({instances_[i].base.id, s, st, effective(i)});
    }
  }
  return page;
}

ReviewDecision ReviewStore::submit(ReviewDecision d) {
  std::unique_lock lock(mu_);
  auto it = by_id_.find(d.instance_id);
  if (it == by_id_.end()) throw NotFoundError("unknown instance '" + d.instance_id + "'");
  if (d.decision == ReviewState::kPending) {
    throw ValidationError("decision must be accepted, rejected or edited");
  }
  if (d.decision == ReviewState::kEdited) {
    if (!d.edited_value || trim(*d.edited_value).empty()) {
      throw ValidationError("edited decisions need a non-empty edited_value");
    }
    MetaEvalInstance m = effective(it->second);
    apply_edit(m, d.stage, *d.edited_value);
  } else {
    d.edited_value.reset();
  }
  if (d.timestamp.empty()) d.timestamp = utc_timestamp();
  if (!log_path_.empty()) {
    std::ofstream out(log_path_, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to " + log_path_.string());
    out << json(d).dump() << '\n';
    out.flush();
    if (!out) throw IoError("write failed on " + log_path_.string());
  }
  log_.push_back(d);
  latest_[{d.instance_id, d.stage}] = d;
  return d;
}

ExportResult ReviewStore::export_reviewed(bool include_pending) const {
  std::shared_lock lock(mu_);
  ExportResult out;
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    bool keep = true;
    for (ReviewStage s : kAllReviewStages) {
      ReviewState st = state_of(i, s);
      if (st == ReviewState::kRejected || (st == ReviewState::kPending && !include_pending)) {
        keep = false;
      }
    }
    if (!keep) continue;
    MetaEvalInstance m = effective(i);
    if (auto rule = check_invariants(m); !rule.empty()) {
      out.invalid.emplace_back(m.base.id, rule);
      continue;
    }
    out.instances.push_back(std::move(m));
  }
  return out;
}

ReviewStats ReviewStore::stats() const {
  std::shared_lock lock(mu_);
  ReviewStats s;
  s.instances = instances_.size();
  s.decisions = log_.size();
  for (ReviewStage stage : kAllReviewStages) {
    auto& counts = s.by_stage[stage];
    for (ReviewState st : {ReviewState::kPending, ReviewState::kAccepted,
                           ReviewState::kRejected, ReviewState::kEdited}) {
      counts[st] = 0;
    }
    for (std::size_t i = 0; i < instances_.size(); ++i) ++counts[state_of(i, stage)];
  }
  return s;
}

std::vector<ReviewDecision> ReviewStore::log() const {
  std::shared_lock lock(mu_);
  return log_;
}

LatestDecisions ReviewStore::latest() const {
  std::shared_lock lock(mu_);
  return latest_;
}

}  // namespace refswap
