#pragma once

// Human review of NER labels, swaps and candidates. Decisions go to an
// append-only JSONL log; the latest decision per (instance, stage) wins.

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "refswap/core.hpp"
#include "refswap/model_json.hpp"

namespace refswap {

struct ReviewDecision {
  std::string instance_id;
  ReviewStage stage = ReviewStage::kNer;
  ReviewState decision = ReviewState::kAccepted;  // never pending
  std::optional<std::string> edited_value;
  std::string reviewer;
  std::string timestamp;  // ISO 8601 UTC, filled by the store when empty

  bool operator==(const ReviewDecision&) const = default;
};

void to_json(json& j, const ReviewDecision& v);
void from_json(const json& j, ReviewDecision& v);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// Status filter for listing; kAny matches every state.
enum class StatusFilter { kPending, kAccepted, kRejected, kEdited, kAny };
StatusFilter status_filter_from_string(std::string_view s);

struct ReviewItem {
  std::string instance_id;
  ReviewStage stage = ReviewStage::kNer;
  ReviewState status = ReviewState::kPending;
  MetaEvalInstance instance;  // edits applied
};

void to_json(json& j, const ReviewItem& v);

struct ReviewPage {
  std::vector<ReviewItem> items;
  std::optional<std::string> next_cursor;
};

struct ExportResult {
  std::vector<MetaEvalInstance> instances;
  std::vector<std::pair<std::string, std::string>> invalid;  // id, violated rule
};

struct ReviewStats {
  std::size_t instances = 0;
  std::size_t decisions = 0;
  std::map<ReviewStage, std::map<ReviewState, std::size_t>> by_stage;
};

void to_json(json& j, const ReviewStats& v);

/// Latest decision per (instance, stage), as rebuilt from a decision log.
using LatestDecisions = std::map<std::pair<std::string, ReviewStage>, ReviewDecision>;
LatestDecisions replay(const std::vector<ReviewDecision>& log);

/// Applies one stage edit to an instance. Throws ValidationError with the
/// violated rule when the edited value is unusable for that stage.
void apply_edit(MetaEvalInstance& instance, ReviewStage stage, const std::string& value);

class ReviewStore {
 public:
  /// Items are ordered by instance id. With an empty log_path decisions stay
  /// in memory only.
  ReviewStore(std::vector<MetaEvalInstance> instances, std::filesystem::path log_path);

  /// Items for `stage` (all stages when absent) whose latest state matches
  /// `status`. The cursor is the next_cursor of a previous page; an unknown
  /// or malformed cursor is an ArgumentError.
  ReviewPage list(std::optional<ReviewStage> stage, StatusFilter status,
                  const std::string& cursor, std::size_t limit) const;

  /// Validates and appends. Unknown instance is a NotFoundError; a bad edit
  /// is a ValidationError. Returns the decision as stored.
  ReviewDecision submit(ReviewDecision decision);

  /// Instances whose stages are all accepted or edited (pending also allowed
  /// with include_pending), with edits applied. Records that fail the
  /// instance invariants after editing are left out and listed in `invalid`.
  ExportResult export_reviewed(bool include_pending = false) const;

  ReviewStats stats() const;
  std::vector<ReviewDecision> log() const;
  LatestDecisions latest() const;

 private:
  MetaEvalInstance effective(std::size_t index) const;
  ReviewState state_of(std::size_t index, ReviewStage stage) const;

  std::vector<MetaEvalInstance> instances_;
  std::map<std::string, std::size_t> by_id_;
  std::filesystem::path log_path_;
  std::vector<ReviewDecision> log_;
  LatestDecisions latest_;
  mutable std::shared_mutex mu_;
};

struct ReviewServerOptions {
  std::string host = "127.0.0.1";
  int port = 8377;
  std::filesystem::path static_dir;  // review-ui bundle; optional
  std::string token;                 // shared token; empty disables the check
};

/// Blocks serving the review API until the process is stopped.
void serve_review(ReviewStore& store, const ReviewServerOptions& options);

}  // namespace refswap
