#pragma once

// Stage runner. Every stage reads its inputs from the output directory,
// writes its outputs atomically and appends one line to run_manifest.jsonl.
// A stage is skipped when its last manifest entry has the same fingerprint
// (seed, relevant config sections, input digests) and its outputs are intact.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refswap/config.hpp"

namespace refswap {

enum class Stage { kIngest, kAnnotate, kPopularityBuild, kSwap, kGenerate, kJudge, kScore,
                   kReport, kFlips };

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);

struct StageOptions {
  bool force = false;  // run even when up to date
  std::optional<std::filesystem::path> only_ids;  // swap: re-swap just these ids
};

struct StageOutcome {
  bool skipped = false;
  json counts = json::object();
};

inline constexpr const char* kManifestFile = "run_manifest.jsonl";

StageOutcome run_stage(Stage stage, const RunConfig& config, const StageOptions& options = {});

/// The stage that writes a given output file name, or "" when none does.
std::string producer_of(const std::string& file_name);

}  // namespace refswap
