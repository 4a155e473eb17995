#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "refswap/backend.hpp"
#include "refswap/candgen.hpp"
#include "refswap/ingest.hpp"
#include "refswap/judge.hpp"
#include "refswap/metrics.hpp"

namespace refswap {

struct DatasetSource {
  std::filesystem::path path;
  DatasetAdapterSpec adapter;
  std::optional<std::size_t> sample_n;  // absent: keep every row
  bool exclude_false_premise = false;
};

struct BackendSpec {
  enum class Kind { kMock, kHttp } kind = Kind::kMock;
  MockJudgeSpec mock;
  HttpBackendConfig http;
};

struct RunConfig {
  std::uint64_t run_seed = 0;
  std::filesystem::path output_dir = "run";
  std::size_t parallelism = 8;
  bool offline = false;
  std::optional<std::filesystem::path> prompts_dir;

  std::map<std::string, BackendSpec> backends;
  std::vector<DatasetSource> datasets;

  std::string annotator = "heuristic";  // "heuristic" or a backend id
  std::optional<std::filesystem::path> gazetteer_dir;

  SwapStrategy swap_strategy = SwapStrategy::kTypePreserving;
  unsigned swap_attempt = 0;
  std::size_t popularity_k = 50;
  DatasetId popularity_source = DatasetId::kPopQa;
  std::optional<std::string> pinned_entity;
  std::optional<std::string> evaluator;  // backend id

  CandidateGenPolicy candgen;
  std::optional<std::string> candgen_backend;

  std::vector<std::string> judges;
  std::vector<StrategyId> strategies{StrategyId::kStandard};
  int sc_k = 5;
  double sc_temperature = 0.6;
  int max_tokens = 1024;
  std::string judge_input = "meta_instances.jsonl";

  RetryPolicy retry;

  std::size_t min_n = 10;
  std::vector<StratifyKey> stratify;

  std::string flips_strategy1 = "standard";
  std::string flips_strategy2 = "cot";
  std::size_t flips_sample = 50;

  std::string review_host = "127.0.0.1";
  int review_port = 8377;
  std::optional<std::filesystem::path> review_static_dir;

  json raw;  // the validated document with overrides applied
};

/// Parses and validates a config document. Every problem is collected and
/// reported together in one ValidationError, one "<path>: <message>" per
/// line. Relative paths resolve against base_dir.
RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir);

RunConfig load_run_config(const std::filesystem::path& path);

/// Stable digest of one config section (sorted-key JSON dump).
std::string section_digest(const RunConfig& config, const std::string& section);

/// Instantiates a backend. With offline set, network backends are refused.
std::unique_ptr<ModelBackend> make_backend(const RunConfig& config, const std::string& id);

}  // namespace refswap
