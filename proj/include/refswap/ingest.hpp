#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refswap/core.hpp"
#include "refswap/model_json.hpp"

namespace refswap {

// Source column/key names. question_field and answer_field are required.
struct FieldMap {
  std::string question_field;
  std::string answer_field;
  std::optional<std::string> id_field;
  std::optional<std::string> freshness_field;
  std::optional<std::string> pageviews_field;
  std::optional<std::string> false_premise_field;
  std::optional<std::string> entity_type_field;
};

enum class SourceFormat { kAuto, kJsonl, kCsv };

struct DatasetAdapterSpec {
  DatasetId dataset_id = DatasetId::kCustom;
  FieldMap field_map;
  SourceFormat format = SourceFormat::kAuto;
  // Rows before the CSV header (FreshQA exports carry a short preamble).
  std::size_t skip_leading_rows = 0;
};

DatasetAdapterSpec adapter_from_json(const json& j);
json adapter_to_json(const DatasetAdapterSpec& spec);

struct SkipEntry {
  std::string file;
  std::size_t line = 0;  // 1-based physical line where the row starts
  std::string reason;
};

void to_json(json& j, const SkipEntry& v);
void from_json(const json& j, SkipEntry& v);

struct LoadResult {
  std::vector<QaInstance> instances;
  std::vector<SkipEntry> skips;
  std::size_t parsed_rows = 0;  // == instances.size() + skips.size()
};

/// Loads a JSONL or CSV (with header) file through the adapter's field map.
/// Bad rows land in the skip report; only an unreadable file throws.
LoadResult load_dataset(const std::filesystem::path& path,
                        const DatasetAdapterSpec& spec);

/// Uniform sample without replacement, returned in source order.
std::vector<QaInstance> sample_instances(const std::vector<QaInstance>& instances,
                                         std::size_t n, std::uint64_t seed);

std::vector<QaInstance> filter_false_premise(std::vector<QaInstance> instances);

/// RFC 4180 CSV. Rows carry the physical line they start on; a stray or
/// unterminated quote marks the row malformed instead of throwing.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
  bool malformed = false;
};
std::vector<CsvRow> parse_csv(std::string_view text);

}  // namespace refswap
