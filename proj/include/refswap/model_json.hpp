#pragma once

// Canonical JSON / JSONL encoding of the core types. Field names are the
// snake_case type field names; optional fields are omitted when absent.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "refswap/core.hpp"
#include "refswap/errors.hpp"

namespace refswap {

using nlohmann::json;

void to_json(json& j, const QaInstance& v);
void from_json(const json& j, QaInstance& v);
void to_json(json& j, const SwapRecord& v);
void from_json(const json& j, SwapRecord& v);
void to_json(json& j, const SwappedInstance& v);
void from_json(const json& j, SwappedInstance& v);
void to_json(json& j, const MetaEvalInstance& v);
void from_json(const json& j, MetaEvalInstance& v);
void to_json(json& j, const EvalTriplet& v);
void from_json(const json& j, EvalTriplet& v);
void to_json(json& j, const Verdict& v);
void from_json(const json& j, Verdict& v);

// Field accessors that throw ValidationError naming the missing field.
const json& require_field(const json& j, const char* key);
std::string require_string(const json& j, const char* key);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

std::string read_file(const std::filesystem::path& path);

template <typename T>
std::string encode_jsonl(const std::vector<T>& values) {
  std::string out;
  for (const auto& v : values) {
    out += json(v).dump();
    out.push_back('\n');
  }
  return out;
}

template <typename T>
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<T>& values) {
  write_file_atomic(path, encode_jsonl(values));
}

/// Parses every non-blank line; a malformed line is a ValidationError naming
/// the file and line number.
template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  std::string contents = read_file(path);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string::npos) end = contents.size();
    ++line_no;
    std::string_view line(contents.data() + start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(json::parse(line).get<T>());
    } catch (const std::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
  return out;
}

}  // namespace refswap
