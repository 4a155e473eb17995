#include "refswap/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <unordered_set>

#include "refswap/rng.hpp"

namespace refswap {

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::optional<std::string> optional_string(const json& j, const char* key) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    return it->get<std::string>();
  }
  return std::nullopt;
}

// One source row, independent of the file format.
class Row {
 public:
  virtual ~Row() = default;
  // nullopt when the key is absent or blank.
  virtual std::optional<std::string> get(const std::string& key) const = 0;
};

class JsonRow : public Row {
 public:
  explicit JsonRow(const json& j) : j_(j) {}

  std::optional<std::string> get(const std::string& key) const override {
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return std::nullopt;
    const json& v = *it;
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    if (v.is_array()) {
      // List-valued answers (NQ-Open "answer": [...]) use the first entry.
      for (const auto& e : v) {
        if (e.is_string()) return e.get<std::string>();
        if (e.is_number()) return e.dump();
      }
      return std::nullopt;
    }
    return v.dump();
  }

 private:
  const json& j_;
};

class CsvRecord : public Row {
 public:
  CsvRecord(const std::vector<std::string>& header,
            const std::vector<std::string>& fields)
      : header_(header), fields_(fields) {}

  std::optional<std::string> get(const std::string& key) const override {
    auto it = std::find(header_.begin(), header_.end(), key);
    if (it == header_.end()) return std::nullopt;
    const std::string& v = fields_[static_cast<std::size_t>(it - header_.begin())];
    if (!v.empty() && v.front() == '[') {
      // PopQA stores answer lists as JSON arrays inside a CSV cell.
      json arr = json::parse(v, nullptr, /*allow_exceptions=*/false);
      if (arr.is_array()) {
        for (const auto& e : arr) {
          if (e.is_string()) return e.get<std::string>();
        }
      }
    }
    return v;
  }

 private:
  const std::vector<std::string>& header_;
  const std::vector<std::string>& fields_;
};

std::optional<bool> parse_bool(std::string_view s) {
  std::string v = lower_ascii(trim(s));
  if (v == "true" || v == "1" || v == "yes" || v == "t" || v == "y") return true;
  if (v == "false" || v == "0" || v == "no" || v == "f" || v == "n") return false;
  return std::nullopt;
}

std::optional<std::uint64_t> parse_count(std::string_view s) {
  std::string v = trim(s);
  // Exports sometimes write integral floats ("1234.0").
  if (auto dot = v.find('.'); dot != std::string::npos &&
                              v.find_first_not_of('0', dot + 1) == std::string::npos) {
    v.resize(dot);
  }
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    return std::nullopt;
  }
  return out;
}

// Converts one row into an instance, or returns the reason it was skipped.
std::variant<QaInstance, std::string> convert_row(const Row& row,
                                                  const DatasetAdapterSpec& spec,
                                                  std::size_t row_index) {
  const FieldMap& fm = spec.field_map;
  QaInstance inst;
  inst.dataset_id = spec.dataset_id;

  auto question = row.get(fm.question_field);
  auto answer = row.get(fm.answer_field);
  if (!question || trim(*question).empty()) return std::string("empty question");
  if (!answer || trim(*answer).empty()) return std::string("empty answer");
  inst.question = trim(*question);
  inst.original_reference = trim(*answer);
  if (normalize_answer(inst.original_reference).empty()) {
    return std::string("answer normalizes to empty");
  }

  std::optional<std::string> id;
  if (fm.id_field) id = row.get(*fm.id_field);
  if (id && !trim(*id).empty()) {
    inst.id = std::string(to_string(spec.dataset_id)) + ":" + trim(*id);
  } else {
    inst.id = std::string(to_string(spec.dataset_id)) + ":" +
              std::to_string(row_index);
  }

  if (fm.freshness_field && spec.dataset_id == DatasetId::kFreshQa) {
    if (auto f = row.get(*fm.freshness_field); f && !trim(*f).empty()) {
      try {
        inst.freshness = freshness_from_string(*f);
      } catch (const ValidationError&) {
        return "unknown freshness '" + *f + "'";
      }
    }
  }
  if (fm.pageviews_field) {
    if (auto p = row.get(*fm.pageviews_field); p && !trim(*p).empty()) {
      inst.popularity_pageviews = parse_count(*p);
      if (!inst.popularity_pageviews) return "bad pageviews '" + *p + "'";
    }
  }
  if (fm.false_premise_field) {
    if (auto fp = row.get(*fm.false_premise_field); fp && !trim(*fp).empty()) {
      inst.false_premise = parse_bool(*fp);
      if (!inst.false_premise) return "bad false_premise flag '" + *fp + "'";
    }
  }
  if (fm.entity_type_field) {
    if (auto et = row.get(*fm.entity_type_field); et && !trim(*et).empty()) {
      inst.entity_type = entity_type_from_string(*et);
    }
  }
  return inst;
}

SourceFormat detect_format(const std::filesystem::path& path,
                           SourceFormat requested) {
  if (requested != SourceFormat::kAuto) return requested;
  std::string ext = lower_ascii(path.extension().string());
  if (ext == ".csv") return SourceFormat::kCsv;
  return SourceFormat::kJsonl;
}

}  // namespace

DatasetAdapterSpec adapter_from_json(const json& j) {
  DatasetAdapterSpec spec;
  spec.dataset_id = dataset_id_from_string(require_string(j, "dataset_id"));
  const json& fm = require_field(j, "field_map");
  spec.field_map.question_field = require_string(fm, "question_field");
  spec.field_map.answer_field = require_string(fm, "answer_field");
  if (spec.field_map.question_field.empty() || spec.field_map.answer_field.empty()) {
    throw ValidationError("question_field and answer_field must be non-empty");
  }
  spec.field_map.id_field = optional_string(fm, "id_field");
  spec.field_map.freshness_field = optional_string(fm, "freshness_field");
  spec.field_map.pageviews_field = optional_string(fm, "pageviews_field");
  spec.field_map.false_premise_field = optional_string(fm, "false_premise_field");
  spec.field_map.entity_type_field = optional_string(fm, "entity_type_field");
  if (auto f = optional_string(j, "format")) {
    if (*f == "jsonl") {
      spec.format = SourceFormat::kJsonl;
    } else if (*f == "csv") {
      spec.format = SourceFormat::kCsv;
    } else if (*f != "auto") {
      throw ValidationError("unknown format '" + *f + "'");
    }
  }
  if (auto it = j.find("skip_leading_rows"); it != j.end()) {
    spec.skip_leading_rows = it->get<std::size_t>();
  }
  return spec;
}

json adapter_to_json(const DatasetAdapterSpec& spec) {
  json fm{{"question_field", spec.field_map.question_field},
          {"answer_field", spec.field_map.answer_field}};
  auto put = [&](const char* k, const std::optional<std::string>& v) {
    if (v) fm[k] = *v;
  };
  put("id_field", spec.field_map.id_field);
  put("freshness_field", spec.field_map.freshness_field);
  put("pageviews_field", spec.field_map.pageviews_field);
  put("false_premise_field", spec.field_map.false_premise_field);
  put("entity_type_field", spec.field_map.entity_type_field);
  const char* format = spec.format == SourceFormat::kCsv     ? "csv"
                       : spec.format == SourceFormat::kJsonl ? "jsonl"
                                                             : "auto";
  return json{{"dataset_id", std::string(to_string(spec.dataset_id))},
              {"field_map", fm},
              {"format", format},
              {"skip_leading_rows", spec.skip_leading_rows}};
}

void to_json(json& j, const SkipEntry& v) {
  j = json{{"file", v.file}, {"line", v.line}, {"reason", v.reason}};
}

void from_json(const json& j, SkipEntry& v) {
  v.file = require_string(j, "file");
  v.line = require_field(j, "line").get<std::size_t>();
  v.reason = require_string(j, "reason");
}

std::vector<CsvRow> parse_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  std::size_t line = 1;
  row.line = 1;
  bool in_quotes = false;
  bool field_started = false;  // anything (incl. quotes) seen in this field

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    bool blank = row.fields.size() == 1 && row.fields[0].empty() && !row.malformed;
    if (!blank) rows.push_back(std::move(row));
    row = CsvRow{};
    row.line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) row.malformed = true;
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) row.malformed = true;
  if (field_started || !row.fields.empty() || row.malformed) end_row();
  return rows;
}

LoadResult load_dataset(const std::filesystem::path& path,
                        const DatasetAdapterSpec& spec) {
  if (spec.field_map.question_field.empty() || spec.field_map.answer_field.empty()) {
    throw ValidationError("adapter question_field and answer_field must be set");
  }
  const std::string contents = read_file(path);
  const std::string file = path.string();
  LoadResult result;
  std::unordered_set<std::string> seen_ids;

  auto accept = [&](std::variant<QaInstance, std::string> converted,
                    std::size_t line) {
    ++result.parsed_rows;
    if (auto* reason = std::get_if<std::string>(&converted)) {
      result.skips.push_back({file, line, *reason});
      return;
    }
    auto& inst = std::get<QaInstance>(converted);
    if (!seen_ids.insert(inst.id).second) {
      result.skips.push_back({file, line, "duplicate id '" + inst.id + "'"});
      return;
    }
    result.instances.push_back(std::move(inst));
  };

  if (detect_format(path, spec.format) == SourceFormat::kCsv) {
    std::vector<CsvRow> rows = parse_csv(contents);
    if (rows.size() <= spec.skip_leading_rows) return result;
    const CsvRow& header_row = rows[spec.skip_leading_rows];
    std::vector<std::string> header = header_row.fields;
    for (auto& h : header) h = trim(h);
    if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) {
      header[0].erase(0, 3);
    }
    for (std::size_t r = spec.skip_leading_rows + 1; r < rows.size(); ++r) {
      const CsvRow& row = rows[r];
      std::size_t index = r - spec.skip_leading_rows;
      if (row.malformed) {
        accept(std::string("malformed CSV quoting"), row.line);
      } else if (row.fields.size() != header.size()) {
        accept("expected " + std::to_string(header.size()) + " columns, got " +
                   std::to_string(row.fields.size()),
               row.line);
      } else {
        accept(convert_row(CsvRecord(header, row.fields), spec, index), row.line);
      }
    }
    return result;
  }

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string::npos) end = contents.size();
    ++line_no;
    std::string_view line(contents.data() + start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      accept(std::string("malformed JSON line"), line_no);
      continue;
    }
    accept(convert_row(JsonRow(j), spec, line_no), line_no);
  }
  return result;
}

std::vector<QaInstance> sample_instances(const std::vector<QaInstance>& instances,
                                         std::size_t n, std::uint64_t seed) {
  if (n == 0 || n > instances.size()) {
    throw ArgumentError("cannot sample " + std::to_string(n) + " of " +
                        std::to_string(instances.size()) + " instances");
  }
  std::vector<QaInstance> out;
  out.reserve(n);
  for (std::size_t i : sample_indices(instances.size(), n, seed)) {
    out.push_back(instances[i]);
  }
  return out;
}

std::vector<QaInstance> filter_false_premise(std::vector<QaInstance> instances) {
  std::erase_if(instances,
                [](const QaInstance& q) { return q.false_premise.value_or(false); });
  return instances;
}

}  // namespace refswap
