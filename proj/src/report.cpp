#include "refswap/report.hpp"

#include <cstdio>
#include <sstream>

namespace refswap {

namespace {

constexpr const char* kCells[] = {"oo", "os", "so", "ss"};

std::string cell(const json& r, const char* key) {
  if (!r.contains("pairing")) return "undefined";
  return fixed3(r["pairing"].value(key, json()));
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

std::string low_n_mark(const json& r) { return r.value("low_n", false) ? " (low n)" : ""; }

}  // namespace

std::string fixed3(const json& value) {
  if (!value.is_number()) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", value.get<double>());
  return buf;
}

json report_document(const std::vector<ScoreReport>& reports, const json& run_info) {
  json doc = run_info.is_object() ? run_info : json::object();
  doc["reports"] = reports;
  return doc;
}

std::string render_markdown(const json& doc) {
  std::ostringstream md;
  const json& reports = doc.at("reports");
  md << "# Reference-swap evaluation report\n\n";
  if (doc.contains("judge_failures")) {
    md << "Failed triplets (excluded): " << doc["judge_failures"].get<std::size_t>()
       << "\n\n";
  }

  md << "## Accuracy by reference polarity\n\n";
  md << "| Judge | Strategy | Dataset | Swap | N | ACC^o | ACC^s | RPAG |\n";
  md << "|---|---|---|---|---:|---:|---:|---:|\n";
  for (const auto& r : reports) {
    md << "| " << md_escape(r["judge_id"]) << " | " << md_escape(r["strategy_id"]) << " | "
       << md_escape(r["dataset_id"]) << " | " << md_escape(r["swap_strategy"]) << " | "
       << r["n"].get<std::size_t>() << low_n_mark(r) << " | "
       << fixed3(r.value("acc_o", json())) << " | " << fixed3(r.value("acc_s", json()))
       << " | " << fixed3(r.value("rpag", json())) << " |\n";
  }

  md << "\n## Accuracy by reference-candidate pairing\n\n";
  md << "| Judge | Strategy | Dataset | Swap | (r^o, c^o) | (r^o, c^s) | (r^s, c^o) | "
        "(r^s, c^s) |\n";
  md << "|---|---|---|---|---:|---:|---:|---:|\n";
  for (const auto& r : reports) {
    md << "| " << md_escape(r["judge_id"]) << " | " << md_escape(r["strategy_id"]) << " | "
       << md_escape(r["dataset_id"]) << " | " << md_escape(r["swap_strategy"]);
    for (const char* c : kCells) md << " | " << cell(r, c);
    md << " |\n";
  }

  std::map<std::string, bool> keys;
  for (const auto& r : reports) {
    if (r.contains("strata")) {
      for (const auto& [k, _] : r["strata"].items()) keys[k] = true;
    }
  }
  for (const auto& [key, _] : keys) {
    md << "\n## Stratified by " << key << "\n\n";
    md << "| Judge | Strategy | Dataset | Swap | Slice | N | ACC^o | ACC^s | RPAG |\n";
    md << "|---|---|---|---|---|---:|---:|---:|---:|\n";
    for (const auto& r : reports) {
      if (!r.contains("strata") || !r["strata"].contains(key)) continue;
      for (const auto& [slice, s] : r["strata"][key].items()) {
        md << "| " << md_escape(r["judge_id"]) << " | " << md_escape(r["strategy_id"])
           << " | " << md_escape(r["dataset_id"]) << " | " << md_escape(r["swap_strategy"])
           << " | " << md_escape(slice) << " | " << s["n"].get<std::size_t>()
           << low_n_mark(s) << " | " << fixed3(s.value("acc_o", json())) << " | "
           << fixed3(s.value("acc_s", json())) << " | " << fixed3(s.value("rpag", json()))
           << " |\n";
      }
    }
  }
  return md.str();
}

std::string render_csv(const json& doc) {
  std::ostringstream csv;
  csv << "judge_id,strategy_id,dataset_id,swap_strategy,slice_key,slice,n,n_o,n_s,"
         "acc_o,acc_s,rpag,oo,os,so,ss,low_n\n";
  auto row = [&](const json& parent, const json& r, const std::string& key,
                 const std::string& slice) {
    csv << csv_quote(parent["judge_id"]) << ',' << csv_quote(parent["strategy_id"]) << ','
        << csv_quote(parent["dataset_id"]) << ',' << csv_quote(parent["swap_strategy"])
        << ',' << csv_quote(key) << ',' << csv_quote(slice) << ','
        << r["n"].get<std::size_t>() << ',' << r["n_o"].get<std::size_t>() << ','
        << r["n_s"].get<std::size_t>() << ',' << fixed3(r.value("acc_o", json())) << ','
        << fixed3(r.value("acc_s", json())) << ',' << fixed3(r.value("rpag", json()));
    for (const char* c : kCells) csv << ',' << cell(r, c);
    csv << ',' << (r.value("low_n", false) ? "true" : "false") << '\n';
  };
  for (const auto& r : doc.at("reports")) {
    row(r, r, "all", "all");
    if (!r.contains("strata")) continue;
    for (const auto& [key, slices] : r["strata"].items()) {
      for (const auto& [slice, s] : slices.items()) row(r, s, key, slice);
    }
  }
  return csv.str();
}

}  // namespace refswap
