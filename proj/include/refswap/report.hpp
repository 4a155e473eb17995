#pragma once

// Table rendering of a report.json document. Accuracies are rounded to three
// decimals here; report.json keeps full precision.

#include <string>
#include <vector>

#include "refswap/metrics.hpp"

namespace refswap {

/// {"reports": [ScoreReport...], plus run-level counters}.
json report_document(const std::vector<ScoreReport>& reports, const json& run_info);

/// Main table (judge x dataset x swap -> ACC^o, ACC^s, RPAG), the 4-cell
/// pairing table, then one table per stratification key.
std::string render_markdown(const json& document);

/// One row per report and per stratum slice.
std::string render_csv(const json& document);

/// "%.3f", or "undefined" for a missing value.
std::string fixed3(const json& value);

}  // namespace refswap
