#include "refswap/model_json.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>

namespace refswap {

namespace {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

std::string str(std::string_view s) { return std::string(s); }

}  // namespace

const json& require_field(const json& j, const char* key) {
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  return *it;
}

std::string require_string(const json& j, const char* key) {
  const json& v = require_field(j, key);
  if (!v.is_string()) {
    throw ValidationError(std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

void to_json(json& j, const QaInstance& v) {
  j = json{{"id", v.id},
           {"dataset_id", str(to_string(v.dataset_id))},
           {"question", v.question},
           {"original_reference", v.original_reference}};
  if (v.entity_type) j["entity_type"] = str(to_string(*v.entity_type));
  if (v.freshness) j["freshness"] = str(to_string(*v.freshness));
  put_optional(j, "popularity_pageviews", v.popularity_pageviews);
  put_optional(j, "false_premise", v.false_premise);
}

void from_json(const json& j, QaInstance& v) {
  v.id = require_string(j, "id");
  v.dataset_id = dataset_id_from_string(require_string(j, "dataset_id"));
  v.question = require_string(j, "question");
  v.original_reference = require_string(j, "original_reference");
  v.entity_type.reset();
  v.freshness.reset();
  v.popularity_pageviews.reset();
  v.false_premise.reset();
  if (auto it = j.find("entity_type"); it != j.end() && !it->is_null()) {
    v.entity_type = entity_type_from_string(it->get<std::string>());
  }
  if (auto it = j.find("freshness"); it != j.end() && !it->is_null()) {
    v.freshness = freshness_from_string(it->get<std::string>());
  }
  if (auto it = j.find("popularity_pageviews");
      it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
      throw ValidationError("popularity_pageviews must be a non-negative integer");
    }
    v.popularity_pageviews = it->get<std::uint64_t>();
  }
  if (auto it = j.find("false_premise"); it != j.end() && !it->is_null()) {
    v.false_premise = it->get<bool>();
  }
}

void to_json(json& j, const SwapRecord& v) {
  json donor;
  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, DonorInstanceId>) {
          donor["donor_instance_id"] = d.value;
        } else if constexpr (std::is_same_v<D, PopularityEntryName>) {
          donor["popularity_entry_name"] = d.value;
        } else {
          donor["evaluator_model_id"] = d.value;
        }
      },
      v.donor);
  j = json{{"strategy", str(to_string(v.strategy))},
           {"swapped_reference", v.swapped_reference},
           {"donor", donor},
           {"seed", v.seed}};
}

void from_json(const json& j, SwapRecord& v) {
  v.strategy = swap_strategy_from_string(require_string(j, "strategy"));
  v.swapped_reference = require_string(j, "swapped_reference");
  const json& donor = require_field(j, "donor");
  if (!donor.is_object() || donor.size() != 1) {
    throw ValidationError("donor must be an object with exactly one key");
  }
  if (donor.contains("donor_instance_id")) {
    v.donor = DonorInstanceId{require_string(donor, "donor_instance_id")};
  } else if (donor.contains("popularity_entry_name")) {
    v.donor = PopularityEntryName{require_string(donor, "popularity_entry_name")};
  } else if (donor.contains("evaluator_model_id")) {
    v.donor = EvaluatorModelId{require_string(donor, "evaluator_model_id")};
  } else {
    throw ValidationError("unknown donor kind '" + donor.begin().key() + "'");
  }
  const json& seed = require_field(j, "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() &&
                                      seed.get<std::int64_t>() >= 0)) {
    throw ValidationError("seed must be an unsigned 64-bit integer");
  }
  v.seed = seed.get<std::uint64_t>();
}

void to_json(json& j, const SwappedInstance& v) {
  j = json{{"base", v.base}, {"swap", v.swap}};
}

void from_json(const json& j, SwappedInstance& v) {
  v.base = require_field(j, "base").get<QaInstance>();
  v.swap = require_field(j, "swap").get<SwapRecord>();
}

void to_json(json& j, const MetaEvalInstance& v) {
  json review = json::object();
  for (const auto& [stage, state] : v.review) {
    review[str(to_string(stage))] = str(to_string(state));
  }
  j = json{{"base", v.base},
           {"swap", v.swap},
           {"candidate_original", v.candidate_original},
           {"candidate_swapped", v.candidate_swapped},
           {"review", review}};
}

void from_json(const json& j, MetaEvalInstance& v) {
  v.base = require_field(j, "base").get<QaInstance>();
  v.swap = require_field(j, "swap").get<SwapRecord>();
  v.candidate_original = require_string(j, "candidate_original");
  v.candidate_swapped = require_string(j, "candidate_swapped");
  v.review = pending_review();
  if (auto it = j.find("review"); it != j.end() && !it->is_null()) {
    for (const auto& [stage, state] : it->items()) {
      v.review[review_stage_from_string(stage)] =
          review_state_from_string(state.get<std::string>());
    }
  }
}

void to_json(json& j, const EvalTriplet& v) {
  j = json{{"instance_id", v.instance_id},
           {"reference_polarity", str(to_string(v.reference_polarity))},
           {"candidate_polarity", str(to_string(v.candidate_polarity))},
           {"label", str(to_string(v.label))}};
}

void from_json(const json& j, EvalTriplet& v) {
  v.instance_id = require_string(j, "instance_id");
  v.reference_polarity = polarity_from_string(require_string(j, "reference_polarity"));
  v.candidate_polarity = polarity_from_string(require_string(j, "candidate_polarity"));
  v.label = label_from_string(require_string(j, "label"));
}

void to_json(json& j, const Verdict& v) {
  j = json{{"instance_id", v.instance_id},
           {"reference_polarity", str(to_string(v.reference_polarity))},
           {"candidate_polarity", str(to_string(v.candidate_polarity))},
           {"judge_id", v.judge_id},
           {"strategy_id", v.strategy_id},
           {"sample_index", v.sample_index},
           {"raw_output", v.raw_output},
           {"parsed_grade", str(to_string(v.parsed_grade))},
           {"label", str(to_string(v.label))}};
}

void from_json(const json& j, Verdict& v) {
  v.instance_id = require_string(j, "instance_id");
  v.reference_polarity = polarity_from_string(require_string(j, "reference_polarity"));
  v.candidate_polarity = polarity_from_string(require_string(j, "candidate_polarity"));
  v.judge_id = require_string(j, "judge_id");
  v.strategy_id = require_string(j, "strategy_id");
  v.sample_index = require_field(j, "sample_index").get<int>();
  if (v.sample_index < 0) throw ValidationError("sample_index must be >= 0");
  v.raw_output = require_string(j, "raw_output");
  v.parsed_grade = grade_from_string(require_string(j, "parsed_grade"));
  v.label = label_from_string(require_string(j, "label"));
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace refswap
