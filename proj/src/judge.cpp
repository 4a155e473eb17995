#include "refswap/judge.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <map>

#include "refswap/digest.hpp"
#include "refswap/model_json.hpp"

namespace refswap {

namespace {

constexpr std::array<std::pair<StrategyId, std::string_view>, 5> kStrategyNames = {{
    {StrategyId::kStandard, "standard"},
    {StrategyId::kDirect, "direct"},
    {StrategyId::kCot, "cot"},
    {StrategyId::kSelfConsistency, "self_consistency"},
    {StrategyId::kCotSelfConsistency, "cot_self_consistency"},
}};

bool is_word_byte(char c) {
  auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80 || c == '_';
}

std::string shortest_decimal(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

std::string_view to_string(StrategyId id) {
  for (const auto& [s, name] : kStrategyNames) {
    if (s == id) return name;
  }
  return "?";
}

StrategyId strategy_id_from_string(std::string_view s) {
  for (const auto& [id, name] : kStrategyNames) {
    if (name == s) return id;
  }
  throw ValidationError("unknown prompting strategy '" + std::string(s) + "'");
}

PromptStrategy PromptStrategy::make(StrategyId id, int sc_k, double sc_temperature) {
  PromptStrategy s;
  s.id = id;
  s.sc_temperature = sc_temperature;
  s.k = s.self_consistent() ? sc_k : 1;
  if (s.k < 1) throw ValidationError("self-consistency k must be positive");
  if (sc_temperature < 0) throw ValidationError("sc_temperature must be >= 0");
  return s;
}

std::string_view PromptStrategy::template_name() const {
  switch (id) {
    case StrategyId::kDirect:
      return kPromptJudgeDirect;
    case StrategyId::kCot:
    case StrategyId::kCotSelfConsistency:
      return kPromptJudgeCot;
    default:
      return kPromptJudgeStandard;
  }
}

ResolvedTriplet resolve(const MetaEvalInstance& instance, const EvalTriplet& triplet) {
  return ResolvedTriplet{triplet, instance.base.question,
                         instance.reference(triplet.reference_polarity),
                         instance.candidate(triplet.candidate_polarity)};
}

std::string render_prompt(const ResolvedTriplet& triplet, const PromptStrategy& strategy,
                          const PromptLibrary& prompts) {
  return fill_template(prompts.get(strategy.template_name()),
                       {{"question", triplet.question},
                        {"reference", triplet.reference},
                        {"candidate", triplet.candidate}});
}

Grade parse_grade(std::string_view raw) {
  for (std::size_t i = raw.size(); i-- > 0;) {
    char c = raw[i];
    if (c != 'A' && c != 'B' && c != 'C') continue;
    bool left = i == 0 || !is_word_byte(raw[i - 1]);
    bool right = i + 1 == raw.size() || !is_word_byte(raw[i + 1]);
    if (left && right) return c == 'A' ? Grade::kA : c == 'B' ? Grade::kB : Grade::kC;
  }
  return Grade::kUnparseable;
}

Label grade_to_label(Grade grade, std::atomic<std::size_t>* parse_failures) {
  if (grade == Grade::kUnparseable && parse_failures) parse_failures->fetch_add(1);
  return grade == Grade::kA ? Label::kCorrect : Label::kIncorrect;
}

Label aggregate_majority(std::span<const Label> labels) {
  if (labels.empty()) throw ArgumentError("aggregate_majority needs at least one label");
  std::size_t correct = 0;
  for (Label l : labels) correct += l == Label::kCorrect ? 1 : 0;
  std::size_t incorrect = labels.size() - correct;
  return correct > incorrect ? Label::kCorrect : Label::kIncorrect;
}

std::string cache_key(std::string_view judge_id, std::string_view prompt,
                      const SamplingParams& params) {
  std::string buf = "refswap-cache-v1\n";
  buf += "judge_id:" + std::to_string(judge_id.size()) + ":";
  buf += judge_id;
  buf += "\nprompt:" + std::to_string(prompt.size()) + ":";
  buf += prompt;
  buf += "\ntemperature:" + shortest_decimal(params.temperature);
  buf += "\nmax_tokens:" + std::to_string(params.max_tokens);
  buf += "\nsample_index:" + std::to_string(params.sample_index);
  buf += "\n";
  return sha256_hex(buf);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::filesystem::path path = dir_ / (key + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  json blob = json::parse(read_file(path), nullptr, /*allow_exceptions=*/false);
  if (blob.is_discarded() || !blob.contains("output") || !blob["output"].is_string()) {
    return std::nullopt;
  }
  return blob["output"].get<std::string>();
}

void ResponseCache::put(const std::string& key, std::string_view judge_id,
                        const SamplingParams& params, const std::string& output) {
  json blob{{"judge_id", judge_id},
            {"temperature", params.temperature},
            {"max_tokens", params.max_tokens},
            {"sample_index", params.sample_index},
            {"output", output}};
  write_file_atomic(dir_ / (key + ".json"), blob.dump());
}

TripletJudgement judge_triplet(const ResolvedTriplet& triplet, ModelBackend& judge,
                               const PromptStrategy& strategy,
                               const PromptLibrary& prompts, const JudgeOptions& options,
                               JudgeCounters* counters) {
  const std::string prompt = render_prompt(triplet, strategy, prompts);
  const PromptContext ctx{TaskKind::kJudge, triplet.question, triplet.reference,
                          triplet.candidate, strategy.name()};
  TripletJudgement out;
  std::vector<Label> labels;
  for (int s = 0; s < strategy.k; ++s) {
    SamplingParams params{strategy.temperature(), options.max_tokens, s};
    std::string raw;
    std::string key;
    std::optional<std::string> hit;
    if (options.cache) {
      key = cache_key(judge.backend_id(), prompt, params);
      hit = options.cache->get(key);
    }
    if (hit) {
      raw = std::move(*hit);
      if (counters) counters->cache_hits.fetch_add(1);
    } else {
      if (counters) counters->backend_calls.fetch_add(1);
      raw = complete_with_retry(judge, prompt, params, &ctx, options.retry);
      if (options.cache) options.cache->put(key, judge.backend_id(), params, raw);
    }
    Verdict v;
    v.instance_id = triplet.triplet.instance_id;
    v.reference_polarity = triplet.triplet.reference_polarity;
    v.candidate_polarity = triplet.triplet.candidate_polarity;
    v.judge_id = judge.backend_id();
    v.strategy_id = strategy.name();
    v.sample_index = s;
    v.raw_output = std::move(raw);
    v.parsed_grade = parse_grade(v.raw_output);
    v.label = grade_to_label(v.parsed_grade,
                             counters ? &counters->parse_failures : nullptr);
    labels.push_back(v.label);
    out.samples.push_back(std::move(v));
  }

  if (strategy.k == 1) {
    out.verdict = out.samples.front();
    return out;
  }
  Verdict agg = out.samples.front();
  agg.sample_index = 0;
  agg.label = aggregate_majority(labels);
  agg.raw_output.clear();
  std::map<Grade, int> non_a;
  for (const auto& s : out.samples) {
    if (!agg.raw_output.empty()) agg.raw_output += ",";
    agg.raw_output += to_string(s.parsed_grade);
    if (s.parsed_grade != Grade::kA) ++non_a[s.parsed_grade];
  }
  if (agg.label == Label::kCorrect) {
    agg.parsed_grade = Grade::kA;
  } else {
    agg.parsed_grade = Grade::kB;
    int best = 0;
    for (const auto& [g, n] : non_a) {  // map order B, C, UNPARSEABLE breaks ties
      if (n > best) {
        best = n;
        agg.parsed_grade = g;
      }
    }
  }
  out.verdict = std::move(agg);
  return out;
}

void to_json(json& j, const JudgeFailure& v) {
  j = json{{"instance_id", v.triplet.instance_id},
           {"reference_polarity", std::string(to_string(v.triplet.reference_polarity))},
           {"candidate_polarity", std::string(to_string(v.triplet.candidate_polarity))},
           {"judge_id", v.judge_id},
           {"strategy_id", v.strategy_id},
           {"error", v.error}};
}

JudgeRunResult run_judging(const std::vector<MetaEvalInstance>& instances,
                           const std::vector<ModelBackend*>& judges,
                           const std::vector<PromptStrategy>& strategies,
                           const PromptLibrary& prompts, const JudgeOptions& options,
                           std::size_t parallelism, JudgeCounters* counters) {
  JudgeRunResult result;
  std::vector<ResolvedTriplet> resolved;
  for (const auto& inst : instances) {
    try {
      for (const auto& t : make_triplets(inst)) {
        result.triplets.push_back(t);
        resolved.push_back(resolve(inst, t));
      }
    } catch (const ReviewedOutError&) {
      ++result.reviewed_out;
    }
  }

  struct Job {
    ModelBackend* judge;
    const PromptStrategy* strategy;
    const ResolvedTriplet* triplet;
  };
  std::vector<Job> jobs;
  for (ModelBackend* judge : judges) {
    for (const auto& strategy : strategies) {
      for (const auto& t : resolved) jobs.push_back({judge, &strategy, &t});
    }
  }

  std::vector<std::optional<TripletJudgement>> done(jobs.size());
  std::vector<std::string> errors(jobs.size());
  parallel_for(jobs.size(), parallelism, [&](std::size_t i) {
    try {
      done[i] = judge_triplet(*jobs[i].triplet, *jobs[i].judge, *jobs[i].strategy,
                              prompts, options, counters);
    } catch (const TransportError& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (done[i]) {
      result.verdicts.push_back(std::move(done[i]->verdict));
      for (auto& s : done[i]->samples) result.samples.push_back(std::move(s));
    } else {
      result.failures.push_back({jobs[i].triplet->triplet, jobs[i].judge->backend_id(),
                                 jobs[i].strategy->name(), errors[i]});
    }
  }
  return result;
}

}  // namespace refswap
