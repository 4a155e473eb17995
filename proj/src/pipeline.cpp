#include "refswap/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <set>

#include "refswap/annotate.hpp"
#include "refswap/candgen.hpp"
#include "refswap/digest.hpp"
#include "refswap/ingest.hpp"
#include "refswap/report.hpp"
#include "refswap/review.hpp"
#include "refswap/rng.hpp"
#include "refswap/swap.hpp"

namespace refswap {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 9> kStageNames = {{
    {Stage::kIngest, "ingest"},
    {Stage::kAnnotate, "annotate"},
    {Stage::kPopularityBuild, "popularity-build"},
    {Stage::kSwap, "swap"},
    {Stage::kGenerate, "generate"},
    {Stage::kJudge, "judge"},
    {Stage::kScore, "score"},
    {Stage::kReport, "report"},
    {Stage::kFlips, "flips"},
}};

const std::map<std::string, std::string>& producers() {
  static const std::map<std::string, std::string> kProducers = {
      {"instances.jsonl", "ingest"},
      {"skips.jsonl", "ingest"},
      {"annotated.jsonl", "annotate"},
      {"annotation_failures.jsonl", "annotate"},
      {"popularity_high.csv", "popularity-build"},
      {"popularity_low.csv", "popularity-build"},
      {"swaps.jsonl", "swap"},
      {"swap_skips.jsonl", "swap"},
      {"meta_instances.jsonl", "generate"},
      {"triplets.jsonl", "generate"},
      {"reviewed_meta_instances.jsonl", "review-serve"},
      {"verdicts.jsonl", "judge"},
      {"samples.jsonl", "judge"},
      {"judge_failures.jsonl", "judge"},
      {"report.json", "score"},
      {"report.md", "report"},
      {"report.csv", "report"},
      {"flips.jsonl", "flips"},
  };
  return kProducers;
}

struct StagePlan {
  std::vector<fs::path> inputs;  // must exist; digested
  std::vector<std::string> outputs;
  std::vector<std::string> sections;  // config sections the stage depends on
  json extra = json::object();        // other fingerprint material
};

PromptLibrary load_prompts(const RunConfig& cfg) {
  return cfg.prompts_dir ? PromptLibrary::from_directory(*cfg.prompts_dir)
                         : PromptLibrary::builtin();
}

std::string popularity_file(SwapStrategy s) {
  return s == SwapStrategy::kPopularityLow ? "popularity_low.csv" : "popularity_high.csv";
}

bool is_popularity(SwapStrategy s) {
  return s == SwapStrategy::kPopularityHigh || s == SwapStrategy::kPopularityLow;
}

StagePlan plan_for(Stage stage, const RunConfig& cfg, const StageOptions& opts) {
  const fs::path& out = cfg.output_dir;
  StagePlan p;
  switch (stage) {
    case Stage::kIngest:
      for (const auto& d : cfg.datasets) p.inputs.push_back(d.path);
      p.outputs = {"instances.jsonl", "skips.jsonl"};
      p.sections = {"datasets"};
      break;
    case Stage::kAnnotate:
      p.inputs = {out / "instances.jsonl"};
      p.outputs = {"annotated.jsonl", "annotation_failures.jsonl"};
      p.sections = {"annotate", "backends", "prompts_dir", "retry"};
      if (cfg.gazetteer_dir) {
        for (const char* f : {"person.txt", "location.txt", "organization.txt"}) {
          std::error_code ec;
          if (fs::exists(*cfg.gazetteer_dir / f, ec)) p.inputs.push_back(*cfg.gazetteer_dir / f);
        }
      }
      break;
    case Stage::kPopularityBuild:
      p.inputs = {out / "annotated.jsonl"};
      p.outputs = {"popularity_high.csv", "popularity_low.csv"};
      p.extra = {{"k", cfg.popularity_k},
                 {"source", std::string(to_string(cfg.popularity_source))}};
      break;
    case Stage::kSwap:
      p.inputs = {out / "annotated.jsonl"};
      if (is_popularity(cfg.swap_strategy)) {
        p.inputs.push_back(out / popularity_file(cfg.swap_strategy));
      }
      if (opts.only_ids) {
        p.inputs.push_back(*opts.only_ids);
        p.inputs.push_back(out / "swaps.jsonl");
      }
      p.outputs = {"swaps.jsonl", "swap_skips.jsonl"};
      p.sections = {"swap", "backends", "prompts_dir", "retry"};
      break;
    case Stage::kGenerate:
      p.inputs = {out / "swaps.jsonl"};
      p.outputs = {"meta_instances.jsonl", "triplets.jsonl"};
      p.sections = {"candgen", "backends", "prompts_dir", "retry"};
      break;
    case Stage::kJudge:
      p.inputs = {out / cfg.judge_input};
      p.outputs = {"verdicts.jsonl", "samples.jsonl", "judge_failures.jsonl"};
      p.sections = {"judge", "backends", "prompts_dir", "retry"};
      break;
    case Stage::kScore:
      p.inputs = {out / "verdicts.jsonl", out / cfg.judge_input, out / "judge_failures.jsonl"};
      p.outputs = {"report.json"};
      p.sections = {"score"};
      break;
    case Stage::kReport:
      p.inputs = {out / "report.json"};
      p.outputs = {"report.md", "report.csv"};
      break;
    case Stage::kFlips:
      p.inputs = {out / "verdicts.jsonl"};
      p.outputs = {"flips.jsonl"};
      p.sections = {"flips"};
      break;
  }
  p.extra["run_seed"] = cfg.run_seed;
  return p;
}

void require_inputs(Stage stage, const StagePlan& plan) {
  for (const auto& in : plan.inputs) {
    std::error_code ec;
    if (fs::exists(in, ec)) continue;
    std::string producer = producer_of(in.filename().string());
    if (producer.empty()) {
      producer = stage == Stage::kIngest ? "external dataset" : "user-supplied file";
    }
    throw PrerequisiteError(in.string(), producer);
  }
}

json read_manifest_last(const fs::path& manifest, std::string_view stage) {
  json last;
  std::ifstream in(manifest);
  std::string line;
  while (std::getline(in, line)) {
    json e = json::parse(line, nullptr, false);
    if (!e.is_discarded() && e.value("stage", "") == stage) last = std::move(e);
  }
  return last;
}

bool outputs_intact(const fs::path& dir, const json& recorded) {
  if (!recorded.is_object()) return false;
  for (const auto& [name, digest] : recorded.items()) {
    std::error_code ec;
    if (!fs::exists(dir / name, ec)) return false;
    if (file_sha256(dir / name) != digest.get<std::string>()) return false;
  }
  return true;
}

void append_manifest(const fs::path& manifest, const json& entry) {
  std::ofstream out(manifest, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to " + manifest.string());
  out << entry.dump() << '\n';
}

// Per-dataset sampling seed so adding a dataset never reshuffles another.
std::uint64_t sample_seed(std::uint64_t run_seed, DatasetId id) {
  return derive_instance_seed(run_seed, "sample:" + std::string(to_string(id)));
}

json run_ingest(const RunConfig& cfg) {
  if (cfg.datasets.empty()) throw ValidationError("config lists no datasets");
  std::vector<QaInstance> all;
  std::vector<SkipEntry> skips;
  json per_dataset = json::object();
  std::set<std::string> ids;
  for (const auto& src : cfg.datasets) {
    LoadResult loaded = load_dataset(src.path, src.adapter);
    std::size_t loaded_n = loaded.instances.size();
    std::vector<QaInstance> kept = std::move(loaded.instances);
    std::size_t before_filter = kept.size();
    if (src.exclude_false_premise) kept = filter_false_premise(std::move(kept));
    std::size_t after_filter = kept.size();
    if (src.sample_n && *src.sample_n < kept.size()) {
      kept = sample_instances(kept, *src.sample_n, sample_seed(cfg.run_seed,
                                                               src.adapter.dataset_id));
    } else if (src.sample_n && *src.sample_n > kept.size()) {
      spdlog::warn("{}: only {} usable rows, keeping all (sample_n = {})", src.path.string(),
                   kept.size(), *src.sample_n);
    }
    for (const auto& q : kept) {
      if (!ids.insert(q.id).second) {
        throw ValidationError("instance id '" + q.id + "' appears in more than one source");
      }
    }
    per_dataset[src.path.filename().string()] = {
        {"rows", loaded.parsed_rows},
        {"loaded", loaded_n},
        {"skipped", loaded.skips.size()},
        {"false_premise_removed", before_filter - after_filter},
        {"kept", kept.size()}};
    all.insert(all.end(), kept.begin(), kept.end());
    skips.insert(skips.end(), loaded.skips.begin(), loaded.skips.end());
  }
  write_jsonl(cfg.output_dir / "instances.jsonl", all);
  write_jsonl(cfg.output_dir / "skips.jsonl", skips);
  return {{"instances", all.size()}, {"skips", skips.size()}, {"datasets", per_dataset}};
}

json run_annotate(const RunConfig& cfg) {
  auto instances = read_jsonl<QaInstance>(cfg.output_dir / "instances.jsonl");
  AnnotationReport report;
  std::vector<QaInstance> annotated;
  std::size_t unparseable = 0;
  if (cfg.annotator == "heuristic") {
    Gazetteer gaz = cfg.gazetteer_dir ? Gazetteer::load(*cfg.gazetteer_dir) : Gazetteer();
    HeuristicAnnotator annotator(std::move(gaz));
    annotated = annotate_all(instances, annotator, cfg.parallelism, &report);
  } else {
    auto backend = make_backend(cfg, cfg.annotator);
    ModelAnnotator annotator(*backend, load_prompts(cfg), cfg.retry);
    annotated = annotate_all(instances, annotator, cfg.parallelism, &report);
    unparseable = annotator.unparseable();
  }
  write_jsonl(cfg.output_dir / "annotated.jsonl", annotated);
  write_jsonl(cfg.output_dir / "annotation_failures.jsonl", report.failures);
  json counts = json::object();
  for (const auto& [type, n] : report.counts) counts[std::string(to_string(type))] = n;
  return {{"instances", annotated.size()},
          {"entity_types", counts},
          {"failures", report.failures.size()},
          {"unparseable", unparseable}};
}

json run_popularity_build(const RunConfig& cfg) {
  auto instances = read_jsonl<QaInstance>(cfg.output_dir / "annotated.jsonl");
  std::vector<QaInstance> source;
  for (const auto& q : instances) {
    if (q.dataset_id == cfg.popularity_source) source.push_back(q);
  }
  if (source.empty()) {
    throw ValidationError("no " + std::string(to_string(cfg.popularity_source)) +
                          " instances to rank (swap.popularity_source)");
  }
  auto high = build_popularity_list(source, cfg.popularity_k, PopularityBucket::kHigh);
  auto low = build_popularity_list(source, cfg.popularity_k, PopularityBucket::kLow);
  write_file_atomic(cfg.output_dir / "popularity_high.csv", popularity_list_to_csv(high));
  write_file_atomic(cfg.output_dir / "popularity_low.csv", popularity_list_to_csv(low));
  return {{"k", cfg.popularity_k}, {"source_instances", source.size()}};
}

std::set<std::string> read_id_list(const fs::path& path) {
  std::set<std::string> ids;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::string id = trim(line);
    if (!id.empty()) ids.insert(id);
  }
  return ids;
}

json run_swap(const RunConfig& cfg, const StageOptions& opts) {
  auto instances = read_jsonl<QaInstance>(cfg.output_dir / "annotated.jsonl");
  PopularityList popularity;
  PromptLibrary prompts = load_prompts(cfg);
  std::unique_ptr<ModelBackend> evaluator;

  SwapRunOptions so;
  so.strategy = cfg.swap_strategy;
  so.run_seed = cfg.run_seed;
  so.attempt = cfg.swap_attempt;
  so.pinned_entity = cfg.pinned_entity;
  so.retry = cfg.retry;
  so.parallelism = cfg.parallelism;
  so.prompts = &prompts;
  if (is_popularity(cfg.swap_strategy)) {
    auto bucket = cfg.swap_strategy == SwapStrategy::kPopularityLow ? PopularityBucket::kLow
                                                                    : PopularityBucket::kHigh;
    popularity = popularity_list_from_csv(
        read_file(cfg.output_dir / popularity_file(cfg.swap_strategy)), bucket);
    so.popularity = &popularity;
  }
  if (cfg.swap_strategy == SwapStrategy::kEvaluatorKnowledge) {
    evaluator = make_backend(cfg, *cfg.evaluator);
    so.evaluator = evaluator.get();
  }

  if (!opts.only_ids) {
    SwapRunResult r = swap_all(instances, so);
    write_jsonl(cfg.output_dir / "swaps.jsonl", r.swapped);
    write_jsonl(cfg.output_dir / "swap_skips.jsonl", r.skips);
    return {{"strategy", std::string(to_string(cfg.swap_strategy))},
            {"swapped", r.swapped.size()},
            {"skipped", r.skips.size()},
            {"agreed", r.agreed},
            {"unevaluated", r.unevaluated}};
  }

  // Re-swap: only the listed ids get new records; other records are kept.
  const std::set<std::string> ids = read_id_list(*opts.only_ids);
  if (cfg.swap_attempt == 0) {
    throw ValidationError("re-swapping needs a non-zero attempt (--attempt) to draw anew");
  }
  auto existing = read_jsonl<SwappedInstance>(cfg.output_dir / "swaps.jsonl");
  std::vector<QaInstance> targets;
  for (const auto& q : instances) {
    if (ids.count(q.id)) targets.push_back(q);
  }
  if (targets.size() != ids.size()) {
    throw NotFoundError("some ids in " + opts.only_ids->string() + " are not annotated instances");
  }
  // Donor pools still come from the full dataset.
  SwapRunResult r;
  if (cfg.swap_strategy == SwapStrategy::kTypePreserving ||
      cfg.swap_strategy == SwapStrategy::kTypeChanging) {
    for (const auto& q : targets) {
      std::vector<QaInstance> pool;
      for (const auto& d : instances) {
        if (d.dataset_id == q.dataset_id) pool.push_back(d);
      }
      try {
        SwapRecord rec = cfg.swap_strategy == SwapStrategy::kTypePreserving
                             ? swap_type_preserving(q, pool, cfg.run_seed, cfg.swap_attempt)
                             : swap_type_changing(q, pool, cfg.run_seed, cfg.swap_attempt);
        r.swapped.push_back({q, rec});
      } catch (const SwapSkip& e) {
        r.skips.push_back({q.id, e.what()});
      }
    }
  } else {
    r = swap_all(targets, so);
  }
  std::map<std::string, SwappedInstance> fresh;
  for (auto& s : r.swapped) fresh.emplace(s.base.id, std::move(s));
  std::vector<SwappedInstance> merged;
  for (const auto& q : instances) {
    if (ids.count(q.id)) {
      if (auto it = fresh.find(q.id); it != fresh.end()) merged.push_back(it->second);
      continue;
    }
    for (const auto& e : existing) {
      if (e.base.id == q.id) {
        merged.push_back(e);
        break;
      }
    }
  }
  write_jsonl(cfg.output_dir / "swaps.jsonl", merged);
  write_jsonl(cfg.output_dir / "swap_skips.jsonl", r.skips);
  return {{"strategy", std::string(to_string(cfg.swap_strategy))},
          {"reswapped", r.swapped.size()},
          {"skipped", r.skips.size()},
          {"total", merged.size()}};
}

json run_generate(const RunConfig& cfg) {
  auto swapped = read_jsonl<SwappedInstance>(cfg.output_dir / "swaps.jsonl");
  PromptLibrary prompts = load_prompts(cfg);
  std::unique_ptr<ModelBackend> backend;
  if (cfg.candgen.mode == CandidateMode::kModel) backend = make_backend(cfg, *cfg.candgen_backend);
  CandidateStats stats;
  auto meta = attach_candidates(swapped, cfg.candgen, backend.get(), prompts, cfg.retry,
                                cfg.parallelism, &stats);
  std::vector<EvalTriplet> triplets;
  for (const auto& m : meta) {
    if (auto rule = check_invariants(m); !rule.empty()) {
      throw ValidationError("instance '" + m.base.id + "' violates: " + rule);
    }
    for (auto& t : make_triplets(m)) triplets.push_back(std::move(t));
  }
  write_jsonl(cfg.output_dir / "meta_instances.jsonl", meta);
  write_jsonl(cfg.output_dir / "triplets.jsonl", triplets);
  return {{"instances", meta.size()},
          {"triplets", triplets.size()},
          {"model_accepted", stats.model_accepted},
          {"template_fallbacks", stats.template_fallbacks}};
}

json run_judge(const RunConfig& cfg) {
  auto instances = read_jsonl<MetaEvalInstance>(cfg.output_dir / cfg.judge_input);
  if (cfg.judges.empty()) throw ValidationError("$.judge.judges: no judges configured");
  PromptLibrary prompts = load_prompts(cfg);
  std::vector<std::unique_ptr<ModelBackend>> owned;
  std::vector<ModelBackend*> judges;
  for (const auto& id : cfg.judges) {
    owned.push_back(make_backend(cfg, id));
    judges.push_back(owned.back().get());
  }
  std::vector<PromptStrategy> strategies;
  for (StrategyId id : cfg.strategies) {
    strategies.push_back(PromptStrategy::make(id, cfg.sc_k, cfg.sc_temperature));
  }
  ResponseCache cache(cfg.output_dir / "cache");
  JudgeOptions jo;
  jo.max_tokens = cfg.max_tokens;
  jo.retry = cfg.retry;
  jo.cache = &cache;
  JudgeCounters counters;
  JudgeRunResult r = run_judging(instances, judges, strategies, prompts, jo, cfg.parallelism,
                                 &counters);
  write_jsonl(cfg.output_dir / "verdicts.jsonl", r.verdicts);
  write_jsonl(cfg.output_dir / "samples.jsonl", r.samples);
  write_jsonl(cfg.output_dir / "judge_failures.jsonl", r.failures);
  return {{"verdicts", r.verdicts.size()},
          {"samples", r.samples.size()},
          {"failures", r.failures.size()},
          {"reviewed_out", r.reviewed_out},
          {"backend_calls", counters.backend_calls.load()},
          {"cache_hits", counters.cache_hits.load()},
          {"parse_failures", counters.parse_failures.load()}};
}

std::size_t count_lines(const fs::path& path) {
  std::size_t n = 0;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) n += trim(line).empty() ? 0 : 1;
  return n;
}

json run_score(const RunConfig& cfg) {
  auto verdicts = read_jsonl<Verdict>(cfg.output_dir / "verdicts.jsonl");
  auto instances = read_jsonl<MetaEvalInstance>(cfg.output_dir / cfg.judge_input);
  auto reports = score_all(verdicts, index_attributes(instances), cfg.stratify, cfg.min_n);
  std::size_t failures = count_lines(cfg.output_dir / "judge_failures.jsonl");
  json doc = report_document(reports, {{"run_seed", cfg.run_seed},
                                       {"judge_failures", failures},
                                       {"verdicts", verdicts.size()}});
  write_file_atomic(cfg.output_dir / "report.json", doc.dump(2) + "\n");
  std::size_t undefined = 0;
  for (const auto& r : reports) undefined += r.undefined ? 1 : 0;
  return {{"reports", reports.size()}, {"undefined", undefined}};
}

json run_report(const RunConfig& cfg) {
  json doc = json::parse(read_file(cfg.output_dir / "report.json"));
  write_file_atomic(cfg.output_dir / "report.md", render_markdown(doc));
  write_file_atomic(cfg.output_dir / "report.csv", render_csv(doc));
  return {{"reports", doc.at("reports").size()}};
}

json run_flips(const RunConfig& cfg) {
  auto verdicts = read_jsonl<Verdict>(cfg.output_dir / "verdicts.jsonl");
  std::vector<std::string> judge_order;
  std::map<std::string, std::pair<std::vector<Verdict>, std::vector<Verdict>>> by_judge;
  for (const auto& v : verdicts) {
    bool first = v.strategy_id == cfg.flips_strategy1;
    bool second = v.strategy_id == cfg.flips_strategy2;
    if (!first && !second) continue;
    auto [it, inserted] = by_judge.try_emplace(v.judge_id);
    if (inserted) judge_order.push_back(v.judge_id);
    (first ? it->second.first : it->second.second).push_back(v);
  }
  std::vector<FlipRecord> flips;
  for (const auto& judge : judge_order) {
    const auto& [s1, s2] = by_judge.at(judge);
    if (s1.empty() || s2.empty()) {
      throw ArgumentError("judge '" + judge + "' lacks verdicts for strategy '" +
                          (s1.empty() ? cfg.flips_strategy1 : cfg.flips_strategy2) + "'");
    }
    auto f = flip_analysis(s1, s2);
    flips.insert(flips.end(), f.begin(), f.end());
  }
  if (judge_order.empty()) {
    throw ArgumentError("no verdicts for strategies '" + cfg.flips_strategy1 + "' and '" +
                        cfg.flips_strategy2 + "'");
  }
  std::size_t total = flips.size();
  if (cfg.flips_sample > 0) {
    flips = sample_flips(flips, cfg.flips_sample, derive_instance_seed(cfg.run_seed, "flips"));
  }
  write_jsonl(cfg.output_dir / "flips.jsonl", flips);
  return {{"flips", total}, {"exported", flips.size()}};
}

}  // namespace

std::string_view to_string(Stage s) {
  for (const auto& [stage, name] : kStageNames) {
    if (stage == s) return name;
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  for (const auto& [stage, name] : kStageNames) {
    if (name == s) return stage;
  }
  throw ArgumentError("unknown stage '" + std::string(s) + "'");
}

std::string producer_of(const std::string& file_name) {
  auto it = producers().find(file_name);
  return it == producers().end() ? "" : it->second;
}

StageOutcome run_stage(Stage stage, const RunConfig& cfg, const StageOptions& opts) {
  const std::string name(to_string(stage));
  StagePlan plan = plan_for(stage, cfg, opts);
  require_inputs(stage, plan);
  fs::create_directories(cfg.output_dir);

  json inputs = json::object();
  for (const auto& in : plan.inputs) inputs[in.string()] = file_sha256(in);
  json sections = json::object();
  json config_used = json::object();
  for (const auto& s : plan.sections) {
    sections[s] = section_digest(cfg, s);
    config_used[s] = cfg.raw.contains(s) ? cfg.raw[s] : json();
  }
  json material{{"stage", name}, {"inputs", inputs}, {"config", sections},
                {"extra", plan.extra}};
  const std::string fingerprint = sha256_hex(material.dump());

  const fs::path manifest = cfg.output_dir / kManifestFile;
  if (!opts.force) {
    json last = read_manifest_last(manifest, name);
    if (!last.is_null() && last.value("fingerprint", "") == fingerprint &&
        outputs_intact(cfg.output_dir, last.value("outputs", json()))) {
      spdlog::info("{}: up to date, skipped", name);
      return {true, last.value("counts", json::object())};
    }
  }

  spdlog::info("{}: running", name);
  json counts;
  switch (stage) {
    case Stage::kIngest:
      counts = run_ingest(cfg);
      break;
    case Stage::kAnnotate:
      counts = run_annotate(cfg);
      break;
    case Stage::kPopularityBuild:
      counts = run_popularity_build(cfg);
      break;
    case Stage::kSwap:
      counts = run_swap(cfg, opts);
      break;
    case Stage::kGenerate:
      counts = run_generate(cfg);
      break;
    case Stage::kJudge:
      counts = run_judge(cfg);
      break;
    case Stage::kScore:
      counts = run_score(cfg);
      break;
    case Stage::kReport:
      counts = run_report(cfg);
      break;
    case Stage::kFlips:
      counts = run_flips(cfg);
      break;
  }

  json outputs = json::object();
  for (const auto& out : plan.outputs) outputs[out] = file_sha256(cfg.output_dir / out);
  append_manifest(manifest, {{"stage", name},
                             {"fingerprint", fingerprint},
                             {"run_seed", cfg.run_seed},
                             {"config_digests", sections},
                             {"config", config_used},
                             {"extra", plan.extra},
                             {"inputs", inputs},
                             {"outputs", outputs},
                             {"counts", counts},
                             {"finished_at", utc_timestamp()}});
  spdlog::info("{}: done {}", name, counts.dump());
  return {false, counts};
}

}  // namespace refswap
