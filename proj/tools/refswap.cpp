// refswap: stage-oriented CLI for building swapped-reference meta-evaluation
// sets, judging them and scoring the judges.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "refswap/pipeline.hpp"
#include "refswap/review.hpp"

namespace fs = std::filesystem;
using namespace refswap;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool offline = false;
  std::string out_dir;
  std::optional<std::size_t> parallelism;
  bool force = false;
  std::string log_level = "info";
};

json load_document(const std::string& path) {
  if (path.empty()) throw ValidationError("--config is required");
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError(path + ": not valid JSON");
  if (!doc.is_object()) throw ValidationError(path + ": config must be a JSON object");
  return doc;
}

// CLI flags override the file before validation so every problem is reported
// together.
RunConfig build_config(const Globals& g, const std::function<void(json&)>& stage_overrides) {
  json doc = load_document(g.config);
  if (g.seed) doc["run_seed"] = *g.seed;
  if (g.offline) doc["offline"] = true;
  if (!g.out_dir.empty()) doc["output_dir"] = fs::absolute(g.out_dir).string();
  if (g.parallelism) doc["parallelism"] = *g.parallelism;
  if (stage_overrides) stage_overrides(doc);
  return parse_run_config(doc, fs::absolute(g.config).parent_path());
}

void print_outcome(Stage stage, const StageOutcome& outcome) {
  json line{{"stage", std::string(to_string(stage))},
            {"skipped", outcome.skipped},
            {"counts", outcome.counts}};
  std::cout << line.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Swapped-reference meta-evaluation harness for LLM judges"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Run config (JSON)");
  app.add_option("--seed", g.seed, "Override run_seed");
  app.add_flag("--offline", g.offline, "Refuse every network backend");
  app.add_option("--out-dir", g.out_dir, "Override output_dir");
  app.add_option("--parallelism", g.parallelism, "Override the in-flight cap")
      ->check(CLI::PositiveNumber);
  app.add_flag("--force", g.force, "Run stages even when up to date");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");

  std::map<CLI::App*, Stage> stages;
  auto add_stage = [&](Stage s, const std::string& help) {
    CLI::App* sub = app.add_subcommand(std::string(to_string(s)), help);
    stages[sub] = s;
    return sub;
  };
  add_stage(Stage::kIngest, "Load, filter and sample source datasets");
  add_stage(Stage::kAnnotate, "Assign entity types to reference answers");
  add_stage(Stage::kPopularityBuild, "Rank PERSON answers by pageviews");

  std::string strategy, only_ids, pin;
  std::optional<unsigned> attempt;
  CLI::App* swap = add_stage(Stage::kSwap, "Swap references under one strategy");
  swap->add_option("--strategy", strategy, "Swap strategy");
  swap->add_option("--attempt", attempt, "Attempt salt for re-swaps");
  swap->add_option("--only-ids", only_ids, "Re-swap only the ids listed in this file");
  swap->add_option("--pin", pin, "Popularity swaps: always use this entry");

  add_stage(Stage::kGenerate, "Generate aligned candidates");

  std::vector<std::string> judges, strategies;
  std::string input;
  CLI::App* judge = add_stage(Stage::kJudge, "Run judges over the triplets");
  judge->add_option("--judges", judges, "Judge backend ids");
  judge->add_option("--strategies", strategies, "Prompting strategies");
  judge->add_option("--input", input, "Meta-instance file in the output directory");

  std::vector<std::string> stratify;
  std::optional<std::size_t> min_n;
  CLI::App* score = add_stage(Stage::kScore, "Compute ACC^o, ACC^s and RPAG");
  score->add_option("--stratify", stratify, "Stratification keys");
  score->add_option("--min-n", min_n, "Slices below this N are flagged low_n");
  score->add_option("--input", input, "Meta-instance file in the output directory");

  add_stage(Stage::kReport, "Render report.md and report.csv");

  std::string s1, s2;
  std::optional<std::size_t> sample;
  CLI::App* flips = add_stage(Stage::kFlips, "Triplets correct under one strategy only");
  flips->add_option("--strategy1", s1, "Strategy judged first");
  flips->add_option("--strategy2", s2, "Strategy judged second");
  flips->add_option("--sample", sample, "Export at most this many flips (0 = all)");

  std::string host, static_dir, token_env = "REFSWAP_REVIEW_TOKEN";
  std::optional<int> port;
  bool do_export = false, include_pending = false;
  std::string review_input = "meta_instances.jsonl";
  CLI::App* review = app.add_subcommand("review-serve", "Serve the human review API");
  review->add_option("--host", host, "Bind address");
  review->add_option("--port", port, "Port");
  review->add_option("--static-dir", static_dir, "Review UI bundle to serve at /");
  review->add_option("--input", review_input, "Meta-instance file in the output directory");
  review->add_option("--token-env", token_env, "Env var holding the shared review token");
  review->add_flag("--export", do_export,
                   "Write reviewed_meta_instances.jsonl from the decision log and exit");
  review->add_flag("--include-pending", include_pending, "Export: keep pending items");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  auto logger = spdlog::stderr_color_mt("refswap");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    auto overrides = [&](json& doc) {
      if (!strategy.empty()) doc["swap"]["strategy"] = strategy;
      if (attempt) doc["swap"]["attempt"] = *attempt;
      if (!pin.empty()) doc["swap"]["pinned_entity"] = pin;
      if (!judges.empty()) doc["judge"]["judges"] = judges;
      if (!strategies.empty()) doc["judge"]["strategies"] = strategies;
      if (!input.empty()) doc["judge"]["input"] = input;
      if (!stratify.empty()) doc["score"]["stratify"] = stratify;
      if (min_n) doc["score"]["min_n"] = *min_n;
      if (!s1.empty()) doc["flips"]["strategy1"] = s1;
      if (!s2.empty()) doc["flips"]["strategy2"] = s2;
      if (sample) doc["flips"]["sample"] = *sample;
      if (!host.empty()) doc["review"]["host"] = host;
      if (port) doc["review"]["port"] = *port;
    };
    RunConfig cfg = build_config(g, overrides);

    if (review->parsed()) {
      fs::path in = cfg.output_dir / review_input;
      if (!fs::exists(in)) throw PrerequisiteError(in.string(), producer_of(review_input));
      ReviewStore store(read_jsonl<MetaEvalInstance>(in), cfg.output_dir / "decisions.jsonl");
      if (do_export) {
        ExportResult out = store.export_reviewed(include_pending);
        write_jsonl(cfg.output_dir / "reviewed_meta_instances.jsonl", out.instances);
        for (const auto& [id, rule] : out.invalid) {
          spdlog::warn("{} left out of the export: {}", id, rule);
        }
        std::cout << json{{"exported", out.instances.size()},
                          {"invalid", out.invalid.size()}}
                         .dump()
                  << std::endl;
        return 0;
      }
      ReviewServerOptions opts;
      opts.host = cfg.review_host;
      opts.port = cfg.review_port;
      if (!static_dir.empty()) opts.static_dir = static_dir;
      else if (cfg.review_static_dir) opts.static_dir = *cfg.review_static_dir;
      if (const char* t = std::getenv(token_env.c_str())) opts.token = t;
      serve_review(store, opts);
      return 0;
    }

    for (const auto& [sub, stage] : stages) {
      if (!sub->parsed()) continue;
      StageOptions opts;
      opts.force = g.force;
      if (!only_ids.empty()) opts.only_ids = fs::absolute(only_ids);
      print_outcome(stage, run_stage(stage, cfg, opts));
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return exit_code(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
