// Acceptance suite. `acceptance cN` checks one criterion and prints a single
// PASS or FAIL line; the exit status follows the verdict.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "refswap/config.hpp"
#include "refswap/ingest.hpp"
#include "refswap/judge.hpp"
#include "refswap/metrics.hpp"
#include "refswap/pipeline.hpp"
#include "refswap/review.hpp"
#include "refswap/swap.hpp"
#include "testing.hpp"

using namespace refswap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

const json& first_report(const RunConfig& cfg) {
  static json doc;
  doc = json::parse(read_file(cfg.output_dir / "report.json"));
  return doc.at("reports").at(0);
}

RunConfig run_pipeline(const testing::TempDir& dir, const json& extra,
                       std::initializer_list<Stage> stages) {
  RunConfig cfg =
      parse_run_config(testing::synthetic_config(dir / "run", extra), dir.path());
  for (Stage s : stages) run_stage(s, cfg);
  return cfg;
}

constexpr std::initializer_list<Stage> kThroughScore = {
    Stage::kIngest, Stage::kAnnotate, Stage::kSwap, Stage::kGenerate, Stage::kJudge,
    Stage::kScore};

// ---------------------------------------------------------------------------

// Naive oracle: count every correct verdict of each instance that has both
// b verdicts for reference polarity a, one triplet at a time.
struct NaiveCounts {
  std::size_t n = 0, correct = 0;
  std::map<Polarity, std::size_t> cell_correct;
};

NaiveCounts naive(const std::vector<Verdict>& verdicts, Polarity a) {
  std::map<std::string, std::map<Polarity, Label>> seen;
  for (const auto& v : verdicts) {
    if (v.reference_polarity == a) seen[v.instance_id][v.candidate_polarity] = v.label;
  }
  NaiveCounts c;
  for (const auto& [id, by_b] : seen) {
    if (by_b.size() != 2) continue;
    ++c.n;
    for (const auto& [b, label] : by_b) {
      if (label == ground_truth_label(a, b)) {
        ++c.correct;
        ++c.cell_correct[b];
      }
    }
  }
  return c;
}

Outcome c1() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::size_t checked = 0;
  for (int f = 0; f < 200; ++f) {
    std::size_t n = 1 + rng() % 50;
    std::vector<Verdict> v;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto [a, b] : kTripletOrder) {
        if (rng() % 10 == 0) continue;  // a failed triplet
        v.push_back(testing::make_verdict("i" + std::to_string(i), a, b,
                                          rng() % 2 ? Label::kCorrect : Label::kIncorrect));
      }
    }
    std::shuffle(v.begin(), v.end(), rng);
    auto cells = [&] {
      try {
        return pairing_breakdown(v);
      } catch (const UndefinedReportError&) {
        return std::map<Cell, double>{};
      }
    }();
    for (Polarity a : {Polarity::kOriginal, Polarity::kSwapped}) {
      NaiveCounts oracle = naive(v, a);
      if (oracle.n == 0) {
        try {
          accuracy(v, a);
          return {false, "fixture " + std::to_string(f) + ": empty polarity did not raise"};
        } catch (const UndefinedReportError&) {
          continue;
        }
      }
      double expect = static_cast<double>(oracle.correct) / (2.0 * oracle.n);
      double got = accuracy(v, a);
      if (got != expect) {
        return {false, "fixture " + std::to_string(f) + ": accuracy " + fmt(got) +
                           " != oracle " + fmt(expect)};
      }
      for (Polarity b : {Polarity::kOriginal, Polarity::kSwapped}) {
        double cell = static_cast<double>(oracle.cell_correct[b]) / oracle.n;
        if (cells.at({a, b}) != cell) {
          return {false, "fixture " + std::to_string(f) + ": cell " +
                             std::string(to_string(a)) + std::string(to_string(b)) + " " +
                             fmt(cells.at({a, b})) + " != " + fmt(cell)};
        }
      }
      ++checked;
    }
  }
  double secs = seconds_since(t0);
  return {secs < 5.0, std::to_string(checked) + " polarity checks exact, " + fmt(secs) + " s"};
}

Outcome c2() {
  testing::TempDir dir;
  RunConfig cfg = run_pipeline(dir, json::object(), kThroughScore);
  const json& r = first_report(cfg);
  double o = r.at("acc_o"), s = r.at("acc_s"), g = r.at("rpag");
  std::size_t n = r.at("n");
  return {n == 100 && o == 1.0 && s == 1.0 && g == 0.0,
          "N=" + std::to_string(n) + " ACC^o=" + fmt(o) + " ACC^s=" + fmt(s) +
              " RPAG=" + fmt(g)};
}

Outcome c3() {
  testing::TempDir dir;
  RunConfig cfg =
      run_pipeline(dir, {{"judge", {{"judges", {"believer"}}}}}, kThroughScore);
  const json& r = first_report(cfg);
  const json& p = r.at("pairing");
  double oo = p.at("oo"), os = p.at("os"), so = p.at("so"), ss = p.at("ss");
  double g = r.at("rpag");
  return {oo == 1.0 && os == 1.0 && so == 0.0 && ss == 0.0 && g == 1.0,
          "cells oo=" + fmt(oo) + " os=" + fmt(os) + " so=" + fmt(so) + " ss=" + fmt(ss) +
              " RPAG=" + fmt(g)};
}

Outcome c4() {
  auto t0 = Clock::now();
  testing::TempDir dir;
  json extra = {
      {"backends",
       {{"believer", {{"type", "mock"}, {"kind", "parametric"},
                      {"kb_path", testing::fixture("kb_disagree.json").string()}}}}},
      {"swap", {{"strategy", "evaluator_knowledge"}, {"evaluator", "believer"}}},
      {"judge", {{"judges", {"believer"}}}}};
  RunConfig cfg = run_pipeline(dir, extra, kThroughScore);
  const json& r = first_report(cfg);
  double g = r.at("rpag");
  double secs = seconds_since(t0);
  return {g == 0.0 && secs < 30.0,
          "N=" + std::to_string(r.at("n").get<std::size_t>()) + " ACC^o=" +
              fmt(r.at("acc_o")) + " ACC^s=" + fmt(r.at("acc_s")) + " RPAG=" + fmt(g) +
              " (expected 0), " + fmt(secs) + " s"};
}

Outcome c5() {
  std::mt19937_64 rng(55);
  const std::vector<std::string> syl = {"ka", "lo", "mi", "ru", "te", "sa", "vo", "ne",
                                        "bi", "do", "fu", "gar", "po", "zi"};
  auto word = [&] {
    std::string w;
    for (int i = 0; i < 3; ++i) w += syl[rng() % syl.size()];
    return w;
  };
  std::vector<QaInstance> pool;
  for (int i = 0; i < 1000; ++i) {
    auto type = kAllEntityTypes[rng() % kAllEntityTypes.size()];
    auto ds = rng() % 2 ? DatasetId::kNqOpen : DatasetId::kSciQ;
    // Small answer vocabulary so that some donors collide under normalization.
    std::string answer = rng() % 4 == 0 ? "The " + word() : word() + " " + word();
    pool.push_back(testing::make_qa("x" + std::to_string(i), "Who named " + word() + "?",
                                    answer, type, ds));
  }
  std::map<std::string, const QaInstance*> by_id;
  for (const auto& q : pool) by_id[q.id] = &q;

  std::size_t swaps = 0;
  for (SwapStrategy strategy : {SwapStrategy::kTypePreserving, SwapStrategy::kTypeChanging}) {
    SwapRunOptions opts;
    opts.strategy = strategy;
    opts.run_seed = 99;
    opts.parallelism = 4;
    SwapRunResult first = swap_all(pool, opts);
    SwapRunResult again = swap_all(pool, opts);
    if (encode_jsonl(first.swapped) != encode_jsonl(again.swapped)) {
      return {false, std::string(to_string(strategy)) + ": rerun not byte-identical"};
    }
    if (first.swapped.size() + first.skips.size() != pool.size()) {
      return {false, "swapped + skipped != instances"};
    }
    for (const auto& s : first.swapped) {
      const QaInstance* donor = by_id.at(std::get<DonorInstanceId>(s.swap.donor).value);
      bool same_type = donor->entity_type == s.base.entity_type;
      if (same_type != (strategy == SwapStrategy::kTypePreserving)) {
        return {false, s.base.id + ": donor type contract broken"};
      }
      if (donor->dataset_id != s.base.dataset_id) {
        return {false, s.base.id + ": donor from another dataset"};
      }
      if (same_answer(s.swap.swapped_reference, s.base.original_reference)) {
        return {false, s.base.id + ": swapped reference equals original"};
      }
      if (auto rule = check_invariants(s.base, s.swap); !rule.empty()) {
        return {false, s.base.id + ": " + rule};
      }
      ++swaps;
    }
  }
  return {swaps > 1900, std::to_string(swaps) + " swaps over 1000 instances checked"};
}

Outcome c6() {
  std::size_t checked = 0;
  for (unsigned mask = 0; mask < 32; ++mask) {
    std::vector<std::string> script;
    std::vector<Label> labels;
    int correct = 0;
    for (int i = 0; i < 5; ++i) {
      bool a = mask >> i & 1;
      correct += a;
      script.push_back(a ? "A" : "B");
      labels.push_back(a ? Label::kCorrect : Label::kIncorrect);
    }
    Label brute = correct * 2 > 5 ? Label::kCorrect : Label::kIncorrect;
    if (aggregate_majority(labels) != brute) {
      return {false, "mask " + std::to_string(mask) + ": aggregate_majority disagrees"};
    }
    // The same sequence end to end through a scripted judge.
    MockBackend judge("scripted", MockJudgeSpec{MockKind::kScripted, std::nullopt, script});
    auto m = testing::make_meta("sc", "Naerun Dotaeth", "Tovaspe Kliomar");
    auto t = judge_triplet(resolve(m, make_triplets(m)[0]), judge,
                           PromptStrategy::make(StrategyId::kSelfConsistency, 5),
                           PromptLibrary::builtin(), JudgeOptions{});
    if (t.verdict.label != brute || t.samples.size() != 5) {
      return {false, "mask " + std::to_string(mask) + ": scripted judge disagrees"};
    }
    ++checked;
  }
  // Even k has exact ties, which count as Incorrect.
  for (unsigned mask = 0; mask < 16; ++mask) {
    std::vector<Label> labels;
    int correct = 0;
    for (int i = 0; i < 4; ++i) {
      bool a = mask >> i & 1;
      correct += a;
      labels.push_back(a ? Label::kCorrect : Label::kIncorrect);
    }
    if (aggregate_majority(labels) != (correct > 2 ? Label::kCorrect : Label::kIncorrect)) {
      return {false, "tie rule broken for mask " + std::to_string(mask)};
    }
  }
  return {checked == 32, "32 of 32 five-sample sequences and 16 tie cases match"};
}

Outcome c7() {
  auto spec = adapter_from_json(json{
      {"dataset_id", "freshqa"},
      {"skip_leading_rows", 2},
      {"field_map",
       {{"question_field", "question"}, {"answer_field", "answer_0"}, {"id_field", "id"},
        {"freshness_field", "fact_type"}, {"false_premise_field", "false_premise"}}}});
  LoadResult loaded = load_dataset(testing::fixture("freshqa_like.csv"), spec);
  std::size_t flagged = 0;
  std::set<std::string> flagged_ids;
  for (const auto& q : loaded.instances) {
    if (q.false_premise.value_or(false)) flagged_ids.insert(q.id);
  }
  flagged = flagged_ids.size();
  auto kept = filter_false_premise(loaded.instances);
  bool exact = loaded.instances.size() == 60 && flagged == 12 &&
               kept.size() == loaded.instances.size() - flagged &&
               std::none_of(kept.begin(), kept.end(),
                            [&](const QaInstance& q) { return flagged_ids.count(q.id) > 0; });
  std::string detail = "fixture " + std::to_string(loaded.instances.size()) + " rows, " +
                       std::to_string(flagged) + " flagged, " + std::to_string(kept.size()) +
                       " kept";
  if (const char* real = std::getenv("REFSWAP_FRESHQA_CSV"); real && *real) {
    LoadResult full = load_dataset(real, spec);
    std::size_t n = filter_false_premise(full.instances).size();
    detail += "; real corpus " + std::to_string(n) + " kept (expected 452)";
    exact = exact && n == 452;
  } else {
    detail += "; real corpus not present (REFSWAP_FRESHQA_CSV unset), optional check skipped";
  }
  return {exact, detail};
}

Outcome c8() {
  testing::TempDir dir;
  json doc = testing::synthetic_config(dir / "run", {{"judge", {{"judges", {"believer"}}}}});
  fs::path config = testing::write_config(dir.path(), doc);
  std::string cli = testing::shell_quote(REFSWAP_CLI) + " --log-level warn --offline --config " +
                    testing::shell_quote(config.string()) + " ";
  for (const char* stage : {"ingest", "annotate", "swap", "generate", "judge"}) {
    if (testing::run_command(cli + stage).exit_code != 0) {
      return {false, std::string("stage ") + stage + " failed"};
    }
  }
  std::string cold = read_file(dir / "run" / "verdicts.jsonl");
  fs::path log = dir / "sockets.log";
  auto warm = testing::run_command(
      "LD_PRELOAD=" + testing::shell_quote(REFSWAP_SOCKET_GUARD) +
      " REFSWAP_SOCKET_GUARD_LOG=" + testing::shell_quote(log.string()) + " " + cli +
      "--force judge");
  if (warm.exit_code != 0) return {false, "warm judge run failed"};
  json line = json::parse(trim(warm.out));
  std::size_t calls = line.at("counts").at("backend_calls");
  std::size_t hits = line.at("counts").at("cache_hits");
  bool identical = read_file(dir / "run" / "verdicts.jsonl") == cold;
  bool no_sockets = !fs::exists(log);
  return {calls == 0 && identical && no_sockets && hits == 400,
          "backend calls " + std::to_string(calls) + ", cache hits " + std::to_string(hits) +
              ", verdicts " + (identical ? "byte-identical" : "differ") + ", sockets " +
              (no_sockets ? "none" : "attempted")};
}

Outcome c9() {
  testing::TempDir dir;
  const std::size_t n = 20;
  std::vector<MetaEvalInstance> instances;
  for (std::size_t i = 0; i < n; ++i) {
    instances.push_back(testing::make_meta("r" + std::to_string(100 + i),
                                           "Naerun Dotaeth", "Tovaspe Kliomar"));
  }
  for (std::size_t k : {std::size_t{0}, std::size_t{1}, std::size_t{7}, n}) {
    fs::path log = dir / ("decisions_" + std::to_string(k) + ".jsonl");
    ReviewStore store(instances, log);
    for (std::size_t i = 0; i < n; ++i) {
      for (ReviewStage st : kAllReviewStages) {
        // Rejected items were accepted first, so the latest decision must win.
        bool reject = i < k && st == ReviewStage::kCandidateS;
        store.submit({instances[i].base.id, st, ReviewState::kAccepted, std::nullopt, "a", ""});
        if (reject) {
          store.submit({instances[i].base.id, st, ReviewState::kRejected, std::nullopt, "a", ""});
        }
      }
    }
    ExportResult out = store.export_reviewed(false);
    if (out.instances.size() != n - k || !out.invalid.empty()) {
      return {false, "k=" + std::to_string(k) + ": exported " +
                         std::to_string(out.instances.size())};
    }
    for (const auto& m : out.instances) {
      if (auto rule = check_invariants(m); !rule.empty()) return {false, m.base.id + ": " + rule};
    }
    if (replay(read_jsonl<ReviewDecision>(log)) != store.latest()) {
      return {false, "k=" + std::to_string(k) + ": replay differs from latest"};
    }
    ReviewStore reopened(instances, log);
    if (reopened.latest() != store.latest()) {
      return {false, "k=" + std::to_string(k) + ": reopened store differs"};
    }
  }
  return {true, "n=20, k in {0,1,7,20}: exports n-k clean records, replay matches"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"c1", {"metric oracle equivalence", c1}},
      {"c2", {"reference-faithful soundness", c2}},
      {"c3", {"parametric-override extreme", c3}},
      {"c4", {"evaluator-knowledge alignment", c4}},
      {"c5", {"swap invariants", c5}},
      {"c6", {"self-consistency majority", c6}},
      {"c7", {"false-premise filtering", c7}},
      {"c8", {"cache determinism", c8}},
      {"c9", {"review export", c9}},
  };
  std::vector<std::string> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(argv[i]);
  if (wanted.empty()) {
    for (const auto& [id, c] : criteria) wanted.push_back(id);
  }
  spdlog::set_level(spdlog::level::off);
  int failed = 0;
  for (const auto& id : wanted) {
    auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << it->second.first << ": "
              << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
