#include "refswap/config.hpp"

#include <functional>
#include <set>

#include "refswap/digest.hpp"

namespace refswap {

namespace {

// Collects "<path>: <message>" lines instead of stopping at the first error.
class Checker {
 public:
  void check(const std::string& path, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const json::exception& e) {
      fail(path, json_message(e));
    } catch (const std::exception& e) {
      fail(path, e.what());
    }
  }
  void fail(const std::string& path, const std::string& message) {
    errors_.push_back(path + ": " + message);
  }
  void throw_if_failed() const {
    if (errors_.empty()) return;
    std::string msg = "invalid config (" + std::to_string(errors_.size()) + " problem" +
                      (errors_.size() == 1 ? "" : "s") + ")";
    for (const auto& e : errors_) msg += "\n  " + e;
    throw ValidationError(msg);
  }

 private:
  static std::string json_message(const json::exception& e) {
    std::string what = e.what();
    // Drop nlohmann's "[json.exception.type_error.302] " prefix.
    if (auto p = what.find("] "); p != std::string::npos) what = what.substr(p + 2);
    return what;
  }
  std::vector<std::string> errors_;
};

void check_keys(Checker& c, const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) {
    c.fail(path, "must be an object");
    return;
  }
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.count(k)) c.fail(path + "." + k, "unknown key");
  }
}

const json kEmptyObject = json::object();

const json& section(const json& doc, const char* key) {
  auto it = doc.find(key);
  return it == doc.end() || it->is_null() ? kEmptyObject : *it;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() ? base / path : path;
}

template <typename T>
void read(Checker& c, const json& obj, const std::string& path, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  c.check(path + "." + key, [&] { out = it->get<T>(); });
}

}  // namespace

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  Checker c;
  RunConfig cfg;
  cfg.raw = doc;
  if (!doc.is_object()) {
    c.fail("$", "config must be a JSON object");
    c.throw_if_failed();
  }
  check_keys(c, doc, "$",
             {"run_seed", "output_dir", "parallelism", "offline", "prompts_dir", "backends",
              "datasets", "annotate", "swap", "candgen", "judge", "retry", "score", "flips",
              "review"});

  read(c, doc, "$", "run_seed", cfg.run_seed);
  {
    std::string out;
    read(c, doc, "$", "output_dir", out);
    if (!out.empty()) cfg.output_dir = resolve(base_dir, out);
    else cfg.output_dir = base_dir / "run";
  }
  read(c, doc, "$", "parallelism", cfg.parallelism);
  if (cfg.parallelism == 0) c.fail("$.parallelism", "must be positive");
  read(c, doc, "$", "offline", cfg.offline);
  if (doc.contains("prompts_dir")) {
    std::string p;
    read(c, doc, "$", "prompts_dir", p);
    if (!p.empty()) cfg.prompts_dir = resolve(base_dir, p);
  }

  // Backends.
  const json& backends = section(doc, "backends");
  if (!backends.is_object()) c.fail("$.backends", "must be an object keyed by backend id");
  const json& backend_map = backends.is_object() ? backends : kEmptyObject;
  for (const auto& [id, spec] : backend_map.items()) {
    const std::string path = "$.backends." + id;
    c.check(path, [&] {
      BackendSpec b;
      std::string type = spec.value("type", std::string("mock"));
      if (type == "mock") {
        b.kind = BackendSpec::Kind::kMock;
        b.mock = mock_spec_from_json(spec, base_dir);
      } else if (type == "http") {
        b.kind = BackendSpec::Kind::kHttp;
        b.http.id = id;
        b.http.base_url = require_string(spec, "base_url");
        b.http.model = require_string(spec, "model");
        b.http.api_key_env = spec.value("api_key_env", b.http.api_key_env);
        b.http.timeout = std::chrono::seconds(spec.value("timeout_s", 120));
        if (spec.contains("api_key")) {
          throw ValidationError("secrets are read from the environment; use api_key_env");
        }
      } else {
        throw ValidationError("unknown backend type '" + type + "' (mock or http)");
      }
      cfg.backends[id] = std::move(b);
    });
  }
  auto require_backend = [&](const std::string& path, const std::string& id) {
    auto it = cfg.backends.find(id);
    if (it == cfg.backends.end()) {
      if (!backends.is_object() || !backends.contains(id)) {
        c.fail(path, "unknown backend '" + id + "'");
      }
      return;
    }
    if (cfg.offline && it->second.kind == BackendSpec::Kind::kHttp) {
      c.fail(path, "backend '" + id + "' uses the network but offline mode is set");
    }
  };

  // Datasets.
  const json& datasets = doc.contains("datasets") ? doc["datasets"] : json::array();
  if (!datasets.is_array()) c.fail("$.datasets", "must be an array");
  for (std::size_t i = 0; datasets.is_array() && i < datasets.size(); ++i) {
    const std::string path = "$.datasets[" + std::to_string(i) + "]";
    const json& d = datasets[i];
    check_keys(c, d, path,
               {"path", "dataset_id", "field_map", "format", "skip_leading_rows", "sample_n",
                "exclude_false_premise"});
    if (!d.is_object()) continue;
    DatasetSource src;
    bool ok = true;
    c.check(path + ".path", [&] { src.path = resolve(base_dir, require_string(d, "path")); });
    try {
      src.adapter = adapter_from_json(d);
    } catch (const std::exception& e) {
      ok = false;
      c.fail(path, e.what());
    }
    if (d.contains("sample_n")) {
      std::size_t n = 0;
      read(c, d, path, "sample_n", n);
      if (n == 0) c.fail(path + ".sample_n", "must be positive");
      src.sample_n = n;
    }
    read(c, d, path, "exclude_false_premise", src.exclude_false_premise);
    if (ok) cfg.datasets.push_back(std::move(src));
  }

  // Annotation.
  const json& ann = section(doc, "annotate");
  check_keys(c, ann, "$.annotate", {"annotator", "gazetteer_dir"});
  read(c, ann, "$.annotate", "annotator", cfg.annotator);
  if (cfg.annotator != "heuristic") require_backend("$.annotate.annotator", cfg.annotator);
  if (ann.contains("gazetteer_dir")) {
    std::string g;
    read(c, ann, "$.annotate", "gazetteer_dir", g);
    cfg.gazetteer_dir = resolve(base_dir, g);
  }

  // Swap.
  const json& swap = section(doc, "swap");
  check_keys(c, swap, "$.swap",
             {"strategy", "attempt", "popularity_k", "popularity_source", "pinned_entity",
              "evaluator"});
  if (swap.contains("strategy")) {
    c.check("$.swap.strategy", [&] {
      cfg.swap_strategy = swap_strategy_from_string(swap["strategy"].get<std::string>());
    });
  }
  read(c, swap, "$.swap", "attempt", cfg.swap_attempt);
  read(c, swap, "$.swap", "popularity_k", cfg.popularity_k);
  if (cfg.popularity_k == 0) c.fail("$.swap.popularity_k", "must be positive");
  if (swap.contains("popularity_source")) {
    c.check("$.swap.popularity_source", [&] {
      cfg.popularity_source = dataset_id_from_string(swap["popularity_source"].get<std::string>());
    });
  }
  if (swap.contains("pinned_entity")) {
    std::string p;
    read(c, swap, "$.swap", "pinned_entity", p);
    cfg.pinned_entity = p;
  }
  if (swap.contains("evaluator")) {
    std::string e;
    read(c, swap, "$.swap", "evaluator", e);
    cfg.evaluator = e;
  }
  if (cfg.swap_strategy == SwapStrategy::kEvaluatorKnowledge) {
    if (!cfg.evaluator) c.fail("$.swap.evaluator", "required for evaluator_knowledge swaps");
    else require_backend("$.swap.evaluator", *cfg.evaluator);
  }

  // Candidate generation.
  const json& cg = section(doc, "candgen");
  check_keys(c, cg, "$.candgen", {"mode", "backend", "max_retries"});
  if (cg.contains("mode")) {
    c.check("$.candgen.mode", [&] {
      std::string m = cg["mode"].get<std::string>();
      if (m == "template") cfg.candgen.mode = CandidateMode::kTemplate;
      else if (m == "model") cfg.candgen.mode = CandidateMode::kModel;
      else throw ValidationError("must be 'template' or 'model'");
    });
  }
  read(c, cg, "$.candgen", "max_retries", cfg.candgen.max_retries);
  if (cfg.candgen.max_retries < 0) c.fail("$.candgen.max_retries", "must be >= 0");
  if (cg.contains("backend")) {
    std::string b;
    read(c, cg, "$.candgen", "backend", b);
    cfg.candgen_backend = b;
  }
  if (cfg.candgen.mode == CandidateMode::kModel) {
    if (!cfg.candgen_backend) c.fail("$.candgen.backend", "required in model mode");
    else require_backend("$.candgen.backend", *cfg.candgen_backend);
  }

  // Judging.
  const json& jd = section(doc, "judge");
  check_keys(c, jd, "$.judge",
             {"judges", "strategies", "sc_k", "sc_temperature", "max_tokens", "input"});
  read(c, jd, "$.judge", "judges", cfg.judges);
  for (std::size_t i = 0; i < cfg.judges.size(); ++i) {
    require_backend("$.judge.judges[" + std::to_string(i) + "]", cfg.judges[i]);
  }
  if (jd.contains("strategies")) {
    cfg.strategies.clear();
    std::vector<std::string> names;
    read(c, jd, "$.judge", "strategies", names);
    for (std::size_t i = 0; i < names.size(); ++i) {
      c.check("$.judge.strategies[" + std::to_string(i) + "]",
              [&] { cfg.strategies.push_back(strategy_id_from_string(names[i])); });
    }
    if (names.empty()) c.fail("$.judge.strategies", "must list at least one strategy");
  }
  read(c, jd, "$.judge", "sc_k", cfg.sc_k);
  if (cfg.sc_k < 1) c.fail("$.judge.sc_k", "must be positive");
  read(c, jd, "$.judge", "sc_temperature", cfg.sc_temperature);
  if (cfg.sc_temperature < 0) c.fail("$.judge.sc_temperature", "must be >= 0");
  read(c, jd, "$.judge", "max_tokens", cfg.max_tokens);
  if (cfg.max_tokens < 1) c.fail("$.judge.max_tokens", "must be positive");
  read(c, jd, "$.judge", "input", cfg.judge_input);

  // Retry.
  const json& rt = section(doc, "retry");
  check_keys(c, rt, "$.retry", {"max_attempts", "initial_backoff_ms", "multiplier", "jitter"});
  read(c, rt, "$.retry", "max_attempts", cfg.retry.max_attempts);
  if (cfg.retry.max_attempts < 1) c.fail("$.retry.max_attempts", "must be positive");
  if (rt.contains("initial_backoff_ms")) {
    long ms = 0;
    read(c, rt, "$.retry", "initial_backoff_ms", ms);
    if (ms < 0) c.fail("$.retry.initial_backoff_ms", "must be >= 0");
    cfg.retry.initial_backoff = std::chrono::milliseconds(ms);
  }
  read(c, rt, "$.retry", "multiplier", cfg.retry.multiplier);
  read(c, rt, "$.retry", "jitter", cfg.retry.jitter);
  if (cfg.retry.jitter < 0 || cfg.retry.jitter >= 1) {
    c.fail("$.retry.jitter", "must be in [0, 1)");
  }

  // Scoring and flips.
  const json& sc = section(doc, "score");
  check_keys(c, sc, "$.score", {"min_n", "stratify"});
  read(c, sc, "$.score", "min_n", cfg.min_n);
  if (sc.contains("stratify")) {
    std::vector<std::string> keys;
    read(c, sc, "$.score", "stratify", keys);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      c.check("$.score.stratify[" + std::to_string(i) + "]",
              [&] { cfg.stratify.push_back(stratify_key_from_string(keys[i])); });
    }
  }
  const json& fl = section(doc, "flips");
  check_keys(c, fl, "$.flips", {"strategy1", "strategy2", "sample"});
  read(c, fl, "$.flips", "strategy1", cfg.flips_strategy1);
  read(c, fl, "$.flips", "strategy2", cfg.flips_strategy2);
  read(c, fl, "$.flips", "sample", cfg.flips_sample);

  const json& rv = section(doc, "review");
  check_keys(c, rv, "$.review", {"host", "port", "static_dir"});
  read(c, rv, "$.review", "host", cfg.review_host);
  read(c, rv, "$.review", "port", cfg.review_port);
  if (cfg.review_port < 0 || cfg.review_port > 65535) c.fail("$.review.port", "out of range");
  if (rv.contains("static_dir")) {
    std::string s;
    read(c, rv, "$.review", "static_dir", s);
    cfg.review_static_dir = resolve(base_dir, s);
  }

  c.throw_if_failed();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError(path.string() + ": not valid JSON");
  return parse_run_config(doc, path.parent_path());
}

std::string section_digest(const RunConfig& config, const std::string& name) {
  auto it = config.raw.find(name);
  std::string body = it == config.raw.end() ? "null" : it->dump();
  return sha256_hex(name + "\n" + body);
}

std::unique_ptr<ModelBackend> make_backend(const RunConfig& config, const std::string& id) {
  auto it = config.backends.find(id);
  if (it == config.backends.end()) throw ValidationError("unknown backend '" + id + "'");
  if (it->second.kind == BackendSpec::Kind::kMock) {
    return std::make_unique<MockBackend>(id, it->second.mock);
  }
  if (config.offline) {
    throw ValidationError("backend '" + id + "' uses the network but offline mode is set");
  }
  return std::make_unique<HttpChatBackend>(it->second.http);
}

}  // namespace refswap
