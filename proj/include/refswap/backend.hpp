#pragma once

// Model backend contract shared by the annotator, swap engine, candidate
// generator and judge runner.

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "refswap/errors.hpp"
#include "refswap/model_json.hpp"

namespace refswap {

struct SamplingParams {
  double temperature = 0.0;
  int max_tokens = 1024;
  int sample_index = 0;
};

enum class TaskKind { kJudge, kQa, kNer, kCandidate };

// Structured view of what a prompt was rendered from. Network backends
// ignore it; the offline mocks grade from it instead of re-parsing prompts.
struct PromptContext {
  TaskKind task = TaskKind::kJudge;
  std::string question;
  std::string reference;
  std::string candidate;
  std::string strategy_id;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  /// Returns the model's reply. Failures throw TransportError; an empty
  /// reply is returned as-is, never used to signal an error.
  virtual std::string complete(const std::string& prompt,
                               const SamplingParams& params,
                               const PromptContext* context = nullptr) = 0;

  virtual const std::string& backend_id() const = 0;

  virtual bool uses_network() const { return false; }
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
  double jitter = 0.25;  // delay scaled by a uniform factor in [1-j, 1+j]
  std::function<void(std::chrono::milliseconds)> sleep;  // default: sleep_for
};

/// Calls backend.complete, retrying retriable TransportErrors with jittered
/// exponential backoff. The last error is rethrown once attempts run out.
std::string complete_with_retry(ModelBackend& backend, const std::string& prompt,
                                const SamplingParams& params,
                                const PromptContext* context,
                                const RetryPolicy& policy);

/// Runs fn(i) for i in [0, n) on at most `cap` threads. The first exception
/// thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t cap,
                  const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Offline mock judges.

enum class MockKind { kReferenceFaithful, kParametric, kScripted };

struct MockJudgeSpec {
  MockKind kind = MockKind::kReferenceFaithful;
  std::optional<std::map<std::string, std::string>> kb;  // question -> belief
  std::optional<std::vector<std::string>> script;
};

MockJudgeSpec mock_spec_from_json(const json& j,
                                  const std::filesystem::path& base_dir = {});

/// Deterministic offline backend.
///
/// reference_faithful grades A exactly when the candidate contains the
/// reference (after removing an echoed copy of the question), and answers QA
/// prompts with the supplied reference hint.
///
/// parametric grades against its belief kb[question] instead of the
/// reference, falling back to reference_faithful for questions outside kb.
/// Its QA answer is the belief.
///
/// scripted returns the script entries in call order and fails once the
/// script is exhausted.
class MockBackend : public ModelBackend {
 public:
  MockBackend(std::string id, MockJudgeSpec spec);

  std::string complete(const std::string& prompt, const SamplingParams& params,
                       const PromptContext* context) override;

  const std::string& backend_id() const override { return id_; }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::string judge_reply(const PromptContext& ctx) const;
  std::optional<std::string> belief(const std::string& question) const;

  std::string id_;
  MockJudgeSpec spec_;
  std::map<std::string, std::string> normalized_kb_;
  std::mutex script_mu_;
  std::size_t script_pos_ = 0;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// Chat-completions HTTP backend.

struct HttpBackendConfig {
  std::string id;
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{120};
};

/// POSTs {base_url}/chat/completions with a single user message and returns
/// choices[0].message.content. 429 and 5xx are retriable; other 4xx are not.
class HttpChatBackend : public ModelBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);
  ~HttpChatBackend() override;

  std::string complete(const std::string& prompt, const SamplingParams& params,
                       const PromptContext* context) override;

  const std::string& backend_id() const override { return config_.id; }
  bool uses_network() const override { return true; }

  /// Request body for a prompt; exposed for tests.
  json request_body(const std::string& prompt, const SamplingParams& params) const;

 private:
  HttpBackendConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// Strips anything after the first line/sentence and common answer prefixes
/// from a QA reply ("Answer: Paris." -> "Paris").
std::string extract_short_answer(std::string_view reply);

}  // namespace refswap
