#include "refswap/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

#include "refswap/core.hpp"

namespace refswap {

std::string complete_with_retry(ModelBackend& backend, const std::string& prompt,
                                const SamplingParams& params,
                                const PromptContext* context,
                                const RetryPolicy& policy) {
  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  auto delay = std::chrono::duration<double, std::milli>(policy.initial_backoff);
  for (int attempt = 1;; ++attempt) {
    try {
      return backend.complete(prompt, params, context);
    } catch (const TransportError& e) {
      if (!e.retriable() || attempt >= policy.max_attempts) throw;
    }
    std::uniform_real_distribution<double> factor(1.0 - policy.jitter,
                                                  1.0 + policy.jitter);
    auto wait = std::chrono::milliseconds(
        static_cast<std::int64_t>(std::llround(delay.count() * factor(jitter_rng))));
    if (policy.sleep) {
      policy.sleep(wait);
    } else {
      std::this_thread::sleep_for(wait);
    }
    delay *= policy.multiplier;
  }
}

void parallel_for(std::size_t n, std::size_t cap,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t workers = std::clamp<std::size_t>(cap, 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto work = [&] {
    for (;;) {
      if (failed.load()) return;
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------

MockJudgeSpec mock_spec_from_json(const json& j,
                                  const std::filesystem::path& base_dir) {
  MockJudgeSpec spec;
  std::string kind = require_string(j, "kind");
  if (kind == "reference_faithful") {
    spec.kind = MockKind::kReferenceFaithful;
  } else if (kind == "parametric") {
    spec.kind = MockKind::kParametric;
  } else if (kind == "scripted") {
    spec.kind = MockKind::kScripted;
  } else {
    throw ValidationError("unknown mock kind '" + kind + "'");
  }
  if (auto it = j.find("kb"); it != j.end()) {
    spec.kb = it->get<std::map<std::string, std::string>>();
  } else if (auto p = j.find("kb_path"); p != j.end()) {
    std::filesystem::path path = p->get<std::string>();
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    spec.kb = json::parse(read_file(path)).get<std::map<std::string, std::string>>();
  }
  if (auto it = j.find("script"); it != j.end()) {
    spec.script = it->get<std::vector<std::string>>();
  }
  if (spec.kind == MockKind::kParametric && !spec.kb) {
    throw ValidationError("parametric mock requires kb or kb_path");
  }
  if (spec.kind == MockKind::kScripted && !spec.script) {
    throw ValidationError("scripted mock requires script");
  }
  return spec;
}

MockBackend::MockBackend(std::string id, MockJudgeSpec spec)
    : id_(std::move(id)), spec_(std::move(spec)) {
  if (spec_.kind == MockKind::kParametric && !spec_.kb) {
    throw ValidationError("parametric mock requires kb");
  }
  if (spec_.kind == MockKind::kScripted && !spec_.script) {
    throw ValidationError("scripted mock requires script");
  }
  if (spec_.kb) {
    for (const auto& [q, a] : *spec_.kb) normalized_kb_[normalize_answer(q)] = a;
  }
}

std::optional<std::string> MockBackend::belief(const std::string& question) const {
  if (spec_.kind != MockKind::kParametric) return std::nullopt;
  auto it = normalized_kb_.find(normalize_answer(question));
  if (it == normalized_kb_.end()) return std::nullopt;
  return it->second;
}

namespace {

// Normalized candidate with one echoed copy of the normalized question
// removed, so a question that mentions an answer cannot leak into grading.
std::string answer_part(const PromptContext& ctx) {
  std::string cand = normalize_answer(ctx.candidate);
  std::string q = normalize_answer(ctx.question);
  if (q.empty()) return cand;
  for (std::size_t pos = cand.find(q); pos != std::string::npos;
       pos = cand.find(q, pos + 1)) {
    bool left = pos == 0 || cand[pos - 1] == ' ';
    bool right = pos + q.size() == cand.size() || cand[pos + q.size()] == ' ';
    if (left && right) {
      cand.erase(pos, q.size());
      break;
    }
  }
  return cand;
}

bool is_cot(const std::string& strategy_id) {
  return strategy_id == "cot" || strategy_id == "cot_self_consistency";
}

}  // namespace

std::string MockBackend::judge_reply(const PromptContext& ctx) const {
  std::string target = ctx.reference;
  std::string basis = "reference";
  if (auto b = belief(ctx.question)) {
    target = *b;
    basis = "belief";
  }
  bool match = contains_tokens(answer_part(ctx), normalize_answer(target));
  const char* grade = match ? "A" : "B";
  if (is_cot(ctx.strategy_id)) {
    return std::string("Comparing the predicted answer with the ") + basis +
           " \"" + target + "\": " + (match ? "it matches." : "it does not match.") +
           "\nFinal grade: " + grade;
  }
  return grade;
}

std::string MockBackend::complete(const std::string& /*prompt*/,
                                  const SamplingParams& /*params*/,
                                  const PromptContext* context) {
  calls_.fetch_add(1);
  if (spec_.kind == MockKind::kScripted) {
    std::lock_guard lock(script_mu_);
    if (script_pos_ >= spec_.script->size()) {
      throw TransportError("scripted mock '" + id_ + "' exhausted its script",
                           /*retriable=*/false);
    }
    return (*spec_.script)[script_pos_++];
  }
  if (context == nullptr) {
    throw TransportError("mock backend '" + id_ + "' needs a prompt context",
                         /*retriable=*/false);
  }
  switch (context->task) {
    case TaskKind::kJudge:
      return judge_reply(*context);
    case TaskKind::kQa:
      if (auto b = belief(context->question)) return *b;
      return context->reference;
    case TaskKind::kNer:
      return "OTHER";
    case TaskKind::kCandidate:
      return "The answer is " + context->reference + ".";
  }
  return {};
}

// ---------------------------------------------------------------------------

std::string extract_short_answer(std::string_view reply) {
  std::string text = trim(reply);
  // First non-empty line.
  std::size_t nl = text.find('\n');
  while (nl != std::string::npos && trim(text.substr(0, nl)).empty()) {
    text = trim(text.substr(nl + 1));
    nl = text.find('\n');
  }
  if (nl != std::string::npos) text = trim(text.substr(0, nl));

  for (std::string_view prefix : {"final answer:", "answer:", "a:", "the answer is "}) {
    if (text.size() >= prefix.size()) {
      std::string head = text.substr(0, prefix.size());
      std::transform(head.begin(), head.end(), head.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
      });
      if (head == prefix) {
        text = trim(text.substr(prefix.size()));
        break;
      }
    }
  }

  // Cut at the first sentence boundary that does not follow an initial
  // ("J. R. R. Tolkien wrote it." keeps the initials).
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && text[i + 1] == ' ') {
      std::size_t word_start = text.rfind(' ', i);
      word_start = word_start == std::string::npos ? 0 : word_start + 1;
      if (c != '.' || i - word_start > 1) {
        text.resize(i);
        break;
      }
    }
  }
  while (!text.empty() && std::string_view(".!?*\"'`").find(text.back()) !=
                              std::string_view::npos) {
    text.pop_back();
  }
  while (!text.empty() &&
         std::string_view("*\"'`").find(text.front()) != std::string_view::npos) {
    text.erase(0, 1);
  }
  return trim(text);
}

}  // namespace refswap
