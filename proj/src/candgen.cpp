#include "refswap/candgen.hpp"

#include <spdlog/spdlog.h>

#include <mutex>

namespace refswap {

std::string template_candidate(std::string_view question, std::string_view reference) {
  std::string ref = trim(reference);
  while (!ref.empty() && ref.back() == '.') ref.pop_back();
  return "The answer to the question \"" + trim(question) + "\" is " + ref + ".";
}

std::string generate_candidate(std::string_view question, std::string_view reference,
                               Polarity polarity, const CandidateGenPolicy& policy,
                               ModelBackend* backend, const PromptLibrary& prompts,
                               const RetryPolicy& retry, CandidateStats* stats) {
  if (policy.mode == CandidateMode::kTemplate) {
    return template_candidate(question, reference);
  }
  if (backend == nullptr) {
    throw ValidationError("model candidate generation needs a backend");
  }
  const auto& tmpl = prompts.get(polarity == Polarity::kOriginal ? kPromptCandidateOriginal
                                                                 : kPromptCandidateSwapped);
  const std::string prompt = fill_template(
      tmpl, {{"question", std::string(question)}, {"reference", std::string(reference)}});
  PromptContext ctx{TaskKind::kCandidate, std::string(question), std::string(reference),
                    "", ""};
  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    std::string reply;
    try {
      reply = trim(complete_with_retry(*backend, prompt, SamplingParams{0.0, 256, attempt},
                                       &ctx, retry));
    } catch (const TransportError& e) {
      spdlog::warn("candidate generation failed, using template: {}", e.what());
      break;
    }
    if (!reply.empty() && normalized_contains(reply, reference)) {
      if (stats) ++stats->model_accepted;
      return reply;
    }
  }
  if (stats) ++stats->template_fallbacks;
  return template_candidate(question, reference);
}

std::vector<MetaEvalInstance> attach_candidates(
    const std::vector<SwappedInstance>& inputs, const CandidateGenPolicy& policy,
    ModelBackend* backend, const PromptLibrary& prompts, const RetryPolicy& retry,
    std::size_t parallelism, CandidateStats* stats) {
  std::vector<MetaEvalInstance> out(inputs.size());
  std::vector<CandidateStats> per_item(inputs.size());
  parallel_for(inputs.size(), parallelism, [&](std::size_t i) {
    const auto& in = inputs[i];
    MetaEvalInstance m;
    m.base = in.base;
    m.swap = in.swap;
    m.candidate_original =
        generate_candidate(in.base.question, in.base.original_reference,
                           Polarity::kOriginal, policy, backend, prompts, retry,
                           &per_item[i]);
    m.candidate_swapped =
        generate_candidate(in.base.question, in.swap.swapped_reference,
                           Polarity::kSwapped, policy, backend, prompts, retry,
                           &per_item[i]);
    m.review = pending_review();
    out[i] = std::move(m);
  });
  if (stats) {
    for (const auto& s : per_item) {
      stats->model_accepted += s.model_accepted;
      stats->template_fallbacks += s.template_fallbacks;
    }
  }
  return out;
}

}  // namespace refswap
