#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace refswap {

// Template names shipped under prompts/.
inline constexpr std::string_view kPromptJudgeStandard = "judge_standard";
inline constexpr std::string_view kPromptJudgeDirect = "judge_direct";
inline constexpr std::string_view kPromptJudgeCot = "judge_cot";
inline constexpr std::string_view kPromptNer = "ner";
inline constexpr std::string_view kPromptCandidateOriginal = "candidate_original";
inline constexpr std::string_view kPromptCandidateSwapped = "candidate_swapped";
inline constexpr std::string_view kPromptQa = "qa";

/// Plain-text prompt templates with {placeholder} slots.
class PromptLibrary {
 public:
  /// Templates compiled into the binary from prompts/*.txt.
  static PromptLibrary builtin();

  /// Loads <dir>/<name>.txt for every built-in template name. A missing file
  /// is a ValidationError (fatal config error).
  static PromptLibrary from_directory(const std::filesystem::path& dir);

  const std::string& get(std::string_view name) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

/// Single-pass substitution of {key} slots. Unknown slots are left as-is and
/// substituted text is never rescanned.
std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& values);

}  // namespace refswap
