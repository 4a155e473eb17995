#include "refswap/prompts.hpp"

#include "refswap/errors.hpp"
#include "refswap/model_json.hpp"

namespace refswap {

namespace detail {
const std::map<std::string, std::string>& embedded_prompts();
}  // namespace detail

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  for (const auto& [name, body] : detail::embedded_prompts()) {
    lib.templates_.emplace(name, body);
  }
  return lib;
}

PromptLibrary PromptLibrary::from_directory(const std::filesystem::path& dir) {
  PromptLibrary lib;
  for (const auto& [name, body] : detail::embedded_prompts()) {
    std::filesystem::path file = dir / (name + ".txt");
    if (!std::filesystem::exists(file)) {
      throw ValidationError("missing prompt template " + file.string());
    }
    lib.templates_.emplace(name, read_file(file));
  }
  return lib;
}

const std::string& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) {
    throw ValidationError("missing prompt template '" + std::string(name) + "'");
  }
  return it->second;
}

std::string fill_template(std::string_view tmpl,
                          const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

}  // namespace refswap
