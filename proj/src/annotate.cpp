#include "refswap/annotate.hpp"

#include <spdlog/spdlog.h>

#include <regex>
#include <sstream>

namespace refswap {

namespace {

const std::regex& date_regex() {
  static const std::string month =
      "(jan(uary)?|feb(ruary)?|mar(ch)?|apr(il)?|may|june?|july?|aug(ust)?|"
      "sep(t(ember)?)?|oct(ober)?|nov(ember)?|dec(ember)?)\\.?";
  static const std::regex re(
      "^("
      "\\d{4}-\\d{1,2}-\\d{1,2}"                          // 1914-07-28
      "|\\d{1,2}/\\d{1,2}/\\d{2,4}"                       // 7/28/1914
      "|" + month + "\\s+\\d{1,2}(st|nd|rd|th)?(,?\\s+\\d{3,4})?"  // July 28, 1914
      "|\\d{1,2}(st|nd|rd|th)?\\s+(of\\s+)?" + month + "(,?\\s+\\d{3,4})?"
      "|" + month + ",?\\s+\\d{3,4}"                      // July 1914
      "|(the\\s+)?\\d{2,4}'?s"                            // 1990s, the 1920s
      "|\\d{1,4}\\s*(ad|bc|bce|ce|a\\.d\\.|b\\.c\\.)"     // 44 BC
      "|(early|mid|late)[- ]\\d{2,4}'?s?"
      "|\\d{1,2}(st|nd|rd|th)\\s+century(\\s+(bc|ad|bce|ce))?"
      ")$",
      std::regex::icase | std::regex::optimize);
  return re;
}

const std::regex& year_regex() {
  static const std::regex re("^(1\\d{3}|20\\d{2})$", std::regex::optimize);
  return re;
}

const std::regex& numeric_regex() {
  static const std::string spelled =
      "zero|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|"
      "thirteen|fourteen|fifteen|sixteen|seventeen|eighteen|nineteen|twenty|"
      "thirty|forty|fifty|sixty|seventy|eighty|ninety|hundred|thousand";
  static const std::regex re(
      "^("
      "(about|approximately|around|over|under|nearly)?\\s*"
      "[-+]?[$£€]?\\d[\\d,]*(\\.\\d+)?\\s*%?"
      "(\\s+(hundred|thousand|million|billion|trillion|percent))?"
      "(\\s+[a-z°]+){0,2}"
      "|(" + spelled + ")(-(" + spelled + "))?"
      ")$",
      std::regex::icase | std::regex::optimize);
  return re;
}

bool asks_for_quantity(const std::string& lowered_question) {
  static const std::regex re(
      "\\b(how (many|much|long|far|tall|old|big|high|deep)|what (number|"
      "percentage|population)|population)\\b",
      std::regex::optimize);
  return std::regex_search(lowered_question, re);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::optional<EntityType> regex_rule(const std::string& question,
                                     const std::string& answer) {
  if (std::regex_match(answer, year_regex())) {
    return asks_for_quantity(question) ? EntityType::kNumeric : EntityType::kDate;
  }
  if (std::regex_match(answer, date_regex())) return EntityType::kDate;
  if (std::regex_match(answer, numeric_regex())) return EntityType::kNumeric;
  return std::nullopt;
}

std::optional<EntityType> question_cue(const std::string& question) {
  static const std::vector<std::pair<std::regex, EntityType>> cues = [] {
    std::vector<std::pair<std::regex, EntityType>> v;
    auto add = [&](const char* pattern, EntityType t) {
      v.emplace_back(std::regex(pattern, std::regex::optimize), t);
    };
    add("\\b(who|whom|whose)\\b", EntityType::kPerson);
    add("\\bwhere\\b", EntityType::kLocation);
    add("\\b(when|(what|which) (year|date|day|month|century))\\b", EntityType::kDate);
    add("\\bhow (many|much)\\b", EntityType::kNumeric);
    return v;
  }();
  // The earliest cue in the question wins ("who was king when ..." is PERSON).
  std::optional<EntityType> best;
  std::ptrdiff_t best_pos = -1;
  for (const auto& [re, type] : cues) {
    std::smatch m;
    if (std::regex_search(question, m, re)) {
      if (best_pos < 0 || m.position(0) < best_pos) {
        best_pos = m.position(0);
        best = type;
      }
    }
  }
  return best;
}

}  // namespace

Gazetteer Gazetteer::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("gazetteer directory not found: " + dir.string());
  }
  Gazetteer g;
  const std::pair<const char*, EntityType> files[] = {
      {"person.txt", EntityType::kPerson},
      {"location.txt", EntityType::kLocation},
      {"organization.txt", EntityType::kOrganization},
  };
  for (const auto& [name, type] : files) {
    std::filesystem::path path = dir / name;
    if (!std::filesystem::exists(path)) continue;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (!trim(line).empty()) g.add(type, line);
    }
  }
  return g;
}

void Gazetteer::add(EntityType type, std::string_view name) {
  std::string key = normalize_answer(name);
  if (key.empty()) return;
  for (auto& [t, names] : lists_) {
    if (t == type) {
      names.insert(std::move(key));
      return;
    }
  }
  lists_.emplace_back(type, std::unordered_set<std::string>{std::move(key)});
  std::stable_sort(lists_.begin(), lists_.end(), [](const auto& a, const auto& b) {
    return static_cast<int>(a.first) < static_cast<int>(b.first);
  });
}

std::optional<EntityType> Gazetteer::lookup(std::string_view answer) const {
  std::string key = normalize_answer(answer);
  for (const auto& [type, names] : lists_) {
    if (names.count(key)) return type;
  }
  return std::nullopt;
}

std::size_t Gazetteer::size() const {
  std::size_t n = 0;
  for (const auto& [t, names] : lists_) n += names.size();
  return n;
}

EntityType heuristic_annotate(std::string_view question, std::string_view answer,
                              const Gazetteer& gazetteer) {
  const std::string q = lower(question);
  const std::string a = trim(answer);
  if (auto t = regex_rule(q, a)) return *t;
  if (auto t = gazetteer.lookup(a)) return *t;
  if (auto t = question_cue(q)) return *t;
  return EntityType::kOther;
}

HeuristicAnnotator::HeuristicAnnotator(Gazetteer gazetteer)
    : gazetteer_(std::move(gazetteer)) {}

EntityType HeuristicAnnotator::annotate(const std::string& question,
                                        const std::string& answer) {
  return heuristic_annotate(question, answer, gazetteer_);
}

std::optional<EntityType> parse_entity_label(std::string_view reply) {
  std::string token;
  auto flush = [&]() -> std::optional<EntityType> {
    if (token.empty()) return std::nullopt;
    auto t = parse_entity_type_strict(token);
    token.clear();
    return t;
  };
  for (char c : reply) {
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      token.push_back(c);
    } else if (auto t = flush()) {
      return t;
    }
  }
  return flush();
}

ModelAnnotator::ModelAnnotator(ModelBackend& backend, PromptLibrary prompts,
                               RetryPolicy retry)
    : backend_(backend), prompts_(std::move(prompts)), retry_(std::move(retry)) {}

EntityType ModelAnnotator::annotate(const std::string& question,
                                    const std::string& answer) {
  std::string prompt = fill_template(prompts_.get(kPromptNer),
                                     {{"question", question}, {"answer", answer}});
  PromptContext ctx{TaskKind::kNer, question, answer, "", ""};
  std::string reply = complete_with_retry(backend_, prompt, SamplingParams{0.0, 16, 0},
                                          &ctx, retry_);
  if (auto t = parse_entity_label(reply)) return *t;
  unparseable_.fetch_add(1);
  spdlog::warn("NER reply not in taxonomy, using OTHER: '{}'", reply.substr(0, 80));
  return EntityType::kOther;
}

void to_json(json& j, const AnnotationFailure& v) {
  j = json{{"instance_id", v.instance_id}, {"error", v.error}};
}

std::vector<QaInstance> annotate_all(const std::vector<QaInstance>& instances,
                                     AnnotatorBackend& backend,
                                     std::size_t parallelism,
                                     AnnotationReport* report) {
  std::vector<QaInstance> out = instances;
  std::vector<std::optional<std::string>> errors(out.size());
  parallel_for(out.size(), parallelism, [&](std::size_t i) {
    if (out[i].entity_type) return;  // typed by the source dataset
    try {
      out[i].entity_type = backend.annotate(out[i].question, out[i].original_reference);
    } catch (const TransportError& e) {
      out[i].entity_type = EntityType::kOther;
      errors[i] = e.what();
    }
  });

  AnnotationReport local;
  for (std::size_t i = 0; i < out.size(); ++i) {
    ++local.counts[*out[i].entity_type];
    if (errors[i]) local.failures.push_back({out[i].id, *errors[i]});
  }
  for (const auto& [type, n] : local.counts) {
    spdlog::info("annotate[{}]: {} {}", backend.backend_id(), to_string(type), n);
  }
  if (!local.failures.empty()) {
    spdlog::warn("annotate[{}]: {} transport failures typed OTHER",
                 backend.backend_id(), local.failures.size());
  }
  if (report) *report = std::move(local);
  return out;
}

}  // namespace refswap
