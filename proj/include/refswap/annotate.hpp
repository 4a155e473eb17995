#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "refswap/backend.hpp"
#include "refswap/core.hpp"
#include "refswap/prompts.hpp"

namespace refswap {

/// Whole-answer entity typing. Implementations are total: anything they are
/// unsure about is OTHER.
class AnnotatorBackend {
 public:
  virtual ~AnnotatorBackend() = default;
  virtual EntityType annotate(const std::string& question,
                              const std::string& answer) = 0;
  virtual const std::string& backend_id() const = 0;
};

/// Name lists keyed by entity type, matched on normalized answers.
class Gazetteer {
 public:
  /// Reads person.txt, location.txt and organization.txt (one name per line)
  /// from dir. Absent files are treated as empty lists; an absent directory is
  /// a ValidationError.
  static Gazetteer load(const std::filesystem::path& dir);

  void add(EntityType type, std::string_view name);
  std::optional<EntityType> lookup(std::string_view answer) const;
  std::size_t size() const;

 private:
  // Checked in PERSON, LOCATION, ORGANIZATION order.
  std::vector<std::pair<EntityType, std::unordered_set<std::string>>> lists_;
};

/// Rule precedence: answer regexes (dates, numbers) > gazetteer > question
/// cue (who/where/when/how many) > OTHER.
EntityType heuristic_annotate(std::string_view question, std::string_view answer,
                              const Gazetteer& gazetteer);

class HeuristicAnnotator : public AnnotatorBackend {
 public:
  explicit HeuristicAnnotator(Gazetteer gazetteer);
  EntityType annotate(const std::string& question,
                      const std::string& answer) override;
  const std::string& backend_id() const override { return id_; }

 private:
  Gazetteer gazetteer_;
  std::string id_ = "heuristic";
};

/// Maps a model reply to the first taxonomy token it contains.
std::optional<EntityType> parse_entity_label(std::string_view reply);

/// Prompts a model backend with the NER template at temperature 0. An
/// unparseable reply maps to OTHER and bumps unparseable(). Transport
/// failures propagate so annotate_all can report them.
class ModelAnnotator : public AnnotatorBackend {
 public:
  ModelAnnotator(ModelBackend& backend, PromptLibrary prompts, RetryPolicy retry);
  EntityType annotate(const std::string& question,
                      const std::string& answer) override;
  const std::string& backend_id() const override { return backend_.backend_id(); }
  std::size_t unparseable() const { return unparseable_.load(); }

 private:
  ModelBackend& backend_;
  PromptLibrary prompts_;
  RetryPolicy retry_;
  std::atomic<std::size_t> unparseable_{0};
};

struct AnnotationFailure {
  std::string instance_id;
  std::string error;
};

struct AnnotationReport {
  std::map<EntityType, std::size_t> counts;
  std::vector<AnnotationFailure> failures;
};

void to_json(json& j, const AnnotationFailure& v);

/// Sets entity_type on every instance that lacks one (types supplied by the
/// source dataset are kept); output order and ids match the input.
/// A transport failure types the instance OTHER and records it in the report.
std::vector<QaInstance> annotate_all(const std::vector<QaInstance>& instances,
                                     AnnotatorBackend& backend,
                                     std::size_t parallelism = 8,
                                     AnnotationReport* report = nullptr);

}  // namespace refswap
