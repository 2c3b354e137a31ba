#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "k2q/kie_model.hpp"
#include "k2q/metrics.hpp"
#include "k2q/rng.hpp"
#include "k2q/templates.hpp"

namespace k2q {

enum class Strategy { per_entity, generate_all_then_sample };

const char* to_string(Strategy strategy);
Strategy strategy_from_string(std::string_view name);

struct GenerationConfig {
  std::optional<std::uint64_t> seed;  // generation refuses to run without one
  Strategy strategy = Strategy::per_entity;
  std::size_t boolean_count_per_doc = 0;          // per_entity
  std::optional<std::size_t> extractive_quota;   // generate_all_then_sample
  std::optional<std::size_t> boolean_quota;      // generate_all_then_sample
  double false_fraction = 0.5;                   // fixed
  bool single_page_only = true;

  bool operator==(const GenerationConfig&) const = default;
};

/// Config file: one JSON object with the field names above. Unknown fields and
/// a false_fraction other than 0.5 are schema errors.
GenerationConfig parse_generation_config(std::string_view content);
std::string serialize_generation_config(const GenerationConfig& config);

struct QaInstance {
  std::string qa_id;
  std::string doc_id;
  Split split = Split::train;
  std::vector<int> page_scope;
  std::string question;
  QuestionType question_type = QuestionType::extractive;
  std::vector<std::string> answers;
  std::vector<std::string> entity_ids_used;
  std::vector<std::string> answer_entity_ids;
  std::vector<std::vector<std::string>> answer_token_spans;
  std::string template_id;
  int num_question_entities = 0;
  /// Boolean questions: the value being tested.
  std::optional<std::string> candidate_value;
  /// Slot values as rendered, ordinals as their decimal position.
  std::map<std::string, std::string> bindings;

  bool operator==(const QaInstance&) const = default;
};

struct Provenance {
  std::string config_digest;
  std::string suite_digest;
  std::string source_digest;

  bool operator==(const Provenance&) const = default;
};

struct QaDataset {
  std::string name;
  Provenance provenance;
  std::vector<QaInstance> instances;

  const QaInstance* find(std::string_view qa_id) const;

  bool operator==(const QaDataset&) const = default;
};

// QA file: line-delimited JSON, a header {"name", "provenance"} then one
// instance per line.
QaDataset parse_qa_dataset(std::string_view content);
QaDataset load_qa_dataset(const std::filesystem::path& path);
std::string serialize_qa_dataset(const QaDataset& qads);
void save_qa_dataset(const QaDataset& qads, const std::filesystem::path& path);

/// Record-level invariants: answer shapes, unique ids, one split per document.
std::vector<Issue> validate_qa_dataset(const QaDataset& qads);

// ---------------------------------------------------------------------------
// Candidates

/// One way to instantiate a template on a document, before key phrases are
/// chosen and before boolean polarity is decided.
struct Candidate {
  const Template* tmpl = nullptr;
  /// entity_value and ordinal_position slots. key_phrase slots are filled at
  /// render time; the candidate_value slot by the boolean builder.
  Bindings bindings;
  std::vector<std::string> entity_ids_used;
  /// Extractive: entities holding an acceptable answer. Boolean: entities the
  /// candidate is compared against.
  std::vector<std::string> answer_entity_ids;
  /// Extractive answers, or the values that make a boolean true.
  std::vector<std::string> true_answers;
  /// Extractive: entity this question is counted against for per_entity.
  /// Boolean: entity whose value a "Yes" question tests.
  std::string anchor_entity_id;
  std::optional<std::string> line_item_id;
  std::vector<int> pages;
};

/// Every admissible candidate of every template on `doc`, in suite order.
/// Line-item templates keep only bindings that match exactly one line item,
/// and whose line item has a single value of the target type. Entities with
/// empty values or no page are never used. With single_page_only, candidates
/// touching more than one page are dropped.
std::vector<Candidate> enumerate_candidates(const Document& doc, const KieDataset& dataset,
                                            const TemplateSuite& suite,
                                            bool single_page_only = true);

/// Acceptable answers for a document-scoped extractive question: cleaned
/// values of the non-line-item entities of `target_type`, deduplicated, in
/// document order.
std::vector<std::string> multi_answer_resolution(std::string_view target_type,
                                                 const Document& doc);

/// The three pools a false candidate may come from, each sorted, unique, and
/// free of true answers and empty strings.
struct NegativePools {
  std::vector<std::string> same_type_in_dataset;    // S1
  std::vector<std::string> sibling_type_in_doc;     // S2
  std::vector<std::string> same_format_in_doc;      // S3

  bool empty() const {
    return same_type_in_dataset.empty() && sibling_type_in_doc.empty() && same_format_in_doc.empty();
  }
};

/// Unique values per entity type over a whole dataset; build once, share
/// across documents.
class ValueIndex {
 public:
  explicit ValueIndex(const KieDataset& dataset);
  const std::vector<std::string>& values_of(std::string_view type_name) const;

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> values_;
};

NegativePools negative_pools(const Entity& target, const KieDataset& dataset,
                             const ValueIndex& index, const Document& doc,
                             const std::vector<std::string>& true_answers);

/// Picks one of the non-empty pools uniformly, then a value in it uniformly.
/// Throws no_candidate when all pools are empty.
std::string sample_negative(const NegativePools& pools, Rng& rng);

/// Convenience form that builds the pools (and a throwaway index). The true
/// answers are the target's own value.
std::string sample_negative(const Entity& target, const KieDataset& dataset, const Document& doc,
                            Rng& rng);

// ---------------------------------------------------------------------------
// Generation

struct GenerationResult {
  QaDataset dataset;
  std::vector<std::string> warnings;
};

/// Builds a QA dataset. The dataset should be cleaned; the suite must pass
/// validate_suite against its ontology (schema error otherwise) and the
/// config must carry a seed (invalid_argument otherwise).
///
/// Output is a pure function of (dataset, suite, config). Documents are
/// processed on `jobs` threads; each draws from its own stream, so the
/// thread count never changes the result.
GenerationResult generate(const KieDataset& dataset, const TemplateSuite& suite,
                          const GenerationConfig& config, std::size_t jobs = 1);

/// qa_id for a rendered question.
std::string make_qa_id(std::string_view doc_id, std::string_view template_id,
                       std::string_view question, const std::vector<std::string>& answers);

inline constexpr const char* kYes = "Yes";
inline constexpr const char* kNo = "No";

}  // namespace k2q
