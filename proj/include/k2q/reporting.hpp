#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "k2q/generator.hpp"
#include "k2q/kie_model.hpp"
#include "k2q/metrics.hpp"

namespace k2q {

// ---------------------------------------------------------------------------
// Dataset statistics

struct StatsReport {
  std::size_t num_templates_used = 0;
  std::size_t num_questions = 0;
  double pct_extractive = 0;
  double pct_single_page = 0;
  double avg_question_tokens = 0;
  double avg_answer_tokens = 0;  // first acceptable answer
  double avg_entities_per_question = 0;
  double avg_questions_per_doc = 0;  // over documents with at least one question

  double pct_boolean() const { return 100.0 - pct_extractive; }
};

/// Tokens are maximal runs of non-whitespace. Throws invalid_argument for an
/// empty dataset.
StatsReport dataset_stats(const QaDataset& qads);

std::string stats_to_json(const StatsReport& stats);
StatsReport stats_from_json(std::string_view content);
std::string stats_table(const StatsReport& stats);

// ---------------------------------------------------------------------------
// Diversity

inline constexpr std::uint64_t kDiversitySeed = 0;

/// Self-BLEU of the test-split questions for each n. Throws invalid_argument
/// with fewer than two test questions.
std::map<int, double> diversity_report(const QaDataset& qads, const std::vector<int>& ngrams,
                                       std::size_t sample_size = kSelfBleuSampleSize,
                                       std::uint64_t seed = kDiversitySeed);

// ---------------------------------------------------------------------------
// Human validation

enum class ErrorCategory { none, template_error, cleaning_error, annotation_error, other_error };

inline constexpr std::size_t kNumErrorCategories = 5;

const char* to_string(ErrorCategory category);
ErrorCategory error_category_from_string(std::string_view name);

/// One question's labels, one per rater.
struct RaterLabels {
  std::string qa_id;
  std::vector<ErrorCategory> labels;
};

/// Line-delimited {"qa_id": ..., "labels": ["none", "template", ...]}.
std::vector<RaterLabels> parse_rater_labels(std::string_view content);

struct CategoryResult {
  std::size_t count = 0;  // questions where a strict majority chose the category
  double rate_pct = 0;
  double kappa = 0;       // Fleiss over {chose it, did not}
};

struct ValidationReport {
  std::size_t num_questions = 0;
  std::size_t num_raters = 0;
  std::map<ErrorCategory, CategoryResult> categories;
  double overall_kappa = 0;  // Fleiss over all five labels
};

/// Throws invalid_argument for an empty input, fewer than two raters, or
/// questions with differing rater counts.
ValidationReport validation_report(const std::vector<RaterLabels>& annotations);

std::string validation_to_json(const ValidationReport& report);
std::string validation_table(const ValidationReport& report);

// ---------------------------------------------------------------------------
// Prediction scoring

/// Line-delimited {"qa_id": ..., "prediction": ...}. Throws for an empty file
/// ("no predictions") and for repeated ids.
std::map<std::string, std::string> parse_predictions(std::string_view content);

inline constexpr std::size_t kMaxLabelExamples = 20;

struct LabelExample {
  std::string qa_id;
  std::string prediction;
  std::vector<std::string> gold_answers;
};

struct EvalReport {
  std::size_t num_questions = 0;
  std::size_t missing_predictions = 0;  // scored as empty answers
  double anls = 0;
  std::map<QuestionType, double> anls_by_type;
  std::map<QuestionType, std::size_t> count_by_type;
  std::map<GroundednessLabel, std::size_t> groundedness;
  std::map<QuestionType, std::map<GroundednessLabel, std::size_t>> groundedness_by_type;
  /// The first kMaxLabelExamples records of each label, in QA file order.
  std::map<GroundednessLabel, std::vector<LabelExample>> examples;
};

/// Scores every QA instance; questions without a prediction count as an empty
/// answer. OCR text for groundedness is the instance's pages of its document
/// in `ocr_source`. Throws dangling_reference when a prediction names an
/// unknown qa_id (all of them listed) or an instance names an unknown document.
EvalReport evaluate_predictions(const QaDataset& qads,
                                const std::map<std::string, std::string>& predictions,
                                const KieDataset& ocr_source);

std::string eval_to_json(const EvalReport& report);
std::string eval_table(const EvalReport& report);

// ---------------------------------------------------------------------------
// Formatting

/// Fixed-point with `decimals` places, e.g. format_fixed(0.77092, 4) == "0.7709".
std::string format_fixed(double value, int decimals = 4);

/// Left-aligned first column, right-aligned others, two spaces between.
std::string aligned_table(const std::vector<std::vector<std::string>>& rows);

}  // namespace k2q
