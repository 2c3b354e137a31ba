#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace k2q {

// ---------------------------------------------------------------------------
// Edit distance and ANLS

/// Levenshtein distance over Unicode code points (UTF-8 input).
std::size_t levenshtein(std::string_view s, std::string_view t);
std::size_t levenshtein(std::u32string_view s, std::u32string_view t);

/// Edit distance divided by the longer length. Two empty strings are an exact
/// match (0).
double normalized_levenshtein(std::string_view s, std::string_view t);

inline constexpr double kAnlsThreshold = 0.5;

/// Best thresholded similarity of `prediction` against any gold answer.
/// Each gold scores 1 - NL when NL < tau, otherwise 0.
double anls(std::string_view prediction, std::span<const std::string> golds,
            double tau = kAnlsThreshold);

enum class QuestionType { extractive, boolean };

const char* to_string(QuestionType type);
QuestionType question_type_from_string(std::string_view name);

struct EvalRecord {
  std::string qa_id;
  std::string prediction;
  std::vector<std::string> gold_answers;
  std::string ocr_text_stream;
  QuestionType question_type = QuestionType::extractive;
};

/// Mean ANLS over records. Predictions are looked up by qa_id; a record
/// without a prediction, or a prediction for an unknown record, throws.
double anls_corpus(std::span<const EvalRecord> records,
                   const std::map<std::string, std::string>& predictions,
                   double tau = kAnlsThreshold);

/// Mean ANLS using each record's own `prediction` field.
double anls_corpus(std::span<const EvalRecord> records, double tau = kAnlsThreshold);

// ---------------------------------------------------------------------------
// BLEU / self-BLEU

using Tokens = std::vector<std::string>;

/// Sentence BLEU with uniform weights over orders 1..max_n and the standard
/// brevity penalty (closest reference length, shorter wins ties).
///
/// Orders n >= 2 whose clipped match count is zero use (0 + 1) / (total + 1)
/// instead of 0. A zero unigram precision still yields 0.
double bleu(const Tokens& hypothesis, std::span<const Tokens> references, int max_n = 4);

inline constexpr std::size_t kSelfBleuSampleSize = 5000;

/// Mean BLEU of each sampled sentence against every other corpus sentence.
///
/// Sentences are whitespace-tokenized and sorted before sampling, so the
/// result depends only on the corpus contents and the seed, not its order.
/// Sampling is uniform without replacement over min(sample_size, size).
double self_bleu(std::span<const std::string> corpus, int max_n,
                 std::size_t sample_size = kSelfBleuSampleSize, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Perplexity and language models

/// exp(-mean(logprobs)).
double perplexity(std::span<const double> token_logprobs);

/// Scoring contract for perplexity: conditional log-probabilities (natural
/// log, each <= 0) for every token of a sequence, plus one for the end of
/// sequence when the model predicts it.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual std::vector<double> token_logprobs(const Tokens& tokens) const = 0;
};

/// Perplexity of a whole corpus: token log-probabilities of every sentence
/// pooled before averaging.
double corpus_perplexity(const LanguageModel& model, std::span<const std::string> sentences);

/// Word n-gram model with add-k smoothing.
///
/// p(w | ctx) = (c(ctx, w) + k) / (c(ctx) + k * V) where V counts every
/// training word plus `</s>` and `<unk>`. Each sentence is padded with n-1
/// `<s>` markers and terminated by `</s>`; out-of-vocabulary words score as
/// `<unk>`.
class NgramLanguageModel final : public LanguageModel {
 public:
  static constexpr const char* kBegin = "<s>";
  static constexpr const char* kEnd = "</s>";
  static constexpr const char* kUnknown = "<unk>";

  NgramLanguageModel(std::span<const std::string> train_corpus, int order, double k);

  int order() const { return order_; }
  double add_k() const { return k_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }

  /// p(word | context); only the last order-1 words of context are used,
  /// left-padded with `<s>`.
  double probability(const Tokens& context, const std::string& word) const;

  std::vector<double> token_logprobs(const Tokens& tokens) const override;

 private:
  struct ContextCounts {
    std::unordered_map<std::string, std::uint64_t> next;
    std::uint64_t total = 0;
  };

  std::string context_key(const Tokens& context) const;
  const std::string& in_vocabulary(const std::string& word) const;

  int order_;
  double k_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::size_t> vocabulary_index_;
  std::unordered_map<std::string, ContextCounts> counts_;
};

// ---------------------------------------------------------------------------
// Groundedness / error taxonomy

enum class GroundednessLabel { correct_grounded, mis_extraction, misprint, other };

const char* to_string(GroundednessLabel label);

inline constexpr double kMisprintThreshold = 0.8;

/// True if `prediction` occurs in `ocr_text_stream`, ignoring case and
/// whitespace differences, either on whitespace-collapsed text or with all
/// whitespace removed (matches that cross token boundaries). An empty
/// prediction is never grounded.
bool is_grounded(std::string_view prediction, std::string_view ocr_text_stream);

/// Correct answers (full ANLS credit, or a case-insensitive exact match for
/// boolean questions) are correct_grounded. Incorrect answers found in the OCR
/// are mis-extractions; ungrounded ones with ANLS >= 0.8 are misprints; the
/// rest are other.
GroundednessLabel groundedness(const EvalRecord& record);

// ---------------------------------------------------------------------------
// Robustness and agreement

/// Relative ANLS drop when the training template distribution changes:
/// (in_distribution - cross_distribution) / in_distribution.
double robustness_delta(double anls_in_distribution, double anls_cross_distribution);

/// Fleiss' kappa for a subjects x categories matrix of rater counts. Every
/// row must sum to the same rater count (at least 2). When only one category
/// is ever used the chance agreement is 1 and the result is 1.0.
double fleiss_kappa(const std::vector<std::vector<int>>& ratings);

}  // namespace k2q
