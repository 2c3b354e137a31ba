#include "k2q/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "k2q/error.hpp"
#include "k2q/rng.hpp"
#include "k2q/text.hpp"

namespace k2q {

// ---------------------------------------------------------------------------
// Edit distance and ANLS

std::size_t levenshtein(std::u32string_view s, std::u32string_view t) {
  if (s.size() < t.size()) std::swap(s, t);
  if (t.empty()) return s.size();
  std::vector<std::size_t> row(t.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i + 1;
    for (std::size_t j = 0; j < t.size(); ++j) {
      const std::size_t up = row[j + 1];
      const std::size_t substitute = diagonal + (s[i] == t[j] ? 0 : 1);
      row[j + 1] = std::min({up + 1, row[j] + 1, substitute});
      diagonal = up;
    }
  }
  return row[t.size()];
}

std::size_t levenshtein(std::string_view s, std::string_view t) {
  return levenshtein(text::decode_utf8(s), text::decode_utf8(t));
}

double normalized_levenshtein(std::string_view s, std::string_view t) {
  const auto a = text::decode_utf8(s);
  const auto b = text::decode_utf8(t);
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

double anls(std::string_view prediction, std::span<const std::string> golds, double tau) {
  if (golds.empty()) throw Error(ErrorKind::invalid_argument, "anls: no gold answers");
  double best = 0.0;
  for (const auto& gold : golds) {
    const double nl = normalized_levenshtein(prediction, gold);
    if (nl < tau) best = std::max(best, 1.0 - nl);
  }
  return best;
}

const char* to_string(QuestionType type) {
  return type == QuestionType::extractive ? "extractive" : "boolean";
}

QuestionType question_type_from_string(std::string_view name) {
  if (name == "extractive") return QuestionType::extractive;
  if (name == "boolean") return QuestionType::boolean;
  throw Error(ErrorKind::schema, "unknown question_type '" + std::string(name) + "'");
}

double anls_corpus(std::span<const EvalRecord> records,
                   const std::map<std::string, std::string>& predictions, double tau) {
  if (records.empty()) throw Error(ErrorKind::invalid_argument, "anls_corpus: no records");
  std::unordered_set<std::string> known;
  for (const auto& r : records) known.insert(r.qa_id);
  for (const auto& [qa_id, _] : predictions) {
    if (!known.count(qa_id)) {
      throw Error(ErrorKind::dangling_reference, "prediction for unknown qa_id '" + qa_id + "'");
    }
  }
  double sum = 0.0;
  for (const auto& r : records) {
    auto it = predictions.find(r.qa_id);
    if (it == predictions.end()) {
      throw Error(ErrorKind::dangling_reference, "no prediction for qa_id '" + r.qa_id + "'");
    }
    sum += anls(it->second, r.gold_answers, tau);
  }
  return sum / static_cast<double>(records.size());
}

double anls_corpus(std::span<const EvalRecord> records, double tau) {
  if (records.empty()) throw Error(ErrorKind::invalid_argument, "anls_corpus: no records");
  double sum = 0.0;
  for (const auto& r : records) sum += anls(r.prediction, r.gold_answers, tau);
  return sum / static_cast<double>(records.size());
}

// ---------------------------------------------------------------------------
// BLEU / self-BLEU

namespace {

using NgramCounts = std::unordered_map<std::string, int>;

std::string ngram_key(const Tokens& tokens, std::size_t start, int n) {
  std::string key;
  for (int k = 0; k < n; ++k) {
    if (k > 0) key.push_back('\x1f');
    key += tokens[start + k];
  }
  return key;
}

NgramCounts count_ngrams(const Tokens& tokens, int n) {
  NgramCounts counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++counts[ngram_key(tokens, i, n)];
  return counts;
}

double smoothed_precision(int n, long clipped, long total) {
  if (clipped > 0) return static_cast<double>(clipped) / static_cast<double>(total);
  if (n == 1) return 0.0;
  return 1.0 / static_cast<double>(total + 1);
}

double brevity_penalty(std::size_t hyp_len, std::size_t ref_len) {
  if (hyp_len > ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
}

// Combines per-order (clipped, total) statistics into a BLEU score.
double combine(const std::vector<std::pair<long, long>>& stats, std::size_t hyp_len,
               std::size_t ref_len) {
  double log_sum = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double p = smoothed_precision(static_cast<int>(i + 1), stats[i].first, stats[i].second);
    if (p <= 0.0) return 0.0;
    log_sum += std::log(p);
  }
  return brevity_penalty(hyp_len, ref_len) * std::exp(log_sum / static_cast<double>(stats.size()));
}

std::size_t closest_length(std::size_t hyp_len, const std::map<std::size_t, int>& lengths) {
  auto above = lengths.lower_bound(hyp_len);
  if (above == lengths.end()) return std::prev(above)->first;
  if (above == lengths.begin() || above->first == hyp_len) return above->first;
  auto below = std::prev(above);
  return (hyp_len - below->first <= above->first - hyp_len) ? below->first : above->first;
}

}  // namespace

double bleu(const Tokens& hypothesis, std::span<const Tokens> references, int max_n) {
  if (hypothesis.empty()) throw Error(ErrorKind::invalid_argument, "bleu: empty hypothesis");
  if (references.empty()) throw Error(ErrorKind::invalid_argument, "bleu: no references");
  if (max_n < 1) throw Error(ErrorKind::invalid_argument, "bleu: max_n must be >= 1");

  std::vector<std::pair<long, long>> stats;
  for (int n = 1; n <= max_n; ++n) {
    const NgramCounts hyp = count_ngrams(hypothesis, n);
    NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, c] : count_ngrams(ref, n)) {
        int& slot = max_ref[gram];
        slot = std::max(slot, c);
      }
    }
    long clipped = 0;
    for (const auto& [gram, c] : hyp) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    const long total =
        std::max<long>(0, static_cast<long>(hypothesis.size()) - n + 1);
    stats.emplace_back(clipped, total);
  }
  std::map<std::size_t, int> lengths;
  for (const auto& ref : references) ++lengths[ref.size()];
  return combine(stats, hypothesis.size(), closest_length(hypothesis.size(), lengths));
}

namespace {

// Per n-gram: the largest count in any sentence, how many sentences reach it,
// and the runner-up count. Enough to get the max over "all sentences but one".
struct NgramPeak {
  int top = 0;
  int top_sentences = 0;
  int second = 0;

  void add(int c) {
    if (c > top) {
      second = top;
      top = c;
      top_sentences = 1;
    } else if (c == top) {
      ++top_sentences;
    } else if (c > second) {
      second = c;
    }
  }

  int max_excluding(int own) const {
    return (own == top && top_sentences == 1) ? second : top;
  }
};

}  // namespace

double self_bleu(std::span<const std::string> corpus, int max_n, std::size_t sample_size,
                 std::uint64_t seed) {
  if (corpus.size() < 2) {
    throw Error(ErrorKind::invalid_argument, "self_bleu: corpus needs at least 2 sentences");
  }
  if (max_n < 1) throw Error(ErrorKind::invalid_argument, "self_bleu: max_n must be >= 1");

  std::vector<std::string> sorted(corpus.begin(), corpus.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Tokens> sentences;
  sentences.reserve(sorted.size());
  for (const auto& s : sorted) sentences.push_back(text::split_whitespace(s));

  std::vector<std::vector<NgramCounts>> counts(sentences.size());
  std::vector<std::unordered_map<std::string, NgramPeak>> peaks(max_n);
  std::map<std::size_t, int> lengths;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    ++lengths[sentences[i].size()];
    for (int n = 1; n <= max_n; ++n) {
      counts[i].push_back(count_ngrams(sentences[i], n));
      for (const auto& [gram, c] : counts[i].back()) peaks[n - 1][gram].add(c);
    }
  }

  Rng rng(seed);
  const auto sample = rng.sample_indices(sentences.size(), sample_size);
  double sum = 0.0;
  std::size_t scored = 0;
  for (std::size_t idx : sample) {
    const Tokens& hyp = sentences[idx];
    ++scored;
    if (hyp.empty()) continue;  // an empty sentence has no n-grams: BLEU 0
    std::vector<std::pair<long, long>> stats;
    for (int n = 1; n <= max_n; ++n) {
      long clipped = 0;
      for (const auto& [gram, c] : counts[idx][n - 1]) {
        clipped += std::min(c, peaks[n - 1].at(gram).max_excluding(c));
      }
      const long total = std::max<long>(0, static_cast<long>(hyp.size()) - n + 1);
      stats.emplace_back(clipped, total);
    }
    auto own = lengths.find(hyp.size());
    if (--own->second == 0) lengths.erase(own);
    const std::size_t ref_len = closest_length(hyp.size(), lengths);
    ++lengths[hyp.size()];
    sum += combine(stats, hyp.size(), ref_len);
  }
  return sum / static_cast<double>(scored);
}

// ---------------------------------------------------------------------------
// Perplexity and language models

double perplexity(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) {
    throw Error(ErrorKind::invalid_argument, "perplexity: no log-probabilities");
  }
  long double sum = 0.0L;
  for (double lp : token_logprobs) {
    if (!(lp <= 0.0)) {
      throw Error(ErrorKind::invalid_argument, "perplexity: log-probability must be <= 0");
    }
    sum += lp;
  }
  return static_cast<double>(std::exp(-sum / static_cast<long double>(token_logprobs.size())));
}

double corpus_perplexity(const LanguageModel& model, std::span<const std::string> sentences) {
  std::vector<double> all;
  for (const auto& s : sentences) {
    const auto lps = model.token_logprobs(text::split_whitespace(s));
    all.insert(all.end(), lps.begin(), lps.end());
  }
  return perplexity(all);
}

NgramLanguageModel::NgramLanguageModel(std::span<const std::string> train_corpus, int order,
                                       double k)
    : order_(order), k_(k) {
  if (train_corpus.empty()) throw Error(ErrorKind::invalid_argument, "ngram_lm: empty corpus");
  if (order < 1) throw Error(ErrorKind::invalid_argument, "ngram_lm: order must be >= 1");
  if (!(k > 0.0)) throw Error(ErrorKind::invalid_argument, "ngram_lm: k must be positive");

  std::set<std::string> words{kEnd, kUnknown};
  std::vector<Tokens> sentences;
  for (const auto& s : train_corpus) {
    sentences.push_back(text::split_whitespace(s));
    words.insert(sentences.back().begin(), sentences.back().end());
  }
  vocabulary_.assign(words.begin(), words.end());
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) vocabulary_index_[vocabulary_[i]] = i;

  for (const auto& tokens : sentences) {
    Tokens history;
    for (std::size_t i = 0; i <= tokens.size(); ++i) {
      const std::string& word = i < tokens.size() ? tokens[i] : vocabulary_[vocabulary_index_.at(kEnd)];
      ContextCounts& ctx = counts_[context_key(history)];
      ++ctx.next[word];
      ++ctx.total;
      if (i < tokens.size()) history.push_back(tokens[i]);
    }
  }
}

std::string NgramLanguageModel::context_key(const Tokens& context) const {
  const std::size_t width = static_cast<std::size_t>(order_ - 1);
  std::string key;
  for (std::size_t i = 0; i < width; ++i) {
    // Position i of the width-long window, counting from the left.
    const std::ptrdiff_t src =
        static_cast<std::ptrdiff_t>(context.size()) - static_cast<std::ptrdiff_t>(width - i);
    if (i > 0) key.push_back('\x1f');
    key += src < 0 ? std::string(kBegin) : in_vocabulary(context[static_cast<std::size_t>(src)]);
  }
  return key;
}

const std::string& NgramLanguageModel::in_vocabulary(const std::string& word) const {
  auto it = vocabulary_index_.find(word);
  return vocabulary_[it != vocabulary_index_.end() ? it->second : vocabulary_index_.at(kUnknown)];
}

double NgramLanguageModel::probability(const Tokens& context, const std::string& word) const {
  const double vocab = static_cast<double>(vocabulary_.size());
  const std::string& w = in_vocabulary(word);
  auto ctx = counts_.find(context_key(context));
  double seen = 0.0;
  double total = 0.0;
  if (ctx != counts_.end()) {
    total = static_cast<double>(ctx->second.total);
    auto it = ctx->second.next.find(w);
    if (it != ctx->second.next.end()) seen = static_cast<double>(it->second);
  }
  return (seen + k_) / (total + k_ * vocab);
}

std::vector<double> NgramLanguageModel::token_logprobs(const Tokens& tokens) const {
  std::vector<double> out;
  out.reserve(tokens.size() + 1);
  Tokens history;
  for (const auto& t : tokens) {
    out.push_back(std::log(probability(history, t)));
    history.push_back(t);
  }
  out.push_back(std::log(probability(history, kEnd)));
  return out;
}

// ---------------------------------------------------------------------------
// Groundedness

const char* to_string(GroundednessLabel label) {
  switch (label) {
    case GroundednessLabel::correct_grounded: return "correct_grounded";
    case GroundednessLabel::mis_extraction: return "mis_extraction";
    case GroundednessLabel::misprint: return "misprint";
    case GroundednessLabel::other: return "other";
  }
  return "other";
}

bool is_grounded(std::string_view prediction, std::string_view ocr_text_stream) {
  const std::string needle = text::normalize_spaces_lower(prediction);
  if (needle.empty()) return false;
  const std::string haystack = text::normalize_spaces_lower(ocr_text_stream);
  if (haystack.find(needle) != std::string::npos) return true;
  return text::remove_whitespace(haystack).find(text::remove_whitespace(needle)) !=
         std::string::npos;
}

GroundednessLabel groundedness(const EvalRecord& record) {
  const double score = anls(record.prediction, record.gold_answers);
  bool correct = score >= 1.0 - 1e-12;
  if (!correct && record.question_type == QuestionType::boolean) {
    const std::string p = text::to_lower(text::trim(record.prediction));
    correct = std::any_of(record.gold_answers.begin(), record.gold_answers.end(),
                          [&](const std::string& g) { return text::to_lower(text::trim(g)) == p; });
  }
  if (correct) return GroundednessLabel::correct_grounded;
  if (is_grounded(record.prediction, record.ocr_text_stream)) {
    return GroundednessLabel::mis_extraction;
  }
  if (score >= kMisprintThreshold) return GroundednessLabel::misprint;
  return GroundednessLabel::other;
}

// ---------------------------------------------------------------------------
// Robustness and agreement

double robustness_delta(double anls_in_distribution, double anls_cross_distribution) {
  if (anls_in_distribution == 0.0) {
    throw Error(ErrorKind::invalid_argument,
                "delta: in-distribution ANLS is zero, relative drop is undefined");
  }
  return (anls_in_distribution - anls_cross_distribution) / anls_in_distribution;
}

double fleiss_kappa(const std::vector<std::vector<int>>& ratings) {
  if (ratings.empty()) throw Error(ErrorKind::invalid_argument, "fleiss_kappa: no subjects");
  const std::size_t categories = ratings.front().size();
  if (categories == 0) throw Error(ErrorKind::invalid_argument, "fleiss_kappa: no categories");
  const long raters = std::accumulate(ratings.front().begin(), ratings.front().end(), 0L);
  if (raters < 2) {
    throw Error(ErrorKind::invalid_argument, "fleiss_kappa: need at least 2 raters per subject");
  }
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    const auto& row = ratings[i];
    const bool negative = std::any_of(row.begin(), row.end(), [](int c) { return c < 0; });
    if (row.size() != categories || negative ||
        std::accumulate(row.begin(), row.end(), 0L) != raters) {
      std::ostringstream msg;
      msg << "fleiss_kappa: ragged rating matrix at subject " << i << " (expected "
          << categories << " categories summing to " << raters << ")";
      throw Error(ErrorKind::invalid_argument, msg.str());
    }
  }

  const double n = static_cast<double>(raters);
  const double subjects = static_cast<double>(ratings.size());
  std::vector<double> column(categories, 0.0);
  double mean_agreement = 0.0;
  for (const auto& row : ratings) {
    double squares = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      squares += static_cast<double>(row[j]) * row[j];
      column[j] += row[j];
    }
    mean_agreement += (squares - n) / (n * (n - 1.0));
  }
  mean_agreement /= subjects;
  double chance = 0.0;
  for (double c : column) {
    const double p = c / (subjects * n);
    chance += p * p;
  }
  if (chance >= 1.0 - 1e-15) return 1.0;
  return (mean_agreement - chance) / (1.0 - chance);
}

}  // namespace k2q
