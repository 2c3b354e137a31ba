#include "k2q/reporting.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "k2q/text.hpp"

namespace k2q {

using nlohmann::json;

namespace {

json parse_line(std::string_view line, const std::string& where) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, where + ": " + e.what());
  }
}

// Calls fn(json, where) for every non-blank line.
template <class Fn>
void for_each_record(std::string_view content, Fn fn) {
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    fn(parse_line(line, where), where);
  }
}

}  // namespace

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string aligned_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], text::codepoint_length(row[c]));
    }
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(widths[c] - text::codepoint_length(row[c]), ' ');
      if (c > 0) line += "  ";
      line += c == 0 ? row[c] + pad : pad + row[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

StatsReport dataset_stats(const QaDataset& qads) {
  if (qads.instances.empty()) throw Error(ErrorKind::invalid_argument, "QA dataset is empty");
  StatsReport s;
  const double n = static_cast<double>(qads.instances.size());
  std::set<std::string> templates;
  std::unordered_map<std::string, std::size_t> per_doc;
  std::size_t extractive = 0, single_page = 0, q_tokens = 0, a_tokens = 0, entities = 0;
  for (const auto& q : qads.instances) {
    templates.insert(q.template_id);
    ++per_doc[q.doc_id];
    if (q.question_type == QuestionType::extractive) ++extractive;
    if (q.page_scope.size() == 1) ++single_page;
    q_tokens += text::split_whitespace(q.question).size();
    if (!q.answers.empty()) a_tokens += text::split_whitespace(q.answers.front()).size();
    entities += static_cast<std::size_t>(std::max(0, q.num_question_entities));
  }
  s.num_templates_used = templates.size();
  s.num_questions = qads.instances.size();
  s.pct_extractive = 100.0 * static_cast<double>(extractive) / n;
  s.pct_single_page = 100.0 * static_cast<double>(single_page) / n;
  s.avg_question_tokens = static_cast<double>(q_tokens) / n;
  s.avg_answer_tokens = static_cast<double>(a_tokens) / n;
  s.avg_entities_per_question = static_cast<double>(entities) / n;
  s.avg_questions_per_doc = n / static_cast<double>(per_doc.size());
  return s;
}

std::string stats_to_json(const StatsReport& s) {
  json j = {{"num_templates_used", s.num_templates_used},
            {"num_questions", s.num_questions},
            {"pct_extractive", s.pct_extractive},
            {"pct_boolean", s.pct_boolean()},
            {"pct_single_page", s.pct_single_page},
            {"avg_question_tokens", s.avg_question_tokens},
            {"avg_answer_tokens", s.avg_answer_tokens},
            {"avg_entities_per_question", s.avg_entities_per_question},
            {"avg_questions_per_doc", s.avg_questions_per_doc}};
  return j.dump(2) + "\n";
}

StatsReport stats_from_json(std::string_view content) {
  const json j = parse_line(content, "stats report");
  StatsReport s;
  try {
    s.num_templates_used = j.at("num_templates_used").get<std::size_t>();
    s.num_questions = j.at("num_questions").get<std::size_t>();
    s.pct_extractive = j.at("pct_extractive").get<double>();
    s.pct_single_page = j.at("pct_single_page").get<double>();
    s.avg_question_tokens = j.at("avg_question_tokens").get<double>();
    s.avg_answer_tokens = j.at("avg_answer_tokens").get<double>();
    s.avg_entities_per_question = j.at("avg_entities_per_question").get<double>();
    s.avg_questions_per_doc = j.at("avg_questions_per_doc").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("stats report: ") + e.what());
  }
  return s;
}

std::string stats_table(const StatsReport& s) {
  return aligned_table({
      {"templates used", std::to_string(s.num_templates_used)},
      {"questions", std::to_string(s.num_questions)},
      {"% extractive", format_fixed(s.pct_extractive, 2)},
      {"% boolean", format_fixed(s.pct_boolean(), 2)},
      {"% single page", format_fixed(s.pct_single_page, 2)},
      {"avg question tokens", format_fixed(s.avg_question_tokens, 2)},
      {"avg answer tokens", format_fixed(s.avg_answer_tokens, 2)},
      {"avg entities per question", format_fixed(s.avg_entities_per_question, 2)},
      {"avg questions per doc", format_fixed(s.avg_questions_per_doc, 2)},
  });
}

// ---------------------------------------------------------------------------
// Diversity

std::map<int, double> diversity_report(const QaDataset& qads, const std::vector<int>& ngrams,
                                       std::size_t sample_size, std::uint64_t seed) {
  std::vector<std::string> questions;
  for (const auto& q : qads.instances) {
    if (q.split == Split::test) questions.push_back(q.question);
  }
  if (questions.size() < 2) {
    throw Error(ErrorKind::invalid_argument, "diversity needs at least two test-split questions");
  }
  std::map<int, double> out;
  for (int n : ngrams) out[n] = self_bleu(questions, n, sample_size, seed);
  return out;
}

// ---------------------------------------------------------------------------
// Validation

const char* to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::none: return "none";
    case ErrorCategory::template_error: return "template";
    case ErrorCategory::cleaning_error: return "cleaning";
    case ErrorCategory::annotation_error: return "annotation";
    case ErrorCategory::other_error: return "other";
  }
  return "none";
}

ErrorCategory error_category_from_string(std::string_view name) {
  for (auto c : {ErrorCategory::none, ErrorCategory::template_error, ErrorCategory::cleaning_error,
                 ErrorCategory::annotation_error, ErrorCategory::other_error}) {
    if (name == to_string(c)) return c;
  }
  throw Error(ErrorKind::schema, "unknown error category '" + std::string(name) +
                                     "' (expected none, template, cleaning, annotation or other)");
}

std::vector<RaterLabels> parse_rater_labels(std::string_view content) {
  std::vector<RaterLabels> out;
  for_each_record(content, [&](const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("qa_id") || !j["qa_id"].is_string() || !j.contains("labels") ||
        !j["labels"].is_array()) {
      throw Error(ErrorKind::schema, where + ": expected {\"qa_id\": string, \"labels\": [...]}");
    }
    RaterLabels r;
    r.qa_id = j["qa_id"].get<std::string>();
    for (const auto& label : j["labels"]) {
      if (!label.is_string()) throw Error(ErrorKind::schema, where + ": labels must be strings");
      r.labels.push_back(error_category_from_string(label.get<std::string>()));
    }
    out.push_back(std::move(r));
  });
  return out;
}

ValidationReport validation_report(const std::vector<RaterLabels>& annotations) {
  if (annotations.empty()) throw Error(ErrorKind::invalid_argument, "no rater annotations");
  ValidationReport r;
  r.num_questions = annotations.size();
  r.num_raters = annotations.front().labels.size();
  if (r.num_raters < 2) throw Error(ErrorKind::invalid_argument, "need at least two raters per question");

  std::vector<std::vector<int>> overall;
  for (const auto& a : annotations) {
    if (a.labels.size() != r.num_raters) {
      throw Error(ErrorKind::invalid_argument,
                  "question '" + a.qa_id + "' has " + std::to_string(a.labels.size()) +
                      " ratings, expected " + std::to_string(r.num_raters));
    }
    std::vector<int> row(kNumErrorCategories, 0);
    for (auto label : a.labels) ++row[static_cast<std::size_t>(label)];
    overall.push_back(std::move(row));
  }
  r.overall_kappa = fleiss_kappa(overall);

  for (std::size_t c = 0; c < kNumErrorCategories; ++c) {
    CategoryResult res;
    std::vector<std::vector<int>> binary;
    for (const auto& row : overall) {
      const int chose = row[c];
      if (2 * static_cast<std::size_t>(chose) > r.num_raters) ++res.count;
      binary.push_back({chose, static_cast<int>(r.num_raters) - chose});
    }
    res.rate_pct = 100.0 * static_cast<double>(res.count) / static_cast<double>(r.num_questions);
    res.kappa = fleiss_kappa(binary);
    r.categories[static_cast<ErrorCategory>(c)] = res;
  }
  return r;
}

std::string validation_to_json(const ValidationReport& r) {
  json cats = json::object();
  for (const auto& [c, res] : r.categories) {
    cats[to_string(c)] = {{"count", res.count}, {"rate_pct", res.rate_pct}, {"kappa", res.kappa}};
  }
  return json{{"num_questions", r.num_questions},
              {"num_raters", r.num_raters},
              {"categories", std::move(cats)},
              {"overall_kappa", r.overall_kappa}}
             .dump(2) +
         "\n";
}

std::string validation_table(const ValidationReport& r) {
  std::vector<std::vector<std::string>> rows = {{"category", "count", "rate %", "kappa"}};
  for (const auto& [c, res] : r.categories) {
    rows.push_back({to_string(c), std::to_string(res.count), format_fixed(res.rate_pct, 2),
                    format_fixed(res.kappa)});
  }
  rows.push_back({"overall", std::to_string(r.num_questions), "", format_fixed(r.overall_kappa)});
  return aligned_table(rows);
}

// ---------------------------------------------------------------------------
// Prediction scoring

std::map<std::string, std::string> parse_predictions(std::string_view content) {
  std::map<std::string, std::string> out;
  for_each_record(content, [&](const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("qa_id") || !j["qa_id"].is_string() ||
        !j.contains("prediction") || !j["prediction"].is_string()) {
      throw Error(ErrorKind::schema, where + ": expected {\"qa_id\": string, \"prediction\": string}");
    }
    const std::string id = j["qa_id"].get<std::string>();
    if (!out.emplace(id, j["prediction"].get<std::string>()).second) {
      throw Error(ErrorKind::schema, where + ": repeated prediction for '" + id + "'");
    }
  });
  if (out.empty()) throw Error(ErrorKind::schema, "no predictions");
  return out;
}

EvalReport evaluate_predictions(const QaDataset& qads,
                                const std::map<std::string, std::string>& predictions,
                                const KieDataset& ocr_source) {
  std::unordered_map<std::string, const QaInstance*> by_id;
  for (const auto& q : qads.instances) by_id.emplace(q.qa_id, &q);
  std::vector<std::string> unknown;
  for (const auto& [id, _] : predictions) {
    if (!by_id.count(id)) unknown.push_back(id);
  }
  if (!unknown.empty()) {
    std::string msg = std::to_string(unknown.size()) + " predictions match no question:";
    for (const auto& id : unknown) msg += " " + id;
    throw Error(ErrorKind::dangling_reference, msg);
  }

  std::vector<EvalRecord> records;
  EvalReport report;
  for (const auto& q : qads.instances) {
    const Document* doc = ocr_source.find_document(q.doc_id);
    if (!doc) {
      throw Error(ErrorKind::dangling_reference,
                  "question '" + q.qa_id + "' names unknown document '" + q.doc_id + "'");
    }
    EvalRecord rec;
    rec.qa_id = q.qa_id;
    if (auto it = predictions.find(q.qa_id); it != predictions.end()) {
      rec.prediction = it->second;
    } else {
      ++report.missing_predictions;
    }
    rec.gold_answers = q.answers;
    rec.ocr_text_stream = doc->ocr_text(q.page_scope);
    rec.question_type = q.question_type;
    records.push_back(std::move(rec));
  }
  report.num_questions = records.size();
  if (records.empty()) return report;

  report.anls = anls_corpus(records);
  std::map<QuestionType, double> sums;
  for (const auto& rec : records) {
    sums[rec.question_type] += anls(rec.prediction, rec.gold_answers);
    ++report.count_by_type[rec.question_type];
    const GroundednessLabel label = groundedness(rec);
    ++report.groundedness[label];
    ++report.groundedness_by_type[rec.question_type][label];
    auto& examples = report.examples[label];
    if (examples.size() < kMaxLabelExamples) {
      examples.push_back({rec.qa_id, rec.prediction, rec.gold_answers});
    }
  }
  for (const auto& [type, sum] : sums) {
    report.anls_by_type[type] = sum / static_cast<double>(report.count_by_type[type]);
  }
  for (auto label : {GroundednessLabel::correct_grounded, GroundednessLabel::mis_extraction,
                     GroundednessLabel::misprint, GroundednessLabel::other}) {
    report.groundedness.try_emplace(label, 0);
  }
  return report;
}

std::string eval_to_json(const EvalReport& r) {
  json by_type = json::object();
  for (const auto& [type, value] : r.anls_by_type) {
    by_type[to_string(type)] = {{"anls", value}, {"count", r.count_by_type.at(type)}};
  }
  json ground = json::object();
  for (const auto& [label, count] : r.groundedness) ground[to_string(label)] = count;
  json ground_by_type = json::object();
  for (const auto& [type, counts] : r.groundedness_by_type) {
    for (const auto& [label, count] : counts) ground_by_type[to_string(type)][to_string(label)] = count;
  }
  json examples = json::object();
  for (const auto& [label, list] : r.examples) {
    json arr = json::array();
    for (const auto& ex : list) {
      arr.push_back({{"qa_id", ex.qa_id}, {"prediction", ex.prediction}, {"gold_answers", ex.gold_answers}});
    }
    examples[to_string(label)] = std::move(arr);
  }
  return json{{"num_questions", r.num_questions},
              {"missing_predictions", r.missing_predictions},
              {"anls", r.anls},
              {"by_question_type", std::move(by_type)},
              {"groundedness", std::move(ground)},
              {"groundedness_by_question_type", std::move(ground_by_type)},
              {"examples", std::move(examples)}}
             .dump(2) +
         "\n";
}

std::string eval_table(const EvalReport& r) {
  std::vector<std::vector<std::string>> rows = {
      {"questions", std::to_string(r.num_questions)},
      {"missing predictions", std::to_string(r.missing_predictions)},
      {"ANLS", format_fixed(r.anls)}};
  for (const auto& [type, value] : r.anls_by_type) {
    rows.push_back({std::string("ANLS ") + to_string(type), format_fixed(value)});
  }
  for (const auto& [label, count] : r.groundedness) rows.push_back({to_string(label), std::to_string(count)});
  return aligned_table(rows);
}

}  // namespace k2q
