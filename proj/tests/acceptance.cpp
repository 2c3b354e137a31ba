// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "k2q/cleaning.hpp"
#include "k2q/cli.hpp"
#include "k2q/digest.hpp"
#include "k2q/generator.hpp"
#include "k2q/io.hpp"
#include "k2q/metrics.hpp"
#include "k2q/reporting.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace k2q;
using nlohmann::json;
using testing::fixture;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) first_ += (first_.empty() ? "" : "; ") + what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " violation(s): " + first_};
  }

 private:
  std::size_t failures_ = 0;
  std::string first_;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const Template& template_of(const TemplateSuite& suite, const QaInstance& q) {
  for (const auto& t : suite.templates) {
    if (t.template_id == q.template_id) return t;
  }
  throw std::runtime_error("unknown template " + q.template_id);
}

GenerationConfig with_seed(std::uint64_t seed) {
  GenerationConfig c = testing::demo_config();
  c.seed = seed;
  return c;
}

std::string random_text(std::mt19937_64& gen, const std::vector<std::string>& alphabet, std::size_t max_len) {
  std::string s;
  const std::size_t n = gen() % (max_len + 1);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[gen() % alphabet.size()];
  return s;
}

// 1 -------------------------------------------------------------------------
Outcome anls_suite() {
  const auto start = std::chrono::steady_clock::now();
  Checker c;
  c.expect(std::abs(anls("130.00", std::vector<std::string>{"130.00"}) - 1.0) < 1e-9, "exact match");
  c.expect(std::abs(anls("01/30/28", std::vector<std::string>{"01/30/20"}) - 0.875) < 1e-9, "misprint 0.875");
  c.expect(std::abs(anls("zzzz", std::vector<std::string>{"130.00"}) - 0.0) < 1e-9, "unrelated 0");

  std::mt19937_64 gen(2024);
  const std::vector<std::string> alphabet = {"a", "b", "c", "1", "0", "/", " ", "é", "日"};
  for (int i = 0; i < 10000; ++i) {
    const std::string p = random_text(gen, alphabet, 12), g = random_text(gen, alphabet, 12);
    const double pg = anls(p, std::vector<std::string>{g});
    const double gp = anls(g, std::vector<std::string>{p});
    c.expect(pg == gp, "symmetry");
    c.expect(pg == 0.0 || (pg > 1.0 - kAnlsThreshold && pg <= 1.0), "range");
    if (!p.empty()) c.expect(anls(p, std::vector<std::string>{p}) == 1.0, "identity");
  }
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 5.0, "runtime " + fmt(elapsed) + " s");
  return c.done("3 examples, 10000 random pairs in " + fmt(elapsed, 3) + " s");
}

// 2 -------------------------------------------------------------------------
Outcome self_bleu_separation() {
  const auto start = std::chrono::steady_clock::now();
  const KieDataset& ds = testing::clean_receipts();
  const auto simple = diversity_report(generate(ds, testing::simple_suite(), testing::demo_config()).dataset, {2, 4});
  const auto demo = diversity_report(testing::demo_generation().dataset, {2, 4});
  const double elapsed = seconds_since(start);
  Checker c;
  c.expect(ds.documents.size() == 200, "corpus size");
  c.expect(simple.at(2) >= 0.99, "simple 2-gram below 0.99");
  c.expect(demo.at(2) <= simple.at(2) - 0.05, "2-gram gap under 0.05");
  c.expect(demo.at(4) <= simple.at(4) - 0.05, "4-gram gap under 0.05");
  c.expect(elapsed < 60.0, "runtime " + fmt(elapsed) + " s");
  return c.done("single template " + fmt(simple.at(2), 4) + "/" + fmt(simple.at(4), 4) + ", demo suite " +
                fmt(demo.at(2), 4) + "/" + fmt(demo.at(4), 4) + " (2/4-gram) in " + fmt(elapsed, 3) + " s");
}

// 3 -------------------------------------------------------------------------
Outcome boolean_balance() {
  const KieDataset& ds = testing::clean_receipts();
  std::vector<QaDataset> runs = {testing::demo_generation().dataset};
  for (std::size_t n : {1, 5, 7}) {
    GenerationConfig cfg = testing::demo_config();
    cfg.boolean_count_per_doc = n;
    runs.push_back(generate(ds, testing::demo_suite(), cfg).dataset);
  }
  GenerationConfig sampled = testing::demo_config();
  sampled.strategy = Strategy::generate_all_then_sample;
  sampled.extractive_quota = 100;
  sampled.boolean_quota = 777;
  runs.push_back(generate(ds, testing::demo_suite(), sampled).dataset);

  Checker c;
  std::size_t docs = 0, booleans = 0;
  for (const auto& qa : runs) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_doc;
    for (const auto& q : qa.instances) {
      if (q.question_type != QuestionType::boolean) continue;
      ++per_doc[q.doc_id].first;
      per_doc[q.doc_id].second += q.answers.at(0) == kNo;
      ++booleans;
    }
    for (const auto& [doc, counts] : per_doc) {
      c.expect(counts.second == counts.first / 2, doc + ": " + std::to_string(counts.second) + " false of " +
                                                      std::to_string(counts.first));
    }
    docs += per_doc.size();
  }
  return c.done(std::to_string(booleans) + " booleans over " + std::to_string(docs) +
                " document runs, every one with floor(n/2) false");
}

// 4 -------------------------------------------------------------------------
Outcome ambiguity_oracle() {
  const KieDataset& ds = testing::clean_receipts();
  const TemplateSuite& suite = testing::demo_suite();
  GenerationConfig everything = testing::demo_config();
  everything.strategy = Strategy::generate_all_then_sample;
  everything.extractive_quota = 10000000;
  everything.boolean_quota = 10000000;
  const QaDataset all = generate(ds, suite, everything).dataset;

  // Documents whose line items repeat a price, and those repeated prices.
  std::map<std::string, std::set<std::string>> duplicated;
  for (const auto& d : ds.documents) {
    std::map<std::string, int> seen;
    for (const auto& e : d.entities) {
      if (e.line_item_id && e.type_name == "item_price") ++seen[e.value()];
    }
    for (const auto& [v, n] : seen) {
      if (n > 1) duplicated[d.doc_id].insert(v);
    }
  }

  Checker c;
  c.expect(!duplicated.empty(), "fixture has no duplicated prices");
  std::size_t line_item_instances = 0, price_questions = 0;
  for (const QaDataset* qa : {&all, &testing::demo_generation().dataset}) {
    for (const auto& q : qa->instances) {
      const Template& t = template_of(suite, q);
      if (t.scope != Scope::line_item) continue;
      ++line_item_instances;
      const std::size_t n = oracle::referents(q, t, *ds.find_document(q.doc_id));
      c.expect(n == 1, q.qa_id + " has " + std::to_string(n) + " consistent line items");
      if (q.template_id == "li-item-by-price") {
        ++price_questions;
        auto it = duplicated.find(q.doc_id);
        c.expect(it == duplicated.end() || !it->second.count(q.bindings.at("price")),
                 q.qa_id + " asks about a duplicated price");
      }
    }
  }
  c.expect(price_questions > 0, "no price questions were generated");
  return c.done(std::to_string(line_item_instances) + " line-item instances, " + std::to_string(duplicated.size()) +
                " documents with duplicated prices, none of those prices asked about (" +
                std::to_string(price_questions) + " price questions)");
}

// 5 -------------------------------------------------------------------------
Outcome negative_provenance() {
  const KieDataset& ds = testing::clean_receipts();
  const TemplateSuite& suite = testing::demo_suite();
  Checker c;
  std::size_t checked = 0, runs = 0;
  for (std::uint64_t seed = 42; checked < 1000; ++seed, ++runs) {
    for (const auto& q : generate(ds, suite, with_seed(seed)).dataset.instances) {
      if (q.question_type != QuestionType::boolean || q.answers.at(0) != kNo) continue;
      const std::string why = oracle::check_negative(q, template_of(suite, q), ds);
      c.expect(why.empty(), q.qa_id + ": " + why);
      ++checked;
    }
  }
  return c.done(std::to_string(checked) + " false booleans from " + std::to_string(runs) +
                " seeds, zero violations");
}

// 6 -------------------------------------------------------------------------
Outcome delta_reproduction() {
  const double d = robustness_delta(68.1, 15.6);
  Checker c;
  c.expect(std::abs(d - 0.7709) <= 0.001, "delta " + fmt(d));
  return c.done("delta(68.1, 15.6) = " + format_fixed(d));
}

// 7 -------------------------------------------------------------------------
class UniformModel final : public LanguageModel {
 public:
  explicit UniformModel(double vocabulary) : lp_(-std::log(vocabulary)) {}
  std::vector<double> token_logprobs(const Tokens& tokens) const override {
    return std::vector<double>(tokens.size() + 1, lp_);
  }

 private:
  double lp_;
};

Outcome perplexity_identity() {
  Checker c;
  const std::vector<std::string> sentences = {"a b c", "d e", "f g h i j k"};
  const double uniform = corpus_perplexity(UniformModel(100.0), sentences);
  c.expect(std::abs(uniform - 100.0) <= 1e-12, "uniform model gives " + fmt(uniform, 17));

  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> lp(-15.0, 0.0);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> v(1 + gen() % 200);
    for (double& x : v) x = lp(gen);
    const double expected = static_cast<double>(oracle::perplexity(v));
    const double rel = std::abs(perplexity(v) - expected) / expected;
    worst = std::max(worst, rel);
    c.expect(rel <= 1e-9, "vector " + std::to_string(i) + " off by " + fmt(rel));
  }
  return c.done("uniform V=100 gives " + fmt(uniform, 15) + "; 100 random vectors within " + fmt(worst, 3) +
                " of a 50-digit recomputation");
}

// 8 -------------------------------------------------------------------------
Outcome groundedness_partition() {
  const QaDataset qa = load_qa_dataset(fixture("eval_qa.jsonl"));
  const KieDataset ocr = load_kie_dataset(fixture("eval_kie.jsonl"));
  const auto preds = parse_predictions(read_text_file(fixture("eval_predictions.jsonl")));
  const json expected = json::parse(read_text_file(fixture("eval_expected.json")));
  const EvalReport r = evaluate_predictions(qa, preds, ocr);

  Checker c;
  std::size_t total = 0;
  std::string counts;
  for (const auto& [label, n] : r.groundedness) {
    const std::size_t want = expected["groundedness"][to_string(label)].get<std::size_t>();
    c.expect(n == want, std::string(to_string(label)) + " " + std::to_string(n) + " != " + std::to_string(want));
    total += n;
    counts += (counts.empty() ? "" : ", ") + std::string(to_string(label)) + " " + std::to_string(n);
  }
  c.expect(total == 40, "labels sum to " + std::to_string(total));

  const EvalRecord chad{"chad", "Chad Horrell", {"/ Chad Horrell"}, "Agent : / Chad Horrell Date",
                        QuestionType::extractive};
  c.expect(groundedness(chad) == GroundednessLabel::mis_extraction, "Chad Horrell pattern");
  return c.done(counts);
}

// 9 -------------------------------------------------------------------------
Outcome determinism() {
  const auto dir = testing::scratch_dir();
  std::vector<std::string> files;
  Checker c;
  for (const auto& [name, jobs] : std::vector<std::pair<std::string, std::string>>{
           {"det-1a.jsonl", "1"}, {"det-1b.jsonl", "1"}, {"det-8.jsonl", "8"}}) {
    const std::string out = (dir / name).string();
    std::ostringstream sink_out, sink_err;
    const int code = run_cli({"k2q", "generate", "--dataset", fixture("receipts_clean.jsonl").string(), "--templates",
                              fixture("demo_suite.jsonl").string(), "--config",
                              fixture("generate_config.json").string(), "--out", out, "--jobs", jobs},
                             sink_out, sink_err);
    c.expect(code == kExitOk, "generate exited " + std::to_string(code) + ": " + sink_err.str());
    files.push_back(code == kExitOk ? read_text_file(out) : "");
  }
  c.expect(!files[0].empty(), "empty output");
  c.expect(files[0] == files[1], "two runs differ");
  c.expect(files[0] == files[2], "--jobs 1 and --jobs 8 differ");
  return c.done("3 runs, " + std::to_string(files[0].size()) + " identical bytes, sha256 " +
                sha256_hex(files[0]).substr(0, 12));
}

// 10 ------------------------------------------------------------------------
Outcome stats_golden() {
  const StatsReport s = dataset_stats(load_qa_dataset(fixture("receipts_qa.jsonl")));
  const json g = json::parse(read_text_file(fixture("receipts_qa.stats.json")));
  Checker c;
  auto near = [&](const char* key, double value, double tol) {
    c.expect(std::abs(value - g[key].get<double>()) <= tol, std::string(key) + " " + fmt(value));
  };
  c.expect(s.num_questions == g["num_questions"].get<std::size_t>(), "num_questions");
  c.expect(s.num_templates_used == g["num_templates_used"].get<std::size_t>(), "num_templates_used");
  near("pct_extractive", s.pct_extractive, 0.01);
  near("pct_boolean", s.pct_boolean(), 0.01);
  near("pct_single_page", s.pct_single_page, 0.01);
  near("avg_question_tokens", s.avg_question_tokens, 1e-9);
  near("avg_answer_tokens", s.avg_answer_tokens, 1e-9);
  near("avg_entities_per_question", s.avg_entities_per_question, 1e-9);
  near("avg_questions_per_doc", s.avg_questions_per_doc, 1e-9);
  return c.done(std::to_string(s.num_questions) + " questions, " + format_fixed(s.pct_extractive, 2) +
                "% extractive, all nine fields match");
}

// 11 ------------------------------------------------------------------------
Outcome fleiss() {
  Checker c;
  const double agree = fleiss_kappa({{3, 0, 0, 0, 0}, {0, 3, 0, 0, 0}, {3, 0, 0, 0, 0}, {0, 0, 0, 3, 0}});
  c.expect(agree == 1.0, "all-agree gives " + fmt(agree));
  const double mixed = fleiss_kappa({{3, 0, 0}, {1, 2, 0}, {0, 1, 2}, {1, 1, 1}});
  c.expect(std::abs(mixed - 5.0 / 47.0) <= 1e-6, "mixed matrix gives " + fmt(mixed));
  const ValidationReport r =
      validation_report(parse_rater_labels(read_text_file(fixture("validation_labels.jsonl"))));
  const json expected = json::parse(read_text_file(fixture("validation_expected.json")));
  c.expect(r.num_raters == 3 && r.categories.size() == kNumErrorCategories, "report shape");
  c.expect(std::isfinite(r.overall_kappa), "overall kappa is not finite");
  c.expect(std::abs(r.overall_kappa - expected["overall_kappa"].get<double>()) <= 1e-6, "overall kappa");
  return c.done("all-agree 1, mixed " + fmt(mixed, 10) + " (5/47), 3-rater validation set overall " +
                format_fixed(r.overall_kappa));
}

// 12 ------------------------------------------------------------------------
Outcome cleaning_profiles() {
  Checker c;
  auto type = [](const std::string& name, FormatClass f = FormatClass::string) {
    return EntityTypeDef{name, std::nullopt, {name}, f};
  };
  auto profile = [&](const char* p, const EntityTypeDef& t, const std::string& v) {
    return clean_value(v, builtin_profile(p).rules_for(t));
  };
  const std::vector<std::tuple<std::string, std::string, std::string>> examples = {
      {"strip_prefix + title_case_allcaps",
       clean_value("REMIT TO ACME MEDIA GROUP",
                   {CleaningRule::strip_prefix("REMIT TO"), CleaningRule::title_case_allcaps()}),
       "Acme Media Group"},
      {"strip_brackets", clean_value("(1234)", {CleaningRule::strip_brackets()}), "1234"},
      {"numeric_token_filter", clean_value("Rp 10.000", {CleaningRule::numeric_token_filter()}), "10.000"},
      {"replace_newlines", clean_value("ACME CORP\nBILLING", {CleaningRule::replace_newlines(", ")}),
       "ACME CORP, BILLING"},
      {"strip_edge_punct", clean_value(":10.000,", {CleaningRule::strip_edge_punct()}), "10.000"},
      {"klc charity_number", profile("klc", type("charity_number", FormatClass::integer), "1154288"), "1154288"},
      {"docile", profile("docile", type("vendor_name"), "ACME CORP\nBILLING"), "Acme Corp, Billing"},
      {"adbuy tv_address", profile("adbuy", type("tv_address"), "NY"), "NY"},
      {"regform acronyms", profile("regform", type("registrant"), "HOGAN & HARTSON LLP"), "Hogan & Hartson LLP"},
      {"cord numeric", profile("cord", type("total", FormatClass::integer), "Rp 10.000"), "10.000"},
  };
  for (const auto& [name, got, want] : examples) c.expect(got == want, name + " gave '" + got + "'");

  std::mt19937_64 gen(12);
  const std::vector<std::string> alphabet = {"A", "B", "Z", "a", "q", "1", "0", " ", " ", "\n", "(", ")", "[",
                                             "]", "{", "}", "<", ">", ".", ",", "-", ":", "'", "&", "/", "é",
                                             "REMIT TO ", "LLC", "USA", "Rp", "\r\n"};
  std::size_t inputs = 0;
  for (const auto& name : builtin_profile_names()) {
    const CleaningProfile p = builtin_profile(name);
    std::vector<const std::vector<CleaningRule>*> lists;
    for (const auto& [selector, rules] : p.rules_by_entity_type) lists.push_back(&rules);
    for (int i = 0; i < 10000; ++i) {
      const std::string v = random_text(gen, alphabet, 20);
      const auto& rules = *lists[static_cast<std::size_t>(i) % lists.size()];
      const std::string once = clean_value(v, rules);
      c.expect(clean_value(once, rules) == once, name + " not idempotent on '" + v + "'");
      ++inputs;
    }
  }
  return c.done(std::to_string(examples.size()) + " rule examples, idempotent on " + std::to_string(inputs) +
                " random inputs (10000 per profile)");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ANLS unit suite", anls_suite},
      {"Self-BLEU separation", self_bleu_separation},
      {"Boolean balance", boolean_balance},
      {"Ambiguity oracle", ambiguity_oracle},
      {"Negative provenance", negative_provenance},
      {"Delta reproduction", delta_reproduction},
      {"Perplexity identity", perplexity_identity},
      {"Groundedness partition", groundedness_partition},
      {"Determinism", determinism},
      {"Stats golden", stats_golden},
      {"Fleiss kappa", fleiss},
      {"Cleaning profiles", cleaning_profiles},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << std::setw(2) << i + 1 << "] " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
