#include "k2q/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "k2q/cleaning.hpp"
#include "k2q/digest.hpp"
#include "k2q/generator.hpp"
#include "k2q/io.hpp"
#include "k2q/kie_model.hpp"
#include "k2q/metrics.hpp"
#include "k2q/reporting.hpp"
#include "k2q/templates.hpp"
#include "k2q/text.hpp"

#ifndef K2Q_VERSION
#define K2Q_VERSION "0.0.0"
#endif

namespace k2q {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Diagnostics {
 public:
  Diagnostics(std::ostream& err, bool color) : err_(err), color_(color) {}

  void error(const std::string& msg) { err_ << style("31", "error:") << " " << msg << "\n"; }
  void warning(const std::string& msg) { err_ << style("33", "warning:") << " " << msg << "\n"; }

  /// One JSON object per line so scripts can consume the listing.
  void issue(const Issue& i) {
    err_ << json{{"severity", to_string(i.severity)}, {"location", i.location}, {"message", i.message}}
                .dump()
         << "\n";
  }

 private:
  std::string style(const char* code, const std::string& s) const {
    return color_ ? "\x1b[" + std::string(code) + "m" + s + "\x1b[0m" : s;
  }

  std::ostream& err_;
  bool color_;
};

// Records what a command read and wrote.
class Manifest {
 public:
  explicit Manifest(std::string command)
      : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& path, std::string_view content) {
    inputs_[path.string()] = sha256_hex(content);
  }
  void config(std::string_view canonical) { config_digest_ = sha256_hex(canonical); }
  void seed(std::uint64_t s) { seed_ = s; }
  void output(const fs::path& path) { outputs_.push_back(path.string()); }

  void write(const fs::path& path) const {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j = {{"command", command_},
              {"inputs", inputs_},
              {"config_digest", config_digest_ ? json(*config_digest_) : json(nullptr)},
              {"seed", seed_ ? json(*seed_) : json(nullptr)},
              {"tool_version", K2Q_VERSION},
              {"outputs", outputs_},
              {"duration_seconds", seconds}};
    write_text_file(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::map<std::string, std::string> inputs_;
  std::optional<std::string> config_digest_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

fs::path manifest_path_for(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

std::string read_input(const fs::path& path, Manifest& manifest) {
  std::string content = read_text_file(path);
  manifest.input(path, content);
  return content;
}

void finish_manifest(const Manifest& manifest, const std::string& explicit_path,
                     const std::optional<fs::path>& out) {
  if (!explicit_path.empty()) {
    manifest.write(explicit_path);
  } else if (out) {
    manifest.write(manifest_path_for(*out));
  }
}

KieDataset load_checked(const fs::path& path, Manifest& manifest, Diagnostics& diag) {
  KieDataset ds = parse_kie_dataset(read_input(path, manifest));
  const auto issues = validate_dataset(ds);
  if (has_errors(issues)) {
    for (const auto& i : issues) diag.issue(i);
    throw Error(ErrorKind::schema, path.string() + " failed validation");
  }
  return ds;
}

std::vector<std::vector<int>> parse_rating_matrix(std::string_view content) {
  std::vector<std::vector<int>> rows;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
    std::vector<int> row;
    for (const auto& cell : text::split_whitespace(line)) {
      try {
        std::size_t used = 0;
        row.push_back(std::stoi(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": '" + cell +
                                          "' is not an integer count");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::schema, "rating matrix is empty");
  return rows;
}

std::vector<std::string> read_lines(std::string_view content) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) lines.emplace_back(text::trim(line));
  }
  return lines;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool color) {
  if (std::getenv("K2Q_NO_COLOR")) color = false;
  Diagnostics diag(err, color);

  CLI::App app{"Turn key-information-extraction annotations into question-answer datasets and score predictions."};
  app.name(args.empty() ? "k2q" : fs::path(args.front()).filename().string());
  app.set_version_flag("--version", K2Q_VERSION);
  app.require_subcommand(1);

  std::string manifest_path;
  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest_path, "Where to write the run manifest");
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a KIE file");
  std::string ingest_input;
  bool strict = false;
  ingest->add_option("input", ingest_input, "KIE file")->required();
  ingest->add_flag("--strict", strict, "Treat warnings as errors");
  add_manifest(ingest);

  // clean
  auto* clean = app.add_subcommand("clean", "Normalize entity values with a cleaning profile");
  std::string clean_input, clean_profile, clean_out;
  bool link_spans = false;
  clean->add_option("--dataset", clean_input, "KIE file")->required();
  clean->add_option("--profile", clean_profile, "Builtin profile name or profile file")->required();
  clean->add_option("--out", clean_out, "Cleaned KIE file")->required();
  clean->add_flag("--link-spans", link_spans, "Link entities without token spans to the OCR first");
  add_manifest(clean);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a question-answer dataset");
  std::string gen_dataset, gen_templates, gen_config, gen_out, gen_strategy;
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_bool_count, gen_ext_quota, gen_bool_quota;
  std::optional<bool> gen_single_page;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  gen->add_option("--dataset", gen_dataset, "Cleaned KIE file")->required();
  gen->add_option("--templates", gen_templates, "Template suite file")->required();
  gen->add_option("--config", gen_config, "Generation config file");
  gen->add_option("--out", gen_out, "QA output file")->required();
  gen->add_option("--seed", gen_seed, "Random seed (overrides the config)");
  gen->add_option("--strategy", gen_strategy, "per_entity or generate_all_then_sample");
  gen->add_option("--boolean-count", gen_bool_count, "Boolean questions per document (per_entity)");
  gen->add_option("--extractive-quota", gen_ext_quota, "Extractive total (generate_all_then_sample)");
  gen->add_option("--boolean-quota", gen_bool_quota, "Boolean total (generate_all_then_sample)");
  gen->add_option("--single-page-only", gen_single_page, "true or false");
  gen->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  add_manifest(gen);

  // stats
  auto* stats = app.add_subcommand("stats", "Summarize a QA dataset");
  std::string stats_qa, stats_out;
  bool stats_json = false;
  stats->add_option("--qa", stats_qa, "QA file")->required();
  stats->add_flag("--json", stats_json, "Print JSON instead of a table");
  stats->add_option("--out", stats_out, "Also write the JSON report here");
  add_manifest(stats);

  // eval
  auto* eval = app.add_subcommand("eval", "Score predictions against a QA dataset");
  std::string eval_qa, eval_pred, eval_ocr, eval_out;
  eval->add_option("--qa", eval_qa, "QA file")->required();
  eval->add_option("--predictions", eval_pred, "Predictions file")->required();
  eval->add_option("--ocr-from", eval_ocr, "KIE file holding the documents' OCR")->required();
  eval->add_option("--out", eval_out, "JSON report");
  add_manifest(eval);

  // delta
  auto* delta = app.add_subcommand("delta", "Relative ANLS drop between two training distributions");
  double delta_in = 0, delta_cross = 0;
  delta->add_option("in_distribution", delta_in, "ANLS with matching templates")->required();
  delta->add_option("cross_distribution", delta_cross, "ANLS with swapped templates")->required();
  add_manifest(delta);

  // self-bleu
  auto* sb = app.add_subcommand("self-bleu", "Self-BLEU of a corpus");
  std::string sb_input;
  int sb_n = 4;
  bool sb_qa = false;
  std::size_t sb_sample = kSelfBleuSampleSize;
  std::uint64_t sb_seed = kDiversitySeed;
  sb->add_option("input", sb_input, "One sentence per line, or a QA file with --qa")->required();
  sb->add_option("-n,--ngram", sb_n, "Maximum n-gram order")->check(CLI::Range(1, 16));
  sb->add_flag("--qa", sb_qa, "Read the test-split questions of a QA file");
  sb->add_option("--sample-size", sb_sample, "Sentences scored")->check(CLI::PositiveNumber);
  sb->add_option("--seed", sb_seed, "Sampling seed");
  add_manifest(sb);

  // kappa
  auto* kappa = app.add_subcommand("kappa", "Fleiss' kappa of a rating matrix or rater labels");
  std::string kappa_input;
  bool kappa_labels = false, kappa_json = false;
  kappa->add_option("input", kappa_input,
                    "Whitespace-separated count matrix, or a labels file with --labels")
      ->required();
  kappa->add_flag("--labels", kappa_labels, "Input holds per-question rater labels");
  kappa->add_flag("--json", kappa_json, "With --labels, print the JSON report");
  add_manifest(kappa);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("k2q");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) {
      Manifest manifest("ingest");
      KieDataset ds = parse_kie_dataset(read_input(ingest_input, manifest));
      const auto issues = validate_dataset(ds);
      for (const auto& i : issues) diag.issue(i);
      std::size_t errors = 0, warnings = 0;
      for (const auto& i : issues) (i.severity == Severity::error ? errors : warnings)++;
      std::size_t entities = 0;
      for (const auto& d : ds.documents) entities += d.entities.size();
      out << ds.documents.size() << " documents, " << entities << " entities, " << errors
          << " errors, " << warnings << " warnings\n";
      finish_manifest(manifest, manifest_path, std::nullopt);
      return has_errors(issues, strict) ? kExitInvalid : kExitOk;
    }

    if (*clean) {
      Manifest manifest("clean");
      KieDataset ds = load_checked(clean_input, manifest, diag);
      const CleaningProfile profile = resolve_cleaning_profile(clean_profile);
      manifest.config(serialize_cleaning_profile(profile));
      std::size_t linked = 0;
      if (link_spans) linked = link_missing_spans(ds);
      CleaningOutcome outcome = clean_dataset(ds, profile);
      for (const auto& w : outcome.warnings) diag.warning(w.location + ": " + w.message);
      save_kie_dataset(outcome.dataset, clean_out);
      manifest.output(clean_out);
      out << "cleaned " << outcome.dataset.documents.size() << " documents with profile '"
          << profile.name << "'";
      if (link_spans) out << ", linked " << linked << " spans";
      out << ", " << outcome.warnings.size() << " empty values\n";
      finish_manifest(manifest, manifest_path, fs::path(clean_out));
      return kExitOk;
    }

    if (*gen) {
      Manifest manifest("generate");
      GenerationConfig config;
      if (!gen_config.empty()) config = parse_generation_config(read_input(gen_config, manifest));
      if (gen_seed) config.seed = *gen_seed;
      if (!gen_strategy.empty()) config.strategy = strategy_from_string(gen_strategy);
      if (gen_bool_count) config.boolean_count_per_doc = *gen_bool_count;
      if (gen_ext_quota) config.extractive_quota = gen_ext_quota;
      if (gen_bool_quota) config.boolean_quota = gen_bool_quota;
      if (gen_single_page) config.single_page_only = *gen_single_page;
      if (!config.seed) {
        diag.error("generate needs an explicit seed (--seed or \"seed\" in the config)");
        return kExitUsage;
      }
      KieDataset ds = load_checked(gen_dataset, manifest, diag);
      TemplateSuite suite = parse_template_suite(read_input(gen_templates, manifest));
      const auto suite_issues = validate_suite(suite, ds.ontology);
      if (has_errors(suite_issues)) {
        for (const auto& i : suite_issues) diag.issue(i);
        diag.error("template suite does not match the dataset ontology; nothing generated");
        return kExitInvalid;
      }
      manifest.config(serialize_generation_config(config));
      manifest.seed(*config.seed);
      GenerationResult result = generate(ds, suite, config, jobs);
      for (const auto& w : result.warnings) diag.warning(w);
      save_qa_dataset(result.dataset, gen_out);
      manifest.output(gen_out);
      std::size_t booleans = 0;
      for (const auto& q : result.dataset.instances) {
        booleans += q.question_type == QuestionType::boolean ? 1 : 0;
      }
      out << "generated " << result.dataset.instances.size() << " questions ("
          << result.dataset.instances.size() - booleans << " extractive, " << booleans
          << " boolean)\n";
      finish_manifest(manifest, manifest_path, fs::path(gen_out));
      return kExitOk;
    }

    if (*stats) {
      Manifest manifest("stats");
      const QaDataset qads = parse_qa_dataset(read_input(stats_qa, manifest));
      const StatsReport report = dataset_stats(qads);
      out << (stats_json ? stats_to_json(report) : stats_table(report));
      std::optional<fs::path> written;
      if (!stats_out.empty()) {
        write_text_file(stats_out, stats_to_json(report));
        manifest.output(stats_out);
        written = stats_out;
      }
      finish_manifest(manifest, manifest_path, written);
      return kExitOk;
    }

    if (*eval) {
      Manifest manifest("eval");
      const QaDataset qads = parse_qa_dataset(read_input(eval_qa, manifest));
      const auto predictions = parse_predictions(read_input(eval_pred, manifest));
      const KieDataset ocr = parse_kie_dataset(read_input(eval_ocr, manifest));
      const EvalReport report = evaluate_predictions(qads, predictions, ocr);
      if (report.missing_predictions) {
        diag.warning(std::to_string(report.missing_predictions) +
                     " questions have no prediction and score 0");
      }
      out << eval_table(report);
      std::optional<fs::path> written;
      if (!eval_out.empty()) {
        write_text_file(eval_out, eval_to_json(report));
        manifest.output(eval_out);
        written = eval_out;
      }
      finish_manifest(manifest, manifest_path, written);
      return kExitOk;
    }

    if (*delta) {
      Manifest manifest("delta");
      out << format_fixed(robustness_delta(delta_in, delta_cross)) << "\n";
      finish_manifest(manifest, manifest_path, std::nullopt);
      return kExitOk;
    }

    if (*sb) {
      Manifest manifest("self-bleu");
      const std::string content = read_input(sb_input, manifest);
      double value = 0;
      if (sb_qa) {
        value = diversity_report(parse_qa_dataset(content), {sb_n}, sb_sample, sb_seed).at(sb_n);
      } else {
        const auto lines = read_lines(content);
        if (lines.size() < 2) throw Error(ErrorKind::invalid_argument, "self-BLEU needs at least two sentences");
        value = self_bleu(lines, sb_n, sb_sample, sb_seed);
      }
      manifest.seed(sb_seed);
      out << format_fixed(value) << "\n";
      finish_manifest(manifest, manifest_path, std::nullopt);
      return kExitOk;
    }

    if (*kappa) {
      Manifest manifest("kappa");
      const std::string content = read_input(kappa_input, manifest);
      if (kappa_labels) {
        const ValidationReport report = validation_report(parse_rater_labels(content));
        out << (kappa_json ? validation_to_json(report) : validation_table(report));
      } else {
        out << format_fixed(fleiss_kappa(parse_rating_matrix(content))) << "\n";
      }
      finish_manifest(manifest, manifest_path, std::nullopt);
      return kExitOk;
    }
  } catch (const Error& e) {
    diag.error(e.what());
    return e.kind() == ErrorKind::io || e.kind() == ErrorKind::invalid_argument ? kExitUsage
                                                                              : kExitInvalid;
  } catch (const std::invalid_argument& e) {
    diag.error(e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace k2q
