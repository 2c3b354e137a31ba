#include <cstdlib>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "k2q/cli.hpp"
#include "k2q/digest.hpp"
#include "k2q/generator.hpp"
#include "k2q/io.hpp"
#include "support.hpp"

using namespace k2q;
using nlohmann::json;
using testing::fixture;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run k2q_run(std::vector<std::string> args) {
  args.insert(args.begin(), "k2q");
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fx(const std::string& name) { return fixture(name).string(); }

std::string scratch(const std::string& name) { return (testing::scratch_dir() / name).string(); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("ingest exit codes") {
    Run ok = k2q_run({"ingest", fx("receipts.jsonl")});
    CHECK(ok.code == kExitOk);
    CHECK(ok.out.find("200 documents") != std::string::npos);
    CHECK(k2q_run({"ingest", fx("receipts.jsonl"), "--strict"}).code == kExitInvalid);
    CHECK(k2q_run({"ingest", fx("receipts_clean.jsonl"), "--strict"}).code == kExitOk);
    Run dangling = k2q_run({"ingest", fx("dangling.jsonl")});
    CHECK(dangling.code == kExitInvalid);
    CHECK(dangling.err.find("foo") != std::string::npos);
    CHECK(k2q_run({"ingest", fx("missing.jsonl")}).code == kExitUsage);
    CHECK(k2q_run({"ingest"}).code == kExitUsage);
    CHECK(k2q_run({"bogus"}).code == kExitUsage);
    CHECK(k2q_run({}).code == kExitUsage);
  }

  TEST_CASE("clean reproduces the packaged cleaned corpus") {
    const std::string out = scratch("clean.jsonl");
    Run r = k2q_run({"clean", "--dataset", fx("receipts.jsonl"), "--profile", "cord", "--out", out, "--link-spans"});
    REQUIRE(r.code == kExitOk);
    CHECK(read_text_file(out) == read_text_file(fixture("receipts_clean.jsonl")));
    const json manifest = json::parse(read_text_file(out + ".manifest.json"));
    CHECK(manifest["command"] == "clean");
    CHECK(manifest["inputs"][fx("receipts.jsonl")] == sha256_hex(read_text_file(fixture("receipts.jsonl"))));
    CHECK(k2q_run({"clean", "--dataset", fx("receipts.jsonl"), "--profile", "nope", "--out", out}).code ==
          kExitUsage);
  }

  TEST_CASE("generate is deterministic and writes a manifest") {
    const std::string a = scratch("gen-a.jsonl"), b = scratch("gen-b.jsonl");
    const std::vector<std::string> common = {"generate", "--dataset", fx("receipts_clean.jsonl"), "--templates",
                                             fx("demo_suite.jsonl"), "--config", fx("generate_config.json")};
    auto with = [&](const std::string& out, const std::string& jobs) {
      auto args = common;
      args.insert(args.end(), {"--out", out, "--jobs", jobs});
      return k2q_run(args);
    };
    REQUIRE(with(a, "1").code == kExitOk);
    REQUIRE(with(b, "8").code == kExitOk);
    CHECK(read_text_file(a) == read_text_file(b));
    CHECK(read_text_file(a) == read_text_file(fixture("receipts_qa.jsonl")));
    const json manifest = json::parse(read_text_file(a + ".manifest.json"));
    CHECK(manifest["seed"] == 42);
    CHECK(manifest["outputs"] == json::array({a}));
    CHECK(manifest["inputs"][fx("demo_suite.jsonl")] == sha256_hex(read_text_file(fixture("demo_suite.jsonl"))));

    // Entities with at least one applicable template, plus four booleans per document.
    const KieDataset& ds = testing::clean_receipts();
    std::size_t expected = 4 * ds.documents.size();
    for (const auto& d : ds.documents) {
      std::set<std::string> anchors;
      for (const auto& c : enumerate_candidates(d, ds, testing::demo_suite())) {
        if (c.tmpl->question_type == QuestionType::extractive) anchors.insert(c.anchor_entity_id);
      }
      expected += anchors.size();
    }
    CHECK(load_qa_dataset(a).instances.size() == expected);
    CHECK(manifest["config_digest"].get<std::string>().size() == 64);
    CHECK(manifest.contains("tool_version"));
    CHECK(manifest["duration_seconds"].get<double>() >= 0);
  }

  TEST_CASE("generate refusals") {
    const std::string out = scratch("gen-refused.jsonl");
    Run no_seed = k2q_run({"generate", "--dataset", fx("receipts_clean.jsonl"), "--templates",
                           fx("demo_suite.jsonl"), "--out", out, "--boolean-count", "4"});
    CHECK(no_seed.code == kExitUsage);
    CHECK(no_seed.err.find("seed") != std::string::npos);

    std::string suite = read_text_file(fixture("simple_suite.jsonl"));
    suite.replace(suite.find("\"cashier\""), 9, "\"cashiers\"");
    write_text_file(scratch("typo_suite.jsonl"), suite);
    Run typo = k2q_run({"generate", "--dataset", fx("receipts_clean.jsonl"), "--templates",
                        scratch("typo_suite.jsonl"), "--out", out, "--seed", "1"});
    CHECK(typo.code == kExitInvalid);
    CHECK(typo.err.find("cashiers") != std::string::npos);
  }

  TEST_CASE("simple suite question count follows the closed form") {
    const std::string out = scratch("simple.jsonl");
    REQUIRE(k2q_run({"generate", "--dataset", fx("receipts_clean.jsonl"), "--templates", fx("simple_suite.jsonl"),
                     "--out", out, "--seed", "3"})
                .code == kExitOk);
    const QaDataset qa = load_qa_dataset(out);
    const json expected = json::parse(read_text_file(fixture("simple_counts.json")));
    CHECK(qa.instances.size() == expected["total"].get<std::size_t>());
    std::map<std::string, std::size_t> per_split;
    for (const auto& q : qa.instances) ++per_split[to_string(q.split)];
    for (const auto& [split, n] : expected["per_split"].items()) CHECK(per_split[split] == n.get<std::size_t>());
  }

  TEST_CASE("stats") {
    Run table = k2q_run({"stats", "--qa", fx("receipts_qa.jsonl")});
    CHECK(table.code == kExitOk);
    CHECK(table.out.find("5992") != std::string::npos);
    const std::string out = scratch("stats.json");
    Run j = k2q_run({"stats", "--qa", fx("receipts_qa.jsonl"), "--json", "--out", out});
    CHECK(j.code == kExitOk);
    CHECK(json::parse(j.out)["num_questions"] == 5992);
    CHECK(json::parse(read_text_file(out)) == json::parse(j.out));
  }

  TEST_CASE("eval") {
    const std::string gold = scratch("gold_preds.jsonl");
    std::string lines;
    const QaDataset qa = load_qa_dataset(fixture("eval_qa.jsonl"));
    for (const auto& q : qa.instances) lines += json{{"qa_id", q.qa_id}, {"prediction", q.answers[0]}}.dump() + "\n";
    write_text_file(gold, lines);
    Run perfect = k2q_run({"eval", "--qa", fx("eval_qa.jsonl"), "--predictions", gold, "--ocr-from", fx("eval_kie.jsonl")});
    CHECK(perfect.code == kExitOk);
    CHECK(perfect.out.find("ANLS                 1.0000") != std::string::npos);
    CHECK(perfect.out.find("correct_grounded         40") != std::string::npos);

    const std::string misprint = scratch("misprint_preds.jsonl");
    const std::string date_id = qa.instances[2].qa_id;
    REQUIRE(qa.instances[2].answers[0] == "01/30/20");
    write_text_file(misprint, json{{"qa_id", date_id}, {"prediction", "01/30/28"}}.dump() + "\n");
    const std::string report = scratch("eval.json");
    Run one = k2q_run({"eval", "--qa", fx("eval_qa.jsonl"), "--predictions", misprint, "--ocr-from",
                       fx("eval_kie.jsonl"), "--out", report});
    CHECK(one.code == kExitOk);
    CHECK(one.err.find("39") != std::string::npos);
    const json r = json::parse(read_text_file(report));
    CHECK(r["groundedness"]["misprint"] == 1);
    CHECK(r["missing_predictions"] == 39);
    CHECK(r["examples"]["misprint"][0]["qa_id"] == date_id);

    write_text_file(scratch("empty_preds.jsonl"), "");
    Run empty = k2q_run({"eval", "--qa", fx("eval_qa.jsonl"), "--predictions", scratch("empty_preds.jsonl"),
                         "--ocr-from", fx("eval_kie.jsonl")});
    CHECK(empty.code == kExitInvalid);
    CHECK(empty.err.find("no predictions") != std::string::npos);

    write_text_file(scratch("stray_preds.jsonl"), "{\"qa_id\": \"ghost\", \"prediction\": \"x\"}\n");
    CHECK(k2q_run({"eval", "--qa", fx("eval_qa.jsonl"), "--predictions", scratch("stray_preds.jsonl"),
                   "--ocr-from", fx("eval_kie.jsonl")})
              .code == kExitInvalid);
  }

  TEST_CASE("delta, self-bleu and kappa") {
    Run delta = k2q_run({"delta", "68.1", "15.6"});
    CHECK(delta.code == kExitOk);
    CHECK(delta.out == "0.7709\n");
    CHECK(k2q_run({"delta", "0", "15.6"}).code == kExitUsage);
    CHECK(k2q_run({"delta", "abc", "1"}).code == kExitUsage);

    write_text_file(scratch("dup.txt"), "what is the total\nwhat is the total\nwhat is the total\n");
    Run sb = k2q_run({"self-bleu", scratch("dup.txt"), "-n", "2"});
    CHECK(sb.code == kExitOk);
    CHECK(sb.out == "1.0000\n");
    Run sbqa = k2q_run({"self-bleu", fx("receipts_qa.jsonl"), "--qa", "-n", "4"});
    CHECK(sbqa.code == kExitOk);
    CHECK(std::stod(sbqa.out) < 0.95);

    write_text_file(scratch("agree.txt"), "3 0 0\n0 3 0\n0 0 3\n");
    Run agree = k2q_run({"kappa", scratch("agree.txt")});
    CHECK(agree.code == kExitOk);
    CHECK(agree.out == "1.0000\n");
    Run labels = k2q_run({"kappa", fx("validation_labels.jsonl"), "--labels", "--json"});
    CHECK(labels.code == kExitOk);
    CHECK(json::parse(labels.out)["num_questions"] == 200);
    Run matrix = k2q_run({"kappa", fx("kappa_matrix.txt")});
    CHECK(matrix.out == "0.3554\n");
    write_text_file(scratch("bad.txt"), "3 x\n");
    CHECK(k2q_run({"kappa", scratch("bad.txt")}).code == kExitInvalid);
  }

  TEST_CASE("print-only commands write a manifest on request") {
    const std::string m = scratch("delta.manifest.json");
    CHECK(k2q_run({"delta", "68.1", "15.6", "--manifest", m}).code == kExitOk);
    CHECK(json::parse(read_text_file(m))["command"] == "delta");
  }

  TEST_CASE("color is off when requested") {
    setenv("K2Q_NO_COLOR", "1", 1);
    std::ostringstream out, err;
    CHECK(run_cli({"k2q", "ingest", fx("missing.jsonl")}, out, err, true) == kExitUsage);
    CHECK(err.str().find("\x1b[") == std::string::npos);
    unsetenv("K2Q_NO_COLOR");
    std::ostringstream out2, err2;
    run_cli({"k2q", "ingest", fx("missing.jsonl")}, out2, err2, true);
    CHECK(err2.str().find("\x1b[") != std::string::npos);
  }
}
