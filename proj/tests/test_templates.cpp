#include <functional>

#include "doctest.h"
#include "k2q/templates.hpp"
#include "support.hpp"

using namespace k2q;

namespace {

Template docile_template() {
  Template t;
  t.template_id = "li-total";
  t.question_type = QuestionType::extractive;
  t.target_type = "line_item_total";
  t.scope = Scope::line_item;
  t.pattern = "How much is the {key} of the {pos} item?";
  t.slots = {{"key", SlotKind::key_phrase, "line_item_total"}, {"pos", SlotKind::ordinal_position, ""}};
  return t;
}

Template regform_template() {
  Template t;
  t.template_id = "bool-title";
  t.question_type = QuestionType::boolean;
  t.target_type = "title";
  t.scope = Scope::document;
  t.pattern = "Is {cand} the {key} of {name}?";
  t.slots = {{"cand", SlotKind::candidate_value, ""},
             {"key", SlotKind::key_phrase, "title"},
             {"name", SlotKind::entity_value, "signer_name"}};
  return t;
}

std::vector<EntityTypeDef> ontology(std::initializer_list<const char*> names) {
  std::vector<EntityTypeDef> out;
  for (const char* n : names) out.push_back({n, std::nullopt, {n}, FormatClass::string});
  return out;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::io;
}

bool mentions(const std::vector<Issue>& issues, const std::string& needle) {
  for (const auto& i : issues) {
    if (i.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST_SUITE("templates") {
  TEST_CASE("patterns split into literals and roles") {
    const auto p = split_pattern("How much is the {key} of the {pos} item?");
    CHECK(p.pieces == std::vector<std::string>{"How much is the ", "key", " of the ", "pos", " item?"});
    CHECK(p.placeholder_count() == 2);
    CHECK(split_pattern("{a}").pieces == std::vector<std::string>{"", "a", ""});
    CHECK(kind_of([] { split_pattern("What is the {key"); }) == ErrorKind::parse);
    CHECK(kind_of([] { split_pattern("What is the key}"); }) == ErrorKind::parse);
    CHECK(kind_of([] { split_pattern("{a{b}}"); }) == ErrorKind::parse);
    CHECK(kind_of([] { split_pattern("x {} y"); }) == ErrorKind::parse);
  }

  TEST_CASE("valid templates") {
    CHECK_NOTHROW(check_template(docile_template()));
    CHECK_NOTHROW(check_template(regform_template()));
    const Template t = parse_template(serialize_template(docile_template()));
    CHECK(t == docile_template());
    CHECK(parse_template(serialize_template(regform_template())) == regform_template());
    CHECK(t.find_slot("pos")->kind == SlotKind::ordinal_position);
    CHECK(t.find_slot("missing") == nullptr);
  }

  TEST_CASE("template invariants") {
    SUBCASE("undeclared placeholder") {
      Template t = docile_template();
      t.pattern = "What is the {key} of the {pos} {extra} item?";
      CHECK(kind_of([&] { check_template(t); }) == ErrorKind::schema);
    }
    SUBCASE("unused slot") {
      Template t = docile_template();
      t.pattern = "What is the {key}?";
      CHECK(kind_of([&] { check_template(t); }) == ErrorKind::schema);
    }
    SUBCASE("boolean without candidate") {
      Template t = regform_template();
      t.slots.erase(t.slots.begin());
      t.pattern = "Is the {key} of {name} known?";
      CHECK(kind_of([&] { check_template(t); }) == ErrorKind::schema);
    }
    SUBCASE("extractive with candidate") {
      Template t = regform_template();
      t.question_type = QuestionType::extractive;
      CHECK(kind_of([&] { check_template(t); }) == ErrorKind::schema);
    }
    SUBCASE("ordinal in document scope") {
      Template t = docile_template();
      t.scope = Scope::document;
      CHECK(kind_of([&] { check_template(t); }) == ErrorKind::schema);
    }
    SUBCASE("duplicate role") {
      Template t = docile_template();
      t.slots.push_back(t.slots[0]);
      CHECK(kind_of([&] { check_template(t); }) == ErrorKind::schema);
    }
    SUBCASE("entity value slot asking for its own answer") {
      Template t = regform_template();
      t.question_type = QuestionType::extractive;
      t.slots.erase(t.slots.begin());
      t.slots[1].type_name = "title";
      t.pattern = "What is the {key} of {name}?";
      CHECK(kind_of([&] { check_template(t); }) == ErrorKind::schema);
    }
    SUBCASE("key phrase without type") {
      Template t = docile_template();
      t.slots[0].type_name.clear();
      CHECK(kind_of([&] { check_template(t); }) == ErrorKind::schema);
    }
  }

  TEST_CASE("render") {
    CHECK(render(docile_template(), {{"key", std::string("total amount with tax")}, {"pos", std::int64_t{19}}}) ==
          "How much is the total amount with tax of the 19th item?");
    CHECK(render(regform_template(), {{"cand", std::string("manager")},
                                      {"key", std::string("title")},
                                      {"name", std::string("James A. Coppola")}}) ==
          "Is manager the title of James A. Coppola?");
    CHECK(kind_of([] { render(docile_template(), {{"key", std::string("x")}}); }) == ErrorKind::invalid_argument);
    CHECK(kind_of([] { render(docile_template(), {{"key", std::string("x")}, {"pos", std::string("2")}}); }) ==
          ErrorKind::invalid_argument);
    CHECK(kind_of([] { render(docile_template(), {{"key", std::string("x")}, {"pos", std::int64_t{0}}}); }) ==
          ErrorKind::invalid_argument);
  }

  TEST_CASE("ordinals") {
    CHECK(ordinal(1) == "1st");
    CHECK(ordinal(2) == "2nd");
    CHECK(ordinal(3) == "3rd");
    CHECK(ordinal(4) == "4th");
    CHECK(ordinal(11) == "11th");
    CHECK(ordinal(12) == "12th");
    CHECK(ordinal(13) == "13th");
    CHECK(ordinal(21) == "21st");
    CHECK(ordinal(23) == "23rd");
    CHECK(ordinal(111) == "111th");
    CHECK(ordinal(102) == "102nd");
  }

  TEST_CASE("validate_suite") {
    const auto onto = ontology({"line_item_total", "title", "signer_name", "charity_name"});
    TemplateSuite suite{"s", {docile_template(), regform_template()}};
    CHECK(validate_suite(suite, onto).empty());

    TemplateSuite typo = suite;
    typo.templates[0].target_type = "chairty_name";
    typo.templates[0].slots[0].type_name = "chairty_name";
    const auto issues = validate_suite(typo, onto);
    CHECK(mentions(issues, "chairty_name"));
    CHECK(has_errors(issues));

    TemplateSuite dup = suite;
    dup.templates[1].template_id = dup.templates[0].template_id;
    CHECK(mentions(validate_suite(dup, onto), "duplicate template_id"));

    TemplateSuite doc_scoped = suite;
    doc_scoped.templates[0].scope = Scope::document;
    const auto scoped = validate_suite(doc_scoped, onto);
    CHECK(scoped.size() == 1);
    CHECK(mentions(scoped, "document-scoped"));

    CHECK(validate_suite(testing::demo_suite(), testing::clean_receipts().ontology).empty());
    CHECK(validate_suite(testing::simple_suite(), testing::clean_receipts().ontology).empty());
  }

  TEST_CASE("suite files round-trip") {
    const TemplateSuite& s = testing::demo_suite();
    CHECK(s.templates.size() == 30);
    const std::string text = serialize_template_suite(s);
    CHECK(parse_template_suite(text) == s);
    CHECK(kind_of([] { parse_template_suite(""); }) == ErrorKind::schema);
    CHECK(kind_of([] { parse_template_suite("{\"dataset_name\": \"x\"}\n{oops"); }) == ErrorKind::parse);
    CHECK(kind_of([] { load_template_suite(testing::fixture("absent.jsonl")); }) == ErrorKind::io);
  }
}
