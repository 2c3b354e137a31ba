#include "k2q/templates.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "k2q/io.hpp"
#include "k2q/text.hpp"

namespace k2q {

using nlohmann::json;

const char* to_string(SlotKind kind) {
  switch (kind) {
    case SlotKind::key_phrase: return "key_phrase";
    case SlotKind::entity_value: return "entity_value";
    case SlotKind::ordinal_position: return "ordinal_position";
    case SlotKind::candidate_value: return "candidate_value";
  }
  return "key_phrase";
}

const char* to_string(Scope scope) {
  return scope == Scope::line_item ? "line_item" : "document";
}

SlotKind slot_kind_from_string(std::string_view name) {
  for (auto k : {SlotKind::key_phrase, SlotKind::entity_value, SlotKind::ordinal_position,
                 SlotKind::candidate_value}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorKind::schema, "unknown slot kind '" + std::string(name) + "'");
}

Scope scope_from_string(std::string_view name) {
  if (name == "document") return Scope::document;
  if (name == "line_item") return Scope::line_item;
  throw Error(ErrorKind::schema, "unknown scope '" + std::string(name) + "'");
}

const Slot* Template::find_slot(std::string_view role) const {
  for (const auto& s : slots) {
    if (s.role == role) return &s;
  }
  return nullptr;
}

PatternPieces split_pattern(std::string_view pattern) {
  PatternPieces out;
  std::string literal;
  std::size_t i = 0;
  while (i < pattern.size()) {
    const char c = pattern[i];
    if (c == '}') {
      throw Error(ErrorKind::parse, "unbalanced '}' at offset " + std::to_string(i) + " in \"" +
                                        std::string(pattern) + "\"");
    }
    if (c != '{') {
      literal.push_back(c);
      ++i;
      continue;
    }
    const std::size_t close = pattern.find_first_of("{}", i + 1);
    if (close == std::string_view::npos || pattern[close] == '{') {
      throw Error(ErrorKind::parse, "unbalanced '{' at offset " + std::to_string(i) + " in \"" +
                                        std::string(pattern) + "\"");
    }
    std::string role(pattern.substr(i + 1, close - i - 1));
    if (role.empty()) {
      throw Error(ErrorKind::parse, "empty placeholder at offset " + std::to_string(i));
    }
    out.pieces.push_back(std::move(literal));
    literal.clear();
    out.pieces.push_back(std::move(role));
    i = close + 1;
  }
  out.pieces.push_back(std::move(literal));
  return out;
}

void check_template(const Template& t) {
  const std::string where = "template '" + t.template_id + "'";
  auto fail = [&](const std::string& what) { throw Error(ErrorKind::schema, where + ": " + what); };

  if (t.template_id.empty()) throw Error(ErrorKind::schema, "template with empty template_id");
  if (t.target_type.empty()) fail("empty target_type");

  std::set<std::string> declared;
  std::size_t candidates = 0;
  for (const auto& s : t.slots) {
    if (s.role.empty()) fail("slot with empty role");
    if (!declared.insert(s.role).second) fail("slot role '" + s.role + "' declared twice");
    const bool typed = s.kind == SlotKind::key_phrase || s.kind == SlotKind::entity_value;
    if (typed && s.type_name.empty()) fail("slot '" + s.role + "' needs a type_name");
    if (!typed && !s.type_name.empty()) {
      fail("slot '" + s.role + "' of kind " + to_string(s.kind) + " takes no type_name");
    }
    if (s.kind == SlotKind::candidate_value) ++candidates;
    if (s.kind == SlotKind::ordinal_position && t.scope != Scope::line_item) {
      fail("ordinal slot '" + s.role + "' in a document-scoped template");
    }
    if (s.kind == SlotKind::entity_value && t.question_type == QuestionType::extractive &&
        s.type_name == t.target_type) {
      fail("slot '" + s.role + "' would reveal the answer type '" + t.target_type + "'");
    }
  }
  if (t.question_type == QuestionType::boolean && candidates != 1) {
    fail("boolean templates need exactly one candidate_value slot");
  }
  if (t.question_type == QuestionType::extractive && candidates != 0) {
    fail("candidate_value slots belong to boolean templates only");
  }

  const PatternPieces pieces = split_pattern(t.pattern);
  std::set<std::string> used;
  for (std::size_t i = 1; i < pieces.pieces.size(); i += 2) {
    if (!declared.count(pieces.pieces[i])) fail("placeholder {" + pieces.pieces[i] + "} has no slot");
    used.insert(pieces.pieces[i]);
  }
  for (const auto& role : declared) {
    if (!used.count(role)) fail("slot '" + role + "' is never used in the pattern");
  }
}

namespace {

Template template_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::schema, where + ": expected an object");
  auto str = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw Error(ErrorKind::schema, where + "." + key + ": expected a string");
    }
    return it->get<std::string>();
  };
  Template t;
  try {
    t.template_id = str("template_id");
    t.question_type = question_type_from_string(str("question_type"));
    t.target_type = str("target_type");
    t.scope = scope_from_string(str("scope"));
    t.pattern = str("pattern");
    auto slots = j.find("slots");
    if (slots == j.end() || !slots->is_array()) {
      throw Error(ErrorKind::schema, where + ".slots: expected an array");
    }
    for (std::size_t i = 0; i < slots->size(); ++i) {
      const json& s = (*slots)[i];
      const std::string at = where + ".slots[" + std::to_string(i) + "]";
      if (!s.is_object() || !s.contains("role") || !s["role"].is_string() || !s.contains("kind") ||
          !s["kind"].is_string()) {
        throw Error(ErrorKind::schema, at + ": needs string 'role' and 'kind'");
      }
      Slot slot;
      slot.role = s["role"].get<std::string>();
      slot.kind = slot_kind_from_string(s["kind"].get<std::string>());
      if (auto tn = s.find("type_name"); tn != s.end() && !tn->is_null()) {
        if (!tn->is_string()) throw Error(ErrorKind::schema, at + ".type_name: expected a string");
        slot.type_name = tn->get<std::string>();
      }
      t.slots.push_back(std::move(slot));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, where + ": " + e.what());
  }
  return t;
}

json template_to_json(const Template& t) {
  json slots = json::array();
  for (const auto& s : t.slots) {
    json js = {{"role", s.role}, {"kind", to_string(s.kind)}};
    if (!s.type_name.empty()) js["type_name"] = s.type_name;
    slots.push_back(std::move(js));
  }
  return json{{"template_id", t.template_id},
              {"question_type", to_string(t.question_type)},
              {"target_type", t.target_type},
              {"scope", to_string(t.scope)},
              {"pattern", t.pattern},
              {"slots", std::move(slots)}};
}

json parse_json_line(std::string_view line, const std::string& where) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, where + ": " + e.what());
  }
}

}  // namespace

Template parse_template(std::string_view record) {
  Template t = template_from_json(parse_json_line(record, "template"), "template");
  check_template(t);
  return t;
}

std::string serialize_template(const Template& tmpl) { return template_to_json(tmpl).dump(); }

std::string ordinal(std::int64_t n) {
  const std::int64_t mod100 = n % 100;
  const char* suffix = "th";
  if (mod100 < 11 || mod100 > 13) {
    switch (n % 10) {
      case 1: suffix = "st"; break;
      case 2: suffix = "nd"; break;
      case 3: suffix = "rd"; break;
      default: break;
    }
  }
  return std::to_string(n) + suffix;
}

std::string render(const Template& tmpl, const Bindings& bindings) {
  const PatternPieces pieces = split_pattern(tmpl.pattern);
  std::string out;
  for (std::size_t i = 0; i < pieces.pieces.size(); ++i) {
    if (i % 2 == 0) {
      out += pieces.pieces[i];
      continue;
    }
    const std::string& role = pieces.pieces[i];
    const Slot* slot = tmpl.find_slot(role);
    if (!slot) {
      throw Error(ErrorKind::schema,
                  "template '" + tmpl.template_id + "': leftover placeholder {" + role + "}");
    }
    auto it = bindings.find(role);
    if (it == bindings.end()) {
      throw Error(ErrorKind::invalid_argument,
                  "template '" + tmpl.template_id + "': no binding for {" + role + "}");
    }
    if (slot->kind == SlotKind::ordinal_position) {
      const auto* n = std::get_if<std::int64_t>(&it->second);
      if (!n || *n < 1) {
        throw Error(ErrorKind::invalid_argument, "template '" + tmpl.template_id + "': {" + role +
                                                     "} needs a positive integer");
      }
      out += ordinal(*n);
    } else if (const auto* s = std::get_if<std::string>(&it->second)) {
      out += *s;
    } else {
      throw Error(ErrorKind::invalid_argument,
                  "template '" + tmpl.template_id + "': {" + role + "} needs a string");
    }
  }
  return out;
}

TemplateSuite parse_template_suite(std::string_view content) {
  TemplateSuite suite;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    const json j = parse_json_line(line, where);
    if (!have_header) {
      if (!j.is_object() || !j.contains("dataset_name") || !j["dataset_name"].is_string()) {
        throw Error(ErrorKind::schema, where + ": suite header needs a string 'dataset_name'");
      }
      suite.dataset_name = j["dataset_name"].get<std::string>();
      have_header = true;
      continue;
    }
    Template t = template_from_json(j, where);
    try {
      check_template(t);
    } catch (const Error& e) {
      throw Error(e.kind(), where + ": " + e.what());
    }
    suite.templates.push_back(std::move(t));
  }
  if (!have_header) throw Error(ErrorKind::schema, "template suite has no header record");
  return suite;
}

TemplateSuite load_template_suite(const std::filesystem::path& path) {
  try {
    return parse_template_suite(read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string serialize_template_suite(const TemplateSuite& suite) {
  std::string out = json{{"dataset_name", suite.dataset_name}}.dump() + "\n";
  for (const auto& t : suite.templates) out += serialize_template(t) + "\n";
  return out;
}

std::vector<Issue> validate_suite(const TemplateSuite& suite,
                                  const std::vector<EntityTypeDef>& ontology) {
  std::vector<Issue> issues;
  std::unordered_set<std::string> types;
  for (const auto& t : ontology) types.insert(t.name);
  std::unordered_set<std::string> ids;

  for (std::size_t i = 0; i < suite.templates.size(); ++i) {
    const Template& t = suite.templates[i];
    const std::string loc = "templates[" + std::to_string(i) + "] (" + t.template_id + ")";
    auto report = [&](const std::string& msg) { issues.push_back({Severity::error, loc, msg}); };

    if (!ids.insert(t.template_id).second) report("duplicate template_id '" + t.template_id + "'");
    if (!types.count(t.target_type)) report("unknown target type '" + t.target_type + "'");
    for (const auto& s : t.slots) {
      if (!s.type_name.empty() && !types.count(s.type_name)) {
        report("slot '" + s.role + "' references unknown type '" + s.type_name + "'");
      }
      if (s.kind == SlotKind::ordinal_position && t.scope == Scope::document) {
        report("line-item slot '" + s.role + "' in a document-scoped template");
      }
    }
    try {
      check_template(t);
    } catch (const Error& e) {
      const std::string msg = e.what();
      // Already reported above in more specific terms.
      if (msg.find("document-scoped") == std::string::npos) report(msg);
    }
  }
  return issues;
}

}  // namespace k2q
