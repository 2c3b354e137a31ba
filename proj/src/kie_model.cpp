#include "k2q/kie_model.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "k2q/io.hpp"
#include "k2q/metrics.hpp"
#include "k2q/text.hpp"

namespace k2q {

using nlohmann::json;

const char* to_string(FormatClass format) {
  switch (format) {
    case FormatClass::string: return "string";
    case FormatClass::integer: return "integer";
    case FormatClass::decimal: return "decimal";
    case FormatClass::date: return "date";
    case FormatClass::other: return "other";
  }
  return "other";
}

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

FormatClass format_class_from_string(std::string_view name) {
  for (auto f : {FormatClass::string, FormatClass::integer, FormatClass::decimal,
                 FormatClass::date, FormatClass::other}) {
    if (name == to_string(f)) return f;
  }
  throw Error(ErrorKind::schema, "unknown format_class '" + std::string(name) + "'");
}

Split split_from_string(std::string_view name) {
  for (auto s : {Split::train, Split::dev, Split::test}) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorKind::schema, "unknown split '" + std::string(name) + "'");
}

const Entity* Document::find_entity(std::string_view entity_id) const {
  for (const auto& e : entities) {
    if (e.entity_id == entity_id) return &e;
  }
  return nullptr;
}

const LineItem* Document::find_line_item(std::string_view line_item_id) const {
  for (const auto& li : line_items) {
    if (li.line_item_id == line_item_id) return &li;
  }
  return nullptr;
}

const OcrToken* Document::find_token(std::string_view token_id) const {
  for (const auto& t : tokens) {
    if (t.token_id == token_id) return &t;
  }
  return nullptr;
}

std::string Document::ocr_text(const std::vector<int>& pages) const {
  std::vector<std::string> parts;
  for (const auto& t : tokens) {
    if (pages.empty() || std::find(pages.begin(), pages.end(), t.page_index) != pages.end()) {
      parts.push_back(t.text);
    }
  }
  return text::join(parts, " ");
}

const EntityTypeDef* KieDataset::find_type(std::string_view type_name) const {
  for (const auto& t : ontology) {
    if (t.name == type_name) return &t;
  }
  return nullptr;
}

const Document* KieDataset::find_document(std::string_view doc_id) const {
  for (const auto& d : documents) {
    if (d.doc_id == doc_id) return &d;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

// Reads typed fields out of a JSON object, reporting failures with the
// record's field path.
class FieldReader {
 public:
  FieldReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) fail(path_, "expected an object");
  }

  const json& required(const char* key) const {
    auto it = object_.find(key);
    if (it == object_.end()) fail(at(key), "missing required field");
    return *it;
  }

  const json* optional(const char* key) const {
    auto it = object_.find(key);
    if (it == object_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string string(const char* key) const { return as_string(required(key), at(key)); }

  int integer(const char* key) const {
    const json& v = required(key);
    if (!v.is_number_integer()) fail(at(key), "expected an integer");
    return v.get<int>();
  }

  const json& array(const char* key) const {
    const json& v = required(key);
    if (!v.is_array()) fail(at(key), "expected an array");
    return v;
  }

  std::string at(std::string_view key) const { return path_ + "." + std::string(key); }

  static std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) fail(where, "expected a string");
    return v.get<std::string>();
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw Error(ErrorKind::schema, where + ": " + what);
  }

 private:
  const json& object_;
  std::string path_;
};

std::string indexed(const std::string& base, const char* field, std::size_t i) {
  return base + "." + field + "[" + std::to_string(i) + "]";
}

EntityTypeDef parse_type(const json& j, const std::string& path) {
  FieldReader r(j, path);
  EntityTypeDef t;
  t.name = r.string("name");
  if (const json* parent = r.optional("parent")) {
    t.parent = FieldReader::as_string(*parent, r.at("parent"));
  }
  const json& phrases = r.array("display_phrases");
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    t.display_phrases.push_back(
        FieldReader::as_string(phrases[i], indexed(path, "display_phrases", i)));
  }
  try {
    t.format_class = format_class_from_string(r.string("format_class"));
  } catch (const Error& e) {
    FieldReader::fail(r.at("format_class"), e.what());
  }
  return t;
}

OcrToken parse_token(const json& j, const std::string& path) {
  FieldReader r(j, path);
  OcrToken t;
  t.token_id = r.string("token_id");
  t.page_index = r.integer("page_index");
  t.text = r.string("text");
  const json& box = r.array("bbox");
  if (box.size() != 4 || !std::all_of(box.begin(), box.end(), [](const json& v) {
        return v.is_number();
      })) {
    FieldReader::fail(r.at("bbox"), "expected four numbers");
  }
  t.bbox = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(),
            box[3].get<double>()};
  return t;
}

Entity parse_entity(const json& j, const std::string& path) {
  FieldReader r(j, path);
  Entity e;
  e.entity_id = r.string("entity_id");
  e.type_name = r.string("type_name");
  e.raw_value = r.string("raw_value");
  if (const json* cleaned = r.optional("cleaned_value")) {
    e.cleaned_value = FieldReader::as_string(*cleaned, r.at("cleaned_value"));
  }
  if (const json* span = r.optional("token_span")) {
    if (!span->is_array()) FieldReader::fail(r.at("token_span"), "expected an array");
    for (std::size_t i = 0; i < span->size(); ++i) {
      e.token_span.push_back(FieldReader::as_string((*span)[i], indexed(path, "token_span", i)));
    }
  }
  if (const json* li = r.optional("line_item_id")) {
    e.line_item_id = FieldReader::as_string(*li, r.at("line_item_id"));
  }
  const json& pages = r.array("page_indices");
  std::set<int> unique;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    if (!pages[i].is_number_integer()) {
      FieldReader::fail(indexed(path, "page_indices", i), "expected an integer");
    }
    unique.insert(pages[i].get<int>());
  }
  e.page_indices.assign(unique.begin(), unique.end());
  return e;
}

LineItem parse_line_item(const json& j, const std::string& path) {
  FieldReader r(j, path);
  LineItem li;
  li.line_item_id = r.string("line_item_id");
  li.position = r.integer("position");
  const json& ids = r.array("entity_ids");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    li.entity_ids.push_back(FieldReader::as_string(ids[i], indexed(path, "entity_ids", i)));
  }
  return li;
}

[[noreturn]] void dangling(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::dangling_reference, where + ": " + what);
}

Document parse_document(const json& j, const std::string& fallback_path,
                        const std::unordered_set<std::string>& type_names) {
  std::string path = fallback_path;
  if (j.is_object() && j.contains("doc_id") && j["doc_id"].is_string()) {
    path = j["doc_id"].get<std::string>();
  }
  FieldReader r(j, path);
  Document d;
  d.doc_id = r.string("doc_id");
  d.page_count = r.integer("page_count");
  try {
    d.split = split_from_string(r.string("split"));
  } catch (const Error& e) {
    FieldReader::fail(r.at("split"), e.what());
  }
  const json& tokens = r.array("tokens");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    d.tokens.push_back(parse_token(tokens[i], indexed(path, "tokens", i)));
  }
  const json& entities = r.array("entities");
  for (std::size_t i = 0; i < entities.size(); ++i) {
    d.entities.push_back(parse_entity(entities[i], indexed(path, "entities", i)));
  }
  const json& items = r.array("line_items");
  for (std::size_t i = 0; i < items.size(); ++i) {
    d.line_items.push_back(parse_line_item(items[i], indexed(path, "line_items", i)));
  }

  std::unordered_set<std::string> token_ids, entity_ids, item_ids;
  for (const auto& t : d.tokens) token_ids.insert(t.token_id);
  for (const auto& e : d.entities) entity_ids.insert(e.entity_id);
  for (const auto& li : d.line_items) item_ids.insert(li.line_item_id);
  for (std::size_t i = 0; i < d.entities.size(); ++i) {
    const Entity& e = d.entities[i];
    const std::string where = indexed(path, "entities", i);
    if (!type_names.count(e.type_name)) {
      dangling(where + ".type_name",
               "entity '" + e.entity_id + "' has unknown type '" + e.type_name + "'");
    }
    for (std::size_t k = 0; k < e.token_span.size(); ++k) {
      if (!token_ids.count(e.token_span[k])) {
        dangling(indexed(where, "token_span", k),
                 "entity '" + e.entity_id + "' spans unknown token '" + e.token_span[k] + "'");
      }
    }
    if (e.line_item_id && !item_ids.count(*e.line_item_id)) {
      dangling(where + ".line_item_id",
               "entity '" + e.entity_id + "' names unknown line item '" + *e.line_item_id + "'");
    }
  }
  for (std::size_t i = 0; i < d.line_items.size(); ++i) {
    const LineItem& li = d.line_items[i];
    for (std::size_t k = 0; k < li.entity_ids.size(); ++k) {
      if (!entity_ids.count(li.entity_ids[k])) {
        dangling(indexed(indexed(path, "line_items", i), "entity_ids", k),
                 "unknown entity '" + li.entity_ids[k] + "'");
      }
    }
  }
  return d;
}

json to_json(const EntityTypeDef& t) {
  return {{"name", t.name},
          {"parent", t.parent ? json(*t.parent) : json(nullptr)},
          {"display_phrases", t.display_phrases},
          {"format_class", to_string(t.format_class)}};
}

json to_json(const Document& d) {
  json tokens = json::array();
  for (const auto& t : d.tokens) {
    tokens.push_back({{"token_id", t.token_id},
                      {"page_index", t.page_index},
                      {"text", t.text},
                      {"bbox", {t.bbox.left, t.bbox.top, t.bbox.right, t.bbox.bottom}}});
  }
  json entities = json::array();
  for (const auto& e : d.entities) {
    json je = {{"entity_id", e.entity_id},
               {"type_name", e.type_name},
               {"raw_value", e.raw_value},
               {"token_span", e.token_span},
               {"line_item_id", e.line_item_id ? json(*e.line_item_id) : json(nullptr)},
               {"page_indices", e.page_indices}};
    if (e.cleaned_value) je["cleaned_value"] = *e.cleaned_value;
    entities.push_back(std::move(je));
  }
  json items = json::array();
  for (const auto& li : d.line_items) {
    items.push_back({{"line_item_id", li.line_item_id},
                     {"position", li.position},
                     {"entity_ids", li.entity_ids}});
  }
  return {{"doc_id", d.doc_id},       {"page_count", d.page_count}, {"split", to_string(d.split)},
          {"tokens", std::move(tokens)}, {"entities", std::move(entities)},
          {"line_items", std::move(items)}};
}

}  // namespace

KieDataset parse_kie_dataset(std::string_view content) {
  KieDataset ds;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::unordered_set<std::string> type_names;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      FieldReader r(j, "header");
      ds.name = r.string("name");
      const json& onto = r.array("ontology");
      for (std::size_t i = 0; i < onto.size(); ++i) {
        ds.ontology.push_back(parse_type(onto[i], indexed("header", "ontology", i)));
        type_names.insert(ds.ontology.back().name);
      }
      have_header = true;
      continue;
    }
    ds.documents.push_back(
        parse_document(j, "line " + std::to_string(line_no), type_names));
  }
  if (!have_header) throw Error(ErrorKind::schema, "KIE file has no header record");
  return ds;
}

KieDataset load_kie_dataset(const std::filesystem::path& path) {
  KieDataset ds = parse_kie_dataset(read_text_file(path));
  const auto issues = validate_dataset(ds);
  if (has_errors(issues)) {
    std::string msg = path.string() + ": dataset failed validation";
    for (const auto& issue : issues) {
      if (issue.severity == Severity::error) msg += "\n  " + issue.location + ": " + issue.message;
    }
    throw Error(ErrorKind::schema, msg);
  }
  return ds;
}

std::string serialize_kie_dataset(const KieDataset& dataset) {
  json onto = json::array();
  for (const auto& t : dataset.ontology) onto.push_back(to_json(t));
  std::string out = json{{"name", dataset.name}, {"ontology", std::move(onto)}}.dump();
  out.push_back('\n');
  for (const auto& d : dataset.documents) {
    out += to_json(d).dump();
    out.push_back('\n');
  }
  return out;
}

void save_kie_dataset(const KieDataset& dataset, const std::filesystem::path& path) {
  write_text_file(path, serialize_kie_dataset(dataset));
}

// ---------------------------------------------------------------------------
// Validation

namespace {

class IssueSink {
 public:
  explicit IssueSink(std::vector<Issue>& out) : out_(out) {}
  void error(std::string location, std::string message) {
    out_.push_back({Severity::error, std::move(location), std::move(message)});
  }
  void warning(std::string location, std::string message) {
    out_.push_back({Severity::warning, std::move(location), std::move(message)});
  }

 private:
  std::vector<Issue>& out_;
};

void validate_ontology(const KieDataset& ds, IssueSink& sink) {
  std::map<std::string, const EntityTypeDef*> by_name;
  for (std::size_t i = 0; i < ds.ontology.size(); ++i) {
    const auto& t = ds.ontology[i];
    const std::string where = "ontology[" + std::to_string(i) + "]";
    if (t.name.empty()) sink.error(where + ".name", "empty type name");
    if (!by_name.emplace(t.name, &t).second) {
      sink.error(where + ".name", "duplicate entity type '" + t.name + "'");
    }
    if (t.display_phrases.empty()) {
      sink.error(where + ".display_phrases", "type '" + t.name + "' has no display phrase");
    }
  }
  for (const auto& t : ds.ontology) {
    if (t.parent && !by_name.count(*t.parent)) {
      sink.error("ontology." + t.name + ".parent", "unknown parent type '" + *t.parent + "'");
    }
  }
  for (const auto& t : ds.ontology) {
    std::set<std::string> seen{t.name};
    const EntityTypeDef* cur = &t;
    while (cur->parent) {
      auto it = by_name.find(*cur->parent);
      if (it == by_name.end()) break;
      if (!seen.insert(it->first).second) {
        sink.error("ontology." + t.name + ".parent", "type hierarchy has a cycle through '" +
                                                          t.name + "'");
        break;
      }
      cur = it->second;
    }
  }
}

void validate_document(const Document& d, const KieDataset& ds, IssueSink& sink) {
  const std::string& id = d.doc_id;
  if (d.page_count < 1) sink.error(id + ".page_count", "page_count must be positive");

  std::unordered_map<std::string, const OcrToken*> tokens;
  for (std::size_t i = 0; i < d.tokens.size(); ++i) {
    const auto& t = d.tokens[i];
    const std::string where = indexed(id, "tokens", i);
    if (!tokens.emplace(t.token_id, &t).second) {
      sink.error(where + ".token_id", "duplicate token id '" + t.token_id + "'");
    }
    if (t.page_index < 0 || t.page_index >= d.page_count) {
      sink.error(where + ".page_index", "page index " + std::to_string(t.page_index) +
                                            " outside document of " +
                                            std::to_string(d.page_count) + " page(s)");
    }
    if (t.text.empty()) sink.error(where + ".text", "empty token text");
    const auto& b = t.bbox;
    const bool in_unit = b.left >= 0 && b.top >= 0 && b.right <= 1 && b.bottom <= 1;
    if (!in_unit || !(b.left < b.right) || !(b.top < b.bottom)) {
      sink.error(where + ".bbox", "bounding box must satisfy 0 <= left < right <= 1 and "
                                  "0 <= top < bottom <= 1");
    }
  }

  std::unordered_map<std::string, const Entity*> entities;
  std::unordered_map<std::string, const LineItem*> items;
  for (const auto& li : d.line_items) items.emplace(li.line_item_id, &li);

  for (std::size_t i = 0; i < d.entities.size(); ++i) {
    const auto& e = d.entities[i];
    const std::string where = indexed(id, "entities", i);
    if (!entities.emplace(e.entity_id, &e).second) {
      sink.error(where + ".entity_id", "duplicate entity id '" + e.entity_id + "'");
    }
    if (!ds.find_type(e.type_name)) {
      sink.error(where + ".type_name", "unknown entity type '" + e.type_name + "'");
    }
    if (e.raw_value.empty()) sink.warning(where + ".raw_value", "empty raw value");
    if (e.page_indices.empty()) sink.error(where + ".page_indices", "no page index");
    for (int p : e.page_indices) {
      if (p < 0 || p >= d.page_count) {
        sink.error(where + ".page_indices", "page index " + std::to_string(p) +
                                                " outside document of " +
                                                std::to_string(d.page_count) + " page(s)");
      }
    }
    if (e.token_span.empty()) {
      sink.warning(where + ".token_span", "entity '" + e.entity_id + "' is not linked to OCR tokens");
    } else {
      std::set<int> span_pages;
      bool resolved = true;
      for (const auto& tid : e.token_span) {
        auto it = tokens.find(tid);
        if (it == tokens.end()) {
          sink.error(where + ".token_span", "unknown token '" + tid + "'");
          resolved = false;
        } else {
          span_pages.insert(it->second->page_index);
        }
      }
      if (resolved && std::vector<int>(span_pages.begin(), span_pages.end()) != e.page_indices) {
        sink.error(where + ".page_indices", "page_indices differ from the pages of token_span");
      }
    }
    if (e.line_item_id) {
      auto it = items.find(*e.line_item_id);
      if (it == items.end()) {
        sink.error(where + ".line_item_id", "unknown line item '" + *e.line_item_id + "'");
      } else if (std::find(it->second->entity_ids.begin(), it->second->entity_ids.end(),
                           e.entity_id) == it->second->entity_ids.end()) {
        sink.error(where + ".line_item_id",
                   "line item '" + *e.line_item_id + "' does not list entity '" + e.entity_id + "'");
      }
    }
  }

  std::set<std::string> item_ids;
  std::vector<int> positions;
  for (std::size_t i = 0; i < d.line_items.size(); ++i) {
    const auto& li = d.line_items[i];
    const std::string where = indexed(id, "line_items", i);
    if (!item_ids.insert(li.line_item_id).second) {
      sink.error(where + ".line_item_id", "duplicate line item id '" + li.line_item_id + "'");
    }
    positions.push_back(li.position);
    if (li.entity_ids.empty()) sink.error(where + ".entity_ids", "line item has no entities");
    for (const auto& eid : li.entity_ids) {
      auto it = entities.find(eid);
      if (it == entities.end()) {
        sink.error(where + ".entity_ids", "unknown entity '" + eid + "'");
      } else if (it->second->line_item_id != li.line_item_id) {
        sink.error(where + ".entity_ids",
                   "entity '" + eid + "' does not reference line item '" + li.line_item_id + "'");
      }
    }
  }
  std::sort(positions.begin(), positions.end());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] != static_cast<int>(i) + 1) {
      sink.error(id + ".line_items", "non-consecutive line item positions");
      break;
    }
  }
}

}  // namespace

std::vector<Issue> validate_dataset(const KieDataset& dataset) {
  std::vector<Issue> issues;
  IssueSink sink(issues);
  validate_ontology(dataset, sink);
  std::set<std::string> doc_ids;
  for (const auto& d : dataset.documents) {
    if (d.doc_id.empty()) sink.error("documents", "empty doc_id");
    if (!doc_ids.insert(d.doc_id).second) {
      sink.error(d.doc_id, "duplicate document id '" + d.doc_id + "'");
    }
    validate_document(d, dataset, sink);
  }
  return issues;
}

// ---------------------------------------------------------------------------
// Format classes

FormatClass infer_format_class(std::string_view value) {
  static const std::string kMonth =
      "(jan(uary)?|feb(ruary)?|mar(ch)?|apr(il)?|may|june?|july?|aug(ust)?|sep(t(ember)?)?|"
      "oct(ober)?|nov(ember)?|dec(ember)?)";
  static const std::vector<std::regex> kDates = {
      std::regex(R"(^\d{1,2}[/.\-]\d{1,2}[/.\-](\d{2}|\d{4})$)"),
      std::regex(R"(^\d{4}[/.\-]\d{1,2}[/.\-]\d{1,2}$)"),
      std::regex(R"(^\d{1,2}(st|nd|rd|th)?[ \-]?)" + kMonth + R"(\.?,?[ \-]?(\d{2}|\d{4})$)",
                 std::regex::icase),
      std::regex("^" + kMonth + R"(\.? \d{1,2}(st|nd|rd|th)?,? \d{4}$)", std::regex::icase),
      std::regex("^" + kMonth + R"(\.?,? \d{4}$)", std::regex::icase),
  };
  static const std::regex kInteger(R"(^[+\-]?(\d+|\d{1,3}(,\d{3})+|\d{1,3}(\.\d{3})+)$)");
  static const std::regex kDecimal(
      R"(^[+\-]?((\d+|\d{1,3}(,\d{3})+)?\.\d+|(\d+|\d{1,3}(\.\d{3})+),\d+)$)");

  const std::string v(text::trim(value));
  if (v.empty()) return FormatClass::string;
  for (const auto& re : kDates) {
    if (std::regex_match(v, re)) return FormatClass::date;
  }
  if (std::regex_match(v, kInteger)) return FormatClass::integer;
  if (std::regex_match(v, kDecimal)) return FormatClass::decimal;
  return FormatClass::string;
}

// ---------------------------------------------------------------------------
// OCR linking

std::vector<std::string> link_entity_to_ocr(const Entity& entity, const Document& doc) {
  const std::u32string target = text::decode_utf8(text::to_lower(entity.raw_value));
  if (target.empty() || doc.tokens.empty()) return {};
  std::vector<std::u32string> words;
  words.reserve(doc.tokens.size());
  for (const auto& t : doc.tokens) words.push_back(text::decode_utf8(text::to_lower(t.text)));

  // Distances are compared as exact fractions dist / len.
  bool found = false;
  std::size_t best_dist = 0, best_len = 1, best_start = 0, best_count = 0;
  const auto better = [&](std::size_t d, std::size_t len) {
    return !found || d * best_len < best_dist * len;
  };
  for (std::size_t start = 0; start < words.size(); ++start) {
    std::u32string window;
    for (std::size_t end = start; end < words.size(); ++end) {
      if (end > start) window.push_back(U' ');
      window += words[end];
      const std::size_t len = std::max(window.size(), target.size());
      const std::size_t dist = levenshtein(window, target);
      if (better(dist, len)) {
        found = true;
        best_dist = dist;
        best_len = len;
        best_start = start;
        best_count = end - start + 1;
      }
      // Longer windows only move the length-difference bound further away.
      if (found && window.size() > target.size()) {
        const std::size_t gap = window.size() - target.size();
        if (gap * best_len >= best_dist * window.size()) break;
      }
    }
  }
  if (!found || 10 * best_dist > 3 * best_len) return {};
  std::vector<std::string> span;
  for (std::size_t i = best_start; i < best_start + best_count; ++i) {
    span.push_back(doc.tokens[i].token_id);
  }
  return span;
}

std::size_t link_missing_spans(KieDataset& dataset) {
  std::size_t linked = 0;
  for (auto& doc : dataset.documents) {
    for (auto& e : doc.entities) {
      if (!e.token_span.empty()) continue;
      auto span = link_entity_to_ocr(e, doc);
      if (span.empty()) continue;
      std::set<int> pages;
      for (const auto& tid : span) pages.insert(doc.find_token(tid)->page_index);
      e.token_span = std::move(span);
      e.page_indices.assign(pages.begin(), pages.end());
      ++linked;
    }
  }
  return linked;
}

}  // namespace k2q
