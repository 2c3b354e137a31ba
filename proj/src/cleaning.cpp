#include "k2q/cleaning.hpp"

#include <algorithm>

#include "json.hpp"
#include "k2q/io.hpp"
#include "k2q/text.hpp"

namespace k2q {

using nlohmann::json;

const char* to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::replace_newlines: return "replace_newlines";
    case RuleKind::strip_brackets: return "strip_brackets";
    case RuleKind::strip_prefix: return "strip_prefix";
    case RuleKind::title_case_allcaps: return "title_case_allcaps";
    case RuleKind::numeric_token_filter: return "numeric_token_filter";
    case RuleKind::strip_edge_punct: return "strip_edge_punct";
  }
  return "strip_edge_punct";
}

RuleKind rule_kind_from_string(std::string_view name) {
  for (auto k : {RuleKind::replace_newlines, RuleKind::strip_brackets, RuleKind::strip_prefix,
                 RuleKind::title_case_allcaps, RuleKind::numeric_token_filter,
                 RuleKind::strip_edge_punct}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorKind::schema, "unknown cleaning rule kind '" + std::string(name) + "'");
}

CleaningRule CleaningRule::replace_newlines(std::string replacement) {
  CleaningRule r;
  r.kind = RuleKind::replace_newlines;
  r.replacement = std::move(replacement);
  return r;
}

CleaningRule CleaningRule::strip_brackets() {
  CleaningRule r;
  r.kind = RuleKind::strip_brackets;
  return r;
}

CleaningRule CleaningRule::strip_prefix(std::string literal) {
  CleaningRule r;
  r.kind = RuleKind::strip_prefix;
  r.literal = std::move(literal);
  return r;
}

CleaningRule CleaningRule::title_case_allcaps(std::size_t keep_words_up_to,
                                              std::vector<std::string> acronyms,
                                              bool multi_word_only) {
  CleaningRule r;
  r.kind = RuleKind::title_case_allcaps;
  r.keep_words_up_to = keep_words_up_to;
  r.acronyms = std::move(acronyms);
  r.multi_word_only = multi_word_only;
  return r;
}

CleaningRule CleaningRule::numeric_token_filter(NumericFilterMode mode) {
  CleaningRule r;
  r.kind = RuleKind::numeric_token_filter;
  r.numeric_mode = mode;
  return r;
}

CleaningRule CleaningRule::strip_edge_punct() {
  CleaningRule r;
  r.kind = RuleKind::strip_edge_punct;
  return r;
}

void check_rule(const CleaningRule& rule) {
  if (rule.kind == RuleKind::strip_prefix && text::trim(rule.literal).empty()) {
    throw Error(ErrorKind::invalid_argument, "strip_prefix needs a non-empty literal");
  }
  if (rule.kind == RuleKind::replace_newlines &&
      rule.replacement.find_first_of("\r\n") != std::string::npos) {
    throw Error(ErrorKind::invalid_argument, "replace_newlines replacement contains a newline");
  }
}

// ---------------------------------------------------------------------------
// Rule primitives

namespace {

bool is_newline(char c) { return c == '\n' || c == '\r'; }
bool is_blank(char c) { return c == ' ' || c == '\t'; }

std::string replace_newlines(std::string_view s, const std::string& replacement) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_newline(s[i])) {
      out.push_back(s[i++]);
      continue;
    }
    while (!out.empty() && is_blank(out.back())) out.pop_back();
    while (i < s.size() && (is_newline(s[i]) || is_blank(s[i]))) ++i;
    // A break at either edge of the value just disappears.
    if (!out.empty() && i < s.size()) out += replacement;
  }
  return out;
}

char closing_bracket(char open) {
  switch (open) {
    case '(': return ')';
    case '[': return ']';
    case '{': return '}';
    case '<': return '>';
    default: return '\0';
  }
}

std::string strip_brackets(std::string_view s) {
  const std::string_view t = text::trim(s);
  if (t.size() < 2) return std::string(s);
  const char close = closing_bracket(t.front());
  if (close == '\0' || t.back() != close) return std::string(s);
  // The opening bracket must be the one closed by the final character.
  int depth = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == t.front()) ++depth;
    if (t[i] == close && --depth == 0 && i + 1 != t.size()) return std::string(s);
  }
  return std::string(text::trim(t.substr(1, t.size() - 2)));
}

bool is_alnum(char c) { return text::is_alpha(c) || text::is_digit(c); }

std::string strip_prefix(std::string_view s, const std::string& literal) {
  std::string_view t = text::trim(s);
  const std::string lit = text::to_lower(text::trim(literal));
  if (t.size() < lit.size() || text::to_lower(t.substr(0, lit.size())) != lit) {
    return std::string(s);
  }
  // Whole-word match only: "REMIT TOWN" keeps its text.
  if (t.size() > lit.size() && is_alnum(t[lit.size()]) && is_alnum(lit.back())) {
    return std::string(s);
  }
  return std::string(text::trim(t.substr(lit.size())));
}

std::string_view word_core(std::string_view word) {
  while (!word.empty() && !is_alnum(word.front())) word.remove_prefix(1);
  while (!word.empty() && !is_alnum(word.back())) word.remove_suffix(1);
  return word;
}

std::string to_upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (text::is_lower(c)) c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

std::string title_case(std::string_view s, const CleaningRule& rule) {
  const bool has_upper = std::any_of(s.begin(), s.end(), text::is_upper);
  const bool has_lower = std::any_of(s.begin(), s.end(), text::is_lower);
  if (!has_upper || has_lower) return std::string(s);
  if (rule.multi_word_only && text::split_whitespace(s).size() < 2) return std::string(s);

  std::string out(s);
  std::size_t i = 0;
  while (i < out.size()) {
    while (i < out.size() && text::is_space(out[i])) ++i;
    const std::size_t start = i;
    while (i < out.size() && !text::is_space(out[i])) ++i;
    if (i == start) break;
    const std::string_view word(out.data() + start, i - start);
    const std::string_view core = word_core(word);
    if (core.empty() || core.size() <= rule.keep_words_up_to) continue;
    const std::string upper_core = to_upper(core);
    if (std::find(rule.acronyms.begin(), rule.acronyms.end(), upper_core) != rule.acronyms.end()) {
      continue;
    }
    const std::size_t core_start = start + static_cast<std::size_t>(core.data() - word.data());
    for (std::size_t k = start; k < i; ++k) {
      char& c = out[k];
      const bool keep_capital = (k == core_start) && text::is_upper(c);
      if (text::is_upper(c) && !keep_capital) c = static_cast<char>(c - 'A' + 'a');
    }
  }
  return out;
}

std::string numeric_filter(std::string_view s, NumericFilterMode mode) {
  if (mode == NumericFilterMode::keep_digits_and_punct) {
    std::string kept;
    for (char c : s) {
      if (text::is_digit(c) || text::is_punct(c) || text::is_space(c)) kept.push_back(c);
    }
    return text::join(text::split_whitespace(kept), " ");
  }
  std::vector<std::string> kept;
  for (auto& token : text::split_whitespace(s)) {
    const auto digits = static_cast<std::size_t>(std::count_if(token.begin(), token.end(), text::is_digit));
    if (2 * (token.size() - digits) <= token.size()) kept.push_back(std::move(token));
  }
  return text::join(kept, " ");
}

std::string strip_edge_punct(std::string_view s) {
  while (!s.empty() && (text::is_punct(s.front()) || text::is_space(s.front()))) s.remove_prefix(1);
  while (!s.empty() && (text::is_punct(s.back()) || text::is_space(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string apply_rule(std::string_view s, const CleaningRule& rule) {
  switch (rule.kind) {
    case RuleKind::replace_newlines: return replace_newlines(s, rule.replacement);
    case RuleKind::strip_brackets: return strip_brackets(s);
    case RuleKind::strip_prefix: return strip_prefix(s, rule.literal);
    case RuleKind::title_case_allcaps: return title_case(s, rule);
    case RuleKind::numeric_token_filter: return numeric_filter(s, rule.numeric_mode);
    case RuleKind::strip_edge_punct: return strip_edge_punct(s);
  }
  return std::string(s);
}

}  // namespace

std::string clean_value(std::string_view value, const std::vector<CleaningRule>& rules) {
  for (const auto& rule : rules) check_rule(rule);
  std::string current(value);
  // Each effective pass either shortens the value or only lowers letter case
  // (after newlines are gone), so this converges well inside the bound.
  for (int pass = 0; pass < 64; ++pass) {
    std::string next = current;
    for (const auto& rule : rules) next = apply_rule(next, rule);
    if (next == current) break;
    current = std::move(next);
  }
  return std::string(text::trim(current));
}

// ---------------------------------------------------------------------------
// Profiles

const std::vector<CleaningRule>& CleaningProfile::rules_for(const EntityTypeDef& type) const {
  static const std::vector<CleaningRule> kNone;
  if (auto it = rules_by_entity_type.find(type.name); it != rules_by_entity_type.end()) {
    return it->second;
  }
  const std::string by_format = std::string("format:") + to_string(type.format_class);
  if (auto it = rules_by_entity_type.find(by_format); it != rules_by_entity_type.end()) {
    return it->second;
  }
  if (auto it = rules_by_entity_type.find(kWildcard); it != rules_by_entity_type.end()) {
    return it->second;
  }
  return kNone;
}

const std::vector<std::string>& default_acronyms() {
  static const std::vector<std::string> kAcronyms = {"USA", "LLC", "LLP", "INC", "CO", "DC"};
  return kAcronyms;
}

const std::vector<std::string>& builtin_profile_names() {
  static const std::vector<std::string> kNames = {"adbuy", "cord", "docile", "klc", "regform"};
  return kNames;
}

namespace {

using R = CleaningRule;

// Newline, bracket and prefix handling shared by Ad-Buy and Reg. Form.
std::vector<CleaningRule> adbuy_base(const std::string& newline_replacement) {
  return {R::replace_newlines(newline_replacement), R::strip_brackets(),
          R::strip_prefix("REMIT TO")};
}

std::vector<CleaningRule> with(std::vector<CleaningRule> rules, CleaningRule extra) {
  rules.push_back(std::move(extra));
  return rules;
}

}  // namespace

CleaningProfile builtin_profile(std::string_view name) {
  CleaningProfile p;
  p.name = std::string(name);
  auto& m = p.rules_by_entity_type;
  if (name == "adbuy") {
    m["*"] = adbuy_base(" ");
    for (const char* type : {"advertiser", "agency", "product", "program_desc"}) {
      m[type] = with(adbuy_base(" "), R::title_case_allcaps());
    }
    m["tv_address"] = with(adbuy_base(", "), R::title_case_allcaps(2));
  } else if (name == "cord") {
    m["*"] = {R::strip_edge_punct()};
    for (const char* numeric : {"format:integer", "format:decimal"}) {
      m[numeric] = {R::numeric_token_filter(NumericFilterMode::drop_mostly_text_tokens),
                    R::strip_edge_punct()};
    }
  } else if (name == "docile") {
    m["*"] = {R::replace_newlines(", "), R::title_case_allcaps()};
    for (const char* numeric : {"format:integer", "format:decimal"}) {
      m[numeric] = {R::numeric_token_filter(NumericFilterMode::keep_digits_and_punct)};
    }
  } else if (name == "klc") {
    for (const char* type : {"address_post_town", "address_street_line", "charity_name"}) {
      m[type] = {R::title_case_allcaps(0, {}, false)};
    }
  } else if (name == "regform") {
    m["*"] = with(adbuy_base(" "), R::title_case_allcaps(0, default_acronyms()));
  } else {
    throw Error(ErrorKind::invalid_argument, "unknown cleaning profile '" + std::string(name) +
                                                 "' (expected adbuy, cord, docile, klc or regform)");
  }
  return p;
}

namespace {

const char* to_string(NumericFilterMode mode) {
  return mode == NumericFilterMode::keep_digits_and_punct ? "keep_digits_and_punct"
                                                          : "drop_mostly_text_tokens";
}

json rule_to_json(const CleaningRule& r) {
  json j = {{"kind", to_string(r.kind)}};
  switch (r.kind) {
    case RuleKind::replace_newlines: j["replacement"] = r.replacement; break;
    case RuleKind::strip_prefix: j["literal"] = r.literal; break;
    case RuleKind::title_case_allcaps:
      j["keep_words_up_to"] = r.keep_words_up_to;
      j["acronyms"] = r.acronyms;
      j["multi_word_only"] = r.multi_word_only;
      break;
    case RuleKind::numeric_token_filter: j["mode"] = to_string(r.numeric_mode); break;
    default: break;
  }
  return j;
}

CleaningRule rule_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw Error(ErrorKind::schema, where + ": rule needs a string 'kind'");
  }
  CleaningRule r;
  try {
    r.kind = rule_kind_from_string(j["kind"].get<std::string>());
    if (r.kind == RuleKind::replace_newlines) r.replacement = j.value("replacement", std::string(" "));
    r.literal = j.value("literal", r.literal);
    r.keep_words_up_to = j.value("keep_words_up_to", r.keep_words_up_to);
    r.acronyms = j.value("acronyms", r.acronyms);
    r.multi_word_only = j.value("multi_word_only", r.multi_word_only);
    const std::string mode = j.value("mode", std::string("drop_mostly_text_tokens"));
    if (mode == "keep_digits_and_punct") {
      r.numeric_mode = NumericFilterMode::keep_digits_and_punct;
    } else if (mode != "drop_mostly_text_tokens") {
      throw Error(ErrorKind::schema, "unknown numeric filter mode '" + mode + "'");
    }
    check_rule(r);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, where + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorKind::schema, where + ": " + e.what());
  }
  return r;
}

}  // namespace

CleaningProfile parse_cleaning_profile(std::string_view content) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("cleaning profile: ") + e.what());
  }
  if (!j.is_object() || !j.contains("name") || !j["name"].is_string() || !j.contains("rules") ||
      !j["rules"].is_object()) {
    throw Error(ErrorKind::schema, "cleaning profile needs a string 'name' and an object 'rules'");
  }
  CleaningProfile p;
  p.name = j["name"].get<std::string>();
  for (const auto& [selector, list] : j["rules"].items()) {
    if (!list.is_array()) {
      throw Error(ErrorKind::schema, "rules." + selector + ": expected an array");
    }
    auto& rules = p.rules_by_entity_type[selector];
    for (std::size_t i = 0; i < list.size(); ++i) {
      rules.push_back(rule_from_json(list[i], "rules." + selector + "[" + std::to_string(i) + "]"));
    }
  }
  return p;
}

std::string serialize_cleaning_profile(const CleaningProfile& profile) {
  json rules = json::object();
  for (const auto& [selector, list] : profile.rules_by_entity_type) {
    json arr = json::array();
    for (const auto& r : list) arr.push_back(rule_to_json(r));
    rules[selector] = std::move(arr);
  }
  return json{{"name", profile.name}, {"rules", std::move(rules)}}.dump(2) + "\n";
}

CleaningProfile resolve_cleaning_profile(const std::string& name_or_path) {
  const auto& names = builtin_profile_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    return builtin_profile(name_or_path);
  }
  if (!std::filesystem::is_regular_file(name_or_path)) {
    throw Error(ErrorKind::io, "'" + name_or_path + "' is neither a builtin profile nor a readable file");
  }
  return parse_cleaning_profile(read_text_file(name_or_path));
}

CleaningOutcome clean_dataset(const KieDataset& dataset, const CleaningProfile& profile) {
  CleaningOutcome out{dataset, {}};
  for (auto& doc : out.dataset.documents) {
    for (std::size_t i = 0; i < doc.entities.size(); ++i) {
      Entity& e = doc.entities[i];
      const EntityTypeDef* type = out.dataset.find_type(e.type_name);
      if (!type) {
        throw Error(ErrorKind::dangling_reference,
                    doc.doc_id + ": entity '" + e.entity_id + "' has unknown type '" + e.type_name + "'");
      }
      e.cleaned_value = clean_value(e.raw_value, profile.rules_for(*type));
      if (e.cleaned_value->empty()) {
        out.warnings.push_back({Severity::warning,
                                doc.doc_id + ".entities[" + std::to_string(i) + "]",
                                "entity '" + e.entity_id + "' (" + e.type_name +
                                    ") cleaned to an empty value from '" + e.raw_value + "'"});
      }
    }
  }
  return out;
}

}  // namespace k2q
