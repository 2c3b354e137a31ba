#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "k2q/error.hpp"
#include "k2q/kie_model.hpp"
#include "k2q/metrics.hpp"

namespace k2q {

enum class SlotKind { key_phrase, entity_value, ordinal_position, candidate_value };
enum class Scope { document, line_item };

const char* to_string(SlotKind kind);
const char* to_string(Scope scope);
SlotKind slot_kind_from_string(std::string_view name);
Scope scope_from_string(std::string_view name);

struct Slot {
  std::string role;
  SlotKind kind = SlotKind::key_phrase;
  std::string type_name;  // key_phrase and entity_value only

  bool operator==(const Slot&) const = default;
};

struct Template {
  std::string template_id;
  QuestionType question_type = QuestionType::extractive;
  std::string target_type;
  Scope scope = Scope::document;
  std::string pattern;
  std::vector<Slot> slots;

  const Slot* find_slot(std::string_view role) const;

  bool operator==(const Template&) const = default;
};

struct TemplateSuite {
  std::string dataset_name;
  std::vector<Template> templates;

  bool operator==(const TemplateSuite&) const = default;
};

/// A pattern split into literal text and `{role}` placeholders. Placeholders
/// sit at odd indices; literals (possibly empty) at even ones.
struct PatternPieces {
  std::vector<std::string> pieces;

  std::size_t placeholder_count() const { return pieces.size() / 2; }
};

/// Throws parse errors for unbalanced or nested braces and empty roles.
PatternPieces split_pattern(std::string_view pattern);

/// Checks every template invariant that does not need an ontology. Throws
/// schema errors.
void check_template(const Template& tmpl);

/// Parses one template record
/// {template_id, question_type, target_type, scope, pattern, slots: [{role, kind, type_name}]}
/// and runs check_template on it.
Template parse_template(std::string_view record);
std::string serialize_template(const Template& tmpl);

using BindingValue = std::variant<std::string, std::int64_t>;
using Bindings = std::map<std::string, BindingValue>;

/// "1st", "2nd", "3rd", "4th", ..., "11th", "12th", "13th", "21st", ...
std::string ordinal(std::int64_t n);

/// Substitutes every placeholder. Ordinal slots take a positive integer,
/// the others a string. Throws invalid_argument for a missing or mistyped
/// binding.
std::string render(const Template& tmpl, const Bindings& bindings);

// ---------------------------------------------------------------------------
// Suite files
//
// Line-delimited JSON: a header {"dataset_name": ...} then one template
// record per line.

TemplateSuite parse_template_suite(std::string_view content);
TemplateSuite load_template_suite(const std::filesystem::path& path);
std::string serialize_template_suite(const TemplateSuite& suite);

/// Duplicate ids, types missing from the ontology, per-template invariant
/// violations, and line-item-only slots in document-scoped templates.
std::vector<Issue> validate_suite(const TemplateSuite& suite,
                                  const std::vector<EntityTypeDef>& ontology);

}  // namespace k2q
