#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "k2q/error.hpp"
#include "k2q/kie_model.hpp"

namespace k2q {

enum class RuleKind {
  replace_newlines,
  strip_brackets,
  strip_prefix,
  title_case_allcaps,
  numeric_token_filter,
  strip_edge_punct,
};

const char* to_string(RuleKind kind);
RuleKind rule_kind_from_string(std::string_view name);

enum class NumericFilterMode {
  /// Drop whitespace tokens in which more than half the characters are not digits.
  drop_mostly_text_tokens,
  /// Keep only digits, punctuation and whitespace characters.
  keep_digits_and_punct,
};

/// One normalization step. Only the parameters of `kind` are meaningful.
struct CleaningRule {
  RuleKind kind = RuleKind::strip_edge_punct;
  std::string replacement;  // replace_newlines
  std::string literal;      // strip_prefix
  // title_case_allcaps: words whose letters-and-digits core is at most this
  // long are left alone, as are whitelisted acronyms.
  std::size_t keep_words_up_to = 0;
  std::vector<std::string> acronyms;
  bool multi_word_only = true;
  NumericFilterMode numeric_mode = NumericFilterMode::drop_mostly_text_tokens;

  static CleaningRule replace_newlines(std::string replacement);
  static CleaningRule strip_brackets();
  static CleaningRule strip_prefix(std::string literal);
  static CleaningRule title_case_allcaps(std::size_t keep_words_up_to = 0,
                                         std::vector<std::string> acronyms = {},
                                         bool multi_word_only = true);
  static CleaningRule numeric_token_filter(
      NumericFilterMode mode = NumericFilterMode::drop_mostly_text_tokens);
  static CleaningRule strip_edge_punct();

  bool operator==(const CleaningRule&) const = default;
};

/// Throws invalid_argument when the parameters do not fit the kind.
void check_rule(const CleaningRule& rule);

/// Applies `rules` left to right, repeating the pass until the value stops
/// changing, then trims surrounding whitespace. The result is therefore a
/// fixpoint: cleaning a cleaned value is a no-op. May return an empty string
/// when filters remove everything.
std::string clean_value(std::string_view value, const std::vector<CleaningRule>& rules);

/// Rule lists keyed by selector. A selector is an entity type name, a format
/// class written `format:<class>` (matched against the ontology), or the
/// wildcard `*`. The most specific selector present wins.
struct CleaningProfile {
  std::string name;
  std::map<std::string, std::vector<CleaningRule>> rules_by_entity_type;

  static constexpr const char* kWildcard = "*";

  const std::vector<CleaningRule>& rules_for(const EntityTypeDef& type) const;

  bool operator==(const CleaningProfile&) const = default;
};

/// The acronym list kept upper-case by the regform profile.
const std::vector<std::string>& default_acronyms();

/// One of "adbuy", "cord", "docile", "klc", "regform".
CleaningProfile builtin_profile(std::string_view name);

const std::vector<std::string>& builtin_profile_names();

/// Profile file: one JSON object
/// {"name": ..., "rules": {"<selector>": [{"kind": ..., params...}, ...]}}.
CleaningProfile parse_cleaning_profile(std::string_view content);
std::string serialize_cleaning_profile(const CleaningProfile& profile);

/// A builtin name or a path to a profile file.
CleaningProfile resolve_cleaning_profile(const std::string& name_or_path);

struct CleaningOutcome {
  KieDataset dataset;
  std::vector<Issue> warnings;  // one per entity cleaned down to ""
};

/// Sets cleaned_value on every entity. Raw values are copied through untouched.
CleaningOutcome clean_dataset(const KieDataset& dataset, const CleaningProfile& profile);

}  // namespace k2q
