#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "k2q/error.hpp"

namespace k2q {

enum class FormatClass { string, integer, decimal, date, other };
enum class Split { train, dev, test };

const char* to_string(FormatClass format);
const char* to_string(Split split);
FormatClass format_class_from_string(std::string_view name);
Split split_from_string(std::string_view name);

/// Page-normalized box, all coordinates in [0, 1].
struct BoundingBox {
  double left = 0;
  double top = 0;
  double right = 0;
  double bottom = 0;

  bool operator==(const BoundingBox&) const = default;
};

struct OcrToken {
  std::string token_id;
  int page_index = 0;
  std::string text;
  BoundingBox bbox;

  bool operator==(const OcrToken&) const = default;
};

struct EntityTypeDef {
  std::string name;
  std::optional<std::string> parent;
  std::vector<std::string> display_phrases;
  FormatClass format_class = FormatClass::string;

  bool operator==(const EntityTypeDef&) const = default;
};

struct Entity {
  std::string entity_id;
  std::string type_name;
  std::string raw_value;
  std::optional<std::string> cleaned_value;
  std::vector<std::string> token_span;
  std::optional<std::string> line_item_id;
  std::vector<int> page_indices;  // sorted, unique

  /// The cleaned value when cleaning ran, otherwise the raw annotation.
  const std::string& value() const { return cleaned_value ? *cleaned_value : raw_value; }

  bool operator==(const Entity&) const = default;
};

struct LineItem {
  std::string line_item_id;
  int position = 0;  // 1-based
  std::vector<std::string> entity_ids;

  bool operator==(const LineItem&) const = default;
};

struct Document {
  std::string doc_id;
  int page_count = 1;
  std::vector<OcrToken> tokens;
  std::vector<Entity> entities;
  std::vector<LineItem> line_items;
  Split split = Split::train;

  const Entity* find_entity(std::string_view entity_id) const;
  const LineItem* find_line_item(std::string_view line_item_id) const;
  const OcrToken* find_token(std::string_view token_id) const;

  /// Space-joined text of the tokens on `pages` (all pages when empty).
  std::string ocr_text(const std::vector<int>& pages = {}) const;

  bool operator==(const Document&) const = default;
};

struct KieDataset {
  std::string name;
  std::vector<EntityTypeDef> ontology;
  std::vector<Document> documents;

  const EntityTypeDef* find_type(std::string_view name) const;
  const Document* find_document(std::string_view doc_id) const;

  bool operator==(const KieDataset&) const = default;
};

// ---------------------------------------------------------------------------
// KIE file format
//
// Line-delimited JSON. The first non-empty line is the dataset header
// {"name": ..., "ontology": [{name, parent, display_phrases, format_class}]};
// each following line is one document {doc_id, page_count, tokens, entities,
// line_items, split}.

/// Parses KIE text. Throws parse errors for malformed JSON, schema errors for
/// missing or mistyped fields, and dangling_reference errors for ids that
/// point at nothing. Semantic invariants are left to validate_dataset.
KieDataset parse_kie_dataset(std::string_view content);

/// Reads, parses and validates a KIE file. Error-severity issues from
/// validate_dataset are raised as a schema error listing them.
KieDataset load_kie_dataset(const std::filesystem::path& path);

std::string serialize_kie_dataset(const KieDataset& dataset);

void save_kie_dataset(const KieDataset& dataset, const std::filesystem::path& path);

/// Checks every structural invariant of the data model. Returns one issue per
/// violation; an empty list means the dataset is usable by every operation.
std::vector<Issue> validate_dataset(const KieDataset& dataset);

/// Classifies a value for negative sampling. Rules are tried in order: date
/// layouts (numeric and month-name), integer with optional thousands
/// separators, decimal, and string otherwise.
FormatClass infer_format_class(std::string_view value);

inline constexpr double kOcrLinkThreshold = 0.3;

/// Finds the contiguous token window whose space-joined text is closest to
/// the entity's raw value (case-insensitive normalized edit distance). Ties
/// go to the earliest window, then the shortest. Returns an empty span when
/// the best distance exceeds kOcrLinkThreshold.
std::vector<std::string> link_entity_to_ocr(const Entity& entity, const Document& doc);

/// Fills empty token spans via link_entity_to_ocr, updating page_indices for
/// the entities it links. Returns the number of entities linked.
std::size_t link_missing_spans(KieDataset& dataset);

}  // namespace k2q
