#include "k2q/generator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "k2q/digest.hpp"
#include "k2q/io.hpp"
#include "k2q/text.hpp"

namespace k2q {

using nlohmann::json;

const char* to_string(Strategy strategy) {
  return strategy == Strategy::generate_all_then_sample ? "generate_all_then_sample" : "per_entity";
}

Strategy strategy_from_string(std::string_view name) {
  if (name == "per_entity") return Strategy::per_entity;
  if (name == "generate_all_then_sample") return Strategy::generate_all_then_sample;
  throw Error(ErrorKind::schema, "unknown strategy '" + std::string(name) +
                                     "' (expected per_entity or generate_all_then_sample)");
}

// ---------------------------------------------------------------------------
// Config

namespace {

json parse_json(std::string_view content, const std::string& what) {
  try {
    return json::parse(content);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, what + ": " + e.what());
  }
}

std::optional<std::size_t> optional_count(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
    throw Error(ErrorKind::schema, std::string("config.") + key + ": expected a non-negative integer");
  }
  return it->get<std::size_t>();
}

}  // namespace

GenerationConfig parse_generation_config(std::string_view content) {
  const json j = parse_json(content, "generation config");
  if (!j.is_object()) throw Error(ErrorKind::schema, "generation config must be an object");
  static const std::set<std::string> known = {
      "seed", "strategy", "boolean_count_per_doc", "extractive_quota",
      "boolean_quota", "false_fraction", "single_page_only"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw Error(ErrorKind::schema, "config: unknown field '" + key + "'");
  }
  GenerationConfig c;
  if (auto seed = optional_count(j, "seed")) c.seed = static_cast<std::uint64_t>(*seed);
  if (auto it = j.find("strategy"); it != j.end()) {
    if (!it->is_string()) throw Error(ErrorKind::schema, "config.strategy: expected a string");
    c.strategy = strategy_from_string(it->get<std::string>());
  }
  c.boolean_count_per_doc = optional_count(j, "boolean_count_per_doc").value_or(0);
  c.extractive_quota = optional_count(j, "extractive_quota");
  c.boolean_quota = optional_count(j, "boolean_quota");
  if (auto it = j.find("false_fraction"); it != j.end()) {
    if (!it->is_number() || it->get<double>() != 0.5) {
      throw Error(ErrorKind::schema, "config.false_fraction: only 0.5 is supported");
    }
  }
  if (auto it = j.find("single_page_only"); it != j.end()) {
    if (!it->is_boolean()) throw Error(ErrorKind::schema, "config.single_page_only: expected a boolean");
    c.single_page_only = it->get<bool>();
  }
  return c;
}

std::string serialize_generation_config(const GenerationConfig& c) {
  auto count = [](const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); };
  json j = {{"seed", c.seed ? json(*c.seed) : json(nullptr)},
            {"strategy", to_string(c.strategy)},
            {"boolean_count_per_doc", c.boolean_count_per_doc},
            {"extractive_quota", count(c.extractive_quota)},
            {"boolean_quota", count(c.boolean_quota)},
            {"false_fraction", c.false_fraction},
            {"single_page_only", c.single_page_only}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// QA file

const QaInstance* QaDataset::find(std::string_view qa_id) const {
  for (const auto& q : instances) {
    if (q.qa_id == qa_id) return &q;
  }
  return nullptr;
}

namespace {

json to_json(const QaInstance& q) {
  json j = {{"qa_id", q.qa_id},
            {"doc_id", q.doc_id},
            {"split", to_string(q.split)},
            {"page_scope", q.page_scope},
            {"question", q.question},
            {"question_type", to_string(q.question_type)},
            {"answers", q.answers},
            {"entity_ids_used", q.entity_ids_used},
            {"answer_entity_ids", q.answer_entity_ids},
            {"answer_token_spans", q.answer_token_spans},
            {"template_id", q.template_id},
            {"num_question_entities", q.num_question_entities},
            {"bindings", q.bindings}};
  if (q.candidate_value) j["candidate_value"] = *q.candidate_value;
  return j;
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorKind::schema, where + "." + key + ": missing required field");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::schema, where + "." + key + ": wrong type");
  }
}

QaInstance instance_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::schema, where + ": expected an object");
  QaInstance q;
  q.qa_id = field<std::string>(j, "qa_id", where);
  q.doc_id = field<std::string>(j, "doc_id", where);
  q.split = split_from_string(field<std::string>(j, "split", where));
  q.page_scope = field<std::vector<int>>(j, "page_scope", where);
  q.question = field<std::string>(j, "question", where);
  q.question_type = question_type_from_string(field<std::string>(j, "question_type", where));
  q.answers = field<std::vector<std::string>>(j, "answers", where);
  q.entity_ids_used = field<std::vector<std::string>>(j, "entity_ids_used", where);
  q.answer_entity_ids = field<std::vector<std::string>>(j, "answer_entity_ids", where);
  q.answer_token_spans = field<std::vector<std::vector<std::string>>>(j, "answer_token_spans", where);
  q.template_id = field<std::string>(j, "template_id", where);
  q.num_question_entities = field<int>(j, "num_question_entities", where);
  if (j.contains("candidate_value") && !j["candidate_value"].is_null()) {
    q.candidate_value = field<std::string>(j, "candidate_value", where);
  }
  if (j.contains("bindings")) q.bindings = field<std::map<std::string, std::string>>(j, "bindings", where);
  return q;
}

}  // namespace

QaDataset parse_qa_dataset(std::string_view content) {
  QaDataset qads;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    const json j = parse_json(line, where);
    try {
      if (!have_header) {
        if (!j.is_object()) throw Error(ErrorKind::schema, where + ": expected the QA header");
        qads.name = field<std::string>(j, "name", where);
        const auto& p = j.value("provenance", json::object());
        qads.provenance.config_digest = p.value("config_digest", "");
        qads.provenance.suite_digest = p.value("suite_digest", "");
        qads.provenance.source_digest = p.value("source_digest", "");
        have_header = true;
        continue;
      }
      qads.instances.push_back(instance_from_json(j, where));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::schema, where + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorKind::schema, "QA file has no header record");
  return qads;
}

QaDataset load_qa_dataset(const std::filesystem::path& path) {
  try {
    return parse_qa_dataset(read_text_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string serialize_qa_dataset(const QaDataset& qads) {
  const json header = {{"name", qads.name},
                       {"provenance",
                        {{"config_digest", qads.provenance.config_digest},
                         {"suite_digest", qads.provenance.suite_digest},
                         {"source_digest", qads.provenance.source_digest}}}};
  std::string out = header.dump() + "\n";
  for (const auto& q : qads.instances) out += to_json(q).dump() + "\n";
  return out;
}

void save_qa_dataset(const QaDataset& qads, const std::filesystem::path& path) {
  write_text_file(path, serialize_qa_dataset(qads));
}

std::vector<Issue> validate_qa_dataset(const QaDataset& qads) {
  std::vector<Issue> issues;
  std::unordered_set<std::string> ids;
  std::unordered_map<std::string, Split> doc_split;
  for (std::size_t i = 0; i < qads.instances.size(); ++i) {
    const QaInstance& q = qads.instances[i];
    const std::string loc = "instances[" + std::to_string(i) + "] (" + q.qa_id + ")";
    auto report = [&](const std::string& msg) { issues.push_back({Severity::error, loc, msg}); };

    if (q.qa_id.empty()) report("empty qa_id");
    if (!ids.insert(q.qa_id).second) report("duplicate qa_id");
    if (q.question.empty()) report("empty question");
    auto [it, fresh] = doc_split.emplace(q.doc_id, q.split);
    if (!fresh && it->second != q.split) report("document '" + q.doc_id + "' appears in two splits");
    if (!std::is_sorted(q.page_scope.begin(), q.page_scope.end()) ||
        std::adjacent_find(q.page_scope.begin(), q.page_scope.end()) != q.page_scope.end() ||
        (!q.page_scope.empty() && q.page_scope.front() < 0)) {
      report("page_scope must be sorted, unique and non-negative");
    }
    if (q.answer_token_spans.size() != q.answer_entity_ids.size()) {
      report("answer_token_spans and answer_entity_ids differ in length");
    }
    if (q.num_question_entities < 0) report("negative num_question_entities");
    if (q.question_type == QuestionType::boolean) {
      const bool yes_no = q.answers.size() == 1 && (q.answers[0] == kYes || q.answers[0] == kNo);
      if (!yes_no) report("boolean answers must be exactly [\"Yes\"] or [\"No\"]");
      if (!q.candidate_value) report("boolean question without candidate_value");
      if (q.num_question_entities < 1) report("boolean question embeds no entity");
    } else {
      if (q.answers.empty()) report("extractive question without answers");
      if (std::any_of(q.answers.begin(), q.answers.end(), [](const auto& a) { return a.empty(); })) {
        report("empty answer string");
      }
      if (q.candidate_value) report("extractive question with candidate_value");
    }
  }
  return issues;
}

// ---------------------------------------------------------------------------
// Candidates

namespace {

bool has_value(const Entity& e) { return !e.value().empty(); }
bool eligible(const Entity& e) { return has_value(e) && !e.page_indices.empty(); }

void add_pages(std::vector<int>& pages, const Entity& e) {
  pages.insert(pages.end(), e.page_indices.begin(), e.page_indices.end());
}

void normalize_pages(std::vector<int>& pages) {
  std::sort(pages.begin(), pages.end());
  pages.erase(std::unique(pages.begin(), pages.end()), pages.end());
}

// A possible value for an entity_value slot, with the entity it came from.
struct SlotOption {
  std::string value;
  const Entity* entity;
};

// Distinct values among eligible entities of `type`, first entity wins.
std::vector<SlotOption> distinct_options(const std::vector<const Entity*>& entities,
                                         const std::string& type) {
  std::vector<SlotOption> out;
  std::unordered_set<std::string> seen;
  for (const Entity* e : entities) {
    if (e->type_name == type && eligible(*e) && seen.insert(e->value()).second) {
      out.push_back({e->value(), e});
    }
  }
  return out;
}

// Cartesian product of slot options. Every slot takes a different entity.
void combinations(const std::vector<std::vector<SlotOption>>& options, std::size_t slot,
                  std::vector<const SlotOption*>& chosen,
                  std::vector<std::vector<const SlotOption*>>& out) {
  if (slot == options.size()) {
    out.push_back(chosen);
    return;
  }
  for (const auto& opt : options[slot]) {
    const bool taken = std::any_of(chosen.begin(), chosen.end(),
                                   [&](const SlotOption* c) { return c->entity == opt.entity; });
    if (taken) continue;
    chosen.push_back(&opt);
    combinations(options, slot + 1, chosen, out);
    chosen.pop_back();
  }
}

std::vector<std::vector<const SlotOption*>> bind_value_slots(
    const Template& t, const std::vector<const Entity*>& entities,
    std::vector<std::vector<SlotOption>>& storage) {
  storage.clear();
  for (const auto& s : t.slots) {
    if (s.kind == SlotKind::entity_value) storage.push_back(distinct_options(entities, s.type_name));
  }
  std::vector<std::vector<const SlotOption*>> out;
  std::vector<const SlotOption*> chosen;
  combinations(storage, 0, chosen, out);
  return out;
}

// Fills the candidate's slot bindings and used entities from a combination.
void apply_combination(const Template& t, const std::vector<const SlotOption*>& combo,
                       Candidate& c) {
  std::size_t k = 0;
  for (const auto& s : t.slots) {
    if (s.kind != SlotKind::entity_value) continue;
    c.bindings[s.role] = combo[k]->value;
    c.entity_ids_used.push_back(combo[k]->entity->entity_id);
    add_pages(c.pages, *combo[k]->entity);
    ++k;
  }
}

class CandidateBuilder {
 public:
  CandidateBuilder(const Document& doc, bool single_page_only)
      : doc_(doc), single_page_only_(single_page_only) {
    for (const auto& e : doc.entities) {
      if (e.line_item_id) {
        by_line_item_[*e.line_item_id].push_back(&e);
      } else {
        document_level_.push_back(&e);
      }
    }
    for (const auto& li : doc.line_items) line_items_.push_back(&li);
    std::sort(line_items_.begin(), line_items_.end(),
              [](const LineItem* a, const LineItem* b) { return a->position < b->position; });
  }

  void add(const Template& t, std::vector<Candidate>& out) {
    if (t.scope == Scope::line_item) {
      add_line_item(t, out);
    } else if (t.question_type == QuestionType::boolean && !has_document_level(t.target_type)) {
      add_existential(t, out);
    } else {
      add_document(t, out);
    }
  }

 private:
  bool has_document_level(const std::string& type) const {
    return std::any_of(document_level_.begin(), document_level_.end(),
                       [&](const Entity* e) { return e->type_name == type && has_value(*e); });
  }

  void emit(Candidate c, std::vector<Candidate>& out) const {
    normalize_pages(c.pages);
    if (c.pages.empty()) return;
    if (single_page_only_ && c.pages.size() > 1) return;
    out.push_back(std::move(c));
  }

  // Non-line-item target: the answer set is every value of the type.
  void add_document(const Template& t, std::vector<Candidate>& out) {
    std::vector<const Entity*> targets;
    for (const Entity* e : document_level_) {
      if (e->type_name == t.target_type && has_value(*e)) targets.push_back(e);
    }
    auto anchor = std::find_if(targets.begin(), targets.end(),
                               [](const Entity* e) { return eligible(*e); });
    if (anchor == targets.end()) return;

    std::vector<std::vector<SlotOption>> storage;
    for (const auto& combo : bind_value_slots(t, document_level_, storage)) {
      Candidate c;
      c.tmpl = &t;
      c.anchor_entity_id = (*anchor)->entity_id;
      c.true_answers = multi_answer_resolution(t.target_type, doc_);
      for (const Entity* e : targets) {
        c.answer_entity_ids.push_back(e->entity_id);
        add_pages(c.pages, *e);
      }
      apply_combination(t, combo, c);
      emit(std::move(c), out);
    }
  }

  // Boolean over a line-item type in document scope: "is X a <type> in this
  // document". One candidate per distinct value; any value makes it true.
  void add_existential(const Template& t, std::vector<Candidate>& out) {
    std::vector<const Entity*> targets;
    for (const auto& e : doc_.entities) {
      if (e.type_name == t.target_type && has_value(e)) targets.push_back(&e);
    }
    if (targets.empty()) return;
    std::vector<std::string> values;
    for (const Entity* e : targets) {
      if (std::find(values.begin(), values.end(), e->value()) == values.end()) {
        values.push_back(e->value());
      }
    }
    std::vector<std::vector<SlotOption>> storage;
    const auto combos = bind_value_slots(t, document_level_, storage);
    for (const auto& value : values) {
      auto anchor = std::find_if(targets.begin(), targets.end(), [&](const Entity* e) {
        return e->value() == value && eligible(*e);
      });
      if (anchor == targets.end()) continue;
      for (const auto& combo : combos) {
        Candidate c;
        c.tmpl = &t;
        c.anchor_entity_id = (*anchor)->entity_id;
        c.true_answers = values;
        for (const Entity* e : targets) {
          c.answer_entity_ids.push_back(e->entity_id);
          add_pages(c.pages, *e);
        }
        apply_combination(t, combo, c);
        emit(std::move(c), out);
      }
    }
  }

  // Number of line items consistent with an ordinal and a set of slot values.
  std::size_t referents(const Template& t, const Candidate& c, bool has_ordinal,
                        int position) const {
    std::size_t count = 0;
    for (const LineItem* li : line_items_) {
      if (has_ordinal && li->position != position) continue;
      const auto& members = members_of(li->line_item_id);
      bool all = true;
      for (const auto& s : t.slots) {
        if (s.kind != SlotKind::entity_value) continue;
        const auto& want = std::get<std::string>(c.bindings.at(s.role));
        const bool found = std::any_of(members.begin(), members.end(), [&](const Entity* e) {
          return e->type_name == s.type_name && e->value() == want;
        });
        if (!found) {
          all = false;
          break;
        }
      }
      if (all) ++count;
    }
    return count;
  }

  const std::vector<const Entity*>& members_of(const std::string& line_item_id) const {
    static const std::vector<const Entity*> kEmpty;
    auto it = by_line_item_.find(line_item_id);
    return it == by_line_item_.end() ? kEmpty : it->second;
  }

  void add_line_item(const Template& t, std::vector<Candidate>& out) {
    const bool has_ordinal = std::any_of(t.slots.begin(), t.slots.end(), [](const Slot& s) {
      return s.kind == SlotKind::ordinal_position;
    });
    for (const LineItem* li : line_items_) {
      const auto& members = members_of(li->line_item_id);
      std::vector<const Entity*> targets;
      for (const Entity* e : members) {
        if (e->type_name == t.target_type && has_value(*e)) targets.push_back(e);
      }
      if (targets.empty()) continue;
      const bool single_value = std::all_of(targets.begin(), targets.end(), [&](const Entity* e) {
        return e->value() == targets.front()->value();
      });
      if (!single_value) continue;
      auto anchor = std::find_if(targets.begin(), targets.end(),
                                 [](const Entity* e) { return eligible(*e); });
      if (anchor == targets.end()) continue;

      std::vector<std::vector<SlotOption>> storage;
      for (const auto& combo : bind_value_slots(t, members, storage)) {
        Candidate c;
        c.tmpl = &t;
        c.anchor_entity_id = (*anchor)->entity_id;
        c.line_item_id = li->line_item_id;
        c.true_answers = {targets.front()->value()};
        for (const Entity* e : targets) {
          c.answer_entity_ids.push_back(e->entity_id);
          add_pages(c.pages, *e);
        }
        apply_combination(t, combo, c);
        for (const auto& s : t.slots) {
          if (s.kind == SlotKind::ordinal_position) c.bindings[s.role] = std::int64_t{li->position};
        }
        if (referents(t, c, has_ordinal, li->position) != 1) continue;
        emit(std::move(c), out);
      }
    }
  }

  const Document& doc_;
  bool single_page_only_;
  std::vector<const Entity*> document_level_;
  std::unordered_map<std::string, std::vector<const Entity*>> by_line_item_;
  std::vector<const LineItem*> line_items_;
};

}  // namespace

std::vector<Candidate> enumerate_candidates(const Document& doc, const KieDataset& dataset,
                                            const TemplateSuite& suite, bool single_page_only) {
  (void)dataset;
  CandidateBuilder builder(doc, single_page_only);
  std::vector<Candidate> out;
  for (const auto& t : suite.templates) builder.add(t, out);
  return out;
}

std::vector<std::string> multi_answer_resolution(std::string_view target_type, const Document& doc) {
  std::vector<std::string> out;
  for (const auto& e : doc.entities) {
    if (e.line_item_id || e.type_name != target_type || !has_value(e)) continue;
    if (std::find(out.begin(), out.end(), e.value()) == out.end()) out.push_back(e.value());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Negative sampling

ValueIndex::ValueIndex(const KieDataset& dataset) {
  std::map<std::string, std::set<std::string>> sets;
  for (const auto& d : dataset.documents) {
    for (const auto& e : d.entities) {
      if (has_value(e)) sets[e.type_name].insert(e.value());
    }
  }
  for (auto& [type, values] : sets) values_[type].assign(values.begin(), values.end());
}

const std::vector<std::string>& ValueIndex::values_of(std::string_view type_name) const {
  static const std::vector<std::string> kEmpty;
  auto it = values_.find(type_name);
  return it == values_.end() ? kEmpty : it->second;
}

namespace {

// Candidates that differ from a true answer only in case or spacing would
// still be read as true, so they are excluded too.
class TrueAnswerFilter {
 public:
  explicit TrueAnswerFilter(const std::vector<std::string>& answers) {
    for (const auto& a : answers) normalized_.insert(text::normalize_spaces_lower(a));
  }
  bool excludes(const std::string& v) const {
    return v.empty() || normalized_.count(text::normalize_spaces_lower(v)) > 0;
  }

 private:
  std::unordered_set<std::string> normalized_;
};

void finish_pool(std::vector<std::string>& pool, const TrueAnswerFilter& filter) {
  pool.erase(std::remove_if(pool.begin(), pool.end(),
                            [&](const std::string& v) { return filter.excludes(v); }),
             pool.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
}

}  // namespace

NegativePools negative_pools(const Entity& target, const KieDataset& dataset,
                             const ValueIndex& index, const Document& doc,
                             const std::vector<std::string>& true_answers) {
  const TrueAnswerFilter filter(true_answers);
  NegativePools p;
  p.same_type_in_dataset = index.values_of(target.type_name);

  const EntityTypeDef* type = dataset.find_type(target.type_name);
  const std::optional<std::string> parent = type ? type->parent : std::nullopt;
  const FormatClass format = infer_format_class(target.value());
  for (const auto& e : doc.entities) {
    if (e.entity_id == target.entity_id || !has_value(e)) continue;
    if (parent) {
      const EntityTypeDef* other = dataset.find_type(e.type_name);
      if (other && other->parent == parent) p.sibling_type_in_doc.push_back(e.value());
    }
    if (infer_format_class(e.value()) == format) p.same_format_in_doc.push_back(e.value());
  }
  finish_pool(p.same_type_in_dataset, filter);
  finish_pool(p.sibling_type_in_doc, filter);
  finish_pool(p.same_format_in_doc, filter);
  return p;
}

std::string sample_negative(const NegativePools& pools, Rng& rng) {
  std::vector<const std::vector<std::string>*> nonempty;
  for (const auto* pool :
       {&pools.same_type_in_dataset, &pools.sibling_type_in_doc, &pools.same_format_in_doc}) {
    if (!pool->empty()) nonempty.push_back(pool);
  }
  if (nonempty.empty()) throw Error(ErrorKind::no_candidate, "no negative candidate available");
  const auto& pool = *nonempty[rng.index(nonempty.size())];
  return pool[rng.index(pool.size())];
}

std::string sample_negative(const Entity& target, const KieDataset& dataset, const Document& doc,
                            Rng& rng) {
  const ValueIndex index(dataset);
  return sample_negative(negative_pools(target, dataset, index, doc, {target.value()}), rng);
}

// ---------------------------------------------------------------------------
// Generation

std::string make_qa_id(std::string_view doc_id, std::string_view template_id,
                       std::string_view question, const std::vector<std::string>& answers) {
  std::string key;
  for (std::string_view part : {doc_id, template_id, question}) {
    key += part;
    key.push_back('\x1f');
  }
  for (const auto& a : answers) {
    key += a;
    key.push_back('\x1e');
  }
  static const char* kHex = "0123456789abcdef";
  std::uint64_t h = hash64(key);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

namespace {

template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

struct DocCounters {
  std::size_t no_candidate = 0;   // false attempts without any negative
  std::size_t duplicates = 0;     // renderings that repeated an earlier question
  std::size_t boolean_short = 0;  // booleans missing from the requested count
};

class DocGenerator {
 public:
  DocGenerator(const Document& doc, const KieDataset& ds, const ValueIndex& index,
               const TemplateSuite& suite, bool single_page_only)
      : doc_(doc), ds_(ds), index_(index) {
    for (auto& c : enumerate_candidates(doc, ds, suite, single_page_only)) {
      if (c.tmpl->question_type == QuestionType::boolean) {
        boolean_pool_.push_back(std::move(c));
      } else {
        extractive_.push_back(std::move(c));
      }
    }
  }

  const std::vector<Candidate>& extractive() const { return extractive_; }
  const std::vector<Candidate>& boolean_pool() const { return boolean_pool_; }

  QaInstance instantiate(const Candidate& c, Rng& rng, const std::string* tested_value,
                         bool truth) const {
    const Template& t = *c.tmpl;
    Bindings bindings = c.bindings;
    QaInstance q;
    for (const auto& s : t.slots) {
      switch (s.kind) {
        case SlotKind::key_phrase: {
          const auto& phrases = ds_.find_type(s.type_name)->display_phrases;
          bindings[s.role] = phrases[rng.index(phrases.size())];
          break;
        }
        case SlotKind::candidate_value:
          bindings[s.role] = *tested_value;
          ++q.num_question_entities;
          break;
        case SlotKind::entity_value: ++q.num_question_entities; break;
        case SlotKind::ordinal_position: break;
      }
    }
    q.doc_id = doc_.doc_id;
    q.split = doc_.split;
    q.page_scope = c.pages;
    q.question = render(t, bindings);
    q.question_type = t.question_type;
    if (t.question_type == QuestionType::boolean) {
      q.answers = {truth ? kYes : kNo};
      q.candidate_value = *tested_value;
    } else {
      q.answers = c.true_answers;
    }
    q.entity_ids_used = c.entity_ids_used;
    q.answer_entity_ids = c.answer_entity_ids;
    for (const auto& id : c.answer_entity_ids) q.answer_token_spans.push_back(doc_.find_entity(id)->token_span);
    q.template_id = t.template_id;
    for (const auto& [role, value] : bindings) {
      q.bindings[role] = std::holds_alternative<std::string>(value)
                             ? std::get<std::string>(value)
                             : std::to_string(std::get<std::int64_t>(value));
    }
    q.qa_id = make_qa_id(q.doc_id, q.template_id, q.question, q.answers);
    return q;
  }

  /// True if a negative exists for this pool item.
  bool can_be_false(const Candidate& c) const { return !pools(c).empty(); }

  /// How many booleans this document can carry with an exact half false.
  std::size_t boolean_capacity() const {
    const std::size_t t = boolean_pool_.size();
    std::size_t f = 0;
    for (const auto& c : boolean_pool_) f += can_be_false(c) ? 1 : 0;
    return 2 * std::min(t, f) + (t > f ? 1 : 0);
  }

  std::vector<QaInstance> booleans(std::size_t n, Rng& rng, std::unordered_set<std::string>& seen,
                                   DocCounters& counters) const {
    std::vector<QaInstance> trues, falses;
    if (n == 0) return {};
    if (!boolean_pool_.empty()) {
      const std::size_t want_true = (n + 1) / 2;
      const std::size_t want_false = n / 2;
      for (std::size_t i : rng.sample_indices(boolean_pool_.size(),
                                              std::min(want_true, boolean_pool_.size()))) {
        const Candidate& c = boolean_pool_[i];
        const std::string& value = doc_.find_entity(c.anchor_entity_id)->value();
        QaInstance q = instantiate(c, rng, &value, true);
        if (seen.count(q.qa_id) || std::any_of(trues.begin(), trues.end(), [&](const QaInstance& t) {
              return t.qa_id == q.qa_id;
            })) {
          ++counters.duplicates;
          continue;
        }
        trues.push_back(std::move(q));
      }
      std::vector<std::size_t> order(boolean_pool_.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      for (std::size_t i : order) {
        if (falses.size() == want_false) break;
        const Candidate& c = boolean_pool_[i];
        const NegativePools p = pools(c);
        if (p.empty()) {
          ++counters.no_candidate;
          continue;
        }
        const std::string value = sample_negative(p, rng);
        QaInstance q = instantiate(c, rng, &value, false);
        if (seen.count(q.qa_id) || std::any_of(falses.begin(), falses.end(), [&](const QaInstance& f) {
              return f.qa_id == q.qa_id;
            })) {
          ++counters.duplicates;
          continue;
        }
        falses.push_back(std::move(q));
      }
    }
    const std::size_t f = std::min(falses.size(), trues.size());
    const std::size_t t = std::min(trues.size(), f + 1);
    trues.resize(t);
    falses.resize(f);
    if (t + f < n) counters.boolean_short += n - (t + f);
    std::vector<QaInstance> out;
    for (auto& q : trues) {
      seen.insert(q.qa_id);
      out.push_back(std::move(q));
    }
    for (auto& q : falses) {
      seen.insert(q.qa_id);
      out.push_back(std::move(q));
    }
    return out;
  }

 private:
  NegativePools pools(const Candidate& c) const {
    return negative_pools(*doc_.find_entity(c.anchor_entity_id), ds_, index_, doc_, c.true_answers);
  }

  const Document& doc_;
  const KieDataset& ds_;
  const ValueIndex& index_;
  std::vector<Candidate> extractive_;
  std::vector<Candidate> boolean_pool_;
};

struct DocOutput {
  std::vector<QaInstance> extractive;
  std::vector<QaInstance> booleans;
  std::size_t boolean_capacity = 0;
  DocCounters counters;
  std::unordered_set<std::string> seen;
};

void sort_instances(std::vector<QaInstance>& v) {
  std::sort(v.begin(), v.end(), [](const QaInstance& a, const QaInstance& b) {
    return std::tie(a.doc_id, a.template_id, a.qa_id) < std::tie(b.doc_id, b.template_id, b.qa_id);
  });
}

}  // namespace

GenerationResult generate(const KieDataset& dataset, const TemplateSuite& suite,
                          const GenerationConfig& config, std::size_t jobs) {
  if (!config.seed) {
    throw Error(ErrorKind::invalid_argument, "generation needs an explicit seed");
  }
  if (config.false_fraction != 0.5) {
    throw Error(ErrorKind::invalid_argument, "false_fraction must be 0.5");
  }
  const auto issues = validate_suite(suite, dataset.ontology);
  if (has_errors(issues)) {
    std::string msg = "template suite does not match the dataset ontology";
    for (const auto& i : issues) msg += "\n  " + i.location + ": " + i.message;
    throw Error(ErrorKind::schema, msg);
  }
  const std::uint64_t seed = *config.seed;
  const ValueIndex index(dataset);
  const std::size_t n_docs = dataset.documents.size();
  std::vector<DocOutput> outputs(n_docs);
  GenerationResult result;

  if (config.strategy == Strategy::per_entity) {
    parallel_for(n_docs, jobs, [&](std::size_t i) {
      const Document& doc = dataset.documents[i];
      DocOutput& out = outputs[i];
      DocGenerator gen(doc, dataset, index, suite, config.single_page_only);
      Rng rng = Rng::derive(seed, doc.doc_id);

      std::unordered_map<std::string, std::vector<const Candidate*>> by_anchor;
      for (const auto& c : gen.extractive()) by_anchor[c.anchor_entity_id].push_back(&c);
      for (const auto& e : doc.entities) {
        auto it = by_anchor.find(e.entity_id);
        if (it == by_anchor.end()) continue;
        const Candidate& pick = *it->second[rng.index(it->second.size())];
        QaInstance q = gen.instantiate(pick, rng, nullptr, true);
        if (!out.seen.insert(q.qa_id).second) {
          ++out.counters.duplicates;
          continue;
        }
        out.extractive.push_back(std::move(q));
      }
      out.booleans = gen.booleans(config.boolean_count_per_doc, rng, out.seen, out.counters);
    });
  } else {
    // Enumerate everything, then sample the quotas with one global stream and
    // build each document's booleans from its own stream.
    std::vector<std::unique_ptr<DocGenerator>> gens(n_docs);
    parallel_for(n_docs, jobs, [&](std::size_t i) {
      const Document& doc = dataset.documents[i];
      DocOutput& out = outputs[i];
      gens[i] = std::make_unique<DocGenerator>(doc, dataset, index, suite, config.single_page_only);
      Rng rng = Rng::derive(seed, doc.doc_id);
      for (const auto& c : gens[i]->extractive()) {
        QaInstance q = gens[i]->instantiate(c, rng, nullptr, true);
        if (!out.seen.insert(q.qa_id).second) {
          ++out.counters.duplicates;
          continue;
        }
        out.extractive.push_back(std::move(q));
      }
      out.boolean_capacity = gens[i]->boolean_capacity();
    });

    std::vector<std::pair<std::size_t, std::size_t>> extractive_refs;  // (doc, index)
    for (std::size_t d = 0; d < n_docs; ++d) {
      sort_instances(outputs[d].extractive);
      for (std::size_t k = 0; k < outputs[d].extractive.size(); ++k) extractive_refs.emplace_back(d, k);
    }
    if (config.extractive_quota) {
      const std::size_t quota = *config.extractive_quota;
      if (quota > extractive_refs.size()) {
        result.warnings.push_back("extractive_quota " + std::to_string(quota) + " exceeds the " +
                                  std::to_string(extractive_refs.size()) +
                                  " enumerated extractive questions; keeping all");
      } else {
        Rng quota_rng = Rng::derive(seed, "#extractive-quota");
        std::vector<std::vector<bool>> keep(n_docs);
        for (std::size_t d = 0; d < n_docs; ++d) keep[d].assign(outputs[d].extractive.size(), false);
        for (std::size_t k : quota_rng.sample_indices(extractive_refs.size(), quota)) {
          keep[extractive_refs[k].first][extractive_refs[k].second] = true;
        }
        for (std::size_t d = 0; d < n_docs; ++d) {
          std::vector<QaInstance> kept;
          for (std::size_t k = 0; k < outputs[d].extractive.size(); ++k) {
            if (keep[d][k]) {
              kept.push_back(std::move(outputs[d].extractive[k]));
            } else {
              outputs[d].seen.erase(outputs[d].extractive[k].qa_id);
            }
          }
          outputs[d].extractive = std::move(kept);
        }
      }
    }

    std::vector<std::size_t> boolean_counts(n_docs);
    std::size_t capacity = 0;
    for (std::size_t d = 0; d < n_docs; ++d) {
      boolean_counts[d] = outputs[d].boolean_capacity;
      capacity += outputs[d].boolean_capacity;
    }
    if (config.boolean_quota) {
      const std::size_t quota = *config.boolean_quota;
      if (quota > capacity) {
        result.warnings.push_back("boolean_quota " + std::to_string(quota) + " exceeds the " +
                                  std::to_string(capacity) +
                                  " balanced boolean questions available; keeping all");
      } else {
        // Each unit of capacity is one boolean slot of one document.
        std::vector<std::size_t> owner;
        for (std::size_t d = 0; d < n_docs; ++d) owner.insert(owner.end(), boolean_counts[d], d);
        std::fill(boolean_counts.begin(), boolean_counts.end(), 0);
        Rng quota_rng = Rng::derive(seed, "#boolean-quota");
        for (std::size_t k : quota_rng.sample_indices(owner.size(), quota)) ++boolean_counts[owner[k]];
      }
    }
    parallel_for(n_docs, jobs, [&](std::size_t i) {
      DocOutput& out = outputs[i];
      Rng rng = Rng::derive(seed, dataset.documents[i].doc_id + "#bool");
      out.booleans = gens[i]->booleans(boolean_counts[i], rng, out.seen, out.counters);
    });
  }

  DocCounters total;
  QaDataset& qads = result.dataset;
  for (auto& out : outputs) {
    total.no_candidate += out.counters.no_candidate;
    total.duplicates += out.counters.duplicates;
    total.boolean_short += out.counters.boolean_short;
    for (auto& q : out.extractive) qads.instances.push_back(std::move(q));
    for (auto& q : out.booleans) qads.instances.push_back(std::move(q));
  }
  sort_instances(qads.instances);
  if (total.no_candidate) {
    result.warnings.push_back(std::to_string(total.no_candidate) +
                              " false boolean attempts skipped: no negative candidate");
  }
  if (total.boolean_short) {
    result.warnings.push_back(std::to_string(total.boolean_short) +
                              " requested boolean questions could not be built with an exact half false");
  }
  if (total.duplicates) {
    result.warnings.push_back(std::to_string(total.duplicates) + " duplicate questions dropped");
  }

  qads.name = dataset.name;
  qads.provenance.config_digest = sha256_hex(serialize_generation_config(config));
  qads.provenance.suite_digest = sha256_hex(serialize_template_suite(suite));
  qads.provenance.source_digest = sha256_hex(serialize_kie_dataset(dataset));
  return result;
}

}  // namespace k2q
