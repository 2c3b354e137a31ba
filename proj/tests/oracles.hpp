#pragma once

// Deliberately naive reference implementations. None of them share code with
// the library beyond the data model; they trade speed for obviousness.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "k2q/generator.hpp"
#include "k2q/kie_model.hpp"
#include "k2q/text.hpp"

namespace k2q::oracle {

/// Memoized recursion straight from the edit-distance definition. Input is
/// treated as bytes, so callers keep it ASCII.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    return memo[key] = best;
  };
  return go(0, 0);
}

inline double anls(const std::string& p, const std::vector<std::string>& golds, double tau = 0.5) {
  double best = 0;
  for (const auto& g : golds) {
    const std::size_t len = std::max(p.size(), g.size());
    const double nl = len == 0 ? 0.0 : static_cast<double>(edit_distance(p, g)) / static_cast<double>(len);
    best = std::max(best, nl < tau ? 1.0 - nl : 0.0);
  }
  return best;
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Every contiguous window scored, best kept under (distance/length, start,
/// window size) ordering with exact fraction comparison.
inline std::vector<std::string> link(const Entity& e, const Document& d) {
  struct Best {
    std::size_t dist, len, start, size;
  };
  std::optional<Best> best;
  const std::string target = lower(e.raw_value);
  for (std::size_t i = 0; i < d.tokens.size(); ++i) {
    std::string joined;
    for (std::size_t j = i; j < d.tokens.size(); ++j) {
      if (j > i) joined += " ";
      joined += lower(d.tokens[j].text);
      const std::size_t len = std::max(joined.size(), target.size());
      const std::size_t dist = edit_distance(joined, target);
      const Best cand{dist, len, i, j - i + 1};
      auto better = [](const Best& x, const Best& y) {
        const auto lhs = x.dist * y.len, rhs = y.dist * x.len;
        if (lhs != rhs) return lhs < rhs;
        if (x.start != y.start) return x.start < y.start;
        return x.size < y.size;
      };
      if (!best || better(cand, *best)) best = cand;
    }
  }
  std::vector<std::string> out;
  if (!best || 10 * best->dist > 3 * best->len) return out;
  for (std::size_t k = best->start; k < best->start + best->size; ++k) out.push_back(d.tokens[k].token_id);
  return out;
}

using Precise = boost::multiprecision::cpp_bin_float_50;

inline Precise perplexity(const std::vector<double>& logprobs) {
  Precise sum = 0;
  for (double lp : logprobs) sum += Precise(lp);
  return boost::multiprecision::exp(-sum / Precise(logprobs.size()));
}

/// Fleiss' kappa with every intermediate kept as a ratio of long doubles.
inline double fleiss(const std::vector<std::vector<int>>& m) {
  const double N = static_cast<double>(m.size());
  double n = 0;
  for (int c : m[0]) n += c;
  const std::size_t k = m[0].size();
  long double pbar = 0, pe = 0;
  for (const auto& row : m) {
    long double agree = 0;
    for (int c : row) agree += static_cast<long double>(c) * (c - 1);
    pbar += agree / (n * (n - 1));
  }
  pbar /= N;
  for (std::size_t j = 0; j < k; ++j) {
    long double col = 0;
    for (const auto& row : m) col += row[j];
    const long double p = col / (N * n);
    pe += p * p;
  }
  return static_cast<double>((pbar - pe) / (1 - pe));
}

/// S1 ∪ S2 ∪ S3 for a false candidate tested against `target`.
inline std::set<std::string> negative_union(const Entity& target, const KieDataset& ds,
                                            const Document& doc) {
  std::set<std::string> out;
  for (const auto& d : ds.documents) {
    for (const auto& e : d.entities) {
      if (e.type_name == target.type_name) out.insert(e.value());
    }
  }
  std::optional<std::string> parent;
  for (const auto& t : ds.ontology) {
    if (t.name == target.type_name) parent = t.parent;
  }
  const FormatClass format = infer_format_class(target.value());
  for (const auto& e : doc.entities) {
    if (e.entity_id == target.entity_id) continue;
    for (const auto& t : ds.ontology) {
      if (parent && t.name == e.type_name && t.parent == parent) out.insert(e.value());
    }
    if (infer_format_class(e.value()) == format) out.insert(e.value());
  }
  out.erase("");
  return out;
}

/// Line items of `doc` consistent with a line-item question's bindings: every
/// entity-valued binding matches an entity of that slot's type, and the
/// ordinal (if any) matches the position.
inline std::size_t referents(const QaInstance& q, const Template& t, const Document& doc) {
  std::size_t count = 0;
  for (const auto& li : doc.line_items) {
    bool ok = true;
    for (const auto& s : t.slots) {
      if (s.kind == SlotKind::ordinal_position) {
        ok = ok && std::to_string(li.position) == q.bindings.at(s.role);
      } else if (s.kind == SlotKind::entity_value) {
        bool found = false;
        for (const auto& id : li.entity_ids) {
          const Entity* e = doc.find_entity(id);
          found = found || (e->type_name == s.type_name && e->value() == q.bindings.at(s.role));
        }
        ok = ok && found;
      }
    }
    if (ok) ++count;
  }
  return count;
}

/// Values that would make a boolean instance true: every value of the target
/// type in the document for document scope, the target values of the single
/// consistent line item otherwise. Compared after case and space folding.
inline std::set<std::string> true_values(const QaInstance& q, const Template& t, const Document& doc) {
  std::set<std::string> out;
  if (t.scope == Scope::document) {
    for (const auto& e : doc.entities) {
      if (e.type_name == t.target_type) out.insert(text::normalize_spaces_lower(e.value()));
    }
    return out;
  }
  for (const auto& li : doc.line_items) {
    Document single = doc;
    single.line_items = {li};
    if (referents(q, t, single) != 1) continue;
    for (const auto& id : li.entity_ids) {
      const Entity* e = doc.find_entity(id);
      if (e->type_name == t.target_type) out.insert(text::normalize_spaces_lower(e->value()));
    }
  }
  return out;
}

/// Checks a "No" instance: the tested value lies in S1 ∪ S2 ∪ S3 of one of
/// the compared entities and matches none of the true values. Empty on
/// success, otherwise the reason.
inline std::string check_negative(const QaInstance& q, const Template& t, const KieDataset& ds) {
  const Document* doc = ds.find_document(q.doc_id);
  if (!doc) return "unknown document";
  if (!q.candidate_value) return "no candidate value";
  std::set<std::string> pool;
  for (const auto& id : q.answer_entity_ids) {
    const auto u = negative_union(*doc->find_entity(id), ds, *doc);
    pool.insert(u.begin(), u.end());
  }
  if (!pool.count(*q.candidate_value)) return "'" + *q.candidate_value + "' is in none of the pools";
  if (true_values(q, t, *doc).count(text::normalize_spaces_lower(*q.candidate_value))) {
    return "'" + *q.candidate_value + "' is a true answer";
  }
  return "";
}

}  // namespace k2q::oracle
