#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hateharness/corpus.hpp"

namespace hateharness::deploy {

using corpus::DatasetBundle;
using corpus::KeywordLexicon;
using corpus::Label;
using corpus::TweetRecord;

struct ErrorBreakdown {
  std::size_t type_i = 0;   // false positives
  std::size_t type_ii = 0;  // false negatives
};

inline ErrorBreakdown error_breakdown(std::span<const Label> y_true,
                                      std::span<const Label> y_pred) {
  if (y_true.size() != y_pred.size())
    throw std::runtime_error("error_breakdown: length mismatch");
  ErrorBreakdown out;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == y_pred[i]) continue;
    (y_pred[i] == Label::Hate ? out.type_i : out.type_ii) += 1;
  }
  return out;
}

enum class TrimRuleKind { UsernameOnlyMatch, RelevanceFlagFalse, Custom };

struct TrimRule {
  TrimRuleKind kind;
  std::string name;
  std::function<bool(const TweetRecord&)> predicate;  // Custom only

  static TrimRule username_only_match() {
    return {TrimRuleKind::UsernameOnlyMatch, "username_only_match", {}};
  }
  static TrimRule relevance_flag_false() {
    return {TrimRuleKind::RelevanceFlagFalse, "relevance_flag_false", {}};
  }
  static TrimRule custom(std::string name, std::function<bool(const TweetRecord&)> pred) {
    return {TrimRuleKind::Custom, std::move(name), std::move(pred)};
  }
};

inline TrimRule trim_rule_from_name(std::string_view name) {
  if (name == "username_only_match") return TrimRule::username_only_match();
  if (name == "relevance_flag_false") return TrimRule::relevance_flag_false();
  throw std::runtime_error("unknown trim rule: '" + std::string(name) + "'");
}

struct TrimReportEntry {
  std::string id;
  std::string rule;
};

struct TrimResult {
  DatasetBundle bundle;
  std::vector<TrimReportEntry> removed;
};

namespace detail_trim {

inline bool applies(const TrimRule& rule, const TweetRecord& r, const KeywordLexicon& lexicon) {
  switch (rule.kind) {
    case TrimRuleKind::UsernameOnlyMatch: {
      const auto matches = corpus::match_keywords(r, lexicon);
      if (matches.empty()) return false;
      for (const auto& m : matches)
        if (m.provenance != corpus::Provenance::Username) return false;
      return true;
    }
    case TrimRuleKind::RelevanceFlagFalse:
      return r.relevance_flag.has_value() && !*r.relevance_flag;
    case TrimRuleKind::Custom:
      return rule.predicate(r);
  }
  return false;
}

}  // namespace detail_trim

// Removes every record matching any rule; the first matching rule (in the
// given order) is named in the removal report.
inline TrimResult trim(const DatasetBundle& bundle, std::span<const TrimRule> rules,
                       const KeywordLexicon& lexicon) {
  if (rules.empty()) throw std::runtime_error("trim: no rules given");
  for (const auto& r : bundle.records)
    if (!r.label) throw std::runtime_error("trim: unlabeled record '" + r.id + "'");

  TrimResult out;
  out.bundle.name = bundle.name;
  out.bundle.source = bundle.source + " (trimmed)";
  for (const auto& r : bundle.records) {
    const TrimRule* hit = nullptr;
    for (const auto& rule : rules)
      if (detail_trim::applies(rule, r, lexicon)) {
        hit = &rule;
        break;
      }
    if (hit) {
      out.removed.push_back({r.id, hit->name});
    } else {
      out.bundle.records.push_back(r);
    }
  }
  return out;
}

// Duplicates every hate record `factor` times in place (original plus
// factor-1 copies with fresh ids that name the original). Non-hate records
// are untouched.
inline DatasetBundle augment_duplicate_hate(const DatasetBundle& bundle, int factor) {
  if (factor < 2) throw std::runtime_error("augment: factor must be at least 2");
  for (const auto& r : bundle.records)
    if (!r.label) throw std::runtime_error("augment: unlabeled record '" + r.id + "'");

  DatasetBundle out;
  out.name = bundle.name;
  out.source = bundle.source + " (hate x" + std::to_string(factor) + ")";
  for (const auto& r : bundle.records) {
    out.records.push_back(r);
    if (*r.label != Label::Hate) continue;
    for (int k = 1; k < factor; ++k) {
      TweetRecord dup = r;
      dup.id = r.id + "~dup" + std::to_string(k);
      out.records.push_back(std::move(dup));
    }
  }
  corpus::validate_bundle(out);
  return out;
}

}  // namespace hateharness::deploy
