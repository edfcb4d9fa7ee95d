#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hateharness/detail/csv.hpp"
#include "hateharness/detail/text.hpp"

namespace hateharness::corpus {

inline constexpr std::size_t kMaxTweetChars = 280;

// Index convention used throughout: logit/label index 0 is non-hate, 1 is hate.
enum class Label { NonHate = 0, Hate = 1 };

inline std::string_view to_string(Label l) { return l == Label::Hate ? "hate" : "non_hate"; }

inline Label label_from_string(std::string_view s) {
  if (s == "hate") return Label::Hate;
  if (s == "non_hate") return Label::NonHate;
  throw std::runtime_error("unknown label: '" + std::string(s) + "'");
}

enum class Scenario {
  // hate class
  GoBack,
  ExplicitSlur,
  BlameChina,
  ExplicitOriginClaim,
  ImplicitOriginTerm,
  OtherHate,
  // non-hate class
  Counterspeech,
  ConspiracyOrRumor,
  Reference,
  Discussion,
  PoliticalRumor,
  UnrelatedHashtagUse,
  AlternateMeaning,
  OffTopic,
};

inline constexpr std::array<std::pair<Scenario, std::string_view>, 14> kScenarioNames{{
    {Scenario::GoBack, "go_back"},
    {Scenario::ExplicitSlur, "explicit_slur"},
    {Scenario::BlameChina, "blame_china"},
    {Scenario::ExplicitOriginClaim, "explicit_origin_claim"},
    {Scenario::ImplicitOriginTerm, "implicit_origin_term"},
    {Scenario::OtherHate, "other_hate"},
    {Scenario::Counterspeech, "counterspeech"},
    {Scenario::ConspiracyOrRumor, "conspiracy_or_rumor"},
    {Scenario::Reference, "reference"},
    {Scenario::Discussion, "discussion"},
    {Scenario::PoliticalRumor, "political_rumor"},
    {Scenario::UnrelatedHashtagUse, "unrelated_hashtag_use"},
    {Scenario::AlternateMeaning, "alternate_meaning"},
    {Scenario::OffTopic, "off_topic"},
}};

// Every scenario tag belongs to exactly one class.
inline Label scenario_class(Scenario s) {
  return static_cast<int>(s) <= static_cast<int>(Scenario::OtherHate) ? Label::Hate
                                                                      : Label::NonHate;
}

inline std::string_view to_string(Scenario s) {
  for (const auto& [tag, name] : kScenarioNames)
    if (tag == s) return name;
  throw std::logic_error("unmapped scenario tag");
}

inline Scenario scenario_from_string(std::string_view s) {
  for (const auto& [tag, name] : kScenarioNames)
    if (name == s) return tag;
  throw std::runtime_error("unknown scenario: '" + std::string(s) + "'");
}

struct TweetRecord {
  std::string id;
  std::string text;
  std::string author_handle;
  std::string created_at;  // ISO-8601, UTC
  std::optional<Label> label;
  std::optional<Scenario> scenario;
  std::optional<bool> relevance_flag;

  bool operator==(const TweetRecord&) const = default;
};

inline void validate_record(const TweetRecord& r) {
  if (r.id.empty()) throw std::runtime_error("record has empty id");
  if (detail::utf8_length(r.text) > kMaxTweetChars)
    throw std::runtime_error("record '" + r.id + "': text exceeds 280 characters");
  if (r.created_at.size() < 10 || r.created_at[4] != '-' || r.created_at[7] != '-')
    throw std::runtime_error("record '" + r.id + "': created_at is not ISO-8601");
  if (r.scenario) {
    if (!r.label)
      throw std::runtime_error("record '" + r.id + "': scenario tag without label");
    if (scenario_class(*r.scenario) != *r.label)
      throw std::runtime_error("record '" + r.id + "': scenario class does not match label");
  }
}

enum class Category { Covid, HateChina, HateAsiaOther, Obfuscated, Extended };

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::Covid: return "covid";
    case Category::HateChina: return "hate_china";
    case Category::HateAsiaOther: return "hate_asia_other";
    case Category::Obfuscated: return "obfuscated";
    case Category::Extended: return "extended";
  }
  throw std::logic_error("unmapped category");
}

struct KeywordEntry {
  std::string surface;  // lowercase, '#' stripped
  Category category;
  bool hashtag_only;
};

struct KeywordLexicon {
  std::vector<KeywordEntry> entries;
  std::map<char, std::vector<char>> substitution_map;  // digit -> candidate letters
};

enum class Provenance { Text, Hashtag, Username };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Text: return "text";
    case Provenance::Hashtag: return "hashtag";
    case Provenance::Username: return "username";
  }
  throw std::logic_error("unmapped provenance");
}

struct KeywordMatch {
  std::string record_id;
  std::string surface;  // matched form, lowercased; hashtag hits keep the '#'
  Category category;
  Provenance provenance;

  bool operator==(const KeywordMatch&) const = default;
};

struct DatasetBundle {
  std::string name;
  std::vector<TweetRecord> records;
  std::string source;
};

struct DatasetStats {
  std::size_t n_hate = 0;
  std::size_t n_non_hate = 0;
  std::size_t n_total = 0;
  double portion_hate = 0.0;
  double portion_non_hate = 0.0;
};

inline void validate_bundle(const DatasetBundle& b) {
  std::set<std::string_view> seen;
  for (const auto& r : b.records)
    if (!seen.insert(r.id).second)
      throw std::runtime_error("bundle '" + b.name + "': duplicate id '" + r.id + "'");
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

enum class FileFormat { Csv, Jsonl };

inline FileFormat format_from_path(const std::filesystem::path& p) {
  return p.extension() == ".jsonl" ? FileFormat::Jsonl : FileFormat::Csv;
}

inline const std::array<std::string, 7>& dataset_columns() {
  static const std::array<std::string, 7> cols{
      "id", "text", "author_handle", "created_at", "label", "scenario", "relevance_flag"};
  return cols;
}

namespace detail_io {

inline TweetRecord record_from_fields(std::span<const std::string> f, const std::string& where) {
  TweetRecord r;
  r.id = f[0];
  r.text = f[1];
  r.author_handle = f[2];
  r.created_at = f[3];
  try {
    if (!f[4].empty()) r.label = label_from_string(f[4]);
    if (!f[5].empty()) r.scenario = scenario_from_string(f[5]);
    if (!f[6].empty()) {
      if (f[6] != "true" && f[6] != "false") throw std::runtime_error("relevance_flag must be true/false");
      r.relevance_flag = (f[6] == "true");
    }
    validate_record(r);
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
  return r;
}

}  // namespace detail_io

inline DatasetBundle load_dataset(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path.string());

  DatasetBundle bundle;
  bundle.name = path.stem().string();
  bundle.source = "file:" + path.string();
  std::set<std::string> ids;

  auto add = [&](TweetRecord r, const std::string& where) {
    if (!ids.insert(r.id).second)
      throw std::runtime_error(where + ": duplicate id '" + r.id + "'");
    bundle.records.push_back(std::move(r));
  };

  if (format == FileFormat::Csv) {
    auto rows = detail::read_csv(in);
    if (rows.empty()) throw std::runtime_error(path.string() + ": missing header row");
    const auto& cols = dataset_columns();
    if (!std::equal(cols.begin(), cols.end(), rows[0].begin(), rows[0].end()))
      throw std::runtime_error(path.string() + ": unexpected header row");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const std::string where = path.string() + ": row " + std::to_string(i + 1);
      if (rows[i].size() != cols.size())
        throw std::runtime_error(where + ": expected " + std::to_string(cols.size()) +
                                 " fields, got " + std::to_string(rows[i].size()));
      add(detail_io::record_from_fields(rows[i], where), where);
    }
  } else {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim(line).empty()) continue;
      const std::string where = path.string() + ": line " + std::to_string(lineno);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const std::exception& e) {
        throw std::runtime_error(where + ": " + e.what());
      }
      std::array<std::string, 7> f{};
      const auto& cols = dataset_columns();
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (!j.contains(cols[k]) || j[cols[k]].is_null()) continue;
        const auto& v = j[cols[k]];
        if (v.is_boolean()) {
          f[k] = v.get<bool>() ? "true" : "false";
        } else if (v.is_string()) {
          f[k] = v.get<std::string>();
        } else {
          throw std::runtime_error(where + ": field '" + cols[k] + "' has unexpected type");
        }
      }
      add(detail_io::record_from_fields(f, where), where);
    }
  }
  return bundle;
}

inline void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& path,
                         FileFormat format) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path.string());

  auto fields = [](const TweetRecord& r) {
    std::vector<std::string> f{r.id, r.text, r.author_handle, r.created_at, "", "", ""};
    if (r.label) f[4] = std::string(to_string(*r.label));
    if (r.scenario) f[5] = std::string(to_string(*r.scenario));
    if (r.relevance_flag) f[6] = *r.relevance_flag ? "true" : "false";
    return f;
  };

  if (format == FileFormat::Csv) {
    const auto& cols = dataset_columns();
    detail::write_csv_row(out, std::span<const std::string>(cols.data(), cols.size()));
    for (const auto& r : bundle.records) detail::write_csv_row(out, fields(r));
  } else {
    for (const auto& r : bundle.records) {
      nlohmann::json j;
      j["id"] = r.id;
      j["text"] = r.text;
      j["author_handle"] = r.author_handle;
      j["created_at"] = r.created_at;
      j["label"] = r.label ? nlohmann::json(std::string(to_string(*r.label))) : nlohmann::json();
      j["scenario"] =
          r.scenario ? nlohmann::json(std::string(to_string(*r.scenario))) : nlohmann::json();
      j["relevance_flag"] = r.relevance_flag ? nlohmann::json(*r.relevance_flag) : nlohmann::json();
      out << j.dump() << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Statistics and concatenation
// ---------------------------------------------------------------------------

inline DatasetStats compute_stats(const DatasetBundle& bundle) {
  std::vector<std::string> unlabeled;
  DatasetStats s;
  for (const auto& r : bundle.records) {
    if (!r.label) {
      unlabeled.push_back(r.id);
      continue;
    }
    (*r.label == Label::Hate ? s.n_hate : s.n_non_hate) += 1;
  }
  if (!unlabeled.empty()) {
    std::string msg = "unlabeled records in '" + bundle.name + "':";
    for (std::size_t i = 0; i < unlabeled.size() && i < 10; ++i) msg += " " + unlabeled[i];
    if (unlabeled.size() > 10)
      msg += " (+" + std::to_string(unlabeled.size() - 10) + " more)";
    throw std::runtime_error(msg);
  }
  s.n_total = s.n_hate + s.n_non_hate;
  if (s.n_total > 0) {
    s.portion_hate = static_cast<double>(s.n_hate) / static_cast<double>(s.n_total);
    s.portion_non_hate = static_cast<double>(s.n_non_hate) / static_cast<double>(s.n_total);
  }
  return s;
}

inline DatasetBundle concat_datasets(const DatasetBundle& a, const DatasetBundle& b) {
  if (a.records.empty()) return b;
  if (b.records.empty()) return a;

  std::set<std::string_view> ids_a;
  for (const auto& r : a.records) ids_a.insert(r.id);
  bool collision = std::any_of(b.records.begin(), b.records.end(),
                               [&](const TweetRecord& r) { return ids_a.contains(r.id); });

  DatasetBundle out;
  out.name = a.name + "+" + b.name;
  out.source = "concat(" + a.name + ", " + b.name + ")";
  out.records.reserve(a.records.size() + b.records.size());
  for (const auto* src : {&a, &b}) {
    for (TweetRecord r : src->records) {
      if (collision) r.id = src->name + "/" + r.id;
      out.records.push_back(std::move(r));
    }
  }
  validate_bundle(out);
  return out;
}

// ---------------------------------------------------------------------------
// Keyword lexicon
// ---------------------------------------------------------------------------

inline KeywordLexicon build_lexicon() {
  KeywordLexicon lex;
  lex.substitution_map = {{'3', {'e'}}, {'1', {'l', 'i'}}, {'0', {'o'}}};

  auto add = [&lex](std::string surface, Category cat) {
    bool hashtag = !surface.empty() && surface.front() == '#';
    if (hashtag) surface.erase(0, 1);
    surface = detail::to_lower_ascii(surface);
    for (const auto& e : lex.entries)
      if (e.surface == surface && e.category == cat) return;  // no duplicate pairs
    lex.entries.push_back({std::move(surface), cat, hashtag});
  };

  for (const char* s : {"coronavirus", "covid-19", "covid19", "corona virus"})
    add(s, Category::Covid);

  for (const char* s :
       {"#CCPVirus", "#ChinaDidThis", "#ChinaLiedPeopleDied", "#ChinaVirus", "#ChineseVirus",
        "Chinese virus", "#ChineseBioterrorism", "#FuckChina", "#KungFlu", "#MakeChinaPay",
        "#wuhanflu", "#wuhanvirus", "wuhan virus", "chink", "chinky", "chocky", "cina",
        "communistvirus", "cokin"})
    add(s, Category::HateChina);

  for (const char* s :
       {"churka", "ting tong", "coolie", "dink", "slant", "slant eye", "slopehead", "yokel"})
    add(s, Category::HateAsiaOther);

  for (const char* s : {"ch1nk", "ch1nky", "ch0nky", "c1na", "c0kin", "s1ant", "y0kel"})
    add(s, Category::Obfuscated);

  for (const char* s :
       {"ching chong", "chingchong", "ch1ng chong", "ch1ng ch0ng", "chicom", "ch1com"})
    add(s, Category::Extended);

  return lex;
}

inline std::string lexicon_tsv(const KeywordLexicon& lex) {
  std::string out;
  for (const auto& e : lex.entries) {
    out += e.surface;
    out += '\t';
    out += to_string(e.category);
    out += '\t';
    out += e.hashtag_only ? "true" : "false";
    out += '\n';
  }
  return out;
}

// All combinations of keeping each digit or replacing it with a candidate
// letter. The literal surface is always element 0.
inline std::vector<std::string> expand_digits(std::string_view word,
                                              const std::map<char, std::vector<char>>& subs) {
  std::vector<std::string> out{std::string(word)};
  for (std::size_t pos = 0; pos < word.size(); ++pos) {
    auto it = subs.find(word[pos]);
    if (it == subs.end()) continue;
    std::vector<std::string> next;
    next.reserve(out.size() * (it->second.size() + 1));
    for (const auto& base : out) {
      next.push_back(base);
      for (char letter : it->second) {
        std::string variant = base;
        variant[pos] = letter;
        next.push_back(std::move(variant));
      }
    }
    out = std::move(next);
  }
  // dedupe, keeping first occurrence order
  std::vector<std::string> uniq;
  for (auto& s : out)
    if (std::find(uniq.begin(), uniq.end(), s) == uniq.end()) uniq.push_back(std::move(s));
  return uniq;
}

// ---------------------------------------------------------------------------
// Keyword matching
// ---------------------------------------------------------------------------

namespace detail_match {

// Approximation of Unicode word boundaries good enough for this lexicon:
// ASCII alphanumerics and '_' are word characters, as is any non-ASCII
// code point that is not punctuation, an emoji or another symbol.
inline bool is_word_cp(char32_t cp) {
  if (cp < 0x80) return detail::is_ascii_alnum(cp) || cp == '_';
  if (cp >= 0x2000 && cp <= 0x206F) return false;  // general punctuation
  if (cp >= 0x2600 && cp <= 0x27BF) return false;  // misc symbols, dingbats
  if (cp >= 0xFE00 && cp <= 0xFE0F) return false;  // variation selectors
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;
  return true;
}

struct TextToken {
  std::string word;  // lowercased
  bool hashtag;      // immediately preceded by '#'
};

inline std::vector<TextToken> word_tokens(std::string_view text) {
  std::vector<TextToken> tokens;
  std::string word;
  bool hashtag = false;
  char32_t prev = 0;
  for (std::size_t i = 0; i < text.size();) {
    auto [cp, len] = detail::utf8_decode(text, i);
    if (is_word_cp(cp)) {
      if (word.empty()) hashtag = (prev == '#');
      if (cp < 0x80) {
        word.push_back(detail::ascii_lower(static_cast<char>(cp)));
      } else {
        detail::utf8_append(word, cp);
      }
    } else if (!word.empty()) {
      tokens.push_back({std::move(word), hashtag});
      word.clear();
    }
    prev = cp;
    i += len;
  }
  if (!word.empty()) tokens.push_back({std::move(word), hashtag});
  return tokens;
}

inline std::vector<std::string> surface_words(std::string_view surface) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : surface) {
    if (detail::is_ascii_alnum(static_cast<char32_t>(c))) {
      cur.push_back(detail::ascii_lower(c));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace detail_match

// Case-insensitive whole-word matching. Hashtag-only surfaces require the '#'
// marker; plain surfaces match hashtagged and plain occurrences alike. Digits
// in a surface are tried both literally and expanded through the substitution
// map. One match is reported per distinct matched form and provenance; when
// several entries produce the same form, the earliest entry in the lexicon
// supplies the category.
inline std::vector<KeywordMatch> match_keywords(const TweetRecord& record,
                                                const KeywordLexicon& lexicon) {
  using detail_match::surface_words;
  using detail_match::word_tokens;

  const auto tokens = word_tokens(record.text);
  const std::string handle = detail::to_lower_ascii(record.author_handle);
  const std::string text_lower = detail::to_lower_ascii(record.text);

  std::vector<KeywordMatch> matches;
  std::set<std::pair<std::string, Provenance>> seen;
  auto emit = [&](std::string surface, Category cat, Provenance prov) {
    if (seen.emplace(surface, prov).second)
      matches.push_back({record.id, std::move(surface), cat, prov});
  };

  for (const auto& entry : lexicon.entries) {
    const auto base_words = surface_words(entry.surface);
    if (base_words.empty()) continue;

    // expand each surface word independently, then take the cartesian product
    std::vector<std::vector<std::string>> patterns{{}};
    for (const auto& w : base_words) {
      auto variants = expand_digits(w, lexicon.substitution_map);
      std::vector<std::vector<std::string>> next;
      for (const auto& p : patterns)
        for (const auto& v : variants) {
          auto seq = p;
          seq.push_back(v);
          next.push_back(std::move(seq));
        }
      patterns = std::move(next);
    }

    bool text_hit = false;
    for (const auto& seq : patterns) {
      if (seq.size() > tokens.size()) continue;
      for (std::size_t start = 0; start + seq.size() <= tokens.size(); ++start) {
        bool eq = true;
        for (std::size_t k = 0; k < seq.size(); ++k)
          if (tokens[start + k].word != seq[k]) {
            eq = false;
            break;
          }
        if (!eq) continue;
        if (entry.hashtag_only && !tokens[start].hashtag) continue;
        text_hit = true;
        std::string form = tokens[start].hashtag ? "#" : "";
        form += detail::join(seq, " ");
        emit(std::move(form), entry.category,
             tokens[start].hashtag ? Provenance::Hashtag : Provenance::Text);
      }
    }

    // Username provenance: the surface occurs in the handle and nowhere in
    // the text. Hashtag-only surfaces cannot occur in a handle ('#' marker).
    if (!text_hit && !entry.hashtag_only && !handle.empty()) {
      for (const auto& seq : patterns) {
        std::string joined = detail::join(seq, "");
        if (handle.find(joined) != std::string::npos &&
            text_lower.find(joined) == std::string::npos) {
          emit(std::move(joined), entry.category, Provenance::Username);
          break;
        }
      }
    }
  }
  return matches;
}

}  // namespace hateharness::corpus
