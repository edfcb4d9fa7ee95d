#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hateharness/corpus.hpp"
#include "hateharness/detail/rng.hpp"
#include "hateharness/detail/text.hpp"

namespace hateharness::preprocess {

// ---------------------------------------------------------------------------
// Tweet cleaning
// ---------------------------------------------------------------------------

struct CleanConfig {
  bool drop_mentions = true;
  bool drop_hashtags = true;
  bool drop_urls = true;
  bool drop_emojis = true;
};

// Code point ranges treated as emoji. The same table is documented in the
// README; the property tests carry an independent copy.
inline constexpr std::array<std::pair<char32_t, char32_t>, 5> kEmojiRanges{{
    {0x1F1E6, 0x1F1FF},  // regional indicator symbols (flags)
    {0x1F300, 0x1F5FF},  // miscellaneous symbols and pictographs
    {0x1F600, 0x1F64F},  // emoticons
    {0x1F680, 0x1F6FF},  // transport and map symbols
    {0x1F900, 0x1F9FF},  // supplemental symbols and pictographs
}};

inline bool is_emoji(char32_t cp) {
  for (const auto& [lo, hi] : kEmojiRanges)
    if (cp >= lo && cp <= hi) return true;
  return false;
}

namespace detail_clean {

inline bool is_token_char(char32_t cp) {
  if (cp < 0x80) return detail::is_ascii_alnum(cp) || cp == '_';
  return !is_emoji(cp);  // hashtags may carry non-ASCII words
}

inline bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\r' || cp == '\n';
}

inline bool marker_at(std::string_view s, std::size_t i, std::string_view marker) {
  if (i + marker.size() > s.size()) return false;
  for (std::size_t k = 0; k < marker.size(); ++k)
    if (detail::ascii_lower(s[i + k]) != marker[k]) return false;
  return true;
}

// One removal sweep. Deletions can splice the remainder into a fresh mention,
// hashtag or URL, so clean_tweet iterates this to a fixed point.
inline std::string sweep(std::string_view s, const CleanConfig& cfg) {
  std::string out;
  out.reserve(s.size());
  char32_t prev = ' ';
  std::size_t i = 0;
  while (i < s.size()) {
    const auto [cp, len] = detail::utf8_decode(s, i);
    const bool boundary = !detail::is_ascii_alnum(prev) && prev != '_';

    if (cfg.drop_urls && boundary &&
        (marker_at(s, i, "http://") || marker_at(s, i, "https://") || marker_at(s, i, "www."))) {
      while (i < s.size()) {
        const auto c = detail::utf8_decode(s, i);
        if (is_space(c.cp)) break;
        i += c.size;
      }
      prev = ' ';
      continue;
    }

    if ((cfg.drop_mentions && cp == '@') || (cfg.drop_hashtags && cp == '#')) {
      if (boundary) {
        std::size_t j = i + len;
        std::size_t consumed = 0;
        while (j < s.size()) {
          const auto c = detail::utf8_decode(s, j);
          if (!is_token_char(c.cp)) break;
          j += c.size;
          ++consumed;
        }
        if (consumed > 0) {  // a bare '@' or '#' stays
          i = j;
          prev = ' ';
          continue;
        }
      }
    }

    if (cfg.drop_emojis && is_emoji(cp)) {
      i += len;
      prev = cp;
      continue;
    }

    out.append(s.substr(i, len));
    prev = cp;
    i += len;
  }
  return out;
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // leading spaces dropped
  for (std::size_t i = 0; i < s.size();) {
    const auto [cp, len] = detail::utf8_decode(s, i);
    if (is_space(cp)) {
      if (!in_space) out.push_back(' ');
      in_space = true;
    } else {
      out.append(s.substr(i, len));
      in_space = false;
    }
    i += len;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace detail_clean

// Drops @mentions, #hashtags (marker and word), scheme-prefixed URLs and
// emoji, then collapses whitespace runs and trims. Idempotent.
inline std::string clean_tweet(std::string_view text, const CleanConfig& config = {}) {
  std::string cur(text);
  for (;;) {
    std::string next = detail_clean::sweep(cur, config);
    if (next == cur) break;
    cur = std::move(next);
  }
  return detail_clean::collapse_whitespace(cur);
}

inline corpus::DatasetBundle clean_bundle(const corpus::DatasetBundle& bundle,
                                          const CleanConfig& config = {}) {
  corpus::DatasetBundle out = bundle;
  for (auto& r : out.records) r.text = clean_tweet(r.text, config);
  out.source = bundle.source + " (clean)";
  return out;
}

// ---------------------------------------------------------------------------
// Dataset splitting
// ---------------------------------------------------------------------------

struct SplitConfig {
  double train = 0.81;
  double validate = 0.09;
  double test = 0.10;
  std::uint64_t seed = 0;
};

struct SplitResult {
  corpus::DatasetBundle train;
  corpus::DatasetBundle validate;
  corpus::DatasetBundle test;
};

inline void validate_ratios(const SplitConfig& cfg) {
  if (cfg.train < 0 || cfg.validate < 0 || cfg.test < 0)
    throw std::runtime_error("split ratios must be nonnegative");
  // "sums to 1.0 exactly", allowing for binary representation of the ratios
  if (std::abs(cfg.train + cfg.validate + cfg.test - 1.0) > 1e-9)
    throw std::runtime_error("split ratios must sum to 1.0");
}

// (floor(train*N), floor(validate*N), remainder) — an exact partition.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitConfig& cfg) {
  validate_ratios(cfg);
  const auto n_train = static_cast<std::size_t>(cfg.train * static_cast<double>(n) + 1e-9);
  const auto n_val = static_cast<std::size_t>(cfg.validate * static_cast<double>(n) + 1e-9);
  return {n_train, n_val, n - n_train - n_val};
}

inline SplitResult split_dataset(const corpus::DatasetBundle& bundle, const SplitConfig& config) {
  const std::size_t n = bundle.records.size();
  if (n < 3) throw std::runtime_error("cannot split bundle '" + bundle.name +
                                      "': need at least 3 records, got " + std::to_string(n));
  const auto sizes = split_sizes(n, config);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(config.seed);
  detail::shuffle_inplace(order, rng);

  SplitResult out;
  auto fill = [&](corpus::DatasetBundle& dst, std::string_view suffix, std::size_t begin,
                  std::size_t count) {
    dst.name = bundle.name + std::string(suffix);
    dst.source = bundle.source;
    dst.records.reserve(count);
    for (std::size_t k = begin; k < begin + count; ++k)
      dst.records.push_back(bundle.records[order[k]]);
  };
  fill(out.train, "/train", 0, sizes[0]);
  fill(out.validate, "/validate", sizes[0], sizes[1]);
  fill(out.test, "/test", sizes[0] + sizes[1], sizes[2]);
  return out;
}

// ---------------------------------------------------------------------------
// Batch planning
// ---------------------------------------------------------------------------

inline constexpr int kMaxSequenceTokens = 512;
inline constexpr int kPaddingQuantum = 128;
inline constexpr int kDefaultBatchSize = 24;

// Least multiple of 128 that fits the longest sequence in the batch.
inline int padded_length(int max_tokens) {
  return (max_tokens + kPaddingQuantum - 1) / kPaddingQuantum * kPaddingQuantum;
}

struct Batch {
  std::vector<std::size_t> indices;  // positions in the planned sequence list
  int max_tokens = 0;
  int padded_length = 0;
};

struct BatchPlan {
  std::vector<Batch> batches;
  int batch_size = kDefaultBatchSize;
};

// Groups consecutive sequences into batches of at most batch_size. Padding is
// appended at the end of each sequence, up to the batch's padded length.
inline BatchPlan plan_batches(std::span<const int> token_lengths,
                              int batch_size = kDefaultBatchSize) {
  if (batch_size < 1) throw std::runtime_error("batch size must be positive");
  for (std::size_t i = 0; i < token_lengths.size(); ++i)
    if (token_lengths[i] < 1 || token_lengths[i] > kMaxSequenceTokens)
      throw std::runtime_error("sequence " + std::to_string(i) + ": token count " +
                               std::to_string(token_lengths[i]) + " outside [1, 512]");

  BatchPlan plan;
  plan.batch_size = batch_size;
  for (std::size_t i = 0; i < token_lengths.size(); i += batch_size) {
    Batch b;
    const std::size_t end = std::min(token_lengths.size(), i + batch_size);
    for (std::size_t k = i; k < end; ++k) {
      b.indices.push_back(k);
      b.max_tokens = std::max(b.max_tokens, token_lengths[k]);
    }
    b.padded_length = padded_length(b.max_tokens);
    plan.batches.push_back(std::move(b));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Tokenizer contract
// ---------------------------------------------------------------------------

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<int> encode(std::string_view text) const = 0;
  virtual int vocab_size() const = 0;
  virtual int pad_id() const = 0;
};

// Deterministic hashing tokenizer. Words (alphanumeric runs) and individual
// punctuation marks become tokens, so a 280-character tweet yields at most
// 280 tokens — comfortably inside the 512-token bound, with no truncation.
class HashTokenizer final : public Tokenizer {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kEmptyId = 1;  // emitted for texts with no tokens

  explicit HashTokenizer(int vocab_size = 4096) : vocab_(vocab_size) {
    if (vocab_ < 3) throw std::runtime_error("tokenizer vocabulary too small");
  }

  std::vector<int> encode(std::string_view text) const override {
    std::vector<int> ids;
    std::string word;
    auto flush = [&] {
      if (word.empty()) return;
      ids.push_back(token_id(word));
      word.clear();
    };
    for (std::size_t i = 0; i < text.size();) {
      const auto [cp, len] = detail::utf8_decode(text, i);
      if (detail::is_ascii_alnum(cp) || cp == '_' ||
          (cp >= 0x80 && !is_emoji(cp))) {
        if (cp < 0x80) {
          word.push_back(detail::ascii_lower(static_cast<char>(cp)));
        } else {
          detail::utf8_append(word, cp);
        }
      } else {
        flush();
        if (!detail_clean::is_space(cp)) {
          std::string sym;
          detail::utf8_append(sym, cp);
          ids.push_back(token_id(sym));
        }
      }
      i += len;
    }
    flush();
    if (ids.empty()) ids.push_back(kEmptyId);
    return ids;
  }

  int vocab_size() const override { return vocab_; }
  int pad_id() const override { return kPadId; }

 private:
  int token_id(std::string_view token) const {
    return 2 + static_cast<int>(detail::fnv1a64(token) % static_cast<std::uint64_t>(vocab_ - 2));
  }

  int vocab_;
};

}  // namespace hateharness::preprocess
