// SPDX-License-Identifier: Apache-2.0
//
// Text preprocessing, vocabulary and headline/article pair handling.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace attnsum {

using TokenId = std::uint32_t;
using Tokens = std::vector<std::string>;

/// Corpus file format version, reported by `--version`.
inline constexpr int kCorpusFormatVersion = 1;

/// Tokenizes one line of raw text.
///
/// Rules, applied in order:
///   1. ASCII letters are lowercased; other bytes pass through untouched.
///   2. Every ASCII digit becomes '#'.
///   3. The text is split on whitespace.
///   4. Edge punctuation (. , ; : ! ? " ' ` ( ) [ ] { }) is peeled off both
///      ends of each chunk; a run of the same character becomes one token
///      ("..." stays together). A single trailing '.' stays attached when
///      the rest of the chunk already contains a '.', so abbreviations such
///      as "u.s." survive.
///   5. Interior characters, including hyphens and apostrophes, are kept.
Tokens preprocess(std::string_view text);

/// Bidirectional token/id map. Ids 0..2 are reserved for UNK, the start
/// symbol and padding, in that order.
class Vocab {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kStart = 1;
  static constexpr TokenId kPad = 2;
  static constexpr std::size_t kReserved = 3;
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kStartToken = "<s>";
  static constexpr std::string_view kPadToken = "<pad>";

  Vocab();

  /// Appends a new token. Throws if it is already present.
  TokenId add(const std::string& token, std::uint64_t count);

  bool contains(std::string_view token) const;
  /// Id of `token`, or kUnk when it is not in the vocabulary.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::uint64_t count(TokenId id) const { return counts_.at(id); }
  std::size_t size() const { return tokens_.size(); }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  Tokens decode(std::span<const TokenId> ids) const;

  /// "token TAB count" per line, reserved symbols first.
  void save(std::ostream& os) const;
  static Vocab load(std::istream& is);

  friend Vocab build_vocab(std::span<const Tokens> corpus, std::size_t min_count);
  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Keeps types seen at least `min_count` times, ordered by descending
/// frequency with ties broken lexicographically. The UNK count is the total
/// frequency of the pruned types.
Vocab build_vocab(std::span<const Tokens> corpus, std::size_t min_count = 5);

bool is_reserved(TokenId id);

/// One training example, both sides encoded in the shared vocabulary.
struct Pair {
  std::vector<TokenId> article;
  std::vector<TokenId> headline;
};

/// Tokenized (or raw) pair as it appears in a corpus file.
struct TextPair {
  std::string headline;
  std::string article;
};

struct TokenPair {
  Tokens headline;
  Tokens article;
};

/// Reads "headline TAB article" lines. Blank lines are skipped; a line without
/// exactly one tab throws DataError naming the line.
std::vector<TextPair> read_pairs(std::istream& is);
void write_pairs(std::ostream& os, std::span<const TokenPair> pairs);

/// Splits pre-tokenized text on single spaces (no further normalization).
Tokens split_tokens(std::string_view line);
std::string join_tokens(std::span<const std::string> tokens);

std::vector<Pair> encode_pairs(const Vocab& vocab, std::span<const TokenPair> pairs);

// ---------------------------------------------------------------------------
// Pair filtering

using StopWords = std::unordered_set<std::string>;

/// The built-in English stop-word list (lowercase).
const StopWords& default_stopwords();

enum class FilterVerdict {
  keep,
  no_shared_content_word,  // filter 1
  byline_or_edit_mark,     // filter 2
  question_or_colon,       // filter 3
};

/// Applies the three pair filters in order and reports the first that fires.
///
/// Byline / edit-mark rule: the headline
///   - starts with a dash token ("-", "--", ...), or
///   - contains a bracket token, or
///   - contains an editor tag word (eds, urgent, corrected, correction,
///     refile, refiling, wrapup, advisory), or
///   - ends in a byline tail: "by" (not first) followed by 2-3 word tokens
///     that are neither stop-words nor numbers.
FilterVerdict classify_pair(std::span<const std::string> article,
                            std::span<const std::string> headline, const StopWords& stopwords);

/// True when the pair should be kept.
bool filter_pair(std::span<const std::string> article, std::span<const std::string> headline,
                 const StopWords& stopwords);

}  // namespace attnsum
