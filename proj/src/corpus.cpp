// SPDX-License-Identifier: Apache-2.0

#include "attnsum/corpus.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "attnsum/errors.hpp"

namespace attnsum {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_edge_punct(char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '"': case '\'': case '`':
    case '(': case ')': case '[': case ']': case '{': case '}':
      return true;
    default:
      return false;
  }
}

bool is_word_token(std::string_view t) {
  return std::any_of(t.begin(), t.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return (c >= 'a' && c <= 'z') || c == '#' || u >= 0x80;
  });
}

bool is_alpha_token(std::string_view t) {
  return std::any_of(t.begin(), t.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || static_cast<unsigned char>(c) >= 0x80;
  });
}

void tokenize_chunk(std::string_view s, Tokens& out) {
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n && is_edge_punct(s[i])) {
    std::size_t j = i + 1;
    while (j < n && s[j] == s[i]) ++j;
    out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  if (i == n) return;

  std::vector<std::string_view> trail;
  std::size_t k = n;
  while (k > i && is_edge_punct(s[k - 1])) {
    std::size_t start = k - 1;
    while (start > i && s[start - 1] == s[k - 1]) --start;
    if (s[k - 1] == '.' && k - start == 1 &&
        s.substr(i, start - i).find('.') != std::string_view::npos) {
      break;  // abbreviation
    }
    trail.push_back(s.substr(start, k - start));
    k = start;
  }
  if (k > i) out.emplace_back(s.substr(i, k - i));
  for (auto it = trail.rbegin(); it != trail.rend(); ++it) out.emplace_back(*it);
}

}  // namespace

Tokens preprocess(std::string_view text) {
  std::string norm(text);
  for (char& c : norm) {
    if (c >= 'A' && c <= 'Z') {
      c = static_cast<char>(c - 'A' + 'a');
    } else if (c >= '0' && c <= '9') {
      c = '#';
    }
  }
  Tokens out;
  std::size_t i = 0;
  while (i < norm.size()) {
    while (i < norm.size() && is_space(norm[i])) ++i;
    std::size_t j = i;
    while (j < norm.size() && !is_space(norm[j])) ++j;
    if (j > i) tokenize_chunk(std::string_view(norm).substr(i, j - i), out);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------

Vocab::Vocab() {
  add(std::string(kUnkToken), 0);
  add(std::string(kStartToken), 0);
  add(std::string(kPadToken), 0);
}

TokenId Vocab::add(const std::string& token, std::uint64_t count) {
  if (ids_.contains(token)) throw std::invalid_argument("Vocab: duplicate token " + token);
  const auto id = static_cast<TokenId>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(token);
  counts_.push_back(count);
  return id;
}

bool Vocab::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

TokenId Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id >= tokens_.size()) throw DataError("Vocab: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<TokenId> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Tokens Vocab::decode(std::span<const TokenId> ids) const {
  Tokens out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

void Vocab::save(std::ostream& os) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) os << tokens_[i] << '\t' << counts_[i] << '\n';
}

Vocab Vocab::load(std::istream& is) {
  Vocab v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("vocab line " + std::to_string(lineno) + ": expected token TAB count");
    }
    const std::string tok = line.substr(0, tab);
    std::uint64_t count = 0;
    try {
      count = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError("vocab line " + std::to_string(lineno) + ": bad count");
    }
    if (lineno <= kReserved) {
      if (v.tokens_[lineno - 1] != tok) {
        throw DataError("vocab line " + std::to_string(lineno) + ": expected reserved symbol " +
                        v.tokens_[lineno - 1]);
      }
      v.counts_[lineno - 1] = count;
      continue;
    }
    if (v.contains(tok)) throw DataError("vocab line " + std::to_string(lineno) + ": duplicate");
    v.add(tok, count);
  }
  return v;
}

bool is_reserved(TokenId id) { return id < Vocab::kReserved; }

Vocab build_vocab(std::span<const Tokens> corpus, std::size_t min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::map<std::string, std::uint64_t> freq;
  for (const auto& sent : corpus) {
    for (const auto& t : sent) ++freq[t];
  }
  Vocab v;
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  std::uint64_t pruned = 0;
  for (const auto& [tok, n] : freq) {
    if (v.contains(tok)) continue;
    if (n >= min_count) {
      kept.emplace_back(tok, n);
    } else {
      pruned += n;
    }
  }
  // freq is already lexicographic, so a stable sort on count gives the tie order.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [tok, n] : kept) v.add(tok, n);
  v.counts_[Vocab::kUnk] = pruned;
  return v;
}

// ---------------------------------------------------------------------------

std::vector<TextPair> read_pairs(std::istream& is) {
  std::vector<TextPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw DataError("line " + std::to_string(lineno) + ": expected headline TAB article");
    }
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

void write_pairs(std::ostream& os, std::span<const TokenPair> pairs) {
  for (const auto& p : pairs) os << join_tokens(p.headline) << '\t' << join_tokens(p.article) << '\n';
}

Tokens split_tokens(std::string_view line) {
  Tokens out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<Pair> encode_pairs(const Vocab& vocab, std::span<const TokenPair> pairs) {
  std::vector<Pair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.article.empty() || p.headline.empty()) throw DataError("encode_pairs: empty side");
    out.push_back({vocab.encode(p.article), vocab.encode(p.headline)});
  }
  return out;
}

// ---------------------------------------------------------------------------

const StopWords& default_stopwords() {
  static const StopWords words = {
      "a",       "about",  "above",   "after",   "again",   "against", "all",     "am",
      "an",      "and",    "any",     "are",     "as",      "at",      "be",      "because",
      "been",    "before", "being",   "below",   "between", "both",    "but",     "by",
      "can",     "could",  "did",     "do",      "does",    "doing",   "down",    "during",
      "each",    "few",    "for",     "from",    "further", "had",     "has",     "have",
      "having",  "he",     "her",     "here",    "hers",    "herself", "him",     "himself",
      "his",     "how",    "i",       "if",      "in",      "into",    "is",      "it",
      "its",     "itself", "just",    "me",      "more",    "most",    "my",      "myself",
      "no",      "nor",    "not",     "now",     "of",      "off",     "on",      "once",
      "only",    "or",     "other",   "our",     "ours",    "out",     "over",    "own",
      "said",    "same",   "says",    "she",     "should",  "so",      "some",    "such",
      "than",    "that",   "the",     "their",   "theirs",  "them",    "then",    "there",
      "these",   "they",   "this",    "those",   "through", "to",      "too",     "under",
      "until",   "up",     "very",    "was",     "we",      "were",    "what",    "when",
      "where",   "which",  "while",   "who",     "whom",    "why",     "will",    "with",
      "would",   "you",    "your",    "'s",      "also",    "whose",   "yours",   "might",
  };
  return words;
}

namespace {

bool is_dash_token(std::string_view t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return c == '-'; });
}

bool is_bracket_token(std::string_view t) {
  return t == "(" || t == ")" || t == "[" || t == "]" || t == "{" || t == "}";
}

bool is_editor_tag(std::string_view t) {
  static const std::unordered_set<std::string_view> tags = {
      "eds", "urgent", "corrected", "correction", "refile", "refiling", "wrapup", "advisory"};
  return tags.contains(t);
}

bool has_byline_tail(std::span<const std::string> headline, const StopWords& stopwords) {
  const std::size_t n = headline.size();
  for (std::size_t tail = 2; tail <= 3; ++tail) {
    if (n < tail + 2) continue;
    const std::size_t by = n - tail - 1;
    if (headline[by] != "by") continue;
    bool names = true;
    for (std::size_t i = by + 1; i < n; ++i) {
      const auto& t = headline[i];
      if (!is_alpha_token(t) || stopwords.contains(t) || t.find('#') != std::string::npos) {
        names = false;
      }
    }
    if (names) return true;
  }
  return false;
}

}  // namespace

FilterVerdict classify_pair(std::span<const std::string> article,
                            std::span<const std::string> headline, const StopWords& stopwords) {
  const std::unordered_set<std::string> article_types(article.begin(), article.end());
  const bool shared = std::any_of(headline.begin(), headline.end(), [&](const std::string& t) {
    return is_word_token(t) && !stopwords.contains(t) && article_types.contains(t);
  });
  if (!shared) return FilterVerdict::no_shared_content_word;

  const bool marked =
      (!headline.empty() && is_dash_token(headline.front())) ||
      std::any_of(headline.begin(), headline.end(),
                  [](const std::string& t) { return is_bracket_token(t) || is_editor_tag(t); }) ||
      has_byline_tail(headline, stopwords);
  if (marked) return FilterVerdict::byline_or_edit_mark;

  const bool question = std::any_of(headline.begin(), headline.end(), [](const std::string& t) {
    return t.find('?') != std::string::npos || t.find(':') != std::string::npos;
  });
  if (question) return FilterVerdict::question_or_colon;
  return FilterVerdict::keep;
}

bool filter_pair(std::span<const std::string> article, std::span<const std::string> headline,
                 const StopWords& stopwords) {
  return classify_pair(article, headline, stopwords) == FilterVerdict::keep;
}

}  // namespace attnsum
