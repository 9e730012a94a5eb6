// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "attnsum/corpus.hpp"
#include "attnsum/errors.hpp"

using namespace attnsum;

TEST_CASE("preprocess lowercases and masks digits") {
  CHECK(preprocess("Death toll rises to 95") == Tokens{"death", "toll", "rises", "to", "##"});
  CHECK(preprocess("").empty());
  CHECK(preprocess("   \t ").empty());
}

TEST_CASE("preprocess matches the golden file") {
  std::ifstream is(std::string(ATTNSUM_TEST_DATA) + "/tokenizer_golden.tsv");
  REQUIRE(is);
  std::string line;
  int cases = 0;
  while (std::getline(is, line)) {
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    const std::string input = line.substr(0, tab);
    const Tokens expected = split_tokens(line.substr(tab + 1));
    INFO("input: " << input);
    CHECK(preprocess(input) == expected);
    ++cases;
  }
  CHECK(cases >= 15);
}

TEST_CASE("preprocess is idempotent on its own output") {
  for (const char* s : {"The U.S. economy grew 3.2% in 2004.", "\"Stop!\" he said, (quietly).",
                        "Don't panic... it's fine?!"}) {
    const Tokens once = preprocess(s);
    CHECK(preprocess(join_tokens(once)) == once);
  }
}

TEST_CASE("build_vocab applies the frequency cutoff") {
  const std::vector<Tokens> corpus{{"a", "a", "a", "b"}};
  const Vocab v = build_vocab(corpus, 2);
  CHECK(v.contains("a"));
  CHECK_FALSE(v.contains("b"));
  CHECK(v.id("b") == Vocab::kUnk);
  CHECK(v.count(Vocab::kUnk) == 1);
  const Vocab all = build_vocab(corpus, 1);
  CHECK(all.contains("a"));
  CHECK(all.contains("b"));
  CHECK(all.size() == 5);
}

TEST_CASE("build_vocab orders by frequency then lexicographically") {
  const std::vector<Tokens> corpus{{"c", "b", "a", "b", "c", "d"}};
  const Vocab v = build_vocab(corpus, 1);
  CHECK(v.token(0) == "<unk>");
  CHECK(v.token(1) == "<s>");
  CHECK(v.token(2) == "<pad>");
  CHECK(v.token(3) == "b");
  CHECK(v.token(4) == "c");
  CHECK(v.token(5) == "a");
  CHECK(v.token(6) == "d");
}

TEST_CASE("empty corpus gives only reserved symbols") {
  const Vocab v = build_vocab(std::vector<Tokens>{}, 5);
  CHECK(v.size() == Vocab::kReserved);
}

TEST_CASE("kept-type count on a Zipfian corpus matches a direct tally") {
  std::mt19937_64 rng(77);
  std::vector<double> w;
  for (int r = 1; r <= 400; ++r) w.push_back(1.0 / r);
  std::discrete_distribution<int> zipf(w.begin(), w.end());
  std::vector<Tokens> corpus(1000);
  for (auto& s : corpus) {
    for (int k = 0; k < 12; ++k) s.push_back("w" + std::to_string(zipf(rng)));
  }
  std::map<std::string, int> tally;
  for (const auto& s : corpus) {
    for (const auto& t : s) ++tally[t];
  }
  std::size_t expected = 0;
  std::uint64_t pruned = 0;
  for (const auto& [t, n] : tally) {
    if (n >= 5) {
      ++expected;
    } else {
      pruned += static_cast<std::uint64_t>(n);
    }
  }
  const Vocab v = build_vocab(corpus, 5);
  CHECK(v.size() - Vocab::kReserved == expected);
  CHECK(v.count(Vocab::kUnk) == pruned);
  for (TokenId i = Vocab::kReserved; i < v.size(); ++i) CHECK(v.count(i) >= 5);
  CHECK(build_vocab(corpus, 5) == v);
}

TEST_CASE("encode and decode are inverse on known tokens") {
  const Vocab v = build_vocab(std::vector<Tokens>{{"x", "y", "z"}}, 1);
  const Tokens known{"z", "x", "y"};
  CHECK(v.decode(v.encode(known)) == known);
  const Tokens mixed{"x", "never-seen"};
  CHECK(v.decode(v.encode(mixed)) == Tokens{"x", "<unk>"});
}

TEST_CASE("vocab round-trips through its text format") {
  const Vocab v = build_vocab(std::vector<Tokens>{{"b", "a", "a", "c", "c", "c", "d"}}, 2);
  std::stringstream ss;
  v.save(ss);
  CHECK(ss.str().rfind("<unk>\t2\n<s>\t0\n<pad>\t0\n", 0) == 0);
  CHECK(Vocab::load(ss) == v);
}

TEST_CASE("vocab loading rejects malformed files") {
  std::stringstream no_tab("<unk>\t0\n<s> 0\n");
  CHECK_THROWS_AS(Vocab::load(no_tab), DataError);
  std::stringstream wrong_reserved("<unk>\t0\n<pad>\t0\n<s>\t0\n");
  CHECK_THROWS_AS(Vocab::load(wrong_reserved), DataError);
  std::stringstream dup("<unk>\t0\n<s>\t0\n<pad>\t0\na\t1\na\t2\n");
  CHECK_THROWS_AS(Vocab::load(dup), DataError);
}

TEST_CASE("read_pairs parses tab-separated lines and names bad lines") {
  std::stringstream ok("h1\ta1 a2\n\nh2\ta3\n");
  const auto pairs = read_pairs(ok);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].headline == "h1");
  CHECK(pairs[1].article == "a3");

  std::stringstream bad("h\ta\nno tab here\n");
  try {
    read_pairs(bad);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::stringstream two_tabs("h\ta\tb\n");
  CHECK_THROWS_AS(read_pairs(two_tabs), DataError);
}

TEST_CASE("encode_pairs rejects empty sides") {
  const Vocab v = build_vocab(std::vector<Tokens>{{"a"}}, 1);
  const std::vector<TokenPair> bad{{{}, {"a"}}};
  CHECK_THROWS_AS(encode_pairs(v, bad), DataError);
}

namespace {

FilterVerdict verdict(const std::string& article, const std::string& headline) {
  return classify_pair(preprocess(article), preprocess(headline), default_stopwords());
}

}  // namespace

TEST_CASE("filter: question mark or colon") {
  CHECK(verdict("markets fall sharply in tokyo", "markets fall ?") ==
        FilterVerdict::question_or_colon);
  CHECK(verdict("markets fall sharply in tokyo", "markets : fall") ==
        FilterVerdict::question_or_colon);
}

TEST_CASE("filter: shared non-stop-word keeps the pair") {
  CHECK(verdict("global markets fell on monday", "markets tumble") == FilterVerdict::keep);
  CHECK(filter_pair(preprocess("global markets fell"), preprocess("markets tumble"),
                    default_stopwords()));
}

TEST_CASE("filter: only stop-words in common") {
  CHECK(verdict("the price of oil rose", "the end of an era") ==
        FilterVerdict::no_shared_content_word);
}

TEST_CASE("filter: bylines and edit marks") {
  const std::string art = "police arrested john smith in chicago on friday";
  CHECK(verdict(art, "smith arrested in chicago by john doe") == FilterVerdict::byline_or_edit_mark);
  CHECK(verdict(art, "-- smith arrested") == FilterVerdict::byline_or_edit_mark);
  CHECK(verdict(art, "smith arrested ( corrected )") == FilterVerdict::byline_or_edit_mark);
  CHECK(verdict(art, "urgent smith arrested") == FilterVerdict::byline_or_edit_mark);
  CHECK(verdict(art, "smith arrested [ eds ]") == FilterVerdict::byline_or_edit_mark);
  // "by" inside the headline that is not a byline tail
  CHECK(verdict(art, "smith arrested by police in chicago") == FilterVerdict::keep);
  CHECK(verdict(art, "smith arrested by police") == FilterVerdict::keep);
}

TEST_CASE("filters are checked in order") {
  // shares nothing and has a '?': the shared-word filter reports first
  CHECK(verdict("the cat sat", "dogs bark ?") == FilterVerdict::no_shared_content_word);
}

TEST_CASE("filtering is idempotent") {
  const std::vector<std::pair<std::string, std::string>> raw{
      {"global markets fell", "markets tumble"},
      {"the price of oil", "the end"},
      {"markets fall sharply", "markets fall ?"},
      {"police arrest smith", "smith held by john doe"},
      {"rain hits city", "city rain"}};
  std::vector<std::pair<Tokens, Tokens>> once, twice;
  for (const auto& [a, h] : raw) {
    if (filter_pair(preprocess(a), preprocess(h), default_stopwords())) {
      once.emplace_back(preprocess(a), preprocess(h));
    }
  }
  for (const auto& [a, h] : once) {
    if (filter_pair(a, h, default_stopwords())) twice.emplace_back(a, h);
  }
  CHECK(once == twice);
  CHECK(once.size() == 2);
}

TEST_CASE("stop-word list is fixed and lowercase") {
  const auto& sw = default_stopwords();
  CHECK(sw.size() >= 100);
  CHECK(sw.size() <= 140);
  for (const auto& w : sw) {
    for (char c : w) CHECK_FALSE((c >= 'A' && c <= 'Z'));
  }
  CHECK(sw.contains("the"));
  CHECK(sw.contains("of"));
  CHECK_FALSE(sw.contains("markets"));
}
