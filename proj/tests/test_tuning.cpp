// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "attnsum/errors.hpp"
#include "attnsum/tuning.hpp"
#include "oracles.hpp"

using namespace attnsum;

namespace {

Hyperparams small(EncoderKind kind, std::size_t V = 12, std::size_t C = 2) {
  Hyperparams hp;
  hp.V = V;
  hp.D = 3;
  hp.H = 5;
  hp.C = C;
  hp.L = 1;
  hp.Q = 1;
  hp.encoder = kind;
  return hp;
}

constexpr TokenId a = 3, b = 4, c = 5, z = 6;

// Context-free model whose favourite token z never appears in the input.
Model biased_model() {
  Hyperparams hp = small(EncoderKind::none, 7);
  hp.D = 2;
  hp.H = 2;
  Model m = init_model(hp, 1);
  for (const auto& n : m.params.names()) m.params.value(n).fill(0.0);
  m.params.value("b_V")[z] = 3.0;
  return m;
}

Vocab letters() {
  Vocab v;
  for (const char* t : {"a", "b", "c", "z"}) v.add(t, 1);
  return v;
}

double direct_tuned(const Model& m, const std::vector<TokenId>& x, const std::vector<TokenId>& y,
                    const FeatureVector& alpha) {
  double s = 0.0;
  std::vector<TokenId> ctx(m.hyper.C, Vocab::kStart);
  for (TokenId t : y) {
    const auto f = oracle::match(x, ctx, t);
    s += alpha[0] * oracle::log_probs(m, x, ctx)[t] + alpha[1] * f[0] + alpha[2] * f[1] +
         alpha[3] * f[2] + alpha[4] * f[3];
    ctx.erase(ctx.begin());
    ctx.push_back(t);
  }
  return s;
}

}  // namespace

TEST_CASE("match features on hand examples") {
  const std::vector<TokenId> abc{a, b, c};
  // next token absent from x
  for (double f : match_features(abc, std::vector<TokenId>{a, b}, z)) CHECK(f == 0.0);
  auto f = match_features(abc, std::vector<TokenId>{a, b}, c);
  CHECK(f[0] == 1.0);
  CHECK(f[1] == 1.0);
  CHECK(f[2] == 1.0);
  CHECK(f[3] == 0.0);
  f = match_features(abc, std::vector<TokenId>{c, b}, c);
  CHECK(f[1] == 1.0);
  CHECK(f[2] == 0.0);
  // reorder: y_i = b occurs after the next token a in x
  f = match_features(std::vector<TokenId>{a, b}, std::vector<TokenId>{Vocab::kStart, b}, a);
  CHECK(f[0] == 1.0);
  CHECK(f[1] == 0.0);
  CHECK(f[3] == 1.0);
  // start symbols never match, even if they were in x
  f = match_features(std::vector<TokenId>{Vocab::kStart, a}, std::vector<TokenId>{1, 1}, a);
  CHECK(f == std::array<double, 4>{1.0, 0.0, 0.0, 0.0});
  // C = 1 has no trigram
  f = match_features(abc, std::vector<TokenId>{b}, c);
  CHECK(f == std::array<double, 4>{1.0, 1.0, 0.0, 0.0});
}

TEST_CASE("match features agree with brute force and are indicators") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t C = 1 + trial % 3;
    const auto x = oracle::random_ids(rng, 1 + trial % 7, 8);
    auto ctx = oracle::random_ids(rng, C, 8, 1);  // may contain start symbols
    const TokenId next = oracle::random_ids(rng, 1, 8)[0];
    const auto got = match_features(x, ctx, next);
    CHECK(got == oracle::match(x, ctx, next));
    for (double v : got) CHECK((v == 0.0 || v == 1.0));
  }
}

TEST_CASE("tuned score: identity, zero and random weights") {
  std::mt19937_64 rng(5);
  for (auto kind : {EncoderKind::none, EncoderKind::bow, EncoderKind::conv, EncoderKind::attention}) {
    const Model m = oracle::random_model(small(kind), 11);
    for (int trial = 0; trial < 10; ++trial) {
      const auto x = oracle::random_ids(rng, 2 + trial % 5, 12);
      const auto y = oracle::random_ids(rng, 1 + trial % 4, 12);
      double lp = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        lp += log_cond_dist(m, x, context_at(y, i, m.hyper.C))[y[i]];
      }
      CHECK(tuned_score(y, x, FeatureWeights::identity(), m) == lp);
      CHECK(tuned_score(y, x, FeatureWeights{{0, 0, 0, 0, 0}}, m) == 0.0);
      std::normal_distribution<double> g;
      FeatureWeights w;
      for (double& v : w.alpha) v = g(rng);
      CHECK(tuned_score(y, x, w, m) == doctest::Approx(direct_tuned(m, x, y, w.alpha)).epsilon(1e-10));
      const auto f = sequence_features(m, x, y);
      double dot = 0.0;
      for (std::size_t k = 0; k < kFeatureCount; ++k) dot += w.alpha[k] * f[k];
      CHECK(dot == doctest::Approx(tuned_score(y, x, w, m)).epsilon(1e-12));
    }
  }
}

TEST_CASE("tuned scorer rows match per-token features") {
  std::mt19937_64 rng(6);
  const Model m = oracle::random_model(small(EncoderKind::attention), 12);
  FeatureWeights w{{0.7, -1.2, 0.4, 2.0, -0.3}};
  const TunedScorer s(m, w);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = oracle::random_ids(rng, 3 + trial % 4, 12);
    const std::vector<std::vector<TokenId>> ctxs{oracle::random_ids(rng, 2, 12, 1),
                                                 {Vocab::kStart, Vocab::kStart}};
    const auto rows = s.score(x, ctxs);
    for (std::size_t r = 0; r < ctxs.size(); ++r) {
      for (TokenId y = 0; y < 12; ++y) {
        const auto f = features(m, x, ctxs[r], y);
        double want = 0.0;
        for (std::size_t k = 0; k < kFeatureCount; ++k) want += w.alpha[k] * f[k];
        CHECK(rows[r][y] == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(TunedScorer(m, FeatureWeights{{NAN, 0, 0, 0, 0}}), std::invalid_argument);
}

TEST_CASE("scaling the weights keeps the ranking") {
  std::mt19937_64 rng(7);
  const Model m = oracle::random_model(small(EncoderKind::conv), 13);
  const auto x = oracle::random_ids(rng, 6, 12);
  std::vector<std::vector<TokenId>> cands;
  for (int i = 0; i < 40; ++i) cands.push_back(oracle::random_ids(rng, 4, 12));
  const FeatureWeights w{{1.0, 0.8, -0.5, 1.5, 0.3}};
  auto ranking = [&](const FeatureWeights& ww) {
    std::vector<std::size_t> idx(cands.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> s;
    for (const auto& y : cands) s.push_back(tuned_score(y, x, ww, m));
    std::stable_sort(idx.begin(), idx.end(), [&](auto p, auto q) { return s[p] > s[q]; });
    return idx;
  };
  const auto base = ranking(w);
  for (double k : {0.25, 2.0, 3.7, 1e3}) {
    FeatureWeights scaled = w;
    for (double& v : scaled.alpha) v *= k;
    CHECK(ranking(scaled) == base);
  }
}

TEST_CASE("identity weights decode exactly like the plain model") {
  std::mt19937_64 rng(8);
  for (auto kind : {EncoderKind::bow, EncoderKind::attention}) {
    const Model m = oracle::random_model(small(kind, 14), 21);
    const ModelScorer plain(m);
    const TunedScorer tuned(m, FeatureWeights::identity());
    DecodeConfig cfg;
    cfg.length = 5;
    cfg.beam = 4;
    for (int s = 0; s < 25; ++s) {
      const auto x = oracle::random_ids(rng, 3 + s % 6, 14);
      const auto p = beam_search(plain, x, cfg);
      const auto t = beam_search(tuned, x, cfg);
      REQUIRE(p.size() == t.size());
      for (std::size_t k = 0; k < p.size(); ++k) {
        CHECK(p[k].tokens == t[k].tokens);
        CHECK(p[k].score == t[k].score);
      }
    }
  }
}

TEST_CASE("weights JSON round-trip and errors") {
  const FeatureWeights w{{1.0, -0.25, 0.5, 1e-9, -3.0}};
  CHECK(parse_weights_json(weights_json(w)) == w);
  const auto path = std::filesystem::temp_directory_path() / "attnsum_test_weights.json";
  save_weights(path, w);
  CHECK(load_weights(path) == w);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_weights(path), DataError);
  CHECK_THROWS_AS(parse_weights_json("{"), DataError);
  CHECK_THROWS_AS(parse_weights_json("[1,2,3,4,5]"), DataError);
  CHECK_THROWS_AS(parse_weights_json(R"({"log_prob":1,"unigram_match":0,"bigram_match":0,"trigram_match":0})"),
                  DataError);
  CHECK_THROWS_AS(parse_weights_json(
                      R"({"log_prob":"1","unigram_match":0,"bigram_match":0,"trigram_match":0,"reorder":0})"),
                  DataError);
  CHECK_THROWS_AS(parse_weights_json(
                      R"({"log_prob":1,"unigram_match":0,"bigram_match":0,"trigram_match":0,"reorder":0,"x":1})"),
                  DataError);
}

TEST_CASE("tuning recovers an extractive reference the plain model misses") {
  const Model m = biased_model();
  const Vocab vocab = letters();
  const std::vector<DevInstance> dev{{{a, b, c}, {{"a", "b", "c"}}}};
  MertConfig cfg;
  cfg.decode.length = 3;
  cfg.decode.beam = 5;
  cfg.random_directions = 4;
  const auto r = mert_tune(m, vocab, dev, FeatureWeights::identity(), cfg);
  CHECK(r.initial_score == 0.0);
  CHECK(r.final_score == 1.0);
  CHECK(r.final_score == dev_score(m, vocab, dev, r.weights, cfg));

  // exhaustive check of both argmaxes
  const std::vector<TokenId> cands{a, b, c, z};
  const auto plain = oracle::enumerate(TunedScorer(m, FeatureWeights::identity()), {a, b, c}, cands, 3);
  CHECK(plain.tokens == std::vector<TokenId>{z, z, z});
  const auto tuned = oracle::enumerate(TunedScorer(m, r.weights), {a, b, c}, cands, 3);
  CHECK(tuned.tokens == std::vector<TokenId>{a, b, c});
  CHECK(*std::max_element(r.weights.alpha.begin() + 1, r.weights.alpha.begin() + 4) > 0.0);

  // same seed, same answer
  CHECK(mert_tune(m, vocab, dev, FeatureWeights::identity(), cfg).weights == r.weights);
}

TEST_CASE("tuning never lowers the dev score") {
  std::mt19937_64 rng(9);
  Vocab vocab;
  for (int i = 3; i < 12; ++i) vocab.add("w" + std::to_string(i), 1);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Model m = oracle::random_model(small(EncoderKind::attention), 30 + seed);
    std::vector<DevInstance> dev;
    for (int i = 0; i < 4; ++i) {
      DevInstance d{oracle::random_ids(rng, 5, 12), {}};
      for (int k = 0; k < 2; ++k) d.references.push_back(vocab.decode(oracle::random_ids(rng, 3, 12)));
      dev.push_back(d);
    }
    MertConfig cfg;
    cfg.decode.length = 3;
    cfg.decode.beam = 3;
    cfg.max_iterations = 3;
    cfg.seed = seed;
    cfg.metric = seed % 2 ? Metric::rouge2 : Metric::rouge1;
    const auto r = mert_tune(m, vocab, dev, FeatureWeights::identity(), cfg);
    CHECK(r.final_score >= r.initial_score);
    CHECK(r.initial_score == dev_score(m, vocab, dev, FeatureWeights::identity(), cfg));
    CHECK(r.final_score == dev_score(m, vocab, dev, r.weights, cfg));
    cfg.jobs = 3;
    CHECK(mert_tune(m, vocab, dev, FeatureWeights::identity(), cfg).weights == r.weights);
  }
}

TEST_CASE("tuning rejects an empty dev set") {
  const Model m = biased_model();
  CHECK_THROWS_AS(mert_tune(m, letters(), std::vector<DevInstance>{}, FeatureWeights::identity(), {}),
                  std::invalid_argument);
}
