// SPDX-License-Identifier: Apache-2.0
//
// Log-linear rescoring of the decoder with extractive match features, and
// K-best line-search tuning of the feature weights against corpus ROUGE.
//
//   s(x, y) = sum_i alpha . f(y_{i+1}, x, y_c)
//   f = (log p, unigram match, bigram match, trigram match, reorder)

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "attnsum/corpus.hpp"
#include "attnsum/decoding.hpp"
#include "attnsum/model.hpp"
#include "attnsum/rouge.hpp"

namespace attnsum {

inline constexpr std::size_t kFeatureCount = 5;
using FeatureVector = std::array<double, kFeatureCount>;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "log_prob", "unigram_match", "bigram_match", "trigram_match", "reorder"};

struct FeatureWeights {
  FeatureVector alpha{1.0, 0.0, 0.0, 0.0, 0.0};

  static FeatureWeights identity() { return {}; }
  /// Throws std::invalid_argument on non-finite weights.
  void validate() const;

  friend bool operator==(const FeatureWeights&, const FeatureWeights&) = default;
};

/// JSON object with the five named components.
std::string weights_json(const FeatureWeights& weights);
/// Throws DataError on missing, extra or non-numeric components.
FeatureWeights parse_weights_json(const std::string& text);
void save_weights(const std::filesystem::path& path, const FeatureWeights& weights);
FeatureWeights load_weights(const std::filesystem::path& path);

/// Indicator features 2..5 for appending `next` after `context`. Start and
/// padding positions of the context never match the input.
std::array<double, 4> match_features(std::span<const TokenId> x, std::span<const TokenId> context,
                                     TokenId next);

/// All five features; the first is log p(next | x, context).
FeatureVector features(const Model& model, std::span<const TokenId> x,
                       std::span<const TokenId> context, TokenId next);

/// Feature sums over every position of `y`.
FeatureVector sequence_features(const Model& model, std::span<const TokenId> x,
                                std::span<const TokenId> y);

double tuned_score(std::span<const TokenId> y, std::span<const TokenId> x,
                   const FeatureWeights& weights, const Model& model);

/// g = alpha . f, for use with any decoder.
class TunedScorer final : public StepScorer {
 public:
  TunedScorer(const Model& model, FeatureWeights weights);
  std::size_t vocab_size() const override { return model_.hyper.V; }
  std::size_t context_size() const override { return model_.hyper.C; }
  std::vector<std::vector<double>> score(
      std::span<const TokenId> x, std::span<const std::vector<TokenId>> contexts) const override;

 private:
  const Model& model_;
  FeatureWeights weights_;
};

struct DevInstance {
  std::vector<TokenId> input;
  std::vector<Tokens> references;
};

struct MertConfig {
  DecodeConfig decode;  // beam size doubles as the K-best list size
  Metric metric = Metric::rouge1;
  std::size_t random_directions = 8;  // R
  std::size_t max_iterations = 10;    // decode / line-search rounds
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

struct MertResult {
  FeatureWeights weights;
  double initial_score = 0.0;  // dev score of the initial weights
  double final_score = 0.0;    // dev score of the returned weights
  std::size_t iterations = 0;
};

/// Corpus score of a real decode (best beam hypothesis, finalized at the
/// configured byte cap) under `weights`.
double dev_score(const Model& model, const Vocab& vocab, std::span<const DevInstance> dev,
                 const FeatureWeights& weights, const MertConfig& config);

/// Coordinate and random-direction line search over accumulated K-best
/// lists. A candidate weight vector is only adopted when a real decode
/// scores strictly better, so the result never scores below `init`.
/// Throws std::invalid_argument on an empty dev set.
MertResult mert_tune(const Model& model, const Vocab& vocab, std::span<const DevInstance> dev,
                     const FeatureWeights& init, const MertConfig& config);

}  // namespace attnsum
