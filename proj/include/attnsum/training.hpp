// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch SGD on summed token NLL, with length-bucketed batches,
// per-epoch embedding max-norm and learning-rate halving on plateaus.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "attnsum/corpus.hpp"
#include "attnsum/model.hpp"

namespace attnsum {

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 15;
  std::uint64_t seed = 1;
  double renorm_max_norm = 1.0;
  std::size_t patience = 1;  // non-improving epochs before the rate halves
  Hyperparams hyper;

  void validate() const;
};

/// Reads "key = value" lines ('#' starts a comment). Keys: learning_rate,
/// batch_size, max_epochs, seed, renorm_max_norm, patience, D, H, C, L, Q,
/// encoder. Unknown keys throw DataError. V is never read from config.
TrainConfig parse_train_config(std::istream& is, TrainConfig base = {});
std::string format_train_config(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_nll = 0.0;  // summed over the epoch's batches, before each update
  double valid_nll = 0.0;  // summed over validation tokens after the epoch
  double valid_perplexity = 0.0;
  double learning_rate = 0.0;  // rate used during this epoch
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

/// One JSON object, no trailing newline.
std::string to_json_line(const EpochRecord& record);

std::size_t token_count(std::span<const Pair> pairs);
/// Summed -log p over every headline token. Throws on an empty corpus.
double nll(const Model& model, std::span<const Pair> pairs);
/// exp(nll / tokens).
double perplexity(const Model& model, std::span<const Pair> pairs);

/// Scales every embedding column (E, F, G) whose L2 norm exceeds `max_norm`
/// down to exactly `max_norm`.
void renormalize_embeddings(Model& model, double max_norm);

/// Shuffled batches of pair indices; all pairs in a batch share the same
/// article length. The final batch of each length bucket may be short.
std::vector<std::vector<std::size_t>> make_batches(std::span<const Pair> pairs,
                                                   std::size_t batch_size, std::mt19937_64& rng);

struct TrainResult {
  Model model;  // parameters with the best validation NLL
  TrainHistory history;
};

/// Called after every epoch with the epoch's record and the current model.
using EpochCallback = std::function<void(const EpochRecord&, const Model&)>;

/// Trains from init_model(config.hyper, config.seed). Throws NumericError if
/// the loss diverges.
TrainResult train(const TrainConfig& config, std::span<const Pair> train_pairs,
                  std::span<const Pair> valid_pairs, const EpochCallback& on_epoch = {});

/// Same schedule starting from an existing model.
TrainResult train_from(Model init, const TrainConfig& config, std::span<const Pair> train_pairs,
                       std::span<const Pair> valid_pairs, const EpochCallback& on_epoch = {});

}  // namespace attnsum
