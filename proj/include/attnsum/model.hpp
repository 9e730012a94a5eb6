// SPDX-License-Identifier: Apache-2.0
//
// Conditional next-word distribution p(y_next | x, y_c): a feed-forward
// language model over a window of C previous summary words plus an encoder
// term computed from the input sentence.
//
//   emb    = [E y_{i-C+1}, ..., E y_i]
//   h      = tanh(U emb + b_U)
//   logits = V h + b_V + W enc(x, y_c) + b_W
//
// Encoders:
//   bow        uniform average of F x_j
//   conv       L x (temporal convolution, pairwise max-pool, tanh), then
//              max over time
//   attention  softmax over positions of (F x_j)^T P [G y_c], applied to a
//              windowed mean of F x

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "attnsum/corpus.hpp"
#include "attnsum/numerics.hpp"

namespace attnsum {

enum class EncoderKind : std::uint8_t { none = 0, bow = 1, conv = 2, attention = 3 };

std::string_view to_string(EncoderKind kind);
/// Accepts "none", "bow", "conv", "attention". Throws std::invalid_argument.
EncoderKind parse_encoder_kind(std::string_view name);

struct Hyperparams {
  std::size_t D = 200;  // context embedding size
  std::size_t H = 400;  // hidden / encoder size
  std::size_t C = 5;    // context window
  std::size_t L = 3;    // conv layers
  std::size_t Q = 2;    // conv filter and attention smoothing half-width
  std::size_t V = 0;    // vocabulary size
  EncoderKind encoder = EncoderKind::attention;

  /// Throws std::invalid_argument unless every size is positive.
  void validate() const;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct Model {
  Hyperparams hyper;
  ParamStore params;
};

/// Fresh parameters drawn uniformly from [-0.05, 0.05]; reproducible by seed.
Model init_model(const Hyperparams& hyper, std::uint64_t seed);

/// Names of the embedding tables (per-word columns) present in the model.
std::vector<std::string> embedding_tables(const Model& model);

/// The C ids preceding position `i` of `y`, left-padded with the start symbol.
std::vector<TokenId> context_at(std::span<const TokenId> y, std::size_t i, std::size_t C);
/// Slides a context window one token to the right.
void push_context(std::vector<TokenId>& context, TokenId next);

std::vector<double> enc_bow(const Model& model, std::span<const TokenId> x);

struct ConvOptions {
  bool apply_tanh = true;
};
/// Zero-padded at both edges; an odd-width layer pools its last position alone.
std::vector<double> enc_conv(const Model& model, std::span<const TokenId> x,
                             ConvOptions options = {});

struct AttentionOutput {
  std::vector<double> encoding;  // H
  std::vector<double> weights;   // M, sums to 1
};
AttentionOutput enc_attention(const Model& model, std::span<const TokenId> x,
                              std::span<const TokenId> context);

std::vector<double> logits(const Model& model, std::span<const TokenId> x,
                           std::span<const TokenId> context);
std::vector<double> cond_dist(const Model& model, std::span<const TokenId> x,
                              std::span<const TokenId> context);
std::vector<double> log_cond_dist(const Model& model, std::span<const TokenId> x,
                                  std::span<const TokenId> context);

/// log p(. | x, c) for several contexts sharing one input. Context-free
/// encoders are evaluated once for the whole batch.
std::vector<std::vector<double>> log_cond_dist_batch(
    const Model& model, std::span<const TokenId> x,
    std::span<const std::vector<TokenId>> contexts);

struct StepExample {
  std::vector<TokenId> input;
  std::vector<TokenId> context;
  TokenId next = 0;
};

/// Adds the gradient of sum_k -log p(next_k | input_k, context_k) to
/// `sink.grad(...)` and returns that summed NLL. `sink` must have the
/// model's parameter names and shapes (it may be model.params itself).
double backward(const Model& model, std::span<const StepExample> batch, ParamStore& sink);

/// Same objective over whole pairs, every headline token predicted from its
/// start-padded context. Context-free encoders run once per pair.
double backward_pairs(const Model& model, std::span<const Pair> pairs, ParamStore& sink);

/// Summed token NLL of one pair.
double pair_nll(const Model& model, const Pair& pair);

}  // namespace attnsum
