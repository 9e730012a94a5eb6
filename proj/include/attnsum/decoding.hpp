// SPDX-License-Identifier: Apache-2.0
//
// Summary generation under a factored scorer s(x, y) = sum_i g(y_{i+1}, x, y_c).

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnsum/corpus.hpp"
#include "attnsum/model.hpp"

namespace attnsum {

/// Per-step scorer g(y_next, x, y_c) evaluated for every y_next at once.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t context_size() const = 0;
  /// One row of vocab_size() scores per context; all contexts share `x`.
  virtual std::vector<std::vector<double>> score(
      std::span<const TokenId> x, std::span<const std::vector<TokenId>> contexts) const = 0;
};

/// g = log p(y_next | x, y_c) under a trained model.
class ModelScorer final : public StepScorer {
 public:
  explicit ModelScorer(const Model& model) : model_(model) {}
  std::size_t vocab_size() const override { return model_.hyper.V; }
  std::size_t context_size() const override { return model_.hyper.C; }
  std::vector<std::vector<double>> score(
      std::span<const TokenId> x, std::span<const std::vector<TokenId>> contexts) const override;

 private:
  const Model& model_;
};

enum class DecodeMode { abstractive, extractive };

DecodeMode parse_decode_mode(std::string_view name);

struct DecodeConfig {
  std::size_t length = 8;  // N, output tokens
  std::size_t beam = 5;    // K
  DecodeMode mode = DecodeMode::abstractive;
  std::optional<std::size_t> byte_cap;
  bool forbid_unk = true;

  /// Throws std::invalid_argument unless N >= 1 and K >= 1.
  void validate() const;
};

struct Hypothesis {
  std::vector<TokenId> tokens;
  double score = 0.0;            // sum of per-step g
  std::vector<TokenId> context;  // last C tokens, start-padded
};

/// Total order used everywhere in decoding: higher score first, then the
/// lexicographically smaller token sequence.
bool better(const Hypothesis& a, const Hypothesis& b);

/// Tokens a hypothesis may be extended with: the whole vocabulary or the
/// types of `x`, minus the start/padding symbols (and UNK when forbidden).
/// Sorted ascending.
std::vector<TokenId> candidate_set(std::span<const TokenId> x, std::size_t vocab_size,
                                   const DecodeConfig& config);

/// Sees every step's expansions and the survivors kept after recombination
/// and K-best filtering.
using BeamObserver = std::function<void(std::size_t step, std::span<const Hypothesis> expanded,
                                        std::span<const Hypothesis> survivors)>;

/// K-best beam search with recombination of hypotheses that share a context
/// window. Returns at most K hypotheses, best first.
std::vector<Hypothesis> beam_search(const StepScorer& scorer, std::span<const TokenId> x,
                                    const DecodeConfig& config, const BeamObserver& observer = {});

/// Picks the single best next token at every step (lowest id on ties).
Hypothesis greedy(const StepScorer& scorer, std::span<const TokenId> x, const DecodeConfig& config);

inline constexpr std::size_t kViterbiStateCap = 1'000'000;

/// Exact argmax by dynamic programming over context states. Throws
/// std::invalid_argument when V^C exceeds kViterbiStateCap.
Hypothesis viterbi_exact(const StepScorer& scorer, std::span<const TokenId> x,
                         const DecodeConfig& config);

/// Cuts `text` to at most `max_bytes` bytes without splitting a UTF-8
/// sequence.
std::string truncate_utf8(std::string_view text, std::size_t max_bytes);

/// Detokenizes with single spaces and applies the byte cap, if any.
std::string finalize(const Hypothesis& hyp, const DecodeConfig& config, const Vocab& vocab);

/// PREFIX baseline: the first `byte_cap` bytes of the tokenized input. A
/// word cut by the cap is dropped, so every output token is an input token.
std::string prefix_summary(std::string_view line, std::size_t byte_cap);

/// Rows are output steps, columns input positions. Row i is the attention
/// distribution used to generate token i.
using AttentionTrace = std::vector<std::vector<double>>;

/// Throws std::invalid_argument for models without an attention encoder.
AttentionTrace attention_trace(const Model& model, std::span<const TokenId> x,
                               std::span<const TokenId> summary);

void write_trace_tsv(std::ostream& os, const AttentionTrace& trace);

}  // namespace attnsum
