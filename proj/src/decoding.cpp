// SPDX-License-Identifier: Apache-2.0

#include "attnsum/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>

namespace attnsum {

std::vector<std::vector<double>> ModelScorer::score(
    std::span<const TokenId> x, std::span<const std::vector<TokenId>> contexts) const {
  return log_cond_dist_batch(model_, x, contexts);
}

DecodeMode parse_decode_mode(std::string_view name) {
  if (name == "abstractive") return DecodeMode::abstractive;
  if (name == "extractive") return DecodeMode::extractive;
  throw std::invalid_argument("unknown decode mode: " + std::string(name));
}

void DecodeConfig::validate() const {
  if (length < 1) throw std::invalid_argument("decode: output length N must be >= 1");
  if (beam < 1) throw std::invalid_argument("decode: beam size K must be >= 1");
}

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

std::vector<TokenId> candidate_set(std::span<const TokenId> x, std::size_t vocab_size,
                                   const DecodeConfig& config) {
  auto allowed = [&](TokenId id) {
    if (id == Vocab::kStart || id == Vocab::kPad) return false;
    if (id == Vocab::kUnk && config.forbid_unk) return false;
    return id < vocab_size;
  };
  std::vector<TokenId> out;
  if (config.mode == DecodeMode::abstractive) {
    for (TokenId id = 0; id < vocab_size; ++id) {
      if (allowed(id)) out.push_back(id);
    }
  } else {
    for (TokenId id : x) {
      if (allowed(id)) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  if (out.empty()) throw std::invalid_argument("decode: empty candidate set");
  return out;
}

namespace {

Hypothesis start_hypothesis(std::size_t C) {
  return {{}, 0.0, std::vector<TokenId>(C, Vocab::kStart)};
}

std::vector<std::vector<TokenId>> contexts_of(std::span<const Hypothesis> hyps) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(hyps.size());
  for (const auto& h : hyps) out.push_back(h.context);
  return out;
}

Hypothesis extend(const Hypothesis& h, TokenId next, double g) {
  Hypothesis n;
  n.tokens.reserve(h.tokens.size() + 1);
  n.tokens = h.tokens;
  n.tokens.push_back(next);
  n.score = h.score + g;
  n.context = h.context;
  push_context(n.context, next);
  return n;
}

// Keeps the best hypothesis of each context class, in `better` order.
std::vector<Hypothesis> recombine(std::vector<Hypothesis> expanded) {
  std::map<std::vector<TokenId>, std::size_t> best;
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    auto [it, inserted] = best.emplace(expanded[i].context, i);
    if (!inserted && better(expanded[i], expanded[it->second])) it->second = i;
  }
  std::vector<Hypothesis> out;
  out.reserve(best.size());
  for (const auto& [ctx, i] : best) out.push_back(std::move(expanded[i]));
  std::sort(out.begin(), out.end(), better);
  return out;
}

}  // namespace

std::vector<Hypothesis> beam_search(const StepScorer& scorer, std::span<const TokenId> x,
                                    const DecodeConfig& config, const BeamObserver& observer) {
  config.validate();
  if (x.empty()) throw std::invalid_argument("decode: empty input");
  const auto candidates = candidate_set(x, scorer.vocab_size(), config);
  std::vector<Hypothesis> beam{start_hypothesis(scorer.context_size())};

  for (std::size_t step = 0; step < config.length; ++step) {
    const auto contexts = contexts_of(beam);
    const auto g = scorer.score(x, contexts);
    std::vector<Hypothesis> expanded;
    expanded.reserve(beam.size() * candidates.size());
    for (std::size_t k = 0; k < beam.size(); ++k) {
      for (TokenId next : candidates) expanded.push_back(extend(beam[k], next, g[k][next]));
    }
    std::vector<Hypothesis> survivors =
        observer ? recombine(expanded) : recombine(std::move(expanded));
    if (survivors.size() > config.beam) survivors.resize(config.beam);
    if (observer) observer(step, expanded, survivors);
    beam = std::move(survivors);
  }
  return beam;
}

Hypothesis greedy(const StepScorer& scorer, std::span<const TokenId> x, const DecodeConfig& config) {
  config.validate();
  if (x.empty()) throw std::invalid_argument("decode: empty input");
  const auto candidates = candidate_set(x, scorer.vocab_size(), config);
  Hypothesis h = start_hypothesis(scorer.context_size());
  for (std::size_t step = 0; step < config.length; ++step) {
    const std::vector<std::vector<TokenId>> ctx{h.context};
    const auto g = scorer.score(x, ctx).front();
    TokenId best = candidates.front();
    for (TokenId c : candidates) {
      if (g[c] > g[best]) best = c;
    }
    h = extend(h, best, g[best]);
  }
  return h;
}

Hypothesis viterbi_exact(const StepScorer& scorer, std::span<const TokenId> x,
                         const DecodeConfig& config) {
  config.validate();
  if (x.empty()) throw std::invalid_argument("decode: empty input");
  const double states = std::pow(static_cast<double>(scorer.vocab_size()),
                                 static_cast<double>(scorer.context_size()));
  if (states > static_cast<double>(kViterbiStateCap)) {
    throw std::invalid_argument("viterbi: V^C = " + std::to_string(states) +
                                " exceeds the exact-search cap; use beam search instead");
  }
  const auto candidates = candidate_set(x, scorer.vocab_size(), config);

  // state (context window) -> best partial hypothesis reaching it
  std::map<std::vector<TokenId>, Hypothesis> chart;
  auto start = start_hypothesis(scorer.context_size());
  chart.emplace(start.context, start);
  for (std::size_t step = 0; step < config.length; ++step) {
    std::vector<const Hypothesis*> live;
    std::vector<std::vector<TokenId>> contexts;
    for (const auto& [ctx, h] : chart) {
      live.push_back(&h);
      contexts.push_back(ctx);
    }
    const auto g = scorer.score(x, contexts);
    std::map<std::vector<TokenId>, Hypothesis> next;
    for (std::size_t k = 0; k < live.size(); ++k) {
      for (TokenId c : candidates) {
        Hypothesis n = extend(*live[k], c, g[k][c]);
        auto it = next.find(n.context);
        if (it == next.end()) {
          next.emplace(n.context, std::move(n));
        } else if (better(n, it->second)) {
          it->second = std::move(n);
        }
      }
    }
    chart = std::move(next);
  }
  const Hypothesis* best = nullptr;
  for (const auto& [ctx, h] : chart) {
    if (!best || better(h, *best)) best = &h;
  }
  return *best;
}

std::string truncate_utf8(std::string_view text, std::size_t max_bytes) {
  if (text.size() <= max_bytes) return std::string(text);
  std::size_t k = max_bytes;
  // text[k] is the first excluded byte; if it continues a character, drop
  // that character's leading bytes too.
  while (k > 0 && (static_cast<unsigned char>(text[k]) & 0xC0) == 0x80) --k;
  return std::string(text.substr(0, k));
}

std::string finalize(const Hypothesis& hyp, const DecodeConfig& config, const Vocab& vocab) {
  std::string text = join_tokens(vocab.decode(hyp.tokens));
  if (config.byte_cap) {
    text = truncate_utf8(text, *config.byte_cap);
    while (!text.empty() && text.back() == ' ') text.pop_back();
  }
  return text;
}

std::string prefix_summary(std::string_view line, std::size_t byte_cap) {
  const std::string text = join_tokens(preprocess(line));
  if (text.size() <= byte_cap) return text;
  std::string cut = truncate_utf8(text, byte_cap);
  if (text[cut.size()] != ' ') {
    const auto sp = cut.find_last_of(' ');
    cut.resize(sp == std::string::npos ? 0 : sp);
  }
  while (!cut.empty() && cut.back() == ' ') cut.pop_back();
  return cut;
}

AttentionTrace attention_trace(const Model& model, std::span<const TokenId> x,
                               std::span<const TokenId> summary) {
  if (model.hyper.encoder != EncoderKind::attention) {
    throw std::invalid_argument(
        "attention trace requires a model trained with the attention encoder (got " +
        std::string(to_string(model.hyper.encoder)) + ")");
  }
  AttentionTrace trace;
  for (std::size_t i = 0; i < summary.size(); ++i) {
    const auto ctx = context_at(summary, i, model.hyper.C);
    trace.push_back(enc_attention(model, x, ctx).weights);
  }
  return trace;
}

void write_trace_tsv(std::ostream& os, const AttentionTrace& trace) {
  const auto old = os.precision(10);
  for (const auto& row : trace) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "\t" : "") << row[j];
    os << '\n';
  }
  os.precision(old);
}

}  // namespace attnsum
