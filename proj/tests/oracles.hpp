// SPDX-License-Identifier: Apache-2.0
//
// Second implementations used as test oracles. Written as plain loops over
// named parameters and kept free of the library's internal helpers.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "attnsum/decoding.hpp"
#include "attnsum/model.hpp"

namespace oracle {

using attnsum::Model;
using attnsum::TokenId;
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // rows = positions, cols = channels

inline double at(const Model& m, const std::string& name, std::size_t r, std::size_t c) {
  return m.params.value(name)(r, c);
}
inline double at(const Model& m, const std::string& name, std::size_t i) {
  return m.params.value(name).data()[i];
}

inline Vec column(const Model& m, const std::string& table, TokenId id) {
  const auto& t = m.params.value(table);
  Vec v(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) v[r] = t(r, id);
  return v;
}

inline Vec bow(const Model& m, const std::vector<TokenId>& x) {
  Vec out(m.hyper.H, 0.0);
  for (TokenId id : x) {
    const Vec f = column(m, "F", id);
    for (std::size_t r = 0; r < out.size(); ++r) out[r] += f[r];
  }
  for (double& v : out) v /= static_cast<double>(x.size());
  return out;
}

// Temporal convolution over an explicitly zero-padded sequence, pairwise
// max pooling (odd tail alone), optional tanh, then max over time.
inline Vec conv(const Model& m, const std::vector<TokenId>& x, bool apply_tanh = true) {
  const std::size_t H = m.hyper.H, Q = m.hyper.Q;
  Mat seq;
  for (TokenId id : x) seq.push_back(column(m, "F", id));
  for (std::size_t l = 0; l < m.hyper.L; ++l) {
    const std::string fname = "Q" + std::to_string(l + 1);
    const std::string bname = "b_Q" + std::to_string(l + 1);
    Mat padded(Q, Vec(H, 0.0));
    padded.insert(padded.end(), seq.begin(), seq.end());
    for (std::size_t k = 0; k < Q; ++k) padded.push_back(Vec(H, 0.0));
    Mat conv(seq.size(), Vec(H, 0.0));
    for (std::size_t i = 0; i < seq.size(); ++i) {
      for (std::size_t r = 0; r < H; ++r) {
        double s = at(m, bname, r);
        for (std::size_t t = 0; t <= 2 * Q; ++t) {
          for (std::size_t c = 0; c < H; ++c) s += at(m, fname, r, t * H + c) * padded[i + t][c];
        }
        conv[i][r] = s;
      }
    }
    Mat pooled;
    for (std::size_t i = 0; i < conv.size(); i += 2) {
      Vec v(H);
      for (std::size_t c = 0; c < H; ++c) {
        double best = conv[i][c];
        if (i + 1 < conv.size()) best = std::max(best, conv[i + 1][c]);
        v[c] = apply_tanh ? std::tanh(best) : best;
      }
      pooled.push_back(v);
    }
    seq = pooled;
  }
  Vec out(H);
  for (std::size_t c = 0; c < H; ++c) {
    double best = seq[0][c];
    for (const auto& row : seq) best = std::max(best, row[c]);
    out[c] = best;
  }
  return out;
}

struct Attention {
  Vec encoding;
  Vec p;
};

inline Attention attention(const Model& m, const std::vector<TokenId>& x,
                           const std::vector<TokenId>& ctx) {
  const std::size_t H = m.hyper.H, D = m.hyper.D, Q = m.hyper.Q, M = x.size();
  Vec yc;  // [G y_1; ...; G y_C]
  for (TokenId id : ctx) {
    const Vec g = column(m, "G", id);
    yc.insert(yc.end(), g.begin(), g.end());
  }
  Vec score(M, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t r = 0; r < H; ++r) {
      double py = 0.0;
      for (std::size_t k = 0; k < ctx.size() * D; ++k) py += at(m, "P", r, k) * yc[k];
      score[i] += at(m, "F", r, x[i]) * py;
    }
  }
  double mx = score[0];
  for (double s : score) mx = std::max(mx, s);
  double z = 0.0;
  Vec p(M);
  for (std::size_t i = 0; i < M; ++i) z += p[i] = std::exp(score[i] - mx);
  for (double& v : p) v /= z;
  Vec enc(H, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    for (long q = static_cast<long>(i) - static_cast<long>(Q); q <= static_cast<long>(i + Q); ++q) {
      if (q < 0 || q >= static_cast<long>(M)) continue;  // zero padding
      for (std::size_t r = 0; r < H; ++r) {
        enc[r] += p[i] * at(m, "F", r, x[static_cast<std::size_t>(q)]) / static_cast<double>(2 * Q + 1);
      }
    }
  }
  return {enc, p};
}

inline Vec log_probs(const Model& m, const std::vector<TokenId>& x, const std::vector<TokenId>& ctx) {
  const auto& hp = m.hyper;
  Vec emb;
  for (TokenId id : ctx) {
    const Vec e = column(m, "E", id);
    emb.insert(emb.end(), e.begin(), e.end());
  }
  Vec h(hp.H);
  for (std::size_t r = 0; r < hp.H; ++r) {
    double s = at(m, "b_U", r);
    for (std::size_t k = 0; k < emb.size(); ++k) s += at(m, "U", r, k) * emb[k];
    h[r] = std::tanh(s);
  }
  Vec enc;
  switch (hp.encoder) {
    case attnsum::EncoderKind::none: break;
    case attnsum::EncoderKind::bow: enc = bow(m, x); break;
    case attnsum::EncoderKind::conv: enc = conv(m, x); break;
    case attnsum::EncoderKind::attention: enc = attention(m, x, ctx).encoding; break;
  }
  Vec logit(hp.V);
  for (std::size_t v = 0; v < hp.V; ++v) {
    double s = at(m, "b_V", v);
    for (std::size_t r = 0; r < hp.H; ++r) s += at(m, "V", v, r) * h[r];
    if (!enc.empty()) {
      s += at(m, "b_W", v);
      for (std::size_t r = 0; r < hp.H; ++r) s += at(m, "W", v, r) * enc[r];
    }
    logit[v] = s;
  }
  double mx = logit[0];
  for (double s : logit) mx = std::max(mx, s);
  double z = 0.0;
  for (double s : logit) z += std::exp(s - mx);
  const double lz = mx + std::log(z);
  for (double& s : logit) s -= lz;
  return logit;
}

inline double sequence_nll(const Model& m, const std::vector<TokenId>& x,
                           const std::vector<TokenId>& y) {
  double total = 0.0;
  std::vector<TokenId> ctx(m.hyper.C, attnsum::Vocab::kStart);
  for (TokenId t : y) {
    total -= log_probs(m, x, ctx)[t];
    ctx.erase(ctx.begin());
    ctx.push_back(t);
  }
  return total;
}

struct Best {
  std::vector<TokenId> tokens;
  double score = -INFINITY;
};

// Full enumeration of cands^N in lexicographic order. Scores accumulate
// left to right exactly as a decoder would; the first maximum wins, which
// is the lexicographically smallest among equal scores.
inline Best enumerate(const attnsum::StepScorer& scorer, const std::vector<TokenId>& x,
                      const std::vector<TokenId>& cands, std::size_t N) {
  Best best;
  std::vector<TokenId> seq;
  const std::size_t C = scorer.context_size();
  std::function<void(std::vector<TokenId>, double)> rec = [&](std::vector<TokenId> ctx, double s) {
    if (seq.size() == N) {
      if (s > best.score) best = {seq, s};
      return;
    }
    const std::vector<std::vector<TokenId>> one{ctx};
    const auto g = scorer.score(x, one).front();
    for (TokenId c : cands) {
      seq.push_back(c);
      auto next = ctx;
      next.erase(next.begin());
      next.push_back(c);
      rec(next, s + g[c]);
      seq.pop_back();
    }
  };
  rec(std::vector<TokenId>(C, attnsum::Vocab::kStart), 0.0);
  return best;
}

// Indicators from the feature definitions, evaluated by brute force over
// input positions (0-based j, k).
inline std::array<double, 4> match(const std::vector<TokenId>& x, const std::vector<TokenId>& ctx,
                                   TokenId next) {
  auto real = [](TokenId t) { return t != attnsum::Vocab::kStart && t != attnsum::Vocab::kPad; };
  const std::size_t C = ctx.size();
  std::array<double, 4> f{0, 0, 0, 0};
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] == next) f[0] = 1;
    if (C >= 1 && real(ctx[C - 1]) && j >= 1 && x[j - 1] == ctx[C - 1] && x[j] == next) f[1] = 1;
    if (C >= 2 && real(ctx[C - 1]) && real(ctx[C - 2]) && j >= 2 && x[j - 2] == ctx[C - 2] &&
        x[j - 1] == ctx[C - 1] && x[j] == next) {
      f[2] = 1;
    }
    for (std::size_t k = j + 1; k < x.size(); ++k) {
      if (C >= 1 && real(ctx[C - 1]) && x[k] == ctx[C - 1] && x[j] == next) f[3] = 1;
    }
  }
  return f;
}

inline std::vector<TokenId> random_ids(std::mt19937_64& rng, std::size_t n, std::size_t V,
                                       TokenId lo = 3) {
  std::uniform_int_distribution<TokenId> d(lo, static_cast<TokenId>(V - 1));
  std::vector<TokenId> out(n);
  for (auto& t : out) t = d(rng);
  return out;
}

// Random model with weights spread wide enough that decoding has real
// choices to make.
inline Model random_model(const attnsum::Hyperparams& hp, std::uint64_t seed, double scale = 1.0) {
  Model m = attnsum::init_model(hp, seed);
  std::mt19937_64 rng(seed * 7919 + 13);
  std::normal_distribution<double> n(0.0, scale);
  for (const auto& name : m.params.names()) {
    for (double& v : m.params.value(name).data()) v = n(rng);
  }
  return m;
}

}  // namespace oracle
