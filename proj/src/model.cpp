// SPDX-License-Identifier: Apache-2.0

#include "attnsum/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "attnsum/errors.hpp"

namespace attnsum {

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::none: return "none";
    case EncoderKind::bow: return "bow";
    case EncoderKind::conv: return "conv";
    case EncoderKind::attention: return "attention";
  }
  return "?";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "none") return EncoderKind::none;
  if (name == "bow") return EncoderKind::bow;
  if (name == "conv") return EncoderKind::conv;
  if (name == "attention") return EncoderKind::attention;
  throw std::invalid_argument("unknown encoder kind: " + std::string(name));
}

void Hyperparams::validate() const {
  if (D == 0 || H == 0 || C == 0 || L == 0 || V == 0) {
    throw std::invalid_argument("Hyperparams: D, H, C, L and V must be positive");
  }
  if (V <= Vocab::kReserved) throw std::invalid_argument("Hyperparams: V too small");
}

namespace {

std::string filter_name(std::size_t l) { return "Q" + std::to_string(l + 1); }
std::string filter_bias_name(std::size_t l) { return "b_Q" + std::to_string(l + 1); }

// Borrowed views of the tensors a forward/backward pass touches.
template <typename T>
struct Refs {
  T* E = nullptr;
  T* U = nullptr;
  T* bU = nullptr;
  T* V = nullptr;
  T* bV = nullptr;
  T* W = nullptr;
  T* bW = nullptr;
  T* F = nullptr;
  T* G = nullptr;
  T* P = nullptr;
  std::vector<T*> Qf;
  std::vector<T*> Qb;
};

template <typename T, typename Get>
Refs<T> resolve(const Hyperparams& hp, Get get) {
  Refs<T> r;
  r.E = &get("E");
  r.U = &get("U");
  r.bU = &get("b_U");
  r.V = &get("V");
  r.bV = &get("b_V");
  if (hp.encoder == EncoderKind::none) return r;
  r.W = &get("W");
  r.bW = &get("b_W");
  r.F = &get("F");
  if (hp.encoder == EncoderKind::attention) {
    r.G = &get("G");
    r.P = &get("P");
  }
  if (hp.encoder == EncoderKind::conv) {
    for (std::size_t l = 0; l < hp.L; ++l) {
      r.Qf.push_back(&get(filter_name(l)));
      r.Qb.push_back(&get(filter_bias_name(l)));
    }
  }
  return r;
}

Refs<const Tensor> weights_of(const Model& m) {
  return resolve<const Tensor>(m.hyper, [&](const std::string& n) -> const Tensor& {
    return m.params.value(n);
  });
}

Refs<Tensor> grads_of(const Hyperparams& hp, ParamStore& sink) {
  return resolve<Tensor>(hp, [&](const std::string& n) -> Tensor& { return sink.grad(n); });
}

void check_ids(std::span<const TokenId> ids, std::size_t V, const char* what) {
  for (TokenId id : ids) {
    if (id >= V) {
      throw DataError(std::string(what) + ": token id " + std::to_string(id) +
                      " out of range for vocabulary of " + std::to_string(V));
    }
  }
}

void check_inputs(const Model& m, std::span<const TokenId> x, std::span<const TokenId> ctx) {
  if (x.empty()) throw std::invalid_argument("model: empty input sentence");
  if (ctx.size() != m.hyper.C) throw std::invalid_argument("model: context length must equal C");
  check_ids(x, m.hyper.V, "input");
  check_ids(ctx, m.hyper.V, "context");
}

// Rows of the returned M x n matrix are the embedding columns of `table`.
Tensor gather_columns(const Tensor& table, std::span<const TokenId> ids) {
  const std::size_t n = table.rows();
  Tensor out = Tensor::matrix(ids.size(), n);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t d = 0; d < n; ++d) out(i, d) = table(d, ids[i]);
  }
  return out;
}

std::vector<double> concat_columns(const Tensor& table, std::span<const TokenId> ids) {
  const std::size_t n = table.rows();
  std::vector<double> out(ids.size() * n);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    for (std::size_t d = 0; d < n; ++d) out[k * n + d] = table(d, ids[k]);
  }
  return out;
}

void scatter_columns(Tensor& grad, std::span<const TokenId> ids, std::span<const double> d) {
  const std::size_t n = grad.rows();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    for (std::size_t r = 0; r < n; ++r) grad(r, ids[k]) += d[k * n + r];
  }
}

// --- bag of words ----------------------------------------------------------

std::vector<double> bow_forward(const Refs<const Tensor>& w, std::span<const TokenId> x) {
  const Tensor& F = *w.F;
  std::vector<double> out(F.rows(), 0.0);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (TokenId id : x) {
    for (std::size_t r = 0; r < F.rows(); ++r) out[r] += F(r, id);
  }
  for (double& v : out) v *= scale;
  return out;
}

void bow_backward(Refs<Tensor>& g, std::span<const TokenId> x, std::span<const double> denc) {
  const double scale = 1.0 / static_cast<double>(x.size());
  for (TokenId id : x) {
    for (std::size_t r = 0; r < denc.size(); ++r) (*g.F)(r, id) += scale * denc[r];
  }
}

// --- convolution -----------------------------------------------------------

struct ConvLayer {
  Tensor input;                       // w x H
  Tensor conv;                        // w x H, pre-pooling
  std::vector<std::uint32_t> argmax;  // ceil(w/2) x H, row index into conv
  Tensor pooled;                      // ceil(w/2) x H, after the nonlinearity
};

struct ConvCache {
  std::vector<ConvLayer> layers;
  std::vector<std::uint32_t> final_argmax;  // H
  std::vector<double> output;               // H
  bool apply_tanh = true;
};

ConvCache conv_forward(const Refs<const Tensor>& w, const Hyperparams& hp,
                       std::span<const TokenId> x, bool apply_tanh) {
  const std::size_t H = hp.H;
  const std::size_t Q = hp.Q;
  ConvCache cache;
  cache.apply_tanh = apply_tanh;
  Tensor X = gather_columns(*w.F, x);
  for (std::size_t l = 0; l < hp.L; ++l) {
    const Tensor& filt = *w.Qf[l];
    const Tensor& bias = *w.Qb[l];
    const std::size_t width = X.rows();
    Tensor Y = Tensor::matrix(width, H);
    for (std::size_t i = 0; i < width; ++i) {
      auto y = Y.row(i);
      for (std::size_t r = 0; r < H; ++r) y[r] = bias[r];
      for (std::size_t t = 0; t <= 2 * Q; ++t) {
        if (i + t < Q || i + t - Q >= width) continue;
        const auto xin = X.row(i + t - Q);
        for (std::size_t r = 0; r < H; ++r) {
          const double* f = filt.row(r).data() + t * H;
          double acc = 0.0;
          for (std::size_t c = 0; c < H; ++c) acc += f[c] * xin[c];
          y[r] += acc;
        }
      }
    }
    const std::size_t pooled_width = (width + 1) / 2;
    Tensor Z = Tensor::matrix(pooled_width, H);
    std::vector<std::uint32_t> arg(pooled_width * H);
    for (std::size_t j = 0; j < pooled_width; ++j) {
      const std::size_t a = 2 * j;
      const std::size_t b = 2 * j + 1;
      for (std::size_t c = 0; c < H; ++c) {
        std::size_t best = a;
        if (b < width && Y(b, c) > Y(a, c)) best = b;
        arg[j * H + c] = static_cast<std::uint32_t>(best);
        Z(j, c) = apply_tanh ? std::tanh(Y(best, c)) : Y(best, c);
      }
    }
    cache.layers.push_back({std::move(X), std::move(Y), std::move(arg), Z});
    X = std::move(Z);
  }
  cache.output.assign(H, 0.0);
  cache.final_argmax.assign(H, 0);
  for (std::size_t c = 0; c < H; ++c) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < X.rows(); ++j) {
      if (X(j, c) > X(best, c)) best = j;
    }
    cache.final_argmax[c] = static_cast<std::uint32_t>(best);
    cache.output[c] = X(best, c);
  }
  return cache;
}

void conv_backward(const Refs<const Tensor>& w, Refs<Tensor>& g, const Hyperparams& hp,
                   std::span<const TokenId> x, const ConvCache& cache,
                   std::span<const double> denc) {
  const std::size_t H = hp.H;
  const std::size_t Q = hp.Q;
  Tensor dX = Tensor::matrix(cache.layers.back().pooled.rows(), H);
  for (std::size_t c = 0; c < H; ++c) dX(cache.final_argmax[c], c) += denc[c];

  for (std::size_t l = hp.L; l-- > 0;) {
    const ConvLayer& layer = cache.layers[l];
    const Tensor& filt = *w.Qf[l];
    Tensor& gfilt = *g.Qf[l];
    Tensor& gbias = *g.Qb[l];
    const std::size_t width = layer.conv.rows();

    Tensor dY = Tensor::matrix(width, H);
    for (std::size_t j = 0; j < layer.pooled.rows(); ++j) {
      for (std::size_t c = 0; c < H; ++c) {
        double d = dX(j, c);
        if (cache.apply_tanh) d *= 1.0 - layer.pooled(j, c) * layer.pooled(j, c);
        dY(layer.argmax[j * H + c], c) += d;
      }
    }

    Tensor dIn = Tensor::matrix(width, H);
    for (std::size_t i = 0; i < width; ++i) {
      const auto dy = dY.row(i);
      for (std::size_t r = 0; r < H; ++r) gbias[r] += dy[r];
      for (std::size_t t = 0; t <= 2 * Q; ++t) {
        if (i + t < Q || i + t - Q >= width) continue;
        const std::size_t src = i + t - Q;
        const auto xin = layer.input.row(src);
        auto din = dIn.row(src);
        for (std::size_t r = 0; r < H; ++r) {
          const double gr = dy[r];
          if (gr == 0.0) continue;
          double* gf = &gfilt(r, t * H);
          const double* f = filt.row(r).data() + t * H;
          for (std::size_t c = 0; c < H; ++c) {
            gf[c] += gr * xin[c];
            din[c] += gr * f[c];
          }
        }
      }
    }
    dX = std::move(dIn);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t c = 0; c < H; ++c) (*g.F)(c, x[i]) += dX(i, c);
  }
}

// --- attention -------------------------------------------------------------

struct AttnCache {
  Tensor embedded;              // M x H, F x_j
  std::vector<double> ctx_emb;  // C*D, G y_c
  std::vector<double> query;    // H, P ctx_emb
  std::vector<double> weights;  // M
  Tensor smoothed;              // M x H
  std::vector<double> output;   // H
};

AttnCache attention_forward(const Refs<const Tensor>& w, const Hyperparams& hp,
                            std::span<const TokenId> x, std::span<const TokenId> ctx) {
  const std::size_t M = x.size();
  const std::size_t H = hp.H;
  const std::size_t Q = hp.Q;
  AttnCache a;
  a.embedded = gather_columns(*w.F, x);
  a.ctx_emb = concat_columns(*w.G, ctx);
  a.query = affine(*w.P, a.ctx_emb, {});
  std::vector<double> scores(M, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    const auto e = a.embedded.row(i);
    for (std::size_t c = 0; c < H; ++c) scores[i] += e[c] * a.query[c];
  }
  a.weights = softmax(scores);

  const double norm = 1.0 / static_cast<double>(2 * Q + 1);
  a.smoothed = Tensor::matrix(M, H);
  for (std::size_t i = 0; i < M; ++i) {
    auto s = a.smoothed.row(i);
    const std::size_t lo = i >= Q ? i - Q : 0;
    const std::size_t hi = std::min(M - 1, i + Q);
    for (std::size_t q = lo; q <= hi; ++q) {
      const auto e = a.embedded.row(q);
      for (std::size_t c = 0; c < H; ++c) s[c] += e[c];
    }
    for (double& v : s) v *= norm;
  }
  a.output.assign(H, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    const auto s = a.smoothed.row(i);
    for (std::size_t c = 0; c < H; ++c) a.output[c] += a.weights[i] * s[c];
  }
  return a;
}

void attention_backward(const Refs<const Tensor>& w, Refs<Tensor>& g, const Hyperparams& hp,
                        std::span<const TokenId> x, std::span<const TokenId> ctx,
                        const AttnCache& a, std::span<const double> denc) {
  const std::size_t M = x.size();
  const std::size_t H = hp.H;
  const std::size_t Q = hp.Q;
  const double norm = 1.0 / static_cast<double>(2 * Q + 1);

  std::vector<double> dweights(M, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    const auto s = a.smoothed.row(i);
    for (std::size_t c = 0; c < H; ++c) dweights[i] += denc[c] * s[c];
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < M; ++i) mean += a.weights[i] * dweights[i];

  Tensor dEmb = Tensor::matrix(M, H);
  std::vector<double> dquery(H, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    const double dscore = a.weights[i] * (dweights[i] - mean);
    // through the smoothing window
    const double ws = a.weights[i] * norm;
    const std::size_t lo = i >= Q ? i - Q : 0;
    const std::size_t hi = std::min(M - 1, i + Q);
    for (std::size_t q = lo; q <= hi; ++q) {
      auto d = dEmb.row(q);
      for (std::size_t c = 0; c < H; ++c) d[c] += ws * denc[c];
    }
    // through the bilinear score
    auto d = dEmb.row(i);
    const auto e = a.embedded.row(i);
    for (std::size_t c = 0; c < H; ++c) {
      d[c] += dscore * a.query[c];
      dquery[c] += dscore * e[c];
    }
  }
  std::vector<double> dctx(a.ctx_emb.size(), 0.0);
  affine_backward(*w.P, a.ctx_emb, dquery, *g.P, {}, dctx);
  scatter_columns(*g.G, ctx, dctx);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t c = 0; c < H; ++c) (*g.F)(c, x[i]) += dEmb(i, c);
  }
}

// --- decoder ---------------------------------------------------------------

struct DecoderCache {
  std::vector<double> emb;     // C*D
  std::vector<double> hidden;  // H
  std::vector<double> logits;  // V
};

DecoderCache decoder_forward(const Refs<const Tensor>& w, const Hyperparams& hp,
                             std::span<const TokenId> ctx, std::span<const double> enc) {
  DecoderCache d;
  d.emb = concat_columns(*w.E, ctx);
  d.hidden = tanh_elem(affine(*w.U, d.emb, w.bU->data()));
  d.logits = affine(*w.V, d.hidden, w.bV->data());
  if (hp.encoder != EncoderKind::none) {
    const auto extra = affine(*w.W, enc, w.bW->data());
    for (std::size_t i = 0; i < d.logits.size(); ++i) d.logits[i] += extra[i];
  }
  return d;
}

// Returns -log p(next) and accumulates decoder gradients; denc (if the model
// has an encoder) receives W^T dlogits.
double decoder_backward(const Refs<const Tensor>& w, Refs<Tensor>& g, const Hyperparams& hp,
                        std::span<const TokenId> ctx, std::span<const double> enc,
                        const DecoderCache& d, TokenId next, std::span<double> denc) {
  auto dlogits = softmax(d.logits);
  const double nll = -std::log(dlogits[next]);
  dlogits[next] -= 1.0;

  std::vector<double> dhidden(hp.H, 0.0);
  affine_backward(*w.V, d.hidden, dlogits, *g.V, g.bV->data(), dhidden);
  if (hp.encoder != EncoderKind::none) {
    affine_backward(*w.W, enc, dlogits, *g.W, g.bW->data(), denc);
  }
  const auto da = tanh_backward(d.hidden, dhidden);
  std::vector<double> demb(d.emb.size(), 0.0);
  affine_backward(*w.U, d.emb, da, *g.U, g.bU->data(), demb);
  scatter_columns(*g.E, ctx, demb);
  return nll;
}

std::vector<double> static_encoding(const Refs<const Tensor>& w, const Hyperparams& hp,
                                    std::span<const TokenId> x) {
  switch (hp.encoder) {
    case EncoderKind::bow: return bow_forward(w, x);
    case EncoderKind::conv: return conv_forward(w, hp, x, true).output;
    default: return {};
  }
}

std::vector<double> encoding_for(const Refs<const Tensor>& w, const Hyperparams& hp,
                                 std::span<const TokenId> x, std::span<const TokenId> ctx) {
  if (hp.encoder == EncoderKind::attention) return attention_forward(w, hp, x, ctx).output;
  return static_encoding(w, hp, x);
}

void require_finite_loss(double nll) {
  if (!std::isfinite(nll)) throw NumericError("non-finite negative log-likelihood");
}

}  // namespace

Model init_model(const Hyperparams& hp, std::uint64_t seed) {
  hp.validate();
  Model m{hp, {}};
  const std::size_t D = hp.D, H = hp.H, C = hp.C, V = hp.V;
  auto& p = m.params;
  p.add("E", Tensor::matrix(D, V));
  p.add("U", Tensor::matrix(H, C * D));
  p.add("b_U", Tensor::vector(H));
  p.add("V", Tensor::matrix(V, H));
  p.add("b_V", Tensor::vector(V));
  if (hp.encoder != EncoderKind::none) {
    p.add("W", Tensor::matrix(V, H));
    p.add("b_W", Tensor::vector(V));
    p.add("F", Tensor::matrix(H, V));
  }
  if (hp.encoder == EncoderKind::attention) {
    p.add("G", Tensor::matrix(D, V));
    p.add("P", Tensor::matrix(H, C * D));
  }
  if (hp.encoder == EncoderKind::conv) {
    for (std::size_t l = 0; l < hp.L; ++l) {
      p.add(filter_name(l), Tensor::matrix(H, H * (2 * hp.Q + 1)));
      p.add(filter_bias_name(l), Tensor::vector(H));
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  for (const auto& name : p.names()) {
    for (double& v : p.value(name).data()) v = dist(rng);
  }
  return m;
}

std::vector<std::string> embedding_tables(const Model& model) {
  std::vector<std::string> out;
  for (const char* n : {"E", "F", "G"}) {
    if (model.params.contains(n)) out.emplace_back(n);
  }
  return out;
}

std::vector<TokenId> context_at(std::span<const TokenId> y, std::size_t i, std::size_t C) {
  std::vector<TokenId> ctx(C, Vocab::kStart);
  for (std::size_t k = 0; k < C; ++k) {
    // slot k holds y[i - C + k]
    if (i + k >= C) ctx[k] = y[i + k - C];
  }
  return ctx;
}

void push_context(std::vector<TokenId>& context, TokenId next) {
  if (context.empty()) return;
  std::rotate(context.begin(), context.begin() + 1, context.end());
  context.back() = next;
}

std::vector<double> enc_bow(const Model& model, std::span<const TokenId> x) {
  if (model.hyper.encoder != EncoderKind::bow) throw std::invalid_argument("enc_bow: wrong encoder");
  if (x.empty()) throw std::invalid_argument("enc_bow: empty input");
  check_ids(x, model.hyper.V, "input");
  return bow_forward(weights_of(model), x);
}

std::vector<double> enc_conv(const Model& model, std::span<const TokenId> x, ConvOptions options) {
  if (model.hyper.encoder != EncoderKind::conv) throw std::invalid_argument("enc_conv: wrong encoder");
  if (x.empty()) throw std::invalid_argument("enc_conv: empty input");
  check_ids(x, model.hyper.V, "input");
  return conv_forward(weights_of(model), model.hyper, x, options.apply_tanh).output;
}

AttentionOutput enc_attention(const Model& model, std::span<const TokenId> x,
                              std::span<const TokenId> context) {
  if (model.hyper.encoder != EncoderKind::attention) {
    throw std::invalid_argument("enc_attention: wrong encoder");
  }
  check_inputs(model, x, context);
  auto a = attention_forward(weights_of(model), model.hyper, x, context);
  return {std::move(a.output), std::move(a.weights)};
}

std::vector<double> logits(const Model& model, std::span<const TokenId> x,
                           std::span<const TokenId> context) {
  check_inputs(model, x, context);
  const auto w = weights_of(model);
  const auto enc = encoding_for(w, model.hyper, x, context);
  return decoder_forward(w, model.hyper, context, enc).logits;
}

std::vector<double> cond_dist(const Model& model, std::span<const TokenId> x,
                              std::span<const TokenId> context) {
  return softmax(logits(model, x, context));
}

std::vector<double> log_cond_dist(const Model& model, std::span<const TokenId> x,
                                  std::span<const TokenId> context) {
  return log_softmax(logits(model, x, context));
}

std::vector<std::vector<double>> log_cond_dist_batch(
    const Model& model, std::span<const TokenId> x,
    std::span<const std::vector<TokenId>> contexts) {
  if (x.empty()) throw std::invalid_argument("model: empty input sentence");
  check_ids(x, model.hyper.V, "input");
  const auto w = weights_of(model);
  const auto& hp = model.hyper;
  const auto shared = static_encoding(w, hp, x);
  std::vector<std::vector<double>> out;
  out.reserve(contexts.size());
  for (const auto& ctx : contexts) {
    check_inputs(model, x, ctx);
    if (hp.encoder == EncoderKind::attention) {
      const auto enc = attention_forward(w, hp, x, ctx).output;
      out.push_back(log_softmax(decoder_forward(w, hp, ctx, enc).logits));
    } else {
      out.push_back(log_softmax(decoder_forward(w, hp, ctx, shared).logits));
    }
  }
  return out;
}

double backward(const Model& model, std::span<const StepExample> batch, ParamStore& sink) {
  if (batch.empty()) throw std::invalid_argument("backward: empty batch");
  const auto& hp = model.hyper;
  const auto w = weights_of(model);
  auto g = grads_of(hp, sink);
  double total = 0.0;
  for (const auto& ex : batch) {
    check_inputs(model, ex.input, ex.context);
    check_ids(std::span(&ex.next, 1), hp.V, "target");
    std::vector<double> denc(hp.H, 0.0);
    switch (hp.encoder) {
      case EncoderKind::none: {
        const auto d = decoder_forward(w, hp, ex.context, {});
        total += decoder_backward(w, g, hp, ex.context, {}, d, ex.next, {});
        break;
      }
      case EncoderKind::bow: {
        const auto enc = bow_forward(w, ex.input);
        const auto d = decoder_forward(w, hp, ex.context, enc);
        total += decoder_backward(w, g, hp, ex.context, enc, d, ex.next, denc);
        bow_backward(g, ex.input, denc);
        break;
      }
      case EncoderKind::conv: {
        const auto cache = conv_forward(w, hp, ex.input, true);
        const auto d = decoder_forward(w, hp, ex.context, cache.output);
        total += decoder_backward(w, g, hp, ex.context, cache.output, d, ex.next, denc);
        conv_backward(w, g, hp, ex.input, cache, denc);
        break;
      }
      case EncoderKind::attention: {
        const auto a = attention_forward(w, hp, ex.input, ex.context);
        const auto d = decoder_forward(w, hp, ex.context, a.output);
        total += decoder_backward(w, g, hp, ex.context, a.output, d, ex.next, denc);
        attention_backward(w, g, hp, ex.input, ex.context, a, denc);
        break;
      }
    }
  }
  require_finite_loss(total);
  return total;
}

double backward_pairs(const Model& model, std::span<const Pair> pairs, ParamStore& sink) {
  const auto& hp = model.hyper;
  const auto w = weights_of(model);
  auto g = grads_of(hp, sink);
  double total = 0.0;
  for (const auto& pair : pairs) {
    const auto& x = pair.article;
    const auto& y = pair.headline;
    if (x.empty() || y.empty()) throw std::invalid_argument("backward_pairs: empty pair side");
    check_ids(x, hp.V, "article");
    check_ids(y, hp.V, "headline");

    std::vector<double> shared;
    ConvCache conv;
    if (hp.encoder == EncoderKind::bow) shared = bow_forward(w, x);
    if (hp.encoder == EncoderKind::conv) {
      conv = conv_forward(w, hp, x, true);
      shared = conv.output;
    }
    std::vector<double> denc_total(hp.H, 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const auto ctx = context_at(y, i, hp.C);
      std::vector<double> denc(hp.H, 0.0);
      if (hp.encoder == EncoderKind::attention) {
        const auto a = attention_forward(w, hp, x, ctx);
        const auto d = decoder_forward(w, hp, ctx, a.output);
        total += decoder_backward(w, g, hp, ctx, a.output, d, y[i], denc);
        attention_backward(w, g, hp, x, ctx, a, denc);
      } else {
        const auto d = decoder_forward(w, hp, ctx, shared);
        std::span<double> dspan = hp.encoder == EncoderKind::none ? std::span<double>() : denc;
        total += decoder_backward(w, g, hp, ctx, shared, d, y[i], dspan);
        for (std::size_t c = 0; c < hp.H; ++c) denc_total[c] += denc[c];
      }
    }
    if (hp.encoder == EncoderKind::bow) bow_backward(g, x, denc_total);
    if (hp.encoder == EncoderKind::conv) conv_backward(w, g, hp, x, conv, denc_total);
  }
  require_finite_loss(total);
  return total;
}

double pair_nll(const Model& model, const Pair& pair) {
  const auto& hp = model.hyper;
  const auto& x = pair.article;
  const auto& y = pair.headline;
  if (x.empty() || y.empty()) throw std::invalid_argument("pair_nll: empty pair side");
  check_ids(x, hp.V, "article");
  check_ids(y, hp.V, "headline");
  const auto w = weights_of(model);
  const auto shared = static_encoding(w, hp, x);
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto ctx = context_at(y, i, hp.C);
    const auto enc = hp.encoder == EncoderKind::attention ? attention_forward(w, hp, x, ctx).output
                                                          : shared;
    const auto d = decoder_forward(w, hp, ctx, enc);
    total += log_sum_exp(d.logits) - d.logits[y[i]];
  }
  return total;
}

}  // namespace attnsum
