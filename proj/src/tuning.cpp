// SPDX-License-Identifier: Apache-2.0

#include "attnsum/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "attnsum/errors.hpp"
#include "attnsum/parallel.hpp"

namespace attnsum {

void FeatureWeights::validate() const {
  for (double a : alpha) {
    if (!std::isfinite(a)) throw std::invalid_argument("feature weights must be finite");
  }
}

std::string weights_json(const FeatureWeights& weights) {
  nlohmann::ordered_json j;
  for (std::size_t k = 0; k < kFeatureCount; ++k) j[kFeatureNames[k]] = weights.alpha[k];
  return j.dump(2);
}

FeatureWeights parse_weights_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("weights: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || j.size() != kFeatureCount) {
    throw DataError("weights: expected an object with exactly 5 components");
  }
  FeatureWeights w;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    const auto it = j.find(kFeatureNames[k]);
    if (it == j.end() || !it->is_number()) {
      throw DataError(std::string("weights: missing or non-numeric ") + kFeatureNames[k]);
    }
    w.alpha[k] = it->get<double>();
  }
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("weights: ") + e.what());
  }
  return w;
}

void save_weights(const std::filesystem::path& path, const FeatureWeights& weights) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os << weights_json(weights) << '\n';
}

FeatureWeights load_weights(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open weights file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_weights_json(ss.str());
}

namespace {

bool matchable(TokenId t) { return t != Vocab::kStart && t != Vocab::kPad; }

}  // namespace

std::array<double, 4> match_features(std::span<const TokenId> x, std::span<const TokenId> context,
                                     TokenId next) {
  std::array<double, 4> f{0.0, 0.0, 0.0, 0.0};
  const std::size_t C = context.size();
  const bool has1 = C >= 1 && matchable(context[C - 1]);
  const bool has2 = has1 && C >= 2 && matchable(context[C - 2]);
  const TokenId y1 = has1 ? context[C - 1] : 0;
  const TokenId y2 = has2 ? context[C - 2] : 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] != next) continue;
    f[0] = 1.0;
    if (has1 && j >= 1 && x[j - 1] == y1) {
      f[1] = 1.0;
      if (has2 && j >= 2 && x[j - 2] == y2) f[2] = 1.0;
    }
    if (has1) {
      for (std::size_t k = j + 1; k < x.size(); ++k) {
        if (x[k] == y1) {
          f[3] = 1.0;
          break;
        }
      }
    }
  }
  return f;
}

FeatureVector features(const Model& model, std::span<const TokenId> x,
                       std::span<const TokenId> context, TokenId next) {
  const auto m = match_features(x, context, next);
  const auto lp = log_cond_dist(model, x, context);
  return {lp.at(next), m[0], m[1], m[2], m[3]};
}

FeatureVector sequence_features(const Model& model, std::span<const TokenId> x,
                                std::span<const TokenId> y) {
  FeatureVector total{};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto f = features(model, x, context_at(y, i, model.hyper.C), y[i]);
    for (std::size_t k = 0; k < kFeatureCount; ++k) total[k] += f[k];
  }
  return total;
}

double tuned_score(std::span<const TokenId> y, std::span<const TokenId> x,
                   const FeatureWeights& weights, const Model& model) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto f = features(model, x, context_at(y, i, model.hyper.C), y[i]);
    for (std::size_t k = 0; k < kFeatureCount; ++k) s += weights.alpha[k] * f[k];
  }
  return s;
}

TunedScorer::TunedScorer(const Model& model, FeatureWeights weights)
    : model_(model), weights_(weights) {
  weights_.validate();
}

std::vector<std::vector<double>> TunedScorer::score(
    std::span<const TokenId> x, std::span<const std::vector<TokenId>> contexts) const {
  auto rows = log_cond_dist_batch(model_, x, contexts);
  std::vector<TokenId> types(x.begin(), x.end());
  std::sort(types.begin(), types.end());
  types.erase(std::unique(types.begin(), types.end()), types.end());
  const auto& a = weights_.alpha;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (double& v : rows[r]) v *= a[0];
    // Only words of x can fire a match feature.
    for (TokenId y : types) {
      if (y >= rows[r].size()) continue;
      const auto m = match_features(x, contexts[r], y);
      rows[r][y] += a[1] * m[0] + a[2] * m[1] + a[3] * m[2] + a[4] * m[3];
    }
  }
  return rows;
}

namespace {

double dot(const FeatureVector& a, const FeatureVector& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < kFeatureCount; ++k) s += a[k] * b[k];
  return s;
}

struct PoolEntry {
  std::vector<TokenId> tokens;
  FeatureVector f{};
  double metric = 0.0;
};

using Pool = std::vector<PoolEntry>;

double hypothesis_metric(const Hypothesis& h, const DevInstance& inst, const Vocab& vocab,
                         const MertConfig& config) {
  EvalInstance e{split_tokens(finalize(h, config.decode, vocab)), inst.references};
  return instance_score(e, config.metric, config.decode.byte_cap);
}

std::vector<std::vector<Hypothesis>> decode_all(const Model& model,
                                                std::span<const DevInstance> dev,
                                                const FeatureWeights& w,
                                                const MertConfig& config) {
  const TunedScorer scorer(model, w);
  std::vector<std::vector<Hypothesis>> out(dev.size());
  parallel_for(dev.size(), config.jobs,
               [&](std::size_t i) { out[i] = beam_search(scorer, dev[i].input, config.decode); });
  return out;
}

double real_score(const std::vector<std::vector<Hypothesis>>& decoded,
                  std::span<const DevInstance> dev, const Vocab& vocab, const MertConfig& config) {
  double total = 0.0;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    total += hypothesis_metric(decoded[i].front(), dev[i], vocab, config);
  }
  return total / static_cast<double>(dev.size());
}

// Mean metric of each pool's argmax under `alpha` (first entry wins ties).
double pool_score(const std::vector<Pool>& pools, const FeatureVector& alpha) {
  double total = 0.0;
  for (const auto& pool : pools) {
    std::size_t best = 0;
    double best_s = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < pool.size(); ++c) {
      const double s = dot(alpha, pool[c].f);
      if (s > best_s) {
        best_s = s;
        best = c;
      }
    }
    total += pool[best].metric;
  }
  return total / static_cast<double>(pools.size());
}

struct LineResult {
  double t = 0.0;
  double value = 0.0;
};

// Exact maximization of the pooled corpus metric along alpha + t d. Each
// pool's argmax is the upper envelope of the lines a_c + t b_c, so the
// objective is piecewise constant in t.
LineResult line_search(const std::vector<Pool>& pools, const FeatureVector& alpha,
                       const FeatureVector& d) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  struct Event {
    double t;
    double delta;
  };
  std::vector<Event> events;
  double base = 0.0;  // objective sum as t -> -inf
  for (const auto& pool : pools) {
    struct Line {
      double a, b, metric;
      std::size_t idx;
    };
    std::vector<Line> lines;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      lines.push_back({dot(alpha, pool[c].f), dot(d, pool[c].f), pool[c].metric, c});
    }
    std::sort(lines.begin(), lines.end(), [](const Line& p, const Line& q) {
      if (p.b != q.b) return p.b < q.b;
      if (p.a != q.a) return p.a > q.a;
      return p.idx < q.idx;
    });
    struct Seg {
      Line line;
      double start;
    };
    std::vector<Seg> hull;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i > 0 && lines[i].b == lines[i - 1].b) continue;  // dominated: same slope, lower a
      const Line& l = lines[i];
      double start = -kInf;
      while (!hull.empty()) {
        const Line& top = hull.back().line;
        const double t = (top.a - l.a) / (l.b - top.b);
        if (t <= hull.back().start) {
          hull.pop_back();
        } else {
          start = t;
          break;
        }
      }
      hull.push_back({l, hull.empty() ? -kInf : start});
    }
    base += hull.front().line.metric;
    for (std::size_t s = 1; s < hull.size(); ++s) {
      events.push_back({hull[s].start, hull[s].line.metric - hull[s - 1].line.metric});
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& p, const Event& q) { return p.t < q.t; });

  const double n = static_cast<double>(pools.size());
  LineResult best{0.0, -kInf};
  auto consider = [&](double t, double sum) {
    const double v = sum / n;
    if (v > best.value || (v == best.value && std::abs(t) < std::abs(best.t))) best = {t, v};
  };
  if (events.empty()) {
    consider(0.0, base);
    return best;
  }
  double sum = base;
  consider(events.front().t - 1.0, sum);
  for (std::size_t e = 0; e < events.size();) {
    const double t = events[e].t;
    while (e < events.size() && events[e].t == t) sum += events[e++].delta;
    const double hi = e < events.size() ? events[e].t : t + 2.0;
    consider(0.5 * (t + hi), sum);
  }
  return best;
}

void normalize(FeatureVector& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  if (m > 0.0) {
    for (double& v : a) v /= m;
  }
}

}  // namespace

double dev_score(const Model& model, const Vocab& vocab, std::span<const DevInstance> dev,
                 const FeatureWeights& weights, const MertConfig& config) {
  if (dev.empty()) throw std::invalid_argument("dev_score: empty dev set");
  return real_score(decode_all(model, dev, weights, config), dev, vocab, config);
}

MertResult mert_tune(const Model& model, const Vocab& vocab, std::span<const DevInstance> dev,
                     const FeatureWeights& init, const MertConfig& config) {
  if (dev.empty()) throw std::invalid_argument("mert_tune: empty dev set");
  init.validate();
  config.decode.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Pool> pools(dev.size());
  std::vector<std::set<std::vector<TokenId>>> seen(dev.size());
  auto merge = [&](const std::vector<std::vector<Hypothesis>>& decoded) {
    std::vector<std::vector<const Hypothesis*>> fresh(dev.size());
    for (std::size_t i = 0; i < dev.size(); ++i) {
      for (const auto& h : decoded[i]) {
        if (seen[i].insert(h.tokens).second) fresh[i].push_back(&h);
      }
    }
    std::vector<Pool> added(dev.size());
    parallel_for(dev.size(), config.jobs, [&](std::size_t i) {
      for (const Hypothesis* h : fresh[i]) {
        added[i].push_back({h->tokens, sequence_features(model, dev[i].input, h->tokens),
                            hypothesis_metric(*h, dev[i], vocab, config)});
      }
    });
    bool any = false;
    for (std::size_t i = 0; i < dev.size(); ++i) {
      any = any || !added[i].empty();
      for (auto& e : added[i]) pools[i].push_back(std::move(e));
    }
    return any;
  };

  MertResult result;
  auto decoded = decode_all(model, dev, init, config);
  result.initial_score = real_score(decoded, dev, vocab, config);
  result.final_score = result.initial_score;
  result.weights = init;

  FeatureVector alpha = init.alpha;
  for (std::size_t it = 0;; ++it) {
    const bool added = merge(decoded);
    if ((it > 0 && !added) || it == config.max_iterations) break;

    double current = pool_score(pools, alpha);
    for (std::size_t sweep = 0; sweep < 20; ++sweep) {
      std::vector<FeatureVector> dirs;
      for (std::size_t k = 0; k < kFeatureCount; ++k) {
        FeatureVector e{};
        e[k] = 1.0;
        dirs.push_back(e);
      }
      for (std::size_t r = 0; r < config.random_directions; ++r) {
        FeatureVector d;
        for (double& v : d) v = gauss(rng);
        dirs.push_back(d);
      }
      bool improved = false;
      for (const auto& d : dirs) {
        const auto ls = line_search(pools, alpha, d);
        if (ls.value > current + 1e-12) {
          for (std::size_t k = 0; k < kFeatureCount; ++k) alpha[k] += ls.t * d[k];
          normalize(alpha);
          current = pool_score(pools, alpha);
          improved = true;
        }
      }
      if (!improved) break;
    }

    decoded = decode_all(model, dev, FeatureWeights{alpha}, config);
    const double real = real_score(decoded, dev, vocab, config);
    result.iterations = it + 1;
    if (real > result.final_score) {
      result.final_score = real;
      result.weights = FeatureWeights{alpha};
    }
  }
  return result;
}

}  // namespace attnsum
