// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "attnsum/model.hpp"
#include "attnsum/numerics.hpp"
#include "oracles.hpp"

namespace gradcheck {

// Denominator floor keeps coordinates whose true gradient is ~0 from
// turning round-off into huge relative errors.
inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

struct Report {
  double max_rel_err = 0.0;
  std::string worst;  // "name[index]"
  std::size_t coordinates = 0;
};

inline std::vector<attnsum::Pair> random_pairs(std::mt19937_64& rng, std::size_t count,
                                               std::size_t M, std::size_t N, std::size_t V) {
  std::vector<attnsum::Pair> out;
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back({oracle::random_ids(rng, M, V), oracle::random_ids(rng, N, V)});
  }
  return out;
}

// Analytic backward_pairs against central differences of the summed NLL.
inline Report check(attnsum::Model& model, const std::vector<attnsum::Pair>& pairs) {
  attnsum::ParamStore sink = model.params.zeros_like();
  attnsum::backward_pairs(model, pairs, sink);
  auto loss = [&](const attnsum::ParamStore&) {
    double s = 0.0;
    for (const auto& p : pairs) s += attnsum::pair_nll(model, p);
    return s;
  };
  const auto numeric = attnsum::finite_diff_grad(loss, model.params);
  Report r;
  for (const auto& name : model.params.names()) {
    const auto a = sink.grad(name).data();
    const auto n = numeric.grad(name).data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      ++r.coordinates;
      const double e = rel_err(a[i], n[i]);
      if (e > r.max_rel_err) {
        r.max_rel_err = e;
        r.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return r;
}

inline attnsum::Hyperparams tiny(attnsum::EncoderKind kind) {
  attnsum::Hyperparams hp;
  hp.V = 20;
  hp.D = 4;
  hp.H = 6;
  hp.C = 2;
  hp.L = 2;
  hp.Q = 1;
  hp.encoder = kind;
  return hp;
}

// Weights at the scale training actually reaches, so tanh and softmax are
// exercised away from their linear regime.
inline attnsum::Model tiny_model(attnsum::EncoderKind kind, std::uint64_t seed) {
  return oracle::random_model(tiny(kind), seed, 0.5);
}

}  // namespace gradcheck
