// SPDX-License-Identifier: Apache-2.0

#include "attnsum/training.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "attnsum/errors.hpp"

namespace attnsum {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be finite and >= 0");
  }
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(renorm_max_norm > 0.0)) throw std::invalid_argument("TrainConfig: renorm_max_norm must be > 0");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_train_config(std::istream& is, TrainConfig c) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(lineno);
    if (eq == std::string::npos) throw DataError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "learning_rate") c.learning_rate = std::stod(val);
      else if (key == "batch_size") c.batch_size = std::stoul(val);
      else if (key == "max_epochs") c.max_epochs = std::stoul(val);
      else if (key == "seed") c.seed = std::stoull(val);
      else if (key == "renorm_max_norm") c.renorm_max_norm = std::stod(val);
      else if (key == "patience") c.patience = std::stoul(val);
      else if (key == "D") c.hyper.D = std::stoul(val);
      else if (key == "H") c.hyper.H = std::stoul(val);
      else if (key == "C") c.hyper.C = std::stoul(val);
      else if (key == "L") c.hyper.L = std::stoul(val);
      else if (key == "Q") c.hyper.Q = std::stoul(val);
      else if (key == "encoder") c.hyper.encoder = parse_encoder_kind(val);
      else throw DataError(where + ": unknown key " + key);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw DataError(where + ": bad value for " + key);
    }
  }
  return c;
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "learning_rate=" << c.learning_rate << '\n'
     << "batch_size=" << c.batch_size << '\n'
     << "max_epochs=" << c.max_epochs << '\n'
     << "seed=" << c.seed << '\n'
     << "renorm_max_norm=" << c.renorm_max_norm << '\n'
     << "patience=" << c.patience << '\n'
     << "D=" << c.hyper.D << "\nH=" << c.hyper.H << "\nC=" << c.hyper.C << "\nL=" << c.hyper.L
     << "\nQ=" << c.hyper.Q << '\n'
     << "encoder=" << to_string(c.hyper.encoder) << '\n';
  return os.str();
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_nll"] = r.train_nll;
  j["valid_nll"] = r.valid_nll;
  j["valid_perplexity"] = r.valid_perplexity;
  j["learning_rate"] = r.learning_rate;
  return j.dump();
}

std::size_t token_count(std::span<const Pair> pairs) {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.headline.size();
  return n;
}

double nll(const Model& model, std::span<const Pair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("nll: empty corpus");
  double total = 0.0;
  for (const auto& p : pairs) total += pair_nll(model, p);
  if (!std::isfinite(total)) throw NumericError("nll: non-finite result");
  return total;
}

double perplexity(const Model& model, std::span<const Pair> pairs) {
  const double total = nll(model, pairs);
  return std::exp(total / static_cast<double>(token_count(pairs)));
}

void renormalize_embeddings(Model& model, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("renormalize_embeddings: max_norm must be > 0");
  for (const auto& name : embedding_tables(model)) {
    Tensor& t = model.params.value(name);
    for (std::size_t col = 0; col < t.cols(); ++col) {
      double sq = 0.0;
      for (std::size_t r = 0; r < t.rows(); ++r) sq += t(r, col) * t(r, col);
      const double norm = std::sqrt(sq);
      if (norm <= max_norm) continue;
      const double scale = max_norm / norm;
      for (std::size_t r = 0; r < t.rows(); ++r) t(r, col) *= scale;
    }
  }
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const Pair> pairs,
                                                   std::size_t batch_size, std::mt19937_64& rng) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < pairs.size(); ++i) buckets[pairs[i].article.size()].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [len, idx] : buckets) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t s = 0; s < idx.size(); s += batch_size) {
      const std::size_t e = std::min(idx.size(), s + batch_size);
      batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(s),
                           idx.begin() + static_cast<std::ptrdiff_t>(e));
    }
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

TrainResult train(const TrainConfig& config, std::span<const Pair> train_pairs,
                  std::span<const Pair> valid_pairs, const EpochCallback& on_epoch) {
  return train_from(init_model(config.hyper, config.seed), config, train_pairs, valid_pairs,
                    on_epoch);
}

TrainResult train_from(Model model, const TrainConfig& config, std::span<const Pair> train_pairs,
                       std::span<const Pair> valid_pairs, const EpochCallback& on_epoch) {
  config.validate();
  if (train_pairs.empty() || valid_pairs.empty()) {
    throw std::invalid_argument("train: training and validation corpora must be nonempty");
  }
  // Separate stream for shuffling.
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  ParamStore grads = model.params.zeros_like();

  TrainResult result{model, {}};
  double best = std::numeric_limits<double>::infinity();
  double lr = config.learning_rate;
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    std::vector<Pair> batch;
    for (const auto& idx : make_batches(train_pairs, config.batch_size, rng)) {
      batch.clear();
      for (std::size_t i : idx) batch.push_back(train_pairs[i]);
      grads.zero_grads();
      rec.train_nll += backward_pairs(model, batch, grads);
      const double step = lr / static_cast<double>(token_count(batch));
      for (const auto& name : model.params.names()) {
        auto p = model.params.value(name).data();
        const auto g = grads.grad(name).data();
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= step * g[k];
      }
    }
    if (!std::isfinite(rec.train_nll)) {
      throw NumericError("training diverged in epoch " + std::to_string(epoch));
    }
    renormalize_embeddings(model, config.renorm_max_norm);
    rec.valid_nll = nll(model, valid_pairs);
    rec.valid_perplexity =
        std::exp(rec.valid_nll / static_cast<double>(token_count(valid_pairs)));
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec, model);

    if (rec.valid_nll < best) {
      best = rec.valid_nll;
      result.model = model;
      stale = 0;
    } else if (++stale >= config.patience) {
      lr *= 0.5;
      stale = 0;
    }
  }
  return result;
}

}  // namespace attnsum
