// SPDX-License-Identifier: Apache-2.0

#include "attnsum/rouge.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "attnsum/decoding.hpp"
#include "attnsum/errors.hpp"

namespace attnsum {

Tokens cap_tokens(std::span<const std::string> candidate, std::optional<std::size_t> byte_cap) {
  if (!byte_cap) return Tokens(candidate.begin(), candidate.end());
  return split_tokens(truncate_utf8(join_tokens(candidate), *byte_cap));
}

namespace {

using NGram = std::vector<std::string>;

std::map<NGram, std::size_t> ngram_counts(std::span<const std::string> tokens, std::size_t n) {
  std::map<NGram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[NGram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double rouge_n(const EvalInstance& instance, std::size_t n, std::optional<std::size_t> byte_cap) {
  if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
  const Tokens cand = cap_tokens(instance.candidate, byte_cap);
  const auto cand_counts = ngram_counts(cand, n);
  std::optional<double> best;
  for (const auto& ref : instance.references) {
    if (ref.size() < n) continue;
    const auto ref_counts = ngram_counts(ref, n);
    std::size_t hits = 0;
    for (const auto& [gram, count] : ref_counts) {
      if (auto it = cand_counts.find(gram); it != cand_counts.end()) {
        hits += std::min(count, it->second);
      }
    }
    const double recall = static_cast<double>(hits) / static_cast<double>(ref.size() - n + 1);
    best = std::max(best.value_or(0.0), recall);
  }
  if (!best) {
    throw DataError("rouge-" + std::to_string(n) + ": every reference is shorter than " +
                    std::to_string(n) + " tokens");
  }
  return *best;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const EvalInstance& instance, std::optional<std::size_t> byte_cap) {
  const Tokens cand = cap_tokens(instance.candidate, byte_cap);
  std::optional<double> best;
  for (const auto& ref : instance.references) {
    if (ref.empty()) continue;
    const double recall =
        static_cast<double>(lcs_length(cand, ref)) / static_cast<double>(ref.size());
    best = std::max(best.value_or(0.0), recall);
  }
  if (!best) throw DataError("rouge-L: every reference is empty");
  return *best;
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::rouge1: return "rouge1";
    case Metric::rouge2: return "rouge2";
    case Metric::rougeL: return "rougeL";
  }
  return "?";
}

std::vector<Metric> parse_metrics(std::string_view list) {
  std::vector<Metric> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto item = list.substr(start, comma == std::string_view::npos ? list.npos : comma - start);
    if (item == "rouge1") out.push_back(Metric::rouge1);
    else if (item == "rouge2") out.push_back(Metric::rouge2);
    else if (item == "rougeL") out.push_back(Metric::rougeL);
    else throw std::invalid_argument("unknown metric: " + std::string(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double instance_score(const EvalInstance& instance, Metric metric,
                      std::optional<std::size_t> byte_cap) {
  switch (metric) {
    case Metric::rouge1: return rouge_n(instance, 1, byte_cap);
    case Metric::rouge2: return rouge_n(instance, 2, byte_cap);
    case Metric::rougeL: return rouge_l(instance, byte_cap);
  }
  throw std::invalid_argument("bad metric");
}

double corpus_score(std::span<const EvalInstance> instances, Metric metric,
                    std::optional<std::size_t> byte_cap) {
  if (instances.empty()) throw std::invalid_argument("corpus_score: empty corpus");
  double total = 0.0;
  for (const auto& inst : instances) total += instance_score(inst, metric, byte_cap);
  return total / static_cast<double>(instances.size());
}

double extractive_percent(std::span<const Tokens> candidates, std::span<const Tokens> inputs,
                          std::optional<std::size_t> byte_cap) {
  if (candidates.size() != inputs.size()) {
    throw std::invalid_argument("extractive_percent: candidates and inputs differ in length");
  }
  std::size_t total = 0, copied = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::unordered_set<std::string> in(inputs[i].begin(), inputs[i].end());
    for (const auto& tok : cap_tokens(candidates[i], byte_cap)) {
      ++total;
      copied += in.count(tok);
    }
  }
  return total ? 100.0 * static_cast<double>(copied) / static_cast<double>(total) : 0.0;
}

ScoreReport evaluate_corpus(std::span<const std::string> candidates,
                            std::span<const std::vector<std::string>> references,
                            std::span<const Metric> metrics, std::optional<std::size_t> byte_cap,
                            std::optional<std::span<const std::string>> inputs) {
  if (references.empty()) throw std::invalid_argument("evaluate: at least one reference file");
  auto check = [&](std::size_t size, const std::string& what) {
    if (size != candidates.size()) {
      throw DataError(what + " has " + std::to_string(size) + " lines but candidates have " +
                      std::to_string(candidates.size()) + "; first unmatched line is " +
                      std::to_string(std::min(size, candidates.size()) + 1));
    }
  };
  for (std::size_t r = 0; r < references.size(); ++r) {
    check(references[r].size(), "reference file " + std::to_string(r + 1));
  }
  if (inputs) check(inputs->size(), "inputs");

  std::vector<EvalInstance> instances(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    instances[i].candidate = preprocess(candidates[i]);
    for (const auto& ref : references) instances[i].references.push_back(preprocess(ref[i]));
  }

  ScoreReport report;
  report.instances = instances.size();
  report.byte_cap = byte_cap;
  for (Metric m : metrics) {
    double total = 0.0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      try {
        total += instance_score(instances[i], m, byte_cap);
      } catch (const DataError& e) {
        throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
      }
    }
    report.scores.emplace_back(m, instances.empty() ? 0.0 : total / static_cast<double>(instances.size()));
  }
  if (inputs) {
    std::vector<Tokens> cands, ins;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      cands.push_back(instances[i].candidate);
      ins.push_back(preprocess((*inputs)[i]));
    }
    report.ext_percent = extractive_percent(cands, ins, byte_cap);
  }
  return report;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

ScoreReport evaluate_files(const std::filesystem::path& candidates,
                           std::span<const std::filesystem::path> references,
                           std::span<const Metric> metrics, std::optional<std::size_t> byte_cap,
                           const std::optional<std::filesystem::path>& inputs) {
  const auto cand = read_lines(candidates);
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : references) refs.push_back(read_lines(r));
  if (inputs) {
    const auto in = read_lines(*inputs);
    return evaluate_corpus(cand, refs, metrics, byte_cap, std::span<const std::string>(in));
  }
  return evaluate_corpus(cand, refs, metrics, byte_cap);
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string format_report(const ScoreReport& report) {
  std::ostringstream os;
  auto row = [&](std::string_view name, const std::string& value) {
    os << name << std::string(12 - std::min<std::size_t>(11, name.size()), ' ') << value << '\n';
  };
  row("instances", std::to_string(report.instances));
  row("byte_cap", report.byte_cap ? std::to_string(*report.byte_cap) : "none");
  for (const auto& [m, v] : report.scores) row(to_string(m), fixed(v, 6));
  if (report.ext_percent) row("ext%", fixed(*report.ext_percent, 2));
  return os.str();
}

std::string report_json(const ScoreReport& report) {
  nlohmann::ordered_json j;
  j["instances"] = report.instances;
  j["byte_cap"] = report.byte_cap ? nlohmann::ordered_json(*report.byte_cap) : nullptr;
  for (const auto& [m, v] : report.scores) j[std::string(to_string(m))] = v;
  if (report.ext_percent) j["ext_percent"] = *report.ext_percent;
  return j.dump(2);
}

}  // namespace attnsum
