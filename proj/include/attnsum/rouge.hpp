// SPDX-License-Identifier: Apache-2.0
//
// Recall-oriented ROUGE-N and ROUGE-L with an optional candidate byte cap
// and multiple references per instance.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnsum/corpus.hpp"

namespace attnsum {

struct EvalInstance {
  Tokens candidate;
  std::vector<Tokens> references;
};

/// Joins the candidate with single spaces, cuts the string at `byte_cap`
/// (UTF-8 safe) and splits it again. References are never capped.
Tokens cap_tokens(std::span<const std::string> candidate, std::optional<std::size_t> byte_cap);

/// Clipped n-gram recall, max over references. References shorter than n are
/// skipped; if every reference is skipped, throws DataError.
double rouge_n(const EvalInstance& instance, std::size_t n,
               std::optional<std::size_t> byte_cap = std::nullopt);

/// LCS length over reference length, max over nonempty references.
double rouge_l(const EvalInstance& instance, std::optional<std::size_t> byte_cap = std::nullopt);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

enum class Metric { rouge1, rouge2, rougeL };

std::string_view to_string(Metric metric);
/// Comma separated list, e.g. "rouge1,rouge2,rougeL".
std::vector<Metric> parse_metrics(std::string_view list);

double instance_score(const EvalInstance& instance, Metric metric,
                      std::optional<std::size_t> byte_cap);
/// Mean of instance_score. Throws std::invalid_argument on an empty corpus.
double corpus_score(std::span<const EvalInstance> instances, Metric metric,
                    std::optional<std::size_t> byte_cap);

/// Percentage (0..100) of capped candidate tokens that occur in the paired
/// input, pooled over the corpus. 0 when there are no candidate tokens.
double extractive_percent(std::span<const Tokens> candidates, std::span<const Tokens> inputs,
                          std::optional<std::size_t> byte_cap);

struct ScoreReport {
  std::size_t instances = 0;
  std::vector<std::pair<Metric, double>> scores;
  std::optional<double> ext_percent;
  std::optional<std::size_t> byte_cap;
};

/// Each line is tokenized with `preprocess`. `references` holds one list of
/// lines per reference file; all lists (and `inputs`, if given) must align
/// with `candidates`, otherwise DataError names the first unmatched line.
ScoreReport evaluate_corpus(std::span<const std::string> candidates,
                            std::span<const std::vector<std::string>> references,
                            std::span<const Metric> metrics, std::optional<std::size_t> byte_cap,
                            std::optional<std::span<const std::string>> inputs = std::nullopt);

ScoreReport evaluate_files(const std::filesystem::path& candidates,
                           std::span<const std::filesystem::path> references,
                           std::span<const Metric> metrics, std::optional<std::size_t> byte_cap,
                           const std::optional<std::filesystem::path>& inputs = std::nullopt);

/// Reads every line of a text file (trailing newline optional).
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string format_report(const ScoreReport& report);
std::string report_json(const ScoreReport& report);

}  // namespace attnsum
