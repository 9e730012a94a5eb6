// SPDX-License-Identifier: Apache-2.0
//
// attnsum: preprocess, train, decode, tune, eval, baseline, trace, describe.
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attnsum/corpus.hpp"
#include "attnsum/decoding.hpp"
#include "attnsum/errors.hpp"
#include "attnsum/parallel.hpp"
#include "attnsum/rouge.hpp"
#include "attnsum/serialize.hpp"
#include "attnsum/training.hpp"
#include "attnsum/tuning.hpp"

namespace fs = std::filesystem;
using namespace attnsum;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw DataError("cannot open " + p.string());
  return is;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw DataError("cannot open " + p.string() + " for writing");
  return os;
}

std::vector<TokenPair> read_token_pairs(const fs::path& p) {
  auto is = open_in(p);
  std::vector<TokenPair> out;
  for (const auto& tp : read_pairs(is)) out.push_back({split_tokens(tp.headline), split_tokens(tp.article)});
  return out;
}

std::vector<std::filesystem::path> split_paths(const std::string& list) {
  std::vector<fs::path> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.emplace_back(item);
  }
  if (out.empty()) throw UsageError("empty file list");
  return out;
}

// --- preprocess ------------------------------------------------------------

struct PreprocessArgs {
  std::string input, output, vocab_out, vocab_in;
  std::size_t min_count = 5;
  bool no_filter = false;
};

int cmd_preprocess(const PreprocessArgs& a) {
  auto is = open_in(a.input);
  const auto raw = read_pairs(is);
  const auto& stop = default_stopwords();
  std::vector<TokenPair> kept;
  std::size_t empty = 0, f1 = 0, f2 = 0, f3 = 0;
  for (const auto& p : raw) {
    TokenPair tp{preprocess(p.headline), preprocess(p.article)};
    if (tp.headline.empty() || tp.article.empty()) {
      ++empty;
      continue;
    }
    if (!a.no_filter) {
      switch (classify_pair(tp.article, tp.headline, stop)) {
        case FilterVerdict::keep: break;
        case FilterVerdict::no_shared_content_word: ++f1; continue;
        case FilterVerdict::byline_or_edit_mark: ++f2; continue;
        case FilterVerdict::question_or_colon: ++f3; continue;
      }
    }
    kept.push_back(std::move(tp));
  }
  {
    auto os = open_out(a.output);
    write_pairs(os, kept);
  }
  if (!a.vocab_out.empty()) {
    std::vector<Tokens> corpus;
    for (const auto& p : kept) {
      corpus.push_back(p.article);
      corpus.push_back(p.headline);
    }
    auto os = open_out(a.vocab_out);
    build_vocab(corpus, a.min_count).save(os);
  }
  std::cout << "read " << raw.size() << '\n'
            << "kept " << kept.size() << '\n'
            << "discarded_empty " << empty << '\n'
            << "discarded_no_shared_content_word " << f1 << '\n'
            << "discarded_byline_or_edit_mark " << f2 << '\n'
            << "discarded_question_or_colon " << f3 << '\n';
  return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string train, valid, vocab, out, config, checkpoint_dir, history;
  std::optional<std::size_t> epochs, batch, D, H, C, L, Q, patience;
  std::optional<double> lr, max_norm;
  std::optional<std::string> encoder;
};

int cmd_train(const TrainArgs& a, std::optional<std::uint64_t> seed) {
  TrainConfig cfg;
  if (!a.config.empty()) {
    auto is = open_in(a.config);
    cfg = parse_train_config(is, cfg);
  }
  if (seed) cfg.seed = *seed;
  if (a.epochs) cfg.max_epochs = *a.epochs;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.max_norm) cfg.renorm_max_norm = *a.max_norm;
  if (a.patience) cfg.patience = *a.patience;
  if (a.D) cfg.hyper.D = *a.D;
  if (a.H) cfg.hyper.H = *a.H;
  if (a.C) cfg.hyper.C = *a.C;
  if (a.L) cfg.hyper.L = *a.L;
  if (a.Q) cfg.hyper.Q = *a.Q;
  if (a.encoder) cfg.hyper.encoder = parse_encoder_kind(*a.encoder);

  Vocab vocab = [&] {
    auto is = open_in(a.vocab);
    return Vocab::load(is);
  }();
  cfg.hyper.V = vocab.size();
  cfg.validate();
  cfg.hyper.validate();

  const auto train_pairs = encode_pairs(vocab, read_token_pairs(a.train));
  const auto valid_pairs = encode_pairs(vocab, read_token_pairs(a.valid));

  std::optional<std::ofstream> history;
  if (!a.history.empty()) history.emplace(open_out(a.history));
  if (!a.checkpoint_dir.empty()) fs::create_directories(a.checkpoint_dir);

  auto on_epoch = [&](const EpochRecord& r, const Model& m) {
    std::cerr << "epoch " << r.epoch << " train_nll " << r.train_nll << " valid_ppl "
              << r.valid_perplexity << " lr " << r.learning_rate << '\n';
    if (history) *history << to_json_line(r) << '\n' << std::flush;
    if (!a.checkpoint_dir.empty()) {
      std::ostringstream name;
      name << "epoch-" << std::setw(3) << std::setfill('0') << r.epoch << ".bin";
      save_model(fs::path(a.checkpoint_dir) / name.str(), m, vocab);
    }
  };
  const auto result = train(cfg, train_pairs, valid_pairs, on_epoch);
  save_model(a.out, result.model, vocab);
  return 0;
}

// --- decode / trace --------------------------------------------------------

struct DecodeArgs {
  std::string model, input, output, trace, weights, sentence;
  std::size_t N = 8, beam = 5, jobs = 1;
  std::string mode = "abstractive";
  std::string algorithm = "beam";
  std::optional<std::size_t> byte_cap;
  bool allow_unk = false;
};

DecodeConfig decode_config(const DecodeArgs& a) {
  DecodeConfig c;
  c.length = a.N;
  c.beam = a.beam;
  c.mode = parse_decode_mode(a.mode);
  c.byte_cap = a.byte_cap;
  c.forbid_unk = !a.allow_unk;
  c.validate();
  return c;
}

Hypothesis run_decoder(const StepScorer& scorer, const std::vector<TokenId>& x,
                       const DecodeConfig& cfg, const std::string& algorithm) {
  if (algorithm == "beam") return beam_search(scorer, x, cfg).front();
  if (algorithm == "greedy") return greedy(scorer, x, cfg);
  if (algorithm == "viterbi") return viterbi_exact(scorer, x, cfg);
  throw UsageError("unknown algorithm: " + algorithm);
}

int cmd_decode(const DecodeArgs& a) {
  const auto file = load_model(a.model);
  const auto cfg = decode_config(a);
  const auto lines = read_lines(a.input);
  const FeatureWeights w = a.weights.empty() ? FeatureWeights::identity() : load_weights(a.weights);
  const TunedScorer tuned(file.model, w);
  const ModelScorer plain(file.model);
  const StepScorer& scorer = a.weights.empty() ? static_cast<const StepScorer&>(plain) : tuned;
  if (!a.trace.empty() && file.model.hyper.encoder != EncoderKind::attention) {
    throw UsageError("--trace requires a model trained with the attention encoder");
  }

  std::vector<std::vector<TokenId>> inputs(lines.size());
  std::vector<std::string> outputs(lines.size());
  std::vector<AttentionTrace> traces(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    inputs[i] = file.vocab.encode(preprocess(lines[i]));
    if (inputs[i].empty()) throw DataError("input line " + std::to_string(i + 1) + " is empty");
  }
  parallel_for(lines.size(), a.jobs, [&](std::size_t i) {
    const Hypothesis h = run_decoder(scorer, inputs[i], cfg, a.algorithm);
    outputs[i] = finalize(h, cfg, file.vocab);
    if (!a.trace.empty()) traces[i] = attention_trace(file.model, inputs[i], h.tokens);
  });

  std::optional<std::ofstream> out;
  if (!a.output.empty()) out.emplace(open_out(a.output));
  std::ostream& os = out ? *out : std::cout;
  for (const auto& s : outputs) os << s << '\n';
  if (!a.trace.empty()) {
    auto ts = open_out(a.trace);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      ts << "# sentence " << i + 1 << '\n';
      write_trace_tsv(ts, traces[i]);
      ts << '\n';
    }
  }
  return 0;
}

int cmd_trace(const DecodeArgs& a) {
  const auto file = load_model(a.model);
  if (file.model.hyper.encoder != EncoderKind::attention) {
    throw UsageError("trace requires a model trained with the attention encoder (this model uses " +
                     std::string(to_string(file.model.hyper.encoder)) + ")");
  }
  const auto cfg = decode_config(a);
  const auto x = file.vocab.encode(preprocess(a.sentence));
  if (x.empty()) throw DataError("empty sentence");
  const ModelScorer scorer(file.model);
  const Hypothesis h = run_decoder(scorer, x, cfg, a.algorithm);
  std::optional<std::ofstream> out;
  if (!a.output.empty()) out.emplace(open_out(a.output));
  std::ostream& os = out ? *out : std::cout;
  write_trace_tsv(os, attention_trace(file.model, x, h.tokens));
  std::cerr << "summary: " << finalize(h, cfg, file.vocab) << '\n';
  return 0;
}

// --- tune ------------------------------------------------------------------

struct TuneArgs {
  DecodeArgs decode;
  std::string dev, refs, out, metric = "rouge1", init;
  std::size_t iterations = 10, directions = 8;
};

int cmd_tune(const TuneArgs& a, std::uint64_t seed) {
  const auto file = load_model(a.decode.model);
  const auto lines = read_lines(a.dev);
  std::vector<std::vector<std::string>> refs;
  for (const auto& p : split_paths(a.refs)) {
    refs.push_back(read_lines(p));
    if (refs.back().size() != lines.size()) {
      throw DataError(p.string() + " has " + std::to_string(refs.back().size()) +
                      " lines but the dev file has " + std::to_string(lines.size()));
    }
  }
  std::vector<DevInstance> dev;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    DevInstance d{file.vocab.encode(preprocess(lines[i])), {}};
    if (d.input.empty()) throw DataError("dev line " + std::to_string(i + 1) + " is empty");
    for (const auto& r : refs) d.references.push_back(preprocess(r[i]));
    dev.push_back(std::move(d));
  }
  MertConfig cfg;
  cfg.decode = decode_config(a.decode);
  const auto metrics = parse_metrics(a.metric);
  if (metrics.size() != 1) throw UsageError("--metric takes exactly one metric");
  cfg.metric = metrics.front();
  cfg.max_iterations = a.iterations;
  cfg.random_directions = a.directions;
  cfg.seed = seed;
  cfg.jobs = a.decode.jobs;
  const FeatureWeights init = a.init.empty() ? FeatureWeights::identity() : load_weights(a.init);
  const auto result = mert_tune(file.model, file.vocab, dev, init, cfg);
  save_weights(a.out, result.weights);
  std::cout << "initial " << to_string(cfg.metric) << ' ' << result.initial_score << '\n'
            << "final " << to_string(cfg.metric) << ' ' << result.final_score << '\n'
            << "iterations " << result.iterations << '\n';
  return 0;
}

// --- eval / baseline -------------------------------------------------------

struct EvalArgs {
  std::string cand, refs, metrics = "rouge1,rouge2,rougeL", inputs, json;
  std::optional<std::size_t> byte_cap;
};

int cmd_eval(const EvalArgs& a) {
  const auto metrics = parse_metrics(a.metrics);
  const auto refs = split_paths(a.refs);
  std::optional<fs::path> inputs;
  if (!a.inputs.empty()) inputs = a.inputs;
  const auto report = evaluate_files(a.cand, refs, metrics, a.byte_cap, inputs);
  std::cout << format_report(report);
  if (!a.json.empty()) open_out(a.json) << report_json(report) << '\n';
  return 0;
}

struct BaselineArgs {
  std::string input, output;
  std::size_t byte_cap = 75;
};

int cmd_baseline(const BaselineArgs& a) {
  const auto lines = read_lines(a.input);
  std::optional<std::ofstream> out;
  if (!a.output.empty()) out.emplace(open_out(a.output));
  std::ostream& os = out ? *out : std::cout;
  for (const auto& l : lines) os << prefix_summary(l, a.byte_cap) << '\n';
  return 0;
}

void add_decode_flags(CLI::App* c, DecodeArgs& a, bool trace_flag) {
  c->add_option("--model", a.model, "model file")->required();
  c->add_option("--N", a.N, "output length in tokens")->check(CLI::PositiveNumber);
  c->add_option("--beam", a.beam, "beam size K")->check(CLI::PositiveNumber);
  c->add_option("--mode", a.mode, "abstractive|extractive")
      ->check(CLI::IsMember({"abstractive", "extractive"}));
  c->add_option("--algorithm", a.algorithm, "beam|greedy|viterbi")
      ->check(CLI::IsMember({"beam", "greedy", "viterbi"}));
  c->add_option("--byte-cap", a.byte_cap, "truncate output at this many bytes");
  c->add_flag("--allow-unk", a.allow_unk, "let the decoder emit <unk>");
  c->add_option("--output", a.output, "output file (default stdout)");
  if (trace_flag) c->add_option("--trace", a.trace, "write attention traces as TSV");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-based headline generation toolkit"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  app.add_option("--seed", seed, "random seed (default 1)");
  app.add_option("--jobs", jobs, "worker threads for per-sentence work")->check(CLI::PositiveNumber);
  app.set_version_flag("--version",
                       std::string("attnsum ") + kToolVersion + "\nmodel format " +
                           std::to_string(kModelFormatVersion) + "\ncorpus format " +
                           std::to_string(kCorpusFormatVersion));

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "tokenize and filter raw headline/article pairs");
  c_pre->add_option("--input", pre.input, "raw 'headline TAB article' file")->required();
  c_pre->add_option("--output", pre.output, "tokenized pairs output")->required();
  c_pre->add_option("--vocab-out", pre.vocab_out, "write a vocabulary built from kept pairs");
  c_pre->add_option("--min-count", pre.min_count, "vocabulary frequency cutoff");
  c_pre->add_flag("--no-filter", pre.no_filter, "keep every nonempty pair");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a summarization model");
  c_train->add_option("--train", tr.train, "tokenized training pairs")->required();
  c_train->add_option("--valid", tr.valid, "tokenized validation pairs")->required();
  c_train->add_option("--vocab", tr.vocab, "vocabulary file")->required();
  c_train->add_option("--out", tr.out, "model output (best validation epoch)")->required();
  c_train->add_option("--config", tr.config, "key=value training config");
  c_train->add_option("--checkpoint-dir", tr.checkpoint_dir, "write a model after every epoch");
  c_train->add_option("--history", tr.history, "per-epoch JSON lines");
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--batch", tr.batch);
  c_train->add_option("--lr", tr.lr);
  c_train->add_option("--max-norm", tr.max_norm);
  c_train->add_option("--patience", tr.patience);
  c_train->add_option("--encoder", tr.encoder)->check(CLI::IsMember({"none", "bow", "conv", "attention"}));
  c_train->add_option("--D", tr.D);
  c_train->add_option("--H", tr.H);
  c_train->add_option("--C", tr.C);
  c_train->add_option("--L", tr.L);
  c_train->add_option("--Q", tr.Q);

  DecodeArgs dec;
  auto* c_dec = app.add_subcommand("decode", "generate summaries");
  add_decode_flags(c_dec, dec, true);
  c_dec->add_option("--input", dec.input, "one input sentence per line")->required();
  c_dec->add_option("--weights", dec.weights, "tuned feature weights (JSON)");

  TuneArgs tu;
  auto* c_tune = app.add_subcommand("tune", "tune feature weights on a dev set");
  add_decode_flags(c_tune, tu.decode, false);
  c_tune->add_option("--dev", tu.dev, "dev inputs, one per line")->required();
  c_tune->add_option("--refs", tu.refs, "reference files, comma separated")->required();
  c_tune->add_option("--metric", tu.metric, "rouge1|rouge2|rougeL");
  c_tune->add_option("--out", tu.out, "weights JSON output")->required();
  c_tune->add_option("--init", tu.init, "initial weights JSON");
  c_tune->add_option("--iterations", tu.iterations, "maximum decode rounds");
  c_tune->add_option("--directions", tu.directions, "random search directions per sweep");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "score candidates with ROUGE");
  c_eval->add_option("--cand", ev.cand, "candidate file")->required();
  c_eval->add_option("--refs", ev.refs, "reference files, comma separated")->required();
  c_eval->add_option("--metrics", ev.metrics, "comma separated metrics");
  c_eval->add_option("--byte-cap", ev.byte_cap, "candidate byte cap");
  c_eval->add_option("--inputs", ev.inputs, "input sentences, enables Ext%");
  c_eval->add_option("--json", ev.json, "also write the report as JSON");

  BaselineArgs bl;
  auto* c_base = app.add_subcommand("baseline", "PREFIX baseline: leading bytes of the input");
  c_base->add_option("--input", bl.input, "one input sentence per line")->required();
  c_base->add_option("--byte-cap", bl.byte_cap, "bytes to keep");
  c_base->add_option("--output", bl.output, "output file (default stdout)");

  DecodeArgs trc;
  auto* c_trace = app.add_subcommand("trace", "attention matrix for one sentence");
  add_decode_flags(c_trace, trc, false);
  c_trace->add_option("--sentence", trc.sentence, "input sentence")->required();

  std::string describe_path;
  auto* c_desc = app.add_subcommand("describe", "print a model file's header");
  c_desc->add_option("--model", describe_path, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    dec.jobs = tu.decode.jobs = jobs;
    if (*c_pre) return cmd_preprocess(pre);
    if (*c_train) return cmd_train(tr, seed);
    if (*c_dec) return cmd_decode(dec);
    if (*c_tune) return cmd_tune(tu, seed.value_or(1));
    if (*c_eval) return cmd_eval(ev);
    if (*c_base) return cmd_baseline(bl);
    if (*c_trace) return cmd_trace(trc);
    if (*c_desc) {
      std::cout << describe_model(load_model(describe_path));
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
