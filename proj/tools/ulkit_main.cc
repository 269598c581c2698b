/* Copyright 2026 The ulkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// ulkit command-line entry point: synth, train, generate, evaluate, dedup,
// scan and bench.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ulkit/candidates.h"
#include "ulkit/common.h"
#include "ulkit/corpus.h"
#include "ulkit/decoding.h"
#include "ulkit/dedup.h"
#include "ulkit/metrics.h"
#include "ulkit/model.h"
#include "ulkit/parallel.h"
#include "ulkit/rng.h"
#include "ulkit/tokenizer.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ulkit {
namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kIo = 4 };

using Clock = std::chrono::steady_clock;

// Provenance record written next to each output artifact.
class RunManifest {
 public:
  RunManifest(std::string subcommand, std::vector<std::string> argv)
      : start_(Clock::now()) {
    j_["subcommand"] = std::move(subcommand);
    j_["argv"] = std::move(argv);
    j_["version"] = kVersion;
    j_["config"] = json::object();
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
  }

  json& config() { return j_["config"]; }
  void seed(std::uint64_t s) { j_["seed"] = s; }
  void input(const fs::path& p) { j_["inputs"].push_back(p.string()); }
  void output(const fs::path& p) { j_["outputs"].push_back(p.string()); }

  // Writes <artifact>.manifest.json for every recorded output.
  void write() {
    j_["wall_time_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
    for (const auto& out : j_["outputs"]) {
      const fs::path p = out.get<std::string>() + ".manifest.json";
      std::ofstream f(p, std::ios::binary);
      if (!f) throw IoError("cannot write manifest " + p.string());
      f << j_.dump(2) << '\n';
    }
  }

 private:
  json j_;
  Clock::time_point start_;
};

struct Common {
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  bool strict = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "Worker threads where results are order-independent")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--strict", c.strict, "Fail on the first malformed corpus line");
}

std::vector<CorpusSample> read_corpus(const fs::path& path, bool strict) {
  auto loaded = load_corpus(path, strict);
  for (const auto& w : loaded.warnings) {
    std::cerr << "warning: " << path.string() << ":" << w.line << ": skipped: " << w.message
              << '\n';
  }
  return std::move(loaded.samples);
}

fs::path vocab_path(const fs::path& checkpoint) { return checkpoint.string() + ".vocab"; }
fs::path manifest_path(const fs::path& artifact) {
  return artifact.string() + ".manifest.json";
}

// Tokenizer options travel with the training manifest.
TokenizerOptions tokenizer_options_of(const fs::path& checkpoint) {
  TokenizerOptions opts;
  std::ifstream in(manifest_path(checkpoint));
  if (!in) return opts;
  try {
    const json m = json::parse(in);
    opts.casefold = m.at("config").value("casefold", false);
  } catch (const json::exception&) {
    std::cerr << "warning: unreadable manifest for " << checkpoint.string() << '\n';
  }
  return opts;
}

struct LoadedModel {
  std::string name;
  fs::path path;
  ModelParams params;
  Vocab vocab;
};

LoadedModel load_model(const fs::path& path, const std::string& vocab_override) {
  const fs::path vp = vocab_override.empty() ? vocab_path(path) : fs::path(vocab_override);
  return {path.stem().string(), path, load_checkpoint(path),
          Vocab::load(vp, tokenizer_options_of(path))};
}

std::optional<BlocklistAutomaton> read_blocklist(const std::string& file, const Vocab& vocab,
                                                 std::size_t n_min, std::size_t n_max) {
  if (file.empty()) return std::nullopt;
  std::vector<TokenSequence> phrases;
  for (const auto& text : load_blocklist(file)) {
    TokenSequence ids = encode(text, vocab);
    if (std::find(ids.begin(), ids.end(), kUnkId) != ids.end()) {
      std::cerr << "warning: blocklist phrase '" << text
                << "' has out-of-vocabulary tokens; dropped\n";
      continue;
    }
    phrases.push_back(std::move(ids));
  }
  auto automaton = compile_blocklist(phrases, n_min, n_max);
  for (const auto& d : automaton.dropped()) {
    std::cerr << "warning: blocklist phrase of length " << d.size() << " outside ["
              << n_min << ", " << n_max << "] dropped\n";
  }
  return automaton;
}

std::string detok(const TokenSequence& ids, const Vocab& vocab) { return decode(ids, vocab); }

// ---------------------------------------------------------------- synth

struct SynthArgs {
  Common common;
  SynthConfig config;
  std::string out, eval_out, blocklist_in, blocklist_out;
  std::size_t eval_samples = 0;
  std::size_t blocklist_size = 20;
};

int run_synth(const SynthArgs& a, const std::vector<std::string>& argv) {
  RunManifest m("synth", argv);
  SynthConfig cfg = a.config;
  cfg.seed = a.common.seed;
  cfg.num_samples += a.eval_samples;
  cfg.validate();
  std::vector<std::string> blocklist;
  if (!a.blocklist_in.empty()) {
    blocklist = load_blocklist(a.blocklist_in);
    m.input(a.blocklist_in);
  } else if (cfg.blocklist_plant_rate > 0.0 || !a.blocklist_out.empty()) {
    blocklist = default_blocklist(cfg.seed, a.blocklist_size, cfg.vocab_size);
  }
  const auto corpus = synth_corpus(cfg, blocklist);
  const auto split = corpus.begin() + static_cast<std::ptrdiff_t>(a.config.num_samples);
  save_corpus(a.out, std::vector<CorpusSample>(corpus.begin(), split));
  m.output(a.out);
  if (a.eval_samples > 0) {
    if (a.eval_out.empty()) throw std::invalid_argument("synth: --eval-samples needs --eval-out");
    save_corpus(a.eval_out, std::vector<CorpusSample>(split, corpus.end()));
    m.output(a.eval_out);
  }
  if (!a.blocklist_out.empty()) {
    save_blocklist(a.blocklist_out, blocklist);
    m.output(a.blocklist_out);
  }
  m.seed(cfg.seed);
  m.config() = {{"samples", a.config.num_samples},
                {"eval_samples", a.eval_samples},
                {"vocab_size", cfg.vocab_size},
                {"target_len", cfg.target_len},
                {"repeat_rate", cfg.repeat_rate},
                {"plant_rate", cfg.blocklist_plant_rate},
                {"blocklist_size", blocklist.size()}};
  m.write();
  std::cout << "wrote " << a.config.num_samples << " samples to " << a.out;
  if (a.eval_samples) std::cout << " and " << a.eval_samples << " to " << a.eval_out;
  std::cout << '\n';
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string corpus, out, init_from, vocab, blocklist, log;
  std::string objective = "mle";
  std::string token_base = "auto";
  ObjectiveConfig oc;
  bool allow_unigram_blocks = false;
  bool no_block_on_targets = false;
  bool casefold = false;
  std::size_t max_vocab = 10000;
  std::size_t epochs = 1, batch_size = 8, continuation_len = 32, max_steps = 0;
  double lr = 0.1, clip_norm = 1.0;
  ModelConfig model;
};

int run_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  RunManifest m("train", argv);
  const auto corpus = read_corpus(a.corpus, a.common.strict);
  m.input(a.corpus);
  if (corpus.empty()) throw DataError("train: corpus " + a.corpus + " has no samples");

  TrainPlan plan;
  plan.objective = parse_objective_kind(a.objective);
  plan.objective_config = a.oc;
  if (a.allow_unigram_blocks) plan.objective_config.block_n_min = 1;
  plan.block_on_targets = !a.no_block_on_targets;
  plan.epochs = a.epochs;
  plan.batch_size = a.batch_size;
  plan.learning_rate = a.lr;
  plan.clip_norm = a.clip_norm;
  plan.continuation_len = a.continuation_len;
  plan.max_steps = a.max_steps;
  plan.seed = a.common.seed;

  TokenizerOptions topts;
  topts.casefold = a.casefold;
  std::optional<Vocab> vocab;
  if (!a.init_from.empty()) {
    auto init = load_model(a.init_from, a.vocab);
    m.input(a.init_from);
    topts = tokenizer_options_of(a.init_from);
    vocab = std::move(init.vocab);
    plan.init_from = std::move(init.params);
  } else if (!a.vocab.empty()) {
    vocab = Vocab::load(a.vocab, topts);
    m.input(a.vocab);
  } else {
    vocab = build_vocab(corpus, a.max_vocab, topts);
  }
  if (!plan.init_from) {
    plan.model = a.model;
    plan.model.vocab_size = vocab->size();
    plan.model.seed = a.common.seed;
  }

  if (a.token_base == "auto") {
    // Inherit the token-level objective of the lineage being continued.
    const std::string lineage = plan.init_from ? plan.init_from->trained_with : "init";
    const bool ul = lineage.rfind("token_ul", 0) == 0 ||
                    (lineage.rfind("seq_ul", 0) == 0 && lineage.find("+mle") == std::string::npos);
    plan.token_base = ul ? ObjectiveKind::kTokenUl : ObjectiveKind::kMle;
  } else {
    plan.token_base = parse_objective_kind(a.token_base);
  }

  const auto blocklist = read_blocklist(a.blocklist, *vocab, plan.objective_config.block_n_min,
                                        plan.objective_config.block_n_max);
  if (!a.blocklist.empty()) m.input(a.blocklist);
  if (plan.objective == ObjectiveKind::kSeqUlBlock && !blocklist) {
    throw std::invalid_argument("train: --objective seq_ul_block needs --blocklist");
  }

  const auto& mc = plan.init_from ? plan.init_from->config() : plan.model;
  const auto examples = make_examples(corpus, *vocab, mc.context_len);
  auto [params, log] = train(examples, plan, blocklist ? &*blocklist : nullptr);

  const fs::path out = a.out;
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.ndjson") : fs::path(a.log);
  save_checkpoint(out, params);
  vocab->save(vocab_path(out));
  log.write_ndjson(log_path);
  m.output(out);
  m.output(vocab_path(out));
  m.output(log_path);

  m.seed(plan.seed);
  const auto& oc = plan.objective_config;
  m.config() = {{"objective", a.objective},
                {"token_base", to_string(plan.token_base)},
                {"alpha", oc.alpha},
                {"beta", oc.beta},
                {"seq_ngram", oc.seq_ngram},
                {"mix_prob", oc.mix_prob},
                {"block_n_min", oc.block_n_min},
                {"block_n_max", oc.block_n_max},
                {"block_on_targets", plan.block_on_targets},
                {"epochs", plan.epochs},
                {"batch_size", plan.batch_size},
                {"learning_rate", plan.learning_rate},
                {"clip_norm", plan.clip_norm},
                {"continuation_len", plan.continuation_len},
                {"max_steps", plan.max_steps},
                {"casefold", topts.casefold},
                {"vocab_size", mc.vocab_size},
                {"embed_dim", mc.embed_dim},
                {"context_len", mc.context_len},
                {"num_blocks", mc.num_blocks},
                {"ffn_dim", mc.ffn_dim},
                {"init_scale", mc.init_scale},
                {"init_from", a.init_from}};
  m.write();

  std::printf("trained %s: %zu steps (%zu sequence-level), loss %.4f -> %.4f\n",
              params.trained_with.c_str(), log.steps.size(), log.sequence_steps,
              log.mean_token_loss(true, 20), log.mean_token_loss(false, 20));
  std::printf("seconds/100 steps: token-level %.3f, sequence-level %.3f\n",
              log.seconds_per_100(false), log.seconds_per_100(true));
  return kOk;
}

// ---------------------------------------------------------------- generate

struct DecodeArgs {
  std::size_t beam = 5;
  std::size_t max_len = 64;
  bool greedy = false;

  DecodeConfig config() const {
    DecodeConfig c;
    c.strategy = greedy ? DecodeStrategy::kGreedy : DecodeStrategy::kBeam;
    c.beam_size = beam;
    c.max_len = max_len;
    c.validate();
    return c;
  }
};

void add_decode(CLI::App* cmd, DecodeArgs& d) {
  cmd->add_option("--beam", d.beam, "Beam width")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--max-len", d.max_len, "Maximum generated tokens")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--greedy", d.greedy, "Greedy decoding instead of beam search");
}

struct GenerateArgs {
  Common common;
  DecodeArgs decode;
  std::string model, vocab, corpus, out;
  bool preview = false;
};

int run_generate(const GenerateArgs& a, const std::vector<std::string>& argv) {
  RunManifest m("generate", argv);
  const auto model = load_model(a.model, a.vocab);
  const auto corpus = read_corpus(a.corpus, a.common.strict);
  if (corpus.empty()) throw DataError("generate: corpus " + a.corpus + " has no samples");
  const auto cfg = a.decode.config();
  const auto examples = make_examples(corpus, model.vocab, model.params.config().context_len);
  std::vector<CorpusSample> outputs(corpus.size());
  const IncrementalModel inc(model.params);
  parallel_for(corpus.size(), a.common.jobs, [&](std::size_t i) {
    const auto h = ulkit::decode(inc, examples[i].prompt, cfg);
    outputs[i] = {corpus[i].bullet_points, detok(h.tokens, model.vocab)};
  });
  if (a.preview) {
    for (const auto& s : outputs) std::cout << "> " << s.bullet_points << "\n  " << s.paragraph << "\n\n";
  }
  if (!a.out.empty()) {
    // Empty generations cannot round-trip through the corpus format.
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw IoError("cannot write " + a.out);
    for (const auto& s : outputs) {
      f << json{{"bullet_points", s.bullet_points}, {"paragraph", s.paragraph}}.dump() << '\n';
    }
    m.input(a.model);
    m.input(a.corpus);
    m.output(a.out);
    m.seed(a.common.seed);
    m.config() = {{"strategy", a.decode.greedy ? "greedy" : "beam"},
                  {"beam", cfg.beam_size},
                  {"max_len", cfg.max_len}};
    m.write();
  }
  return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  Common common;
  DecodeArgs decode;
  std::vector<std::string> models;
  std::string corpus, blocklist, out, table;
  std::vector<std::size_t> rep_windows = {128};
  std::vector<std::size_t> seq_orders = {1, 4};
  bool allow_unigram_blocks = false;
};

int run_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
  RunManifest m("evaluate", argv);
  const auto corpus = read_corpus(a.corpus, a.common.strict);
  if (corpus.empty()) throw DataError("evaluate: corpus " + a.corpus + " has no samples");
  m.input(a.corpus);
  EvalOptions opts;
  opts.rep_windows = a.rep_windows;
  opts.seq_rep_orders = a.seq_orders;
  opts.decode = a.decode.config();
  opts.jobs = a.common.jobs;

  std::vector<std::pair<std::string, MetricsReport>> rows;
  json models = json::array();
  for (const auto& path : a.models) {
    const auto model = load_model(path, "");
    m.input(path);
    const std::size_t ctx = model.params.config().context_len;
    EvalOptions mopts = opts;
    mopts.rep_windows.clear();
    for (std::size_t l : opts.rep_windows) {
      if (l <= ctx) {
        mopts.rep_windows.push_back(l);
      } else {
        std::cerr << "warning: " << model.name << ": rep window " << l
                  << " exceeds context " << ctx << "; skipped\n";
      }
    }
    const auto examples = make_examples(corpus, model.vocab, ctx);
    const auto blocklist =
        read_blocklist(a.blocklist, model.vocab, a.allow_unigram_blocks ? 1 : 2, 10);
    const auto ev = evaluate_model(model.params, examples, mopts, blocklist ? &*blocklist : nullptr);
    rows.emplace_back(model.name, ev.report);
    models.push_back({{"name", model.name},
                      {"path", path},
                      {"trained_with", model.params.trained_with},
                      {"metrics", ev.report.to_json()}});
  }
  if (!a.blocklist.empty()) m.input(a.blocklist);
  const std::string table = format_metrics_table(rows);
  std::cout << table;
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw IoError("cannot write " + a.out);
    f << json{{"models", models}}.dump(2) << '\n';
    m.output(a.out);
  }
  if (!a.table.empty()) {
    std::ofstream f(a.table, std::ios::binary);
    if (!f) throw IoError("cannot write " + a.table);
    f << table;
    m.output(a.table);
  }
  m.seed(a.common.seed);
  m.config() = {{"beam", opts.decode.beam_size},
                {"strategy", a.decode.greedy ? "greedy" : "beam"},
                {"max_len", opts.decode.max_len},
                {"rep_windows", opts.rep_windows},
                {"seq_rep_orders", opts.seq_rep_orders}};
  m.write();
  return kOk;
}

// ---------------------------------------------------------------- dedup

struct DedupArgs {
  Common common;
  std::string corpus, embeddings, out_dir;
  std::vector<double> thresholds = {0.8, 0.91};
  std::string keep = "first";
  bool casefold = false;
};

std::string threshold_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", t);
  return buf;
}

int run_dedup(const DedupArgs& a, const std::vector<std::string>& argv) {
  RunManifest m("dedup", argv);
  const auto corpus = read_corpus(a.corpus, a.common.strict);
  if (corpus.empty()) throw DataError("dedup: corpus " + a.corpus + " has no samples");
  m.input(a.corpus);
  TokenizerOptions topts;
  topts.casefold = a.casefold;
  const Vocab vocab = build_vocab(corpus, 1000000, topts);

  // Sentence embeddings, indexed by a running sentence index over the corpus.
  std::vector<std::vector<std::string>> sentences(corpus.size());
  std::vector<std::vector<std::optional<std::vector<double>>>> vectors(corpus.size());
  std::map<std::size_t, std::vector<double>> external;
  if (!a.embeddings.empty()) {
    external = load_embeddings(a.embeddings);
    m.input(a.embeddings);
  }
  std::size_t running = 0;
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    sentences[p] = split_sentences(corpus[p].paragraph);
    for (const auto& s : sentences[p]) {
      std::optional<std::vector<double>> v;
      if (!a.embeddings.empty()) {
        auto it = external.find(running);
        if (it == external.end()) {
          throw DataError("dedup: no embedding for sentence " + std::to_string(running));
        }
        v = it->second;
      } else {
        try {
          v = toy_embed(s, vocab, running).vector;
        } catch (const DataError&) {
          // No in-vocabulary token: the sentence is kept and never compared.
        }
      }
      vectors[p].push_back(std::move(v));
      ++running;
    }
  }

  const KeepPolicy keep = a.keep == "last" ? KeepPolicy::kLast : KeepPolicy::kFirst;
  fs::create_directories(a.out_dir);
  std::vector<double> before(corpus.size());
  double mean_before = 0.0;
  std::size_t total_sentences = 0;
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    before[p] = seq_rep(encode(corpus[p].paragraph, vocab), 4);
    mean_before += before[p];
    total_sentences += sentences[p].size();
  }
  mean_before /= static_cast<double>(corpus.size());

  json rows = json::array();
  std::ostringstream table;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %10s %10s %10s %12s %12s\n", "threshold", "sentences",
                "kept", "dropped", "paragraphs", "seq-rep-4");
  table << line;
  std::snprintf(line, sizeof line, "%-10s %10zu %10zu %10d %12d %12.4f\n", "none", total_sentences,
                total_sentences, 0, 0, mean_before);
  table << line;
  for (double t : a.thresholds) {
    const DedupConfig cfg{t, keep};
    cfg.validate();
    const std::string tag = threshold_tag(t);
    const fs::path out = fs::path(a.out_dir) / ("dedup-" + tag + ".jsonl");
    const fs::path drops = fs::path(a.out_dir) / ("drops-" + tag + ".tsv");
    std::ofstream fo(out, std::ios::binary), fd(drops, std::ios::binary);
    if (!fo || !fd) throw IoError("cannot write into " + a.out_dir);
    fd << "paragraph\tdropped\tsimilarity\tpartner\n";
    std::size_t kept_total = 0, changed = 0;
    double after = 0.0;
    for (std::size_t p = 0; p < corpus.size(); ++p) {
      std::vector<std::size_t> idx;
      std::vector<std::vector<double>> emb;
      for (std::size_t i = 0; i < vectors[p].size(); ++i) {
        if (vectors[p][i]) {
          idx.push_back(i);
          emb.push_back(*vectors[p][i]);
        }
      }
      const auto r = dedup_paragraph(emb, cfg);
      std::vector<bool> keep_flag(sentences[p].size(), true);
      for (const auto& d : r.dropped) {
        keep_flag[idx[d.sentence]] = false;
        fd << p << '\t' << idx[d.sentence] << '\t' << d.similarity << '\t' << idx[d.partner]
           << '\n';
      }
      std::string para;
      for (std::size_t i = 0; i < sentences[p].size(); ++i) {
        if (!keep_flag[i]) continue;
        if (!para.empty()) para.push_back(' ');
        para += sentences[p][i];
        ++kept_total;
      }
      changed += !r.dropped.empty();
      after += seq_rep(encode(para, vocab), 4);
      fo << json{{"bullet_points", corpus[p].bullet_points}, {"paragraph", para}}.dump() << '\n';
    }
    after /= static_cast<double>(corpus.size());
    std::snprintf(line, sizeof line, "%-10s %10zu %10zu %10zu %12zu %12.4f\n", tag.c_str(),
                  total_sentences, kept_total, total_sentences - kept_total, changed, after);
    table << line;
    rows.push_back({{"threshold", t},
                    {"sentences", total_sentences},
                    {"kept", kept_total},
                    {"dropped", total_sentences - kept_total},
                    {"paragraphs_changed", changed},
                    {"seq-rep-4", after}});
    m.output(out);
    m.output(drops);
  }
  const fs::path report = fs::path(a.out_dir) / "report.json";
  const fs::path report_txt = fs::path(a.out_dir) / "report.txt";
  std::ofstream(report, std::ios::binary)
      << json{{"seq-rep-4_before", mean_before}, {"keep", a.keep}, {"rows", rows}}.dump(2) << '\n';
  std::ofstream(report_txt, std::ios::binary) << table.str();
  m.output(report);
  m.output(report_txt);
  m.seed(a.common.seed);
  m.config() = {{"thresholds", a.thresholds},
                {"keep", a.keep},
                {"casefold", a.casefold},
                {"embeddings", a.embeddings.empty() ? "toy" : a.embeddings}};
  m.write();
  std::cout << table.str();
  return kOk;
}

// ---------------------------------------------------------------- scan

struct ScanArgs {
  Common common;
  std::string corpus, blocklist, out;
  std::string field = "paragraph";
  bool allow_unigram_blocks = false;
  bool casefold = false;
};

int run_scan(const ScanArgs& a, const std::vector<std::string>& argv) {
  RunManifest m("scan", argv);
  const auto corpus = read_corpus(a.corpus, a.common.strict);
  if (corpus.empty()) throw DataError("scan: corpus " + a.corpus + " has no samples");
  TokenizerOptions topts;
  topts.casefold = a.casefold;
  const Vocab vocab = build_vocab(corpus, 1000000, topts);
  const auto automaton = read_blocklist(a.blocklist, vocab, a.allow_unigram_blocks ? 1 : 2, 10);
  if (!automaton) throw std::invalid_argument("scan: --blocklist is required");

  std::ostringstream tsv;
  std::size_t matches = 0, hit_samples = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& text = a.field == "bullet_points" ? corpus[i].bullet_points : corpus[i].paragraph;
    const auto found = automaton->find_all(encode(text, vocab));
    hit_samples += !found.empty();
    for (const auto& f : found) {
      tsv << i << '\t' << f.start << '\t' << f.length << '\t'
          << decode(automaton->phrases()[f.phrase], vocab) << '\n';
      ++matches;
    }
  }
  if (a.out.empty()) {
    std::cout << tsv.str();
  } else {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw IoError("cannot write " + a.out);
    f << tsv.str();
    m.input(a.corpus);
    m.input(a.blocklist);
    m.output(a.out);
    m.seed(a.common.seed);
    m.config() = {{"field", a.field}, {"casefold", a.casefold},
                  {"n_min", automaton->n_min()}, {"n_max", automaton->n_max()}};
    m.write();
  }
  std::cerr << matches << " matches in " << hit_samples << " of " << corpus.size()
            << " samples\n";
  return kOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  Common common;
  std::size_t tokens = 10000, phrases = 1000, vocab = 500, repeats = 3;
  std::size_t seq_tokens = 2000, seq_ngram = 4;
  std::string out;
};

template <class Fn>
double best_seconds(std::size_t repeats, Fn&& fn) {
  double best = 1e300;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return best;
}

int run_bench(const BenchArgs& a, const std::vector<std::string>& argv) {
  RunManifest m("bench", argv);
  if (a.vocab < 2 || a.tokens == 0 || a.phrases == 0 || a.repeats == 0) {
    throw std::invalid_argument("bench: sizes must be positive and vocab >= 2");
  }
  Rng rng = Rng::substream(a.common.seed, "bench");
  auto random_ids = [&](std::size_t n) {
    TokenSequence s(n);
    for (auto& t : s) t = static_cast<TokenId>(kNumSpecials + rng.below(a.vocab));
    return s;
  };
  std::vector<TokenSequence> phrases;
  for (std::size_t i = 0; i < a.phrases; ++i) {
    phrases.push_back(random_ids(static_cast<std::size_t>(rng.range(2, 10))));
  }
  TokenSequence stream = random_ids(a.tokens);
  // Plant some phrases so both paths have matches to report.
  for (std::size_t k = 0; k < a.tokens / 100; ++k) {
    const auto& p = phrases[rng.below(phrases.size())];
    if (p.size() > stream.size()) continue;
    const auto at = rng.below(stream.size() - p.size() + 1);
    std::copy(p.begin(), p.end(), stream.begin() + static_cast<std::ptrdiff_t>(at));
  }

  const auto automaton = compile_blocklist(phrases, 1, 10);
  CandidateSchedule naive_block, fast_block;
  const double t_naive = best_seconds(a.repeats, [&] {
    naive_block = naive_block_scan(stream, automaton.phrases());
  });
  const double t_fast = best_seconds(a.repeats, [&] {
    fast_block = block_candidates(stream, automaton);
  });
  const double t_compile = best_seconds(a.repeats, [&] { compile_blocklist(phrases, 1, 10); });

  const TokenSequence seq = random_ids(std::min(a.seq_tokens, a.tokens));
  TokenSequence looped = seq;
  // Repetitive tail, as in a degenerate decode.
  for (std::size_t i = looped.size() / 2; i < looped.size(); ++i) {
    looped[i] = looped[i - 16];
  }
  CandidateSchedule naive_seq, fast_seq;
  const double t_seq_naive = best_seconds(a.repeats, [&] {
    naive_seq = naive_seq_level_scan(looped, a.seq_ngram);
  });
  const double t_seq_fast = best_seconds(a.repeats, [&] {
    fast_seq = seq_level_candidates(looped, a.seq_ngram);
  });

  const bool block_equal = naive_block == fast_block;
  const bool seq_equal = naive_seq == fast_seq;
  const double block_ratio = t_naive / std::max(t_fast, 1e-12);
  const double seq_ratio = t_seq_naive / std::max(t_seq_fast, 1e-12);

  char line[256];
  std::ostringstream table;
  std::snprintf(line, sizeof line, "%-22s %10s %12s %12s %9s %7s\n", "extraction", "tokens",
                "naive (s)", "fast (s)", "speedup", "equal");
  table << line;
  std::snprintf(line, sizeof line, "%-22s %10zu %12.6f %12.6f %8.1fx %7s\n",
                "block (1k phrases)", stream.size(), t_naive, t_fast, block_ratio,
                block_equal ? "yes" : "NO");
  table << line;
  std::snprintf(line, sizeof line, "%-22s %10zu %12.6f %12.6f %8.1fx %7s\n", "seq-level (n-gram)",
                looped.size(), t_seq_naive, t_seq_fast, seq_ratio, seq_equal ? "yes" : "NO");
  table << line;
  std::snprintf(line, sizeof line, "automaton: %zu states, compiled in %.6f s, %zu covered positions\n",
                automaton.num_states(), t_compile, fast_block.count());
  table << line;
  std::cout << table.str();

  const json report = {{"tokens", stream.size()},
                       {"phrases", automaton.phrases().size()},
                       {"automaton_states", automaton.num_states()},
                       {"compile_seconds", t_compile},
                       {"block_naive_seconds", t_naive},
                       {"block_automaton_seconds", t_fast},
                       {"block_speedup", block_ratio},
                       {"block_equal", block_equal},
                       {"covered_positions", fast_block.count()},
                       {"seq_tokens", looped.size()},
                       {"seq_ngram", a.seq_ngram},
                       {"seq_naive_seconds", t_seq_naive},
                       {"seq_hashed_seconds", t_seq_fast},
                       {"seq_speedup", seq_ratio},
                       {"seq_equal", seq_equal}};
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw IoError("cannot write " + a.out);
    f << report.dump(2) << '\n';
    m.output(a.out);
    m.seed(a.common.seed);
    m.config() = {{"tokens", a.tokens}, {"phrases", a.phrases}, {"vocab", a.vocab},
                  {"repeats", a.repeats}, {"seq_tokens", a.seq_tokens},
                  {"seq_ngram", a.seq_ngram}};
    m.write();
  }
  return block_equal && seq_equal ? kOk : kFailure;
}

int run(int argc, char** argv) {
  CLI::App app{"Unlikelihood training toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  const std::vector<std::string> args(argv, argv + argc);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic outline/paragraph corpus");
  add_common(s, synth.common);
  s->add_option("--out", synth.out, "Output corpus (JSON lines)")->required();
  s->add_option("--samples", synth.config.num_samples, "Training samples")->capture_default_str();
  s->add_option("--eval-out", synth.eval_out, "Held-out corpus written from the same stream");
  s->add_option("--eval-samples", synth.eval_samples, "Held-out samples")->capture_default_str();
  s->add_option("--vocab-size", synth.config.vocab_size, "Content words")->capture_default_str();
  s->add_option("--target-len", synth.config.target_len, "Approximate paragraph tokens")
      ->capture_default_str();
  s->add_option("--repeat-rate", synth.config.repeat_rate, "Share of paragraphs with a repeated sentence")
      ->capture_default_str();
  s->add_option("--plant-rate", synth.config.blocklist_plant_rate,
                "Share of samples with a planted blocklist phrase")
      ->capture_default_str();
  s->add_option("--blocklist", synth.blocklist_in, "Blocklist to plant from")->check(CLI::ExistingFile);
  s->add_option("--blocklist-out", synth.blocklist_out, "Write the blocklist used");
  s->add_option("--blocklist-size", synth.blocklist_size, "Phrases in a generated blocklist")
      ->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train or continue training a model");
  add_common(t, tr.common);
  t->add_option("--corpus", tr.corpus, "Training corpus")->required()->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "Output checkpoint")->required();
  t->add_option("--objective", tr.objective, "mle | token_ul | seq_ul | seq_ul_block")
      ->capture_default_str()
      ->check(CLI::IsMember({"mle", "token_ul", "seq_ul", "seq_ul_block"}));
  t->add_option("--init-from", tr.init_from, "Continue from this checkpoint")->check(CLI::ExistingFile);
  t->add_option("--vocab", tr.vocab, "Vocabulary file (default: built from corpus, or the init model's)");
  t->add_option("--max-vocab", tr.max_vocab, "Vocabulary cap when building")->capture_default_str();
  t->add_flag("--casefold", tr.casefold, "Lowercase ASCII letters before lookup");
  t->add_option("--blocklist", tr.blocklist, "Blocklist phrases for seq_ul_block")->check(CLI::ExistingFile);
  t->add_flag("--allow-unigram-blocks", tr.allow_unigram_blocks, "Accept length-1 blocklist phrases");
  t->add_flag("--no-block-on-targets", tr.no_block_on_targets,
              "Apply block candidates only on decoded continuations");
  t->add_option("--token-base", tr.token_base, "Token-level steps of seq objectives: auto | mle | token_ul")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "mle", "token_ul"}));
  t->add_option("--alpha", tr.oc.alpha, "Unlikelihood weight")->capture_default_str();
  t->add_option("--beta", tr.oc.beta, "Block-loss weight")->capture_default_str();
  t->add_option("--seq-ngram", tr.oc.seq_ngram, "n-gram order of sequence-level candidates")
      ->capture_default_str();
  t->add_option("--mix-prob", tr.oc.mix_prob, "Probability of a sequence-level step")->capture_default_str();
  t->add_option("--block-n-min", tr.oc.block_n_min, "Shortest blocklist phrase")->capture_default_str();
  t->add_option("--block-n-max", tr.oc.block_n_max, "Longest blocklist phrase")->capture_default_str();
  t->add_option("--epochs", tr.epochs, "Passes over the corpus")->capture_default_str();
  t->add_option("--batch-size", tr.batch_size, "Examples per step")->capture_default_str();
  t->add_option("--lr", tr.lr, "SGD learning rate")->capture_default_str();
  t->add_option("--clip-norm", tr.clip_norm, "Gradient norm clip")->capture_default_str();
  t->add_option("--continuation-len", tr.continuation_len, "Decoded tokens per sequence-level example")
      ->capture_default_str();
  t->add_option("--max-steps", tr.max_steps, "Stop after this many steps (0: no limit)")
      ->capture_default_str();
  t->add_option("--embed-dim", tr.model.embed_dim, "Model width")->capture_default_str();
  t->add_option("--context-len", tr.model.context_len, "Context window")->capture_default_str();
  t->add_option("--num-blocks", tr.model.num_blocks, "Attention + feed-forward blocks")
      ->capture_default_str();
  t->add_option("--ffn-dim", tr.model.ffn_dim, "Feed-forward width (0: 2 x embed-dim)")
      ->capture_default_str();
  t->add_option("--init-scale", tr.model.init_scale, "Uniform init half-width")->capture_default_str();
  t->add_option("--log", tr.log, "Training log (default: <out>.log.ndjson)");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate paragraphs for a corpus of outlines");
  add_common(g, gen.common);
  add_decode(g, gen.decode);
  g->add_option("--model", gen.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  g->add_option("--vocab", gen.vocab, "Vocabulary file (default: <model>.vocab)");
  g->add_option("--corpus", gen.corpus, "Inputs (JSON lines)")->required()->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output records (JSON lines)");
  g->add_flag("--preview", gen.preview, "Print outline/paragraph pairs");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score one or more models on a held-out corpus");
  add_common(e, ev.common);
  add_decode(e, ev.decode);
  e->add_option("--model", ev.models, "Checkpoint (repeat for a side-by-side table)")
      ->required()
      ->check(CLI::ExistingFile);
  e->add_option("--corpus", ev.corpus, "Held-out corpus")->required()->check(CLI::ExistingFile);
  e->add_option("--blocklist", ev.blocklist, "Count outputs with blocklist phrases")
      ->check(CLI::ExistingFile);
  e->add_flag("--allow-unigram-blocks", ev.allow_unigram_blocks, "Accept length-1 blocklist phrases");
  e->add_option("--rep-window", ev.rep_windows, "rep-l/wrep-l windows")->capture_default_str();
  e->add_option("--seq-rep", ev.seq_orders, "seq-rep-n orders")->capture_default_str();
  e->add_option("--out", ev.out, "JSON report");
  e->add_option("--table", ev.table, "Plain-text table");

  DedupArgs dd;
  auto* d = app.add_subcommand("dedup", "Post-hoc sentence dedup with a threshold sweep");
  add_common(d, dd.common);
  d->add_option("--corpus", dd.corpus, "Paragraphs to dedup")->required()->check(CLI::ExistingFile);
  d->add_option("--embeddings", dd.embeddings, "Sentence embeddings (default: bag-of-tokens)")
      ->check(CLI::ExistingFile);
  d->add_option("--threshold", dd.thresholds, "Cosine thresholds")->capture_default_str();
  d->add_option("--keep", dd.keep, "first | last")
      ->capture_default_str()
      ->check(CLI::IsMember({"first", "last"}));
  d->add_flag("--casefold", dd.casefold, "Lowercase ASCII letters before lookup");
  d->add_option("--out-dir", dd.out_dir, "Output directory")->required();

  ScanArgs sc;
  auto* c = app.add_subcommand("scan", "List blocklist matches as TSV");
  add_common(c, sc.common);
  c->add_option("--corpus", sc.corpus, "Corpus to scan")->required()->check(CLI::ExistingFile);
  c->add_option("--blocklist", sc.blocklist, "Blocklist phrases")->required()->check(CLI::ExistingFile);
  c->add_option("--field", sc.field, "paragraph | bullet_points")
      ->capture_default_str()
      ->check(CLI::IsMember({"paragraph", "bullet_points"}));
  c->add_flag("--allow-unigram-blocks", sc.allow_unigram_blocks, "Accept length-1 blocklist phrases");
  c->add_flag("--casefold", sc.casefold, "Lowercase ASCII letters before lookup");
  c->add_option("--out", sc.out, "TSV output (default: stdout)");

  BenchArgs bn;
  auto* b = app.add_subcommand("bench", "Time naive vs optimized candidate extraction");
  add_common(b, bn.common);
  b->add_option("--tokens", bn.tokens, "Stream length")->capture_default_str();
  b->add_option("--phrases", bn.phrases, "Blocklist phrases")->capture_default_str();
  b->add_option("--vocab", bn.vocab, "Token ids drawn from")->capture_default_str();
  b->add_option("--repeats", bn.repeats, "Timing repeats (best kept)")->capture_default_str();
  b->add_option("--seq-tokens", bn.seq_tokens, "Sequence length for the n-gram comparison")
      ->capture_default_str();
  b->add_option("--seq-ngram", bn.seq_ngram, "n-gram order")->capture_default_str();
  b->add_option("--out", bn.out, "JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s) return run_synth(synth, args);
    if (*t) return run_train(tr, args);
    if (*g) return run_generate(gen, args);
    if (*e) return run_evaluate(ev, args);
    if (*d) return run_dedup(dd, args);
    if (*c) return run_scan(sc, args);
    if (*b) return run_bench(bn, args);
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return kData;
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace
}  // namespace ulkit

int main(int argc, char** argv) { return ulkit::run(argc, argv); }
