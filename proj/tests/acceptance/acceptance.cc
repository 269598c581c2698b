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

// Acceptance suite: one PASS/FAIL line per criterion. Usage:
//   acceptance [--only 1,4,...] [--work DIR]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.h"
#include "ulkit/candidates.h"
#include "ulkit/corpus.h"
#include "ulkit/decoding.h"
#include "ulkit/dedup.h"
#include "ulkit/metrics.h"
#include "ulkit/model.h"
#include "ulkit/objectives.h"
#include "ulkit/rng.h"
#include "ulkit/tokenizer.h"

namespace ulkit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix random_dists(Rng& rng, std::size_t t, std::size_t v) {
  Matrix p(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index k = 0; k < p.cols(); ++k) p(i, k) = std::exp(rng.uniform(-3.0, 3.0));
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

ModelConfig tiny_config(std::size_t vocab) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.embed_dim = 6;
  c.context_len = 12;
  c.num_blocks = 2;
  c.ffn_dim = 5;
  c.init_scale = 0.3;
  c.seed = 4;
  return c;
}

// Prompt is two content tokens; the target repeats them twice.
std::vector<LmExample> copy_task(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LmExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto body = oracle::random_seq(rng, 2, vocab - kNumSpecials, kNumSpecials);
    out.push_back({{kBosId, body[0], body[1], kEosId},
                   {body[0], body[1], body[0], body[1], kEosId}});
  }
  return out;
}

// ---------------------------------------------------------------- 1

void reduction_identity(Outcome& o) {
  Rng rng = Rng::substream(1, "acceptance-reduction");
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t t = 1 + rng.below(16), v = 2 + rng.below(30);
    const auto d = random_dists(rng, t, v);
    const auto x = oracle::random_seq(rng, t, v);
    const double mle = likelihood_loss(d, x).value;
    CandidateSchedule empty;
    empty.sets.resize(t);
    worst = std::max(worst, std::abs(unlikelihood_loss(d, x, token_level_candidates(x), 0.0).value - mle));
    worst = std::max(worst, std::abs(unlikelihood_loss(d, x, empty, rng.uniform(0.0, 5.0)).value - mle));
  }
  o.require(worst <= 1e-12, "loss identity");
  o.detail << "1000 cases, worst |UL - MLE| = " << worst << "; ";

  const auto data = copy_task(32, 9, 2);
  auto record = [&](ObjectiveKind kind) {
    TrainPlan plan;
    plan.objective = kind;
    plan.objective_config.alpha = 0.0;
    plan.model = tiny_config(9);
    plan.batch_size = 4;
    plan.learning_rate = 0.2;
    plan.epochs = 3;
    plan.seed = 9;
    std::vector<std::vector<double>> steps;
    train(data, plan, nullptr, [&](const TrainStepRecord&, const ModelParams& p) {
      steps.emplace_back(p.flat().data(), p.flat().data() + p.flat().size());
    });
    return steps;
  };
  const auto mle = record(ObjectiveKind::kMle);
  const auto ul = record(ObjectiveKind::kTokenUl);
  o.require(!mle.empty() && mle == ul, "trajectory");
  o.detail << mle.size() << "-step alpha=0 trajectory " << (mle == ul ? "bitwise equal" : "differs");
}

// ---------------------------------------------------------------- 2

void gradient_exactness(Outcome& o) {
  ModelConfig c = tiny_config(7);
  c.context_len = 8;
  for (auto kind : {ObjectiveKind::kMle, ObjectiveKind::kTokenUl, ObjectiveKind::kSeqUl,
                    ObjectiveKind::kSeqUlBlock}) {
    const double err = grad_check(c, kind, 20, 11, 1e-5);
    o.require(err < 1e-4, to_string(kind));
    o.detail << to_string(kind) << " " << err << "; ";
  }
  o.detail << "20 random models each, eps 1e-5";
}

// ---------------------------------------------------------------- 3

void candidate_oracles(Outcome& o) {
  Rng rng = Rng::substream(3, "acceptance-candidates");
  std::size_t block_hits = 0, seq_hits = 0, mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t vocab = 2 + rng.below(49);
    const std::size_t len = 1 + rng.below(256);
    auto seq = oracle::random_seq(rng, len, vocab);
    std::vector<TokenSequence> phrases;
    for (std::size_t k = 0, m = 1 + rng.below(100); k < m; ++k) {
      phrases.push_back(oracle::random_seq(rng, 2 + rng.below(9), vocab));
    }
    // Plant a few phrases so matches are not only chance events.
    for (int k = 0; k < 3; ++k) {
      const auto& p = phrases[rng.below(phrases.size())];
      if (p.size() > seq.size()) continue;
      const auto at = rng.below(seq.size() - p.size() + 1);
      std::copy(p.begin(), p.end(), seq.begin() + static_cast<std::ptrdiff_t>(at));
    }
    const auto automaton = compile_blocklist(phrases);
    const auto fast = block_candidates(seq, automaton);
    mismatches += fast != naive_block_scan(seq, automaton.phrases());
    block_hits += fast.count();
    const std::size_t n = 1 + rng.below(6);
    const auto s = seq_level_candidates(seq, n);
    mismatches += s.sets != oracle::seq_level(seq, n).sets;
    seq_hits += s.count();
  }
  o.require(mismatches == 0, "set equality");
  o.detail << "1000 sequences, " << mismatches << " mismatches; " << block_hits
           << " block and " << seq_hits << " sequence-level candidate positions";
}

// ---------------------------------------------------------------- 4, 5

struct Desk {
  std::vector<CorpusSample> train, test;
  Vocab vocab;
  std::vector<LmExample> train_ex, test_ex;
};

Desk make_desk(const SynthConfig& sc, const std::vector<std::string>& blocklist) {
  const auto corpus = synth_corpus(sc, blocklist);
  std::vector<CorpusSample> train(corpus.begin(), corpus.begin() + 2000);
  Desk d{train, {corpus.begin() + 2000, corpus.end()}, build_vocab(train, 10000, {}), {}, {}};
  d.train_ex = make_examples(d.train, d.vocab, 128);
  d.test_ex = make_examples(d.test, d.vocab, 128);
  return d;
}

TrainPlan desk_plan(const Desk& d) {
  TrainPlan p;
  p.model.vocab_size = d.vocab.size();
  p.model.embed_dim = 32;
  p.model.context_len = 128;
  p.model.seed = 1;
  p.batch_size = 8;
  p.learning_rate = 1.0;
  p.seed = 1;
  return p;
}

EvalOptions desk_eval() {
  EvalOptions e;
  e.rep_windows = {128};
  e.seq_rep_orders = {4};
  e.decode.beam_size = 5;
  e.decode.max_len = 64;
  return e;
}

ModelParams baseline(const Desk& d) {
  TrainPlan p = desk_plan(d);
  p.objective = ObjectiveKind::kMle;
  p.epochs = 20;
  return train(d.train_ex, p).first;
}

void repetition_suppression(Outcome& o) {
  const auto t0 = Clock::now();
  SynthConfig sc;
  sc.num_samples = 2200;
  sc.repeat_rate = 0.5;
  sc.seed = 1;
  const Desk d = make_desk(sc, {});
  const auto eval = desk_eval();

  const ModelParams base = baseline(d);
  TrainPlan tp = desk_plan(d);
  tp.objective = ObjectiveKind::kTokenUl;
  tp.objective_config.alpha = 1.0;
  tp.epochs = 3;
  tp.init_from = base;
  const ModelParams tok = train(d.train_ex, tp).first;

  TrainPlan sp = desk_plan(d);
  sp.objective = ObjectiveKind::kSeqUl;
  sp.token_base = ObjectiveKind::kTokenUl;
  sp.objective_config.alpha = 3.0;
  sp.objective_config.mix_prob = 0.5;
  sp.objective_config.seq_ngram = 4;
  sp.continuation_len = 64;
  sp.learning_rate = 0.3;
  sp.epochs = 4;
  sp.init_from = tok;
  const ModelParams seq = train(d.train_ex, sp).first;

  const auto rb = evaluate_model(base, d.test_ex, eval).report;
  const auto rt = evaluate_model(tok, d.test_ex, eval).report;
  const auto rs = evaluate_model(seq, d.test_ex, eval).report;
  const double b4 = rb.seq_rep.at(4), t4 = rt.seq_rep.at(4), s4 = rs.seq_rep.at(4);
  const double elapsed = seconds_since(t0);
  o.require(b4 > 0.0, "baseline repeats");
  o.require(t4 <= 0.8 * b4, "token-UL seq-rep-4");
  o.require(s4 <= 0.5 * b4, "seq-UL seq-rep-4");
  o.require(rb.rep_l.at(128) > rt.rep_l.at(128), "rep-128 ordering");
  o.require(elapsed < 900.0, "runtime");
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "seq-rep-4 %.3f -> %.3f (%.2fx) -> %.3f (%.2fx); rep-128 %.3f -> %.3f -> %.3f; "
                "ppl %.1f / %.1f / %.1f; %.0f s",
                b4, t4, t4 / b4, s4, s4 / b4, rb.rep_l.at(128), rt.rep_l.at(128),
                rs.rep_l.at(128), rb.ppl, rt.ppl, rs.ppl, elapsed);
  o.detail << buf;
}

void content_moderation(Outcome& o) {
  const auto t0 = Clock::now();
  SynthConfig sc;
  sc.num_samples = 2200;
  sc.blocklist_plant_rate = 0.5;
  sc.seed = 2;
  const auto phrases = default_blocklist(sc.seed, 20, sc.vocab_size);
  const Desk d = make_desk(sc, phrases);
  std::vector<TokenSequence> ids;
  for (const auto& p : phrases) ids.push_back(encode(p, d.vocab));
  const auto automaton = compile_blocklist(ids);
  const auto eval = desk_eval();

  const ModelParams base = baseline(d);
  TrainPlan bp = desk_plan(d);
  bp.objective = ObjectiveKind::kSeqUlBlock;
  bp.token_base = ObjectiveKind::kMle;
  bp.objective_config.alpha = 1.0;
  bp.objective_config.beta = 10.0;
  bp.continuation_len = 64;
  bp.epochs = 4;
  bp.init_from = base;
  const ModelParams block = train(d.train_ex, bp, &automaton).first;

  const auto rb = evaluate_model(base, d.test_ex, eval, &automaton).report;
  const auto rk = evaluate_model(block, d.test_ex, eval, &automaton).report;
  const std::size_t nb = *rb.blocklist_output_count, nk = *rk.blocklist_output_count;
  const double elapsed = seconds_since(t0);
  o.require(nb > 0, "baseline emits blocklist phrases");
  o.require(static_cast<double>(nk) <= 0.75 * static_cast<double>(nb), "count ratio");
  o.require(elapsed < 900.0, "runtime");
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "outputs with blocklist phrases %zu -> %zu of %zu; ppl %.1f / %.1f; %.0f s", nb, nk,
                d.test_ex.size(), rb.ppl, rk.ppl, elapsed);
  o.detail << buf;
}

// ---------------------------------------------------------------- 6

void metric_oracles(Outcome& o) {
  Rng rng = Rng::substream(6, "acceptance-metrics");
  double worst = 0.0;
  std::size_t uniq_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t vocab = 2 + rng.below(6), len = 1 + rng.below(16);
    const auto gold = oracle::random_seq(rng, len, vocab);
    const auto pred = oracle::random_seq(rng, len, vocab);
    const std::size_t l = 1 + rng.below(8), n = 1 + rng.below(4);
    const auto counts = rep_counts(gold, pred, l);
    worst = std::max(worst, std::abs(counts.rep() - oracle::rep(gold, pred, l, false)));
    worst = std::max(worst, std::abs(counts.wrep() - oracle::rep(gold, pred, l, true)));
    worst = std::max(worst, std::abs(seq_rep(pred, n) - oracle::seq_rep(pred, n)));
    const auto cand = oracle::random_seq(rng, rng.below(12), vocab);
    worst = std::max(worst, std::abs(rouge(cand, gold, RougeVariant::kRouge1).f1 -
                                     oracle::rouge_n(cand, gold, 1)));
    worst = std::max(worst, std::abs(rouge(cand, gold, RougeVariant::kRouge2).f1 -
                                     oracle::rouge_n(cand, gold, 2)));
    worst = std::max(worst, std::abs(rouge(cand, gold, RougeVariant::kRougeL).f1 -
                                     oracle::rouge_l(cand, gold)));
    std::vector<TokenSequence> outs;
    for (std::size_t k = 0, m = rng.below(5); k < m; ++k) {
      outs.push_back(oracle::random_seq(rng, rng.below(6), 20));
    }
    uniq_mismatch += uniq_seq(outs) != oracle::uniq(outs);
  }
  o.require(worst <= 1e-12, "brute-force agreement");
  o.require(uniq_mismatch == 0, "uniq counts");

  // Perplexity against a direct pass over the model.
  ModelConfig c = tiny_config(10);
  c.context_len = 24;
  const auto params = init_model(c);
  std::vector<LmExample> data;
  for (int i = 0; i < 12; ++i) {
    LmExample ex;
    ex.prompt = {kBosId, static_cast<TokenId>(4 + rng.below(6)), kEosId};
    ex.target = oracle::random_seq(rng, 2 + rng.below(8), 6, 4);
    ex.target.push_back(kEosId);
    data.push_back(ex);
  }
  double nll = 0.0;
  std::size_t count = 0;
  std::set<TokenId> predicted;
  for (const auto& ex : data) {
    const auto ts = ex.teacher_forced();
    const auto dist = target_distributions(params, ts);
    for (std::size_t t = 0; t < ts.target.size(); ++t) {
      const auto row = static_cast<Eigen::Index>(t);
      nll -= std::log(dist(row, ts.target[t]));
      ++count;
      Eigen::Index best;
      dist.row(row).maxCoeff(&best);
      predicted.insert(static_cast<TokenId>(best));
    }
  }
  const std::vector<std::size_t> windows = {4};
  const auto stats = lm_metrics(params, data, windows);
  const double ppl = stats.ppl;
  uniq_mismatch += stats.uniq != predicted.size();
  const double ppl_err = std::abs(ppl - std::exp(nll / static_cast<double>(count)));
  o.require(ppl_err <= 1e-9, "ppl");

  const TokenId a = 4, b = 5, cc = 6;
  const auto wc = rep_counts(TokenSequence{a, b, a, cc}, TokenSequence{b, a, a, a}, 2);
  o.require(wc.rep() == 0.75 && wc.wrep() == 0.5, "rep/wrep example");
  const double r1 = rouge(TokenSequence{a, b, cc}, TokenSequence{a, b}, RougeVariant::kRouge1).f1;
  o.require(std::abs(r1 - 0.8) < 1e-15, "ROUGE-1 example");
  o.detail << "1000 cases, worst error " << worst << "; ppl error " << ppl_err
           << "; rep/wrep " << wc.rep() << "/" << wc.wrep() << ", ROUGE-1 F " << r1;
}

// ---------------------------------------------------------------- 7, 8 use the CLI

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ULKIT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

void dedup_semantics(Outcome& o, const fs::path& work) {
  const Vocab vocab({"the", "cat", "sat", "dog", "ran"});
  const std::vector<std::string> sentences = {"the cat sat.", "the dog ran.", "the cat sat."};
  std::vector<std::vector<double>> e;
  for (const auto& s : sentences) e.push_back(toy_embed(s, vocab).vector);
  const auto kept = dedup_paragraph(sentences, e, DedupConfig{0.91, KeepPolicy::kFirst});
  o.require(kept == std::vector<std::string>{"the cat sat.", "the dog ran."}, "exact duplicate");

  Rng rng = Rng::substream(7, "acceptance-dedup");
  std::size_t violations = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(10), dim = 2 + rng.below(5);
    std::vector<std::vector<double>> set;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(dim);
      if (i > 0 && rng.bernoulli(0.4)) {
        v = set[rng.below(i)];
        for (double& x : v) x += rng.uniform(-0.3, 0.3);
      } else {
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
      }
      v[0] += 1e-3;
      set.push_back(v);
    }
    for (auto policy : {KeepPolicy::kFirst, KeepPolicy::kLast}) {
      std::size_t previous = n + 1;
      for (double t : {1.0, 0.95, 0.91, 0.8, 0.5, 0.2, 0.0}) {
        const auto k = dedup_paragraph(set, DedupConfig{t, policy}).kept;
        violations += k.size() > previous;
        previous = k.size();
        std::vector<std::vector<double>> sub;
        for (std::size_t i : k) sub.push_back(set[i]);
        violations += dedup_paragraph(sub, DedupConfig{t, policy}).kept.size() != sub.size();
      }
    }
  }
  o.require(violations == 0, "monotone and idempotent");

  SynthConfig sc;
  sc.num_samples = 200;
  sc.repeat_rate = 0.5;
  sc.seed = 7;
  const fs::path corpus = work / "dedup_corpus.jsonl", out = work / "dedup";
  save_corpus(corpus, synth_corpus(sc, {}));
  const int rc = run_cli("dedup --corpus " + corpus.string() + " --threshold 0.8 --threshold 0.91 --out-dir " +
                             out.string(),
                         work / "dedup.log");
  o.require(rc == 0, "cli dedup exit");
  std::ifstream in(out / "report.json");
  const json report = in ? json::parse(in) : json{};
  bool shaped = report.contains("rows") && report["rows"].size() == 2;
  if (shaped) {
    for (const auto& row : report["rows"]) {
      for (const char* key : {"threshold", "sentences", "kept", "dropped", "seq-rep-4"}) {
        shaped = shaped && row.contains(key);
      }
    }
  }
  o.require(shaped, "report shape");
  o.detail << "500 random sets, " << violations << " violations";
  if (shaped) {
    o.detail << "; seq-rep-4 " << report["seq-rep-4_before"].get<double>();
    for (const auto& row : report["rows"]) {
      o.detail << " | t=" << row["threshold"].get<double>() << " dropped "
               << row["dropped"].get<std::size_t>() << " of " << row["sentences"].get<std::size_t>()
               << ", seq-rep-4 " << row["seq-rep-4"].get<double>();
    }
  }
}

void benchmark(Outcome& o, const fs::path& work, bool oracles_pass) {
  const fs::path out = work / "bench.json";
  const int rc = run_cli("bench --tokens 10000 --phrases 1000 --out " + out.string(), work / "bench.log");
  o.require(rc == 0, "cli bench exit");
  std::ifstream in(out);
  const json r = in ? json::parse(in) : json{};
  const bool complete = r.contains("block_naive_seconds") && r.contains("block_automaton_seconds") &&
                        r.contains("block_speedup");
  o.require(complete, "timings recorded");
  o.require(oracles_pass, "candidate oracles");
  if (!complete) return;
  const double speedup = r["block_speedup"].get<double>();
  o.require(speedup >= 5.0, "speedup");
  o.require(r["block_equal"].get<bool>() && r["seq_equal"].get<bool>(), "bench equivalence");
  char buf[200];
  std::snprintf(buf, sizeof buf, "naive %.4f s, automaton %.4f s, %.1fx; seq-level %.1fx",
                r["block_naive_seconds"].get<double>(), r["block_automaton_seconds"].get<double>(),
                speedup, r["seq_speedup"].get<double>());
  o.detail << buf;
}

// ---------------------------------------------------------------- 9

// Next-token table that is a pure function of the prefix, with support on
// EOS and `content` content tokens only.
struct TableModel {
  struct State {
    TokenSequence tokens;
    Vector probs;
  };
  std::uint64_t seed;
  std::size_t content;

  Vector dist(const TokenSequence& prefix) const {
    std::uint64_t h = seed;
    for (TokenId t : prefix) h = h * 1000003 + static_cast<std::uint64_t>(t) + 1;
    Rng rng(h);
    Vector p = Vector::Zero(static_cast<Eigen::Index>(kNumSpecials + content));
    p(kEosId) = rng.uniform() * 0.5;
    for (std::size_t k = 0; k < content; ++k) p(static_cast<Eigen::Index>(kNumSpecials + k)) = rng.uniform();
    return p / p.sum();
  }
  State start(std::span<const TokenId> prefix) const {
    State s{TokenSequence(prefix.begin(), prefix.end()), {}};
    s.probs = dist(s.tokens);
    return s;
  }
  State advance(const State& s, TokenId t) const {
    State next{s.tokens, {}};
    next.tokens.push_back(t);
    next.probs = dist(next.tokens);
    return next;
  }
  const Vector& distribution(const State& s) const { return s.probs; }
};

Hypothesis enumerate_best(const TableModel& m, std::span<const TokenId> prefix, std::size_t max_len) {
  Hypothesis best;
  bool any = false;
  TokenSequence cur;
  std::function<void(const TableModel::State&, double)> walk = [&](const TableModel::State& s,
                                                                   double lp) {
    const Vector& p = m.distribution(s);
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (p(k) <= 0.0) continue;
      const auto tok = static_cast<TokenId>(k);
      const double next = lp + std::log(p(k));
      Hypothesis h;
      if (tok == kEosId) {
        h = {cur, next, cur.size() + 1, true};
      } else {
        cur.push_back(tok);
        if (cur.size() < max_len) {
          walk(m.advance(s, tok), next);
          cur.pop_back();
          continue;
        }
        h = {cur, next, cur.size(), false};
        cur.pop_back();
      }
      if (!any || detail::better(h, best)) best = h;
      any = true;
    }
  };
  walk(m.start(prefix), 0.0);
  return best;
}

void decoding(Outcome& o) {
  Rng rng = Rng::substream(9, "acceptance-decoding");
  std::size_t greedy_mismatch = 0;
  for (int i = 0; i < 200; ++i) {
    ModelConfig c;
    c.vocab_size = 6 + rng.below(10);
    c.embed_dim = 4 + rng.below(8);
    c.context_len = 24;
    c.num_blocks = 1 + rng.below(2);
    c.init_scale = rng.uniform(0.2, 1.0);
    c.seed = rng.below(1u << 30);
    const auto params = init_model(c);
    const IncrementalModel model(params);
    const TokenSequence prompt = {kBosId, static_cast<TokenId>(kNumSpecials + rng.below(c.vocab_size - kNumSpecials)),
                                  kEosId};
    DecodeConfig cfg;
    cfg.beam_size = 1;
    cfg.max_len = 1 + rng.below(12);
    const auto g = greedy_decode(model, prompt, cfg.max_len);
    const auto b = beam_search(model, prompt, cfg);
    greedy_mismatch += g.tokens != b.tokens || g.log_prob != b.log_prob;
  }
  o.require(greedy_mismatch == 0, "beam 1 = greedy");

  std::size_t argmax_mismatch = 0, instances = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t content = 1 + seed % 3;  // plus EOS: at most 4 tokens
    const std::size_t max_len = 1 + (seed / 3) % 4;
    const TableModel m{seed, content};
    const TokenSequence prefix = {kBosId};
    DecodeConfig cfg;
    cfg.max_len = max_len;
    cfg.beam_size = 1;
    for (std::size_t i = 0; i < max_len; ++i) cfg.beam_size *= content + 1;
    const auto b = beam_search(m, prefix, cfg);
    const auto e = enumerate_best(m, prefix, max_len);
    argmax_mismatch += b.tokens != e.tokens || std::abs(b.score() - e.score()) > 1e-12;
    ++instances;
  }
  o.require(argmax_mismatch == 0, "exhaustive argmax");
  o.detail << "beam 1 vs greedy on 200 random models: " << greedy_mismatch
           << " mismatches; wide beam vs enumeration on " << instances << " instances: "
           << argmax_mismatch << " mismatches";
}

}  // namespace
}  // namespace ulkit

int main(int argc, char** argv) {
  using namespace ulkit;
  std::set<int> only;
  fs::path work = fs::temp_directory_path() / "ulkit_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--only 1,2,...] [--work DIR]\n";
      return 2;
    }
  }
  fs::create_directories(work);

  const std::vector<std::pair<std::string, double>> names = {
      {"reduction identity", 60},        {"gradient exactness", 120},
      {"candidate oracles", 60},         {"repetition suppression", 900},
      {"content moderation", 900},       {"metric oracles", 0},
      {"dedup semantics", 0},            {"performance benchmark", 0},
      {"decoding", 0}};
  bool all = true, oracles_pass = true;
  for (int id = 1; id <= 9; ++id) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      switch (id) {
        case 1: reduction_identity(o); break;
        case 2: gradient_exactness(o); break;
        case 3: candidate_oracles(o); oracles_pass = o.pass; break;
        case 4: repetition_suppression(o); break;
        case 5: content_moderation(o); break;
        case 6: metric_oracles(o); break;
        case 7: dedup_semantics(o, work); break;
        case 8: benchmark(o, work, oracles_pass); break;
        case 9: decoding(o); break;
      }
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double elapsed = seconds_since(t0);
    const double limit = names[static_cast<std::size_t>(id - 1)].second;
    if (limit > 0 && elapsed >= limit) o.require(false, "runtime limit");
    std::printf("%s criterion %d (%s): %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id,
                names[static_cast<std::size_t>(id - 1)].first.c_str(), o.detail.str().c_str(),
                elapsed);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
