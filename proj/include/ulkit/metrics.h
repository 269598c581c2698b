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

#ifndef ULKIT_METRICS_H_
#define ULKIT_METRICS_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ulkit/candidates.h"
#include "ulkit/common.h"
#include "ulkit/decoding.h"
#include "ulkit/model.h"

namespace ulkit {

// Teacher-forced repetition counts for one sequence. Position t counts as a
// repeat when predictions[t] occurs in gold[max(0, t - l) .. t - 1]; a wrong
// repeat additionally has predictions[t] != gold[t]. Every position is in the
// denominator, including t = 0.
struct RepCounts {
  std::size_t repeats = 0;
  std::size_t wrong_repeats = 0;
  std::size_t positions = 0;

  RepCounts& operator+=(const RepCounts& o) {
    repeats += o.repeats;
    wrong_repeats += o.wrong_repeats;
    positions += o.positions;
    return *this;
  }
  double rep() const { return positions ? static_cast<double>(repeats) / positions : 0.0; }
  double wrep() const { return positions ? static_cast<double>(wrong_repeats) / positions : 0.0; }
};

RepCounts rep_counts(std::span<const TokenId> gold,
                     std::span<const TokenId> predictions, std::size_t l);

// 1 - distinct / total n-grams; 0 when the sequence has no n-gram.
double seq_rep(std::span<const TokenId> seq, std::size_t n);

// Size of the union of token ids over all outputs.
std::size_t uniq_seq(std::span<const TokenSequence> outputs);

enum class RougeVariant { kRouge1, kRouge2, kRougeL };

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Clipped n-gram overlap (1, 2) or longest common subsequence (L) on token
// ids. Throws std::invalid_argument on an empty reference.
RougeScore rouge(std::span<const TokenId> candidate,
                 std::span<const TokenId> reference, RougeVariant variant);

// Number of outputs with at least one blocklist match.
std::size_t blocklist_output_count(std::span<const TokenSequence> outputs,
                                   const BlocklistAutomaton& automaton);

struct LmStats {
  double ppl = 0.0;
  double mean_nll = 0.0;
  double acc = 0.0;
  std::map<std::size_t, double> rep;
  std::map<std::size_t, double> wrep;
  std::size_t uniq = 0;
  std::size_t tokens = 0;
};

// Teacher-forced pass over the paragraphs: perplexity, argmax accuracy,
// rep-l / wrep-l against the gold window of each l in `windows`, and the
// number of distinct argmax predictions. Throws DataError on an empty set.
LmStats lm_metrics(const ModelParams& params, std::span<const LmExample> data,
                   std::span<const std::size_t> windows, std::size_t jobs = 1);

struct MetricsReport {
  double ppl = 0.0;
  double acc = 0.0;
  std::map<std::size_t, double> rep_l;
  std::map<std::size_t, double> wrep_l;
  std::map<std::size_t, double> seq_rep;
  std::size_t uniq = 0;
  std::size_t uniq_seq = 0;
  double rouge1_f = 0.0;
  double rouge2_f = 0.0;
  double rougeL_f = 0.0;
  std::optional<std::size_t> blocklist_output_count;
  std::size_t num_samples = 0;

  nlohmann::json to_json() const;
};

struct EvalOptions {
  std::vector<std::size_t> rep_windows = {128};
  std::vector<std::size_t> seq_rep_orders = {1, 4};
  DecodeConfig decode;
  std::size_t jobs = 1;
};

struct Evaluation {
  MetricsReport report;
  std::vector<TokenSequence> outputs;  // generated paragraphs, </s> removed
};

// Teacher-forced metrics plus decoding of every prompt for the
// generation metrics. ROUGE references are the targets without </s>.
Evaluation evaluate_model(const ModelParams& params,
                          std::span<const LmExample> data,
                          const EvalOptions& options,
                          const BlocklistAutomaton* blocklist = nullptr);

// Generation-side metrics for already decoded outputs.
void fill_generation_metrics(MetricsReport& report,
                             std::span<const TokenSequence> outputs,
                             std::span<const TokenSequence> references,
                             std::span<const std::size_t> seq_rep_orders,
                             const BlocklistAutomaton* blocklist);

// Aligned plain-text table, one row per named report.
std::string format_metrics_table(
    std::span<const std::pair<std::string, MetricsReport>> rows);

}  // namespace ulkit

#endif  // ULKIT_METRICS_H_
