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

#ifndef ULKIT_MODEL_H_
#define ULKIT_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ulkit/candidates.h"
#include "ulkit/common.h"
#include "ulkit/corpus.h"
#include "ulkit/objectives.h"
#include "ulkit/tokenizer.h"

namespace ulkit {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 64;
  std::size_t context_len = 128;
  std::size_t num_blocks = 1;
  // Feed-forward hidden width; 0 means 2 * embed_dim.
  std::size_t ffn_dim = 0;
  // Initial weights are uniform in [-init_scale, init_scale].
  double init_scale = 0.1;
  std::uint64_t seed = 1;

  std::size_t hidden_dim() const { return ffn_dim ? ffn_dim : 2 * embed_dim; }
  // Throws std::invalid_argument.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Named slice of the flat parameter vector.
struct ParamSegment {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  friend bool operator==(const ParamSegment&, const ParamSegment&) = default;
};

// Token and position embeddings, per block: attention projections wq, wk,
// wv, wo and the feed-forward w1, b1, w2, b2; finally the output bias. The
// output projection is tied to the token embeddings.
std::vector<ParamSegment> param_layout(const ModelConfig& config);

class ModelParams {
 public:
  explicit ModelParams(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<double>& flat() { return flat_; }
  const std::vector<double>& flat() const { return flat_; }
  std::size_t size() const { return flat_.size(); }
  const std::vector<ParamSegment>& layout() const { return layout_; }

  // Throws std::out_of_range for unknown names, e.g. "block0.wq".
  std::span<const double> view(std::string_view name) const;
  std::span<double> view(std::string_view name);

  std::uint64_t step = 0;
  // Objective that produced these weights ("init" when untrained) and the
  // token-level base it used; consulted when staging further training.
  std::string trained_with = "init";

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  ModelConfig config_;
  std::vector<ParamSegment> layout_;
  std::vector<double> flat_;
};

ModelParams init_model(const ModelConfig& config);

// Checkpoint: text header line, JSON metadata line, then the raw
// little-endian doubles.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

// Distribution over the next token after `prefix`. Only the last
// context_len tokens are used; an empty prefix is treated as <s>.
Vector forward(const ModelParams& params, std::span<const TokenId> prefix);

// Row i is p(. | tokens[0..i]). tokens.size() must be in [1, context_len].
DistributionSequence sequence_distributions(const ModelParams& params,
                                            std::span<const TokenId> tokens);

// A sequence with supervised positions: row `first + i` of the
// distributions over `input` predicts target[i], so
// input.size() == first + target.size().
struct TargetedSequence {
  TokenSequence input;
  std::size_t first = 0;
  TokenSequence target;
};

// Prompt is <s> outline </s>; target is the paragraph followed by </s>.
struct LmExample {
  TokenSequence prompt;
  TokenSequence target;

  TargetedSequence teacher_forced() const;
};

// Encodes a sample, trimming so that prompt + target fits in context_len + 1
// tokens (long outlines keep their tail, long paragraphs their head).
LmExample make_example(const CorpusSample& sample, const Vocab& vocab,
                       std::size_t context_len);
std::vector<LmExample> make_examples(std::span<const CorpusSample> corpus,
                                     const Vocab& vocab,
                                     std::size_t context_len);

// Teacher-forced distributions for the supervised rows only.
DistributionSequence target_distributions(const ModelParams& params,
                                          const TargetedSequence& seq);

// Evaluates `objective` on `seq` and adds scale * d(loss)/d(params) to
// `grad` (which must have params.size() entries).
LossValue accumulate_gradient(const ModelParams& params,
                              const TargetedSequence& seq,
                              const Objective& objective,
                              std::span<double> grad, double scale = 1.0);

// Key/value cache for incremental decoding; cheap to copy for beams.
struct DecodeState {
  TokenSequence tokens;
  std::vector<std::vector<double>> keys;    // per block, row-major
  std::vector<std::vector<double>> values;  // per block, row-major
  Vector probs;
};

// Incremental next-token model over fixed parameters. Satisfies the
// decoding StepModel concept.
class IncrementalModel {
 public:
  using State = DecodeState;
  explicit IncrementalModel(const ModelParams& params) : params_(&params) {}

  State start(std::span<const TokenId> prefix) const;
  State advance(const State& state, TokenId token) const;
  const Vector& distribution(const State& state) const { return state.probs; }
  std::size_t vocab_size() const { return params_->config().vocab_size; }

 private:
  void push(State& state, TokenId token) const;
  const ModelParams* params_;
};

enum class ObjectiveKind { kMle, kTokenUl, kSeqUl, kSeqUlBlock };
const char* to_string(ObjectiveKind kind);
ObjectiveKind parse_objective_kind(std::string_view name);

struct TrainPlan {
  ObjectiveKind objective = ObjectiveKind::kMle;
  ObjectiveConfig objective_config;
  // Objective of the non-sequence-level steps for kSeqUl / kSeqUlBlock.
  ObjectiveKind token_base = ObjectiveKind::kTokenUl;
  // Apply the beta-weighted block term to ground-truth targets on
  // token-level steps of kSeqUlBlock, in addition to decoded continuations.
  bool block_on_targets = true;
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  double learning_rate = 0.1;
  double clip_norm = 1.0;
  // Greedy continuation length for sequence-level steps.
  std::size_t continuation_len = 32;
  // Stop after this many optimizer steps (0 = run all epochs).
  std::size_t max_steps = 0;
  std::uint64_t seed = 1;
  // Used for a fresh model when init_from is empty.
  ModelConfig model;
  std::optional<ModelParams> init_from;

  // Throws std::invalid_argument.
  void validate() const;
};

struct TrainStepRecord {
  std::size_t step = 0;
  std::string kind;  // "mle", "token_ul", "seq_ul", "seq_ul_block"
  bool sequence_level = false;
  double loss = 0.0;
  std::size_t clamps = 0;
  double grad_norm = 0.0;
};

struct TrainTimingRecord {
  std::size_t step = 0;  // last step of the window
  std::string kind;      // "token" or "seq"
  std::size_t steps = 0;
  double seconds_per_100_steps = 0.0;
};

struct TrainLog {
  std::vector<TrainStepRecord> steps;
  std::vector<TrainTimingRecord> timings;
  std::size_t sequence_steps = 0;
  double token_seconds = 0.0;
  double seq_seconds = 0.0;

  double seconds_per_100(bool sequence_level) const;
  // Mean loss of the first / last `window` token-level steps.
  double mean_token_loss(bool head, std::size_t window) const;
  // One JSON object per line: step records, then timing windows.
  void write_ndjson(const std::filesystem::path& path) const;
};

// Called after every optimizer step with the step record.
using TrainObserver = std::function<void(const TrainStepRecord&, const ModelParams&)>;

std::pair<ModelParams, TrainLog> train(std::span<const LmExample> data,
                                       const TrainPlan& plan,
                                       const BlocklistAutomaton* blocklist = nullptr,
                                       const TrainObserver& observer = {});

std::pair<ModelParams, TrainLog> train(std::span<const CorpusSample> corpus,
                                       const Vocab& vocab, const TrainPlan& plan,
                                       const BlocklistAutomaton* blocklist = nullptr);

// Worst relative error between analytic and central-difference gradients
// over `trials` random small models for the given loss variant. Relative
// error is |a - f| / max(|a|, |f|, 1e-6).
double grad_check(const ModelConfig& config, ObjectiveKind variant,
                  std::size_t trials, std::uint64_t seed = 7,
                  double eps = 1e-5);

}  // namespace ulkit

#endif  // ULKIT_MODEL_H_
