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

#include "ulkit/model.h"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "ulkit/decoding.h"
#include "ulkit/rng.h"

namespace ulkit {
namespace {

using MatMap = Eigen::Map<Matrix>;
using RowMap = Eigen::Map<Eigen::RowVectorXd>;
using RowVec = Eigen::RowVectorXd;

struct BlockWeights {
  MatMap wq, wk, wv, wo, w1;
  RowMap b1;
  MatMap w2;
  RowMap b2;
};

struct Weights {
  MatMap tok, pos;
  std::vector<BlockWeights> blocks;
  RowMap out_bias;
};

Weights bind(double* base, const ModelConfig& cfg) {
  const auto layout = param_layout(cfg);
  std::size_t i = 0;
  auto mat = [&]() {
    const auto& s = layout[i++];
    return MatMap(base + s.offset, static_cast<Eigen::Index>(s.rows),
                  static_cast<Eigen::Index>(s.cols));
  };
  auto row = [&]() {
    const auto& s = layout[i++];
    return RowMap(base + s.offset, static_cast<Eigen::Index>(s.cols));
  };
  MatMap tok = mat();
  MatMap pos = mat();
  std::vector<BlockWeights> blocks;
  for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
    MatMap wq = mat(), wk = mat(), wv = mat(), wo = mat(), w1 = mat();
    RowMap b1 = row();
    MatMap w2 = mat();
    RowMap b2 = row();
    blocks.push_back({wq, wk, wv, wo, w1, b1, w2, b2});
  }
  RowMap out_bias = row();
  return {tok, pos, std::move(blocks), out_bias};
}

Weights bind(const ModelParams& p) {
  // Read-only: forward code never writes through these maps.
  return bind(const_cast<double*>(p.flat().data()), p.config());
}

void softmax_inplace(Eigen::Ref<RowVec> z) {
  const double m = z.maxCoeff();
  z = (z.array() - m).exp();
  z /= z.sum();
}

struct BlockActs {
  Matrix in, q, k, v, attn, ctx, mid, act;
};

struct Activations {
  std::vector<BlockActs> blocks;
  Matrix out;
  Matrix probs;
};

double attention_scale(const ModelConfig& cfg) {
  return 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
}

void check_tokens(std::span<const TokenId> tokens, const ModelConfig& cfg) {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
      throw DataError("token id " + std::to_string(t) + " out of range for model vocab " +
                      std::to_string(cfg.vocab_size));
    }
  }
}

Activations run_forward(const Weights& w, const ModelConfig& cfg,
                        std::span<const TokenId> tokens) {
  const auto T = static_cast<Eigen::Index>(tokens.size());
  const double scale = attention_scale(cfg);
  Matrix h(T, static_cast<Eigen::Index>(cfg.embed_dim));
  for (Eigen::Index t = 0; t < T; ++t) {
    h.row(t) = w.tok.row(tokens[static_cast<std::size_t>(t)]) + w.pos.row(t);
  }
  Activations a;
  a.blocks.resize(w.blocks.size());
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    const auto& bw = w.blocks[b];
    auto& ba = a.blocks[b];
    ba.in = h;
    ba.q = h * bw.wq;
    ba.k = h * bw.wk;
    ba.v = h * bw.wv;
    ba.attn = Matrix::Zero(T, T);
    for (Eigen::Index i = 0; i < T; ++i) {
      RowVec s = (ba.k.topRows(i + 1) * ba.q.row(i).transpose()).transpose() * scale;
      softmax_inplace(s);
      ba.attn.row(i).head(i + 1) = s;
    }
    ba.ctx = ba.attn * ba.v;
    ba.mid = h + ba.ctx * bw.wo;
    ba.act = ((ba.mid * bw.w1).rowwise() + bw.b1).array().tanh().matrix();
    h = ba.mid + Matrix((ba.act * bw.w2).rowwise() + bw.b2);
  }
  a.out = std::move(h);
  a.probs = (a.out * w.tok.transpose()).rowwise() + w.out_bias;
  for (Eigen::Index t = 0; t < T; ++t) softmax_inplace(a.probs.row(t));
  return a;
}

// Adds d(loss)/d(params) to `g` given d(loss)/d(logits).
void run_backward(const Weights& w, Weights& g, const ModelConfig& cfg,
                  std::span<const TokenId> tokens, const Activations& a,
                  const Matrix& dlogits) {
  const auto T = static_cast<Eigen::Index>(tokens.size());
  const double scale = attention_scale(cfg);
  Matrix dh = dlogits * w.tok;
  g.tok.noalias() += dlogits.transpose() * a.out;
  g.out_bias += dlogits.colwise().sum();

  for (std::size_t bi = w.blocks.size(); bi-- > 0;) {
    const auto& bw = w.blocks[bi];
    auto& bg = g.blocks[bi];
    const auto& ba = a.blocks[bi];
    // h = mid + tanh(mid w1 + b1) w2 + b2
    bg.w2.noalias() += ba.act.transpose() * dh;
    bg.b2 += dh.colwise().sum();
    Matrix du = ((dh * bw.w2.transpose()).array() * (1.0 - ba.act.array().square())).matrix();
    bg.w1.noalias() += ba.mid.transpose() * du;
    bg.b1 += du.colwise().sum();
    Matrix dmid = dh + du * bw.w1.transpose();
    // mid = in + attn v wo
    bg.wo.noalias() += ba.ctx.transpose() * dmid;
    Matrix dctx = dmid * bw.wo.transpose();
    Matrix dattn = dctx * ba.v.transpose();
    Matrix dv = ba.attn.transpose() * dctx;
    Matrix ds = Matrix::Zero(T, T);
    for (Eigen::Index i = 0; i < T; ++i) {
      const auto n = i + 1;
      const double dot = dattn.row(i).head(n).dot(ba.attn.row(i).head(n));
      ds.row(i).head(n) = (ba.attn.row(i).head(n).array() *
                           (dattn.row(i).head(n).array() - dot)).matrix() * scale;
    }
    Matrix dq = ds * ba.k;
    Matrix dk = ds.transpose() * ba.q;
    bg.wq.noalias() += ba.in.transpose() * dq;
    bg.wk.noalias() += ba.in.transpose() * dk;
    bg.wv.noalias() += ba.in.transpose() * dv;
    dh = dmid + dq * bw.wq.transpose() + dk * bw.wk.transpose() + dv * bw.wv.transpose();
  }
  for (Eigen::Index t = 0; t < T; ++t) {
    g.tok.row(tokens[static_cast<std::size_t>(t)]) += dh.row(t);
    g.pos.row(t) += dh.row(t);
  }
}

TokenSequence concat(std::span<const TokenId> a, std::span<const TokenId> b) {
  TokenSequence out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < 5) throw std::invalid_argument("model: vocab_size must be >= 5");
  if (embed_dim < 1) throw std::invalid_argument("model: embed_dim must be positive");
  if (context_len < 2) throw std::invalid_argument("model: context_len must be >= 2");
  if (num_blocks < 1) throw std::invalid_argument("model: num_blocks must be positive");
  if (!(init_scale > 0.0 && init_scale <= 1.0)) {
    throw std::invalid_argument("model: init_scale must lie in (0, 1]");
  }
}

std::vector<ParamSegment> param_layout(const ModelConfig& c) {
  std::vector<ParamSegment> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    out.push_back({std::move(name), offset, rows, cols});
    offset += rows * cols;
  };
  const std::size_t d = c.embed_dim, f = c.hidden_dim();
  add("tok_embed", c.vocab_size, d);
  add("pos_embed", c.context_len, d);
  for (std::size_t b = 0; b < c.num_blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    add(p + "wq", d, d);
    add(p + "wk", d, d);
    add(p + "wv", d, d);
    add(p + "wo", d, d);
    add(p + "w1", d, f);
    add(p + "b1", 1, f);
    add(p + "w2", f, d);
    add(p + "b2", 1, d);
  }
  add("out_bias", 1, c.vocab_size);
  return out;
}

ModelParams::ModelParams(const ModelConfig& config)
    : config_(config), layout_(param_layout(config)) {
  config_.validate();
  const auto& last = layout_.back();
  flat_.assign(last.offset + last.size(), 0.0);
}

std::span<const double> ModelParams::view(std::string_view name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return {flat_.data() + s.offset, s.size()};
  }
  throw std::out_of_range("no parameter segment named " + std::string(name));
}

std::span<double> ModelParams::view(std::string_view name) {
  for (const auto& s : layout_) {
    if (s.name == name) return {flat_.data() + s.offset, s.size()};
  }
  throw std::out_of_range("no parameter segment named " + std::string(name));
}

ModelParams init_model(const ModelConfig& config) {
  ModelParams p(config);
  Rng rng = Rng::substream(config.seed, "model.init");
  for (const auto& seg : p.layout()) {
    auto v = p.view(seg.name);
    // Biases start at zero.
    if (seg.rows == 1) continue;
    for (double& x : v) x = rng.uniform(-config.init_scale, config.init_scale);
  }
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const auto& c = params.config();
  nlohmann::json meta = {
      {"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},
      {"context_len", c.context_len}, {"num_blocks", c.num_blocks},
      {"ffn_dim", c.ffn_dim},         {"init_scale", c.init_scale},
      {"seed", c.seed},               {"step", params.step},
      {"trained_with", params.trained_with}, {"num_params", params.size()},
      {"version", std::string(kVersion)}};
  out << "ulkit-checkpoint 1\n" << meta.dump() << '\n';
  for (double x : params.flat()) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::string magic, meta_line;
  std::getline(in, magic);
  if (magic != "ulkit-checkpoint 1") throw DataError(path.string() + ": not a ulkit checkpoint");
  std::getline(in, meta_line);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }
  ModelConfig c;
  try {
    c.vocab_size = meta.at("vocab_size").get<std::size_t>();
    c.embed_dim = meta.at("embed_dim").get<std::size_t>();
    c.context_len = meta.at("context_len").get<std::size_t>();
    c.num_blocks = meta.at("num_blocks").get<std::size_t>();
    c.ffn_dim = meta.at("ffn_dim").get<std::size_t>();
    c.init_scale = meta.at("init_scale").get<double>();
    c.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }
  ModelParams p(c);
  p.step = meta.value("step", std::uint64_t{0});
  p.trained_with = meta.value("trained_with", std::string("init"));
  if (meta.value("num_params", std::size_t{0}) != p.size()) {
    throw DataError(path.string() + ": parameter count does not match config");
  }
  for (double& x : p.flat()) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw DataError(path.string() + ": truncated parameter block");
    }
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    x = std::bit_cast<double>(bits);
    if (!std::isfinite(x)) throw DataError(path.string() + ": non-finite parameter");
  }
  return p;
}

DistributionSequence sequence_distributions(const ModelParams& params,
                                            std::span<const TokenId> tokens) {
  const auto& cfg = params.config();
  if (tokens.empty() || tokens.size() > cfg.context_len) {
    throw std::invalid_argument("sequence_distributions: need 1..context_len tokens");
  }
  check_tokens(tokens, cfg);
  return run_forward(bind(params), cfg, tokens).probs;
}

Vector forward(const ModelParams& params, std::span<const TokenId> prefix) {
  const TokenId bos[] = {kBosId};
  if (prefix.empty()) prefix = bos;
  const std::size_t c = params.config().context_len;
  if (prefix.size() > c) prefix = prefix.subspan(prefix.size() - c);
  const auto probs = sequence_distributions(params, prefix);
  return probs.row(probs.rows() - 1).transpose();
}

TargetedSequence LmExample::teacher_forced() const {
  TargetedSequence s;
  s.input = prompt;
  if (!target.empty()) s.input.insert(s.input.end(), target.begin(), target.end() - 1);
  s.first = prompt.size() - 1;
  s.target = target;
  return s;
}

LmExample make_example(const CorpusSample& sample, const Vocab& vocab,
                       std::size_t context_len) {
  LmExample ex;
  ex.prompt.push_back(kBosId);
  const auto outline = encode(sample.bullet_points, vocab);
  ex.prompt.insert(ex.prompt.end(), outline.begin(), outline.end());
  ex.prompt.push_back(kEosId);
  ex.target = encode(sample.paragraph, vocab);
  ex.target.push_back(kEosId);
  const std::size_t max_prompt = std::max<std::size_t>(1, context_len / 2);
  if (ex.prompt.size() > max_prompt) {
    ex.prompt.erase(ex.prompt.begin(),
                    ex.prompt.end() - static_cast<std::ptrdiff_t>(max_prompt));
  }
  const std::size_t max_target = context_len + 1 - ex.prompt.size();
  if (ex.target.size() > max_target) ex.target.resize(max_target);
  return ex;
}

std::vector<LmExample> make_examples(std::span<const CorpusSample> corpus,
                                     const Vocab& vocab, std::size_t context_len) {
  std::vector<LmExample> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back(make_example(s, vocab, context_len));
  return out;
}

DistributionSequence target_distributions(const ModelParams& params,
                                          const TargetedSequence& seq) {
  if (seq.input.size() != seq.first + seq.target.size()) {
    throw std::invalid_argument("targeted sequence: input/target length mismatch");
  }
  const auto all = sequence_distributions(params, seq.input);
  return all.middleRows(static_cast<Eigen::Index>(seq.first),
                        static_cast<Eigen::Index>(seq.target.size()));
}

LossValue accumulate_gradient(const ModelParams& params,
                              const TargetedSequence& seq,
                              const Objective& objective,
                              std::span<double> grad, double scale) {
  const auto& cfg = params.config();
  if (grad.size() != params.size()) throw std::invalid_argument("gradient buffer size mismatch");
  if (seq.input.size() != seq.first + seq.target.size()) {
    throw std::invalid_argument("targeted sequence: input/target length mismatch");
  }
  if (seq.input.empty() || seq.input.size() > cfg.context_len) {
    throw std::invalid_argument("targeted sequence: need 1..context_len input tokens");
  }
  check_tokens(seq.input, cfg);
  check_tokens(seq.target, cfg);
  const Weights w = bind(params);
  const Activations acts = run_forward(w, cfg, seq.input);
  const auto first = static_cast<Eigen::Index>(seq.first);
  const auto n = static_cast<Eigen::Index>(seq.target.size());
  const DistributionSequence dists = acts.probs.middleRows(first, n);
  LossValue loss = evaluate_objective(dists, seq.target, objective);
  if (!loss.finite) return loss;
  const Matrix dz = objective_logit_gradient(dists, seq.target, objective);
  Matrix dlogits = Matrix::Zero(acts.probs.rows(), acts.probs.cols());
  dlogits.middleRows(first, n) = dz * scale;
  Weights g = bind(grad.data(), cfg);
  run_backward(w, g, cfg, seq.input, acts, dlogits);
  return loss;
}

void IncrementalModel::push(State& s, TokenId token) const {
  const auto& cfg = params_->config();
  if (token < 0 || static_cast<std::size_t>(token) >= cfg.vocab_size) {
    throw DataError("token id " + std::to_string(token) + " out of range");
  }
  const Weights w = bind(*params_);
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  const auto pos = static_cast<Eigen::Index>(s.tokens.size());
  const double scale = attention_scale(cfg);
  if (s.keys.empty()) {
    s.keys.resize(cfg.num_blocks);
    s.values.resize(cfg.num_blocks);
  }
  RowVec x = w.tok.row(token) + w.pos.row(pos);
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    const auto& bw = w.blocks[b];
    const RowVec q = x * bw.wq;
    const RowVec k = x * bw.wk;
    const RowVec v = x * bw.wv;
    auto& keys = s.keys[b];
    auto& values = s.values[b];
    keys.insert(keys.end(), k.data(), k.data() + d);
    values.insert(values.end(), v.data(), v.data() + d);
    const Eigen::Index n = pos + 1;
    const Eigen::Map<const Matrix> K(keys.data(), n, d);
    const Eigen::Map<const Matrix> V(values.data(), n, d);
    RowVec att = (K * q.transpose()).transpose() * scale;
    softmax_inplace(att);
    const RowVec ctx = att * V;
    const RowVec mid = x + ctx * bw.wo;
    const RowVec act = ((mid * bw.w1) + bw.b1).array().tanh().matrix();
    x = mid + act * bw.w2 + bw.b2;
  }
  RowVec logits = x * w.tok.transpose() + w.out_bias;
  softmax_inplace(logits);
  s.probs = logits.transpose();
  s.tokens.push_back(token);
}

IncrementalModel::State IncrementalModel::start(std::span<const TokenId> prefix) const {
  const TokenId bos[] = {kBosId};
  if (prefix.empty()) prefix = bos;
  const std::size_t c = params_->config().context_len;
  if (prefix.size() > c) prefix = prefix.subspan(prefix.size() - c);
  State s;
  for (TokenId t : prefix) push(s, t);
  return s;
}

IncrementalModel::State IncrementalModel::advance(const State& state, TokenId token) const {
  if (state.tokens.size() >= params_->config().context_len) {
    // Positions shift once the window slides; rebuild from scratch.
    TokenSequence window = concat(state.tokens, std::span<const TokenId>(&token, 1));
    return start(window);
  }
  State s = state;
  push(s, token);
  return s;
}

Hypothesis greedy_decode(const ModelParams& params, std::span<const TokenId> prefix,
                         std::size_t max_len) {
  return greedy_decode(IncrementalModel(params), prefix, max_len);
}

Hypothesis beam_search(const ModelParams& params, std::span<const TokenId> prefix,
                       const DecodeConfig& config) {
  return beam_search(IncrementalModel(params), prefix, config);
}

Hypothesis decode(const ModelParams& params, std::span<const TokenId> prefix,
                  const DecodeConfig& config) {
  return decode(IncrementalModel(params), prefix, config);
}

const char* to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kMle: return "mle";
    case ObjectiveKind::kTokenUl: return "token_ul";
    case ObjectiveKind::kSeqUl: return "seq_ul";
    case ObjectiveKind::kSeqUlBlock: return "seq_ul_block";
  }
  return "?";
}

ObjectiveKind parse_objective_kind(std::string_view name) {
  if (name == "mle") return ObjectiveKind::kMle;
  if (name == "token_ul") return ObjectiveKind::kTokenUl;
  if (name == "seq_ul") return ObjectiveKind::kSeqUl;
  if (name == "seq_ul_block") return ObjectiveKind::kSeqUlBlock;
  throw std::invalid_argument("unknown objective '" + std::string(name) + "'");
}

void TrainPlan::validate() const {
  objective_config.validate();
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("train: clip norm must be > 0");
  if (continuation_len < 1) throw std::invalid_argument("train: continuation length must be >= 1");
  if (token_base != ObjectiveKind::kMle && token_base != ObjectiveKind::kTokenUl) {
    throw std::invalid_argument("train: token-level base must be mle or token_ul");
  }
  const ModelConfig& m = init_from ? init_from->config() : model;
  if (!init_from) m.validate();
  const bool seq = objective == ObjectiveKind::kSeqUl || objective == ObjectiveKind::kSeqUlBlock;
  if (seq && m.context_len < objective_config.seq_ngram) {
    throw std::invalid_argument("train: context_len must be >= seq_ngram");
  }
}

double TrainLog::seconds_per_100(bool sequence_level) const {
  const std::size_t n = sequence_level ? sequence_steps : steps.size() - sequence_steps;
  if (n == 0) return 0.0;
  return (sequence_level ? seq_seconds : token_seconds) * 100.0 / static_cast<double>(n);
}

double TrainLog::mean_token_loss(bool head, std::size_t window) const {
  std::vector<double> losses;
  for (const auto& r : steps) {
    if (!r.sequence_level) losses.push_back(r.loss);
  }
  if (losses.empty() || window == 0) return std::numeric_limits<double>::quiet_NaN();
  window = std::min(window, losses.size());
  auto b = head ? losses.begin() : losses.end() - static_cast<std::ptrdiff_t>(window);
  return std::accumulate(b, b + static_cast<std::ptrdiff_t>(window), 0.0) /
         static_cast<double>(window);
}

void TrainLog::write_ndjson(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write train log " + path.string());
  for (const auto& r : steps) {
    nlohmann::json j = {{"type", "step"},   {"step", r.step},
                        {"kind", r.kind},   {"sequence_level", r.sequence_level},
                        {"loss", r.loss},   {"clamps", r.clamps},
                        {"grad_norm", r.grad_norm}};
    out << j.dump() << '\n';
  }
  for (const auto& t : timings) {
    nlohmann::json j = {{"type", "timing"},
                        {"step", t.step},
                        {"kind", t.kind},
                        {"steps", t.steps},
                        {"seconds_per_100_steps", t.seconds_per_100_steps}};
    out << j.dump() << '\n';
  }
  nlohmann::json summary = {{"type", "summary"},
                            {"steps", steps.size()},
                            {"sequence_steps", sequence_steps},
                            {"token_seconds_per_100_steps", seconds_per_100(false)},
                            {"seq_seconds_per_100_steps", seconds_per_100(true)}};
  out << summary.dump() << '\n';
}

std::pair<ModelParams, TrainLog> train(std::span<const LmExample> data,
                                       const TrainPlan& plan,
                                       const BlocklistAutomaton* blocklist,
                                       const TrainObserver& observer) {
  using Clock = std::chrono::steady_clock;
  plan.validate();
  const bool seq_objective =
      plan.objective == ObjectiveKind::kSeqUl || plan.objective == ObjectiveKind::kSeqUlBlock;
  const bool block = plan.objective == ObjectiveKind::kSeqUlBlock;
  if (block && blocklist == nullptr) {
    throw std::invalid_argument("train: seq_ul_block needs a blocklist");
  }
  if (data.empty()) throw DataError("train: empty training set");

  ModelParams params = plan.init_from ? *plan.init_from : init_model(plan.model);
  const auto& cfg = params.config();
  const ObjectiveKind base = seq_objective ? plan.token_base : plan.objective;
  const ObjectiveConfig& oc = plan.objective_config;

  Rng shuffle_rng = Rng::substream(plan.seed, "train.shuffle");
  Rng mix_rng = Rng::substream(plan.seed, "train.mix");
  std::vector<std::size_t> order(data.size());
  std::vector<double> grad(params.size());
  TrainLog log;
  std::size_t token_window = 0, seq_window = 0;
  double token_window_secs = 0.0, seq_window_secs = 0.0;
  std::size_t step = 0;
  const IncrementalModel stepper(params);

  for (std::size_t epoch = 0; epoch < plan.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order.begin(), order.end());
    for (std::size_t b0 = 0; b0 < order.size(); b0 += plan.batch_size) {
      if (plan.max_steps && step >= plan.max_steps) break;
      const auto t0 = Clock::now();
      const std::size_t b1 = std::min(order.size(), b0 + plan.batch_size);
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      const bool seq_step = seq_objective && mix_rng.uniform() < oc.mix_prob;

      std::fill(grad.begin(), grad.end(), 0.0);
      TrainStepRecord rec;
      rec.step = step;
      rec.sequence_level = seq_step;
      rec.kind = seq_step ? to_string(plan.objective) : to_string(base);
      if (!seq_step && block && plan.block_on_targets) rec.kind = "token_ul_block";

      for (std::size_t i = b0; i < b1; ++i) {
        const LmExample& ex = data[order[i]];
        TargetedSequence ts;
        CandidateSchedule first_cands, block_cands;
        Objective obj;
        if (seq_step) {
          const std::size_t room = cfg.context_len + 1 - ex.prompt.size();
          Hypothesis h = greedy_decode(stepper, ex.prompt,
                                       std::min(plan.continuation_len, room));
          if (h.tokens.empty()) continue;
          ts.input = concat(ex.prompt, std::span<const TokenId>(h.tokens).first(h.tokens.size() - 1));
          ts.first = ex.prompt.size() - 1;
          ts.target = std::move(h.tokens);
          first_cands = seq_level_candidates(ts.target, oc.seq_ngram);
          obj.likelihood_weight = 0.0;
          obj.penalties.push_back({&first_cands, oc.alpha});
          if (block) {
            block_cands = block_candidates(ts.target, *blocklist);
            obj.penalties.push_back({&block_cands, oc.beta});
          }
        } else {
          ts = ex.teacher_forced();
          if (base == ObjectiveKind::kTokenUl) {
            first_cands = token_level_candidates(ts.target);
            obj.penalties.push_back({&first_cands, oc.alpha});
          }
          if (block && plan.block_on_targets) {
            block_cands = block_candidates(ts.target, *blocklist);
            obj.penalties.push_back({&block_cands, oc.beta});
          }
        }
        std::size_t clamps = 0;
        LossValue lv;
        try {
          lv = accumulate_gradient(params, ts, obj, grad, inv);
        } catch (const NumericError& e) {
          throw std::runtime_error("training diverged at step " + std::to_string(step) +
                                   ": " + e.what());
        }
        clamps += lv.clamps;
        if (!lv.finite || !std::isfinite(lv.value)) {
          throw std::runtime_error("training diverged at step " + std::to_string(step) +
                                   ": non-finite loss");
        }
        rec.loss += lv.value * inv;
        rec.clamps += clamps;
      }

      double norm2 = 0.0;
      for (double g : grad) norm2 += g * g;
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm)) {
        throw std::runtime_error("training diverged at step " + std::to_string(step) +
                                 ": non-finite gradient");
      }
      rec.grad_norm = norm;
      const double clip = norm > plan.clip_norm ? plan.clip_norm / norm : 1.0;
      auto& theta = params.flat();
      for (std::size_t k = 0; k < theta.size(); ++k) {
        theta[k] -= plan.learning_rate * (clip * grad[k]);
      }
      ++params.step;

      const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
      auto& window = seq_step ? seq_window : token_window;
      auto& window_secs = seq_step ? seq_window_secs : token_window_secs;
      (seq_step ? log.seq_seconds : log.token_seconds) += secs;
      if (seq_step) ++log.sequence_steps;
      ++window;
      window_secs += secs;
      if (window == 100) {
        log.timings.push_back({step, seq_step ? "seq" : "token", window, window_secs});
        window = 0;
        window_secs = 0.0;
      }
      if (observer) observer(rec, params);
      log.steps.push_back(std::move(rec));
      ++step;
    }
  }
  params.trained_with = to_string(plan.objective);
  if (seq_objective && base == ObjectiveKind::kMle) params.trained_with += "+mle";
  return {std::move(params), std::move(log)};
}

std::pair<ModelParams, TrainLog> train(std::span<const CorpusSample> corpus,
                                       const Vocab& vocab, const TrainPlan& plan,
                                       const BlocklistAutomaton* blocklist) {
  const std::size_t ctx =
      plan.init_from ? plan.init_from->config().context_len : plan.model.context_len;
  const auto examples = make_examples(corpus, vocab, ctx);
  return train(examples, plan, blocklist);
}

double grad_check(const ModelConfig& config, ObjectiveKind variant,
                  std::size_t trials, std::uint64_t seed, double eps) {
  if (trials < 1) throw std::invalid_argument("grad_check: trials must be >= 1");
  double worst = 0.0;
  Rng rng = Rng::substream(seed, "gradcheck");
  const std::size_t V = config.vocab_size;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    ModelConfig c = config;
    c.seed = rng.next_u64();
    ModelParams params = init_model(c);
    const std::size_t len = std::min<std::size_t>(c.context_len, 8);

    // Small alphabets for the target make repeats (and thus candidates)
    // likely.
    TargetedSequence ts;
    const std::size_t prefix = len / 2;
    ts.first = prefix - 1;
    const std::size_t tlen = len - ts.first;
    for (std::size_t i = 0; i < prefix; ++i) {
      ts.input.push_back(static_cast<TokenId>(rng.below(V)));
    }
    for (std::size_t i = 0; i < tlen; ++i) {
      ts.target.push_back(static_cast<TokenId>(kNumSpecials + rng.below(2)));
    }
    ts.input.insert(ts.input.end(), ts.target.begin(), ts.target.end() - 1);

    CandidateSchedule cands;
    Objective obj;
    switch (variant) {
      case ObjectiveKind::kMle:
        break;
      case ObjectiveKind::kTokenUl:
        cands = token_level_candidates(ts.target);
        obj.penalties.push_back({&cands, 1.0});
        break;
      case ObjectiveKind::kSeqUl:
        cands = seq_level_candidates(ts.target, 1);
        obj.likelihood_weight = 0.0;
        obj.penalties.push_back({&cands, 1.0});
        break;
      case ObjectiveKind::kSeqUlBlock: {
        const TokenSequence phrase{ts.target[0], ts.target[1]};
        const auto automaton = compile_blocklist(std::span<const TokenSequence>(&phrase, 1), 2, 10);
        cands = block_candidates(ts.target, automaton);
        obj.penalties.push_back({&cands, 10.0});
        break;
      }
    }

    std::vector<double> analytic(params.size(), 0.0);
    accumulate_gradient(params, ts, obj, analytic);
    auto loss_at = [&]() {
      return evaluate_objective(target_distributions(params, ts), ts.target, obj).value;
    };
    for (std::size_t k = 0; k < params.size(); ++k) {
      double& x = params.flat()[k];
      const double saved = x;
      x = saved + eps;
      const double up = loss_at();
      x = saved - eps;
      const double down = loss_at();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace ulkit
