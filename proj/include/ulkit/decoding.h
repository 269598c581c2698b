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

#ifndef ULKIT_DECODING_H_
#define ULKIT_DECODING_H_

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "ulkit/common.h"
#include "ulkit/objectives.h"
#include "ulkit/tokenizer.h"

namespace ulkit {

class ModelParams;

// A next-token model that can be advanced one token at a time.
template <class M>
concept StepModel = requires(const M& m, const typename M::State& s,
                             std::span<const TokenId> prefix, TokenId t) {
  { m.start(prefix) } -> std::convertible_to<typename M::State>;
  { m.advance(s, t) } -> std::convertible_to<typename M::State>;
  { m.distribution(s) } -> std::convertible_to<const Vector&>;
};

enum class DecodeStrategy { kGreedy, kBeam };

struct DecodeConfig {
  DecodeStrategy strategy = DecodeStrategy::kBeam;
  std::size_t beam_size = 5;
  // Maximum number of decoding steps; the </s> step counts.
  std::size_t max_len = 64;

  void validate() const {
    if (beam_size < 1) throw std::invalid_argument("decode: beam_size must be >= 1");
    if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
  }
};

struct Hypothesis {
  TokenSequence tokens;  // generated tokens, </s> excluded
  double log_prob = 0.0;
  std::size_t steps = 0;  // scored steps, </s> included
  bool finished = false;  // ended with </s>

  // Length-normalized log-probability.
  double score() const {
    return steps ? log_prob / static_cast<double>(steps) : 0.0;
  }
};

namespace detail {

inline double safe_log(double p) {
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

// Higher score first, then lexicographically smaller tokens.
inline bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score() != b.score()) return a.score() > b.score();
  return a.tokens < b.tokens;
}

}  // namespace detail

// Appends the argmax token (smallest id on ties) until </s> or max_len steps.
template <StepModel M>
Hypothesis greedy_decode(const M& model, std::span<const TokenId> prefix,
                         std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
  Hypothesis h;
  auto state = model.start(prefix);
  for (std::size_t step = 0; step < max_len; ++step) {
    const Vector& p = model.distribution(state);
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < p.size(); ++k) {
      if (p(k) > p(best)) best = k;
    }
    h.log_prob += detail::safe_log(p(best));
    ++h.steps;
    const auto tok = static_cast<TokenId>(best);
    if (tok == kEosId) {
      h.finished = true;
      break;
    }
    h.tokens.push_back(tok);
    if (step + 1 < max_len) state = model.advance(state, tok);
  }
  return h;
}

// Length-normalized beam search. Each step keeps the beam_size best
// extensions by cumulative log-probability (ties: lexicographically smaller
// hypothesis); extensions ending in </s> leave the beam as finished
// hypotheses. Returns the best finished hypothesis by normalized score, or
// the best unfinished one when nothing finished within max_len.
template <StepModel M>
Hypothesis beam_search(const M& model, std::span<const TokenId> prefix,
                       const DecodeConfig& config) {
  config.validate();
  struct Beam {
    typename M::State state;
    TokenSequence tokens;
    double log_prob;
  };
  struct Extension {
    std::size_t parent;
    TokenId token;
    double log_prob;
  };

  std::vector<Beam> alive;
  alive.push_back({model.start(prefix), {}, 0.0});
  std::vector<Hypothesis> finished;
  std::vector<Extension> ext;

  for (std::size_t step = 0; step < config.max_len && !alive.empty(); ++step) {
    ext.clear();
    for (std::size_t b = 0; b < alive.size(); ++b) {
      const Vector& p = model.distribution(alive[b].state);
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        const double lp = alive[b].log_prob + detail::safe_log(p(k));
        if (lp == -std::numeric_limits<double>::infinity()) continue;
        ext.push_back({b, static_cast<TokenId>(k), lp});
      }
    }
    const std::size_t keep = std::min(config.beam_size, ext.size());
    // Ties go to the lexicographically smaller hypothesis.
    auto ext_less = [&](const Extension& a, const Extension& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      const auto& ta = alive[a.parent].tokens;
      const auto& tb = alive[b.parent].tokens;
      if (ta != tb) return ta < tb;
      return a.token < b.token;
    };
    std::partial_sort(ext.begin(), ext.begin() + static_cast<std::ptrdiff_t>(keep),
                      ext.end(), ext_less);

    std::vector<Beam> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& e = ext[i];
      const Beam& parent = alive[e.parent];
      if (e.token == kEosId) {
        finished.push_back({parent.tokens, e.log_prob, step + 1, true});
        continue;
      }
      Beam child{parent.state, parent.tokens, e.log_prob};
      child.tokens.push_back(e.token);
      if (step + 1 < config.max_len) child.state = model.advance(parent.state, e.token);
      next.push_back(std::move(child));
    }
    alive = std::move(next);
  }

  // Beams still alive at max_len compete with the finished ones.
  std::vector<Hypothesis> pool = std::move(finished);
  for (auto& b : alive) {
    const std::size_t steps = b.tokens.size();
    pool.push_back({std::move(b.tokens), b.log_prob, steps, false});
  }
  if (pool.empty()) return {};
  return *std::min_element(pool.begin(), pool.end(), detail::better);
}

template <StepModel M>
Hypothesis decode(const M& model, std::span<const TokenId> prefix,
                  const DecodeConfig& config) {
  config.validate();
  if (config.strategy == DecodeStrategy::kGreedy) {
    return greedy_decode(model, prefix, config.max_len);
  }
  return beam_search(model, prefix, config);
}

// Convenience overloads over the toolkit's language model.
Hypothesis greedy_decode(const ModelParams& params,
                         std::span<const TokenId> prefix, std::size_t max_len);
Hypothesis beam_search(const ModelParams& params,
                       std::span<const TokenId> prefix,
                       const DecodeConfig& config);
Hypothesis decode(const ModelParams& params, std::span<const TokenId> prefix,
                  const DecodeConfig& config);

}  // namespace ulkit

#endif  // ULKIT_DECODING_H_
