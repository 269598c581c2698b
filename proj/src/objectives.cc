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

#include "ulkit/objectives.h"

#include <cmath>
#include <limits>

namespace ulkit {
namespace {

void check_shapes(const DistributionSequence& dists,
                  std::span<const TokenId> target, const Objective& objective) {
  if (static_cast<std::size_t>(dists.rows()) != target.size()) {
    throw std::invalid_argument("objective: " + std::to_string(dists.rows()) +
                                " distributions for " +
                                std::to_string(target.size()) + " targets");
  }
  const auto vocab = dists.cols();
  for (TokenId id : target) {
    if (id < 0 || id >= vocab) throw std::invalid_argument("objective: target id out of range");
  }
  for (const auto& term : objective.penalties) {
    if (term.candidates == nullptr) continue;
    if (term.candidates->size() != target.size()) {
      throw std::invalid_argument("objective: candidate schedule length mismatch");
    }
    for (const auto& set : term.candidates->sets) {
      for (TokenId c : set) {
        if (c < 0 || c >= vocab) throw std::invalid_argument("objective: candidate id out of range");
      }
    }
  }
}

bool active(const PenaltyTerm& term) {
  return term.candidates != nullptr && term.weight != 0.0;
}

}  // namespace

void ObjectiveConfig::validate() const {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
  if (!(mix_prob >= 0.0 && mix_prob <= 1.0)) throw std::invalid_argument("mix_prob must lie in [0, 1]");
  if (seq_ngram < 1) throw std::invalid_argument("seq_ngram must be >= 1");
  if (block_n_min < 1 || block_n_min > block_n_max) {
    throw std::invalid_argument("need 1 <= block_n_min <= block_n_max");
  }
}

LossValue evaluate_objective(const DistributionSequence& dists,
                             std::span<const TokenId> target,
                             const Objective& objective) {
  check_shapes(dists, target, objective);
  LossValue out;
  if (target.empty()) return out;
  double total = 0.0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    const auto row = dists.row(static_cast<Eigen::Index>(t));
    double step = 0.0;
    if (objective.likelihood_weight != 0.0) {
      const double p = row(target[t]);
      if (!(p > 0.0)) {
        out.finite = false;
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
      step += objective.likelihood_weight * -std::log(p);
    }
    for (const auto& term : objective.penalties) {
      if (!active(term)) continue;
      double sum = 0.0;
      for (TokenId c : term.candidates->sets[t]) {
        double p = row(c);
        if (p > kMaxCandidateProb) {
          p = kMaxCandidateProb;
          ++out.clamps;
        }
        sum += -std::log1p(-p);
      }
      step += term.weight * sum;
    }
    total += step;
  }
  out.value = total / static_cast<double>(target.size());
  return out;
}

Matrix objective_logit_gradient(const DistributionSequence& dists,
                                std::span<const TokenId> target,
                                const Objective& objective,
                                std::size_t* clamps) {
  check_shapes(dists, target, objective);
  Matrix grad = Matrix::Zero(dists.rows(), dists.cols());
  if (target.empty()) return grad;
  const double scale = 1.0 / static_cast<double>(target.size());
  for (std::size_t t = 0; t < target.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const auto p = dists.row(ti);
    auto g = grad.row(ti);
    // -log p_x: dz_k = p_k - [k == x]
    if (objective.likelihood_weight != 0.0) {
      if (!(p(target[t]) > 0.0)) {
        throw NumericError("zero probability on target", t, target[t]);
      }
      g = objective.likelihood_weight * p;
      g(target[t]) -= objective.likelihood_weight;
    }
    // -log(1 - p_c): dz_k = p_c / (1 - p_c) * ([k == c] - p_k)
    for (const auto& term : objective.penalties) {
      if (!active(term)) continue;
      const auto& set = term.candidates->sets[t];
      if (set.empty()) continue;
      double coupling = 0.0;
      for (TokenId c : set) {
        double pc = p(c);
        if (pc > kMaxCandidateProb) {
          pc = kMaxCandidateProb;
          if (clamps) ++*clamps;
        }
        const double ratio = term.weight * pc / (1.0 - pc);
        if (!std::isfinite(ratio)) throw NumericError("non-finite unlikelihood term", t, c);
        g(c) += ratio;
        coupling += ratio;
      }
      g -= coupling * p;
    }
    g *= scale;
  }
  return grad;
}

LossValue likelihood_loss(const DistributionSequence& dists,
                          std::span<const TokenId> target) {
  return evaluate_objective(dists, target, Objective{});
}

LossValue unlikelihood_loss(const DistributionSequence& dists,
                            std::span<const TokenId> target,
                            const CandidateSchedule& candidates, double alpha) {
  Objective obj;
  obj.penalties.push_back({&candidates, alpha});
  return evaluate_objective(dists, target, obj);
}

LossValue block_loss(const DistributionSequence& dists,
                     std::span<const TokenId> seq,
                     const BlocklistAutomaton& automaton, double beta) {
  const CandidateSchedule cands = block_candidates(seq, automaton);
  Objective obj;
  obj.penalties.push_back({&cands, beta});
  return evaluate_objective(dists, seq, obj);
}

}  // namespace ulkit
