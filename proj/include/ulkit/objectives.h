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

#ifndef ULKIT_OBJECTIVES_H_
#define ULKIT_OBJECTIVES_H_

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ulkit/candidates.h"
#include "ulkit/common.h"

namespace ulkit {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Row t is the model's next-token distribution p(. | x_<t).
using DistributionSequence = Matrix;

// Candidate probabilities are clamped to this before log1p(-p).
inline constexpr double kMaxCandidateProb = 1.0 - 1e-7;

struct ObjectiveConfig {
  double alpha = 1.0;
  double beta = 10.0;
  std::size_t seq_ngram = 4;
  double mix_prob = 0.5;
  std::size_t block_n_min = 2;
  std::size_t block_n_max = 10;

  // Throws std::invalid_argument.
  void validate() const;
};

// Per-token mean loss. `finite` is false when some target had probability 0;
// `value` is then +infinity.
struct LossValue {
  double value = 0.0;
  std::size_t clamps = 0;
  bool finite = true;
};

// Raised by gradient code on a non-finite intermediate.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t timestep, TokenId token)
      : std::runtime_error(what + " at timestep " + std::to_string(timestep) +
                           ", token " + std::to_string(token)),
        timestep_(timestep), token_(token) {}
  std::size_t timestep() const { return timestep_; }
  TokenId token() const { return token_; }

 private:
  std::size_t timestep_;
  TokenId token_;
};

// One unlikelihood term: weight * sum_{c in C^t} -log(1 - p_t(c)).
struct PenaltyTerm {
  const CandidateSchedule* candidates = nullptr;
  double weight = 0.0;
};

// mean_t [ likelihood_weight * -log p_t(x_t) + sum over penalty terms ].
// Every likelihood/unlikelihood variant is an instance of this.
struct Objective {
  double likelihood_weight = 1.0;
  std::vector<PenaltyTerm> penalties;
};

LossValue evaluate_objective(const DistributionSequence& dists,
                             std::span<const TokenId> target,
                             const Objective& objective);

// d(loss)/d(logits) for softmax outputs `dists`, same shape as `dists`.
// Clamped candidates use the clamped probability in the derivative.
// Throws NumericError when a weighted target has probability 0.
Matrix objective_logit_gradient(const DistributionSequence& dists,
                                std::span<const TokenId> target,
                                const Objective& objective,
                                std::size_t* clamps = nullptr);

LossValue likelihood_loss(const DistributionSequence& dists,
                          std::span<const TokenId> target);

LossValue unlikelihood_loss(const DistributionSequence& dists,
                            std::span<const TokenId> target,
                            const CandidateSchedule& candidates, double alpha);

// Unlikelihood loss with block-match candidates. `beta` weights only the
// unlikelihood term.
LossValue block_loss(const DistributionSequence& dists,
                     std::span<const TokenId> seq,
                     const BlocklistAutomaton& automaton, double beta);

}  // namespace ulkit

#endif  // ULKIT_OBJECTIVES_H_
