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

#include "doctest.h"
#include "oracles.h"
#include "ulkit/rng.h"

namespace ulkit {
namespace {

Matrix uniform(std::size_t t, std::size_t v) {
  return Matrix::Constant(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v),
                          1.0 / static_cast<double>(v));
}

Matrix softmax_rows(const Matrix& z) {
  Matrix p = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    p.row(i) = (z.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Matrix random_dists(Rng& rng, std::size_t t, std::size_t v) {
  Matrix z(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(v));
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-2.0, 2.0);
  return softmax_rows(z);
}

// Direct per-timestep sum over the schedule, without the library objective.
double oracle_loss(const Matrix& d, const TokenSequence& x, const CandidateSchedule& cands,
                   double weight) {
  double total = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    total -= std::log(d(ti, x[t]));
    for (TokenId c : cands.sets[t]) total -= weight * std::log(1.0 - d(ti, c));
  }
  return total / static_cast<double>(x.size());
}

TEST_CASE("likelihood loss examples") {
  const TokenSequence x = {0, 3, 1};
  CHECK(likelihood_loss(uniform(3, 4), x).value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(std::abs(likelihood_loss(uniform(3, 4), x).value - 1.386294) < 1e-6);

  Matrix perfect = Matrix::Zero(2, 3);
  perfect(0, 1) = 1.0;
  perfect(1, 2) = 1.0;
  CHECK(likelihood_loss(perfect, TokenSequence{1, 2}).value == 0.0);

  Matrix d(2, 4);
  d << 0.5, 0.2, 0.2, 0.1,
       0.25, 0.25, 0.25, 0.25;
  const double expected = (std::log(2.0) + std::log(4.0)) / 2.0;
  CHECK(std::abs(likelihood_loss(d, TokenSequence{0, 3}).value - expected) < 1e-12);
  CHECK(std::abs(expected - 1.039721) < 1e-6);
}

TEST_CASE("likelihood loss errors") {
  CHECK_THROWS_AS(likelihood_loss(uniform(2, 4), TokenSequence{0}), std::invalid_argument);
  CHECK_THROWS_AS(likelihood_loss(uniform(1, 4), TokenSequence{4}), std::invalid_argument);
  Matrix d = Matrix::Zero(1, 3);
  d(0, 0) = 1.0;
  const auto l = likelihood_loss(d, TokenSequence{1});
  CHECK_FALSE(l.finite);
  CHECK(std::isinf(l.value));
  CHECK_THROWS_AS(objective_logit_gradient(d, TokenSequence{1}, Objective{}), NumericError);
}

TEST_CASE("unlikelihood loss examples") {
  const TokenSequence x = {2};
  CandidateSchedule one;
  one.sets = {{1}};
  const double expected = -std::log(0.75) + std::log(4.0);
  CHECK(std::abs(unlikelihood_loss(uniform(1, 4), x, one, 1.0).value - expected) < 1e-12);
  CHECK(std::abs(expected - 1.673976) < 1e-6);
}

TEST_CASE("unlikelihood reduces to likelihood") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 1 + rng.below(8), v = 3 + rng.below(6);
    const auto d = random_dists(rng, t, v);
    const auto x = oracle::random_seq(rng, t, v);
    const auto cands = token_level_candidates(x);
    const double mle = likelihood_loss(d, x).value;
    CHECK(unlikelihood_loss(d, x, cands, 0.0).value == mle);
    CandidateSchedule empty;
    empty.sets.resize(t);
    CHECK(unlikelihood_loss(d, x, empty, 3.0).value == mle);

    Objective ul;
    ul.penalties.push_back({&empty, 3.0});
    CHECK(objective_logit_gradient(d, x, ul) == objective_logit_gradient(d, x, Objective{}));
    Objective zero_alpha;
    zero_alpha.penalties.push_back({&cands, 0.0});
    CHECK(objective_logit_gradient(d, x, zero_alpha) == objective_logit_gradient(d, x, Objective{}));
  }
}

TEST_CASE("unlikelihood matches the direct sum") {
  Rng rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 1 + rng.below(10), v = 3 + rng.below(5);
    const auto d = random_dists(rng, t, v);
    const auto x = oracle::random_seq(rng, t, v);
    const double alpha = rng.uniform(0.0, 5.0);
    const auto cands = oracle::token_level(x);
    CHECK(std::abs(unlikelihood_loss(d, x, cands, alpha).value - oracle_loss(d, x, cands, alpha)) < 1e-12);
  }
}

TEST_CASE("unlikelihood loss is monotone") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 2 + rng.below(6), v = 4 + rng.below(4);
    const auto d = random_dists(rng, t, v);
    const auto x = oracle::random_seq(rng, t, v);
    CandidateSchedule cands;
    cands.sets.resize(t);
    const auto at = rng.below(t);
    cands.sets[at] = {static_cast<TokenId>((x[at] + 1) % static_cast<TokenId>(v))};
    const double base = unlikelihood_loss(d, x, cands, 1.0).value;
    CHECK(unlikelihood_loss(d, x, cands, 1.5).value > base);

    auto more = cands;
    more.sets[at].push_back(static_cast<TokenId>((x[at] + 2) % static_cast<TokenId>(v)));
    CHECK(unlikelihood_loss(d, x, more, 1.0).value > base);
  }
}

TEST_CASE("block loss worked example agrees with the naive oracle") {
  constexpr TokenId p = 1, q = 2, r = 3;
  const std::vector<TokenSequence> phrases = {{p, q}};
  const auto automaton = compile_blocklist(phrases);
  const TokenSequence seq = {r, p, q};
  const auto d = uniform(3, 4);
  const double oracle = oracle_loss(d, seq, naive_block_scan(seq, phrases), 10.0);
  const double closed = (std::log(4.0) + 2 * (10 * -std::log(0.75) + std::log(4.0))) / 3.0;
  CHECK(std::abs(oracle - closed) < 1e-12);
  CHECK(std::abs(closed - 3.304175) < 1e-6);
  CHECK(std::abs(block_loss(d, seq, automaton, 10.0).value - oracle) < 1e-12);

  CHECK(block_loss(d, seq, automaton, 0.0).value == likelihood_loss(d, seq).value);
  const TokenSequence clean = {q, p, r};
  CHECK(block_loss(d, clean, automaton, 10.0).value == likelihood_loss(d, clean).value);
}

TEST_CASE("block loss via automaton and naive scan is bitwise equal") {
  Rng rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t v = 5;
    std::vector<TokenSequence> phrases;
    for (std::size_t k = 0, n = 1 + rng.below(4); k < n; ++k) {
      phrases.push_back(oracle::random_seq(rng, 2 + rng.below(2), 3));
    }
    const auto automaton = compile_blocklist(phrases);
    const auto seq = oracle::random_seq(rng, 1 + rng.below(15), 3);
    const auto d = random_dists(rng, seq.size(), v);
    const auto naive = naive_block_scan(seq, automaton.phrases());
    CHECK(block_loss(d, seq, automaton, 10.0).value ==
          unlikelihood_loss(d, seq, naive, 10.0).value);
  }
}

TEST_CASE("candidate probabilities near one are clamped and counted") {
  Matrix d = Matrix::Zero(1, 3);
  d(0, 0) = 1e-12;
  d(0, 1) = 1.0 - 1e-12;
  d(0, 2) = 0.0;
  CandidateSchedule cands;
  cands.sets = {{1}};
  const auto l = unlikelihood_loss(d, TokenSequence{0}, cands, 1.0);
  CHECK(l.finite);
  CHECK(std::isfinite(l.value));
  CHECK(l.clamps == 1);
  Objective obj;
  obj.penalties.push_back({&cands, 1.0});
  std::size_t clamps = 0;
  const Matrix g = objective_logit_gradient(d, TokenSequence{0}, obj, &clamps);
  CHECK(clamps == 1);
  CHECK(g.allFinite());
}

TEST_CASE("config validation") {
  ObjectiveConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.mix_prob = 1.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.block_n_min = 4;
  c.block_n_max = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.beta = -0.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

// Two-parameter toy model: logits z = C + theta0 * A + theta1 * B.
struct Toy {
  Matrix a, b, c;
  TokenSequence x;
  Matrix logits(double t0, double t1) const { return c + t0 * a + t1 * b; }
};

double toy_loss(const Toy& toy, const Objective& obj, double t0, double t1) {
  return evaluate_objective(softmax_rows(toy.logits(t0, t1)), toy.x, obj).value;
}

double rel_err(double a, double f) {
  return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-6});
}

TEST_CASE("analytic gradient agrees with central differences on a toy model") {
  Rng rng(47);
  const double eps = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t t = 2 + rng.below(5), v = 4 + rng.below(3);
    Toy toy;
    toy.a = random_dists(rng, t, v) * 3.0;
    toy.b = random_dists(rng, t, v) * 3.0;
    toy.c = random_dists(rng, t, v);
    toy.x = oracle::random_seq(rng, t, v);
    const auto tok = token_level_candidates(toy.x);
    const auto seq = oracle::seq_level(toy.x, 1);
    const std::vector<TokenSequence> phrases = {{toy.x[0], toy.x[1]}};
    const auto blk = naive_block_scan(toy.x, phrases);

    std::vector<Objective> objectives(4);
    objectives[1].penalties.push_back({&tok, 1.0});
    objectives[2].likelihood_weight = 0.0;
    objectives[2].penalties.push_back({&seq, 1.0});
    objectives[3].penalties.push_back({&tok, 1.0});
    objectives[3].penalties.push_back({&blk, 10.0});

    const double t0 = rng.uniform(-1, 1), t1 = rng.uniform(-1, 1);
    for (const auto& obj : objectives) {
      const Matrix g = objective_logit_gradient(softmax_rows(toy.logits(t0, t1)), toy.x, obj);
      const double ga = (g.array() * toy.a.array()).sum();
      const double gb = (g.array() * toy.b.array()).sum();
      const double fa = (toy_loss(toy, obj, t0 + eps, t1) - toy_loss(toy, obj, t0 - eps, t1)) / (2 * eps);
      const double fb = (toy_loss(toy, obj, t0, t1 + eps) - toy_loss(toy, obj, t0, t1 - eps)) / (2 * eps);
      worst = std::max({worst, rel_err(ga, fa), rel_err(gb, fb)});
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("a bystander logit only sees the softmax coupling") {
  // theta moves the logit of token 3, which is never a target or candidate.
  Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = 3, v = 5;
    Toy toy;
    toy.a = Matrix::Zero(t, v);
    toy.a.col(3).setOnes();
    toy.b = Matrix::Zero(t, v);
    toy.c = random_dists(rng, t, v);
    toy.x = {0, 1, 2};
    const std::vector<TokenSequence> phrases = {{1, 2}};
    const auto blk = naive_block_scan(toy.x, phrases);
    Objective obj;
    obj.penalties.push_back({&blk, 10.0});

    const Matrix d = softmax_rows(toy.logits(0.3, 0.0));
    const Matrix g = objective_logit_gradient(d, toy.x, obj);
    // Expected: (1/T) * sum_t p_t(3) * (1 - beta * sum_c p_c / (1 - p_c)).
    double expected = 0.0;
    for (std::size_t k = 0; k < t; ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      double coupling = 0.0;
      for (TokenId c : blk.sets[k]) coupling += 10.0 * d(ki, c) / (1.0 - d(ki, c));
      expected += d(ki, 3) * (1.0 - coupling);
    }
    expected /= static_cast<double>(t);
    const double eps = 1e-5;
    const double fd = (toy_loss(toy, obj, 0.3 + eps, 0) - toy_loss(toy, obj, 0.3 - eps, 0)) / (2 * eps);
    CHECK(rel_err(g.col(3).sum(), fd) < 1e-4);
    CHECK(std::abs(g.col(3).sum() - expected) < 1e-12);
  }
}

}  // namespace
}  // namespace ulkit
