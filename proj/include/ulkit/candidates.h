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

#ifndef ULKIT_CANDIDATES_H_
#define ULKIT_CANDIDATES_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ulkit/common.h"

namespace ulkit {

enum class CandidateSource { kTokenLevel, kSeqLevel, kBlock };

const char* to_string(CandidateSource source);

// Per-timestep negative candidates. sets[t] is sorted and duplicate free.
struct CandidateSchedule {
  std::vector<std::vector<TokenId>> sets;
  CandidateSource source = CandidateSource::kTokenLevel;

  std::size_t size() const { return sets.size(); }
  // Total number of (timestep, candidate) pairs.
  std::size_t count() const;
  bool all_empty() const { return count() == 0; }

  friend bool operator==(const CandidateSchedule&,
                         const CandidateSchedule&) = default;
};

// sets[t] = {x_0, ..., x_{t-1}} \ {x_t}.
CandidateSchedule token_level_candidates(std::span<const TokenId> target);

// sets[t] = {x_t} when some length-n window covering t also occurs entirely
// before the window's start; otherwise empty. Hash-indexed, O(T * n).
CandidateSchedule seq_level_candidates(std::span<const TokenId> seq,
                                       std::size_t n);
// Quadratic window-by-window scan; the cost model the hashed version avoids.
CandidateSchedule naive_seq_level_scan(std::span<const TokenId> seq,
                                       std::size_t n);

struct PhraseMatch {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t phrase = 0;  // index into BlocklistAutomaton::phrases()

  friend bool operator==(const PhraseMatch&, const PhraseMatch&) = default;
  friend auto operator<=>(const PhraseMatch&, const PhraseMatch&) = default;
};

// Aho-Corasick matcher over token ids. Immutable after compilation.
class BlocklistAutomaton {
 public:
  // Retained phrases, deduplicated, in first-seen order.
  const std::vector<TokenSequence>& phrases() const { return phrases_; }
  // Phrases rejected for falling outside [n_min, n_max].
  const std::vector<TokenSequence>& dropped() const { return dropped_; }
  std::size_t n_min() const { return n_min_; }
  std::size_t n_max() const { return n_max_; }
  std::size_t num_states() const { return nodes_.size(); }

  // All (possibly overlapping) matches, sorted by (start, length, phrase).
  std::vector<PhraseMatch> find_all(std::span<const TokenId> seq) const;
  bool has_match(std::span<const TokenId> seq) const;

 private:
  friend BlocklistAutomaton compile_blocklist(std::span<const TokenSequence>,
                                              std::size_t, std::size_t);
  struct Node {
    std::vector<std::pair<TokenId, int>> next;  // sorted by token
    int fail = 0;
    int dict = -1;  // nearest proper suffix state that ends a phrase
    std::vector<std::size_t> ends;  // phrases ending exactly here
    std::size_t depth = 0;
  };

  int child(int state, TokenId token) const;
  int step(int state, TokenId token) const;

  template <class Fn>
  void scan(std::span<const TokenId> seq, Fn&& on_match) const;

  std::vector<Node> nodes_;
  std::vector<TokenSequence> phrases_;
  std::vector<TokenSequence> dropped_;
  std::size_t n_min_ = 2;
  std::size_t n_max_ = 10;
};

// Builds the matcher from phrases with length in [n_min, n_max]; the rest
// are reported through dropped(). Throws DataError if nothing is retained and
// std::invalid_argument when n_min is 0 or exceeds n_max.
BlocklistAutomaton compile_blocklist(std::span<const TokenSequence> phrases,
                                     std::size_t n_min = 2,
                                     std::size_t n_max = 10);

// sets[t] = {x_t} iff t lies inside at least one phrase match.
CandidateSchedule block_candidates(std::span<const TokenId> seq,
                                   const BlocklistAutomaton& automaton);

// Reference implementation: every window of every phrase length compared
// against every phrase. Same contract as block_candidates.
CandidateSchedule naive_block_scan(std::span<const TokenId> seq,
                                   std::span<const TokenSequence> phrases);
std::vector<PhraseMatch> naive_find_all(std::span<const TokenId> seq,
                                        std::span<const TokenSequence> phrases);

}  // namespace ulkit

#endif  // ULKIT_CANDIDATES_H_
