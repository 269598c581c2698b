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

#include "ulkit/candidates.h"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace ulkit {
namespace {

struct NgramRef {
  const TokenId* data;
  std::size_t n;
};

struct NgramHash {
  std::size_t operator()(const NgramRef& r) const {
    std::size_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < r.n; ++i) {
      h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(r.data[i]));
      h *= 1099511628211ULL;
    }
    return h;
  }
};

struct NgramEq {
  bool operator()(const NgramRef& a, const NgramRef& b) const {
    return a.n == b.n && std::equal(a.data, a.data + a.n, b.data);
  }
};

CandidateSchedule schedule_from_cover(std::span<const TokenId> seq,
                                      std::span<const int> cover,
                                      CandidateSource source) {
  CandidateSchedule out;
  out.source = source;
  out.sets.resize(seq.size());
  int running = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    running += cover[t];
    if (running > 0) out.sets[t] = {seq[t]};
  }
  return out;
}

}  // namespace

const char* to_string(CandidateSource source) {
  switch (source) {
    case CandidateSource::kTokenLevel: return "token_level";
    case CandidateSource::kSeqLevel: return "seq_level";
    case CandidateSource::kBlock: return "block";
  }
  return "?";
}

std::size_t CandidateSchedule::count() const {
  std::size_t n = 0;
  for (const auto& s : sets) n += s.size();
  return n;
}

CandidateSchedule token_level_candidates(std::span<const TokenId> target) {
  CandidateSchedule out;
  out.source = CandidateSource::kTokenLevel;
  out.sets.resize(target.size());
  std::set<TokenId> prefix;
  for (std::size_t t = 0; t < target.size(); ++t) {
    auto& s = out.sets[t];
    s.reserve(prefix.size());
    for (TokenId id : prefix) {
      if (id != target[t]) s.push_back(id);
    }
    prefix.insert(target[t]);
  }
  return out;
}

CandidateSchedule seq_level_candidates(std::span<const TokenId> seq,
                                       std::size_t n) {
  if (n == 0) throw std::invalid_argument("seq_level_candidates: n must be >= 1");
  const std::size_t len = seq.size();
  // cover[s] += 1 / cover[s + n] -= 1 for every duplicated window start s.
  std::vector<int> cover(len + 1, 0);
  if (len >= n) {
    std::unordered_map<NgramRef, std::size_t, NgramHash, NgramEq> first_start;
    first_start.reserve(len);
    for (std::size_t s = 0; s + n <= len; ++s) {
      auto [it, inserted] = first_start.emplace(NgramRef{seq.data() + s, n}, s);
      // The earlier occurrence has to end before this window starts.
      if (!inserted && it->second + n <= s) {
        ++cover[s];
        --cover[s + n];
      }
    }
  }
  return schedule_from_cover(seq, cover, CandidateSource::kSeqLevel);
}

CandidateSchedule naive_seq_level_scan(std::span<const TokenId> seq,
                                       std::size_t n) {
  if (n == 0) throw std::invalid_argument("naive_seq_level_scan: n must be >= 1");
  CandidateSchedule out;
  out.source = CandidateSource::kSeqLevel;
  out.sets.resize(seq.size());
  for (std::size_t s = 0; s + n <= seq.size(); ++s) {
    bool dup = false;
    for (std::size_t e = 0; e + n <= s && !dup; ++e) {
      dup = std::equal(seq.begin() + static_cast<std::ptrdiff_t>(s),
                       seq.begin() + static_cast<std::ptrdiff_t>(s + n),
                       seq.begin() + static_cast<std::ptrdiff_t>(e));
    }
    if (!dup) continue;
    for (std::size_t t = s; t < s + n; ++t) out.sets[t] = {seq[t]};
  }
  return out;
}

BlocklistAutomaton compile_blocklist(std::span<const TokenSequence> phrases,
                                     std::size_t n_min, std::size_t n_max) {
  if (n_min == 0 || n_min > n_max) {
    throw std::invalid_argument("compile_blocklist: need 1 <= n_min <= n_max");
  }
  BlocklistAutomaton a;
  a.n_min_ = n_min;
  a.n_max_ = n_max;
  std::set<TokenSequence> seen;
  for (const auto& p : phrases) {
    if (p.size() < n_min || p.size() > n_max) {
      a.dropped_.push_back(p);
      continue;
    }
    if (seen.insert(p).second) a.phrases_.push_back(p);
  }
  if (a.phrases_.empty()) {
    throw DataError("compile_blocklist: no phrase with length in [" +
                    std::to_string(n_min) + ", " + std::to_string(n_max) +
                    "]");
  }

  a.nodes_.emplace_back();
  for (std::size_t pi = 0; pi < a.phrases_.size(); ++pi) {
    int state = 0;
    for (TokenId tok : a.phrases_[pi]) {
      int next = a.child(state, tok);
      if (next < 0) {
        next = static_cast<int>(a.nodes_.size());
        BlocklistAutomaton::Node node;
        node.depth = a.nodes_[static_cast<std::size_t>(state)].depth + 1;
        a.nodes_.push_back(std::move(node));
        auto& edges = a.nodes_[static_cast<std::size_t>(state)].next;
        edges.insert(std::lower_bound(edges.begin(), edges.end(),
                                      std::pair<TokenId, int>{tok, -1}),
                     {tok, next});
      }
      state = next;
    }
    a.nodes_[static_cast<std::size_t>(state)].ends.push_back(pi);
  }

  // Breadth-first failure links.
  std::deque<int> queue;
  for (auto [tok, c] : a.nodes_[0].next) {
    a.nodes_[static_cast<std::size_t>(c)].fail = 0;
    queue.push_back(c);
  }
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    const auto edges = a.nodes_[static_cast<std::size_t>(u)].next;
    for (auto [tok, v] : edges) {
      int f = a.nodes_[static_cast<std::size_t>(u)].fail;
      while (f != 0 && a.child(f, tok) < 0) {
        f = a.nodes_[static_cast<std::size_t>(f)].fail;
      }
      const int fc = a.child(f, tok);
      auto& node = a.nodes_[static_cast<std::size_t>(v)];
      node.fail = (fc >= 0 && fc != v) ? fc : 0;
      const auto& fail_node = a.nodes_[static_cast<std::size_t>(node.fail)];
      node.dict = !fail_node.ends.empty() ? node.fail : fail_node.dict;
      queue.push_back(v);
    }
  }
  return a;
}

int BlocklistAutomaton::child(int state, TokenId token) const {
  const auto& edges = nodes_[static_cast<std::size_t>(state)].next;
  auto it = std::lower_bound(
      edges.begin(), edges.end(), token,
      [](const std::pair<TokenId, int>& e, TokenId t) { return e.first < t; });
  return (it != edges.end() && it->first == token) ? it->second : -1;
}

int BlocklistAutomaton::step(int state, TokenId token) const {
  while (true) {
    const int c = child(state, token);
    if (c >= 0) return c;
    if (state == 0) return 0;
    state = nodes_[static_cast<std::size_t>(state)].fail;
  }
}

template <class Fn>
void BlocklistAutomaton::scan(std::span<const TokenId> seq,
                              Fn&& on_match) const {
  int state = 0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    state = step(state, seq[i]);
    for (int s = state; s > 0; s = nodes_[static_cast<std::size_t>(s)].dict) {
      const auto& node = nodes_[static_cast<std::size_t>(s)];
      for (std::size_t pi : node.ends) {
        on_match(i + 1 - node.depth, node.depth, pi);
      }
      if (node.dict < 0) break;
    }
  }
}

std::vector<PhraseMatch> BlocklistAutomaton::find_all(
    std::span<const TokenId> seq) const {
  std::vector<PhraseMatch> out;
  scan(seq, [&](std::size_t start, std::size_t len, std::size_t pi) {
    out.push_back({start, len, pi});
  });
  std::sort(out.begin(), out.end());
  return out;
}

bool BlocklistAutomaton::has_match(std::span<const TokenId> seq) const {
  bool found = false;
  scan(seq, [&](std::size_t, std::size_t, std::size_t) { found = true; });
  return found;
}

CandidateSchedule block_candidates(std::span<const TokenId> seq,
                                   const BlocklistAutomaton& automaton) {
  std::vector<int> cover(seq.size() + 1, 0);
  for (const auto& m : automaton.find_all(seq)) {
    ++cover[m.start];
    --cover[m.start + m.length];
  }
  return schedule_from_cover(seq, cover, CandidateSource::kBlock);
}

std::vector<PhraseMatch> naive_find_all(std::span<const TokenId> seq,
                                        std::span<const TokenSequence> phrases) {
  std::vector<PhraseMatch> out;
  for (std::size_t start = 0; start < seq.size(); ++start) {
    for (std::size_t pi = 0; pi < phrases.size(); ++pi) {
      const auto& p = phrases[pi];
      if (p.empty() || start + p.size() > seq.size()) continue;
      if (std::equal(p.begin(), p.end(), seq.begin() + static_cast<std::ptrdiff_t>(start))) {
        out.push_back({start, p.size(), pi});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

CandidateSchedule naive_block_scan(std::span<const TokenId> seq,
                                   std::span<const TokenSequence> phrases) {
  CandidateSchedule out;
  out.source = CandidateSource::kBlock;
  out.sets.resize(seq.size());
  for (const auto& m : naive_find_all(seq, phrases)) {
    for (std::size_t t = m.start; t < m.start + m.length; ++t) {
      out.sets[t] = {seq[t]};
    }
  }
  return out;
}

}  // namespace ulkit
