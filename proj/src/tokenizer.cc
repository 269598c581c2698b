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

#include "ulkit/tokenizer.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

#include "ulkit/corpus.h"

namespace ulkit {
namespace {

const std::string kSpecialNames[kNumSpecials] = {"<pad>", "<s>", "</s>",
                                                 "<unk>"};

bool is_split_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?';
}

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::vector<std::string> split_tokens(std::string_view text,
                                      const TokenizerOptions& options) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_split_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back(options.casefold
                            ? static_cast<char>(std::tolower(
                                  static_cast<unsigned char>(c)))
                            : c);
    }
  }
  flush();
  return out;
}

Vocab::Vocab(std::vector<std::string> tokens, TokenizerOptions options)
    : token_of_(std::move(tokens)), options_(options) {
  id_of_.reserve(token_of_.size());
  for (std::size_t i = 0; i < token_of_.size(); ++i) {
    const auto& tok = token_of_[i];
    if (tok.empty()) throw DataError("vocab: empty token at id " +
                                     std::to_string(i + kNumSpecials));
    if (!id_of_.emplace(tok, static_cast<TokenId>(i) + kNumSpecials).second) {
      throw DataError("vocab: duplicate token '" + tok + "'");
    }
  }
  if (size() < 5) throw DataError("vocab: needs at least one regular token");
}

TokenId Vocab::id_of(std::string_view token) const {
  auto it = id_of_.find(std::string(token));
  return it == id_of_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return id_of_.count(std::string(token)) != 0;
}

const std::string& Vocab::token_of(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw DataError("token id " + std::to_string(id) +
                    " out of range for vocab of size " +
                    std::to_string(size()));
  }
  if (id < kNumSpecials) return kSpecialNames[id];
  return token_of_[static_cast<std::size_t>(id - kNumSpecials)];
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocab file " + path.string());
  for (const auto& tok : token_of_) out << tok << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Vocab Vocab::load(const std::filesystem::path& path,
                  TokenizerOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read vocab file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens), options);
}

Vocab build_vocab(std::span<const CorpusSample> corpus, std::size_t max_size,
                  const TokenizerOptions& options) {
  if (max_size < 5) throw std::invalid_argument("build_vocab: max_size < 5");
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& sample : corpus) {
    for (auto& t : split_tokens(sample.bullet_points, options)) ++counts[t];
    for (auto& t : split_tokens(sample.paragraph, options)) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  // std::map iteration is already lexicographic, so a stable sort on count
  // alone yields the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kNumSpecials);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocab(std::move(tokens), options);
}

TokenSequence encode(std::string_view text, const Vocab& vocab) {
  TokenSequence ids;
  for (const auto& tok : split_tokens(text, vocab.options())) {
    ids.push_back(vocab.id_of(tok));
  }
  return ids;
}

std::string decode(std::span<const TokenId> ids, const Vocab& vocab) {
  std::string out;
  for (TokenId id : ids) {
    const std::string& tok = vocab.token_of(id);
    const bool attach = tok.size() == 1 && is_split_punct(tok[0]);
    if (!out.empty() && !attach) out.push_back(' ');
    out += tok;
  }
  return out;
}

}  // namespace ulkit
