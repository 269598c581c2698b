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

#ifndef ULKIT_TOKENIZER_H_
#define ULKIT_TOKENIZER_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ulkit/common.h"

namespace ulkit {

struct CorpusSample;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr TokenId kNumSpecials = 4;

struct TokenizerOptions {
  bool casefold = false;
};

// Splits on whitespace and peels `.,!?` off as their own tokens.
std::vector<std::string> split_tokens(std::string_view text,
                                      const TokenizerOptions& options = {});

// Closed vocabulary. Specials occupy ids 0..3; regular tokens follow in
// frequency order. Immutable after construction.
class Vocab {
 public:
  // `tokens` are the non-special entries in id order (id = index + 4).
  explicit Vocab(std::vector<std::string> tokens,
                 TokenizerOptions options = {});

  std::size_t size() const { return token_of_.size() + kNumSpecials; }
  const TokenizerOptions& options() const { return options_; }

  // Returns kUnkId for unknown strings.
  TokenId id_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  // Throws DataError when the id is out of range.
  const std::string& token_of(TokenId id) const;

  // Regular tokens only, in id order.
  const std::vector<std::string>& tokens() const { return token_of_; }

  // One token per line; line k holds id k + 4.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path,
                    TokenizerOptions options = {});

 private:
  std::vector<std::string> token_of_;
  std::unordered_map<std::string, TokenId> id_of_;
  TokenizerOptions options_;
};

// Keeps the `max_size - 4` most frequent tokens of the bullet points and
// paragraphs; ties go to the lexicographically smaller string.
Vocab build_vocab(std::span<const CorpusSample> corpus, std::size_t max_size,
                  const TokenizerOptions& options = {});

TokenSequence encode(std::string_view text, const Vocab& vocab);

// Tokens joined by single spaces, with `.,!?` attached to the preceding
// token. Specials render as <pad>, <s>, </s>, <unk>.
std::string decode(std::span<const TokenId> ids, const Vocab& vocab);

}  // namespace ulkit

#endif  // ULKIT_TOKENIZER_H_
