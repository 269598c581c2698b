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

#ifndef ULKIT_DEDUP_H_
#define ULKIT_DEDUP_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ulkit/tokenizer.h"

namespace ulkit {

// Splits after every run of `.`, `!` or `?` that is followed by whitespace
// or the end of the text. Sentences keep their delimiters and are trimmed, so
// joining them with the original inter-sentence whitespace restores the
// input.
std::vector<std::string> split_sentences(std::string_view paragraph);

// Throws std::invalid_argument on a dimension mismatch or a zero vector.
double cosine(std::span<const double> u, std::span<const double> v);

struct SentenceEmbedding {
  std::size_t index = 0;
  std::vector<double> vector;
};

// L2-normalized bag-of-tokens counts over the vocabulary. Sentence
// punctuation and unknown tokens are ignored; a sentence with no remaining
// token throws DataError.
SentenceEmbedding toy_embed(std::string_view sentence, const Vocab& vocab,
                            std::size_t index = 0);

enum class KeepPolicy { kFirst, kLast };

struct DedupConfig {
  double threshold = 0.91;
  KeepPolicy keep = KeepPolicy::kFirst;

  void validate() const;
};

struct DroppedSentence {
  std::size_t sentence = 0;
  std::size_t partner = 0;  // most similar sentence scanned before it
  double similarity = 0.0;
};

struct DedupResult {
  std::vector<std::size_t> kept;  // ascending
  std::vector<DroppedSentence> dropped;
};

// Scans sentences in keep-policy order (first: front to back, last: back to
// front). A sentence is dropped iff its cosine similarity with some sentence
// scanned before it is strictly greater than the threshold.
DedupResult dedup_paragraph(std::span<const std::vector<double>> embeddings,
                            const DedupConfig& config);

// Convenience form returning the kept sentences in original order.
std::vector<std::string> dedup_paragraph(std::span<const std::string> sentences,
                                         std::span<const std::vector<double>> embeddings,
                                         const DedupConfig& config);

// Text file, one sentence per line: index, dimension, then the values.
std::map<std::size_t, std::vector<double>> load_embeddings(
    const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path,
                     std::span<const SentenceEmbedding> embeddings);

}  // namespace ulkit

#endif  // ULKIT_DEDUP_H_
