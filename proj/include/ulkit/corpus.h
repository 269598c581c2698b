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

#ifndef ULKIT_CORPUS_H_
#define ULKIT_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ulkit/common.h"

namespace ulkit {

// One (outline, paragraph) pair. Bullets in the outline are marked with `*`,
// sub-bullets with `**`.
struct CorpusSample {
  std::string bullet_points;
  std::string paragraph;

  friend bool operator==(const CorpusSample&, const CorpusSample&) = default;
};

// Parses one JSON record with string fields `bullet_points` and `paragraph`.
// Fields are trimmed of surrounding whitespace and otherwise kept verbatim.
// Throws DataError on a missing, non-string or empty field, or an outline
// without any `*` marker.
CorpusSample parse_sample(std::string_view record);

// Compact single-line JSON record; inverse of parse_sample.
std::string serialize_sample(const CorpusSample& sample);

struct LoadWarning {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct LoadedCorpus {
  std::vector<CorpusSample> samples;
  std::vector<LoadWarning> warnings;
};

// One record per line, blank lines skipped. In lenient mode malformed lines
// are reported and skipped; with `strict` the first one throws DataError.
LoadedCorpus load_corpus(const std::filesystem::path& path,
                         bool strict = false);

void save_corpus(const std::filesystem::path& path,
                 std::span<const CorpusSample> samples);

// UTF-8, one phrase per line. `#` starts a comment line; blank lines and
// repeated phrases are ignored. Order of first occurrence is kept.
std::vector<std::string> load_blocklist(const std::filesystem::path& path);
void save_blocklist(const std::filesystem::path& path,
                    std::span<const std::string> phrases);

struct SynthConfig {
  std::size_t num_samples = 1000;
  // Number of distinct content words in the closed word list. A fixed set of
  // function words is always added on top.
  std::size_t vocab_size = 200;
  // Approximate paragraph length in tokens; the sentence count is derived
  // from it.
  std::size_t target_len = 40;
  double repeat_rate = 0.0;
  double blocklist_plant_rate = 0.0;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument.
  void validate() const;
};

// Content word `index` of the closed synthetic word list.
std::string synth_word(std::size_t index);
const std::vector<std::string>& synth_function_words();

// `count` random phrases of 2..3 content words, deterministic in `seed`.
std::vector<std::string> default_blocklist(std::uint64_t seed,
                                           std::size_t count,
                                           std::size_t vocab_size);

// Generates outline/paragraph pairs from the closed word list. Each sentence
// paraphrases one bullet: its content words in order, padded with function
// words, 5-12 tokens including the final period (a planted phrase can push a
// sentence past 12). With probability `repeat_rate` one sentence is repeated
// later in the paragraph; with probability `blocklist_plant_rate` one
// blocklist phrase is planted in a bullet and in its sentence. Samples that
// were not selected contain no repeated sentence and no blocklist match.
// Pure function of (config, blocklist).
std::vector<CorpusSample> synth_corpus(const SynthConfig& config,
                                       std::span<const std::string> blocklist);

}  // namespace ulkit

#endif  // ULKIT_CORPUS_H_
