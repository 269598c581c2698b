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

#include "ulkit/corpus.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "ulkit/candidates.h"
#include "ulkit/rng.h"
#include "ulkit/tokenizer.h"

namespace ulkit {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string required_field(const json& rec, const char* name) {
  auto it = rec.find(name);
  if (it == rec.end()) throw DataError(std::string("missing field '") + name + "'");
  if (!it->is_string()) throw DataError(std::string("field '") + name + "' is not a string");
  std::string value = trim(it->get_ref<const std::string&>());
  if (value.empty()) throw DataError(std::string("empty field '") + name + "'");
  return value;
}

const std::vector<std::string> kFunctionWords = {
    "the", "a", "of", "and", "with", "to", "in", "for", "is", "was", "on", "by"};

const char kConsonants[] = "bdfgklmnprstvz";
const char kVowels[] = "aeiou";
constexpr std::size_t kNumSyllables = 14 * 5;

std::string syllable(std::size_t k) {
  return {kConsonants[k / 5], kVowels[k % 5]};
}

// Tokens of one generated sentence, period excluded.
using Words = std::vector<std::string>;

struct Bullet {
  Words content;
  bool sub = false;
};

class SampleBuilder {
 public:
  SampleBuilder(const SynthConfig& config,
                const std::vector<Words>& phrases)
      : config_(config), phrases_(phrases) {}

  // Words of a sentence paraphrasing `content`; `fixed_block` (a planted
  // phrase) is inserted as one contiguous unit after the first content word.
  Words sentence(Rng& rng, const Words& content, const Words& fixed_block) {
    std::vector<Words> units;
    for (const auto& w : content) units.push_back({w});
    if (!fixed_block.empty()) {
      units.insert(units.begin() + std::min<std::ptrdiff_t>(1, static_cast<std::ptrdiff_t>(units.size())),
                   fixed_block);
    }
    std::size_t unit_tokens = 0;
    for (const auto& u : units) unit_tokens += u.size();
    // Total length including the period lies in [5, 12] unless the units
    // alone need more room.
    const std::size_t min_len = std::max<std::size_t>(5, unit_tokens + units.size() + 1);
    const std::size_t len = std::max<std::size_t>(min_len, static_cast<std::size_t>(rng.range(5, 12)));
    const std::size_t fillers = len - 1 - unit_tokens;
    // Each unit is preceded by at least one function word; the remaining
    // fillers are scattered among the gaps, including the tail.
    std::vector<std::size_t> gap(units.size() + 1, 0);
    for (std::size_t i = 0; i < units.size(); ++i) gap[i] = 1;
    for (std::size_t k = units.size(); k < fillers; ++k) {
      ++gap[static_cast<std::size_t>(rng.below(gap.size()))];
    }
    Words out;
    for (std::size_t i = 0; i <= units.size(); ++i) {
      for (std::size_t k = 0; k < gap[i]; ++k) {
        out.push_back(kFunctionWords[rng.below(kFunctionWords.size())]);
      }
      if (i < units.size()) out.insert(out.end(), units[i].begin(), units[i].end());
    }
    return out;
  }

  std::size_t num_bullets(Rng& rng) const {
    // About 8 tokens per sentence on average.
    const std::size_t base = std::max<std::size_t>(1, (config_.target_len + 4) / 8);
    const std::size_t lo = base > 1 ? base - 1 : 1;
    return static_cast<std::size_t>(rng.range(static_cast<std::int64_t>(lo),
                                               static_cast<std::int64_t>(base + 1)));
  }

  std::string content_word(Rng& rng) const {
    return synth_word(rng.below(config_.vocab_size));
  }

  const SynthConfig& config_;
  const std::vector<Words>& phrases_;
};

std::string join_sentence(const Words& w) {
  std::string s;
  for (const auto& t : w) {
    if (!s.empty()) s.push_back(' ');
    s += t;
  }
  s.push_back('.');
  return s;
}

std::string join_bullets(const std::vector<Bullet>& bullets) {
  std::string s;
  for (const auto& b : bullets) {
    if (!s.empty()) s.push_back(' ');
    s += b.sub ? "**" : "*";
    for (const auto& w : b.content) {
      s.push_back(' ');
      s += w;
    }
  }
  return s;
}

// Maps words to ids so planted phrases can be checked with the token-level
// scanner.
class LocalIds {
 public:
  TokenSequence ids(const std::vector<std::string>& words) {
    TokenSequence out;
    out.reserve(words.size());
    for (const auto& w : words) {
      auto [it, inserted] = map_.emplace(w, static_cast<TokenId>(map_.size()));
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::unordered_map<std::string, TokenId> map_;
};

}  // namespace

CorpusSample parse_sample(std::string_view record) {
  json rec;
  try {
    rec = json::parse(record);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed record: ") + e.what());
  }
  if (!rec.is_object()) throw DataError("record is not an object");
  CorpusSample s;
  s.bullet_points = required_field(rec, "bullet_points");
  s.paragraph = required_field(rec, "paragraph");
  if (s.bullet_points.find('*') == std::string::npos) {
    throw DataError("bullet_points has no '*' marker");
  }
  return s;
}

std::string serialize_sample(const CorpusSample& sample) {
  json rec = json::object();
  rec["bullet_points"] = sample.bullet_points;
  rec["paragraph"] = sample.paragraph;
  return rec.dump();
}

LoadedCorpus load_corpus(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus file " + path.string());
  LoadedCorpus out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.samples.push_back(parse_sample(line));
    } catch (const DataError& e) {
      if (strict) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      out.warnings.push_back({lineno, e.what()});
    }
  }
  if (in.bad()) throw IoError("read failed for " + path.string());
  return out;
}

void save_corpus(const std::filesystem::path& path,
                 std::span<const CorpusSample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file " + path.string());
  for (const auto& s : samples) out << serialize_sample(s) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> load_blocklist(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read blocklist file " + path.string());
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    std::string phrase = trim(line);
    if (phrase.empty() || phrase[0] == '#') continue;
    if (seen.insert(phrase).second) out.push_back(std::move(phrase));
  }
  return out;
}

void save_blocklist(const std::filesystem::path& path,
                    std::span<const std::string> phrases) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write blocklist file " + path.string());
  for (const auto& p : phrases) out << p << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

void SynthConfig::validate() const {
  if (num_samples == 0) throw std::invalid_argument("synth: num_samples must be positive");
  if (vocab_size < 4) throw std::invalid_argument("synth: vocab_size must be at least 4");
  if (target_len == 0) throw std::invalid_argument("synth: target_len must be positive");
  if (!(repeat_rate >= 0.0 && repeat_rate <= 1.0)) {
    throw std::invalid_argument("synth: repeat_rate must lie in [0, 1]");
  }
  if (!(blocklist_plant_rate >= 0.0 && blocklist_plant_rate <= 1.0)) {
    throw std::invalid_argument("synth: blocklist_plant_rate must lie in [0, 1]");
  }
}

std::string synth_word(std::size_t index) {
  // Two syllables for the first 4900 words, three after that.
  std::string w = syllable(index % kNumSyllables) +
                  syllable((index / kNumSyllables) % kNumSyllables);
  if (index >= kNumSyllables * kNumSyllables) {
    w += syllable((index / (kNumSyllables * kNumSyllables)) % kNumSyllables);
  }
  return w;
}

const std::vector<std::string>& synth_function_words() { return kFunctionWords; }

std::vector<std::string> default_blocklist(std::uint64_t seed,
                                           std::size_t count,
                                           std::size_t vocab_size) {
  Rng rng = Rng::substream(seed, "synth.blocklist");
  std::vector<std::string> out;
  std::set<std::string> seen;
  while (out.size() < count) {
    const auto len = rng.range(2, 3);
    std::string phrase;
    for (std::int64_t i = 0; i < len; ++i) {
      if (i) phrase.push_back(' ');
      phrase += synth_word(rng.below(vocab_size));
    }
    if (seen.insert(phrase).second) out.push_back(phrase);
  }
  return out;
}

std::vector<CorpusSample> synth_corpus(const SynthConfig& config,
                                       std::span<const std::string> blocklist) {
  config.validate();
  std::vector<Words> phrases;
  for (const auto& p : blocklist) {
    auto toks = split_tokens(p);
    if (!toks.empty()) phrases.push_back(std::move(toks));
  }
  if (config.blocklist_plant_rate > 0.0 && phrases.empty()) {
    throw std::invalid_argument("synth: blocklist_plant_rate > 0 needs a non-empty blocklist");
  }

  LocalIds local;
  std::vector<TokenSequence> phrase_ids;
  for (const auto& p : phrases) phrase_ids.push_back(local.ids(p));

  Rng rng = Rng::substream(config.seed, "synth.corpus");
  SampleBuilder builder(config, phrases);
  std::vector<CorpusSample> out;
  out.reserve(config.num_samples);

  for (std::size_t n = 0; n < config.num_samples; ++n) {
    // Decide the sample's treatment before any content draw.
    const bool repeat = rng.bernoulli(config.repeat_rate);
    const bool plant = rng.bernoulli(config.blocklist_plant_rate);
    const std::size_t plant_phrase = plant ? rng.below(phrases.size()) : 0;

    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) {
        throw std::invalid_argument(
            "synth: cannot avoid incidental blocklist matches; vocabulary too small");
      }
      const std::size_t nb = builder.num_bullets(rng);
      std::vector<Bullet> bullets(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        const auto k = rng.range(2, 3);
        for (std::int64_t i = 0; i < k; ++i) bullets[b].content.push_back(builder.content_word(rng));
        bullets[b].sub = b > 0 && rng.bernoulli(0.25);
      }
      const std::size_t plant_bullet = plant ? rng.below(nb) : nb;

      std::vector<Words> sentences;
      for (std::size_t b = 0; b < nb; ++b) {
        const Words block = b == plant_bullet ? phrases[plant_phrase] : Words{};
        sentences.push_back(builder.sentence(rng, bullets[b].content, block));
      }
      if (plant) {
        auto& c = bullets[plant_bullet].content;
        c.insert(c.begin() + std::min<std::ptrdiff_t>(1, static_cast<std::ptrdiff_t>(c.size())),
                 phrases[plant_phrase].begin(), phrases[plant_phrase].end());
      }

      // Sentences must be pairwise distinct before the optional repeat.
      std::set<Words> distinct(sentences.begin(), sentences.end());
      if (distinct.size() != sentences.size()) continue;

      if (repeat) {
        const std::size_t src = rng.below(sentences.size());
        const std::size_t dst = src + 1 + rng.below(sentences.size() - src);
        sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(dst), sentences[src]);
      }

      CorpusSample sample;
      sample.bullet_points = join_bullets(bullets);
      for (const auto& s : sentences) {
        if (!sample.paragraph.empty()) sample.paragraph.push_back(' ');
        sample.paragraph += join_sentence(s);
      }

      if (!phrases.empty()) {
        // Unplanted samples may not contain a phrase by accident; planted
        // ones only the planted phrase.
        bool ok = true;
        for (const auto* text : {&sample.bullet_points, &sample.paragraph}) {
          const auto ids = local.ids(split_tokens(*text));
          for (const auto& m : naive_find_all(ids, phrase_ids)) {
            if (!plant || m.phrase != plant_phrase) ok = false;
          }
        }
        if (!ok) continue;
      }
      out.push_back(std::move(sample));
      break;
    }
  }
  return out;
}

}  // namespace ulkit
