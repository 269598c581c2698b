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

#include "ulkit/dedup.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ulkit {
namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  auto emit = [&](std::size_t end) {
    std::size_t b = begin;
    while (b < end && is_space(text[b])) ++b;
    std::size_t e = end;
    while (e > b && is_space(text[e - 1])) --e;
    if (e > b) out.emplace_back(text.substr(b, e - b));
    begin = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_terminator(text[i])) continue;
    if (i + 1 == text.size() || is_space(text[i + 1])) emit(i + 1);
  }
  emit(text.size());
  return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine: zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

SentenceEmbedding toy_embed(std::string_view sentence, const Vocab& vocab,
                            std::size_t index) {
  SentenceEmbedding e;
  e.index = index;
  e.vector.assign(vocab.size(), 0.0);
  for (const auto& tok : split_tokens(sentence, vocab.options())) {
    if (tok.size() == 1 && (is_terminator(tok[0]) || tok[0] == ',')) continue;
    const TokenId id = vocab.id_of(tok);
    if (id == kUnkId) continue;
    e.vector[static_cast<std::size_t>(id)] += 1.0;
  }
  const double norm = std::sqrt(std::inner_product(e.vector.begin(), e.vector.end(),
                                                   e.vector.begin(), 0.0));
  if (norm == 0.0) {
    throw DataError("toy_embed: sentence has no in-vocabulary token: '" +
                    std::string(sentence) + "'");
  }
  for (double& x : e.vector) x /= norm;
  return e;
}

void DedupConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("dedup: threshold must lie in [0, 1]");
  }
}

DedupResult dedup_paragraph(std::span<const std::vector<double>> embeddings,
                            const DedupConfig& config) {
  config.validate();
  const std::size_t n = embeddings.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.keep == KeepPolicy::kLast) std::reverse(order.begin(), order.end());

  DedupResult r;
  std::vector<bool> keep(n, true);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t i = order[a];
    double best = -2.0;
    std::size_t partner = i;
    for (std::size_t b = 0; b < a; ++b) {
      const std::size_t j = order[b];
      const double s = cosine(embeddings[i], embeddings[j]);
      if (s > best) {
        best = s;
        partner = j;
      }
    }
    if (a > 0 && best > config.threshold) {
      keep[i] = false;
      r.dropped.push_back({i, partner, best});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) r.kept.push_back(i);
  }
  return r;
}

std::vector<std::string> dedup_paragraph(std::span<const std::string> sentences,
                                         std::span<const std::vector<double>> embeddings,
                                         const DedupConfig& config) {
  if (sentences.size() != embeddings.size()) {
    throw std::invalid_argument("dedup: one embedding per sentence required");
  }
  std::vector<std::string> out;
  for (std::size_t i : dedup_paragraph(embeddings, config).kept) out.push_back(sentences[i]);
  return out;
}

std::map<std::size_t, std::vector<double>> load_embeddings(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read embedding file " + path.string());
  std::map<std::size_t, std::vector<double>> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::size_t index = 0, d = 0;
    if (!(ss >> index >> d) || d == 0) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad embedding header");
    }
    if (dim == 0) dim = d;
    if (d != dim) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": inconsistent dimension");
    }
    std::vector<double> v(d);
    for (double& x : v) {
      if (!(ss >> x) || !std::isfinite(x)) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad embedding value");
      }
    }
    std::string extra;
    if (ss >> extra) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": trailing values");
    }
    if (!out.emplace(index, std::move(v)).second) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate index");
    }
  }
  return out;
}

void save_embeddings(const std::filesystem::path& path,
                     std::span<const SentenceEmbedding> embeddings) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embedding file " + path.string());
  out << std::setprecision(17);
  for (const auto& e : embeddings) {
    out << e.index << ' ' << e.vector.size();
    for (double x : e.vector) out << ' ' << x;
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace ulkit
