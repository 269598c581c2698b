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

#include "ulkit/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "ulkit/parallel.h"

namespace ulkit {
namespace {

std::map<TokenSequence, std::size_t> ngram_counts(std::span<const TokenId> seq,
                                                  std::size_t n) {
  std::map<TokenSequence, std::size_t> counts;
  if (n == 0 || seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[TokenSequence(seq.begin() + static_cast<std::ptrdiff_t>(i),
                           seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::size_t lcs_length(std::span<const TokenId> a, std::span<const TokenId> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore prf(double overlap, double cand_total, double ref_total) {
  RougeScore s;
  if (cand_total <= 0.0 || ref_total <= 0.0) return s;
  s.precision = overlap / cand_total;
  s.recall = overlap / ref_total;
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

TokenSequence without_eos(const TokenSequence& seq) {
  TokenSequence out = seq;
  if (!out.empty() && out.back() == kEosId) out.pop_back();
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

RepCounts rep_counts(std::span<const TokenId> gold,
                     std::span<const TokenId> predictions, std::size_t l) {
  if (gold.size() != predictions.size()) {
    throw std::invalid_argument("rep_counts: gold/prediction length mismatch");
  }
  RepCounts c;
  c.positions = gold.size();
  for (std::size_t t = 0; t < gold.size(); ++t) {
    const std::size_t lo = t > l ? t - l : 0;
    const auto window = gold.subspan(lo, t - lo);
    if (std::find(window.begin(), window.end(), predictions[t]) == window.end()) continue;
    ++c.repeats;
    if (predictions[t] != gold[t]) ++c.wrong_repeats;
  }
  return c;
}

double seq_rep(std::span<const TokenId> seq, std::size_t n) {
  if (n == 0) throw std::invalid_argument("seq_rep: n must be >= 1");
  if (seq.size() < n) return 0.0;
  const std::size_t total = seq.size() - n + 1;
  const std::size_t distinct = ngram_counts(seq, n).size();
  return 1.0 - static_cast<double>(distinct) / static_cast<double>(total);
}

std::size_t uniq_seq(std::span<const TokenSequence> outputs) {
  std::set<TokenId> seen;
  for (const auto& o : outputs) seen.insert(o.begin(), o.end());
  return seen.size();
}

RougeScore rouge(std::span<const TokenId> candidate,
                 std::span<const TokenId> reference, RougeVariant variant) {
  if (reference.empty()) throw std::invalid_argument("rouge: empty reference");
  if (variant == RougeVariant::kRougeL) {
    return prf(static_cast<double>(lcs_length(candidate, reference)),
               static_cast<double>(candidate.size()),
               static_cast<double>(reference.size()));
  }
  const std::size_t n = variant == RougeVariant::kRouge1 ? 1 : 2;
  const auto c = ngram_counts(candidate, n);
  const auto r = ngram_counts(reference, n);
  std::size_t overlap = 0, c_total = 0, r_total = 0;
  for (const auto& [g, k] : c) {
    c_total += k;
    auto it = r.find(g);
    if (it != r.end()) overlap += std::min(k, it->second);
  }
  for (const auto& [g, k] : r) r_total += k;
  return prf(static_cast<double>(overlap), static_cast<double>(c_total),
             static_cast<double>(r_total));
}

std::size_t blocklist_output_count(std::span<const TokenSequence> outputs,
                                   const BlocklistAutomaton& automaton) {
  std::size_t n = 0;
  for (const auto& o : outputs) {
    if (automaton.has_match(o)) ++n;
  }
  return n;
}

LmStats lm_metrics(const ModelParams& params, std::span<const LmExample> data,
                   std::span<const std::size_t> windows, std::size_t jobs) {
  if (data.empty()) throw DataError("lm_metrics: empty evaluation set");
  for (std::size_t l : windows) {
    if (l > params.config().context_len) {
      throw std::invalid_argument("lm_metrics: window exceeds context_len");
    }
  }
  struct Partial {
    double nll = 0.0;
    std::size_t hits = 0;
    std::vector<RepCounts> reps;
    TokenSequence predictions;
  };
  std::vector<Partial> parts(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    const TargetedSequence ts = data[i].teacher_forced();
    const DistributionSequence dists = target_distributions(params, ts);
    Partial& p = parts[i];
    for (std::size_t t = 0; t < ts.target.size(); ++t) {
      const auto row = dists.row(static_cast<Eigen::Index>(t));
      p.nll += -std::log(row(ts.target[t]));
      Eigen::Index best = 0;
      for (Eigen::Index k = 1; k < row.size(); ++k) {
        if (row(k) > row(best)) best = k;
      }
      p.predictions.push_back(static_cast<TokenId>(best));
      if (p.predictions.back() == ts.target[t]) ++p.hits;
    }
    for (std::size_t l : windows) p.reps.push_back(rep_counts(ts.target, p.predictions, l));
  });

  LmStats out;
  double nll = 0.0;
  std::size_t hits = 0;
  std::vector<RepCounts> reps(windows.size());
  std::set<TokenId> uniq;
  for (const auto& p : parts) {
    nll += p.nll;
    hits += p.hits;
    out.tokens += p.predictions.size();
    for (std::size_t w = 0; w < windows.size(); ++w) reps[w] += p.reps[w];
    uniq.insert(p.predictions.begin(), p.predictions.end());
  }
  if (out.tokens == 0) throw DataError("lm_metrics: no target tokens");
  out.mean_nll = nll / static_cast<double>(out.tokens);
  out.ppl = std::exp(out.mean_nll);
  out.acc = static_cast<double>(hits) / static_cast<double>(out.tokens);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    out.rep[windows[w]] = reps[w].rep();
    out.wrep[windows[w]] = reps[w].wrep();
  }
  out.uniq = uniq.size();
  return out;
}

void fill_generation_metrics(MetricsReport& report,
                             std::span<const TokenSequence> outputs,
                             std::span<const TokenSequence> references,
                             std::span<const std::size_t> seq_rep_orders,
                             const BlocklistAutomaton* blocklist) {
  if (outputs.size() != references.size()) {
    throw std::invalid_argument("generation metrics: outputs/references length mismatch");
  }
  report.num_samples = outputs.size();
  report.seq_rep.clear();
  for (std::size_t n : seq_rep_orders) {
    double sum = 0.0;
    for (const auto& o : outputs) sum += seq_rep(o, n);
    report.seq_rep[n] = outputs.empty() ? 0.0 : sum / static_cast<double>(outputs.size());
  }
  report.uniq_seq = uniq_seq(outputs);
  double r1 = 0.0, r2 = 0.0, rl = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    r1 += rouge(outputs[i], references[i], RougeVariant::kRouge1).f1;
    r2 += rouge(outputs[i], references[i], RougeVariant::kRouge2).f1;
    rl += rouge(outputs[i], references[i], RougeVariant::kRougeL).f1;
  }
  const double n = outputs.empty() ? 1.0 : static_cast<double>(outputs.size());
  report.rouge1_f = r1 / n;
  report.rouge2_f = r2 / n;
  report.rougeL_f = rl / n;
  if (blocklist) {
    report.blocklist_output_count = ulkit::blocklist_output_count(outputs, *blocklist);
  } else {
    report.blocklist_output_count.reset();
  }
}

Evaluation evaluate_model(const ModelParams& params,
                          std::span<const LmExample> data,
                          const EvalOptions& options,
                          const BlocklistAutomaton* blocklist) {
  options.decode.validate();
  Evaluation ev;
  const LmStats lm = lm_metrics(params, data, options.rep_windows, options.jobs);
  ev.report.ppl = lm.ppl;
  ev.report.acc = lm.acc;
  ev.report.rep_l = lm.rep;
  ev.report.wrep_l = lm.wrep;
  ev.report.uniq = lm.uniq;

  ev.outputs.resize(data.size());
  std::vector<TokenSequence> refs(data.size());
  const IncrementalModel model(params);
  parallel_for(data.size(), options.jobs, [&](std::size_t i) {
    ev.outputs[i] = decode(model, data[i].prompt, options.decode).tokens;
    refs[i] = without_eos(data[i].target);
  });
  for (auto& r : refs) {
    if (r.empty()) throw DataError("evaluate: empty reference paragraph");
  }
  fill_generation_metrics(ev.report, ev.outputs, refs, options.seq_rep_orders, blocklist);
  return ev;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["ppl"] = ppl;
  j["acc"] = acc;
  for (const auto& [l, v] : rep_l) j["rep-" + std::to_string(l)] = v;
  for (const auto& [l, v] : wrep_l) j["wrep-" + std::to_string(l)] = v;
  for (const auto& [n, v] : seq_rep) j["seq-rep-" + std::to_string(n)] = v;
  j["uniq"] = uniq;
  j["uniq-seq"] = uniq_seq;
  j["rouge1-f"] = rouge1_f;
  j["rouge2-f"] = rouge2_f;
  j["rougeL-f"] = rougeL_f;
  if (blocklist_output_count) {
    j["outputs-with-blocklist-phrases"] = *blocklist_output_count;
  }
  j["samples"] = num_samples;
  return j;
}

std::string format_metrics_table(
    std::span<const std::pair<std::string, MetricsReport>> rows) {
  std::vector<std::string> header = {"Model"};
  std::vector<std::vector<std::string>> cells(rows.size());
  bool any_block = false;
  for (const auto& [name, r] : rows) any_block = any_block || r.blocklist_output_count.has_value();

  if (!rows.empty()) {
    const auto& first = rows.front().second;
    header.push_back("ppl");
    header.push_back("acc");
    for (const auto& [l, v] : first.rep_l) header.push_back("rep-" + std::to_string(l));
    for (const auto& [l, v] : first.wrep_l) header.push_back("wrep-" + std::to_string(l));
    for (const auto& [n, v] : first.seq_rep) header.push_back("seq-rep-" + std::to_string(n));
    for (const char* h : {"uniq", "uniq-seq", "ROUGE1-F", "ROUGE2-F", "ROUGEL-F"}) header.push_back(h);
    if (any_block) header.push_back("# w/ blocklist");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [name, r] = rows[i];
    auto& c = cells[i];
    c.push_back(name);
    c.push_back(fmt("%.3f", r.ppl));
    c.push_back(fmt("%.3f", r.acc));
    for (const auto& [l, v] : r.rep_l) c.push_back(fmt("%.3f", v));
    for (const auto& [l, v] : r.wrep_l) c.push_back(fmt("%.3f", v));
    for (const auto& [n, v] : r.seq_rep) c.push_back(fmt("%.3f", v));
    c.push_back(std::to_string(r.uniq));
    c.push_back(std::to_string(r.uniq_seq));
    c.push_back(fmt("%.3f", r.rouge1_f));
    c.push_back(fmt("%.3f", r.rouge2_f));
    c.push_back(fmt("%.3f", r.rougeL_f));
    if (any_block) {
      c.push_back(r.blocklist_output_count ? std::to_string(*r.blocklist_output_count) : "-");
    }
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t k = 0; k < header.size(); ++k) width[k] = header[k].size();
  for (const auto& c : cells) {
    for (std::size_t k = 0; k < c.size() && k < width.size(); ++k) width[k] = std::max(width[k], c[k].size());
  }
  std::string out;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t k = 0; k < line.size(); ++k) {
      if (k) out += "  ";
      std::string cell = line[k];
      cell.resize(width[k], ' ');
      out += k == 0 ? cell : std::string(width[k] - line[k].size(), ' ') + line[k];
    }
    out += '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  out += std::string(total > 2 ? total - 2 : 0, '-') + '\n';
  for (const auto& c : cells) emit(c);
  return out;
}

}  // namespace ulkit
