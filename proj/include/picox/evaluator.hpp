/* Copyright 2026 The PICOX Authors. All Rights Reserved.

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

#pragma once

// Exact-match span scoring: a prediction counts only when its extent and
// category both equal a gold entity. Per-category, micro (pooled counts) and
// macro (mean of per-category metrics) aggregates, overlap and length
// breakdowns, and a paired t-test over per-document scores.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"
#include "picox/corpus.hpp"
#include "picox/errors.hpp"
#include "picox/spanclass.hpp"

namespace picox {

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct MatchCounts {
  std::array<Counts, kNumCategories> per_category{};

  Counts& operator[](Category c) { return per_category[index_of(c)]; }
  const Counts& operator[](Category c) const { return per_category[index_of(c)]; }

  Counts pooled() const {
    Counts t;
    for (const Counts& c : per_category) t += c;
    return t;
  }
  MatchCounts& operator+=(const MatchCounts& o) {
    for (std::size_t c = 0; c < kNumCategories; ++c) per_category[c] += o.per_category[c];
    return *this;
  }
  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Metrics with empty denominators reported as 0.
inline double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

inline Prf prf(const Counts& c) {
  Prf m;
  m.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = harmonic(m.precision, m.recall);
  return m;
}

struct EvalCore {
  MatchCounts counts;
  std::array<Prf, kNumCategories> per_category{};
  Prf micro;
  Prf macro;
};

enum class Grouping { none, overlap, length };

struct EvalReport {
  EvalCore overall;
  Grouping grouping = Grouping::none;
  std::vector<std::pair<std::string, EvalCore>> groups;  // fixed group order

  const EvalCore* group(std::string_view name) const {
    for (const auto& [n, core] : groups)
      if (n == name) return &core;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Matching

enum class MatchKind { tp, fp, fn };

/// Calls visit(kind, entity) for every deduplicated predicted and gold triple:
/// TP once per matched triple, FP per unmatched prediction, FN per unmatched
/// gold entity.
template <typename Visit>
void match_each(std::span<const Entity> pred, std::span<const Entity> gold, Visit&& visit) {
  const std::set<Entity> p(pred.begin(), pred.end());
  const std::set<Entity> g(gold.begin(), gold.end());
  for (const Entity& e : p) visit(g.contains(e) ? MatchKind::tp : MatchKind::fp, e);
  for (const Entity& e : g)
    if (!p.contains(e)) visit(MatchKind::fn, e);
}

inline std::vector<Entity> as_entities(std::span<const LabeledSpan> spans) {
  std::vector<Entity> out;
  out.reserve(spans.size());
  for (const LabeledSpan& s : spans) out.push_back({s.start, s.end, s.category});
  return out;
}

inline void tally(Counts& c, MatchKind kind) {
  switch (kind) {
    case MatchKind::tp: ++c.tp; break;
    case MatchKind::fp: ++c.fp; break;
    case MatchKind::fn: ++c.fn; break;
  }
}

inline MatchCounts match(std::span<const Entity> pred, std::span<const Entity> gold) {
  MatchCounts mc;
  match_each(pred, gold, [&](MatchKind k, const Entity& e) { tally(mc[e.category], k); });
  return mc;
}

inline MatchCounts match(std::span<const LabeledSpan> pred, std::span<const Entity> gold) {
  const auto p = as_entities(pred);
  return match(p, gold);
}

inline EvalCore metrics(const MatchCounts& counts) {
  EvalCore core;
  core.counts = counts;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    core.per_category[c] = prf(counts.per_category[c]);
    core.macro.precision += core.per_category[c].precision / kNumCategories;
    core.macro.recall += core.per_category[c].recall / kNumCategories;
    core.macro.f1 += core.per_category[c].f1 / kNumCategories;
  }
  core.micro = prf(counts.pooled());
  return core;
}

// ---------------------------------------------------------------------------
// Corpus-level evaluation

struct SentencePrediction {
  std::string uid;
  std::vector<LabeledSpan> spans;
};

using Predictions = std::vector<SentencePrediction>;

inline constexpr std::array<std::string_view, 3> kLengthBuckets = {"1", "2-5", ">5"};

inline std::size_t length_bucket(std::size_t tokens) { return tokens <= 1 ? 0 : tokens <= 5 ? 1 : 2; }

namespace detail {

inline std::unordered_map<std::string, const SentencePrediction*> index_predictions(const Predictions& preds,
                                                                                   const Corpus& gold) {
  std::unordered_map<std::string, const SentencePrediction*> idx;
  for (const SentencePrediction& p : preds) {
    if (!gold.find(p.uid)) throw ValidationError("uid mismatch: prediction for unknown sentence " + p.uid);
    if (!idx.emplace(p.uid, &p).second) throw ValidationError("duplicate prediction record for " + p.uid);
  }
  return idx;
}

}  // namespace detail

/// Sentences of `gold` without a prediction record count as predicting
/// nothing. Predictions for uids absent from `gold` are an error. Length
/// buckets place TP and FN by gold length and FP by predicted length; under
/// exact matching a TP has the same length on both sides.
inline EvalReport evaluate(const Predictions& preds, const Corpus& gold, Grouping grouping = Grouping::none) {
  const auto idx = detail::index_predictions(preds, gold);
  MatchCounts overall;
  std::array<MatchCounts, 2> overlap_groups{};
  std::array<MatchCounts, 3> length_groups{};

  gold.for_each_sentence([&](const Sentence& s) {
    std::vector<Entity> pred;
    if (auto it = idx.find(s.uid); it != idx.end()) pred = as_entities(it->second->spans);
    MatchCounts& og = overlap_groups[has_overlap(s) ? 0 : 1];
    match_each(pred, s.entities, [&](MatchKind k, const Entity& e) {
      tally(overall[e.category], k);
      tally(og[e.category], k);
      tally(length_groups[length_bucket(e.length())][e.category], k);
    });
  });

  EvalReport report;
  report.overall = metrics(overall);
  report.grouping = grouping;
  if (grouping == Grouping::overlap) {
    report.groups.emplace_back("overlapped", metrics(overlap_groups[0]));
    report.groups.emplace_back("non_overlapped", metrics(overlap_groups[1]));
  } else if (grouping == Grouping::length) {
    for (std::size_t b = 0; b < kLengthBuckets.size(); ++b)
      report.groups.emplace_back(std::string(kLengthBuckets[b]), metrics(length_groups[b]));
  }
  return report;
}

/// Micro F1 of each document of `gold`, in corpus order.
inline std::vector<double> per_document_f1(const Predictions& preds, const Corpus& gold) {
  const auto idx = detail::index_predictions(preds, gold);
  std::vector<double> out;
  for (const Document& d : gold.documents) {
    MatchCounts mc;
    for (const Sentence& s : d.sentences) {
      std::vector<Entity> pred;
      if (auto it = idx.find(s.uid); it != idx.end()) pred = as_entities(it->second->spans);
      mc += match(pred, s.entities);
    }
    out.push_back(prf(mc.pooled()).f1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Significance

struct PairedTestResult {
  double t_statistic = 0.0;
  double p_value = 1.0;
  bool zero_variance = false;
  std::size_t n = 0;
};

/// Two-sided paired t-test on a[i] - b[i]. With zero variance the statistic
/// is undefined: t = 0, p = 1 when every difference is 0, otherwise t = +-inf
/// and p = 0; both cases set `zero_variance`.
inline PairedTestResult paired_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("paired test needs equal-length score lists");
  if (a.size() < 2) throw ValidationError("paired test needs at least 2 units");
  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += (a[i] - b[i]) / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  PairedTestResult r;
  r.n = n;
  if (sd == 0.0) {
    r.zero_variance = true;
    if (mean == 0.0) return r;
    r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p_value = 0.0;
    return r;
  }
  r.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  boost::math::students_t dist(static_cast<double>(n - 1));
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t_statistic))));
  return r;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json prf_json(const Prf& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

inline nlohmann::json to_json(const EvalCore& core) {
  nlohmann::json per = nlohmann::json::object();
  for (Category c : kCategories) {
    auto j = prf_json(core.per_category[index_of(c)]);
    const Counts& n = core.counts[c];
    j["tp"] = n.tp;
    j["fp"] = n.fp;
    j["fn"] = n.fn;
    per[std::string(category_code(c))] = std::move(j);
  }
  auto micro = prf_json(core.micro);
  const Counts t = core.counts.pooled();
  micro["tp"] = t.tp;
  micro["fp"] = t.fp;
  micro["fn"] = t.fn;
  return {{"per_category", std::move(per)}, {"micro", std::move(micro)}, {"macro", prf_json(core.macro)}};
}

inline std::string_view grouping_name(Grouping g) {
  switch (g) {
    case Grouping::none: return "none";
    case Grouping::overlap: return "overlap";
    case Grouping::length: return "length";
  }
  return "none";
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"overall", to_json(r.overall)}, {"grouping", grouping_name(r.grouping)}};
  if (!r.groups.empty()) {
    nlohmann::json g = nlohmann::json::object();
    for (const auto& [name, core] : r.groups) g[name] = to_json(core);
    j["groups"] = std::move(g);
  }
  return j;
}

/// One row per (group, category) plus micro and macro rows.
inline void write_csv(std::ostream& out, const EvalReport& r) {
  out << "group,category,precision,recall,f1,tp,fp,fn\n";
  auto rows = [&](std::string_view group, const EvalCore& core) {
    for (Category c : kCategories) {
      const Prf& m = core.per_category[index_of(c)];
      const Counts& n = core.counts[c];
      out << group << ',' << category_code(c) << ',' << m.precision << ',' << m.recall << ',' << m.f1 << ','
          << n.tp << ',' << n.fp << ',' << n.fn << '\n';
    }
    const Counts t = core.counts.pooled();
    out << group << ",micro," << core.micro.precision << ',' << core.micro.recall << ',' << core.micro.f1 << ','
        << t.tp << ',' << t.fp << ',' << t.fn << '\n';
    out << group << ",macro," << core.macro.precision << ',' << core.macro.recall << ',' << core.macro.f1 << ",,,\n";
  };
  rows("all", r.overall);
  for (const auto& [name, core] : r.groups) rows(name, core);
}

/// Prediction dump: one {"uid", "spans": [{"start", "end", "category",
/// "score"}]} object per line.
inline void write_predictions(std::ostream& out, const Predictions& preds) {
  for (const SentencePrediction& p : preds) {
    nlohmann::json spans = nlohmann::json::array();
    for (const LabeledSpan& s : p.spans)
      spans.push_back(
          {{"start", s.start}, {"end", s.end}, {"category", category_code(s.category)}, {"score", s.score}});
    out << nlohmann::json{{"uid", p.uid}, {"spans", std::move(spans)}}.dump() << '\n';
  }
}

inline Predictions read_predictions(std::istream& in) {
  Predictions preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      SentencePrediction p;
      p.uid = j.at("uid").get<std::string>();
      for (const auto& js : j.at("spans")) {
        const auto code = js.at("category").get<std::string>();
        auto cat = parse_category(code);
        if (!cat) throw ValidationError("unknown category \"" + code + "\"");
        LabeledSpan s;
        s.start = js.at("start").get<std::size_t>();
        s.end = js.at("end").get<std::size_t>();
        if (s.start > s.end) throw ValidationError("span start after end");
        s.category = *cat;
        s.score = js.value("score", 1.0);
        s.scores[index_of(*cat)] = s.score;
        p.spans.push_back(s);
      }
      preds.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": malformed prediction: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return preds;
}

}  // namespace picox
