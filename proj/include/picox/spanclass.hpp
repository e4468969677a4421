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

// Multi-label span typing: independent sigmoid per category over a pooled
// span vector, binary cross-entropy training, and thresholded decisions that
// drop spans scoring below tau in every category.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "picox/corpus.hpp"
#include "picox/embedder.hpp"
#include "picox/errors.hpp"
#include "picox/linear.hpp"

namespace picox {

using ClassifierModel = LinearHead<kNumCategories>;
using CategoryScores = std::array<double, kNumCategories>;

struct SpanCandidate {
  std::string uid;
  std::size_t start = 0;
  std::size_t end = 0;

  friend auto operator<=>(const SpanCandidate&, const SpanCandidate&) = default;
};

/// One (span, category) decision. A span accepted for several categories is
/// emitted once per category; `scores` carries all three probabilities.
struct LabeledSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  Category category = Category::population;
  double score = 0.0;
  CategoryScores scores{};
};

namespace spanclass {

inline constexpr double kLogFloor = 1e-12;
inline constexpr double kDefaultTau = 0.5;

inline std::vector<std::string> category_names() {
  std::vector<std::string> names;
  for (Category c : kCategories) names.emplace_back(category_code(c));
  return names;
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline CategoryScores forward(const ClassifierModel& model, const SpanVector& v) {
  CategoryScores z = model.logits(v.values);
  for (double& s : z) s = sigmoid(s);
  return z;
}

/// Full binary cross-entropy summed over categories.
inline double loss(const CategoryScores& scores, const CategoryScores& gold) {
  double total = 0.0;
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const double p = scores[c];
    total -= gold[c] * std::log(std::max(p, kLogFloor)) + (1.0 - gold[c]) * std::log(std::max(1.0 - p, kLogFloor));
  }
  return total;
}

inline ClassifierModel gradient(const ClassifierModel& model, const SpanVector& v, const CategoryScores& gold) {
  CategoryScores delta = forward(model, v);
  for (std::size_t c = 0; c < kNumCategories; ++c) delta[c] -= gold[c];
  ClassifierModel grad = ClassifierModel::zeros(model.dim);
  grad.accumulate(delta, v.values);
  return grad;
}

struct Example {
  SpanVector span;
  CategoryScores gold{};  // multi-hot; all zero for a non-entity span
};

struct FitResult {
  ClassifierModel model;
  TrainLog log;
};

/// Reported epoch loss is per span.
inline FitResult fit(std::span<const Example> data, const TrainConfig& cfg,
                     std::optional<ClassifierModel> init = std::nullopt) {
  if (data.empty()) throw ValidationError("empty training set");
  const std::size_t dim = data.front().span.size();
  for (const Example& ex : data)
    if (ex.span.size() != dim) throw ValidationError("inconsistent span dimensions in training set");
  ClassifierModel model = init ? *init : ClassifierModel::zeros(dim);
  if (model.dim != dim) throw ValidationError("initial classifier dimension does not match span vectors");

  TrainLog log = train_head(
      model, data.size(), cfg,
      [&](std::size_t i, const ClassifierModel& m, ClassifierModel& grad) {
        CategoryScores delta = forward(m, data[i].span);
        for (std::size_t c = 0; c < kNumCategories; ++c) delta[c] -= data[i].gold[c];
        grad.accumulate(delta, data[i].span.values);
      },
      [&](std::size_t i, const ClassifierModel& m) {
        return std::pair{loss(forward(m, data[i].span), data[i].gold), 1.0};
      });
  return {std::move(model), std::move(log)};
}

/// Scores every candidate and keeps each category reaching tau.
inline std::vector<LabeledSpan> classify(const ClassifierModel& model, std::span<const SpanCandidate> candidates,
                                         const Embedder& embedder, const Sentence& sentence, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("decision threshold must lie in (0, 1)");
  std::vector<LabeledSpan> out;
  for (const SpanCandidate& cand : candidates) {
    const CategoryScores scores = forward(model, embedder.encode_span(sentence, cand.start, cand.end));
    for (Category c : kCategories)
      if (scores[index_of(c)] >= tau) out.push_back({cand.start, cand.end, c, scores[index_of(c)], scores});
  }
  return out;
}

inline nlohmann::json to_json(const ClassifierModel& model, const TrainConfig& cfg) {
  return head_to_json(model, "spanclass", category_names(), picox::to_json(cfg));
}

inline ClassifierModel from_json(const nlohmann::json& j) {
  return head_from_json<kNumCategories>(j, "spanclass", category_names());
}

}  // namespace spanclass
}  // namespace picox
