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

// Five-way boundary head: per-token softmax over relative-position
// categories, its cross-entropy objective and gradient, and threshold
// decoding of start/end positions.

#include <algorithm>
#include <array>
#include <cmath>
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

using LocalizerModel = LinearHead<kNumPositionLabels>;
using BoundaryRow = std::array<double, kNumPositionLabels>;

/// Row i holds token i's distribution over (inside, outside, start, end,
/// both-start-and-end).
struct BoundaryProbMatrix {
  std::vector<BoundaryRow> rows;

  std::size_t size() const { return rows.size(); }
  const BoundaryRow& operator[](std::size_t i) const { return rows[i]; }
};

struct BoundarySet {
  std::vector<std::size_t> starts;  // sorted
  std::vector<std::size_t> ends;    // sorted

  friend bool operator==(const BoundarySet&, const BoundarySet&) = default;
};

namespace localizer {

inline constexpr double kLogFloor = 1e-12;
inline constexpr double kDefaultThreshold = 0.25;

inline std::vector<std::string> category_names() {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < kNumPositionLabels; ++j)
    names.emplace_back(position_label_name(static_cast<PositionLabel>(j)));
  return names;
}

inline BoundaryRow softmax(BoundaryRow z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::exp(v - m));
  for (double& v : z) v /= sum;
  return z;
}

inline BoundaryProbMatrix forward(const LocalizerModel& model, const TokenMatrix& h) {
  if (h.dim() != model.dim)
    throw ValidationError("dimension mismatch: embeddings " + std::to_string(h.dim()) + ", localizer " +
                          std::to_string(model.dim));
  BoundaryProbMatrix p;
  p.rows.reserve(h.rows());
  for (std::size_t i = 0; i < h.rows(); ++i) p.rows.push_back(softmax(model.logits(h.row(i))));
  return p;
}

/// Sum over tokens of -log P[i][gold_i].
inline double loss(const BoundaryProbMatrix& p, std::span<const PositionLabel> gold) {
  if (p.size() != gold.size())
    throw ValidationError("length mismatch: " + std::to_string(p.size()) + " rows, " + std::to_string(gold.size()) +
                          " labels");
  double total = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    total -= std::log(std::max(p[i][static_cast<std::size_t>(gold[i])], kLogFloor));
  return total;
}

/// Gradient of `loss(forward(model, h), gold)` with respect to W and b.
inline LocalizerModel gradient(const LocalizerModel& model, const TokenMatrix& h, std::span<const PositionLabel> gold) {
  const BoundaryProbMatrix p = forward(model, h);
  if (p.size() != gold.size())
    throw ValidationError("length mismatch: " + std::to_string(p.size()) + " rows, " + std::to_string(gold.size()) +
                          " labels");
  LocalizerModel grad = LocalizerModel::zeros(model.dim);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    BoundaryRow delta = p[i];
    delta[static_cast<std::size_t>(gold[i])] -= 1.0;
    grad.accumulate(delta, h.row(i));
  }
  return grad;
}

/// Token i is a start if P(start) or P(both) reaches t, an end if P(end) or
/// P(both) reaches t. Tokens with every probability below t are neither.
inline BoundarySet decode(const BoundaryProbMatrix& p, double t) {
  if (!(t > 0.0 && t <= 0.5)) throw ValidationError("boundary threshold must lie in (0, 0.5]");
  constexpr auto kStart = static_cast<std::size_t>(PositionLabel::start);
  constexpr auto kEnd = static_cast<std::size_t>(PositionLabel::end);
  constexpr auto kBoth = static_cast<std::size_t>(PositionLabel::both);
  BoundarySet out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool both = p[i][kBoth] >= t;
    if (both || p[i][kStart] >= t) out.starts.push_back(i);
    if (both || p[i][kEnd] >= t) out.ends.push_back(i);
  }
  return out;
}

inline BoundaryProbMatrix one_hot(std::span<const PositionLabel> labels) {
  BoundaryProbMatrix p;
  for (PositionLabel l : labels) {
    BoundaryRow r{};
    r[static_cast<std::size_t>(l)] = 1.0;
    p.rows.push_back(r);
  }
  return p;
}

struct Example {
  TokenMatrix tokens;
  std::vector<PositionLabel> gold;
};

struct FitResult {
  LocalizerModel model;
  TrainLog log;
};

/// Trains from zero weights, or from `init` to continue an earlier run.
/// Reported epoch loss is per token.
inline FitResult fit(std::span<const Example> data, const TrainConfig& cfg,
                     std::optional<LocalizerModel> init = std::nullopt) {
  if (data.empty()) throw ValidationError("empty training set");
  const std::size_t dim = data.front().tokens.dim();
  for (const Example& ex : data) {
    if (ex.tokens.dim() != dim) throw ValidationError("inconsistent embedding dimensions in training set");
    if (ex.tokens.rows() != ex.gold.size()) throw ValidationError("length mismatch in training example");
  }
  LocalizerModel model = init ? *init : LocalizerModel::zeros(dim);
  if (model.dim != dim) throw ValidationError("initial localizer dimension does not match embeddings");

  TrainLog log = train_head(
      model, data.size(), cfg,
      [&](std::size_t i, const LocalizerModel& m, LocalizerModel& grad) {
        const Example& ex = data[i];
        const BoundaryProbMatrix p = forward(m, ex.tokens);
        for (std::size_t t = 0; t < ex.gold.size(); ++t) {
          BoundaryRow delta = p[t];
          delta[static_cast<std::size_t>(ex.gold[t])] -= 1.0;
          grad.accumulate(delta, ex.tokens.row(t));
        }
      },
      [&](std::size_t i, const LocalizerModel& m) {
        const Example& ex = data[i];
        return std::pair{loss(forward(m, ex.tokens), ex.gold), static_cast<double>(ex.gold.size())};
      });
  return {std::move(model), std::move(log)};
}

inline nlohmann::json to_json(const LocalizerModel& model, const TrainConfig& cfg) {
  return head_to_json(model, "localizer", category_names(), picox::to_json(cfg));
}

inline LocalizerModel from_json(const nlohmann::json& j) {
  return head_from_json<kNumPositionLabels>(j, "localizer", category_names());
}

}  // namespace localizer
}  // namespace picox
