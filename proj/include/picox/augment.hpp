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

// Composite-span negatives: spans opening at one entity's start and closing
// at another entity's end, used to teach the span classifier to reject
// boundary pairings that are not entities.

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "picox/corpus.hpp"
#include "picox/embedder.hpp"
#include "picox/spanclass.hpp"

namespace picox {

struct CompositeSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  // First entity pair that produced the span.
  Entity from_start;
  Entity from_end;
};

namespace augment {

/// For every cross pair (a, b): adds (start(a), end(b)) when start(a) <=
/// end(b), and (start(b), end(a)) when start(b) <= end(a). Returned sorted
/// by (start, end) without duplicates.
inline std::vector<CompositeSpan> composite_spans(std::span<const Entity> la, std::span<const Entity> lb) {
  std::map<std::pair<std::size_t, std::size_t>, CompositeSpan> found;
  auto add = [&](const Entity& s, const Entity& e) {
    if (s.start <= e.end) found.try_emplace({s.start, e.end}, CompositeSpan{s.start, e.end, s, e});
  };
  for (const Entity& a : la) {
    for (const Entity& b : lb) {
      add(a, b);
      add(b, a);
    }
  }
  std::vector<CompositeSpan> out;
  out.reserve(found.size());
  for (auto& [key, span] : found) out.push_back(span);
  return out;
}

/// Composite spans over every pair of distinct categories in `s`, excluding
/// any extent that is itself a gold entity span. Sorted by (start, end).
inline std::vector<std::pair<std::size_t, std::size_t>> sentence_negatives(const Sentence& s) {
  std::array<std::vector<Entity>, kNumCategories> by_cat;
  std::set<std::pair<std::size_t, std::size_t>> gold;
  for (const Entity& e : s.entities) {
    by_cat[index_of(e.category)].push_back(e);
    gold.emplace(e.start, e.end);
  }
  std::set<std::pair<std::size_t, std::size_t>> negs;
  for (std::size_t a = 0; a < kNumCategories; ++a)
    for (std::size_t b = a + 1; b < kNumCategories; ++b)
      for (const CompositeSpan& c : composite_spans(by_cat[a], by_cat[b]))
        if (!gold.contains({c.start, c.end})) negs.emplace(c.start, c.end);
  return {negs.begin(), negs.end()};
}

/// Span-classifier training data: one multi-hot positive per distinct gold
/// extent, plus all-zero composite negatives when `augmentation` is set.
inline std::vector<spanclass::Example> build_training_set(const Corpus& corpus, const Embedder& embedder,
                                                          bool augmentation) {
  std::vector<spanclass::Example> out;
  corpus.for_each_sentence([&](const Sentence& s) {
    std::map<std::pair<std::size_t, std::size_t>, CategoryScores> positives;
    for (const Entity& e : s.entities) positives[{e.start, e.end}][index_of(e.category)] = 1.0;
    for (const auto& [extent, gold] : positives)
      out.push_back({embedder.encode_span(s, extent.first, extent.second), gold});
    if (!augmentation) return;
    for (const auto& [start, end] : sentence_negatives(s))
      out.push_back({embedder.encode_span(s, start, end), CategoryScores{}});
  });
  return out;
}

}  // namespace augment
}  // namespace picox
