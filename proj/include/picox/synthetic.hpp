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

// Seeded generator of small trial-abstract-like corpora whose entity
// boundaries are keyed by vocabulary. Every sentence carries a population
// span that strictly contains an intervention span; outcomes and optional
// distractor entities add boundary pairs that form composite spans.

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "picox/corpus.hpp"

namespace picox::synthetic {

struct Options {
  std::size_t sentences = 50;
  std::size_t sentences_per_doc = 5;
  std::uint64_t seed = 0;
  /// Probability of each extra standalone intervention/outcome entity.
  double distractor_rate = 0.0;
  std::string doc_prefix = "syn";
};

namespace vocab {
inline constexpr std::array<std::string_view, 8> kFiller = {"the", "study", "was", "in", "we", "assessed", "this", "trial"};
inline constexpr std::array<std::string_view, 6> kPopHead = {"patients", "children", "adults", "women", "smokers", "infants"};
inline constexpr std::array<std::string_view, 5> kCondition = {"asthma", "diabetes", "obesity", "hypertension", "eczema"};
inline constexpr std::array<std::string_view, 6> kDrug = {"aspirin", "insulin", "metformin", "placebo", "exercise", "counseling"};
inline constexpr std::array<std::string_view, 4> kForm = {"therapy", "tablets", "program", "sessions"};
inline constexpr std::array<std::string_view, 4> kOutHead = {"blood", "pain", "quality", "lung"};
inline constexpr std::array<std::string_view, 4> kOutEnd = {"pressure", "scores", "levels", "function"};
inline constexpr std::array<std::string_view, 4> kOutSingle = {"mortality", "survival", "relapse", "adherence"};
}  // namespace vocab

namespace detail {

class Builder {
 public:
  explicit Builder(std::mt19937_64& rng) : rng_(rng) {}

  template <std::size_t N>
  void word(const std::array<std::string_view, N>& pool) {
    tokens.emplace_back(pick(pool));
  }
  void word(std::string_view w) { tokens.emplace_back(w); }
  void filler(std::size_t lo, std::size_t hi) {
    const std::size_t n = uniform(lo, hi);
    for (std::size_t i = 0; i < n; ++i) word(vocab::kFiller);
  }
  std::size_t pos() const { return tokens.size(); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  std::size_t uniform(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_); }

  // Population with a nested intervention.
  void population() {
    const std::size_t p0 = pos();
    word(vocab::kPopHead);
    if (coin(0.5)) {
      // "<head> [<condition>] receiving <drug> <form>": shared end token
      if (coin(0.5)) word(vocab::kCondition);
      word("receiving");
      const std::size_t i0 = pos();
      word(vocab::kDrug);
      word(vocab::kForm);
      entities.push_back({p0, pos() - 1, Category::population});
      entities.push_back({i0, pos() - 1, Category::intervention});
    } else {
      // "<head> on <drug> <form> for <condition>": intervention strictly inside
      word("on");
      const std::size_t i0 = pos();
      word(vocab::kDrug);
      word(vocab::kForm);
      const std::size_t i1 = pos() - 1;
      word("for");
      word(vocab::kCondition);
      entities.push_back({p0, pos() - 1, Category::population});
      entities.push_back({i0, i1, Category::intervention});
    }
  }

  void outcome() {
    const std::size_t o0 = pos();
    if (coin(0.3)) {
      word(vocab::kOutSingle);
    } else {
      word(vocab::kOutHead);
      word(vocab::kOutEnd);
    }
    entities.push_back({o0, pos() - 1, Category::outcome});
  }

  void intervention() {
    word("versus");
    const std::size_t i0 = pos();
    word(vocab::kDrug);
    word(vocab::kForm);
    entities.push_back({i0, pos() - 1, Category::intervention});
  }

  std::vector<std::string> tokens;
  std::vector<Entity> entities;

 private:
  template <std::size_t N>
  std::string_view pick(const std::array<std::string_view, N>& pool) {
    return pool[uniform(0, N - 1)];
  }
  std::mt19937_64& rng_;
};

}  // namespace detail

inline Sentence sentence(std::mt19937_64& rng, std::string uid, double distractor_rate) {
  detail::Builder b(rng);
  const bool outcome_first = b.coin(0.3);
  b.filler(0, 2);
  if (outcome_first) {
    b.outcome();
    b.word("among");
  }
  b.population();
  if (b.coin(distractor_rate)) b.intervention();
  b.filler(1, 2);
  if (!outcome_first) b.outcome();
  if (b.coin(distractor_rate)) {
    b.word("and");
    b.outcome();
  }
  b.filler(0, 2);
  std::sort(b.entities.begin(), b.entities.end());
  return {std::move(uid), std::move(b.tokens), std::move(b.entities)};
}

inline Corpus generate(const Options& opt) {
  std::mt19937_64 rng(opt.seed);
  Corpus corpus;
  const std::size_t per_doc = opt.sentences_per_doc ? opt.sentences_per_doc : 1;
  for (std::size_t i = 0; i < opt.sentences; ++i) {
    if (i % per_doc == 0) corpus.documents.push_back({opt.doc_prefix + std::to_string(i / per_doc), {}});
    Document& d = corpus.documents.back();
    d.sentences.push_back(sentence(rng, d.doc_id + ":" + std::to_string(d.sentences.size()), opt.distractor_rate));
  }
  return corpus;
}

}  // namespace picox::synthetic
