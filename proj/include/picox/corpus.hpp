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

// Tokenized corpora with possibly-overlapping span annotations: the data
// model, JSONL and IOB2 I/O, gold boundary labels, and deterministic
// document-level splitting.

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "picox/errors.hpp"

namespace picox {

/// Entity types. Interventions and comparisons share one category.
enum class Category : std::uint8_t { population = 0, intervention = 1, outcome = 2 };

inline constexpr std::size_t kNumCategories = 3;
inline constexpr std::array<Category, kNumCategories> kCategories = {
    Category::population, Category::intervention, Category::outcome};

constexpr std::size_t index_of(Category c) { return static_cast<std::size_t>(c); }

constexpr std::string_view category_code(Category c) {
  switch (c) {
    case Category::population: return "P";
    case Category::intervention: return "I";
    case Category::outcome: return "O";
  }
  return "?";
}

inline std::optional<Category> parse_category(std::string_view code) {
  for (Category c : kCategories)
    if (category_code(c) == code) return c;
  return std::nullopt;
}

/// Token span [start, end], both ends inclusive.
struct Entity {
  std::size_t start = 0;
  std::size_t end = 0;
  Category category = Category::population;

  std::size_t length() const { return end - start + 1; }
  bool overlaps(const Entity& other) const { return start <= other.end && other.start <= end; }

  friend auto operator<=>(const Entity&, const Entity&) = default;
};

struct Sentence {
  std::string uid;
  std::vector<std::string> tokens;
  std::vector<Entity> entities;

  std::size_t size() const { return tokens.size(); }
};

struct Document {
  std::string doc_id;
  std::vector<Sentence> sentences;
};

struct Corpus {
  std::vector<Document> documents;

  std::size_t sentence_count() const {
    std::size_t n = 0;
    for (const auto& d : documents) n += d.sentences.size();
    return n;
  }

  template <typename Fn>
  void for_each_sentence(Fn&& fn) const {
    for (const auto& d : documents)
      for (const auto& s : d.sentences) fn(s);
  }

  const Sentence* find(std::string_view uid) const {
    for (const auto& d : documents)
      for (const auto& s : d.sentences)
        if (s.uid == uid) return &s;
    return nullptr;
  }
};

/// Relative-position categories, in the fixed serialization order.
enum class PositionLabel : std::uint8_t { inside = 0, outside, start, end, both };

inline constexpr std::size_t kNumPositionLabels = 5;

constexpr std::string_view position_label_name(PositionLabel l) {
  switch (l) {
    case PositionLabel::inside: return "inside";
    case PositionLabel::outside: return "outside";
    case PositionLabel::start: return "start";
    case PositionLabel::end: return "end";
    case PositionLabel::both: return "both-start-and-end";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Validation

inline void validate(const Sentence& s) {
  for (const Entity& e : s.entities) {
    if (e.start > e.end)
      throw ValidationError("sentence " + s.uid + ": entity start " + std::to_string(e.start) +
                            " after end " + std::to_string(e.end));
    if (e.end >= s.tokens.size())
      throw ValidationError("sentence " + s.uid + ": entity out of bounds (" +
                            std::to_string(e.start) + "," + std::to_string(e.end) + ") for " +
                            std::to_string(s.tokens.size()) + " tokens");
  }
  std::vector<Entity> sorted = s.entities;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValidationError("sentence " + s.uid + ": duplicate entity");
}

inline void validate(const Corpus& corpus) {
  std::unordered_set<std::string> uids;
  corpus.for_each_sentence([&](const Sentence& s) {
    validate(s);
    if (!uids.insert(s.uid).second) throw ValidationError("duplicate sentence uid " + s.uid);
  });
}

// ---------------------------------------------------------------------------
// JSONL

namespace detail {

inline Sentence sentence_from_json(const nlohmann::json& j) {
  Sentence s;
  s.uid = j.at("uid").get<std::string>();
  s.tokens = j.at("tokens").get<std::vector<std::string>>();
  if (j.contains("entities")) {
    for (const auto& je : j.at("entities")) {
      auto code = je.at("category").get<std::string>();
      auto cat = parse_category(code);
      if (!cat) throw ValidationError("sentence " + s.uid + ": unknown category \"" + code + "\"");
      auto start = je.at("start").get<std::int64_t>();
      auto end = je.at("end").get<std::int64_t>();
      if (start < 0 || end < 0)
        throw ValidationError("sentence " + s.uid + ": entity out of bounds (negative index)");
      s.entities.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(end), *cat});
    }
  }
  return s;
}

inline nlohmann::json sentence_to_json(const Sentence& s) {
  nlohmann::json ents = nlohmann::json::array();
  for (const Entity& e : s.entities)
    ents.push_back({{"start", e.start}, {"end", e.end}, {"category", category_code(e.category)}});
  return {{"uid", s.uid}, {"tokens", s.tokens}, {"entities", std::move(ents)}};
}

}  // namespace detail

/// Reads one document per line. Blank lines are skipped. Errors carry the
/// 1-based line number.
inline Corpus parse_jsonl(std::istream& in) {
  Corpus corpus;
  std::unordered_set<std::string> uids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    try {
      auto j = nlohmann::json::parse(line);
      Document doc;
      doc.doc_id = j.at("doc_id").get<std::string>();
      for (const auto& js : j.at("sentences")) {
        Sentence s = detail::sentence_from_json(js);
        validate(s);
        if (!uids.insert(s.uid).second) throw ValidationError("duplicate sentence uid " + s.uid);
        doc.sentences.push_back(std::move(s));
      }
      corpus.documents.push_back(std::move(doc));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + "malformed record: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return corpus;
}

inline void write_jsonl(std::ostream& out, const Corpus& corpus) {
  for (const Document& d : corpus.documents) {
    nlohmann::json sents = nlohmann::json::array();
    for (const Sentence& s : d.sentences) sents.push_back(detail::sentence_to_json(s));
    out << nlohmann::json{{"doc_id", d.doc_id}, {"sentences", std::move(sents)}}.dump() << '\n';
  }
}

inline Corpus read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path);
  return parse_jsonl(in);
}

inline void write_corpus_file(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_jsonl(out, corpus);
}

// ---------------------------------------------------------------------------
// IOB2

/// Reads "token<TAB>tag" lines; blank lines end sentences. A line starting
/// with -DOCSTART- opens a new document, optionally named by its second
/// field. Without markers everything lands in one document `default_doc`.
/// Sentence uids are "<doc_id>:<index>".
inline Corpus import_iob2(std::istream& in, std::string_view default_doc = "doc") {
  Corpus corpus;
  Document doc{std::string(default_doc), {}};
  Sentence cur;
  std::optional<Entity> open;
  std::size_t line_no = 0;

  auto close_entity = [&] {
    if (open) cur.entities.push_back(*open);
    open.reset();
  };
  auto flush_sentence = [&] {
    close_entity();
    if (cur.tokens.empty()) return;
    cur.uid = doc.doc_id + ":" + std::to_string(doc.sentences.size());
    doc.sentences.push_back(std::move(cur));
    cur = Sentence{};
  };
  auto flush_document = [&] {
    flush_sentence();
    if (!doc.sentences.empty()) corpus.documents.push_back(std::move(doc));
    doc = Document{};
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token, tag, extra;
    if (!(fields >> token)) {
      flush_sentence();
      continue;
    }
    if (token.starts_with("-DOCSTART-")) {
      flush_document();
      std::string name;
      doc.doc_id = (fields >> name) ? name : std::string(default_doc) + std::to_string(corpus.documents.size());
      continue;
    }
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (!(fields >> tag) || (fields >> extra))
      throw ValidationError(where + "expected \"token<TAB>tag\"");

    const std::size_t pos = cur.tokens.size();
    cur.tokens.push_back(token);
    if (tag == "O") {
      close_entity();
      continue;
    }
    if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I'))
      throw ValidationError(where + "unknown tag \"" + tag + "\"");
    auto cat = parse_category(std::string_view(tag).substr(2));
    if (!cat) throw ValidationError(where + "unknown tag \"" + tag + "\"");
    if (tag[0] == 'B') {
      close_entity();
      open = Entity{pos, pos, *cat};
    } else {
      if (!open || open->category != *cat)
        throw ValidationError(where + "dangling I-tag \"" + tag + "\"");
      open->end = pos;
    }
  }
  flush_document();
  return corpus;
}

/// Writes IOB2. Overlapping entities have no IOB2 encoding and are rejected.
inline void export_iob2(std::ostream& out, const Corpus& corpus) {
  for (const Document& d : corpus.documents) {
    out << "-DOCSTART-\t" << d.doc_id << "\n\n";
    for (const Sentence& s : d.sentences) {
      std::vector<std::string> tags(s.tokens.size(), "O");
      std::vector<bool> covered(s.tokens.size(), false);
      for (const Entity& e : s.entities) {
        for (std::size_t i = e.start; i <= e.end; ++i) {
          if (covered[i])
            throw ValidationError("sentence " + s.uid + ": overlapping entities cannot be written as IOB2");
          covered[i] = true;
          tags[i] = std::string(i == e.start ? "B-" : "I-") + std::string(category_code(e.category));
        }
      }
      for (std::size_t i = 0; i < s.tokens.size(); ++i) out << s.tokens[i] << '\t' << tags[i] << '\n';
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Gold boundary labels

/// Per-token relative-position label aggregated over every entity covering
/// the token. Boundaries dominate containment: both > start > end > inside >
/// outside.
inline std::vector<PositionLabel> derive_position_labels(const Sentence& s) {
  const std::size_t n = s.tokens.size();
  std::vector<bool> starts(n, false), ends(n, false), covered(n, false);
  for (const Entity& e : s.entities) {
    starts[e.start] = true;
    ends[e.end] = true;
    for (std::size_t i = e.start; i <= e.end; ++i) covered[i] = true;
  }
  std::vector<PositionLabel> labels(n, PositionLabel::outside);
  for (std::size_t i = 0; i < n; ++i) {
    if (starts[i] && ends[i]) labels[i] = PositionLabel::both;
    else if (starts[i]) labels[i] = PositionLabel::start;
    else if (ends[i]) labels[i] = PositionLabel::end;
    else if (covered[i]) labels[i] = PositionLabel::inside;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Splitting and partitioning

struct CorpusSplit {
  Corpus train;
  Corpus validation;
};

/// Document-level random split. round(val_fraction * docs) documents go to
/// validation; both halves keep the input document order.
inline CorpusSplit split(const Corpus& corpus, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction <= 1.0))
    throw ValidationError("validation fraction must lie in [0, 1]");
  const std::size_t n = corpus.documents.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  std::vector<bool> in_val(n, false);
  for (std::size_t k = 0; k < n_val; ++k) in_val[order[k]] = true;

  CorpusSplit out;
  for (std::size_t i = 0; i < n; ++i)
    (in_val[i] ? out.validation : out.train).documents.push_back(corpus.documents[i]);
  return out;
}

inline bool has_overlap(const Sentence& s) {
  for (std::size_t a = 0; a < s.entities.size(); ++a)
    for (std::size_t b = a + 1; b < s.entities.size(); ++b)
      if (s.entities[a].overlaps(s.entities[b])) return true;
  return false;
}

struct OverlapPartition {
  std::vector<std::string> overlapped;
  std::vector<std::string> non_overlapped;
};

/// Splits sentence uids by whether any two gold entities share a token.
inline OverlapPartition overlap_partition(const Corpus& corpus) {
  OverlapPartition p;
  corpus.for_each_sentence([&](const Sentence& s) {
    (has_overlap(s) ? p.overlapped : p.non_overlapped).push_back(s.uid);
  });
  return p;
}

}  // namespace picox
