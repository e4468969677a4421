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

// Contextual token representations behind a small interface. Two providers:
// a deterministic signed feature-hashing embedder, and a loader for vectors
// exported from an external encoder in the PCXE container format.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "picox/corpus.hpp"
#include "picox/errors.hpp"

namespace picox {

/// One row per token, row-major.
class TokenMatrix {
 public:
  TokenMatrix() = default;
  TokenMatrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  friend bool operator==(const TokenMatrix&, const TokenMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct SpanVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const SpanVector&, const SpanVector&) = default;
};

/// Pools rows [first, last] of `rows` into (mean, first row, last row).
inline SpanVector pool_span(const TokenMatrix& rows, std::size_t first, std::size_t last) {
  const std::size_t d = rows.dim();
  SpanVector v{std::vector<double>(3 * d, 0.0)};
  const double inv = 1.0 / static_cast<double>(last - first + 1);
  for (std::size_t i = first; i <= last; ++i) {
    auto r = rows.row(i);
    for (std::size_t k = 0; k < d; ++k) v.values[k] += r[k] * inv;
  }
  auto a = rows.row(first);
  auto b = rows.row(last);
  std::copy(a.begin(), a.end(), v.values.begin() + static_cast<std::ptrdiff_t>(d));
  std::copy(b.begin(), b.end(), v.values.begin() + static_cast<std::ptrdiff_t>(2 * d));
  return v;
}

class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual std::size_t dim() const = 0;
  std::size_t span_dim() const { return 3 * dim(); }

  virtual TokenMatrix encode_tokens(const Sentence& s) const = 0;

  /// Concatenation of (mean row, start row, end row) over [start, end].
  SpanVector encode_span(const Sentence& s, std::size_t start, std::size_t end) const {
    if (start > end || end >= s.size())
      throw ValidationError("span (" + std::to_string(start) + "," + std::to_string(end) +
                            ") out of range for sentence " + s.uid);
    return span_impl(s, start, end);
  }

  virtual nlohmann::json config() const = 0;

 protected:
  virtual SpanVector span_impl(const Sentence& s, std::size_t start, std::size_t end) const {
    return pool_span(encode_tokens(s), start, end);
  }
};

// ---------------------------------------------------------------------------
// Feature hashing

struct HashedEmbedderConfig {
  std::size_t dim = 256;
  std::uint64_t seed = 0;
  /// Neighbor surfaces on each side folded into a token's row. 0 = token only.
  std::size_t window = 1;
  /// When false a span is encoded as a standalone token sequence, so nothing
  /// outside [start, end] reaches its vector.
  bool span_context = false;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace detail

class HashedEmbedder final : public Embedder {
 public:
  explicit HashedEmbedder(HashedEmbedderConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.dim < 2) throw ValidationError("hashed embedder needs dim >= 2");
  }

  const HashedEmbedderConfig& settings() const { return cfg_; }
  std::size_t dim() const override { return cfg_.dim; }

  TokenMatrix encode_tokens(const Sentence& s) const override { return encode(s.tokens); }

  /// Rows for a bare token sequence.
  TokenMatrix encode(std::span<const std::string> tokens) const {
    const std::size_t n = tokens.size();
    TokenMatrix m(n, cfg_.dim);
    const auto w = static_cast<std::ptrdiff_t>(cfg_.window);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = m.row(i);
      add_feature(row, "t", tokens[i]);
      for (std::ptrdiff_t k = 1; k <= w; ++k) {
        const auto left = static_cast<std::ptrdiff_t>(i) - k;
        const auto right = static_cast<std::ptrdiff_t>(i) + k;
        const std::string tag = std::to_string(k);
        add_feature(row, "l" + tag, left >= 0 ? std::string_view(tokens[static_cast<std::size_t>(left)]) : "<s>");
        add_feature(row, "r" + tag,
                    right < static_cast<std::ptrdiff_t>(n) ? std::string_view(tokens[static_cast<std::size_t>(right)])
                                                          : "</s>");
      }
      // Dedicated bias slot outside the hashed range keeps every row non-zero.
      row[cfg_.dim - 1] = 1.0;
      double norm = 0.0;
      for (double x : row) norm += x * x;
      norm = std::sqrt(norm);
      for (double& x : row) x /= norm;
    }
    return m;
  }

  nlohmann::json config() const override {
    return {{"kind", "hashed"},
            {"dim", cfg_.dim},
            {"seed", cfg_.seed},
            {"window", cfg_.window},
            {"span_context", cfg_.span_context}};
  }

 protected:
  SpanVector span_impl(const Sentence& s, std::size_t start, std::size_t end) const override {
    if (cfg_.span_context) return pool_span(encode(s.tokens), start, end);
    std::span<const std::string> inner(s.tokens.data() + start, end - start + 1);
    return pool_span(encode(inner), 0, end - start);
  }

 private:
  void add_feature(std::span<double> row, std::string_view slot, std::string_view surface) const {
    std::uint64_t h = detail::fnv1a(slot, 0xcbf29ce484222325ULL ^ detail::mix64(cfg_.seed));
    h = detail::fnv1a("\x1f", h);
    h = detail::mix64(detail::fnv1a(surface, h));
    const std::size_t idx = h % (cfg_.dim - 1);
    row[idx] += (h >> 63) ? -1.0 : 1.0;
  }

  HashedEmbedderConfig cfg_;
};

// ---------------------------------------------------------------------------
// PCXE container
//
//   "PCXE" | version u32 | dim u32 | count u32
//   count x ( uid_len u16 | uid bytes | m u32 | m*dim f32 )
// All integers and floats little-endian.

inline constexpr std::uint32_t kPcxeVersion = 1;

struct PcxeRecord {
  std::string uid;
  std::size_t tokens = 0;
  std::vector<float> values;  // tokens * dim, row-major
};

namespace detail {

template <typename UInt>
void put_le(std::ostream& out, UInt v) {
  char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, sizeof(UInt));
}

template <typename UInt>
UInt get_le(std::istream& in) {
  unsigned char buf[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(UInt))) throw ValidationError("truncated PCXE file");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(static_cast<UInt>(buf[i]) << (8 * i));
  return v;
}

}  // namespace detail

inline void write_pcxe(std::ostream& out, std::size_t dim, std::span<const PcxeRecord> records) {
  out.write("PCXE", 4);
  detail::put_le<std::uint32_t>(out, kPcxeVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
  for (const PcxeRecord& r : records) {
    if (r.values.size() != r.tokens * dim) throw ValidationError("PCXE record " + r.uid + " has wrong size");
    if (r.uid.size() > 0xffff) throw ValidationError("PCXE uid too long");
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.uid.size()));
    out.write(r.uid.data(), static_cast<std::streamsize>(r.uid.size()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.tokens));
    for (float f : r.values) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
}

/// Token vectors read from a PCXE file, looked up by sentence uid.
class FileEmbedder final : public Embedder {
 public:
  explicit FileEmbedder(std::istream& in, std::string source = "<stream>") : source_(std::move(source)) { load(in); }

  static FileEmbedder open(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file " + path);
    return FileEmbedder(in, path);
  }

  std::size_t dim() const override { return dim_; }
  std::size_t size() const { return records_.size(); }

  /// Stored float payload for `uid`, exactly as read.
  std::span<const float> raw(const std::string& uid) const { return lookup(uid).values; }

  TokenMatrix encode_tokens(const Sentence& s) const override {
    const PcxeRecord& r = lookup(s.uid);
    if (r.tokens != s.size())
      throw ValidationError("embedding for " + s.uid + " has " + std::to_string(r.tokens) + " rows, sentence has " +
                            std::to_string(s.size()) + " tokens");
    TokenMatrix m(r.tokens, dim_);
    for (std::size_t i = 0; i < r.tokens; ++i) {
      auto row = m.row(i);
      for (std::size_t k = 0; k < dim_; ++k) row[k] = r.values[i * dim_ + k];
    }
    return m;
  }

  nlohmann::json config() const override { return {{"kind", "file"}, {"path", source_}}; }

 private:
  const PcxeRecord& lookup(const std::string& uid) const {
    auto it = records_.find(uid);
    if (it == records_.end()) throw ValidationError("unknown sentence uid " + uid);
    return it->second;
  }

  void load(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "PCXE", 4) != 0) throw ValidationError("not a PCXE file");
    const auto version = detail::get_le<std::uint32_t>(in);
    if (version != kPcxeVersion) throw ValidationError("unsupported PCXE version " + std::to_string(version));
    dim_ = detail::get_le<std::uint32_t>(in);
    const auto count = detail::get_le<std::uint32_t>(in);
    for (std::uint32_t k = 0; k < count; ++k) {
      PcxeRecord r;
      r.uid.resize(detail::get_le<std::uint16_t>(in));
      if (!in.read(r.uid.data(), static_cast<std::streamsize>(r.uid.size())))
        throw ValidationError("truncated PCXE file");
      r.tokens = detail::get_le<std::uint32_t>(in);
      r.values.resize(r.tokens * dim_);
      for (float& f : r.values) {
        f = std::bit_cast<float>(detail::get_le<std::uint32_t>(in));
        if (!std::isfinite(f)) throw ValidationError("non-finite value in embedding for " + r.uid);
      }
      if (!records_.emplace(r.uid, std::move(r)).second) throw ValidationError("duplicate uid in PCXE file");
    }
  }

  std::string source_;
  std::size_t dim_ = 0;
  std::map<std::string, PcxeRecord> records_;
};

/// Builds an embedder from its JSON config ({"kind": "hashed"|"file", ...}).
inline std::unique_ptr<Embedder> make_embedder(const nlohmann::json& cfg) {
  const std::string kind = cfg.value("kind", "hashed");
  if (kind == "hashed") {
    HashedEmbedderConfig h;
    h.dim = cfg.value("dim", h.dim);
    h.seed = cfg.value("seed", h.seed);
    h.window = cfg.value("window", h.window);
    h.span_context = cfg.value("span_context", h.span_context);
    return std::make_unique<HashedEmbedder>(h);
  }
  if (kind == "file") return std::make_unique<FileEmbedder>(FileEmbedder::open(cfg.at("path").get<std::string>()));
  throw ValidationError("unknown embedder kind \"" + kind + "\"");
}

}  // namespace picox
