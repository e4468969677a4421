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

#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "gtest/gtest.h"
#include "picox/embedder.hpp"

using namespace picox;

namespace {

Sentence sentence(std::vector<std::string> tokens, std::string uid = "u") { return {std::move(uid), std::move(tokens), {}}; }

double norm(std::span<const double> r) {
  double s = 0.0;
  for (double x : r) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(HashedEmbedder, Deterministic) {
  const Sentence s = sentence({"adults", "receiving", "aspirin", "therapy", "daily"});
  const HashedEmbedder a({64, 7, 1, false});
  const HashedEmbedder b({64, 7, 1, false});
  EXPECT_EQ(a.encode_tokens(s), a.encode_tokens(s));
  EXPECT_EQ(a.encode_tokens(s), b.encode_tokens(s));
  EXPECT_EQ(a.encode_span(s, 1, 3), b.encode_span(s, 1, 3));
  const HashedEmbedder other_seed({64, 8, 1, false});
  EXPECT_NE(a.encode_tokens(s), other_seed.encode_tokens(s));
}

TEST(HashedEmbedder, Shape) {
  const HashedEmbedder e({64, 0, 1, false});
  const TokenMatrix m = e.encode_tokens(sentence({"a", "b", "c", "d", "e"}));
  EXPECT_EQ(m.rows(), 5u);
  EXPECT_EQ(m.dim(), 64u);
  EXPECT_EQ(e.span_dim(), 192u);
}

TEST(HashedEmbedder, UnitRowsAndFinite) {
  std::mt19937_64 rng(1);
  for (std::size_t dim : {2u, 3u, 16u, 256u}) {
    const HashedEmbedder e({dim, 3, 2, false});
    std::vector<std::string> toks;
    for (int i = 0; i < 40; ++i) toks.push_back("tok" + std::to_string(rng() % 30));
    const TokenMatrix m = e.encode_tokens(sentence(toks));
    for (std::size_t i = 0; i < m.rows(); ++i) {
      EXPECT_NEAR(norm(m.row(i)), 1.0, 1e-6);
      for (double x : m.row(i)) EXPECT_TRUE(std::isfinite(x));
    }
  }
  EXPECT_THROW(HashedEmbedder({1, 0, 1, false}), ValidationError);
}

TEST(HashedEmbedder, ContextWindowChangesRows) {
  const HashedEmbedder ctx({128, 0, 1, false});
  const HashedEmbedder bare({128, 0, 0, false});
  const auto a = sentence({"x", "aspirin", "y"});
  const auto b = sentence({"z", "aspirin", "w"});
  const TokenMatrix ca = ctx.encode_tokens(a), cb = ctx.encode_tokens(b);
  EXPECT_FALSE(std::equal(ca.row(1).begin(), ca.row(1).end(), cb.row(1).begin()));
  const TokenMatrix ba = bare.encode_tokens(a), bb = bare.encode_tokens(b);
  EXPECT_TRUE(std::equal(ba.row(1).begin(), ba.row(1).end(), bb.row(1).begin()));
}

TEST(EncodeSpan, SingleTokenSpan) {
  const HashedEmbedder e({32, 0, 1, true});
  const Sentence s = sentence({"a", "b", "c"});
  const SpanVector v = e.encode_span(s, 1, 1);
  const TokenMatrix m = e.encode_tokens(s);
  const auto row = m.row(1);
  ASSERT_EQ(v.size(), 96u);
  for (std::size_t k = 0; k < 32; ++k) {
    EXPECT_DOUBLE_EQ(v.values[k], row[k]);
    EXPECT_DOUBLE_EQ(v.values[32 + k], row[k]);
    EXPECT_DOUBLE_EQ(v.values[64 + k], row[k]);
  }
}

TEST(EncodeSpan, FullSentenceMean) {
  const HashedEmbedder e({32, 0, 1, true});
  const Sentence s = sentence({"a", "b", "c", "d"});
  const SpanVector v = e.encode_span(s, 0, 3);
  const TokenMatrix m = e.encode_tokens(s);
  for (std::size_t k = 0; k < 32; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mean += m.row(i)[k] / 4.0;
    EXPECT_NEAR(v.values[k], mean, 1e-12);
    EXPECT_DOUBLE_EQ(v.values[32 + k], m.row(0)[k]);
    EXPECT_DOUBLE_EQ(v.values[64 + k], m.row(3)[k]);
  }
}

TEST(EncodeSpan, OutsideTokensDoNotMatterWithoutContext) {
  std::mt19937_64 rng(2);
  const HashedEmbedder no_window({64, 0, 0, true});
  const HashedEmbedder span_only({64, 0, 2, false});
  Sentence s = sentence({"p", "q", "aspirin", "therapy", "tablets", "r", "s", "t"});
  const SpanVector a = no_window.encode_span(s, 2, 4);
  const SpanVector b = span_only.encode_span(s, 2, 4);
  for (int trial = 0; trial < 20; ++trial) {
    Sentence p = s;
    std::shuffle(p.tokens.begin(), p.tokens.begin() + 2, rng);
    std::shuffle(p.tokens.begin() + 5, p.tokens.end(), rng);
    p.tokens[0] = "noise" + std::to_string(trial);
    EXPECT_EQ(no_window.encode_span(p, 2, 4), a);
    EXPECT_EQ(span_only.encode_span(p, 2, 4), b);
  }
  // With context on and a window, neighbors leak into the boundary rows.
  const HashedEmbedder ctx({64, 0, 1, true});
  Sentence p = s;
  p.tokens[1] = "different";
  EXPECT_NE(ctx.encode_span(p, 2, 4), ctx.encode_span(s, 2, 4));
}

TEST(EncodeSpan, OutOfRange) {
  const HashedEmbedder e({16, 0, 1, false});
  const Sentence s = sentence({"a", "b"});
  EXPECT_THROW(e.encode_span(s, 0, 2), ValidationError);
  EXPECT_THROW(e.encode_span(s, 1, 0), ValidationError);
}

TEST(FileEmbedder, RoundTripIsBitExact) {
  std::mt19937_64 rng(9);
  std::normal_distribution<float> dist(0.0f, 3.0f);
  const std::size_t dim = 7;
  std::vector<PcxeRecord> recs;
  for (int r = 0; r < 4; ++r) {
    PcxeRecord rec{"doc:" + std::to_string(r), static_cast<std::size_t>(r + 1), {}};
    for (std::size_t i = 0; i < rec.tokens * dim; ++i) rec.values.push_back(dist(rng));
    recs.push_back(rec);
  }
  recs[0].values[0] = 1e-40f;  // subnormal
  recs[1].values[0] = -0.0f;
  std::stringstream buf;
  write_pcxe(buf, dim, recs);
  const FileEmbedder e(buf);
  EXPECT_EQ(e.dim(), dim);
  EXPECT_EQ(e.size(), 4u);
  for (const auto& rec : recs) {
    const auto raw = e.raw(rec.uid);
    ASSERT_EQ(raw.size(), rec.values.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
      EXPECT_EQ(std::bit_cast<std::uint32_t>(raw[i]), std::bit_cast<std::uint32_t>(rec.values[i]));
    const Sentence s{rec.uid, std::vector<std::string>(rec.tokens, "t"), {}};
    const TokenMatrix m = e.encode_tokens(s);
    for (std::size_t i = 0; i < rec.tokens; ++i)
      for (std::size_t k = 0; k < dim; ++k)
        EXPECT_EQ(std::bit_cast<std::uint32_t>(static_cast<float>(m.row(i)[k])),
                  std::bit_cast<std::uint32_t>(rec.values[i * dim + k]));
  }
}

TEST(FileEmbedder, HeaderLayout) {
  std::stringstream buf;
  std::vector<PcxeRecord> recs{{"ab", 1, {1.0f, 2.0f}}};
  write_pcxe(buf, 2, recs);
  const std::string bytes = buf.str();
  ASSERT_EQ(bytes.size(), 4u + 12u + 2u + 2u + 4u + 8u);
  EXPECT_EQ(bytes.substr(0, 4), "PCXE");
  EXPECT_EQ(bytes[4], 1);   // version, little-endian
  EXPECT_EQ(bytes[8], 2);   // dim
  EXPECT_EQ(bytes[12], 1);  // count
  EXPECT_EQ(bytes[16], 2);  // uid length
  EXPECT_EQ(bytes.substr(18, 2), "ab");
  EXPECT_EQ(bytes[20], 1);  // token count
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[27]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[26]), 0x80);
}

TEST(FileEmbedder, SpanPoolingMatchesHashedLayout) {
  std::vector<PcxeRecord> recs{{"s", 3, {1, 0, 0, 1, 3, 3}}};
  std::stringstream buf;
  write_pcxe(buf, 2, recs);
  const FileEmbedder e(buf);
  const Sentence s{"s", {"a", "b", "c"}, {}};
  const SpanVector v = e.encode_span(s, 0, 2);
  EXPECT_EQ(v.values, (std::vector<double>{4.0 / 3, 4.0 / 3, 1, 0, 3, 3}));
}

TEST(FileEmbedder, Errors) {
  std::vector<PcxeRecord> recs{{"known", 2, {0, 0, 0, 0}}};
  std::stringstream buf;
  write_pcxe(buf, 2, recs);
  const FileEmbedder e(buf);
  try {
    e.encode_tokens(Sentence{"missing", {"a"}, {}});
    FAIL();
  } catch (const ValidationError& err) {
    EXPECT_NE(std::string(err.what()).find("unknown sentence uid"), std::string::npos);
    EXPECT_NE(std::string(err.what()).find("missing"), std::string::npos);
  }
  EXPECT_THROW(e.encode_tokens(Sentence{"known", {"a", "b", "c"}, {}}), ValidationError);

  std::stringstream bad("XXXX");
  EXPECT_THROW(FileEmbedder{bad}, ValidationError);
  std::string truncated = buf.str();
  truncated.resize(truncated.size() - 3);
  std::stringstream tr(truncated);
  EXPECT_THROW(FileEmbedder{tr}, ValidationError);
  EXPECT_THROW(FileEmbedder::open("/nonexistent/file.pcxe"), IoError);
}

TEST(MakeEmbedder, FromConfig) {
  const auto e = make_embedder({{"kind", "hashed"}, {"dim", 32}, {"seed", 4}});
  EXPECT_EQ(e->dim(), 32u);
  EXPECT_EQ(e->config().at("seed"), 4);
  EXPECT_THROW(make_embedder({{"kind", "bert"}}), ValidationError);
}
