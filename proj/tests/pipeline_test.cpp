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

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "picox/pipeline.hpp"
#include "picox/synthetic.hpp"

using namespace picox;
namespace fs = std::filesystem;

namespace {

using Triple = std::tuple<std::size_t, std::size_t, Category>;
using Extent = std::pair<std::size_t, std::size_t>;

std::vector<Extent> extents(const std::vector<SpanCandidate>& c) {
  std::vector<Extent> out;
  for (const auto& x : c) out.emplace_back(x.start, x.end);
  return out;
}

const Sentence kNested{"fig", {"children", "with", "asthma", "inhaled", "steroids"},
                       {{0, 4, Category::population}, {3, 4, Category::intervention}}};

// Memorizing localizer: each label row is the sum of the token rows that
// carry it.
LocalizerModel memorizing_localizer(const Embedder& emb, const Sentence& s, double a = 20.0) {
  const TokenMatrix x = emb.encode_tokens(s);
  const auto labels = derive_position_labels(s);
  LocalizerModel m = LocalizerModel::zeros(emb.dim());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = m.row(static_cast<std::size_t>(labels[i]));
    for (std::size_t k = 0; k < emb.dim(); ++k) row[k] += a * x.row(i)[k];
  }
  return m;
}

// Keys P and I on the first-token block of the two nested fixture spans.
ClassifierModel fixture_classifier(const Embedder& emb, double a = 20.0) {
  const SpanVector pop = emb.encode_span(kNested, 0, 4);
  const SpanVector inter = emb.encode_span(kNested, 3, 4);
  ClassifierModel m = ClassifierModel::zeros(emb.span_dim());
  for (std::size_t k = emb.dim(); k < 2 * emb.dim(); ++k) {
    m.row(0)[k] = a * (pop.values[k] - inter.values[k]);
    m.row(1)[k] = a * (inter.values[k] - pop.values[k]);
  }
  m.bias = {0.0, 0.0, -10.0};
  return m;
}

std::set<Triple> triples(const std::vector<LabeledSpan>& spans) {
  std::set<Triple> out;
  for (const auto& s : spans) out.emplace(s.start, s.end, s.category);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("picox_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

PipelineConfig small_config(std::size_t dim = 32) {
  PipelineConfig cfg;
  cfg.embedder = HashedEmbedder({dim, 0, 1, false}).config();
  cfg.localizer_train = {0.5, 8, 20, 0};
  cfg.classifier_train = {0.5, 8, 20, 0};
  return cfg;
}

}  // namespace

TEST(EnumerateCandidates, Examples) {
  EXPECT_EQ(extents(enumerate_candidates({{0, 3}, {4}})), (std::vector<Extent>{{0, 4}, {3, 4}}));
  EXPECT_EQ(extents(enumerate_candidates({{2, 5}, {4, 9}})), (std::vector<Extent>{{2, 4}, {2, 9}, {5, 9}}));
  EXPECT_TRUE(enumerate_candidates({{}, {1, 2}}).empty());
  EXPECT_EQ(extents(enumerate_candidates({{2}, {2, 3}})), (std::vector<Extent>{{2, 2}, {2, 3}}));
  EXPECT_EQ(extents(enumerate_candidates({{2}, {2, 3}}, "u", true)), (std::vector<Extent>{{2, 3}}));
  EXPECT_EQ(enumerate_candidates({{1}, {1}}, "u")[0].uid, "u");
}

TEST(EnumerateCandidates, CountMatchesBruteForce) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    BoundarySet b;
    for (std::size_t i = 0; i < 15; ++i) {
      if (rng() % 3 == 0) b.starts.push_back(i);
      if (rng() % 3 == 0) b.ends.push_back(i);
    }
    std::size_t expect = 0;
    for (std::size_t s : b.starts)
      for (std::size_t e : b.ends) expect += s <= e;
    const auto c = enumerate_candidates(b);
    EXPECT_EQ(c.size(), expect);
    EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
  }
}

TEST(PositionLabels, OneHotDecodeRecoversEveryGoldExtent) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 300; ++trial) {
    const Sentence s = oracle::random_nested_sentence(rng, 1 + rng() % 15, 6);
    const auto cands = extents(enumerate_candidates(
        localizer::decode(localizer::one_hot(derive_position_labels(s)), localizer::kDefaultThreshold)));
    const std::set<Extent> have(cands.begin(), cands.end());
    for (const Entity& e : s.entities) EXPECT_TRUE(have.contains({e.start, e.end}));
  }
}

TEST(Predict, NestedFixtureWithMemorizingHeads) {
  const HashedEmbedder emb({256, 0, 1, false});
  const Models m{memorizing_localizer(emb, kNested), fixture_classifier(emb)};
  PipelineConfig cfg;
  const auto spans = predict(kNested, m, emb, cfg);
  EXPECT_EQ(triples(spans),
            (std::set<Triple>{{0, 4, Category::population}, {3, 4, Category::intervention}}));
  EXPECT_TRUE(std::is_sorted(spans.begin(), spans.end(), [](const LabeledSpan& a, const LabeledSpan& b) {
    return std::tie(a.start, a.end, a.category) < std::tie(b.start, b.end, b.category);
  }));
}

TEST(Predict, NoBoundariesMeansNoSpans) {
  const HashedEmbedder emb({32, 0, 1, false});
  Models m{LocalizerModel::zeros(32), ClassifierModel::zeros(96)};
  m.localizer.bias[static_cast<std::size_t>(PositionLabel::outside)] = 50.0;
  m.classifier.bias = {50, 50, 50};
  EXPECT_TRUE(predict(kNested, m, emb, PipelineConfig{}).empty());
  EXPECT_TRUE(predict(Sentence{"e", {}, {}}, m, emb, PipelineConfig{}).empty());
}

TEST(Predict, DimensionAndConfigErrors) {
  const HashedEmbedder emb({32, 0, 1, false});
  const Models wrong{LocalizerModel::zeros(16), ClassifierModel::zeros(96)};
  EXPECT_THROW(predict(kNested, wrong, emb, PipelineConfig{}), ValidationError);
  const Models ok{LocalizerModel::zeros(32), ClassifierModel::zeros(96)};
  PipelineConfig bad;
  bad.threshold = 0.6;
  EXPECT_THROW(predict(kNested, ok, emb, bad), ValidationError);
  bad = {};
  bad.tau = 1.0;
  EXPECT_THROW(predict(kNested, ok, emb, bad), ValidationError);
}

TEST(Sweep, MonotoneCandidatesAndAgreesWithEvaluate) {
  const Corpus corpus = synthetic::generate({20, 5, 3});
  const HashedEmbedder emb({32, 0, 1, false});
  std::mt19937_64 rng(33);
  std::normal_distribution<double> g(0.0, 2.0);
  Models m{LocalizerModel::zeros(32), ClassifierModel::zeros(96)};
  for (double& w : m.localizer.weights) w = g(rng);
  for (double& w : m.classifier.weights) w = g(rng);
  const std::vector<double> ts{0.2, 0.25, 0.3, 0.4, 0.5};
  PipelineConfig cfg;
  const auto rows = sweep_threshold(corpus, m, emb, ts, cfg);
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_LE(rows[k].candidates, rows[k - 1].candidates);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    cfg.threshold = ts[k];
    const auto direct = evaluate(predict_corpus(corpus, m, emb, cfg), corpus).overall;
    EXPECT_DOUBLE_EQ(rows[k].micro.f1, direct.micro.f1);
    EXPECT_DOUBLE_EQ(rows[k].macro.f1, direct.macro.f1);
    EXPECT_EQ(rows[k].threshold, ts[k]);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 6);
  const std::vector<double> bad{0.7};
  EXPECT_THROW(sweep_threshold(corpus, m, emb, bad, cfg), ValidationError);
}

TEST(TrainAll, SmokeAndAugmentationSwitch) {
  const Corpus corpus = synthetic::generate({10, 5, 4, 0.5});
  PipelineConfig cfg = small_config();
  const auto emb = make_embedder(cfg.embedder);
  const auto with = train_all(corpus, *emb, cfg);
  EXPECT_TRUE(with.models.localizer.finite());
  EXPECT_TRUE(with.models.classifier.finite());
  EXPECT_EQ(with.localizer_log.epoch_loss.size(), 20u);
  EXPECT_GT(with.negatives, 0u);
  cfg.augmentation = false;
  const auto without = train_all(corpus, *emb, cfg);
  EXPECT_EQ(without.negatives, 0u);
  EXPECT_EQ(without.classifier_examples + with.negatives, with.classifier_examples);
  // The localizer does not see augmentation.
  EXPECT_EQ(without.models.localizer, with.models.localizer);
}

TEST(TrainAll, FixedSeedGivesIdenticalModelFiles) {
  const Corpus corpus = synthetic::generate({10, 5, 5});
  const PipelineConfig cfg = small_config();
  const auto emb = make_embedder(cfg.embedder);
  const fs::path a = temp_dir("a"), b = temp_dir("b");
  save_models(a, train_all(corpus, *emb, cfg).models, cfg);
  save_models(b, train_all(corpus, *emb, cfg).models, cfg);
  for (const char* f : {"localizer.json", "spanclass.json", "pipeline.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(TrainAll, WarmStartContinuesFromInit) {
  const Corpus corpus = synthetic::generate({10, 5, 6});
  PipelineConfig cfg = small_config();
  const auto emb = make_embedder(cfg.embedder);
  const auto first = train_all(corpus, *emb, cfg);
  const auto second = train_all(corpus, *emb, cfg, first.models);
  EXPECT_LT(second.localizer_log.epoch_loss.front(), first.localizer_log.epoch_loss.front());
  EXPECT_THROW(train_all(Corpus{}, *emb, cfg), ValidationError);
}

TEST(ModelDirectory, SaveLoadRoundTrip) {
  const Corpus corpus = synthetic::generate({10, 5, 7});
  PipelineConfig cfg = small_config();
  cfg.tau = 0.4;
  cfg.strict = true;
  const auto emb = make_embedder(cfg.embedder);
  const Models m = train_all(corpus, *emb, cfg).models;
  const fs::path dir = temp_dir("rt");
  save_models(dir, m, cfg);
  const ModelBundle b = load_models(dir);
  EXPECT_EQ(b.models.localizer, m.localizer);
  EXPECT_EQ(b.models.classifier, m.classifier);
  EXPECT_EQ(to_json(b.config), to_json(cfg));
  const auto loaded_emb = make_embedder(b.config.embedder);
  EXPECT_EQ(predict_corpus(corpus, b.models, *loaded_emb, b.config).size(), corpus.sentence_count());
  fs::remove_all(dir);
  EXPECT_THROW(load_models(dir), IoError);
}

TEST(PipelineConfig, ParsingAndOverrides) {
  const auto c = pipeline_config_from_json({{"threshold", 0.3}, {"seed", 9}, {"localizer_train", {{"lr", 0.1}}}});
  EXPECT_EQ(c.threshold, 0.3);
  EXPECT_EQ(c.tau, 0.5);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.localizer_train.seed, 9u);
  EXPECT_EQ(c.classifier_train.seed, 9u);
  EXPECT_EQ(c.localizer_train.lr, 0.1);
  EXPECT_EQ(c.classifier_train.lr, 5e-5);
  EXPECT_EQ(c.classifier_train.batch_size, 8u);
  EXPECT_EQ(c.classifier_train.epochs, 3u);
  EXPECT_THROW(pipeline_config_from_json({{"threshold", 0.0}}), ValidationError);
  EXPECT_THROW(pipeline_config_from_json({{"tau", "high"}}), ValidationError);
  const auto round = pipeline_config_from_json(to_json(c));
  EXPECT_EQ(to_json(round), to_json(c));
}
