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

// Two-stage prediction (boundaries, then span typing), the training driver
// for both heads, threshold sweeps, and model-directory persistence.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"
#include "picox/augment.hpp"
#include "picox/corpus.hpp"
#include "picox/embedder.hpp"
#include "picox/errors.hpp"
#include "picox/evaluator.hpp"
#include "picox/linear.hpp"
#include "picox/localizer.hpp"
#include "picox/spanclass.hpp"

namespace picox {

struct PipelineConfig {
  double threshold = localizer::kDefaultThreshold;
  double tau = spanclass::kDefaultTau;
  /// Require start < end, which excludes single-token spans.
  bool strict = false;
  bool augmentation = true;
  std::uint64_t seed = 0;
  nlohmann::json embedder = HashedEmbedder().config();
  TrainConfig localizer_train;
  TrainConfig classifier_train;
};

inline void validate(const PipelineConfig& c) {
  if (!(c.threshold > 0.0 && c.threshold <= 0.5)) throw ValidationError("boundary threshold must lie in (0, 0.5]");
  if (!(c.tau > 0.0 && c.tau < 1.0)) throw ValidationError("decision threshold must lie in (0, 1)");
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"threshold", c.threshold},
          {"tau", c.tau},
          {"strict", c.strict},
          {"augmentation", c.augmentation},
          {"seed", c.seed},
          {"embedder", c.embedder},
          {"localizer_train", to_json(c.localizer_train)},
          {"classifier_train", to_json(c.classifier_train)}};
}

/// Fields absent from `j` keep their value in `base`. A top-level "seed"
/// also seeds both training runs unless they name their own.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {}) {
  try {
    base.threshold = j.value("threshold", base.threshold);
    base.tau = j.value("tau", base.tau);
    base.strict = j.value("strict", base.strict);
    base.augmentation = j.value("augmentation", base.augmentation);
    if (j.contains("seed")) {
      base.seed = j.at("seed").get<std::uint64_t>();
      base.localizer_train.seed = base.seed;
      base.classifier_train.seed = base.seed;
    }
    if (j.contains("embedder")) base.embedder = j.at("embedder");
    if (j.contains("localizer_train"))
      base.localizer_train = train_config_from_json(j.at("localizer_train"), base.localizer_train);
    if (j.contains("classifier_train"))
      base.classifier_train = train_config_from_json(j.at("classifier_train"), base.classifier_train);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed pipeline config: ") + e.what());
  }
  validate(base);
  return base;
}

// ---------------------------------------------------------------------------
// Candidates and prediction

/// Every start x end pair with start <= end (start < end when `strict`),
/// ordered by (start, end). No length cap.
inline std::vector<SpanCandidate> enumerate_candidates(const BoundarySet& bounds, const std::string& uid = {},
                                                       bool strict = false) {
  std::vector<SpanCandidate> out;
  for (std::size_t s : bounds.starts)
    for (std::size_t e : bounds.ends)
      if (strict ? s < e : s <= e) out.push_back({uid, s, e});
  std::sort(out.begin(), out.end());
  return out;
}

struct Models {
  LocalizerModel localizer;
  ClassifierModel classifier;
};

inline void check_dims(const Models& m, const Embedder& embedder) {
  if (m.localizer.dim != embedder.dim())
    throw ValidationError("dimension mismatch: localizer expects " + std::to_string(m.localizer.dim) +
                          ", embedder gives " + std::to_string(embedder.dim()));
  if (m.classifier.dim != embedder.span_dim())
    throw ValidationError("dimension mismatch: classifier expects " + std::to_string(m.classifier.dim) +
                          ", embedder gives " + std::to_string(embedder.span_dim()));
}

inline void sort_spans(std::vector<LabeledSpan>& spans) {
  std::sort(spans.begin(), spans.end(), [](const LabeledSpan& a, const LabeledSpan& b) {
    return std::tie(a.start, a.end, a.category) < std::tie(b.start, b.end, b.category);
  });
}

/// Labeled spans for one sentence, sorted by (start, end, category).
inline std::vector<LabeledSpan> predict(const Sentence& sentence, const Models& models, const Embedder& embedder,
                                        const PipelineConfig& cfg) {
  validate(cfg);
  check_dims(models, embedder);
  if (sentence.tokens.empty()) return {};
  const BoundaryProbMatrix probs = localizer::forward(models.localizer, embedder.encode_tokens(sentence));
  const auto candidates = enumerate_candidates(localizer::decode(probs, cfg.threshold), sentence.uid, cfg.strict);
  auto spans = spanclass::classify(models.classifier, candidates, embedder, sentence, cfg.tau);
  sort_spans(spans);
  return spans;
}

inline Predictions predict_corpus(const Corpus& corpus, const Models& models, const Embedder& embedder,
                                  const PipelineConfig& cfg) {
  Predictions out;
  corpus.for_each_sentence(
      [&](const Sentence& s) { out.push_back({s.uid, predict(s, models, embedder, cfg)}); });
  return out;
}

// ---------------------------------------------------------------------------
// Threshold sweep

struct SweepRow {
  double threshold = 0.0;
  Prf micro;
  Prf macro;
  std::size_t candidates = 0;
  std::size_t predicted = 0;
};

/// Full predict + evaluate at each threshold. Localizer probabilities are
/// computed once per sentence and span scores are cached across thresholds.
inline std::vector<SweepRow> sweep_threshold(const Corpus& corpus, const Models& models, const Embedder& embedder,
                                             std::span<const double> thresholds, const PipelineConfig& cfg) {
  check_dims(models, embedder);
  for (double t : thresholds)
    if (!(t > 0.0 && t <= 0.5)) throw ValidationError("boundary threshold must lie in (0, 0.5]");
  if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) throw ValidationError("decision threshold must lie in (0, 1)");

  std::vector<SweepRow> rows(thresholds.size());
  std::vector<Predictions> preds(thresholds.size());
  corpus.for_each_sentence([&](const Sentence& s) {
    if (s.tokens.empty()) return;
    const BoundaryProbMatrix probs = localizer::forward(models.localizer, embedder.encode_tokens(s));
    std::map<std::pair<std::size_t, std::size_t>, CategoryScores> cache;
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      const auto cands = enumerate_candidates(localizer::decode(probs, thresholds[k]), s.uid, cfg.strict);
      rows[k].candidates += cands.size();
      SentencePrediction sp{s.uid, {}};
      for (const SpanCandidate& c : cands) {
        auto [it, fresh] = cache.try_emplace({c.start, c.end});
        if (fresh) it->second = spanclass::forward(models.classifier, embedder.encode_span(s, c.start, c.end));
        for (Category cat : kCategories)
          if (it->second[index_of(cat)] >= cfg.tau)
            sp.spans.push_back({c.start, c.end, cat, it->second[index_of(cat)], it->second});
      }
      rows[k].predicted += sp.spans.size();
      preds[k].push_back(std::move(sp));
    }
  });
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const EvalReport r = evaluate(preds[k], corpus);
    rows[k].threshold = thresholds[k];
    rows[k].micro = r.overall.micro;
    rows[k].macro = r.overall.macro;
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "threshold,precision,recall,f1,macro_f1,candidates,predicted\n";
  for (const SweepRow& r : rows)
    out << r.threshold << ',' << r.micro.precision << ',' << r.micro.recall << ',' << r.micro.f1 << ','
        << r.macro.f1 << ',' << r.candidates << ',' << r.predicted << '\n';
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  Models models;
  TrainLog localizer_log;
  TrainLog classifier_log;
  std::size_t classifier_examples = 0;
  std::size_t negatives = 0;
};

/// Trains the boundary head on gold position labels and the span head on
/// gold spans (plus composite negatives when augmentation is on). The two
/// stages are fit independently. `init` warm-starts both heads.
inline TrainResult train_all(const Corpus& corpus, const Embedder& embedder, const PipelineConfig& cfg,
                             const std::optional<Models>& init = std::nullopt) {
  std::vector<localizer::Example> loc_data;
  corpus.for_each_sentence([&](const Sentence& s) {
    if (!s.tokens.empty()) loc_data.push_back({embedder.encode_tokens(s), derive_position_labels(s)});
  });
  if (loc_data.empty()) throw ValidationError("empty training corpus");

  auto cls_data = augment::build_training_set(corpus, embedder, cfg.augmentation);
  if (cls_data.empty()) throw ValidationError("training corpus has no entities");

  TrainResult out;
  out.classifier_examples = cls_data.size();
  out.negatives = static_cast<std::size_t>(std::count_if(cls_data.begin(), cls_data.end(), [](const auto& ex) {
    return std::all_of(ex.gold.begin(), ex.gold.end(), [](double y) { return y == 0.0; });
  }));

  auto loc = localizer::fit(loc_data, cfg.localizer_train,
                            init ? std::optional<LocalizerModel>(init->localizer) : std::nullopt);
  auto cls = spanclass::fit(cls_data, cfg.classifier_train,
                            init ? std::optional<ClassifierModel>(init->classifier) : std::nullopt);
  out.models = {std::move(loc.model), std::move(cls.model)};
  out.localizer_log = std::move(loc.log);
  out.classifier_log = std::move(cls.log);
  return out;
}

// ---------------------------------------------------------------------------
// Model directory: localizer.json, spanclass.json, pipeline.json

namespace detail {

inline void write_json_file(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(1) << '\n';
}

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

}  // namespace detail

inline void save_models(const std::filesystem::path& dir, const Models& m, const PipelineConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  detail::write_json_file(dir / "localizer.json", localizer::to_json(m.localizer, cfg.localizer_train));
  detail::write_json_file(dir / "spanclass.json", spanclass::to_json(m.classifier, cfg.classifier_train));
  detail::write_json_file(dir / "pipeline.json", to_json(cfg));
}

inline void save_train_log(const std::filesystem::path& dir, const TrainResult& r) {
  detail::write_json_file(dir / "train_log.json", {{"localizer_epoch_loss", r.localizer_log.epoch_loss},
                                                   {"classifier_epoch_loss", r.classifier_log.epoch_loss},
                                                   {"classifier_examples", r.classifier_examples},
                                                   {"negatives", r.negatives}});
}

struct ModelBundle {
  Models models;
  PipelineConfig config;
};

inline ModelBundle load_models(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("missing model directory " + dir.string());
  ModelBundle b;
  b.models.localizer = localizer::from_json(detail::read_json_file(dir / "localizer.json"));
  b.models.classifier = spanclass::from_json(detail::read_json_file(dir / "spanclass.json"));
  b.config = pipeline_config_from_json(detail::read_json_file(dir / "pipeline.json"));
  return b;
}

}  // namespace picox
