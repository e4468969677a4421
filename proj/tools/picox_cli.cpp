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

// Command-line front end: train, predict, evaluate, augment, sweep, and
// corpus conversion. Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "picox/picox.hpp"

namespace fs = std::filesystem;
using namespace picox;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

nlohmann::json read_json(const std::string& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("bad threshold \"" + item + "\"");
    }
  }
  if (out.empty()) throw ValidationError("empty threshold list");
  return out;
}

// Pipeline settings shared by several subcommands: config file first, flags
// on top.
struct PipelineFlags {
  std::string config_path;
  double threshold = localizer::kDefaultThreshold;
  double tau = spanclass::kDefaultTau;
  bool strict = false;
  std::string embeddings;

  CLI::Option* threshold_opt = nullptr;
  CLI::Option* tau_opt = nullptr;
  CLI::Option* strict_opt = nullptr;

  void add_to(CLI::App* app, bool with_threshold = true) {
    app->add_option("--config", config_path, "JSON pipeline config; flags override it");
    if (with_threshold) threshold_opt = app->add_option("--threshold", threshold, "boundary threshold in (0, 0.5]");
    tau_opt = app->add_option("--tau", tau, "span decision threshold in (0, 1)");
    strict_opt = app->add_flag("--strict", strict, "require start < end for candidates");
    app->add_option("--embeddings", embeddings, "PCXE file to use instead of the configured embedder");
  }

  PipelineConfig apply(PipelineConfig cfg) const {
    if (!config_path.empty()) cfg = pipeline_config_from_json(read_json(config_path), cfg);
    if (threshold_opt && threshold_opt->count()) cfg.threshold = threshold;
    if (tau_opt->count()) cfg.tau = tau;
    if (strict_opt->count()) cfg.strict = strict;
    if (!embeddings.empty()) cfg.embedder = {{"kind", "file"}, {"path", embeddings}};
    validate(cfg);
    return cfg;
  }
};

void print_report(const EvalReport& r) {
  auto line = [](std::string_view name, const Prf& m) {
    std::cout << "  " << name << "\tP=" << m.precision << "\tR=" << m.recall << "\tF1=" << m.f1 << '\n';
  };
  for (Category c : kCategories) line(category_code(c), r.overall.per_category[index_of(c)]);
  line("micro", r.overall.micro);
  line("macro", r.overall.macro);
  for (const auto& [name, core] : r.groups) line(name + " (micro)", core.micro);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Overlapping span extraction: boundary localization + multi-label span classification"};
  app.require_subcommand(1);

  // train
  std::string corpus_path, out_path, init_from, models_dir;
  bool no_augment = false;
  double val_fraction = 0.05;
  std::uint64_t seed = 0;
  std::size_t dim = 256;
  std::size_t batch_size = 8;
  std::size_t loc_epochs = 3, cls_epochs = 3;
  double loc_lr = 5e-5, cls_lr = 5e-5;
  std::string optimizer = "sgd";
  PipelineFlags train_flags;
  auto* train = app.add_subcommand("train", "train both heads on a JSONL corpus");
  train->add_option("--corpus", corpus_path, "training corpus (JSONL)")->required();
  train->add_option("--out", out_path, "model directory to write")->required();
  train->add_flag("--no-augment", no_augment, "train the span classifier without composite negatives");
  train->add_option("--init-from", init_from, "model directory to continue training from");
  train->add_option("--val-fraction", val_fraction, "fraction of documents held out for validation")
      ->check(CLI::Range(0.0, 1.0));
  auto* seed_opt = train->add_option("--seed", seed, "random seed");
  auto* dim_opt = train->add_option("--dim", dim, "hashed embedder dimension");
  auto* batch_opt = train->add_option("--batch-size", batch_size);
  auto* loc_epochs_opt = train->add_option("--localizer-epochs", loc_epochs);
  auto* cls_epochs_opt = train->add_option("--classifier-epochs", cls_epochs);
  auto* loc_lr_opt = train->add_option("--localizer-lr", loc_lr);
  auto* cls_lr_opt = train->add_option("--classifier-lr", cls_lr);
  auto* opt_opt = train->add_option("--optimizer", optimizer)->check(CLI::IsMember({"sgd", "adam"}));
  train_flags.add_to(train);

  // predict
  std::string pred_out;
  PipelineFlags predict_flags;
  auto* predict_cmd = app.add_subcommand("predict", "extract labeled spans");
  predict_cmd->add_option("--corpus", corpus_path)->required();
  predict_cmd->add_option("--models", models_dir)->required();
  predict_cmd->add_option("--out", pred_out, "prediction JSONL")->required();
  predict_flags.add_to(predict_cmd);

  // evaluate
  std::string pred_path, gold_path, group = "none", csv_path;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "exact-match span scoring");
  evaluate_cmd->add_option("--pred", pred_path)->required();
  evaluate_cmd->add_option("--gold", gold_path)->required();
  evaluate_cmd->add_option("--group", group)->check(CLI::IsMember({"none", "overlap", "length"}));
  evaluate_cmd->add_option("--out", out_path, "report JSON");
  evaluate_cmd->add_option("--csv", csv_path, "flat CSV report");

  // compare
  std::string pred_b;
  auto* compare_cmd = app.add_subcommand("compare", "paired t-test over per-document micro F1 of two systems");
  compare_cmd->add_option("--pred-a", pred_path)->required();
  compare_cmd->add_option("--pred-b", pred_b)->required();
  compare_cmd->add_option("--gold", gold_path)->required();

  // augment
  auto* augment_cmd = app.add_subcommand("augment", "dump composite-span negatives");
  augment_cmd->add_option("--corpus", corpus_path)->required();
  augment_cmd->add_option("--out", out_path)->required();

  // sweep
  std::string thresholds = "0.2,0.25,0.3,0.4,0.5";
  PipelineFlags sweep_flags;
  auto* sweep_cmd = app.add_subcommand("sweep", "precision/recall across boundary thresholds");
  sweep_cmd->add_option("--corpus", corpus_path)->required();
  sweep_cmd->add_option("--models", models_dir)->required();
  sweep_cmd->add_option("--thresholds", thresholds, "comma-separated list");
  sweep_cmd->add_option("--out", out_path, "curve (.csv or .json)")->required();
  sweep_flags.add_to(sweep_cmd, false);

  // conversions and utilities
  auto* export_cmd = app.add_subcommand("export-iob2", "write a non-overlapping corpus as IOB2");
  export_cmd->add_option("--corpus", corpus_path)->required();
  export_cmd->add_option("--out", out_path)->required();

  std::string in_path, doc_id = "doc";
  auto* import_cmd = app.add_subcommand("import-iob2", "read IOB2 into JSONL");
  import_cmd->add_option("--in", in_path)->required();
  import_cmd->add_option("--out", out_path)->required();
  import_cmd->add_option("--doc-id", doc_id, "document id when the file has no -DOCSTART- lines");

  std::string train_out, val_out;
  double fraction = 0.05;
  auto* split_cmd = app.add_subcommand("split", "document-level train/validation split");
  split_cmd->add_option("--corpus", corpus_path)->required();
  split_cmd->add_option("--fraction", fraction)->check(CLI::Range(0.0, 1.0));
  split_cmd->add_option("--seed", seed);
  split_cmd->add_option("--train-out", train_out)->required();
  split_cmd->add_option("--val-out", val_out)->required();

  std::size_t sentences = 50;
  double distractors = 0.0;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic nested-entity corpus");
  synth_cmd->add_option("--out", out_path)->required();
  synth_cmd->add_option("--sentences", sentences);
  synth_cmd->add_option("--seed", seed);
  synth_cmd->add_option("--distractors", distractors, "rate of extra standalone entities")
      ->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      PipelineConfig cfg;
      std::optional<Models> init;
      if (!init_from.empty()) {
        auto bundle = load_models(init_from);
        cfg = bundle.config;
        init = std::move(bundle.models);
      }
      cfg = train_flags.apply(cfg);
      if (no_augment) cfg.augmentation = false;
      if (seed_opt->count()) {
        cfg.seed = seed;
        cfg.localizer_train.seed = cfg.classifier_train.seed = seed;
      }
      if (dim_opt->count()) {
        if (init) throw ValidationError("--dim cannot change the dimension of --init-from models");
        cfg.embedder = HashedEmbedder({dim, cfg.seed, 1, false}).config();
      }
      if (batch_opt->count()) cfg.localizer_train.batch_size = cfg.classifier_train.batch_size = batch_size;
      if (loc_epochs_opt->count()) cfg.localizer_train.epochs = loc_epochs;
      if (cls_epochs_opt->count()) cfg.classifier_train.epochs = cls_epochs;
      if (loc_lr_opt->count()) cfg.localizer_train.lr = loc_lr;
      if (cls_lr_opt->count()) cfg.classifier_train.lr = cls_lr;
      if (opt_opt->count()) {
        const auto kind = optimizer == "adam" ? OptimizerKind::adam : OptimizerKind::sgd;
        cfg.localizer_train.optimizer = cfg.classifier_train.optimizer = kind;
      }

      const Corpus corpus = read_corpus_file(corpus_path);
      if (corpus.sentence_count() == 0) throw ValidationError("empty training corpus");
      const auto parts = split(corpus, val_fraction, cfg.seed);
      const auto embedder = make_embedder(cfg.embedder);
      if (init) check_dims(*init, *embedder);

      const TrainResult result = train_all(parts.train, *embedder, cfg, init);
      save_models(out_path, result.models, cfg);
      save_train_log(out_path, result);
      std::cout << "localizer loss by epoch:";
      for (double l : result.localizer_log.epoch_loss) std::cout << ' ' << l;
      std::cout << "\nclassifier loss by epoch:";
      for (double l : result.classifier_log.epoch_loss) std::cout << ' ' << l;
      std::cout << "\nclassifier examples: " << result.classifier_examples << " (" << result.negatives
                << " composite negatives)\n";
      if (parts.validation.sentence_count() > 0) {
        const auto report = evaluate(predict_corpus(parts.validation, result.models, *embedder, cfg), parts.validation);
        std::cout << "validation (" << parts.validation.documents.size() << " documents):\n";
        print_report(report);
        detail::write_json_file(fs::path(out_path) / "validation_report.json", to_json(report));
      }
      std::cout << "models written to " << out_path << '\n';
    } else if (*predict_cmd) {
      auto bundle = load_models(models_dir);
      const PipelineConfig cfg = predict_flags.apply(bundle.config);
      const auto embedder = make_embedder(cfg.embedder);
      const Corpus corpus = read_corpus_file(corpus_path);
      auto out = open_out(pred_out);
      write_predictions(out, predict_corpus(corpus, bundle.models, *embedder, cfg));
    } else if (*evaluate_cmd) {
      auto in = open_in(pred_path);
      const Predictions preds = read_predictions(in);
      const Corpus gold = read_corpus_file(gold_path);
      const Grouping g = group == "overlap" ? Grouping::overlap : group == "length" ? Grouping::length : Grouping::none;
      const EvalReport report = evaluate(preds, gold, g);
      print_report(report);
      if (!out_path.empty()) open_out(out_path) << to_json(report).dump(2) << '\n';
      if (!csv_path.empty()) {
        auto csv = open_out(csv_path);
        write_csv(csv, report);
      }
    } else if (*compare_cmd) {
      auto in_a = open_in(pred_path);
      auto in_b = open_in(pred_b);
      const Corpus gold = read_corpus_file(gold_path);
      const auto a = per_document_f1(read_predictions(in_a), gold);
      const auto b = per_document_f1(read_predictions(in_b), gold);
      const auto r = paired_test(a, b);
      std::cout << nlohmann::json{{"documents", r.n},
                                  {"t_statistic", r.t_statistic},
                                  {"p_value", r.p_value},
                                  {"zero_variance", r.zero_variance}}
                       .dump(2)
                << '\n';
    } else if (*augment_cmd) {
      const Corpus corpus = read_corpus_file(corpus_path);
      auto out = open_out(out_path);
      std::size_t total = 0;
      corpus.for_each_sentence([&](const Sentence& s) {
        nlohmann::json spans = nlohmann::json::array();
        for (const auto& [start, end] : augment::sentence_negatives(s)) {
          spans.push_back({{"start", start}, {"end", end}, {"category", "NONE"}, {"score", 0.0}});
          ++total;
        }
        out << nlohmann::json{{"uid", s.uid}, {"spans", std::move(spans)}}.dump() << '\n';
      });
      std::cout << total << " composite negatives\n";
    } else if (*sweep_cmd) {
      auto bundle = load_models(models_dir);
      const PipelineConfig cfg = sweep_flags.apply(bundle.config);
      const auto embedder = make_embedder(cfg.embedder);
      const Corpus corpus = read_corpus_file(corpus_path);
      const auto ts = parse_list(thresholds);
      const auto rows = sweep_threshold(corpus, bundle.models, *embedder, ts, cfg);
      auto out = open_out(out_path);
      if (fs::path(out_path).extension() == ".json") {
        nlohmann::json j = nlohmann::json::array();
        for (const SweepRow& r : rows)
          j.push_back({{"threshold", r.threshold},
                       {"precision", r.micro.precision},
                       {"recall", r.micro.recall},
                       {"f1", r.micro.f1},
                       {"macro_f1", r.macro.f1},
                       {"candidates", r.candidates},
                       {"predicted", r.predicted}});
        out << j.dump(2) << '\n';
      } else {
        write_sweep_csv(out, rows);
      }
      write_sweep_csv(std::cout, rows);
    } else if (*export_cmd) {
      const Corpus corpus = read_corpus_file(corpus_path);
      std::ostringstream buf;  // nothing is written if an overlap is found
      export_iob2(buf, corpus);
      open_out(out_path) << buf.str();
    } else if (*import_cmd) {
      auto in = open_in(in_path);
      write_corpus_file(out_path, import_iob2(in, doc_id));
    } else if (*split_cmd) {
      const auto parts = split(read_corpus_file(corpus_path), fraction, seed);
      write_corpus_file(train_out, parts.train);
      write_corpus_file(val_out, parts.validation);
      std::cout << parts.train.documents.size() << " train / " << parts.validation.documents.size()
                << " validation documents\n";
    } else if (*synth_cmd) {
      synthetic::Options opt;
      opt.sentences = sentences;
      opt.seed = seed;
      opt.distractor_rate = distractors;
      write_corpus_file(out_path, synthetic::generate(opt));
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
