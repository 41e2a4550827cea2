// Copyright 2026 The WerPred Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The werpred command line. Run() is the whole program minus main(), so
// tests can drive it in-process.
//
// Exit codes: 0 success, 2 usage or data error, 3 internal error.

#ifndef WERPRED_CLI_HPP_
#define WERPRED_CLI_HPP_

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "werpred/baseline/features.hpp"
#include "werpred/baseline/model.hpp"
#include "werpred/baseline/regressors.hpp"
#include "werpred/common.hpp"
#include "werpred/corpus.hpp"
#include "werpred/dsp.hpp"
#include "werpred/models/architectures.hpp"
#include "werpred/models/features.hpp"
#include "werpred/models/trainer.hpp"
#include "werpred/scoring.hpp"
#include "werpred/textfeat.hpp"

namespace werpred::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

namespace detail {

inline std::string Fmt(double v, const char* f = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

inline corpus::Dataset Load(const fs::path& manifest, std::ostream& err) {
  auto m = corpus::LoadManifest(manifest);
  if (m.dropped_empty_hyp > 0)
    err << "warning: " << manifest.string() << ": dropped " << m.dropped_empty_hyp
        << " utterance(s) with empty hypothesis\n";
  if (m.dataset.size() == 0) throw Error(manifest.string() + ": no utterances");
  return std::move(m.dataset);
}

// Prediction records joined with the manifest: reference WER and groups
// come from the manifest.
inline std::vector<scoring::PredictionRecord> Join(const std::vector<scoring::PredictionRecord>& preds,
                                                   const corpus::Dataset& d, const std::string& source) {
  std::map<std::string, const corpus::Utterance*> by_id;
  for (const auto& u : d.utterances) by_id[u.id] = &u;
  std::set<std::string> seen;
  std::vector<scoring::PredictionRecord> out;
  for (const auto& p : preds) {
    if (!seen.insert(p.id).second) throw Error(source + ": duplicate id " + p.id);
    const auto it = by_id.find(p.id);
    if (it == by_id.end()) throw Error(source + ": id " + p.id + " is not in the manifest");
    const auto& u = *it->second;
    if (!u.has_reference()) throw Error(source + ": id " + p.id + " has no reference transcript");
    auto r = p;
    r.wer_ref = scoring::Wer(scoring::AlignWords(*u.ref, u.hyp));
    r.group = {{"style", corpus::StyleName(u.style)}, {"show", u.show}};
    out.push_back(std::move(r));
  }
  if (out.empty()) throw Error(source + ": no predictions");
  return out;
}

inline std::optional<double> TryTau(const std::vector<scoring::PredictionRecord>& r, std::ostream& err) {
  try {
    return scoring::KendallTau(r);
  } catch (const Error& e) {
    err << "warning: kendall tau: " << e.what() << "\n";
    return std::nullopt;
  }
}

inline nlohmann::ordered_json OrNull(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

inline textfeat::EmbeddingTable LoadTable(const fs::path& path, std::ostream& err) {
  auto e = textfeat::LoadEmbeddings(path);
  for (const auto& w : e.warnings) err << "warning: " << path.string() << ": " << w << "\n";
  return std::move(e.table);
}

}  // namespace detail

// ---- commands --------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  std::size_t utterances = 1000, test = 0, vocab = 400;
  std::uint64_t seed = 1;
  double w_zero = 0.2, w_full = 0.2;
  bool no_audio = false;
};

inline int CmdSynth(const SynthArgs& a, std::ostream& out) {
  corpus::SynthConfig sc;
  sc.n_utterances = a.utterances;
  sc.n_test = a.test;
  sc.vocab_size = a.vocab;
  sc.seed = a.seed;
  sc.error_profile.w_zero = a.w_zero;
  sc.error_profile.w_full = a.w_full;
  sc.error_profile.w_mid = 1.0 - a.w_zero - a.w_full;
  sc.write_audio = !a.no_audio;
  fs::create_directories(a.out);
  const auto c = corpus::SynthesizeCorpus(sc, a.out / "audio");
  corpus::WriteSynthResources(c, sc, a.out);
  corpus::WriteManifest(a.out / "train.jsonl", c.Train());
  if (a.test > 0) corpus::WriteManifest(a.out / "test.jsonl", c.Test());
  out << "wrote " << c.Train().size() << " training and " << c.Test().size() << " test utterances to "
      << a.out.string() << "\n";
  return kExitOk;
}

inline int CmdScore(const fs::path& manifest, const fs::path& out_csv, std::ostream& err) {
  const auto d = detail::Load(manifest, err);
  std::string csv = "id,n_ref,substitutions,deletions,insertions,wer\n";
  for (const auto& u : d.utterances) {
    if (!u.has_reference()) {
      err << "warning: " << u.id << ": no reference, skipped\n";
      continue;
    }
    const auto a = scoring::AlignWords(*u.ref, u.hyp);
    csv += u.id + "," + std::to_string(a.n_ref) + "," + std::to_string(a.n_sub) + "," + std::to_string(a.n_del) +
           "," + std::to_string(a.n_ins) + "," + detail::Fmt(scoring::Wer(a), "%.6g") + "\n";
  }
  WriteFile(out_csv, csv);
  return kExitOk;
}

struct BaselineArgs {
  fs::path train, lexicon, phonemes, pos;
  std::string features = "pos+lex+lm";
  std::size_t lm_order = 5, jobs = 1;
};

inline std::vector<baseline::FeatureRow> ExtractRows(const baseline::FeatureExtractor& ex,
                                                     const corpus::Dataset& d,
                                                     const std::vector<baseline::Family>& fams,
                                                     const baseline::PosTags* tags, std::size_t jobs) {
  const auto cache = dsp::FeatureCache::FromEnvironment();
  std::vector<baseline::FeatureRow> rows(d.size());
  models::ParallelFor(d.size(), jobs, [&](std::size_t i) { rows[i] = ex.Extract(d.utterances[i], fams, tags, cache); });
  return rows;
}

inline int CmdExtract(const BaselineArgs& a, const fs::path& manifest, const fs::path& out_csv, std::ostream& err) {
  const auto fams = baseline::ParseFamilies(a.features);
  const auto tags = baseline::LoadPosTags(a.pos);
  const auto ex = baseline::FeatureExtractor::Fit(detail::Load(a.train, err), tags,
                                                  baseline::Lexicon::Load(a.lexicon, a.phonemes), {a.lm_order, {}});
  const auto rows = ExtractRows(ex, detail::Load(manifest, err), fams, &tags, a.jobs);
  WriteFile(out_csv, baseline::FeatureCsv(rows, fams, ex));
  return kExitOk;
}

struct TrainRegArgs {
  BaselineArgs base;
  fs::path out;
  std::string regressor = "extratrees";
  std::size_t trees = 100, min_leaf = 2;
  double lambda = 1.0;
  std::uint64_t seed = 1;
};

inline int CmdTrainReg(const TrainRegArgs& a, std::ostream& out, std::ostream& err) {
  baseline::RegressorConfig cfg;
  cfg.kind = baseline::ParseRegressor(a.regressor);
  cfg.families = baseline::ParseFamilies(a.base.features);
  cfg.trees = {a.trees, a.min_leaf, a.seed};
  cfg.lambda = a.lambda;
  const auto train = detail::Load(a.base.train, err);
  const auto tags = baseline::LoadPosTags(a.base.pos);
  const auto ex = baseline::FeatureExtractor::Fit(train, tags, baseline::Lexicon::Load(a.base.lexicon, a.base.phonemes),
                                                  {a.base.lm_order, {}});
  const auto rows = ExtractRows(ex, train, cfg.families, &tags, a.base.jobs);
  const auto reg = baseline::Regressor::Fit(rows, models::ReferenceWers(train), cfg);
  baseline::SaveBaseline(a.out, ex, reg, a.base.lexicon, a.base.phonemes);
  out << "trained " << baseline::RegressorName(cfg.kind) << " on " << baseline::FamiliesName(cfg.families) << " ("
      << rows.size() << " utterances)\n";
  return kExitOk;
}

struct TrainCnnArgs {
  fs::path train, out, embeddings;
  std::string input = "embed", head = "softmax", profile = "desk";
  std::size_t epochs = 50, restarts = 10, jobs = 1;
  std::uint64_t seed = 1;
  double dev_fraction = 0.1;
  bool verbose = false;
};

inline int CmdTrainCnn(const TrainCnnArgs& a, std::ostream& out, std::ostream& err) {
  const auto spec = models::Profile(a.profile, models::ParseInputs(a.input),
                                    a.head == "relu" ? models::HeadKind::kRelu : models::HeadKind::kSoftmax);
  const auto train = detail::Load(a.train, err);
  std::optional<textfeat::EmbeddingTable> table;
  if (spec.has_text()) {
    if (a.embeddings.empty()) throw Error("--embeddings is required for text input");
    table = detail::LoadTable(a.embeddings, err);
  }
  models::FeatureSource src{table ? &*table : nullptr, dsp::FeatureCache::FromEnvironment()};
  models::TrainProtocol p;
  p.epochs = a.epochs;
  p.restarts = a.restarts;
  p.seed = a.seed;
  p.jobs = a.jobs;
  p.dev_fraction = a.dev_fraction;
  const auto store = models::FeatureStore::Build(train, spec, src, a.jobs);
  auto res = models::Train(spec, store, models::ReferenceWers(train), p,
                           [&](std::size_t r, std::size_t e, const models::EpochLog& l) {
                             if (a.verbose)
                               err << "restart " << r << " epoch " << e + 1 << " train_mae " << detail::Fmt(l.train_mae)
                                   << " dev_mae " << detail::Fmt(l.dev_mae) << "\n";
                           });
  models::SaveModel(a.out, spec, res.net,
                    spec.has_text() ? std::optional<fs::path>(a.embeddings) : std::nullopt);
  WriteFile(a.out / "train_log.json", models::LogToJson(res).dump(2) + "\n");
  out << "selected restart " << res.best << " (dev MAE " << detail::Fmt(res.log[res.best].final_dev_mae())
      << ") for " << models::InputsName(spec.inputs) << " " << a.head << "\n";
  return kExitOk;
}

struct PredictArgs {
  fs::path model, manifest, out, embeddings, pos;
  std::size_t jobs = 1;
};

inline int CmdPredict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  const auto d = detail::Load(a.manifest, err);
  std::vector<scoring::PredictionRecord> recs;
  if (fs::exists(a.model / "model.json")) {
    const auto m = models::LoadModel(a.model);
    std::optional<textfeat::EmbeddingTable> table;
    if (m.spec.has_text()) {
      const fs::path emb = a.embeddings.empty() ? m.embeddings : a.embeddings;
      if (emb.empty()) throw Error("model has text input but no embedding table is recorded; pass --embeddings");
      table = detail::LoadTable(emb, err);
    }
    recs = models::PredictDataset(m.net, m.spec, d, {table ? &*table : nullptr, dsp::FeatureCache::FromEnvironment()},
                                  a.jobs);
  } else if (fs::exists(a.model / "regressor.json")) {
    const auto m = baseline::LoadBaseline(a.model);
    const auto& fams = m.regressor.families();
    std::optional<baseline::PosTags> tags;
    if (std::find(fams.begin(), fams.end(), baseline::Family::kPos) != fams.end()) {
      if (a.pos.empty()) throw Error("model uses POS features; pass --pos");
      tags = baseline::LoadPosTags(a.pos);
    }
    const auto rows = ExtractRows(m.extractor, d, fams, tags ? &*tags : nullptr, a.jobs);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto& u = d.utterances[i];
      scoring::PredictionRecord r;
      r.id = u.id;
      r.wer_pred = m.regressor.Predict(rows[i]);
      if (u.has_reference()) r.wer_ref = scoring::Wer(scoring::AlignWords(*u.ref, u.hyp));
      recs.push_back(std::move(r));
    }
  } else {
    throw Error(a.model.string() + ": not a model directory (no model.json or regressor.json)");
  }
  scoring::WritePredictions(a.out, recs);
  out << "wrote " << recs.size() << " predictions to " << a.out.string() << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  fs::path predictions, manifest, out;
  std::string label;
  double bin_width = 5.0;
};

inline int CmdEvaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const auto recs = detail::Join(scoring::ReadPredictions(a.predictions), detail::Load(a.manifest, err),
                                 a.predictions.string());
  fs::create_directories(a.out);
  const double mae = scoring::Mae(recs);
  const auto tau = detail::TryTau(recs, err);
  nlohmann::ordered_json m;
  if (!a.label.empty()) m["system"] = a.label;
  m["mae"] = mae;
  m["kendall_tau"] = detail::OrNull(tau);
  m["n"] = recs.size();
  WriteFile(a.out / "metrics.json", m.dump(2) + "\n");

  // Style rows first ("NS", "S", "NS + S"), then one row per show.
  std::string agg = "grouping,group,n,mean_wer_ref,mean_wer_pred\n";
  auto row = [&](const std::string& grouping, const scoring::AggregateRow& r, const std::string& name) {
    agg += grouping + "," + name + "," + std::to_string(r.n_utterances) + "," + detail::Fmt(r.mean_wer_ref) + "," +
           detail::Fmt(r.mean_wer_pred) + "\n";
  };
  for (const auto& r : scoring::Aggregate(recs, "style")) row("style", r, r.group == scoring::kAllGroup ? "NS + S" : r.group);
  const auto shows = scoring::Aggregate(recs, "show");
  for (std::size_t i = 0; i + 1 < shows.size(); ++i) row("show", shows[i], shows[i].group);
  WriteFile(a.out / "aggregate.csv", agg);

  std::vector<double> pred, ref;
  for (const auto& r : recs) {
    pred.push_back(r.wer_pred);
    ref.push_back(*r.wer_ref);
  }
  const auto hp = scoring::Histogram(pred, a.bin_width), hr = scoring::Histogram(ref, a.bin_width);
  std::string hist = "bin_start,bin_end,n_pred,n_ref\n";
  for (std::size_t k = 0; k < hp.size(); ++k) {
    const std::string end = k + 1 < hp.size() ? detail::Fmt(hp[k + 1].start, "%g") : "inf";
    hist += detail::Fmt(hp[k].start, "%g") + "," + end + "," + std::to_string(hp[k].count) + "," +
            std::to_string(hr[k].count) + "\n";
  }
  WriteFile(a.out / "histogram.csv", hist);
  out << "n " << recs.size() << " mae " << detail::Fmt(mae) << " kendall_tau "
      << (tau ? detail::Fmt(*tau) : std::string("undefined")) << "\n";
  return kExitOk;
}

inline int CmdCompare(const fs::path& pa, const fs::path& pb, const fs::path& manifest, const fs::path& out_json,
                      std::ostream& out, std::ostream& err) {
  const auto d = detail::Load(manifest, err);
  const auto a = detail::Join(scoring::ReadPredictions(pa), d, pa.string());
  const auto b = detail::Join(scoring::ReadPredictions(pb), d, pb.string());
  std::map<std::string, const scoring::PredictionRecord*> b_by_id;
  for (const auto& r : b) b_by_id[r.id] = &r;
  if (a.size() != b.size()) throw Error("prediction files cover different utterances");
  std::vector<double> ea, eb;
  for (const auto& r : a) {
    const auto it = b_by_id.find(r.id);
    if (it == b_by_id.end()) throw Error("id " + r.id + " is missing from " + pb.string());
    ea.push_back(std::abs(r.wer_pred - *r.wer_ref));
    eb.push_back(std::abs(it->second->wer_pred - *it->second->wer_ref));
  }
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < ea.size(); ++i) nonzero += ea[i] != eb[i];

  nlohmann::ordered_json rep;
  rep["n"] = a.size();
  rep["systems"] = nlohmann::ordered_json::array();
  for (const auto* s : {&a, &b}) {
    nlohmann::ordered_json j;
    j["predictions"] = (s == &a ? pa : pb).string();
    j["mae"] = scoring::Mae(*s);
    j["kendall_tau"] = detail::OrNull(detail::TryTau(*s, err));
    rep["systems"].push_back(j);
  }
  nlohmann::ordered_json w;
  w["nonzero_differences"] = nonzero;
  if (nonzero == 0) {
    w["p_value"] = nullptr;
    w["note"] = "no non-zero differences";
  } else if (nonzero < 3) {
    w["p_value"] = nullptr;
    w["note"] = "insufficient pairs";
  } else {
    const auto res = scoring::WilcoxonSignedRank(ea, eb);
    w["p_value"] = res.p_value;
    w["w_plus"] = res.w_plus;
    w["exact"] = res.exact;
  }
  rep["wilcoxon"] = w;
  const std::string text = rep.dump(2) + "\n";
  if (!out_json.empty()) WriteFile(out_json, text);
  out << text;
  if (w.contains("note")) out << w["note"].get<std::string>() << "\n";
  return kExitOk;
}

// Rows of "system,mae,kendall_tau,n" from evaluate's metrics.json files.
inline int CmdTable(const std::vector<fs::path>& metrics, const fs::path& out_csv, std::ostream& out) {
  std::string csv = "system,mae,kendall_tau,n\n";
  for (const auto& p : metrics) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(ReadFile(p));
      const auto tau = j.at("kendall_tau");
      csv += j.value("system", p.parent_path().filename().string()) + "," + detail::Fmt(j.at("mae").get<double>()) +
             "," + (tau.is_null() ? std::string() : detail::Fmt(tau.get<double>())) + "," +
             std::to_string(j.at("n").get<std::size_t>()) + "\n";
    } catch (const nlohmann::json::exception& e) {
      throw Error(p.string() + ": " + e.what());
    }
  }
  if (!out_csv.empty()) WriteFile(out_csv, csv);
  out << csv;
  return kExitOk;
}

// ---- entry point -----------------------------------------------------------

inline int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"werpred: predict the word error rate of ASR output"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic corpus with its side resources");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--utterances", synth.utterances, "Total utterances")->capture_default_str();
  c_synth->add_option("--test", synth.test, "Held-out test utterances")->capture_default_str();
  c_synth->add_option("--vocab", synth.vocab, "Vocabulary size")->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--w-zero", synth.w_zero, "Weight of the 0% WER spike")->capture_default_str();
  c_synth->add_option("--w-full", synth.w_full, "Weight of the 100% WER spike")->capture_default_str();
  c_synth->add_flag("--no-audio", synth.no_audio, "Skip writing audio");

  fs::path score_manifest, score_out;
  auto* c_score = app.add_subcommand("score", "Reference WER per utterance");
  c_score->add_option("--manifest", score_manifest)->required();
  c_score->add_option("--out", score_out, "CSV output")->required();

  auto add_baseline = [](CLI::App* c, BaselineArgs& b) {
    c->add_option("--train", b.train, "Training manifest (fits the LM and tag LM)")->required();
    c->add_option("--lexicon", b.lexicon, "Lexicon TSV")->required();
    c->add_option("--phonemes", b.phonemes, "Phoneme-category JSON")->required();
    c->add_option("--pos", b.pos, "POS tag sidecar")->required();
    c->add_option("--features", b.features, "Feature families, e.g. pos+lex+lm+sig")->capture_default_str();
    c->add_option("--lm-order", b.lm_order)->capture_default_str();
    c->add_option("--jobs", b.jobs, "Worker threads")->capture_default_str();
  };

  BaselineArgs extract;
  fs::path extract_manifest, extract_out;
  auto* c_extract = app.add_subcommand("extract", "Dump baseline features as CSV");
  add_baseline(c_extract, extract);
  c_extract->add_option("--manifest", extract_manifest, "Utterances to featurize")->required();
  c_extract->add_option("--out", extract_out, "CSV output")->required();

  TrainRegArgs treg;
  auto* c_treg = app.add_subcommand("train-reg", "Fit the regression baseline");
  add_baseline(c_treg, treg.base);
  c_treg->add_option("--out", treg.out, "Model directory")->required();
  c_treg->add_option("--regressor", treg.regressor)
      ->check(CLI::IsMember({"extratrees", "ridge"}))
      ->capture_default_str();
  c_treg->add_option("--trees", treg.trees)->capture_default_str();
  c_treg->add_option("--min-leaf", treg.min_leaf)->capture_default_str();
  c_treg->add_option("--lambda", treg.lambda)->capture_default_str();
  c_treg->add_option("--seed", treg.seed)->capture_default_str();

  TrainCnnArgs tcnn;
  auto* c_tcnn = app.add_subcommand("train-cnn", "Train a CNN predictor");
  c_tcnn->add_option("--train", tcnn.train, "Training manifest")->required();
  c_tcnn->add_option("--out", tcnn.out, "Model directory")->required();
  c_tcnn->add_option("--embeddings", tcnn.embeddings, "Word embedding table (text input)");
  c_tcnn->add_option("--input", tcnn.input)
      ->check(CLI::IsMember({"embed", "raw", "mel", "mfcc", "embed+raw", "embed+mel", "embed+mfcc"}))
      ->capture_default_str();
  c_tcnn->add_option("--head", tcnn.head)->check(CLI::IsMember({"softmax", "relu"}))->capture_default_str();
  c_tcnn->add_option("--profile", tcnn.profile, "desk, or paper for full-size layers")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  c_tcnn->add_option("--epochs", tcnn.epochs)->capture_default_str();
  c_tcnn->add_option("--restarts", tcnn.restarts)->capture_default_str();
  c_tcnn->add_option("--seed", tcnn.seed)->capture_default_str();
  c_tcnn->add_option("--dev-fraction", tcnn.dev_fraction)->capture_default_str();
  c_tcnn->add_option("--jobs", tcnn.jobs, "Worker threads")->capture_default_str();
  c_tcnn->add_flag("--verbose", tcnn.verbose, "Log every epoch to stderr");

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "Predict WER with a CNN or baseline model");
  c_pred->add_option("--model", pred.model, "Model directory")->required();
  c_pred->add_option("--manifest", pred.manifest)->required();
  c_pred->add_option("--out", pred.out, "Predictions (JSON lines)")->required();
  c_pred->add_option("--embeddings", pred.embeddings, "Override the recorded embedding table");
  c_pred->add_option("--pos", pred.pos, "POS tag sidecar (baseline with POS features)");
  c_pred->add_option("--jobs", pred.jobs, "Worker threads")->capture_default_str();

  EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Score predictions against references");
  c_eval->add_option("--predictions", eval.predictions)->required();
  c_eval->add_option("--manifest", eval.manifest)->required();
  c_eval->add_option("--out", eval.out, "Report directory")->required();
  c_eval->add_option("--label", eval.label, "System name recorded in metrics.json");
  c_eval->add_option("--bin-width", eval.bin_width)->capture_default_str();

  fs::path cmp_a, cmp_b, cmp_manifest, cmp_out;
  auto* c_cmp = app.add_subcommand("compare", "Compare two systems with a Wilcoxon signed-rank test");
  c_cmp->add_option("--a", cmp_a, "Predictions of system A")->required();
  c_cmp->add_option("--b", cmp_b, "Predictions of system B")->required();
  c_cmp->add_option("--manifest", cmp_manifest)->required();
  c_cmp->add_option("--out", cmp_out, "Also write the JSON report here");

  std::vector<fs::path> table_metrics;
  fs::path table_out;
  auto* c_table = app.add_subcommand("table", "Collect metrics.json files into one comparison table");
  c_table->add_option("metrics", table_metrics, "metrics.json files")->required();
  c_table->add_option("--out", table_out, "Also write the CSV here");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitData;
  }

  try {
    if (c_synth->parsed()) return CmdSynth(synth, out);
    if (c_score->parsed()) return CmdScore(score_manifest, score_out, err);
    if (c_extract->parsed()) return CmdExtract(extract, extract_manifest, extract_out, err);
    if (c_treg->parsed()) return CmdTrainReg(treg, out, err);
    if (c_tcnn->parsed()) return CmdTrainCnn(tcnn, out, err);
    if (c_pred->parsed()) return CmdPredict(pred, out, err);
    if (c_eval->parsed()) return CmdEvaluate(eval, out, err);
    if (c_cmp->parsed()) return CmdCompare(cmp_a, cmp_b, cmp_manifest, cmp_out, out, err);
    if (c_table->parsed()) return CmdTable(table_metrics, table_out, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace werpred::cli

#endif  // WERPRED_CLI_HPP_
