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

// Training with restarts and dev-set selection, and dataset prediction.

#ifndef WERPRED_MODELS_TRAINER_HPP_
#define WERPRED_MODELS_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "werpred/common.hpp"
#include "werpred/corpus.hpp"
#include "werpred/models/architectures.hpp"
#include "werpred/models/features.hpp"
#include "werpred/nn/checkpoint.hpp"
#include "werpred/nn/network.hpp"
#include "werpred/nn/optim.hpp"
#include "werpred/scoring.hpp"

namespace werpred::models {

struct TrainProtocol {
  std::size_t epochs = 50;
  std::size_t restarts = 10;
  double dev_fraction = 0.1;
  std::uint64_t seed = 1;
  nn::AdadeltaConfig optimizer;
  double target_max = 150.0;  // targets are clipped to [0, target_max]
  std::size_t jobs = 1;

  void Validate() const {
    if (epochs < 1) throw Error("epochs must be at least 1");
    if (restarts < 1) throw Error("restarts must be at least 1");
    optimizer.Validate();
  }
};

struct EpochLog {
  double train_mae = 0.0;  // mean of mini-batch losses over the epoch
  double dev_mae = 0.0;
};

struct RestartLog {
  std::uint64_t seed = 0;
  std::vector<EpochLog> epochs;

  double final_dev_mae() const { return epochs.back().dev_mae; }
};

struct TrainResult {
  nn::Network<float> net;
  std::size_t best = 0;
  std::vector<RestartLog> log;
};

// Index of the restart with the smallest final dev MAE; ties go to the
// earliest restart.
inline std::size_t SelectRestart(const std::vector<RestartLog>& log) {
  if (log.empty()) throw Error("no restarts to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < log.size(); ++i)
    if (log[i].final_dev_mae() < log[best].final_dev_mae()) best = i;
  return best;
}

// Eval-mode predictions for every item of `store`, in order.
inline std::vector<double> PredictStore(const nn::Network<float>& net, const FeatureStore& store,
                                        std::size_t batch = 32) {
  std::vector<double> out;
  out.reserve(store.size());
  for (std::size_t lo = 0; lo < store.size(); lo += batch) {
    std::vector<std::size_t> idx(std::min(batch, store.size() - lo));
    std::iota(idx.begin(), idx.end(), lo);
    for (double v : nn::Scalars(net.Infer(store.Gather(idx)))) out.push_back(v);
  }
  return out;
}

namespace detail {

inline double MeanAbs(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
  return PairwiseSum(d) / static_cast<double>(d.size());
}

// Items selected by `mask == want`, as a sub-store view by index list.
inline std::vector<std::size_t> Where(const std::vector<bool>& mask, bool want) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] == want) out.push_back(i);
  return out;
}

inline void Shuffle(std::vector<std::size_t>& v, std::uint64_t restart_seed, std::size_t epoch) {
  std::mt19937_64 rng(restart_seed * 0x9E3779B97F4A7C15ull + epoch + 1);
  std::shuffle(v.begin(), v.end(), rng);
}

}  // namespace detail

using EpochCallback = std::function<void(std::size_t restart, std::size_t epoch, const EpochLog&)>;

// One training run from `seed` over `train_idx`, evaluated on `dev_idx` after
// every epoch.
inline RestartLog TrainOnce(nn::Network<float>& net, const ModelSpec& spec, const FeatureStore& store,
                            const std::vector<double>& targets, const std::vector<std::size_t>& train_idx,
                            const std::vector<std::size_t>& dev_idx, const TrainProtocol& p, std::uint64_t seed,
                            const std::function<void(std::size_t, const EpochLog&)>& on_epoch = {}) {
  net.Init(seed);
  if (spec.head.kind == HeadKind::kRelu) {
    // Start the scalar head at the mean target so the ReLU is live.
    double mean = 0.0;
    for (auto i : train_idx) mean += targets[i];
    HeadDense(net).bias().value.Fill(static_cast<float>(mean / static_cast<double>(train_idx.size())));
  }
  nn::Adadelta<float> opt(p.optimizer);
  opt.Reset(net.Params());
  RestartLog log{seed, {}};
  std::vector<std::size_t> order = train_idx;
  std::vector<double> dev_targets;
  for (auto i : dev_idx) dev_targets.push_back(targets[i]);
  const std::size_t bs = p.optimizer.batch_size;
  for (std::size_t e = 0; e < p.epochs; ++e) {
    detail::Shuffle(order, seed, e);
    net.set_mode(nn::Mode::kTrain);
    double loss_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += bs) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(lo),
                                         order.begin() + static_cast<long>(std::min(order.size(), lo + bs)));
      std::vector<double> y;
      for (auto i : idx) y.push_back(targets[i]);
      net.ZeroGrad();
      const auto out = net.Forward(store.Gather(idx));
      const auto loss = nn::MaeLoss(nn::Scalars(out), y);
      net.Backward(nn::ScalarBatch<float>(loss.grad));
      opt.Step(net.Params());
      loss_sum += loss.loss;
      ++n_batches;
    }
    net.set_mode(nn::Mode::kEval);
    EpochLog el{loss_sum / static_cast<double>(n_batches), 0.0};
    std::vector<double> dev_pred;
    for (std::size_t lo = 0; lo < dev_idx.size(); lo += bs) {
      const std::vector<std::size_t> idx(dev_idx.begin() + static_cast<long>(lo),
                                         dev_idx.begin() + static_cast<long>(std::min(dev_idx.size(), lo + bs)));
      for (double v : nn::Scalars(net.Infer(store.Gather(idx)))) dev_pred.push_back(v);
    }
    el.dev_mae = detail::MeanAbs(dev_pred, dev_targets);
    log.epochs.push_back(el);
    if (on_epoch) on_epoch(e, el);
  }
  return log;
}

// Restarts run from seeds seed, seed+1, ...; all share one dev split. The
// returned network is the restart with minimal final dev MAE, in eval mode.
inline TrainResult Train(const ModelSpec& spec, const FeatureStore& store, const std::vector<double>& wer_ref,
                         const TrainProtocol& p, const EpochCallback& on_epoch = {}) {
  p.Validate();
  if (store.size() != wer_ref.size()) throw Error("feature and target counts differ");
  if (store.size() < 2) throw Error("training needs at least 2 utterances with reference WER");
  std::vector<double> targets(wer_ref.size());
  for (std::size_t i = 0; i < wer_ref.size(); ++i) {
    if (!std::isfinite(wer_ref[i])) throw Error("non-finite reference WER");
    targets[i] = std::clamp(wer_ref[i], 0.0, p.target_max);
  }
  const auto mask = corpus::DevMask(store.size(), p.dev_fraction, p.seed);
  const auto train_idx = detail::Where(mask, false), dev_idx = detail::Where(mask, true);

  std::vector<nn::Network<float>> nets(p.restarts);
  std::vector<RestartLog> logs(p.restarts);
  std::mutex mu;
  ParallelFor(p.restarts, p.jobs, [&](std::size_t r) {
    nets[r] = BuildNetwork<float>(spec);
    logs[r] = TrainOnce(nets[r], spec, store, targets, train_idx, dev_idx, p, p.seed + r,
                        [&](std::size_t e, const EpochLog& el) {
                          if (!on_epoch) return;
                          std::lock_guard<std::mutex> lock(mu);
                          on_epoch(r, e, el);
                        });
  });
  TrainResult res;
  res.best = SelectRestart(logs);
  res.net = std::move(nets[res.best]);
  res.net.set_mode(nn::Mode::kEval);
  res.log = std::move(logs);
  return res;
}

inline nlohmann::ordered_json LogToJson(const TrainResult& r) {
  nlohmann::ordered_json j;
  j["selected_restart"] = r.best;
  j["restarts"] = nlohmann::ordered_json::array();
  for (const auto& rl : r.log) {
    nlohmann::ordered_json e = nlohmann::ordered_json::array();
    for (const auto& ep : rl.epochs) e.push_back({{"train_mae", ep.train_mae}, {"dev_mae", ep.dev_mae}});
    j["restarts"].push_back({{"seed", rl.seed}, {"epochs", e}});
  }
  return j;
}

// Predictions for a dataset; reference WER and style/show groups are filled
// in when available.
inline std::vector<scoring::PredictionRecord> PredictDataset(const nn::Network<float>& net, const ModelSpec& spec,
                                                             const corpus::Dataset& d, const FeatureSource& src,
                                                             std::size_t jobs = 1) {
  const auto store = FeatureStore::Build(d, spec, src, jobs);
  std::vector<double> pred(d.size());
  const std::size_t bs = 32;
  const std::size_t n_chunks = (d.size() + bs - 1) / bs;
  ParallelFor(n_chunks, jobs, [&](std::size_t c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = c * bs; i < std::min(d.size(), (c + 1) * bs); ++i) idx.push_back(i);
    const auto y = nn::Scalars(net.Infer(store.Gather(idx)));
    for (std::size_t k = 0; k < idx.size(); ++k) pred[idx[k]] = y[k];
  });
  std::vector<scoring::PredictionRecord> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& u = d.utterances[i];
    scoring::PredictionRecord r;
    r.id = u.id;
    if (u.has_reference()) r.wer_ref = scoring::Wer(scoring::AlignWords(*u.ref, u.hyp));
    r.wer_pred = pred[i];
    r.group = {{"style", corpus::StyleName(u.style)}, {"show", u.show}};
    out.push_back(std::move(r));
  }
  return out;
}

// Reference WERs of a dataset; every utterance must have a reference.
inline std::vector<double> ReferenceWers(const corpus::Dataset& d) {
  std::vector<double> out;
  for (const auto& u : d.utterances) {
    if (!u.has_reference()) throw Error(u.id + ": reference transcript required for training");
    out.push_back(scoring::Wer(scoring::AlignWords(*u.ref, u.hyp)));
  }
  return out;
}

// ---- model directory: model.json + model.ckpt ------------------------------

struct SavedModel {
  ModelSpec spec;
  nn::Network<float> net;
  std::filesystem::path embeddings;  // as recorded at training time
};

inline void SaveModel(const std::filesystem::path& dir, const ModelSpec& spec, nn::Network<float>& net,
                      const std::optional<std::filesystem::path>& embeddings) {
  std::filesystem::create_directories(dir);
  auto j = SpecToJson(spec);
  j["embeddings"] = embeddings ? std::filesystem::absolute(*embeddings).string() : "";
  j["network"] = net.Describe();
  WriteFile(dir / "model.json", j.dump(2) + "\n");
  nn::SaveCheckpoint(dir / "model.ckpt", net);
}

inline SavedModel LoadModel(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFile(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error("model.json: " + std::string(e.what()));
  }
  SavedModel m{SpecFromJson(j), {}, j.value("embeddings", std::string())};
  m.net = BuildNetwork<float>(m.spec);
  nn::LoadCheckpoint(dir / "model.ckpt", m.net);
  m.net.set_mode(nn::Mode::kEval);
  return m;
}

}  // namespace werpred::models

#endif  // WERPRED_MODELS_TRAINER_HPP_
