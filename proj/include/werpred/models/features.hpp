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

#ifndef WERPRED_MODELS_FEATURES_HPP_
#define WERPRED_MODELS_FEATURES_HPP_

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "werpred/common.hpp"
#include "werpred/corpus.hpp"
#include "werpred/dsp.hpp"
#include "werpred/models/architectures.hpp"
#include "werpred/nn/layers.hpp"
#include "werpred/textfeat.hpp"

namespace werpred::models {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// (lowest index) is rethrown after all workers finish.
template <typename Fn>
void ParallelFor(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t err_index = n;
  std::exception_ptr err;
  auto worker = [&]() {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// What featurizers need beyond the utterance itself.
struct FeatureSource {
  const textfeat::EmbeddingTable* embeddings = nullptr;
  std::optional<dsp::FeatureCache> cache;
};

inline FeatureTensor Featurize(const corpus::Utterance& u, InputKind kind, const ModelSpec& spec,
                               const FeatureSource& src) {
  if (kind == InputKind::kEmbed) {
    if (!src.embeddings) throw Error("embedding table required for text input");
    return textfeat::EmbedUtterance(u.hyp, *src.embeddings, spec.embed).matrix;
  }
  if (!u.audio_path) throw Error(u.id + ": audio required");
  const std::string cache_kind = InputName(kind);
  if (src.cache)
    if (auto hit = src.cache->Load(u.id, cache_kind)) return *hit;
  const auto audio = dsp::LoadAndStandardize(*u.audio_path, spec.dsp);
  FeatureTensor out;
  switch (kind) {
    case InputKind::kRaw:
      out = Tensor<double>(audio.samples.size(), 1, audio.samples).Cast<float>();
      break;
    case InputKind::kMel:
      out = dsp::LogMel(audio, spec.dsp).Cast<float>();
      break;
    case InputKind::kMfcc:
      out = dsp::Mfcc(audio, spec.dsp).Cast<float>();
      break;
    case InputKind::kEmbed:
      break;
  }
  if (src.cache) src.cache->Store(u.id, cache_kind, out);
  return out;
}

// In-memory features for a dataset, one stream per model input. Trailing
// rows equal to the last row (padding) are stored once and re-expanded on
// access.
class FeatureStore {
 public:
  FeatureStore() = default;

  static FeatureStore Build(const corpus::Dataset& d, const ModelSpec& spec, const FeatureSource& src,
                            std::size_t jobs = 1) {
    FeatureStore fs;
    fs.streams_.resize(spec.inputs.size());
    for (auto& s : fs.streams_) s.resize(d.size());
    ParallelFor(d.size(), jobs, [&](std::size_t i) {
      for (std::size_t k = 0; k < spec.inputs.size(); ++k)
        fs.streams_[k][i] = Compact(Featurize(d.utterances[i], spec.inputs[k], spec, src));
    });
    return fs;
  }

  std::size_t size() const { return streams_.empty() ? 0 : streams_[0].size(); }
  std::size_t num_streams() const { return streams_.size(); }

  Tensor<float> Get(std::size_t stream, std::size_t i) const {
    const auto& e = streams_.at(stream).at(i);
    Tensor<float> t(e.rows, e.head.cols());
    std::copy(e.head.values().begin(), e.head.values().end(), t.values().begin());
    if (e.head.rows() > 0)
      for (std::size_t r = e.head.rows(); r < e.rows; ++r) {
        const auto last = e.head.row(e.head.rows() - 1);
        std::copy(last.begin(), last.end(), t.row(r).begin());
      }
    return t;
  }

  // One batch per stream, samples in `indices` order.
  std::vector<nn::Batch<float>> Gather(const std::vector<std::size_t>& indices) const {
    std::vector<nn::Batch<float>> out(streams_.size());
    for (std::size_t k = 0; k < streams_.size(); ++k)
      for (auto i : indices) out[k].push_back(Get(k, i));
    return out;
  }

 private:
  struct Entry {
    Tensor<float> head;
    std::size_t rows = 0;
  };

  static Entry Compact(const Tensor<float>& t) {
    Entry e{t, t.rows()};
    if (t.rows() < 2) return e;
    std::size_t keep = t.rows();
    const auto last = t.row(t.rows() - 1);
    while (keep > 1 && std::equal(last.begin(), last.end(), t.row(keep - 2).begin())) --keep;
    if (keep == t.rows()) return e;
    std::vector<float> v(t.values().begin(), t.values().begin() + static_cast<long>(keep * t.cols()));
    e.head = Tensor<float>(keep, t.cols(), std::move(v));
    return e;
  }

  std::vector<std::vector<Entry>> streams_;
};

}  // namespace werpred::models

#endif  // WERPRED_MODELS_FEATURES_HPP_
