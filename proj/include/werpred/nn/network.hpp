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

#ifndef WERPRED_NN_NETWORK_HPP_
#define WERPRED_NN_NETWORK_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "werpred/common.hpp"
#include "werpred/nn/layers.hpp"

namespace werpred::nn {

// One input branch per feature stream, whose flattened outputs are
// concatenated and fed to a shared trunk. A single-stream model is a network
// with one branch.
template <typename T>
class Network {
 public:
  Network() = default;
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  Sequential<T>& AddBranch() {
    branches_.emplace_back();
    return branches_.back();
  }
  Sequential<T>& branch(std::size_t i) { return branches_.at(i); }
  std::size_t num_branches() const { return branches_.size(); }
  Sequential<T>& trunk() { return trunk_; }

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }
  Rng& rng() { return rng_; }

  // Glorot weights, zero biases, and a fresh dropout stream.
  void Init(std::uint64_t seed) {
    Rng init_rng(seed);
    for (auto& b : branches_) b.Init(init_rng);
    trunk_.Init(init_rng);
    rng_.seed(seed ^ 0xD1B54A32D192ED03ull);
    fresh_ = false;
  }

  std::string Describe() const {
    std::string s = "branches{";
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      if (i) s += "|";
      s += branches_[i].Describe();
    }
    return s + "}trunk" + trunk_.Describe();
  }

  std::vector<Param<T>*> Params() {
    std::vector<Param<T>*> out;
    for (auto& b : branches_)
      for (auto* p : b.Params()) out.push_back(p);
    for (auto* p : trunk_.Params()) out.push_back(p);
    return out;
  }

  std::vector<Tensor<T>*> Buffers() {
    std::vector<Tensor<T>*> out;
    for (auto& b : branches_)
      for (auto* p : b.Buffers()) out.push_back(p);
    for (auto* p : trunk_.Buffers()) out.push_back(p);
    return out;
  }

  std::size_t NumParameters() {
    std::size_t n = 0;
    for (auto* p : Params()) n += p->value.size();
    return n;
  }

  void ZeroGrad() {
    for (auto* p : Params()) p->grad.Fill(T(0));
  }

  // inputs[stream][sample]. Uses the network's mode and dropout stream.
  Batch<T> Forward(const std::vector<Batch<T>>& inputs) {
    CheckInputs(inputs);
    std::vector<Batch<T>> outs;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      try {
        outs.push_back(branches_[b].Forward(inputs[b], mode_, rng_));
      } catch (const Error& e) {
        throw Error("branch " + std::to_string(b) + ": " + e.what());
      }
    }
    widths_.clear();
    shapes_.clear();
    for (const auto& o : outs) {
      widths_.push_back(o[0].size());
      shapes_.push_back({o[0].rows(), o[0].cols()});
    }
    Batch<T> out;
    try {
      out = trunk_.Forward(Concat(outs), mode_, rng_);
    } catch (const Error& e) {
      throw Error(std::string("trunk: ") + e.what());
    }
    fresh_ = true;
    return out;
  }

  // Back-propagates d(loss)/d(output); parameter gradients accumulate.
  // Returns the gradients with respect to each input stream.
  std::vector<Batch<T>> Backward(const Batch<T>& grad) {
    if (!fresh_) throw Error("backward called without a fresh forward pass (stale cache)");
    fresh_ = false;
    Batch<T> g = trunk_.Backward(grad);
    std::vector<Batch<T>> dx;
    std::size_t offset = 0;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      Batch<T> gb;
      for (const auto& row : g) {
        std::vector<T> part(row.values().begin() + offset, row.values().begin() + offset + widths_[b]);
        gb.push_back(Tensor<T>(shapes_[b].first, shapes_[b].second, std::move(part)));
      }
      offset += widths_[b];
      dx.push_back(branches_[b].Backward(gb));
    }
    return dx;
  }

  // Eval-mode prediction without touching any cached state.
  Batch<T> Infer(const std::vector<Batch<T>>& inputs) const {
    CheckInputs(inputs);
    std::vector<Batch<T>> outs;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      try {
        outs.push_back(branches_[b].Infer(inputs[b]));
      } catch (const Error& e) {
        throw Error("branch " + std::to_string(b) + ": " + e.what());
      }
    }
    try {
      return trunk_.Infer(Concat(outs));
    } catch (const Error& e) {
      throw Error(std::string("trunk: ") + e.what());
    }
  }

  std::uint64_t KinkSignature() const {
    KinkHash h;
    for (const auto& b : branches_) b.AddKinks(h);
    trunk_.AddKinks(h);
    return h.value();
  }

 private:
  void CheckInputs(const std::vector<Batch<T>>& inputs) const {
    if (branches_.empty()) throw Error("network has no input branches");
    if (inputs.size() != branches_.size())
      throw Error("network expects " + std::to_string(branches_.size()) + " input streams, got " +
                  std::to_string(inputs.size()));
    const std::size_t n = inputs[0].size();
    if (n == 0) throw Error("empty batch");
    for (const auto& in : inputs)
      if (in.size() != n) throw Error("input streams have different batch sizes");
  }

  static Batch<T> Concat(const std::vector<Batch<T>>& outs) {
    Batch<T> cat;
    for (std::size_t s = 0; s < outs[0].size(); ++s) {
      std::vector<T> row;
      for (const auto& o : outs) row.insert(row.end(), o[s].values().begin(), o[s].values().end());
      cat.push_back(Tensor<T>::Row(std::move(row)));
    }
    return cat;
  }

  std::vector<Sequential<T>> branches_;
  Sequential<T> trunk_;
  Mode mode_ = Mode::kTrain;
  Rng rng_{0};
  bool fresh_ = false;
  std::vector<std::size_t> widths_;
  std::vector<std::pair<std::size_t, std::size_t>> shapes_;
};

}  // namespace werpred::nn

#endif  // WERPRED_NN_NETWORK_HPP_
