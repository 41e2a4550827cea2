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

#ifndef WERPRED_NN_OPTIM_HPP_
#define WERPRED_NN_OPTIM_HPP_

#include <cmath>
#include <vector>

#include "werpred/common.hpp"
#include "werpred/nn/layers.hpp"

namespace werpred::nn {

struct AdadeltaConfig {
  double rho = 0.95;
  double epsilon = 1e-6;
  std::size_t batch_size = 32;

  void Validate() const {
    if (!(rho > 0.0 && rho < 1.0)) throw Error("adadelta rho must be in (0, 1)");
    if (!(epsilon > 0.0)) throw Error("adadelta epsilon must be positive");
    if (batch_size == 0) throw Error("batch size must be positive");
  }
};

template <typename T>
class Adadelta {
 public:
  explicit Adadelta(AdadeltaConfig cfg = {}) : cfg_(cfg) { cfg_.Validate(); }

  const AdadeltaConfig& config() const { return cfg_; }
  bool initialized() const { return !sq_grad_.empty(); }
  std::vector<Tensor<T>>& sq_grad() { return sq_grad_; }
  std::vector<Tensor<T>>& sq_delta() { return sq_delta_; }
  const std::vector<Tensor<T>>& sq_grad() const { return sq_grad_; }
  const std::vector<Tensor<T>>& sq_delta() const { return sq_delta_; }

  // Allocates zeroed accumulators mirroring `params`.
  void Reset(const std::vector<Param<T>*>& params) {
    sq_grad_.clear();
    sq_delta_.clear();
    for (const auto* p : params) {
      sq_grad_.emplace_back(p->value.rows(), p->value.cols());
      sq_delta_.emplace_back(p->value.rows(), p->value.cols());
    }
  }

  void Step(const std::vector<Param<T>*>& params) {
    if (!initialized()) Reset(params);
    if (params.size() != sq_grad_.size()) throw Error("optimizer state does not match the parameter list");
    const double rho = cfg_.rho, eps = cfg_.epsilon;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param<T>& p = *params[i];
      if (!p.grad.SameShape(p.value) || !p.value.SameShape(sq_grad_[i]))
        throw Error("optimizer state shape mismatch for " + p.name);
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const double g = p.grad[j];
        const double eg2 = rho * sq_grad_[i][j] + (1.0 - rho) * g * g;
        const double dx = -std::sqrt(sq_delta_[i][j] + eps) / std::sqrt(eg2 + eps) * g;
        sq_grad_[i][j] = static_cast<T>(eg2);
        sq_delta_[i][j] = static_cast<T>(rho * sq_delta_[i][j] + (1.0 - rho) * dx * dx);
        p.value[j] = static_cast<T>(p.value[j] + dx);
      }
    }
  }

 private:
  AdadeltaConfig cfg_;
  std::vector<Tensor<T>> sq_grad_, sq_delta_;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean absolute error and its subgradient sign(pred - target) / n, taking 0
// where pred == target.
inline LossResult MaeLoss(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.empty()) throw Error("MAE loss of an empty batch");
  if (pred.size() != target.size()) throw Error("prediction and target batches differ in length");
  const double n = static_cast<double>(pred.size());
  LossResult r;
  r.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += std::abs(d);
    r.grad[i] = d > 0 ? 1.0 / n : (d < 0 ? -1.0 / n : 0.0);
  }
  r.loss /= n;
  return r;
}

template <typename T>
std::vector<double> Scalars(const Batch<T>& out) {
  std::vector<double> v;
  v.reserve(out.size());
  for (const auto& t : out) {
    if (t.size() != 1) throw Error("expected a scalar output per sample, got " + t.ShapeString());
    v.push_back(static_cast<double>(t[0]));
  }
  return v;
}

template <typename T>
Batch<T> ScalarBatch(const std::vector<double>& v) {
  Batch<T> b;
  b.reserve(v.size());
  for (double x : v) b.push_back(Tensor<T>(1, 1, static_cast<T>(x)));
  return b;
}

}  // namespace werpred::nn

#endif  // WERPRED_NN_OPTIM_HPP_
