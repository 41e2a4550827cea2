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

// Central finite-difference check of Network::Backward. The scalar probe loss
// is a fixed random linear functional of the outputs, so every output
// coordinate contributes. Coordinates whose +/-h evaluations change a ReLU
// mask or a pooling winner are retried with smaller steps and skipped if the
// kink persists.

#ifndef WERPRED_NN_GRADCHECK_HPP_
#define WERPRED_NN_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <random>
#include <optional>
#include <string>
#include <vector>

#include "werpred/nn/network.hpp"

namespace werpred::nn {

struct GradCheckOptions {
  double step = 1e-3;  // first try; shrinks by 10x past kinks
  double min_step = 1e-9;
  double floor = 1e-8;              // denominator floor for relative error
  std::size_t max_coords = 64;      // sampled coordinates per tensor
  bool check_inputs = true;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::string worst;  // "<tensor>[index]" of the max error
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

namespace detail {

inline std::vector<std::size_t> SampleCoords(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n <= k) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

inline GradCheckResult GradCheck(Network<double>& net, std::vector<Batch<double>> inputs,
                                 const GradCheckOptions& opt = {}) {
  Rng sample_rng(opt.seed);
  const Rng start = net.rng();

  // Probe weights.
  Batch<double> out = net.Forward(inputs);
  Batch<double> probe;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& o : out) {
    Tensor<double> r(o.rows(), o.cols());
    for (auto& v : r.values()) v = normal(sample_rng);
    probe.push_back(std::move(r));
  }
  auto loss = [&]() {
    net.rng() = start;
    Batch<double> y = net.Forward(inputs);
    double l = 0.0;
    for (std::size_t s = 0; s < y.size(); ++s)
      for (std::size_t i = 0; i < y[s].size(); ++i) l += y[s][i] * probe[s][i];
    return l;
  };

  loss();
  const std::uint64_t base_sig = net.KinkSignature();
  net.ZeroGrad();
  const std::vector<Batch<double>> input_grads = net.Backward(probe);

  GradCheckResult res;
  // Central difference at step h; nullopt when a kink lies within +-h.
  auto central = [&](double& x, double saved, double h) -> std::optional<double> {
    x = saved + h;
    const double lp = loss();
    const bool clean_p = net.KinkSignature() == base_sig;
    x = saved - h;
    const double lm = loss();
    const bool clean_m = net.KinkSignature() == base_sig;
    x = saved;
    if (!(clean_p && clean_m)) return std::nullopt;
    return (lp - lm) / (2.0 * h);
  };
  auto check = [&](double& x, double analytic, const std::string& label) {
    const double saved = x;
    for (double h = opt.step; h >= opt.min_step; h /= 10.0) {
      const auto d1 = central(x, saved, h);
      if (!d1) continue;
      const auto d2 = central(x, saved, h / 2.0);
      if (!d2) continue;
      // Richardson extrapolation cancels the O(h^2) truncation term.
      const double numeric = (4.0 * *d2 - *d1) / 3.0;
      const double denom = std::max({std::abs(analytic), std::abs(numeric), opt.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = label;
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
      }
      return;
    }
    ++res.skipped_kinks;
  };

  const auto params = net.Params();
  std::vector<Tensor<double>> grads;
  for (const auto* p : params) grads.push_back(p->grad);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::string base = "param" + std::to_string(k) + ":" + params[k]->name;
    for (std::size_t i : detail::SampleCoords(params[k]->value.size(), opt.max_coords, sample_rng))
      check(params[k]->value[i], grads[k][i], base + "[" + std::to_string(i) + "]");
  }
  if (opt.check_inputs) {
    for (std::size_t b = 0; b < inputs.size(); ++b)
      for (std::size_t s = 0; s < inputs[b].size(); ++s) {
        const std::string base = "input" + std::to_string(b) + "/" + std::to_string(s);
        for (std::size_t i : detail::SampleCoords(inputs[b][s].size(), opt.max_coords, sample_rng))
          check(inputs[b][s][i], input_grads[b][s][i], base + "[" + std::to_string(i) + "]");
      }
  }
  net.rng() = start;
  net.ZeroGrad();
  return res;
}

}  // namespace werpred::nn

#endif  // WERPRED_NN_GRADCHECK_HPP_
