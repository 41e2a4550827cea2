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

// Regressors of the baseline: extremely randomized trees and ridge
// regression on standardized features.

#ifndef WERPRED_BASELINE_REGRESSORS_HPP_
#define WERPRED_BASELINE_REGRESSORS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "werpred/baseline/features.hpp"
#include "werpred/common.hpp"

namespace werpred::baseline {

using Rows = std::vector<std::vector<double>>;

namespace detail {

inline void CheckDesign(const Rows& x, const std::vector<double>& y) {
  if (x.empty()) throw Error("cannot fit a regressor on zero rows");
  if (x.size() != y.size())
    throw Error("feature rows (" + std::to_string(x.size()) + ") and targets (" + std::to_string(y.size()) +
                ") differ in count");
  for (const auto& r : x) {
    if (r.size() != x[0].size()) throw Error("feature rows differ in width");
    for (double v : r)
      if (!std::isfinite(v)) throw Error("non-finite feature value");
  }
  for (double v : y)
    if (!std::isfinite(v)) throw Error("non-finite target value");
}

inline void CheckWidth(const std::vector<double>& x, std::size_t dim) {
  if (x.size() != dim)
    throw Error("feature vector has " + std::to_string(x.size()) + " values, regressor expects " +
                std::to_string(dim));
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct ExtraTreesConfig {
  std::size_t n_trees = 100;
  std::size_t min_leaf = 2;
  std::uint64_t seed = 1;
};

// Each split draws one uniform threshold per feature between the node's
// minimum and maximum, and keeps the candidate with the largest variance
// reduction. No bootstrap; leaves predict the mean target.
class ExtraTrees {
 public:
  struct Node {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    double value = 0.0;
    std::int32_t left = -1, right = -1;
  };
  using Tree = std::vector<Node>;

  static ExtraTrees Fit(const Rows& x, const std::vector<double>& y, const ExtraTreesConfig& cfg = {}) {
    detail::CheckDesign(x, y);
    if (cfg.n_trees == 0 || cfg.min_leaf == 0) throw Error("ExtraTrees needs at least one tree and leaf size 1");
    ExtraTrees et;
    et.dim_ = x[0].size();
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t t = 0; t < cfg.n_trees; ++t) {
      std::vector<std::size_t> idx(x.size());
      std::iota(idx.begin(), idx.end(), 0);
      Tree tree;
      Grow(x, y, idx, 0, idx.size(), cfg.min_leaf, rng, tree);
      et.trees_.push_back(std::move(tree));
    }
    return et;
  }

  std::size_t dim() const { return dim_; }
  const std::vector<Tree>& trees() const { return trees_; }

  static double PredictTree(const Tree& tree, const std::vector<double>& x) {
    std::size_t n = 0;
    while (tree[n].feature >= 0)
      n = static_cast<std::size_t>(x[static_cast<std::size_t>(tree[n].feature)] <= tree[n].threshold ? tree[n].left
                                                                                                  : tree[n].right);
    return tree[n].value;
  }

  double Predict(const std::vector<double>& x) const {
    detail::CheckWidth(x, dim_);
    double s = 0.0;
    for (const auto& t : trees_) s += PredictTree(t, x);
    return s / static_cast<double>(trees_.size());
  }

  nlohmann::json ToJson() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) {
      nlohmann::json f = nlohmann::json::array(), th = nlohmann::json::array(), v = nlohmann::json::array(),
                     l = nlohmann::json::array(), r = nlohmann::json::array();
      for (const auto& n : t) {
        f.push_back(n.feature);
        th.push_back(n.threshold);
        v.push_back(n.value);
        l.push_back(n.left);
        r.push_back(n.right);
      }
      trees.push_back({{"feature", f}, {"threshold", th}, {"value", v}, {"left", l}, {"right", r}});
    }
    return {{"dim", dim_}, {"trees", trees}};
  }

  static ExtraTrees FromJson(const nlohmann::json& j) {
    ExtraTrees et;
    et.dim_ = j.at("dim").get<std::size_t>();
    for (const auto& t : j.at("trees")) {
      const auto f = t.at("feature").get<std::vector<int>>();
      const auto th = t.at("threshold").get<std::vector<double>>();
      const auto v = t.at("value").get<std::vector<double>>();
      const auto l = t.at("left").get<std::vector<std::int32_t>>();
      const auto r = t.at("right").get<std::vector<std::int32_t>>();
      if (f.empty() || th.size() != f.size() || v.size() != f.size() || l.size() != f.size() ||
          r.size() != f.size())
        throw Error("malformed tree in regressor file");
      Tree tree(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) {
        tree[i] = {f[i], th[i], v[i], l[i], r[i]};
        const auto n = static_cast<std::int32_t>(f.size());
        if (f[i] >= static_cast<int>(et.dim_) ||
            (f[i] >= 0 && (l[i] <= static_cast<std::int32_t>(i) || l[i] >= n || r[i] <= static_cast<std::int32_t>(i) ||
                           r[i] >= n)))
          throw Error("malformed tree in regressor file");
      }
      et.trees_.push_back(std::move(tree));
    }
    if (et.trees_.empty()) throw Error("regressor file has no trees");
    return et;
  }

 private:
  // Grows the subtree over idx[lo, hi) and returns its node index.
  static std::int32_t Grow(const Rows& x, const std::vector<double>& y, std::vector<std::size_t>& idx,
                           std::size_t lo, std::size_t hi, std::size_t min_leaf, std::mt19937_64& rng, Tree& tree) {
    const auto me = static_cast<std::int32_t>(tree.size());
    tree.push_back({});
    const std::size_t n = hi - lo;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += y[idx[i]];
    const double mean = sum / static_cast<double>(n);
    for (std::size_t i = lo; i < hi; ++i) sum2 += (y[idx[i]] - mean) * (y[idx[i]] - mean);
    tree[static_cast<std::size_t>(me)].value = mean;
    if (n < 2 * min_leaf || sum2 <= 0.0) return me;

    const std::size_t dim = x[0].size();
    int best_f = -1;
    double best_t = 0.0, best_score = -1.0;
    std::vector<std::size_t> order(dim);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t f : order) {
      double mn = x[idx[lo]][f], mx = mn;
      for (std::size_t i = lo + 1; i < hi; ++i) {
        mn = std::min(mn, x[idx[i]][f]);
        mx = std::max(mx, x[idx[i]][f]);
      }
      if (!(mx > mn)) continue;
      double t = std::uniform_real_distribution<double>(mn, mx)(rng);
      if (t >= mx) t = mn;  // keep both sides non-empty
      std::size_t nl = 0;
      double sl = 0.0;
      for (std::size_t i = lo; i < hi; ++i)
        if (x[idx[i]][f] <= t) ++nl, sl += y[idx[i]];
      const std::size_t nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      // Variance reduction up to a constant: sl²/nl + sr²/nr - sum²/n.
      const double sr = sum - sl;
      const double score = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) -
                           sum * sum / static_cast<double>(n);
      if (score > best_score) best_score = score, best_f = static_cast<int>(f), best_t = t;
    }
    if (best_f < 0) return me;

    const auto f = static_cast<std::size_t>(best_f);
    const auto mid = std::stable_partition(idx.begin() + static_cast<long>(lo), idx.begin() + static_cast<long>(hi),
                                           [&](std::size_t i) { return x[i][f] <= best_t; });
    const auto split = static_cast<std::size_t>(mid - idx.begin());
    tree[static_cast<std::size_t>(me)].feature = best_f;
    tree[static_cast<std::size_t>(me)].threshold = best_t;
    const auto l = Grow(x, y, idx, lo, split, min_leaf, rng, tree);
    const auto r = Grow(x, y, idx, split, hi, min_leaf, rng, tree);
    tree[static_cast<std::size_t>(me)].left = l;
    tree[static_cast<std::size_t>(me)].right = r;
    return me;
  }

  std::size_t dim_ = 0;
  std::vector<Tree> trees_;
};

// ---------------------------------------------------------------------------

// Minimizes |y - b0 - Z b|² + lambda |b|² where Z holds the features
// standardized by training mean and standard deviation. Constant features
// are centered but not scaled.
class Ridge {
 public:
  static Ridge Fit(const Rows& x, const std::vector<double>& y, double lambda = 1.0) {
    detail::CheckDesign(x, y);
    if (!(lambda >= 0.0)) throw Error("ridge penalty must be non-negative");
    const std::size_t n = x.size(), d = x[0].size();
    Ridge r;
    r.mean_.assign(d, 0.0);
    r.scale_.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = x[i][j];
      r.mean_[j] = PairwiseSum(col) / static_cast<double>(n);
      double ss = 0.0;
      for (double v : col) ss += (v - r.mean_[j]) * (v - r.mean_[j]);
      const double sd = std::sqrt(ss / static_cast<double>(n));
      if (sd > 0.0) r.scale_[j] = sd;
    }
    r.intercept_ = PairwiseSum(y) / static_cast<double>(n);
    Eigen::MatrixXd z(n, d);
    Eigen::VectorXd t(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j)
        z(static_cast<long>(i), static_cast<long>(j)) = (x[i][j] - r.mean_[j]) / r.scale_[j];
      t(static_cast<long>(i)) = y[i] - r.intercept_;
    }
    Eigen::MatrixXd a = z.transpose() * z;
    a.diagonal().array() += lambda;
    const Eigen::VectorXd b = a.ldlt().solve(z.transpose() * t);
    r.coef_.assign(b.data(), b.data() + b.size());
    for (double& c : r.coef_)
      if (!std::isfinite(c)) c = 0.0;
    return r;
  }

  std::size_t dim() const { return coef_.size(); }

  double Predict(const std::vector<double>& x) const {
    detail::CheckWidth(x, dim());
    double s = intercept_;
    for (std::size_t j = 0; j < coef_.size(); ++j) s += coef_[j] * (x[j] - mean_[j]) / scale_[j];
    return s;
  }

  // Coefficients and intercept on the original feature scale.
  std::vector<double> RawCoefficients() const {
    std::vector<double> c(coef_.size());
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = coef_[j] / scale_[j];
    return c;
  }
  double RawIntercept() const {
    double b = intercept_;
    for (std::size_t j = 0; j < coef_.size(); ++j) b -= coef_[j] * mean_[j] / scale_[j];
    return b;
  }

  nlohmann::json ToJson() const {
    return {{"mean", mean_}, {"scale", scale_}, {"coef", coef_}, {"intercept", intercept_}};
  }

  static Ridge FromJson(const nlohmann::json& j) {
    Ridge r;
    r.mean_ = j.at("mean").get<std::vector<double>>();
    r.scale_ = j.at("scale").get<std::vector<double>>();
    r.coef_ = j.at("coef").get<std::vector<double>>();
    r.intercept_ = j.at("intercept").get<double>();
    if (r.mean_.size() != r.coef_.size() || r.scale_.size() != r.coef_.size())
      throw Error("malformed ridge model in regressor file");
    return r;
  }

 private:
  std::vector<double> mean_, scale_, coef_;
  double intercept_ = 0.0;
};

// ---------------------------------------------------------------------------

enum class RegressorKind { kExtraTrees, kRidge };

inline std::string RegressorName(RegressorKind k) { return k == RegressorKind::kExtraTrees ? "extratrees" : "ridge"; }

inline RegressorKind ParseRegressor(const std::string& s) {
  if (s == "extratrees") return RegressorKind::kExtraTrees;
  if (s == "ridge") return RegressorKind::kRidge;
  throw Error("unknown regressor \"" + s + "\" (expected extratrees or ridge)");
}

struct RegressorConfig {
  RegressorKind kind = RegressorKind::kExtraTrees;
  std::vector<Family> families = {Family::kPos, Family::kLex, Family::kLm};
  ExtraTreesConfig trees;
  double lambda = 1.0;
};

// A fitted model over a fixed selection of feature families. Predictions
// are clipped below at 0.
class Regressor {
 public:
  static Regressor Fit(const std::vector<FeatureRow>& rows, const std::vector<double>& targets,
                       const RegressorConfig& cfg) {
    if (rows.empty()) throw Error("cannot fit a regressor on zero rows");
    if (cfg.families.empty()) throw Error("no feature families selected");
    Rows x;
    for (const auto& r : rows) x.push_back(r.Concat(cfg.families));
    Regressor reg;
    reg.families_ = cfg.families;
    for (Family f : cfg.families) reg.dims_.push_back(rows[0].family(f)->size());
    if (cfg.kind == RegressorKind::kExtraTrees)
      reg.model_ = ExtraTrees::Fit(x, targets, cfg.trees);
    else
      reg.model_ = Ridge::Fit(x, targets, cfg.lambda);
    return reg;
  }

  RegressorKind kind() const {
    return std::holds_alternative<ExtraTrees>(model_) ? RegressorKind::kExtraTrees : RegressorKind::kRidge;
  }
  const std::vector<Family>& families() const { return families_; }

  double Predict(const FeatureRow& row) const {
    for (std::size_t k = 0; k < families_.size(); ++k) {
      const auto& v = row.family(families_[k]);
      if (!v) throw Error("row lacks " + FamilyName(families_[k]) + " features");
      if (v->size() != dims_[k])
        throw Error(FamilyName(families_[k]) + " features have " + std::to_string(v->size()) +
                    " values, regressor expects " + std::to_string(dims_[k]));
    }
    const auto x = row.Concat(families_);
    const double p = std::visit([&](const auto& m) { return m.Predict(x); }, model_);
    return std::max(0.0, p);
  }

  nlohmann::json ToJson() const {
    nlohmann::json fams = nlohmann::json::array();
    for (Family f : families_) fams.push_back(FamilyName(f));
    nlohmann::json j = {{"kind", RegressorName(kind())}, {"families", fams}, {"dims", dims_}};
    j["model"] = std::visit([](const auto& m) { return m.ToJson(); }, model_);
    return j;
  }

  static Regressor FromJson(const nlohmann::json& j) {
    try {
      Regressor reg;
      std::string fams;
      for (const auto& f : j.at("families")) fams += (fams.empty() ? "" : "+") + f.get<std::string>();
      reg.families_ = ParseFamilies(fams);
      reg.dims_ = j.at("dims").get<std::vector<std::size_t>>();
      if (reg.dims_.size() != reg.families_.size()) throw Error("regressor file: dims do not match families");
      const auto kind = ParseRegressor(j.at("kind").get<std::string>());
      if (kind == RegressorKind::kExtraTrees)
        reg.model_ = ExtraTrees::FromJson(j.at("model"));
      else
        reg.model_ = Ridge::FromJson(j.at("model"));
      const std::size_t total = std::accumulate(reg.dims_.begin(), reg.dims_.end(), std::size_t{0});
      if (std::visit([](const auto& m) { return m.dim(); }, reg.model_) != total)
        throw Error("regressor file: model width does not match feature dims");
      return reg;
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("malformed regressor file: ") + e.what());
    }
  }

 private:
  std::vector<Family> families_;
  std::vector<std::size_t> dims_;
  std::variant<ExtraTrees, Ridge> model_;
};

}  // namespace werpred::baseline

#endif  // WERPRED_BASELINE_REGRESSORS_HPP_
