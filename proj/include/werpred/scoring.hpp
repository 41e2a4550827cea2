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

// Reference WER and the evaluation metrics for WER prediction: MAE, Kendall
// tau-b, Wilcoxon signed-rank, per-group means and WER histograms.

#ifndef WERPRED_SCORING_HPP_
#define WERPRED_SCORING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "werpred/common.hpp"

namespace werpred::scoring {

struct Alignment {
  std::size_t n_sub = 0;
  std::size_t n_del = 0;
  std::size_t n_ins = 0;
  std::size_t n_ref = 0;

  std::size_t errors() const { return n_sub + n_del + n_ins; }
  bool operator==(const Alignment&) const = default;
};

// Unit-cost Levenshtein alignment. Among all minimum-cost edit scripts the one
// with the most substitutions is chosen, then the one with the most
// deletions. (With the cost fixed, the substitution count alone already pins
// down deletions and insertions; the second key is stated for completeness.)
inline Alignment AlignWords(const Tokens& ref, const Tokens& hyp) {
  if (ref.empty()) throw Error("reference empty; WER undefined");
  struct Cell {
    std::size_t cost, sub, del, ins;
  };
  // Lexicographic order on (cost, -sub, -del).
  auto better = [](const Cell& a, const Cell& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.sub != b.sub) return a.sub > b.sub;
    return a.del > b.del;
  };
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {j, 0, 0, j};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {i, 0, i, 0};
    for (std::size_t j = 1; j <= m; ++j) {
      const bool mismatch = ref[i - 1] != hyp[j - 1];
      Cell diag = prev[j - 1];
      diag.cost += mismatch;
      diag.sub += mismatch;
      Cell up = prev[j];
      up.cost += 1;
      up.del += 1;
      Cell left = cur[j - 1];
      left.cost += 1;
      left.ins += 1;
      Cell best = diag;
      if (better(up, best)) best = up;
      if (better(left, best)) best = left;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  const Cell& end = prev[m];
  return {end.sub, end.del, end.ins, n};
}

// WER in percent; exceeds 100 when insertions dominate.
inline double Wer(const Alignment& a) {
  if (a.n_ref == 0) throw Error("reference length is zero; WER undefined");
  return 100.0 * static_cast<double>(a.errors()) / static_cast<double>(a.n_ref);
}

struct PredictionRecord {
  std::string id;
  std::optional<double> wer_ref;
  double wer_pred = 0.0;
  std::map<std::string, std::string> group;
};

inline double Mae(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw Error("MAE of empty record list");
  std::vector<double> abs_err;
  abs_err.reserve(records.size());
  for (const auto& r : records) {
    if (!r.wer_ref) throw Error("record " + r.id + " has no reference WER");
    abs_err.push_back(std::abs(*r.wer_ref - r.wer_pred));
  }
  return PairwiseSum(abs_err) / static_cast<double>(records.size());
}

namespace detail {

// Merge sort on `v`, returning the number of strict inversions.
inline std::int64_t CountInversions(std::vector<double>& v, std::vector<double>& tmp,
                                    std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = CountInversions(v, tmp, lo, mid) + CountInversions(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return inv;
}

// Sum of t(t-1)/2 over runs of equal values in a sorted range.
template <typename Eq>
std::int64_t TiedPairs(std::size_t n, Eq equal) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}

}  // namespace detail

// Kendall tau-b between x and y in O(n log n) (Knight's algorithm).
inline double KendallTauB(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("kendall tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw Error("kendall tau needs at least 2 records");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }
  const std::int64_t total = static_cast<std::int64_t>(n) * (static_cast<std::int64_t>(n) - 1) / 2;
  const std::int64_t x_ties = detail::TiedPairs(n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b]; });
  const std::int64_t joint_ties = detail::TiedPairs(
      n, [&](std::size_t a, std::size_t b) { return xs[a] == xs[b] && ys[a] == ys[b]; });
  std::vector<double> tmp(n);
  const std::int64_t discordant = detail::CountInversions(ys, tmp, 0, n);
  // ys is sorted now.
  const std::int64_t y_ties = detail::TiedPairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
  if (x_ties == total || y_ties == total) throw Error("tau undefined (zero variance)");
  const std::int64_t numer = total - x_ties - y_ties + joint_ties - 2 * discordant;
  return static_cast<double>(numer) /
         std::sqrt(static_cast<double>(total - x_ties) * static_cast<double>(total - y_ties));
}

inline double KendallTau(const std::vector<PredictionRecord>& records) {
  std::vector<double> ref, pred;
  ref.reserve(records.size());
  pred.reserve(records.size());
  for (const auto& r : records) {
    if (!r.wer_ref) throw Error("record " + r.id + " has no reference WER");
    ref.push_back(*r.wer_ref);
    pred.push_back(r.wer_pred);
  }
  return KendallTauB(ref, pred);
}

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;
  std::size_t n = 0;  // non-zero differences
  bool exact = true;
};

// Ranks of |d| (1-based, ties averaged), returned doubled so they are integers.
inline std::vector<std::int64_t> DoubledAbsRanks(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<std::int64_t> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    // Average of ranks i+1..j+1, doubled.
    const auto doubled = static_cast<std::int64_t>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = doubled;
    i = j + 1;
  }
  return ranks;
}

// Two-sided Wilcoxon signed-rank test on paired samples (a - b). Zero
// differences are dropped. Exact null distribution for n <= 25 (tie-aware,
// by counting sign assignments over the actual ranks), otherwise the normal
// approximation with tie and continuity correction.
inline WilcoxonResult WilcoxonSignedRank(const std::vector<double>& errors_a,
                                         const std::vector<double>& errors_b,
                                         std::size_t exact_max_n = 25) {
  if (errors_a.size() != errors_b.size()) throw Error("wilcoxon: unpaired inputs (length mismatch)");
  std::vector<double> d;
  for (std::size_t i = 0; i < errors_a.size(); ++i) {
    const double diff = errors_a[i] - errors_b[i];
    if (diff != 0.0) d.push_back(diff);
  }
  if (d.size() < 3) throw Error("insufficient pairs");
  const std::size_t n = d.size();
  const auto ranks = DoubledAbsRanks(d);
  std::int64_t w2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += ranks[i];
    if (d[i] > 0) w2 += ranks[i];
  }
  WilcoxonResult res;
  res.n = n;
  res.w_plus = static_cast<double>(w2) / 2.0;
  if (n <= exact_max_n) {
    // counts[s] = number of sign assignments with doubled W+ == s.
    std::vector<double> counts(static_cast<std::size_t>(total2) + 1, 0.0);
    counts[0] = 1.0;
    std::int64_t reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::int64_t s = reach; s >= 0; --s) {
        if (counts[s] != 0.0) counts[s + ranks[i]] += counts[s];
      }
      reach += ranks[i];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double le = 0.0, ge = 0.0;
    for (std::int64_t s = 0; s <= total2; ++s) {
      if (s <= w2) le += counts[s];
      if (s >= w2) ge += counts[s];
    }
    res.p_value = std::min(1.0, 2.0 * std::min(le, ge) / all);
    res.exact = true;
    return res;
  }
  const double nn = static_cast<double>(n);
  double tie_term = 0.0;
  {
    std::vector<std::int64_t> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j < n && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
  }
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  double diff = res.w_plus - mean;
  const double correction = diff > 0 ? 0.5 : (diff < 0 ? -0.5 : 0.0);
  const double z = (diff - correction) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  res.exact = false;
  return res;
}

struct AggregateRow {
  std::string group;
  double mean_wer_ref = std::numeric_limits<double>::quiet_NaN();  // NaN if no references
  double mean_wer_pred = 0.0;
  std::size_t n_utterances = 0;
};

inline constexpr const char* kAllGroup = "ALL";

// Unweighted per-group means over utterances, groups in lexicographic order,
// followed by an "ALL" row.
inline std::vector<AggregateRow> Aggregate(const std::vector<PredictionRecord>& records,
                                           const std::string& group_key) {
  if (records.empty()) throw Error("aggregate: no records");
  std::map<std::string, std::vector<const PredictionRecord*>> groups;
  for (const auto& r : records) {
    auto it = r.group.find(group_key);
    if (it == r.group.end()) throw Error("unknown group key " + group_key + " (record " + r.id + ")");
    groups[it->second].push_back(&r);
  }
  auto summarize = [](const std::string& name, const std::vector<const PredictionRecord*>& rs) {
    std::vector<double> ref, pred;
    for (const auto* r : rs) {
      pred.push_back(r->wer_pred);
      if (r->wer_ref) ref.push_back(*r->wer_ref);
    }
    AggregateRow row;
    row.group = name;
    row.n_utterances = rs.size();
    row.mean_wer_pred = PairwiseSum(pred) / static_cast<double>(pred.size());
    if (!ref.empty()) row.mean_wer_ref = PairwiseSum(ref) / static_cast<double>(ref.size());
    return row;
  };
  std::vector<AggregateRow> rows;
  std::vector<const PredictionRecord*> all;
  for (const auto& r : records) all.push_back(&r);
  for (const auto& [name, rs] : groups) rows.push_back(summarize(name, rs));
  rows.push_back(summarize(kAllGroup, all));
  return rows;
}

struct HistogramBin {
  double start = 0.0;
  std::size_t count = 0;
};

// Left-closed right-open bins of `bin_width` from 0; the final bin starts at
// `cap` and is open-ended.
inline std::vector<HistogramBin> Histogram(const std::vector<double>& values, double bin_width,
                                           double cap = 150.0) {
  if (!(bin_width > 0.0)) throw Error("histogram bin width must be positive");
  if (!(cap > 0.0)) throw Error("histogram cap must be positive");
  std::vector<HistogramBin> bins;
  for (std::size_t k = 0;; ++k) {
    const double start = static_cast<double>(k) * bin_width;
    if (start >= cap) break;
    bins.push_back({start, 0});
  }
  bins.push_back({cap, 0});
  const std::size_t regular = bins.size() - 1;
  for (double v : values) {
    if (std::isnan(v) || v < 0.0) throw Error("histogram: negative or NaN value");
    if (v >= cap) {
      ++bins.back().count;
    } else {
      auto k = static_cast<std::size_t>(std::floor(v / bin_width));
      ++bins[std::min(k, regular - 1)].count;
    }
  }
  return bins;
}

// Predictions file: JSON lines {"id", "wer_pred", optional "wer_ref"}.
inline std::vector<PredictionRecord> ReadPredictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      PredictionRecord r;
      r.id = j.at("id").get<std::string>();
      r.wer_pred = j.at("wer_pred").get<double>();
      if (j.contains("wer_ref") && !j["wer_ref"].is_null()) r.wer_ref = j["wer_ref"].get<double>();
      if (r.wer_pred < 0.0) throw Error("negative wer_pred");
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void WritePredictions(const std::filesystem::path& path,
                             const std::vector<PredictionRecord>& records) {
  std::string buf;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["wer_pred"] = r.wer_pred;
    if (r.wer_ref) j["wer_ref"] = *r.wer_ref;
    buf += j.dump();
    buf += '\n';
  }
  WriteFile(path, buf);
}

}  // namespace werpred::scoring

#endif  // WERPRED_SCORING_HPP_
