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

#include "werpred/scoring.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <tuple>

namespace werpred::scoring {
namespace {

// ---- oracles ---------------------------------------------------------------

// Every (S, D, I) triple reachable by some edit script, by exhaustive
// set-valued recursion over prefixes. Picks min cost, then max S, then max D.
Alignment AlignOracle(const Tokens& ref, const Tokens& hyp) {
  using Triple = std::tuple<int, int, int>;
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<std::set<Triple>>> reach(n + 1, std::vector<std::set<Triple>>(m + 1));
  reach[0][0].insert({0, 0, 0});
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t j = 0; j <= m; ++j) {
      for (const auto& [s, d, ins] : reach[i][j]) {
        if (i < n && j < m) reach[i + 1][j + 1].insert({s + (ref[i] != hyp[j] ? 1 : 0), d, ins});
        if (i < n) reach[i + 1][j].insert({s, d + 1, ins});
        if (j < m) reach[i][j + 1].insert({s, d, ins + 1});
      }
    }
  Triple best{0, 0, 0};
  int best_cost = 1 << 30;
  for (const auto& t : reach[n][m]) {
    const auto [s, d, ins] = t;
    const int cost = s + d + ins;
    const auto [bs, bd, bi] = best;
    if (cost < best_cost || (cost == best_cost && (s > bs || (s == bs && d > bd)))) {
      best = t;
      best_cost = cost;
    }
  }
  const auto [s, d, ins] = best;
  return {static_cast<std::size_t>(s), static_cast<std::size_t>(d), static_cast<std::size_t>(ins), n};
}

double TauBOracle(const std::vector<double>& x, const std::vector<double>& y) {
  double conc = 0, disc = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++tx;
      } else if (dy == 0) {
        ++ty;
      } else if ((dx > 0) == (dy > 0)) {
        ++conc;
      } else {
        ++disc;
      }
    }
  return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

// Two-sided exact p by enumerating all 2^n sign assignments over average
// ranks of |d|.
double WilcoxonOracle(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++less;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = less + (equal + 1) / 2.0;
  }
  double w = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w += rank[i];
  double le = 0, ge = 0;
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += rank[i];
    if (s <= w + 1e-9) ++le;
    if (s >= w - 1e-9) ++ge;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / std::ldexp(1.0, static_cast<int>(n)));
}

PredictionRecord Rec(std::string id, double ref, double pred) {
  PredictionRecord r;
  r.id = std::move(id);
  r.wer_ref = ref;
  r.wer_pred = pred;
  return r;
}

// ---- alignment -------------------------------------------------------------

TEST(AlignWords, Identity) {
  EXPECT_EQ(AlignWords(Tokenize("a b c"), Tokenize("a b c")), (Alignment{0, 0, 0, 3}));
}

TEST(AlignWords, SubstitutionAndInsertion) {
  const Alignment a = AlignWords(Tokenize("le chat dort"), Tokenize("le chien dort ici"));
  EXPECT_EQ(a, AlignOracle(Tokenize("le chat dort"), Tokenize("le chien dort ici")));
  EXPECT_EQ(a, (Alignment{1, 0, 1, 3}));
  EXPECT_NEAR(Wer(a), 200.0 / 3.0, 1e-12);
}

TEST(AlignWords, AllDeletions) {
  const Alignment a = AlignWords(Tokenize("a b c d"), {});
  EXPECT_EQ(a, (Alignment{0, 4, 0, 4}));
  EXPECT_DOUBLE_EQ(Wer(a), 100.0);
}

TEST(AlignWords, EmptyReferenceIsAnError) {
  try {
    AlignWords({}, Tokenize("a"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "reference empty; WER undefined");
  }
}

TEST(AlignWords, PrefersSubstitutionOverInsertDeletePair) {
  EXPECT_EQ(AlignWords(Tokenize("a"), Tokenize("b")), (Alignment{1, 0, 0, 1}));
}

TEST(AlignWords, MatchesExhaustiveOracleOnRandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 12), word(0, 4);
  for (int trial = 0; trial < 1000; ++trial) {
    Tokens ref(1 + len(rng) % 12), hyp(len(rng));
    for (auto& t : ref) t = std::string(1, static_cast<char>('a' + word(rng)));
    for (auto& t : hyp) t = std::string(1, static_cast<char>('a' + word(rng)));
    ASSERT_EQ(AlignWords(ref, hyp), AlignOracle(ref, hyp)) << Join(ref) << " | " << Join(hyp);
  }
}

TEST(AlignWords, InvariantUnderTokenRelabeling) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> word(0, 4);
  const std::vector<std::string> relabel = {"x", "yy", "z", "w", "vv"};
  for (int trial = 0; trial < 200; ++trial) {
    Tokens ref(8), hyp(7), ref2, hyp2;
    for (auto& t : ref) t = std::to_string(word(rng));
    for (auto& t : hyp) t = std::to_string(word(rng));
    for (const auto& t : ref) ref2.push_back(relabel[std::stoi(t)]);
    for (const auto& t : hyp) hyp2.push_back(relabel[std::stoi(t)]);
    EXPECT_EQ(Wer(AlignWords(ref, hyp)), Wer(AlignWords(ref2, hyp2)));
  }
}

TEST(Wer, Values) {
  EXPECT_DOUBLE_EQ(Wer({0, 0, 0, 3}), 0.0);
  EXPECT_NEAR(Wer({1, 0, 1, 3}), 66.6666666667, 1e-9);
  EXPECT_DOUBLE_EQ(Wer({0, 0, 5, 2}), 250.0);
  EXPECT_THROW(Wer({0, 0, 0, 0}), Error);
}

// ---- MAE -------------------------------------------------------------------

TEST(Mae, Values) {
  EXPECT_DOUBLE_EQ(Mae({Rec("a", 10, 10), Rec("b", 50, 50)}), 0.0);
  EXPECT_DOUBLE_EQ(Mae({Rec("a", 10, 12), Rec("b", 50, 45)}), 3.5);
  EXPECT_DOUBLE_EQ(Mae({Rec("a", 0, 150)}), 150.0);
}

TEST(Mae, Errors) {
  EXPECT_THROW(Mae({}), Error);
  PredictionRecord r;
  r.id = "u7";
  try {
    Mae({r});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("u7"), std::string::npos);
  }
}

TEST(Mae, PermutationInvariantAndNonNegative) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 150);
  std::vector<PredictionRecord> rs;
  for (int i = 0; i < 257; ++i) rs.push_back(Rec(std::to_string(i), u(rng), u(rng)));
  const double m = Mae(rs);
  EXPECT_GE(m, 0.0);
  std::shuffle(rs.begin(), rs.end(), rng);
  EXPECT_NEAR(Mae(rs), m, 1e-12);
  for (auto& r : rs) r.wer_pred = *r.wer_ref;
  EXPECT_EQ(Mae(rs), 0.0);
}

// ---- Kendall tau -----------------------------------------------------------

TEST(KendallTau, PerfectAgreementAndDisagreement) {
  EXPECT_DOUBLE_EQ(KendallTauB({1, 2, 3}, {10, 20, 30}), 1.0);
  EXPECT_DOUBLE_EQ(KendallTauB({1, 2, 3}, {30, 20, 10}), -1.0);
}

TEST(KendallTau, TieCorrectedExample) {
  const double expected = TauBOracle({0, 0, 50}, {10, 20, 5});
  EXPECT_NEAR(expected, -2.0 / std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(KendallTau({Rec("a", 0, 10), Rec("b", 0, 20), Rec("c", 50, 5)}), expected, 1e-12);
}

TEST(KendallTau, ZeroVarianceIsAnError) {
  EXPECT_THROW(KendallTauB({1, 1, 1}, {2, 2, 2}), Error);
  EXPECT_THROW(KendallTauB({1}, {2}), Error);
}

TEST(KendallTau, MatchesPairCountingOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    // Coarse values force plenty of ties on both sides.
    std::uniform_int_distribution<int> coarse(0, trial % 2 ? 6 : 1000);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = coarse(rng) * 25.0;
    for (auto& v : y) v = coarse(rng) * 0.5;
    bool varx = std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) != x.end();
    bool vary = std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) != y.end();
    if (!varx || !vary) continue;
    const double tau = KendallTauB(x, y);
    EXPECT_NEAR(tau, TauBOracle(x, y), 1e-12);
    EXPECT_GE(tau, -1.0);
    EXPECT_LE(tau, 1.0);
  }
}

TEST(KendallTau, ReversingOneSideFlipsSignWithoutTies) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  std::vector<double> x(50), y(50);
  for (auto& v : x) v = g(rng);
  for (auto& v : y) v = g(rng);
  std::vector<double> neg(y.size());
  std::transform(y.begin(), y.end(), neg.begin(), [](double v) { return -v; });
  EXPECT_NEAR(KendallTauB(x, neg), -KendallTauB(x, y), 1e-12);
}

// ---- Wilcoxon --------------------------------------------------------------

TEST(Wilcoxon, IdenticalListsAreInsufficient) {
  try {
    WilcoxonSignedRank({1, 2, 3, 4}, {1, 2, 3, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "insufficient pairs");
  }
}

TEST(Wilcoxon, AllPositiveThree) {
  const auto r = WilcoxonSignedRank({1, 2, 3}, {0, 0, 0});
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(r.p_value, 0.25);
}

TEST(Wilcoxon, SevenDifferencesMatchEnumeration) {
  const std::vector<double> d = {5, -1, 4, 3, 2, 6, 7};
  const auto r = WilcoxonSignedRank(d, std::vector<double>(d.size(), 0.0));
  EXPECT_NEAR(r.p_value, WilcoxonOracle(d), 1e-15);
  EXPECT_NEAR(r.p_value, 4.0 / 128.0, 1e-15);
}

TEST(Wilcoxon, ExactBranchMatchesEnumerationWithTies) {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> v(-4, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 10;
    std::vector<double> d;
    while (d.size() < n) {
      const int x = v(rng);
      if (x != 0) d.push_back(x);
    }
    const auto r = WilcoxonSignedRank(d, std::vector<double>(n, 0.0));
    ASSERT_NEAR(r.p_value, WilcoxonOracle(d), 1e-12);
  }
}

TEST(Wilcoxon, NormalApproximationIsCloseToExactForLargeN) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.3, 1.0);
  std::vector<double> d(25);
  for (auto& x : d) x = g(rng);
  const std::vector<double> zero(d.size(), 0.0);
  const auto exact = WilcoxonSignedRank(d, zero, 25);
  const auto approx = WilcoxonSignedRank(d, zero, 0);
  EXPECT_FALSE(approx.exact);
  EXPECT_NEAR(approx.p_value, exact.p_value, 0.01);
}

TEST(Wilcoxon, UnpairedIsAnError) { EXPECT_THROW(WilcoxonSignedRank({1, 2, 3}, {1, 2}), Error); }

// ---- aggregation and histograms -------------------------------------------

TEST(Aggregate, SingleGroupMean) {
  auto a = Rec("a", 0, 10), b = Rec("b", 0, 20);
  a.group["style"] = b.group["style"] = "NS";
  const auto rows = Aggregate({a, b}, "style");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].group, "NS");
  EXPECT_DOUBLE_EQ(rows[0].mean_wer_pred, 15.0);
  EXPECT_EQ(rows[1].group, kAllGroup);
}

TEST(Aggregate, TwoStylesPlusAll) {
  std::vector<PredictionRecord> rs;
  for (int i = 0; i < 5; ++i) {
    auto r = Rec("n" + std::to_string(i), 10.0 * i, 5.0 * i);
    r.group["style"] = "NS";
    rs.push_back(r);
  }
  for (int i = 0; i < 3; ++i) {
    auto r = Rec("s" + std::to_string(i), 40.0 + i, 30.0);
    r.group["style"] = "S";
    rs.push_back(r);
  }
  const auto rows = Aggregate(rs, "style");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].n_utterances + rows[1].n_utterances, rows[2].n_utterances);
  EXPECT_EQ(rows[2].n_utterances, 8u);
  EXPECT_DOUBLE_EQ(rows[0].mean_wer_ref, 20.0);
  EXPECT_DOUBLE_EQ(rows[1].mean_wer_ref, 41.0);
}

TEST(Aggregate, UnknownKeyIsAnError) {
  auto r = Rec("a", 1, 2);
  r.group["style"] = "S";
  EXPECT_THROW(Aggregate({r}, "speaker"), Error);
}

TEST(Histogram, Counting) {
  const auto bins = Histogram({0, 0, 100}, 25);
  for (const auto& b : bins) {
    if (b.start == 0) {
      EXPECT_EQ(b.count, 2u);
    } else if (b.start == 100) {
      EXPECT_EQ(b.count, 1u);
    } else {
      EXPECT_EQ(b.count, 0u);
    }
  }
  EXPECT_EQ(bins.back().start, 150.0);
}

TEST(Histogram, EmptyAndOverflow) {
  for (const auto& b : Histogram({}, 10)) EXPECT_EQ(b.count, 0u);
  const auto bins = Histogram({150, 400, 149.9}, 50);
  ASSERT_EQ(bins.size(), 4u);
  EXPECT_EQ(bins[2].count, 1u);
  EXPECT_EQ(bins[3].count, 2u);
  EXPECT_THROW(Histogram({-1}, 10), Error);
  EXPECT_THROW(Histogram({1}, 0), Error);
}

TEST(Predictions, RoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "werpred_scoring_preds.jsonl";
  std::vector<PredictionRecord> rs = {Rec("a", 12.5, 3.25)};
  PredictionRecord b;
  b.id = "b";
  b.wer_pred = 7;
  rs.push_back(b);
  WritePredictions(path, rs);
  const auto back = ReadPredictions(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].id, "a");
  EXPECT_EQ(*back[0].wer_ref, 12.5);
  EXPECT_FALSE(back[1].wer_ref.has_value());
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace werpred::scoring
