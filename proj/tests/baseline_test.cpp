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

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include "werpred/baseline/features.hpp"
#include "werpred/baseline/model.hpp"
#include "werpred/baseline/ngram.hpp"
#include "werpred/baseline/regressors.hpp"
#include "werpred/corpus.hpp"

namespace werpred::baseline {
namespace {

namespace fs = std::filesystem;

std::vector<Tokens> Repeat(const std::string& s, int n) { return std::vector<Tokens>(n, Tokenize(s)); }

// ---------------------------------------------------------------------------
// NGramLM

TEST(NGramLM, BigramMatchesClosedForm) {
  const auto lm = NGramLM::Train(Repeat("a b", 100), {.order = 2});
  // Symbols a, b, </s>, <unk>; each word seen 100 times, 3 types.
  const double p_b = (100.0 + 3.0 / 4.0) / (300.0 + 3.0);
  const double p_b_a = (100.0 + 1.0 * p_b) / (100.0 + 1.0);
  EXPECT_NEAR(lm.Prob("b", {"a"}), p_b_a, 1e-15);
  EXPECT_GT(lm.Prob("b", {"a"}), 0.99);
  EXPECT_EQ(lm.vocabulary_size(), 4u);
}

TEST(NGramLM, UnseenWordHasPositiveProbability) {
  const auto lm = NGramLM::Train(Repeat("a b", 10), {.order = 3});
  EXPECT_GT(lm.Prob("zebra", {"a", "b"}), 0.0);
  EXPECT_GT(lm.Prob("a", {"b", "b"}), 0.0);
}

TEST(NGramLM, UniformUnigramPerplexityIsVocabularySize) {
  // a, b, c and </s> are equally frequent: every symbol has probability 1/4.
  const auto lm = NGramLM::Train(Repeat("a b c", 7), {.order = 1, .open_vocabulary = false});
  EXPECT_NEAR(lm.Perplexity(Repeat("c a b", 3)), 4.0, 1e-12);
}

TEST(NGramLM, EmptyCorpusIsAnError) {
  EXPECT_THROW(NGramLM::Train({}, {}), Error);
  EXPECT_THROW(NGramLM::Train({{}, {}}, {}), Error);
}

TEST(NGramLM, ClosedVocabularyRejectsUnknownWords) {
  const auto lm = NGramLM::Train(Repeat("a b", 3), {.order = 2, .open_vocabulary = false});
  EXPECT_THROW(lm.Prob("zebra", {"a"}), Error);
}

class NGramSums : public ::testing::TestWithParam<std::tuple<int, bool>> {};

TEST_P(NGramSums, ConditionalsSumToOne) {
  const auto [order, open] = GetParam();
  std::mt19937_64 rng(static_cast<std::uint64_t>(order) * 7 + open);
  std::vector<Tokens> corpus;
  std::uniform_int_distribution<int> len(1, 8), word(0, 11);
  for (int s = 0; s < 60; ++s) {
    Tokens t;
    for (int k = len(rng); k > 0; --k) t.push_back("w" + std::to_string(word(rng) * word(rng) % 12));
    corpus.push_back(t);
  }
  const auto lm = NGramLM::Train(corpus, {.order = static_cast<std::size_t>(order), .open_vocabulary = open});
  std::vector<std::string> symbols;
  for (const auto& w : lm.words())
    if (w != kBos) symbols.push_back(w);
  ASSERT_EQ(symbols.size(), lm.vocabulary_size());
  for (int trial = 0; trial < 50; ++trial) {
    // Mix of seen prefixes and random histories, with and without <s>.
    Tokens h;
    const auto& src = corpus[static_cast<std::size_t>(trial) % corpus.size()];
    if (trial % 2 == 0) {
      h.push_back(kBos);
      h.insert(h.end(), src.begin(), src.begin() + static_cast<long>(std::min<std::size_t>(src.size(), trial % 4)));
    } else {
      for (int k = trial % 5; k > 0; --k) h.push_back(symbols[static_cast<std::size_t>(word(rng)) % symbols.size()]);
    }
    double sum = 0.0;
    for (const auto& w : symbols) sum += lm.Prob(w, h);
    EXPECT_NEAR(sum, 1.0, 1e-9) << "history " << Join(h);
  }
}

INSTANTIATE_TEST_SUITE_P(OrdersAndVocabularies, NGramSums,
                         ::testing::Combine(::testing::Values(1, 2, 3, 5), ::testing::Bool()));

// ---------------------------------------------------------------------------
// LM features

NGramLM ToyLm() {
  std::vector<Tokens> corpus;
  for (int i = 0; i < 20; ++i) {
    corpus.push_back(Tokenize("the cat sat on the mat"));
    corpus.push_back(Tokenize("the dog sat on the rug"));
    corpus.push_back(Tokenize("a cat ate the fish"));
  }
  return NGramLM::Train(corpus, {.order = 5});
}

TEST(LmFeatures, InDomainBeatsScrambled) {
  const auto lm = ToyLm();
  const auto in = LmFeatures(Tokenize("the cat sat on the rug"), lm);
  const auto scrambled = LmFeatures(Tokenize("rug the on sat cat the"), lm);
  EXPECT_GT(in[1], scrambled[1]);
  EXPECT_LT(in[2], scrambled[2]);
}

TEST(LmFeatures, Definitions) {
  const auto lm = ToyLm();
  const Tokens t = Tokenize("the cat sat");
  const double total = std::log10(lm.Prob("the", {kBos})) + std::log10(lm.Prob("cat", {kBos, "the"})) +
                       std::log10(lm.Prob("sat", {kBos, "the", "cat"}));
  const auto f = LmFeatures(t, lm);
  EXPECT_NEAR(f[0], total, 1e-12);
  EXPECT_NEAR(f[1], total / 3, 1e-12);
  EXPECT_NEAR(f[2], std::pow(10.0, -total / 3), 1e-9);
  EXPECT_EQ(f[3], 0.0);
}

TEST(LmFeatures, AllOovRateIsOne) { EXPECT_EQ(LmFeatures(Tokenize("xx yy"), ToyLm())[3], 1.0); }

TEST(LmFeatures, SingleKnownWordTotalEqualsMean) {
  const auto f = LmFeatures({"cat"}, ToyLm());
  EXPECT_EQ(f[0], f[1]);
}

TEST(LmFeatures, EmptyIsZero) { EXPECT_EQ(LmFeatures({}, ToyLm()), std::vector<double>(4, 0.0)); }

// ---------------------------------------------------------------------------
// LEX features

Lexicon ToyLexicon() {
  return Lexicon::Parse("pa\tp a\nsi\ts i\nmama\tm a m a\npa\tt t\n",
                        nlohmann::json{{"p", "plosive"}, {"a", "vowel"}, {"s", "fricative"},
                                       {"i", "vowel"},   {"m", "nasal"}, {"t", "plosive"}});
}

TEST(LexFeatures, CategoryFrequencies) {
  const auto f = LexFeatures({"pa"}, ToyLexicon());
  EXPECT_EQ(f, (std::vector<double>{0.5, 0, 0.5, 0, 0, 0, 0, 0}));
}

TEST(LexFeatures, MeanOverOccurrences) {
  const auto lex = ToyLexicon();
  EXPECT_EQ(LexFeatures({"si", "si"}, lex), LexFeatures({"si"}, lex));
  const auto f = LexFeatures({"pa", "mama", "zz", "pa"}, lex);
  EXPECT_DOUBLE_EQ(f[0], (0.5 + 0.5 + 0.5) / 3);  // vowel
  EXPECT_DOUBLE_EQ(f[1], 0.5 / 3);                // nasal
  EXPECT_DOUBLE_EQ(f[2], 1.0 / 3);                // plosive
  EXPECT_DOUBLE_EQ(f[7], 0.25);
}

TEST(LexFeatures, AllOutOfLexicon) {
  EXPECT_EQ(LexFeatures({"zz", "yy"}, ToyLexicon()), (std::vector<double>{0, 0, 0, 0, 0, 0, 0, 1}));
}

TEST(Lexicon, FirstPronunciationWins) { EXPECT_EQ((*ToyLexicon().Find("pa"))[0], 0.5); }

TEST(Lexicon, PhonemeWithoutCategoryIsAnError) {
  try {
    Lexicon::Parse("ka\tk a\n", nlohmann::json{{"a", "vowel"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "phoneme \"k\" in pronunciation of \"ka\" has no category");
  }
  EXPECT_THROW(Lexicon::Parse("a\ta\n", nlohmann::json{{"a", "vowelish"}}), Error);
}

// ---------------------------------------------------------------------------
// POS features

TEST(PosFeatures, HistogramAndBigramTerm) {
  const auto m = PosModel::Train({Tokenize("N V N")});
  ASSERT_EQ(m.tagset(), (std::vector<std::string>{"N", "V"}));
  // Unigram: N 2, V 1, </s> 1 over 3 symbols; P1(x) = (c + 1) / 7.
  const double p_n_bos = (1 + 3.0 / 7) / 2, p_v_n = (1 + 2 * 2.0 / 7) / 4, p_n_v = (1 + 3.0 / 7) / 2;
  const auto f = m.Features(Tokenize("N V N"));
  ASSERT_EQ(f.size(), 3u);
  EXPECT_DOUBLE_EQ(f[0], 2.0 / 3);
  EXPECT_DOUBLE_EQ(f[1], 1.0 / 3);
  EXPECT_NEAR(f[2], (std::log10(p_n_bos) + std::log10(p_v_n) + std::log10(p_n_v)) / 3, 1e-12);
}

TEST(PosFeatures, EmptyIsZero) {
  EXPECT_EQ(PosModel::Train({Tokenize("N V")}).Features({}), std::vector<double>(3, 0.0));
}

TEST(PosFeatures, SingleTagTagset) {
  const auto m = PosModel::Train({Tokenize("N N"), Tokenize("N")});
  for (const char* s : {"N", "N N N", "N N"}) EXPECT_EQ(m.Features(Tokenize(s))[0], 1.0);
}

TEST(PosFeatures, UnknownTagIsNamed) {
  try {
    PosModel::Train({Tokenize("N V")}).Features(Tokenize("N ADJ"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "unknown POS tag \"ADJ\"");
  }
}

TEST(PosTags, SidecarParsing) {
  const auto t = ParsePosTags("u1\tN V\nu2\t\nu3\n");
  EXPECT_EQ(t.at("u1"), Tokenize("N V"));
  EXPECT_TRUE(t.at("u2").empty());
  EXPECT_TRUE(t.at("u3").empty());
  EXPECT_THROW(ParsePosTags("u1\tN\nu1\tV\n"), Error);
  EXPECT_THROW(TagsFor(t, "u9"), Error);
}

TEST(Families, Parsing) {
  EXPECT_EQ(ParseFamilies("lm+pos+lex"), (std::vector<Family>{Family::kPos, Family::kLex, Family::kLm}));
  EXPECT_EQ(ParseFamilies("sig,POS"), (std::vector<Family>{Family::kPos, Family::kSig}));
  EXPECT_THROW(ParseFamilies("pos+ngram"), Error);
  EXPECT_EQ(FamiliesName({Family::kPos, Family::kSig}), "POS+SIG");
}

// ---------------------------------------------------------------------------
// Regressors

Rows RandomRows(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  Rows x(n, std::vector<double>(d));
  for (auto& r : x)
    for (auto& v : r) v = g(rng);
  return x;
}

TEST(Ridge, RecoversExactLinearCoefficients) {
  std::mt19937_64 rng(5);
  Rows x = RandomRows(rng, 60, 5);
  for (auto& r : x)
    for (std::size_t j = 0; j < 5; ++j) r[j] *= static_cast<double>(j + 1);  // varied scales
  const std::vector<double> beta = {1.5, -2.0, 0.25, 3.0, -0.75};
  const double b0 = 12.0;
  std::vector<double> y;
  for (const auto& r : x) {
    double s = b0;
    for (std::size_t j = 0; j < 5; ++j) s += beta[j] * r[j];
    y.push_back(s);
  }
  // Oracle: least squares on the raw augmented design via QR.
  Eigen::MatrixXd a(60, 6);
  Eigen::VectorXd t(60);
  for (int i = 0; i < 60; ++i) {
    a(i, 0) = 1.0;
    for (int j = 0; j < 5; ++j) a(i, j + 1) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    t(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd oracle = a.colPivHouseholderQr().solve(t);
  const auto r = Ridge::Fit(x, y, 1e-12);
  const auto c = r.RawCoefficients();
  EXPECT_NEAR(r.RawIntercept(), oracle(0), 1e-6);
  EXPECT_NEAR(r.RawIntercept(), b0, 1e-6);
  for (int j = 0; j < 5; ++j) {
    EXPECT_NEAR(c[static_cast<std::size_t>(j)], oracle(j + 1), 1e-6);
    EXPECT_NEAR(c[static_cast<std::size_t>(j)], beta[static_cast<std::size_t>(j)], 1e-6);
  }
}

TEST(Ridge, PenaltyShrinksTowardsTheMean) {
  std::mt19937_64 rng(6);
  const Rows x = RandomRows(rng, 40, 3);
  std::vector<double> y;
  for (const auto& r : x) y.push_back(10 + 4 * r[0]);
  const double loose = std::abs(Ridge::Fit(x, y, 0.1).RawCoefficients()[0]);
  const double tight = std::abs(Ridge::Fit(x, y, 1000.0).RawCoefficients()[0]);
  EXPECT_LT(tight, loose);
}

TEST(ExtraTrees, BeatsTheMeanOnTrainingData) {
  std::mt19937_64 rng(8);
  const Rows x = RandomRows(rng, 200, 4);
  std::uniform_real_distribution<double> u(0, 100);
  std::vector<double> y;
  for (std::size_t i = 0; i < x.size(); ++i) y.push_back(u(rng));
  const auto et = ExtraTrees::Fit(x, y, {.n_trees = 20, .min_leaf = 2, .seed = 3});
  double mean = 0;
  for (double v : y) mean += v / static_cast<double>(y.size());
  double mae_et = 0, mae_mean = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mae_et += std::abs(et.Predict(x[i]) - y[i]);
    mae_mean += std::abs(mean - y[i]);
  }
  EXPECT_LE(mae_et, mae_mean);
}

TEST(ExtraTrees, PredictionIsTheMeanOfTrees) {
  std::mt19937_64 rng(9);
  const Rows x = RandomRows(rng, 80, 3);
  std::vector<double> y;
  for (const auto& r : x) y.push_back(r[0] * r[1] + r[2]);
  const auto et = ExtraTrees::Fit(x, y, {.n_trees = 7, .min_leaf = 2, .seed = 1});
  ASSERT_EQ(et.trees().size(), 7u);
  for (const auto& q : RandomRows(rng, 20, 3)) {
    double s = 0;
    for (const auto& t : et.trees()) s += ExtraTrees::PredictTree(t, q);
    EXPECT_NEAR(et.Predict(q), s / 7, 1e-12);
  }
}

TEST(ExtraTrees, LeavesHoldAtLeastMinLeafSamples) {
  std::mt19937_64 rng(10);
  const Rows x = RandomRows(rng, 150, 2);
  std::vector<double> y;
  for (const auto& r : x) y.push_back(r[0] > 0 ? 10 : 0 + r[1]);
  for (std::size_t min_leaf : {1u, 2u, 5u}) {
    const auto et = ExtraTrees::Fit(x, y, {.n_trees = 5, .min_leaf = min_leaf, .seed = 4});
    for (const auto& tree : et.trees()) {
      std::vector<std::size_t> hits(tree.size(), 0);
      for (const auto& r : x) {
        std::size_t n = 0;
        while (tree[n].feature >= 0)
          n = static_cast<std::size_t>(r[static_cast<std::size_t>(tree[n].feature)] <= tree[n].threshold
                                           ? tree[n].left
                                           : tree[n].right);
        ++hits[n];
      }
      for (std::size_t n = 0; n < tree.size(); ++n)
        if (tree[n].feature < 0) EXPECT_GE(hits[n], min_leaf);
    }
  }
}

TEST(ExtraTrees, SeedDeterminesTheModel) {
  std::mt19937_64 rng(11);
  const Rows x = RandomRows(rng, 50, 3);
  std::vector<double> y;
  for (const auto& r : x) y.push_back(r[0]);
  const auto a = ExtraTrees::Fit(x, y, {.n_trees = 4, .min_leaf = 2, .seed = 2});
  const auto b = ExtraTrees::Fit(x, y, {.n_trees = 4, .min_leaf = 2, .seed = 2});
  EXPECT_EQ(a.ToJson(), b.ToJson());
}

FeatureRow Row(std::vector<double> lm) { return {"r", std::nullopt, std::nullopt, std::move(lm), std::nullopt}; }

TEST(Regressor, ConstantTargetsGiveConstantPredictions) {
  std::mt19937_64 rng(12);
  std::vector<FeatureRow> rows;
  for (const auto& r : RandomRows(rng, 30, 4)) rows.push_back(Row(r));
  for (auto kind : {RegressorKind::kExtraTrees, RegressorKind::kRidge}) {
    RegressorConfig cfg;
    cfg.kind = kind;
    cfg.families = {Family::kLm};
    const auto reg = Regressor::Fit(rows, std::vector<double>(30, 50.0), cfg);
    for (const auto& r : RandomRows(rng, 10, 4)) EXPECT_NEAR(reg.Predict(Row(r)), 50.0, 1e-9);
  }
}

TEST(Regressor, NegativeOutputIsClippedToZero) {
  std::vector<FeatureRow> rows;
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) {
    rows.push_back(Row({double(i), 0, 0, 0}));
    y.push_back(10.0 * i);
  }
  RegressorConfig cfg;
  cfg.kind = RegressorKind::kRidge;
  cfg.families = {Family::kLm};
  cfg.lambda = 1e-9;
  const auto reg = Regressor::Fit(rows, y, cfg);
  EXPECT_NEAR(reg.Predict(Row({5, 0, 0, 0})), 50.0, 1e-6);
  EXPECT_EQ(reg.Predict(Row({-3, 0, 0, 0})), 0.0);
}

TEST(Regressor, MissingFamilyIsNamed) {
  std::vector<FeatureRow> rows(3, FeatureRow{"r", std::vector<double>{1}, std::nullopt, std::nullopt,
                                             std::vector<double>{2}});
  rows[1].sig = std::vector<double>{3};
  rows[2].sig = std::vector<double>{5};
  RegressorConfig cfg;
  cfg.kind = RegressorKind::kRidge;
  cfg.families = {Family::kPos, Family::kSig};
  const auto reg = Regressor::Fit(rows, {1, 2, 3}, cfg);
  FeatureRow lacking = rows[0];
  lacking.sig.reset();
  try {
    reg.Predict(lacking);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "row lacks SIG features");
  }
}

TEST(Regressor, ZeroRowsIsAnError) { EXPECT_THROW(Regressor::Fit({}, {}, {}), Error); }

TEST(Regressor, JsonRoundTripPredictsIdentically) {
  std::mt19937_64 rng(13);
  std::vector<FeatureRow> rows;
  std::vector<double> y;
  for (const auto& r : RandomRows(rng, 40, 4)) {
    rows.push_back(Row(r));
    y.push_back(std::abs(20 * r[0] + 5 * r[3]));
  }
  for (auto kind : {RegressorKind::kExtraTrees, RegressorKind::kRidge}) {
    RegressorConfig cfg;
    cfg.kind = kind;
    cfg.families = {Family::kLm};
    cfg.trees.n_trees = 5;
    const auto reg = Regressor::Fit(rows, y, cfg);
    const auto back = Regressor::FromJson(nlohmann::json::parse(reg.ToJson().dump()));
    EXPECT_EQ(back.kind(), kind);
    for (const auto& r : rows) EXPECT_EQ(back.Predict(r), reg.Predict(r));
  }
  EXPECT_THROW(Regressor::FromJson(nlohmann::json{{"kind", "ridge"}}), Error);
}

// ---------------------------------------------------------------------------
// Extraction on a synthetic corpus

class SynthBaseline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / "werpred_baseline_test");
    fs::remove_all(*dir_);
    corpus::SynthConfig sc;
    sc.n_utterances = 24;
    sc.seed = 5;
    corpus_ = new corpus::SynthCorpus(corpus::SynthesizeCorpus(sc, *dir_ / "audio"));
    res_ = new corpus::SynthResources(corpus::WriteSynthResources(*corpus_, sc, *dir_));
    tags_ = new PosTags(LoadPosTags(res_->pos_tags));
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete res_;
    delete tags_;
    delete dir_;
  }

  static FeatureExtractor Extractor() {
    return FeatureExtractor::Fit(corpus_->dataset, *tags_,
                                 Lexicon::Load(res_->lexicon, res_->phoneme_categories));
  }

  static inline fs::path* dir_ = nullptr;
  static inline corpus::SynthCorpus* corpus_ = nullptr;
  static inline corpus::SynthResources* res_ = nullptr;
  static inline PosTags* tags_ = nullptr;
};

TEST_F(SynthBaseline, RowsHaveFixedFiniteDimensions) {
  const auto ex = Extractor();
  const auto fams = ParseFamilies("pos+lex+lm+sig");
  for (const auto& u : corpus_->dataset.utterances) {
    const auto row = ex.Extract(u, fams, tags_);
    for (Family f : fams) {
      ASSERT_TRUE(row.family(f).has_value());
      EXPECT_EQ(row.family(f)->size(), ex.Dim(f));
      for (double v : *row.family(f)) EXPECT_TRUE(std::isfinite(v));
    }
  }
  EXPECT_EQ(ex.ColumnNames(fams).size(), ex.Dim(Family::kPos) + 8 + 4 + 43);
}

TEST_F(SynthBaseline, ExtractionIsPermutationEquivariant) {
  const auto ex = Extractor();
  const auto fams = ParseFamilies("pos+lex+lm+sig");
  auto shuffled = corpus_->dataset.utterances;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (const auto& u : shuffled) {
    const auto it = std::find_if(corpus_->dataset.utterances.begin(), corpus_->dataset.utterances.end(),
                                 [&](const corpus::Utterance& v) { return v.id == u.id; });
    EXPECT_EQ(ex.Extract(u, fams, tags_).Concat(fams), ex.Extract(*it, fams, tags_).Concat(fams));
  }
}

TEST_F(SynthBaseline, CachedSignalFeaturesMatchFreshOnes) {
  const auto ex = Extractor();
  const dsp::FeatureCache cache(*dir_ / "cache");
  const auto& u = corpus_->dataset.utterances[3];
  const auto fresh = ex.Extract(u, {Family::kSig}, nullptr);
  const auto stored = ex.Extract(u, {Family::kSig}, nullptr, cache);
  const auto hit = ex.Extract(u, {Family::kSig}, nullptr, cache);
  EXPECT_EQ(fresh.sig, stored.sig);
  EXPECT_EQ(fresh.sig, hit.sig);
}

TEST_F(SynthBaseline, MissingAudioAndTagsAreNamed) {
  const auto ex = Extractor();
  auto u = corpus_->dataset.utterances[0];
  u.audio_path.reset();
  try {
    ex.Extract(u, {Family::kSig}, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), u.id + ": audio required");
  }
  u.id = "nobody";
  EXPECT_THROW(ex.Extract(u, {Family::kPos}, tags_), Error);
}

TEST_F(SynthBaseline, SavedModelPredictsIdentically) {
  const auto ex = Extractor();
  const auto fams = ParseFamilies("pos+lex+lm");
  std::vector<FeatureRow> rows;
  std::vector<double> y;
  for (const auto& u : corpus_->dataset.utterances) {
    rows.push_back(ex.Extract(u, fams, tags_));
    y.push_back(scoring::Wer(scoring::AlignWords(*u.ref, u.hyp)));
  }
  RegressorConfig cfg;
  cfg.families = fams;
  cfg.trees.n_trees = 10;
  const auto reg = Regressor::Fit(rows, y, cfg);
  SaveBaseline(*dir_ / "model", ex, reg, res_->lexicon, res_->phoneme_categories);
  const auto back = LoadBaseline(*dir_ / "model");
  for (const auto& u : corpus_->dataset.utterances)
    EXPECT_EQ(back.regressor.Predict(back.extractor.Extract(u, fams, tags_)),
              reg.Predict(ex.Extract(u, fams, tags_)));
}

TEST_F(SynthBaseline, FeatureCsvNamesEveryColumn) {
  const auto ex = Extractor();
  const auto fams = ParseFamilies("lex+lm");
  const auto csv = FeatureCsv({ex.Extract(corpus_->dataset.utterances[0], fams, nullptr)}, fams, ex);
  const auto header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(header.rfind("id,lex_vowel,", 0), 0u);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 12);
  const auto line = csv.substr(csv.find('\n') + 1);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 12);
}

}  // namespace
}  // namespace werpred::baseline
