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

#include <cmath>
#include <filesystem>
#include <random>

#include "werpred/models/architectures.hpp"
#include "werpred/models/features.hpp"
#include "werpred/models/trainer.hpp"
#include "werpred/nn/gradcheck.hpp"

namespace werpred::models {
namespace {

namespace fs = std::filesystem;
using nn::Batch;

Tensor<double> Random(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Tensor<double> t(rows, cols);
  for (auto& v : t.values()) v = g(rng);
  return t;
}

// ---- architectures ---------------------------------------------------------

TEST(TextCnn, PooledWidth) {
  EXPECT_EQ(TextCnnConfig{}.pooled_width(), 1280u);
  TextCnnConfig one;
  one.windows = {3};
  one.filters = 4;
  EXPECT_EQ(one.pooled_width(), 4u);
  nn::Sequential<float> seq;
  one.fc_dims = {5};
  one.dropout = {0.0};
  EXPECT_EQ(BuildTextCnn(one, textfeat::EmbedConfig{10, 2}, seq), 5u);
  EXPECT_EQ(seq[0].Infer({Tensor<float>(10, 2, 1.0f)})[0].cols(), 4u);
}

TEST(TextCnn, WindowLongerThanUtteranceIsAnError) {
  auto spec = DeskProfile({InputKind::kEmbed}, HeadKind::kSoftmax);
  spec.text.windows = {3, 33};
  EXPECT_THROW(BuildNetwork<float>(spec), Error);
  spec.text.windows = {0};
  EXPECT_THROW(BuildNetwork<float>(spec), Error);
}

TEST(TextCnn, PaperScaleZeroInputIsFinite) {
  auto net = BuildNetwork<float>(PaperProfile({InputKind::kEmbed}, HeadKind::kSoftmax));
  net.Init(1);
  net.set_mode(nn::Mode::kEval);
  const auto y = net.Infer({{Tensor<float>(296, 100)}});
  ASSERT_EQ(y.size(), 1u);
  EXPECT_TRUE(std::isfinite(y[0][0]));
}

TEST(Descriptor, ParsesRepeatsStridesAndPools) {
  const auto st = ParseDescriptor("c80s4x64 p4 2c3x8 gap");
  ASSERT_EQ(st.size(), 5u);
  EXPECT_EQ(st[0].width, 80u);
  EXPECT_EQ(st[0].stride, 4u);
  EXPECT_EQ(st[0].filters, 64u);
  EXPECT_EQ(st[1].kind, ConvStage::Kind::kPool);
  EXPECT_EQ(st[3].filters, 8u);
  EXPECT_EQ(st[4].kind, ConvStage::Kind::kGlobalAvg);
  for (const char* bad : {"c3", "x3", "p", "3c3x0", "c3x8q"}) EXPECT_THROW(ParseDescriptor(bad), Error) << bad;
}

TEST(Descriptor, DefaultsHaveSeventeenConvs) {
  for (auto kind : {InputKind::kRaw, InputKind::kMel, InputKind::kMfcc}) {
    for (const auto& spec : {DeskProfile({kind}, HeadKind::kSoftmax), PaperProfile({kind}, HeadKind::kSoftmax)}) {
      const auto st = ParseDescriptor(spec.signal.descriptor);
      EXPECT_EQ(std::count_if(st.begin(), st.end(), [](auto& s) { return s.kind == ConvStage::Kind::kConv; }), 17);
    }
  }
  SignalCnnConfig cfg;
  cfg.descriptor = "c3x8 p4 4c3x8 gap";
  EXPECT_THROW(cfg.Validate(), Error);
}

class SignalShapes : public ::testing::TestWithParam<std::pair<InputKind, std::size_t>> {};

TEST_P(SignalShapes, PaperScalePenultimateIs128) {
  const auto [kind, cols] = GetParam();
  const auto spec = PaperProfile({kind}, HeadKind::kSoftmax);
  nn::Sequential<float> seq;
  EXPECT_EQ(BuildSignalCnn(spec.signal, InputChannels(kind, spec), seq), 128u);
  nn::Rng rng(1);
  seq.Init(rng);
  const std::size_t rows = kind == InputKind::kRaw ? 48000 : 601;
  const auto y = seq.Infer({Tensor<float>(rows, cols, 0.1f)});
  EXPECT_EQ(y[0].rows(), 1u);
  EXPECT_EQ(y[0].cols(), 128u);
}

INSTANTIATE_TEST_SUITE_P(AllInputs, SignalShapes,
                         ::testing::Values(std::pair{InputKind::kRaw, std::size_t{1}},
                                           std::pair{InputKind::kMel, std::size_t{96}},
                                           std::pair{InputKind::kMfcc, std::size_t{13}}));

TEST(SignalCnn, WrongInputShapeIsAnError) {
  auto net = BuildNetwork<float>(DeskProfile({InputKind::kMel}, HeadKind::kSoftmax));
  net.Init(1);
  EXPECT_THROW(net.Infer({{Tensor<float>(601, 13)}}), Error);
}

TEST(Joint, FusionWidths) {
  auto spec = PaperProfile({InputKind::kEmbed, InputKind::kRaw}, HeadKind::kSoftmax);
  auto net = BuildNetwork<float>(spec);
  auto& fusion = dynamic_cast<nn::Dense<float>&>(net.trunk()[0]);
  EXPECT_EQ(fusion.weight().value.rows(), 256u);
  spec.fusion_dim = 64;
  auto net64 = BuildNetwork<float>(spec);
  EXPECT_EQ(HeadDense(net64).weight().value.rows(), 64u);
  spec.text.fc_dims = {256, 100};
  EXPECT_THROW(BuildNetwork<float>(spec), Error);
}

TEST(Inputs, Parsing) {
  EXPECT_EQ(ParseInputs("embed+raw"), (std::vector<InputKind>{InputKind::kEmbed, InputKind::kRaw}));
  EXPECT_EQ(ParseInputs("mfcc"), (std::vector<InputKind>{InputKind::kMfcc}));
  for (const char* bad : {"raw+embed", "embed+embed", "mel+raw", "embed+raw+mel", "wav", ""})
    EXPECT_THROW(ParseInputs(bad), Error) << bad;
}

// ---- heads -----------------------------------------------------------------

const std::vector<double> kWerVector = {0, 25, 50, 75, 100, 150};

TEST(Head, Examples) {
  EXPECT_NEAR(ExpectedWer({800, 0, 0, 0, 0, 0}, kWerVector), 0.0, 1e-12);
  EXPECT_NEAR(ExpectedWer(std::vector<double>(6, 0.0), kWerVector), 400.0 / 6.0, 1e-9);
  EXPECT_NEAR(ExpectedWer({-800, 0, 0, -800, -800, -800}, kWerVector), 37.5, 1e-9);
}

TEST(Head, RangeAndShiftInvariance) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 10.0);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> z(6);
    for (auto& v : z) v = g(rng);
    const double p = ExpectedWer(z, kWerVector);
    ASSERT_GE(p, 0.0);
    ASSERT_LE(p, 150.0);
    const double c = g(rng) * 10;
    for (auto& v : z) v += c;
    ASSERT_NEAR(ExpectedWer(z, kWerVector), p, 1e-9);
  }
}

TEST(Head, NetworkLayersMatchTheFormula) {
  nn::Sequential<double> head;
  AppendHead(HeadConfig{}, 6, head);
  auto& dense = dynamic_cast<nn::Dense<double>&>(head[0]);
  dense.weight().value = Tensor<double>(6, 6);
  for (std::size_t i = 0; i < 6; ++i) dense.weight().value(i, i) = 1.0;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = Random(1, 6, rng, 3.0);
    EXPECT_NEAR(head.Infer({x})[0][0], ExpectedWer(x.values(), kWerVector), 1e-9);
  }
}

TEST(Head, ReluHeadIsNonNegative) {
  auto net = BuildNetwork<double>(DeskProfile({InputKind::kEmbed}, HeadKind::kRelu));
  net.Init(2);
  net.set_mode(nn::Mode::kEval);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) EXPECT_GE(net.Infer({{Random(32, 16, rng)}})[0][0], 0.0);
}

TEST(Head, EvalIgnoresDropoutRatesAndRng) {
  auto a_spec = DeskProfile({InputKind::kEmbed}, HeadKind::kSoftmax);
  auto b_spec = a_spec;
  b_spec.text.dropout = {0.0, 0.1};
  auto a = BuildNetwork<double>(a_spec), b = BuildNetwork<double>(b_spec);
  a.Init(4);
  b.Init(4);
  b.rng().seed(99);
  std::mt19937_64 rng(6);
  const Batch<double> x = {Random(32, 16, rng), Random(32, 16, rng)};
  a.set_mode(nn::Mode::kEval);
  b.set_mode(nn::Mode::kEval);
  EXPECT_EQ(a.Forward({x}), b.Forward({x}));
}

// ---- gradient checks on full desk-scale stacks -----------------------------

class ArchitectureGradCheck : public ::testing::TestWithParam<std::string> {};

TEST_P(ArchitectureGradCheck, FiveSeeds) {
  const auto inputs = ParseInputs(GetParam());
  for (auto head : {HeadKind::kSoftmax, HeadKind::kRelu}) {
    const auto spec = DeskProfile(inputs, head);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto net = BuildNetwork<double>(spec);
      net.Init(seed);
      if (head == HeadKind::kRelu) HeadDense(net).bias().value.Fill(1.0);
      std::mt19937_64 rng(seed);
      std::vector<Batch<double>> x;
      for (auto k : inputs) {
        const std::size_t rows = k == InputKind::kEmbed ? spec.embed.max_len : spec.dsp.n_samples;
        x.push_back({Random(rows, InputChannels(k, spec), rng), Random(rows, InputChannels(k, spec), rng)});
      }
      nn::GradCheckOptions opt;
      opt.max_coords = 3;
      opt.seed = seed;
      const auto res = nn::GradCheck(net, x, opt);
      EXPECT_LT(res.max_rel_error, 1e-5) << GetParam() << " seed " << seed << " worst " << res.worst
                                         << " a=" << res.worst_analytic << " n=" << res.worst_numeric;
      EXPECT_GT(res.checked, 10 * res.skipped_kinks);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Desk, ArchitectureGradCheck, ::testing::Values("embed", "raw", "embed+raw"),
                         [](const auto& info) {
                           std::string s = info.param;
                           std::replace(s.begin(), s.end(), '+', '_');
                           return s;
                         });

TEST(Joint, GradientReachesBothBranches) {
  const auto spec = DeskProfile({InputKind::kEmbed, InputKind::kRaw}, HeadKind::kSoftmax);
  auto net = BuildNetwork<double>(spec);
  net.Init(3);
  std::mt19937_64 rng(3);
  const std::vector<Batch<double>> x = {{Random(32, 16, rng)}, {Random(48000, 1, rng, 0.3)}};
  net.ZeroGrad();
  net.Forward(x);
  net.Backward({Tensor<double>(1, 1, 1.0)});
  auto text_w = net.branch(0).Params()[0];
  auto sig_w = net.branch(1).Params()[0];
  double t = 0, s = 0;
  for (double v : text_w->grad.values()) t = std::max(t, std::abs(v));
  for (double v : sig_w->grad.values()) s = std::max(s, std::abs(v));
  EXPECT_GT(t, 1e-8);
  EXPECT_GT(s, 1e-8);
}

// ---- training and prediction on a small synthetic corpus -------------------

class SmallCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / "werpred_models_test");
    fs::remove_all(*dir_);
    corpus::SynthConfig sc;
    sc.n_utterances = 48;
    sc.seed = 11;
    corpus_ = new corpus::SynthCorpus(corpus::SynthesizeCorpus(sc, *dir_ / "audio"));
    const auto res = corpus::WriteSynthResources(*corpus_, sc, *dir_);
    table_ = new textfeat::EmbeddingTable(textfeat::LoadEmbeddings(res.embeddings).table);
    embeddings_ = new fs::path(res.embeddings);
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete table_;
    delete embeddings_;
    delete dir_;
  }

  static FeatureSource Source() { return FeatureSource{table_, std::nullopt}; }

  static inline fs::path* dir_ = nullptr;
  static inline corpus::SynthCorpus* corpus_ = nullptr;
  static inline textfeat::EmbeddingTable* table_ = nullptr;
  static inline fs::path* embeddings_ = nullptr;
};

TEST_F(SmallCorpus, FeatureStoreRestoresPadding) {
  const auto spec = DeskProfile({InputKind::kEmbed, InputKind::kRaw}, HeadKind::kSoftmax);
  const auto store = FeatureStore::Build(corpus_->dataset, spec, Source());
  for (std::size_t i : {0, 7, 31}) {
    const auto& u = corpus_->dataset.utterances[i];
    EXPECT_EQ(store.Get(0, i), Featurize(u, InputKind::kEmbed, spec, Source()));
    EXPECT_EQ(store.Get(1, i), Featurize(u, InputKind::kRaw, spec, Source()));
  }
  EXPECT_EQ(store.Get(1, 0).rows(), 48000u);
}

TEST_F(SmallCorpus, DegenerateProtocolKeepsTheOnlyModel) {
  corpus::Dataset d{"ten", {corpus_->dataset.utterances.begin(), corpus_->dataset.utterances.begin() + 10}};
  const auto spec = DeskProfile({InputKind::kEmbed}, HeadKind::kSoftmax);
  TrainProtocol p;
  p.epochs = 1;
  p.restarts = 1;
  const auto r = Train(spec, FeatureStore::Build(d, spec, Source()), ReferenceWers(d), p);
  EXPECT_EQ(r.best, 0u);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].epochs.size(), 1u);
}

TEST_F(SmallCorpus, SelectionReturnsTheBestDevRestart) {
  const auto& d = corpus_->dataset;
  const auto spec = DeskProfile({InputKind::kEmbed}, HeadKind::kSoftmax);
  const auto store = FeatureStore::Build(d, spec, Source());
  TrainProtocol p;
  p.epochs = 3;
  p.restarts = 3;
  p.seed = 7;
  p.jobs = 2;
  const auto targets = ReferenceWers(d);
  const auto r = Train(spec, store, targets, p);
  ASSERT_EQ(r.log.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.log[i].seed, 7 + i);
    EXPECT_LE(r.log[r.best].final_dev_mae(), r.log[i].final_dev_mae());
  }
  // The returned network reproduces the logged dev MAE.
  const auto mask = corpus::DevMask(d.size(), p.dev_fraction, p.seed);
  const auto pred = PredictStore(r.net, store);
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (mask[i]) sum += std::abs(pred[i] - std::min(targets[i], 150.0)), ++n;
  EXPECT_NEAR(sum / n, r.log[r.best].final_dev_mae(), 1e-4);
}

TEST_F(SmallCorpus, ConstantTargetIsLearned) {
  const auto& d = corpus_->dataset;
  const auto spec = DeskProfile({InputKind::kEmbed}, HeadKind::kSoftmax);
  const auto store = FeatureStore::Build(d, spec, Source());
  TrainProtocol p;
  p.epochs = 50;
  p.restarts = 1;
  const std::vector<double> fifty(d.size(), 50.0);
  const auto r = Train(spec, store, fifty, p);
  double mae = 0;
  for (double v : PredictStore(r.net, store)) mae += std::abs(v - 50.0);
  EXPECT_LT(mae / d.size(), 5.0);
}

TEST_F(SmallCorpus, NoReferencesIsAnError) {
  corpus::Dataset d{"noref", {corpus_->dataset.utterances[0]}};
  d.utterances[0].ref.reset();
  EXPECT_THROW(ReferenceWers(d), Error);
}

TEST_F(SmallCorpus, PredictionNeedsAudioOnlyForSignalModels) {
  corpus::Dataset d{"noaudio", {corpus_->dataset.utterances.begin(), corpus_->dataset.utterances.begin() + 8}};
  d.utterances[7].id = "u7";
  d.utterances[7].audio_path.reset();
  auto text_spec = DeskProfile({InputKind::kEmbed}, HeadKind::kSoftmax);
  auto text = BuildNetwork<float>(text_spec);
  text.Init(1);
  text.set_mode(nn::Mode::kEval);
  const auto a = PredictDataset(text, text_spec, d, Source());
  const auto b = PredictDataset(text, text_spec, d, Source(), 3);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].wer_pred, b[i].wer_pred);

  auto joint_spec = DeskProfile({InputKind::kEmbed, InputKind::kRaw}, HeadKind::kSoftmax);
  auto joint = BuildNetwork<float>(joint_spec);
  joint.Init(1);
  try {
    PredictDataset(joint, joint_spec, d, Source());
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "u7: audio required");
  }
}

TEST_F(SmallCorpus, SavedModelPredictsIdentically) {
  const auto& d = corpus_->dataset;
  const auto spec = DeskProfile({InputKind::kEmbed, InputKind::kMfcc}, HeadKind::kRelu);
  TrainProtocol p;
  p.epochs = 1;
  p.restarts = 1;
  auto r = Train(spec, FeatureStore::Build(d, spec, Source()), ReferenceWers(d), p);
  SaveModel(*dir_ / "model", spec, r.net, *embeddings_);
  const auto m = LoadModel(*dir_ / "model");
  EXPECT_EQ(SpecToJson(m.spec), SpecToJson(spec));
  EXPECT_EQ(m.embeddings, fs::absolute(*embeddings_));
  const auto a = PredictDataset(r.net, spec, d, Source());
  const auto b = PredictDataset(m.net, m.spec, d, Source());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].wer_pred, b[i].wer_pred);
    EXPECT_GE(a[i].wer_pred, 0.0);
  }
}

TEST_F(SmallCorpus, TrainingIsBitDeterministic) {
  const auto& d = corpus_->dataset;
  const auto spec = DeskProfile({InputKind::kEmbed, InputKind::kRaw}, HeadKind::kSoftmax);
  const auto store = FeatureStore::Build(d, spec, Source());
  TrainProtocol p;
  p.epochs = 2;
  p.restarts = 2;
  auto a = Train(spec, store, ReferenceWers(d), p);
  p.jobs = 2;
  auto b = Train(spec, store, ReferenceWers(d), p);
  EXPECT_EQ(nn::EncodeCheckpoint(a.net), nn::EncodeCheckpoint(b.net));
}

TEST(SpecJson, RejectsBrokenDescriptors) {
  auto j = SpecToJson(DeskProfile({InputKind::kRaw}, HeadKind::kSoftmax));
  j["head"] = "sigmoid";
  EXPECT_THROW(SpecFromJson(j), Error);
  j = SpecToJson(DeskProfile({InputKind::kRaw}, HeadKind::kSoftmax));
  j.erase("dsp");
  EXPECT_THROW(SpecFromJson(j), Error);
}

}  // namespace
}  // namespace werpred::models
