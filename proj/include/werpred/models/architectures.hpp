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

// Predictor architectures: a Kim-style text CNN over word embeddings, the
// 17-conv signal CNN, their fusion, and the two prediction heads.

#ifndef WERPRED_MODELS_ARCHITECTURES_HPP_
#define WERPRED_MODELS_ARCHITECTURES_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "werpred/common.hpp"
#include "werpred/dsp.hpp"
#include "werpred/nn/layers.hpp"
#include "werpred/nn/network.hpp"
#include "werpred/textfeat.hpp"

namespace werpred::models {

enum class InputKind { kEmbed, kRaw, kMel, kMfcc };

inline std::string InputName(InputKind k) {
  switch (k) {
    case InputKind::kEmbed: return "embed";
    case InputKind::kRaw: return "raw";
    case InputKind::kMel: return "mel";
    case InputKind::kMfcc: return "mfcc";
  }
  return "?";
}

inline InputKind ParseInput(const std::string& s) {
  if (s == "embed") return InputKind::kEmbed;
  if (s == "raw") return InputKind::kRaw;
  if (s == "mel") return InputKind::kMel;
  if (s == "mfcc") return InputKind::kMfcc;
  throw Error("unknown input kind \"" + s + "\"");
}

// "embed", "raw", "embed+mel", ...: at most one text and one signal stream,
// text first.
inline std::vector<InputKind> ParseInputs(const std::string& s) {
  std::vector<InputKind> out;
  std::size_t start = 0;
  while (true) {
    const auto plus = s.find('+', start);
    out.push_back(ParseInput(s.substr(start, plus == std::string::npos ? std::string::npos : plus - start)));
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  const auto n_text = std::count(out.begin(), out.end(), InputKind::kEmbed);
  if (out.size() > 2 || n_text > 1 || (out.size() == 2 && (out[0] != InputKind::kEmbed || n_text != 1)))
    throw Error("inputs must be one stream or embed+<signal>, got \"" + s + "\"");
  return out;
}

inline std::string InputsName(const std::vector<InputKind>& inputs) {
  std::string s;
  for (auto k : inputs) s += (s.empty() ? "" : "+") + InputName(k);
  return s;
}

enum class HeadKind { kSoftmax, kRelu };

struct HeadConfig {
  HeadKind kind = HeadKind::kSoftmax;
  std::vector<double> wer_vector = {0, 25, 50, 75, 100, 150};

  void Validate() const {
    if (wer_vector.empty()) throw Error("wer_vector is empty");
    if (!std::is_sorted(wer_vector.begin(), wer_vector.end())) throw Error("wer_vector must be non-decreasing");
  }
};

struct TextCnnConfig {
  std::vector<std::size_t> windows = {1, 3, 5, 7, 9};
  std::size_t filters = 256;
  std::vector<std::size_t> fc_dims = {256, 128};
  std::vector<double> dropout = {0.2, 0.6};
  std::size_t top_k = 4;

  void Validate(std::size_t max_len) const {
    if (windows.empty()) throw Error("text CNN needs at least one window size");
    for (auto h : windows)
      if (h == 0 || h > max_len)
        throw Error("window size " + std::to_string(h) + " must be in [1, " + std::to_string(max_len) + "]");
    if (filters == 0) throw Error("text CNN needs at least one filter per window");
    if (fc_dims.size() != dropout.size()) throw Error("text CNN: one dropout rate per hidden layer");
    if (fc_dims.empty()) throw Error("text CNN needs at least one hidden layer");
  }

  std::size_t pooled_width() const { return windows.size() * filters; }
};

// One stage of the signal conv stack.
struct ConvStage {
  enum class Kind { kConv, kPool, kGlobalAvg } kind = Kind::kConv;
  std::size_t width = 1, stride = 1, filters = 0;
};

// Stack descriptor, e.g. "c80s4x64 p4 4c3x64 gap": "[n]c<width>[s<stride>]x<filters>"
// is n conv layers (each followed by batch norm and ReLU), "p<width>" a max
// pool, "gap" the global average pool.
inline std::vector<ConvStage> ParseDescriptor(const std::string& text) {
  std::vector<ConvStage> out;
  std::istringstream in(text);
  std::string tok;
  auto fail = [&](const std::string& t) { return Error("bad conv descriptor token \"" + t + "\""); };
  auto number = [&](const std::string& t, std::size_t& pos) {
    std::size_t end = pos;
    while (end < t.size() && std::isdigit(static_cast<unsigned char>(t[end]))) ++end;
    if (end == pos) throw fail(t);
    const auto v = std::stoul(t.substr(pos, end - pos));
    pos = end;
    return static_cast<std::size_t>(v);
  };
  while (in >> tok) {
    if (tok == "gap") {
      out.push_back({ConvStage::Kind::kGlobalAvg});
      continue;
    }
    std::size_t pos = 0;
    if (tok[0] == 'p') {
      ++pos;
      const auto w = number(tok, pos);
      if (pos != tok.size() || w == 0) throw fail(tok);
      out.push_back({ConvStage::Kind::kPool, w, w, 0});
      continue;
    }
    std::size_t repeat = 1;
    if (std::isdigit(static_cast<unsigned char>(tok[0]))) repeat = number(tok, pos);
    if (pos >= tok.size() || tok[pos] != 'c') throw fail(tok);
    ++pos;
    ConvStage c{ConvStage::Kind::kConv, number(tok, pos), 1, 0};
    if (pos < tok.size() && tok[pos] == 's') c.stride = number(tok, ++pos);
    if (pos >= tok.size() || tok[pos] != 'x') throw fail(tok);
    c.filters = number(tok, ++pos);
    if (pos != tok.size() || repeat == 0 || c.width == 0 || c.stride == 0 || c.filters == 0) throw fail(tok);
    for (std::size_t r = 0; r < repeat; ++r) out.push_back(c);
  }
  return out;
}

inline constexpr std::size_t kSignalConvLayers = 17;

struct SignalCnnConfig {
  InputKind input = InputKind::kRaw;
  std::string descriptor = "c80s4x64 p4 4c3x64 p4 4c3x128 p4 4c3x256 p4 4c3x512 gap";
  std::vector<std::size_t> fc_dims = {512, 256, 128};
  double dropout = 0.2;  // between the last two hidden layers
  double bn_momentum = 0.9;

  void Validate() const {
    if (input == InputKind::kEmbed) throw Error("signal CNN input must be raw, mel or mfcc");
    const auto stages = ParseDescriptor(descriptor);
    const auto n_conv = std::count_if(stages.begin(), stages.end(),
                                      [](const ConvStage& s) { return s.kind == ConvStage::Kind::kConv; });
    if (static_cast<std::size_t>(n_conv) != kSignalConvLayers)
      throw Error("signal CNN descriptor has " + std::to_string(n_conv) + " conv layers, expected " +
                  std::to_string(kSignalConvLayers));
    if (stages.empty() || stages.front().kind != ConvStage::Kind::kConv)
      throw Error("signal CNN descriptor must start with a conv layer");
    if (stages.back().kind != ConvStage::Kind::kGlobalAvg)
      throw Error("signal CNN descriptor must end with gap");
    if (fc_dims.size() < 2) throw Error("signal CNN needs at least two hidden layers");
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw Error("bn_momentum must be in [0, 1)");
  }
};

struct ModelSpec {
  std::string profile = "desk";
  std::vector<InputKind> inputs = {InputKind::kEmbed};
  TextCnnConfig text;
  SignalCnnConfig signal;
  std::size_t fusion_dim = 128;
  HeadConfig head;
  textfeat::EmbedConfig embed;
  dsp::DspConfig dsp;

  bool has_text() const { return inputs.front() == InputKind::kEmbed; }
  bool has_signal() const { return inputs.back() != InputKind::kEmbed; }
  bool joint() const { return inputs.size() == 2; }

  void Validate() const {
    if (inputs.empty() || inputs.size() > 2) throw Error("model needs one or two input streams");
    if (has_text()) text.Validate(embed.max_len);
    if (has_signal()) {
      if (signal.input != inputs.back()) throw Error("signal config input does not match model inputs");
      signal.Validate();
    }
    if (joint() && fusion_dim == 0) throw Error("fusion_dim must be positive");
    head.Validate();
  }
};

// Paper-scale dimensions.
inline ModelSpec PaperProfile(const std::vector<InputKind>& inputs, HeadKind head) {
  ModelSpec m;
  m.profile = "paper";
  m.inputs = inputs;
  m.head.kind = head;
  if (m.has_signal()) m.signal.input = inputs.back();
  return m;
}

// Reduced dimensions that train in minutes on one CPU core.
inline ModelSpec DeskProfile(const std::vector<InputKind>& inputs, HeadKind head) {
  ModelSpec m;
  m.profile = "desk";
  m.inputs = inputs;
  m.head.kind = head;
  m.embed = {32, 16};
  m.text.filters = 8;
  m.text.fc_dims = {32, 16};
  m.signal.fc_dims = {32, 16, 16};
  m.fusion_dim = 16;
  if (m.has_signal()) {
    m.signal.input = inputs.back();
    m.signal.descriptor = m.signal.input == InputKind::kRaw
                              ? "c16s16x8 p4 4c3x8 p4 4c3x16 p4 4c3x16 p4 4c3x16 gap"
                              : "c3x8 p4 4c3x8 p4 4c3x16 p4 4c3x16 p4 4c3x16 gap";
  }
  return m;
}

inline ModelSpec Profile(const std::string& name, const std::vector<InputKind>& inputs, HeadKind head) {
  if (name == "desk") return DeskProfile(inputs, head);
  if (name == "paper") return PaperProfile(inputs, head);
  throw Error("unknown profile \"" + name + "\" (expected desk or paper)");
}

inline std::size_t InputChannels(InputKind k, const ModelSpec& m) {
  switch (k) {
    case InputKind::kEmbed: return m.embed.dim;
    case InputKind::kRaw: return 1;
    case InputKind::kMel: return m.dsp.n_mels;
    case InputKind::kMfcc: return m.dsp.n_mfcc;
  }
  return 0;
}

// Appends the text CNN up to its last hidden layer; returns that width.
template <typename T>
std::size_t BuildTextCnn(const TextCnnConfig& cfg, const textfeat::EmbedConfig& embed, nn::Sequential<T>& out) {
  cfg.Validate(embed.max_len);
  auto& par = out.template Add<nn::Parallel<T>>();
  for (auto h : cfg.windows) {
    auto& br = par.AddBranch();
    br.template Add<nn::Conv1D<T>>(h, 1, embed.dim, cfg.filters, nn::Activation::kRelu);
    br.template Add<nn::MaxPoolTopK<T>>(cfg.top_k);
  }
  std::size_t width = cfg.pooled_width();
  for (std::size_t i = 0; i < cfg.fc_dims.size(); ++i) {
    out.template Add<nn::Dense<T>>(width, cfg.fc_dims[i]);
    out.template Add<nn::ReLU<T>>();
    out.template Add<nn::Dropout<T>>(cfg.dropout[i]);
    width = cfg.fc_dims[i];
  }
  return width;
}

// Appends the signal CNN up to its last hidden layer; returns that width.
// The first conv is valid; later convs keep length ("same" padding).
template <typename T>
std::size_t BuildSignalCnn(const SignalCnnConfig& cfg, std::size_t in_channels, nn::Sequential<T>& out) {
  cfg.Validate();
  std::size_t ch = in_channels;
  bool first = true;
  for (const auto& s : ParseDescriptor(cfg.descriptor)) {
    switch (s.kind) {
      case ConvStage::Kind::kConv: {
        using Conv = nn::Conv1D<T>;
        const auto pad = first ? Conv::Padding::kValid : Conv::Padding::kSame;
        if (pad == Conv::Padding::kSame && s.stride != 1) throw Error("only the first conv may be strided");
        // The batch norm shift makes a conv bias redundant.
        out.template Add<Conv>(s.width, s.stride, ch, s.filters, nn::Activation::kIdentity, pad, false);
        out.template Add<nn::BatchNorm<T>>(s.filters, cfg.bn_momentum);
        out.template Add<nn::ReLU<T>>();
        ch = s.filters;
        first = false;
        break;
      }
      case ConvStage::Kind::kPool:
        out.template Add<nn::MaxPool1D<T>>(s.width);
        break;
      case ConvStage::Kind::kGlobalAvg:
        out.template Add<nn::GlobalAvgPool<T>>();
        break;
    }
  }
  std::size_t width = ch;
  for (std::size_t i = 0; i < cfg.fc_dims.size(); ++i) {
    if (i + 1 == cfg.fc_dims.size()) out.template Add<nn::Dropout<T>>(cfg.dropout);
    out.template Add<nn::Dense<T>>(width, cfg.fc_dims[i]);
    out.template Add<nn::ReLU<T>>();
    width = cfg.fc_dims[i];
  }
  return width;
}

template <typename T>
void AppendHead(const HeadConfig& head, std::size_t in, nn::Sequential<T>& out) {
  head.Validate();
  if (head.kind == HeadKind::kSoftmax) {
    out.template Add<nn::Dense<T>>(in, head.wer_vector.size());
    out.template Add<nn::Softmax<T>>();
    out.template Add<nn::Expectation<T>>(head.wer_vector);
  } else {
    out.template Add<nn::Dense<T>>(in, 1);
    out.template Add<nn::ReLU<T>>();
  }
}

// Expected value of the class vector under the softmax of `logits`.
inline double ExpectedWer(const std::vector<double>& logits, const std::vector<double>& wer_vector) {
  if (logits.size() != wer_vector.size()) throw Error("logit count does not match wer_vector");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0, s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double e = std::exp(logits[i] - mx);
    z += e;
    s += e * wer_vector[i];
  }
  return s / z;
}

// Joint fusion: concatenate the two last hidden layers, then one ReLU layer.
template <typename T>
nn::Network<T> BuildNetwork(const ModelSpec& spec) {
  spec.Validate();
  nn::Network<T> net;
  std::vector<std::size_t> widths;
  if (spec.has_text()) widths.push_back(BuildTextCnn(spec.text, spec.embed, net.AddBranch()));
  if (spec.has_signal())
    widths.push_back(BuildSignalCnn(spec.signal, InputChannels(spec.signal.input, spec), net.AddBranch()));
  std::size_t head_in = widths.front();
  if (spec.joint()) {
    if (widths[0] != widths[1])
      throw Error("fusion needs matching last hidden widths, got " + std::to_string(widths[0]) + " and " +
                  std::to_string(widths[1]));
    net.trunk().template Add<nn::Dense<T>>(widths[0] + widths[1], spec.fusion_dim);
    net.trunk().template Add<nn::ReLU<T>>();
    head_in = spec.fusion_dim;
  }
  AppendHead(spec.head, head_in, net.trunk());
  return net;
}

// The head's dense layer (last Dense in the trunk).
template <typename T>
nn::Dense<T>& HeadDense(nn::Network<T>& net) {
  auto& trunk = net.trunk();
  for (std::size_t i = trunk.size(); i-- > 0;)
    if (auto* d = dynamic_cast<nn::Dense<T>*>(&trunk[i])) return *d;
  throw Error("network has no head");
}

// ---- sidecar JSON ----------------------------------------------------------

inline nlohmann::ordered_json SpecToJson(const ModelSpec& m) {
  nlohmann::ordered_json j;
  j["profile"] = m.profile;
  j["architecture"] = m.joint() ? "joint" : m.has_text() ? "text" : "signal";
  j["inputs"] = InputsName(m.inputs);
  j["head"] = m.head.kind == HeadKind::kSoftmax ? "softmax" : "relu";
  j["wer_vector"] = m.head.wer_vector;
  if (m.has_text())
    j["text"] = {{"windows", m.text.windows},
                 {"filters", m.text.filters},
                 {"fc_dims", m.text.fc_dims},
                 {"dropout", m.text.dropout},
                 {"top_k", m.text.top_k}};
  if (m.has_signal())
    j["signal"] = {{"input", InputName(m.signal.input)},
                   {"descriptor", m.signal.descriptor},
                   {"fc_dims", m.signal.fc_dims},
                   {"dropout", m.signal.dropout},
                   {"bn_momentum", m.signal.bn_momentum}};
  if (m.joint()) j["fusion_dim"] = m.fusion_dim;
  j["embed"] = {{"max_len", m.embed.max_len}, {"dim", m.embed.dim}};
  j["dsp"] = {{"sample_rate", m.dsp.sample_rate}, {"n_samples", m.dsp.n_samples}, {"hop", m.dsp.hop},
              {"win", m.dsp.win},                 {"n_fft", m.dsp.n_fft},         {"n_mels", m.dsp.n_mels},
              {"n_mfcc", m.dsp.n_mfcc}};
  return j;
}

inline ModelSpec SpecFromJson(const nlohmann::json& j) {
  try {
    ModelSpec m;
    m.profile = j.at("profile").get<std::string>();
    m.inputs = ParseInputs(j.at("inputs").get<std::string>());
    const auto head = j.at("head").get<std::string>();
    if (head != "softmax" && head != "relu") throw Error("unknown head \"" + head + "\"");
    m.head.kind = head == "softmax" ? HeadKind::kSoftmax : HeadKind::kRelu;
    m.head.wer_vector = j.at("wer_vector").get<std::vector<double>>();
    if (j.contains("text")) {
      const auto& t = j["text"];
      m.text.windows = t.at("windows").get<std::vector<std::size_t>>();
      m.text.filters = t.at("filters").get<std::size_t>();
      m.text.fc_dims = t.at("fc_dims").get<std::vector<std::size_t>>();
      m.text.dropout = t.at("dropout").get<std::vector<double>>();
      m.text.top_k = t.value("top_k", std::size_t{4});
    }
    if (j.contains("signal")) {
      const auto& s = j["signal"];
      m.signal.input = ParseInput(s.at("input").get<std::string>());
      m.signal.descriptor = s.at("descriptor").get<std::string>();
      m.signal.fc_dims = s.at("fc_dims").get<std::vector<std::size_t>>();
      m.signal.dropout = s.at("dropout").get<double>();
      m.signal.bn_momentum = s.value("bn_momentum", 0.9);
    }
    m.fusion_dim = j.value("fusion_dim", std::size_t{128});
    m.embed.max_len = j.at("embed").at("max_len").get<std::size_t>();
    m.embed.dim = j.at("embed").at("dim").get<std::size_t>();
    const auto& d = j.at("dsp");
    m.dsp.sample_rate = d.at("sample_rate").get<int>();
    m.dsp.n_samples = d.at("n_samples").get<std::size_t>();
    m.dsp.hop = d.at("hop").get<std::size_t>();
    m.dsp.win = d.at("win").get<std::size_t>();
    m.dsp.n_fft = d.at("n_fft").get<std::size_t>();
    m.dsp.n_mels = d.at("n_mels").get<std::size_t>();
    m.dsp.n_mfcc = d.at("n_mfcc").get<std::size_t>();
    m.Validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("model descriptor: ") + e.what());
  }
}

}  // namespace werpred::models

#endif  // WERPRED_MODELS_ARCHITECTURES_HPP_
