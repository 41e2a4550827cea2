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

// Layer catalog for the prediction networks. Every layer maps a batch of
// (time, channel) tensors to a batch of tensors and back-propagates through
// the cache of its last forward call. Parameter gradients accumulate until
// the owner zeroes them.

#ifndef WERPRED_NN_LAYERS_HPP_
#define WERPRED_NN_LAYERS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "werpred/common.hpp"
#include "werpred/tensor.hpp"

namespace werpred::nn {

enum class Mode { kTrain, kEval };

using Rng = std::mt19937_64;

template <typename T>
using Batch = std::vector<Tensor<T>>;

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}
};

enum class Activation { kIdentity, kRelu };

inline std::string ActivationName(Activation a) { return a == Activation::kRelu ? "relu" : "identity"; }

// Order-sensitive hash of a layer's discrete decisions (ReLU masks, pooling
// winners). Gradient checks compare it across perturbations to detect
// finite differences that straddle a kink.
class KinkHash {
 public:
  void Add(std::uint64_t v) {
    h_ ^= v + 0x9E3779B97F4A7C15ull + (h_ << 6) + (h_ >> 2);
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 1469598103934665603ull;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string Kind() const = 0;
  // Architecture descriptor; part of the checkpoint header.
  virtual std::string Describe() const = 0;

  virtual Batch<T> Forward(const Batch<T>& x, Mode mode, Rng& rng) = 0;
  virtual Batch<T> Backward(const Batch<T>& grad) = 0;
  // Eval-mode forward that leaves the layer untouched; safe to call from
  // several threads at once.
  virtual Batch<T> Infer(const Batch<T>& x) const = 0;

  virtual void Init(Rng&) {}
  virtual std::vector<Param<T>*> Params() { return {}; }
  // Non-trainable state saved with the parameters.
  virtual std::vector<Tensor<T>*> Buffers() { return {}; }
  virtual void AddKinks(KinkHash&) const {}
};

namespace detail {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<RowMajor<T>> MapMat(Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
Eigen::Map<const RowMajor<T>> MapMat(const Tensor<T>& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

template <typename T>
void GlorotUniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w.values()) v = static_cast<T>(dist(rng));
}

template <typename T>
void AddMask(KinkHash& h, const Batch<T>& values) {
  for (const auto& t : values) {
    std::uint64_t word = 0;
    int bits = 0;
    for (const T& v : t.values()) {
      word = (word << 1) | (v > T(0) ? 1u : 0u);
      if (++bits == 64) {
        h.Add(word);
        word = 0;
        bits = 0;
      }
    }
    h.Add(word ^ static_cast<std::uint64_t>(bits));
  }
}

inline void NeedCache(bool ok, const char* kind) {
  if (!ok) throw Error(std::string(kind) + ": backward called without a matching forward (stale cache)");
}

}  // namespace detail

// c_t = f(w . x[t*stride : t*stride + width] + b), over the time axis with all
// input channels. "same" padding (stride 1 only) keeps the length.
template <typename T>
class Conv1D final : public Layer<T> {
 public:
  enum class Padding { kValid, kSame };

  Conv1D(std::size_t width, std::size_t stride, std::size_t in_channels, std::size_t out_channels,
         Activation f = Activation::kRelu, Padding padding = Padding::kValid, bool use_bias = true)
      : width_(width), stride_(stride), in_(in_channels), out_(out_channels), f_(f), padding_(padding),
        use_bias_(use_bias), w_("conv.w", width * in_channels, out_channels), b_("conv.b", 1, out_channels) {
    if (width == 0 || stride == 0 || in_channels == 0 || out_channels == 0)
      throw Error("Conv1D: width, stride and channel counts must be positive");
    if (padding == Padding::kSame && stride != 1) throw Error("Conv1D: same padding requires stride 1");
  }

  std::string Kind() const override { return "Conv1D"; }
  std::string Describe() const override {
    return "Conv1D(h=" + std::to_string(width_) + ",s=" + std::to_string(stride_) + ",in=" + std::to_string(in_) +
           ",out=" + std::to_string(out_) + ",f=" + ActivationName(f_) +
           ",pad=" + (padding_ == Padding::kSame ? "same" : "valid") + (use_bias_ ? "" : ",nobias") + ")";
  }

  std::size_t width() const { return width_; }
  std::size_t out_channels() const { return out_; }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  void Init(Rng& rng) override {
    detail::GlorotUniform(w_.value, width_ * in_, width_ * out_, rng);
    b_.value.Fill(T(0));
  }
  std::vector<Param<T>*> Params() override {
    if (!use_bias_) return {&w_};
    return {&w_, &b_};
  }

  Batch<T> Forward(const Batch<T>& x, Mode, Rng&) override {
    cols_.clear();
    outputs_.clear();
    lengths_.clear();
    for (const auto& in : x) {
      Tensor<T> padded = Pad(in);
      Tensor<T> cols = Unroll(padded, in.rows());
      outputs_.push_back(Apply(cols));
      cols_.push_back(std::move(cols));
      lengths_.push_back(padded.rows());
    }
    return outputs_;
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    Batch<T> out;
    for (const auto& in : x) out.push_back(Apply(Unroll(Pad(in), in.rows())));
    return out;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(grad.size() == cols_.size() && !cols_.empty(), "Conv1D");
    Batch<T> dx;
    const std::size_t span = width_ * in_;
    auto dw = detail::MapMat(w_.grad);
    auto wv = detail::MapMat(static_cast<const Tensor<T>&>(w_.value));
    for (std::size_t s = 0; s < grad.size(); ++s) {
      const Tensor<T>& y = outputs_[s];
      if (!grad[s].SameShape(y)) throw Error("Conv1D: gradient shape mismatch");
      Tensor<T> g = grad[s];
      if (f_ == Activation::kRelu)
        for (std::size_t i = 0; i < g.size(); ++i)
          if (!(y[i] > T(0))) g[i] = T(0);
      const auto gm = detail::MapMat(static_cast<const Tensor<T>&>(g));
      const auto xm = detail::MapMat(cols_[s]);
      if (use_bias_) detail::MapMat(b_.grad).row(0) += gm.colwise().sum();
      dw.noalias() += xm.transpose() * gm;
      Tensor<T> dcols(y.rows(), span);
      detail::MapMat(dcols).noalias() = gm * wv.transpose();
      Tensor<T> dxp(lengths_[s], in_);
      for (std::size_t t = 0; t < y.rows(); ++t) {
        T* dst = dxp.data() + t * stride_ * in_;
        const T* src = dcols.data() + t * span;
        for (std::size_t k = 0; k < span; ++k) dst[k] += src[k];
      }
      dx.push_back(Unpad(dxp));
    }
    cols_.clear();
    outputs_.clear();
    return dx;
  }

  void AddKinks(KinkHash& h) const override {
    if (f_ == Activation::kRelu) detail::AddMask(h, outputs_);
  }

 private:
  std::size_t PadLeft() const { return padding_ == Padding::kSame ? (width_ - 1) / 2 : 0; }
  std::size_t PadRight() const { return padding_ == Padding::kSame ? width_ - 1 - PadLeft() : 0; }

  // Row t holds the receptive field of output t; each field is a contiguous
  // slice of the row-major input.
  Tensor<T> Unroll(const Tensor<T>& padded, std::size_t length) const {
    if (padded.rows() < width_)
      throw Error("Conv1D: input length " + std::to_string(length) + " shorter than filter width " +
                  std::to_string(width_));
    const std::size_t t_out = (padded.rows() - width_) / stride_ + 1;
    const std::size_t span = width_ * in_;
    if (stride_ == width_) {
      std::vector<T> v(padded.values().begin(), padded.values().begin() + static_cast<long>(t_out * span));
      return Tensor<T>(t_out, span, std::move(v));
    }
    Tensor<T> cols(t_out, span);
    for (std::size_t t = 0; t < t_out; ++t)
      std::copy_n(padded.data() + t * stride_ * in_, span, cols.data() + t * span);
    return cols;
  }

  Tensor<T> Apply(const Tensor<T>& cols) const {
    Tensor<T> y(cols.rows(), out_);
    auto ym = detail::MapMat(y);
    ym.noalias() = detail::MapMat(cols) * detail::MapMat(w_.value);
    ym.rowwise() += detail::MapMat(b_.value).row(0);
    if (f_ == Activation::kRelu)
      for (auto& v : y.values()) v = std::max(v, T(0));
    return y;
  }

  Tensor<T> Pad(const Tensor<T>& in) const {
    if (in.cols() != in_)
      throw Error("Conv1D: expected " + std::to_string(in_) + " input channels, got " + in.ShapeString());
    if (padding_ == Padding::kValid) return in;
    Tensor<T> p(in.rows() + PadLeft() + PadRight(), in_);
    std::copy(in.values().begin(), in.values().end(), p.values().begin() + PadLeft() * in_);
    return p;
  }

  Tensor<T> Unpad(const Tensor<T>& dxp) const {
    if (padding_ == Padding::kValid) return dxp;
    const std::size_t rows = dxp.rows() - PadLeft() - PadRight();
    Tensor<T> d(rows, in_);
    std::copy(dxp.data() + PadLeft() * in_, dxp.data() + (PadLeft() + rows) * in_, d.data());
    return d;
  }

  std::size_t width_, stride_, in_, out_;
  Activation f_;
  Padding padding_;
  bool use_bias_;
  Param<T> w_, b_;  // b_ stays zero without a bias
  Batch<T> cols_, outputs_;
  std::vector<std::size_t> lengths_;
};

// Per channel: mean of the min(k, T) largest values over time. (T, C) -> (1, C).
template <typename T>
class MaxPoolTopK final : public Layer<T> {
 public:
  explicit MaxPoolTopK(std::size_t k = 4) : k_(k) {
    if (k == 0) throw Error("MaxPoolTopK: k must be positive");
  }

  std::string Kind() const override { return "MaxPoolTopK"; }
  std::string Describe() const override { return "MaxPoolTopK(k=" + std::to_string(k_) + ")"; }

  Batch<T> Forward(const Batch<T>& x, Mode, Rng&) override {
    selected_.clear();
    shapes_.clear();
    Batch<T> out;
    for (const auto& in : x) {
      std::vector<std::uint32_t> sel;
      out.push_back(Apply(in, &sel));
      selected_.push_back(std::move(sel));
      shapes_.push_back({in.rows(), in.cols()});
    }
    return out;
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    Batch<T> out;
    std::vector<std::uint32_t> sel;
    for (const auto& in : x) out.push_back(Apply(in, &sel));
    return out;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(grad.size() == shapes_.size() && !shapes_.empty(), "MaxPoolTopK");
    Batch<T> dx;
    for (std::size_t s = 0; s < grad.size(); ++s) {
      const auto [rows, cols] = shapes_[s];
      const std::size_t m = std::min(k_, rows);
      Tensor<T> d(rows, cols);
      for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t j = 0; j < m; ++j) d(selected_[s][c * m + j], c) += grad[s](0, c) / static_cast<T>(m);
      dx.push_back(std::move(d));
    }
    selected_.clear();
    shapes_.clear();
    return dx;
  }

  void AddKinks(KinkHash& h) const override {
    for (const auto& sel : selected_)
      for (auto i : sel) h.Add(i);
  }

 private:
  Tensor<T> Apply(const Tensor<T>& in, std::vector<std::uint32_t>* sel) const {
    if (in.rows() == 0 || in.cols() == 0) throw Error("MaxPoolTopK: empty feature map");
    const std::size_t m = std::min(k_, in.rows());
    Tensor<T> y(1, in.cols());
    sel->assign(m * in.cols(), 0);
    std::vector<std::uint32_t> idx(in.rows());
    for (std::size_t c = 0; c < in.cols(); ++c) {
      std::iota(idx.begin(), idx.end(), 0u);
      std::partial_sort(idx.begin(), idx.begin() + m, idx.end(), [&](std::uint32_t a, std::uint32_t b) {
        return in(a, c) > in(b, c) || (in(a, c) == in(b, c) && a < b);
      });
      T sum = T(0);
      for (std::size_t j = 0; j < m; ++j) {
        sum += in(idx[j], c);
        (*sel)[c * m + j] = idx[j];
      }
      y(0, c) = sum / static_cast<T>(m);
    }
    return y;
  }

  std::size_t k_;
  std::vector<std::vector<std::uint32_t>> selected_;
  std::vector<std::pair<std::size_t, std::size_t>> shapes_;
};

// Non-overlapping max pooling over time; the width clamps to the input length.
template <typename T>
class MaxPool1D final : public Layer<T> {
 public:
  explicit MaxPool1D(std::size_t width) : width_(width) {
    if (width == 0) throw Error("MaxPool1D: width must be positive");
  }

  std::string Kind() const override { return "MaxPool1D"; }
  std::string Describe() const override { return "MaxPool1D(w=" + std::to_string(width_) + ")"; }

  Batch<T> Forward(const Batch<T>& x, Mode, Rng&) override {
    argmax_.clear();
    shapes_.clear();
    Batch<T> out;
    for (const auto& in : x) {
      std::vector<std::uint32_t> arg;
      out.push_back(Apply(in, &arg));
      argmax_.push_back(std::move(arg));
      shapes_.push_back({in.rows(), in.cols()});
    }
    return out;
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    Batch<T> out;
    std::vector<std::uint32_t> arg;
    for (const auto& in : x) out.push_back(Apply(in, &arg));
    return out;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(grad.size() == shapes_.size() && !shapes_.empty(), "MaxPool1D");
    Batch<T> dx;
    for (std::size_t s = 0; s < grad.size(); ++s) {
      const auto [rows, cols] = shapes_[s];
      Tensor<T> d(rows, cols);
      for (std::size_t t = 0; t < grad[s].rows(); ++t)
        for (std::size_t c = 0; c < cols; ++c) d(argmax_[s][t * cols + c], c) += grad[s](t, c);
      dx.push_back(std::move(d));
    }
    argmax_.clear();
    shapes_.clear();
    return dx;
  }

  void AddKinks(KinkHash& h) const override {
    for (const auto& a : argmax_)
      for (auto i : a) h.Add(i);
  }

 private:
  Tensor<T> Apply(const Tensor<T>& in, std::vector<std::uint32_t>* arg) const {
    if (in.rows() == 0) throw Error("MaxPool1D: empty input");
    const std::size_t w = std::min(width_, in.rows());
    const std::size_t t_out = in.rows() / w;
    Tensor<T> y(t_out, in.cols());
    arg->assign(t_out * in.cols(), 0);
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t c = 0; c < in.cols(); ++c) {
        std::size_t best = t * w;
        for (std::size_t i = t * w + 1; i < (t + 1) * w; ++i)
          if (in(i, c) > in(best, c)) best = i;
        y(t, c) = in(best, c);
        (*arg)[t * in.cols() + c] = static_cast<std::uint32_t>(best);
      }
    return y;
  }

  std::size_t width_;
  std::vector<std::vector<std::uint32_t>> argmax_;
  std::vector<std::pair<std::size_t, std::size_t>> shapes_;
};

// (T, C) -> (1, C) mean over time.
template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  std::string Kind() const override { return "GlobalAvgPool"; }
  std::string Describe() const override { return "GlobalAvgPool"; }

  Batch<T> Forward(const Batch<T>& x, Mode, Rng&) override {
    rows_.clear();
    for (const auto& in : x) rows_.push_back(in.rows());
    return Infer(x);
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    Batch<T> out;
    for (const auto& in : x) {
      if (in.rows() == 0) throw Error("GlobalAvgPool: empty input");
      Tensor<T> y(1, in.cols());
      for (std::size_t t = 0; t < in.rows(); ++t)
        for (std::size_t c = 0; c < in.cols(); ++c) y(0, c) += in(t, c);
      for (std::size_t c = 0; c < in.cols(); ++c) y(0, c) /= static_cast<T>(in.rows());
      out.push_back(std::move(y));
    }
    return out;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(grad.size() == rows_.size() && !rows_.empty(), "GlobalAvgPool");
    Batch<T> dx;
    for (std::size_t s = 0; s < grad.size(); ++s) {
      const std::size_t cols = grad[s].cols();
      Tensor<T> d(rows_[s], cols);
      for (std::size_t t = 0; t < rows_[s]; ++t)
        for (std::size_t c = 0; c < cols; ++c) d(t, c) = grad[s](0, c) / static_cast<T>(rows_[s]);
      dx.push_back(std::move(d));
    }
    rows_.clear();
    return dx;
  }

 private:
  std::vector<std::size_t> rows_;
};

// Fully connected on the flattened input: (1, in) -> (1, out).
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out) : in_(in), out_(out), w_("dense.w", in, out), b_("dense.b", 1, out) {
    if (in == 0 || out == 0) throw Error("Dense: dimensions must be positive");
  }

  std::string Kind() const override { return "Dense"; }
  std::string Describe() const override {
    return "Dense(" + std::to_string(in_) + "," + std::to_string(out_) + ")";
  }

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

  void Init(Rng& rng) override {
    detail::GlorotUniform(w_.value, in_, out_, rng);
    b_.value.Fill(T(0));
  }
  std::vector<Param<T>*> Params() override { return {&w_, &b_}; }

  Batch<T> Forward(const Batch<T>& x, Mode, Rng&) override {
    Batch<T> out = Infer(x);
    inputs_ = x;
    return out;
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    Batch<T> out;
    for (const auto& in : x) {
      if (in.size() != in_)
        throw Error("Dense: expected " + std::to_string(in_) + " inputs, got " + in.ShapeString());
      Tensor<T> y(1, out_);
      std::copy(b_.value.data(), b_.value.data() + out_, y.data());
      for (std::size_t i = 0; i < in_; ++i) {
        const T xv = in[i];
        const T* wi = w_.value.data() + i * out_;
        for (std::size_t o = 0; o < out_; ++o) y[o] += xv * wi[o];
      }
      out.push_back(std::move(y));
    }
    return out;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(grad.size() == inputs_.size() && !inputs_.empty(), "Dense");
    Batch<T> dx;
    for (std::size_t s = 0; s < grad.size(); ++s) {
      const Tensor<T>& x = inputs_[s];
      const Tensor<T>& g = grad[s];
      if (g.size() != out_) throw Error("Dense: gradient shape mismatch");
      Tensor<T> d(x.rows(), x.cols());
      for (std::size_t o = 0; o < out_; ++o) b_.grad[o] += g[o];
      for (std::size_t i = 0; i < in_; ++i) {
        const T xv = x[i];
        T* dwi = w_.grad.data() + i * out_;
        const T* wi = w_.value.data() + i * out_;
        T acc = T(0);
        for (std::size_t o = 0; o < out_; ++o) {
          dwi[o] += xv * g[o];
          acc += wi[o] * g[o];
        }
        d[i] = acc;
      }
      dx.push_back(std::move(d));
    }
    inputs_.clear();
    return dx;
  }

 private:
  std::size_t in_, out_;
  Param<T> w_, b_;
  Batch<T> inputs_;
};

// Inverted dropout: kept units are scaled by 1/(1-rate) at train time, so
// eval mode is the identity.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error("Dropout: rate must be in [0, 1)");
  }

  std::string Kind() const override { return "Dropout"; }
  std::string Describe() const override { return "Dropout(" + std::to_string(rate_) + ")"; }
  double rate() const { return rate_; }

  Batch<T> Forward(const Batch<T>& x, Mode mode, Rng& rng) override {
    masks_.clear();
    active_ = mode == Mode::kTrain && rate_ > 0.0;
    cached_ = true;
    if (!active_) return x;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const T scale = static_cast<T>(1.0 / (1.0 - rate_));
    Batch<T> out;
    for (const auto& in : x) {
      Tensor<T> m(in.rows(), in.cols());
      Tensor<T> y(in.rows(), in.cols());
      for (std::size_t i = 0; i < in.size(); ++i) {
        m[i] = u(rng) < rate_ ? T(0) : scale;
        y[i] = in[i] * m[i];
      }
      masks_.push_back(std::move(m));
      out.push_back(std::move(y));
    }
    return out;
  }

  Batch<T> Infer(const Batch<T>& x) const override { return x; }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(cached_, "Dropout");
    cached_ = false;
    if (!active_) return grad;
    Batch<T> dx;
    for (std::size_t s = 0; s < grad.size(); ++s) {
      Tensor<T> d(grad[s].rows(), grad[s].cols());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = grad[s][i] * masks_[s][i];
      dx.push_back(std::move(d));
    }
    return dx;
  }

 private:
  double rate_;
  bool active_ = false;
  bool cached_ = false;
  Batch<T> masks_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  std::string Kind() const override { return "ReLU"; }
  std::string Describe() const override { return "ReLU"; }

  Batch<T> Forward(const Batch<T>& x, Mode, Rng&) override {
    outputs_ = Infer(x);
    return outputs_;
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    Batch<T> out = x;
    for (auto& t : out)
      for (auto& v : t.values()) v = std::max(v, T(0));
    return out;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(grad.size() == outputs_.size() && !outputs_.empty(), "ReLU");
    Batch<T> dx = grad;
    for (std::size_t s = 0; s < dx.size(); ++s)
      for (std::size_t i = 0; i < dx[s].size(); ++i)
        if (!(outputs_[s][i] > T(0))) dx[s][i] = T(0);
    outputs_.clear();
    return dx;
  }

  void AddKinks(KinkHash& h) const override { detail::AddMask(h, outputs_); }

 private:
  Batch<T> outputs_;
};

// Batch normalization per channel; train mode normalizes with statistics over
// all samples and time steps of the batch and updates running averages.
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  explicit BatchNorm(std::size_t channels, double momentum = 0.99, double epsilon = 1e-3)
      : channels_(channels), momentum_(momentum), epsilon_(epsilon), gamma_("bn.gamma", 1, channels),
        beta_("bn.beta", 1, channels), running_mean_(1, channels), running_var_(1, channels, T(1)) {
    gamma_.value.Fill(T(1));
  }

  std::string Kind() const override { return "BatchNorm"; }
  std::string Describe() const override { return "BatchNorm(" + std::to_string(channels_) + ")"; }

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }
  double epsilon() const { return epsilon_; }

  void Init(Rng&) override {
    gamma_.value.Fill(T(1));
    beta_.value.Fill(T(0));
    running_mean_.Fill(T(0));
    running_var_.Fill(T(1));
  }
  std::vector<Param<T>*> Params() override { return {&gamma_, &beta_}; }
  std::vector<Tensor<T>*> Buffers() override { return {&running_mean_, &running_var_}; }

  Batch<T> Forward(const Batch<T>& x, Mode mode, Rng&) override {
    for (const auto& in : x)
      if (in.cols() != channels_)
        throw Error("BatchNorm: expected " + std::to_string(channels_) + " channels, got " + in.ShapeString());
    train_ = mode == Mode::kTrain;
    std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
    if (train_) {
      std::size_t count = 0;
      for (const auto& in : x) {
        count += in.rows();
        for (std::size_t t = 0; t < in.rows(); ++t)
          for (std::size_t c = 0; c < channels_; ++c) mean[c] += in(t, c);
      }
      if (count == 0) throw Error("BatchNorm: empty batch");
      for (auto& m : mean) m /= static_cast<double>(count);
      for (const auto& in : x)
        for (std::size_t t = 0; t < in.rows(); ++t)
          for (std::size_t c = 0; c < channels_; ++c) {
            const double d = in(t, c) - mean[c];
            var[c] += d * d;
          }
      for (auto& v : var) v /= static_cast<double>(count);
      count_ = count;
      for (std::size_t c = 0; c < channels_; ++c) {
        running_mean_[c] = static_cast<T>(momentum_ * running_mean_[c] + (1.0 - momentum_) * mean[c]);
        running_var_[c] = static_cast<T>(momentum_ * running_var_[c] + (1.0 - momentum_) * var[c]);
      }
    } else {
      for (std::size_t c = 0; c < channels_; ++c) {
        mean[c] = running_mean_[c];
        var[c] = running_var_[c];
      }
    }
    inv_std_.assign(channels_, T(0));
    for (std::size_t c = 0; c < channels_; ++c) inv_std_[c] = static_cast<T>(1.0 / std::sqrt(var[c] + epsilon_));
    xhat_.clear();
    Batch<T> out;
    for (const auto& in : x) {
      Tensor<T> xh(in.rows(), channels_), y(in.rows(), channels_);
      for (std::size_t t = 0; t < in.rows(); ++t)
        for (std::size_t c = 0; c < channels_; ++c) {
          xh(t, c) = static_cast<T>((in(t, c) - mean[c])) * inv_std_[c];
          y(t, c) = gamma_.value[c] * xh(t, c) + beta_.value[c];
        }
      xhat_.push_back(std::move(xh));
      out.push_back(std::move(y));
    }
    return out;
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    Batch<T> out;
    for (const auto& in : x) {
      if (in.cols() != channels_)
        throw Error("BatchNorm: expected " + std::to_string(channels_) + " channels, got " + in.ShapeString());
      Tensor<T> y(in.rows(), channels_);
      for (std::size_t c = 0; c < channels_; ++c) {
        const T scale = static_cast<T>(gamma_.value[c] / std::sqrt(static_cast<double>(running_var_[c]) + epsilon_));
        for (std::size_t t = 0; t < in.rows(); ++t)
          y(t, c) = (in(t, c) - running_mean_[c]) * scale + beta_.value[c];
      }
      out.push_back(std::move(y));
    }
    return out;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(grad.size() == xhat_.size() && !xhat_.empty(), "BatchNorm");
    std::vector<T> sum_dxh(channels_, T(0)), sum_dxh_xh(channels_, T(0));
    for (std::size_t s = 0; s < grad.size(); ++s)
      for (std::size_t t = 0; t < grad[s].rows(); ++t)
        for (std::size_t c = 0; c < channels_; ++c) {
          const T g = grad[s](t, c);
          gamma_.grad[c] += g * xhat_[s](t, c);
          beta_.grad[c] += g;
          const T dxh = g * gamma_.value[c];
          sum_dxh[c] += dxh;
          sum_dxh_xh[c] += dxh * xhat_[s](t, c);
        }
    Batch<T> dx;
    const T n = static_cast<T>(count_);
    for (std::size_t s = 0; s < grad.size(); ++s) {
      Tensor<T> d(grad[s].rows(), channels_);
      for (std::size_t t = 0; t < d.rows(); ++t)
        for (std::size_t c = 0; c < channels_; ++c) {
          const T dxh = grad[s](t, c) * gamma_.value[c];
          if (train_) {
            d(t, c) = inv_std_[c] * (dxh - sum_dxh[c] / n - xhat_[s](t, c) * sum_dxh_xh[c] / n);
          } else {
            d(t, c) = inv_std_[c] * dxh;
          }
        }
      dx.push_back(std::move(d));
    }
    xhat_.clear();
    return dx;
  }

 private:
  std::size_t channels_;
  double momentum_, epsilon_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  bool train_ = false;
  std::size_t count_ = 0;
  std::vector<T> inv_std_;
  Batch<T> xhat_;
};

// Softmax over all elements of each (flattened) sample.
template <typename T>
class Softmax final : public Layer<T> {
 public:
  std::string Kind() const override { return "Softmax"; }
  std::string Describe() const override { return "Softmax"; }

  Batch<T> Forward(const Batch<T>& x, Mode, Rng&) override {
    outputs_ = Infer(x);
    return outputs_;
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    Batch<T> out;
    for (const auto& in : x) {
      if (in.empty()) throw Error("Softmax: empty input");
      Tensor<T> y(1, in.size());
      const T mx = *std::max_element(in.values().begin(), in.values().end());
      T sum = T(0);
      for (std::size_t i = 0; i < in.size(); ++i) {
        y[i] = std::exp(in[i] - mx);
        sum += y[i];
      }
      for (std::size_t i = 0; i < in.size(); ++i) y[i] /= sum;
      out.push_back(std::move(y));
    }
    return out;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(grad.size() == outputs_.size() && !outputs_.empty(), "Softmax");
    Batch<T> dx;
    for (std::size_t s = 0; s < grad.size(); ++s) {
      const Tensor<T>& y = outputs_[s];
      T dot = T(0);
      for (std::size_t i = 0; i < y.size(); ++i) dot += grad[s][i] * y[i];
      Tensor<T> d(1, y.size());
      for (std::size_t i = 0; i < y.size(); ++i) d[i] = y[i] * (grad[s][i] - dot);
      dx.push_back(std::move(d));
    }
    outputs_.clear();
    return dx;
  }

 private:
  Batch<T> outputs_;
};

// Fixed (non-trainable) dot product with a value vector: the expectation of
// `values` under the incoming probabilities. (1, n) -> (1, 1).
template <typename T>
class Expectation final : public Layer<T> {
 public:
  explicit Expectation(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error("Expectation: empty value vector");
  }

  std::string Kind() const override { return "Expectation"; }
  std::string Describe() const override {
    std::string s = "Expectation(";
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (i) s += ",";
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", values_[i]);
      s += buf;
    }
    return s + ")";
  }

  const std::vector<double>& values() const { return values_; }

  Batch<T> Forward(const Batch<T>& x, Mode, Rng&) override {
    n_ = x.size();
    return Infer(x);
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    Batch<T> out;
    for (const auto& in : x) {
      if (in.size() != values_.size())
        throw Error("Expectation: expected " + std::to_string(values_.size()) + " inputs, got " +
                    in.ShapeString());
      T s = T(0);
      for (std::size_t i = 0; i < values_.size(); ++i) s += in[i] * static_cast<T>(values_[i]);
      out.push_back(Tensor<T>(1, 1, s));
    }
    return out;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(grad.size() == n_ && n_ > 0, "Expectation");
    n_ = 0;
    Batch<T> dx;
    for (const auto& g : grad) {
      Tensor<T> d(1, values_.size());
      for (std::size_t i = 0; i < values_.size(); ++i) d[i] = g[0] * static_cast<T>(values_[i]);
      dx.push_back(std::move(d));
    }
    return dx;
  }

 private:
  std::vector<double> values_;
  std::size_t n_ = 0;
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& Add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  void Append(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Layer<T>& operator[](std::size_t i) { return *layers_[i]; }
  const Layer<T>& operator[](std::size_t i) const { return *layers_[i]; }

  std::string Kind() const override { return "Sequential"; }
  std::string Describe() const override {
    std::string s = "[";
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (i) s += ";";
      s += layers_[i]->Describe();
    }
    return s + "]";
  }

  void Init(Rng& rng) override {
    for (auto& l : layers_) l->Init(rng);
  }

  std::vector<Param<T>*> Params() override {
    std::vector<Param<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->Params()) out.push_back(p);
    return out;
  }

  std::vector<Tensor<T>*> Buffers() override {
    std::vector<Tensor<T>*> out;
    for (auto& l : layers_)
      for (auto* b : l->Buffers()) out.push_back(b);
    return out;
  }

  Batch<T> Forward(const Batch<T>& x, Mode mode, Rng& rng) override {
    Batch<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      try {
        h = layers_[i]->Forward(h, mode, rng);
      } catch (const Error& e) {
        throw Error("layer " + std::to_string(i) + " (" + layers_[i]->Kind() + "): " + e.what());
      }
    }
    return h;
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    Batch<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      try {
        h = layers_[i]->Infer(h);
      } catch (const Error& e) {
        throw Error("layer " + std::to_string(i) + " (" + layers_[i]->Kind() + "): " + e.what());
      }
    }
    return h;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    Batch<T> g = grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      try {
        g = layers_[i]->Backward(g);
      } catch (const Error& e) {
        throw Error("layer " + std::to_string(i) + " (" + layers_[i]->Kind() + "): " + e.what());
      }
    }
    return g;
  }

  void AddKinks(KinkHash& h) const override {
    for (const auto& l : layers_) l->AddKinks(h);
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Runs every branch on the same input and concatenates their flattened
// outputs: the multi-window stage of the text CNN.
template <typename T>
class Parallel final : public Layer<T> {
 public:
  Sequential<T>& AddBranch() {
    branches_.emplace_back();
    return branches_.back();
  }

  std::size_t size() const { return branches_.size(); }
  Sequential<T>& branch(std::size_t i) { return branches_[i]; }

  std::string Kind() const override { return "Parallel"; }
  std::string Describe() const override {
    std::string s = "Parallel{";
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      if (i) s += "|";
      s += branches_[i].Describe();
    }
    return s + "}";
  }

  void Init(Rng& rng) override {
    for (auto& b : branches_) b.Init(rng);
  }
  std::vector<Param<T>*> Params() override {
    std::vector<Param<T>*> out;
    for (auto& b : branches_)
      for (auto* p : b.Params()) out.push_back(p);
    return out;
  }
  std::vector<Tensor<T>*> Buffers() override {
    std::vector<Tensor<T>*> out;
    for (auto& b : branches_)
      for (auto* p : b.Buffers()) out.push_back(p);
    return out;
  }

  Batch<T> Forward(const Batch<T>& x, Mode mode, Rng& rng) override {
    if (branches_.empty()) throw Error("Parallel: no branches");
    std::vector<Batch<T>> outs;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      try {
        outs.push_back(branches_[b].Forward(x, mode, rng));
      } catch (const Error& e) {
        throw Error("branch " + std::to_string(b) + ": " + e.what());
      }
    }
    widths_.assign(branches_.size(), 0);
    in_shapes_.clear();
    for (const auto& in : x) in_shapes_.push_back({in.rows(), in.cols()});
    Batch<T> out;
    for (std::size_t s = 0; s < x.size(); ++s) {
      std::vector<T> cat;
      for (std::size_t b = 0; b < branches_.size(); ++b) {
        widths_[b] = outs[b][s].size();
        cat.insert(cat.end(), outs[b][s].values().begin(), outs[b][s].values().end());
      }
      out.push_back(Tensor<T>::Row(std::move(cat)));
    }
    branch_shapes_.clear();
    for (std::size_t b = 0; b < branches_.size(); ++b)
      branch_shapes_.push_back({outs[b][0].rows(), outs[b][0].cols()});
    return out;
  }

  Batch<T> Infer(const Batch<T>& x) const override {
    if (branches_.empty()) throw Error("Parallel: no branches");
    std::vector<Batch<T>> outs;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      try {
        outs.push_back(branches_[b].Infer(x));
      } catch (const Error& e) {
        throw Error("branch " + std::to_string(b) + ": " + e.what());
      }
    }
    Batch<T> out;
    for (std::size_t s = 0; s < x.size(); ++s) {
      std::vector<T> cat;
      for (const auto& o : outs) cat.insert(cat.end(), o[s].values().begin(), o[s].values().end());
      out.push_back(Tensor<T>::Row(std::move(cat)));
    }
    return out;
  }

  Batch<T> Backward(const Batch<T>& grad) override {
    detail::NeedCache(grad.size() == in_shapes_.size() && !in_shapes_.empty(), "Parallel");
    Batch<T> dx;
    for (const auto& [r, c] : in_shapes_) dx.push_back(Tensor<T>(r, c));
    std::size_t offset = 0;
    for (std::size_t b = 0; b < branches_.size(); ++b) {
      Batch<T> gb;
      for (const auto& g : grad) {
        std::vector<T> part(g.values().begin() + offset, g.values().begin() + offset + widths_[b]);
        gb.push_back(Tensor<T>(branch_shapes_[b].first, branch_shapes_[b].second, std::move(part)));
      }
      offset += widths_[b];
      Batch<T> d = branches_[b].Backward(gb);
      for (std::size_t s = 0; s < dx.size(); ++s)
        for (std::size_t i = 0; i < dx[s].size(); ++i) dx[s][i] += d[s][i];
    }
    in_shapes_.clear();
    return dx;
  }

  void AddKinks(KinkHash& h) const override {
    for (const auto& b : branches_) b.AddKinks(h);
  }

 private:
  std::vector<Sequential<T>> branches_;
  std::vector<std::size_t> widths_;
  std::vector<std::pair<std::size_t, std::size_t>> in_shapes_, branch_shapes_;
};

}  // namespace werpred::nn

#endif  // WERPRED_NN_LAYERS_HPP_
