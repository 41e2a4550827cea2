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

// Binary checkpoint layout (all integers u32, all reals float32, LE):
//
//   "WPRD" version descriptor
//   n_params  { name rows cols data[rows*cols] }*
//   n_buffers { rows cols data }*
//   n_slots   { E[g^2] data, E[dx^2] data }*   (0 or n_params slots)

#ifndef WERPRED_NN_CHECKPOINT_HPP_
#define WERPRED_NN_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "werpred/common.hpp"
#include "werpred/nn/network.hpp"
#include "werpred/nn/optim.hpp"

namespace werpred::nn {

inline constexpr char kCheckpointMagic[4] = {'W', 'P', 'R', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void PutTensorData(std::string& buf, const Tensor<T>& t) {
  for (const T& v : t.values()) le::PutF32(buf, static_cast<float>(v));
}

template <typename T>
void ReadTensorData(le::Reader& r, Tensor<T>& t) {
  for (auto& v : t.values()) v = static_cast<T>(r.F32());
}

template <typename T>
void ReadShape(le::Reader& r, const Tensor<T>& t, const std::string& what) {
  const std::uint32_t rows = r.U32(), cols = r.U32();
  if (rows != t.rows() || cols != t.cols())
    throw Error("checkpoint " + what + " has shape (" + std::to_string(rows) + "," + std::to_string(cols) +
                "), network expects " + t.ShapeString());
}

}  // namespace detail

template <typename T>
std::string EncodeCheckpoint(Network<T>& net, const Adadelta<T>* opt = nullptr) {
  std::string buf(kCheckpointMagic, 4);
  le::PutU32(buf, kCheckpointVersion);
  le::PutString(buf, net.Describe());
  const auto params = net.Params();
  le::PutU32(buf, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    le::PutString(buf, p->name);
    le::PutU32(buf, static_cast<std::uint32_t>(p->value.rows()));
    le::PutU32(buf, static_cast<std::uint32_t>(p->value.cols()));
    detail::PutTensorData(buf, p->value);
  }
  const auto buffers = net.Buffers();
  le::PutU32(buf, static_cast<std::uint32_t>(buffers.size()));
  for (const auto* b : buffers) {
    le::PutU32(buf, static_cast<std::uint32_t>(b->rows()));
    le::PutU32(buf, static_cast<std::uint32_t>(b->cols()));
    detail::PutTensorData(buf, *b);
  }
  if (opt && opt->initialized()) {
    const Adadelta<T>& o = *opt;
    le::PutU32(buf, static_cast<std::uint32_t>(o.sq_grad().size()));
    for (std::size_t i = 0; i < o.sq_grad().size(); ++i) {
      detail::PutTensorData(buf, o.sq_grad()[i]);
      detail::PutTensorData(buf, o.sq_delta()[i]);
    }
  } else {
    le::PutU32(buf, 0);
  }
  return buf;
}

// Loads into a network built with the same architecture. Optimizer slots are
// restored when `opt` is given and the checkpoint carries them.
template <typename T>
void DecodeCheckpoint(std::string_view data, Network<T>& net, Adadelta<T>* opt = nullptr) {
  le::Reader r(data);
  if (r.Bytes(4) != std::string_view(kCheckpointMagic, 4)) throw Error("not a checkpoint (bad magic)");
  const std::uint32_t version = r.U32();
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const std::string desc = r.String();
  if (desc != net.Describe())
    throw Error("checkpoint architecture mismatch:\n  file:    " + desc + "\n  network: " + net.Describe());
  auto params = net.Params();
  if (r.U32() != params.size()) throw Error("checkpoint parameter count mismatch");
  for (auto* p : params) {
    const std::string name = r.String();
    if (name != p->name) throw Error("checkpoint parameter " + name + " where " + p->name + " expected");
    detail::ReadShape(r, p->value, name);
    detail::ReadTensorData(r, p->value);
    p->grad.Fill(T(0));
  }
  auto buffers = net.Buffers();
  if (r.U32() != buffers.size()) throw Error("checkpoint buffer count mismatch");
  for (auto* b : buffers) {
    detail::ReadShape(r, *b, "buffer");
    detail::ReadTensorData(r, *b);
  }
  const std::uint32_t slots = r.U32();
  if (slots != 0 && slots != params.size()) throw Error("checkpoint optimizer slot count mismatch");
  if (slots != 0) {
    Adadelta<T> scratch;
    Adadelta<T>& o = opt ? *opt : scratch;
    o.Reset(params);
    for (std::size_t i = 0; i < slots; ++i) {
      detail::ReadTensorData(r, o.sq_grad()[i]);
      detail::ReadTensorData(r, o.sq_delta()[i]);
    }
  }
  if (!r.AtEnd()) throw Error("trailing bytes after checkpoint");
}

template <typename T>
void SaveCheckpoint(const std::filesystem::path& path, Network<T>& net, const Adadelta<T>* opt = nullptr) {
  WriteFile(path, EncodeCheckpoint(net, opt));
}

template <typename T>
void LoadCheckpoint(const std::filesystem::path& path, Network<T>& net, Adadelta<T>* opt = nullptr) {
  DecodeCheckpoint(ReadFile(path), net, opt);
}

}  // namespace werpred::nn

#endif  // WERPRED_NN_CHECKPOINT_HPP_
