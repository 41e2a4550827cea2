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

// Minimal RIFF/WAVE reader and writer. Reads PCM 16-bit and IEEE float
// 32-bit (any channel count); writes PCM 16-bit mono.

#ifndef WERPRED_WAV_HPP_
#define WERPRED_WAV_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "werpred/common.hpp"

namespace werpred::wav {

struct WavData {
  int sample_rate = 0;
  int channels = 0;
  // Interleaved samples scaled to [-1, 1].
  std::vector<double> samples;

  std::size_t frames() const { return channels ? samples.size() / channels : 0; }
};

inline WavData ParseWav(std::string_view bytes, const std::string& name = "<memory>") {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE")
    throw Error(name + ": not a RIFF/WAVE file");
  le::Reader rd(bytes.substr(12));
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::string_view payload;
  bool have_data = false;
  while (!rd.AtEnd() && !have_data) {
    std::string id(rd.Bytes(4));
    std::uint32_t size = rd.U32();
    std::string_view chunk = rd.Bytes(size);
    if (size % 2 && !rd.AtEnd()) rd.Bytes(1);
    if (id == "fmt ") {
      if (size < 16) throw Error(name + ": short fmt chunk");
      le::Reader f(chunk);
      std::uint32_t a = f.U32();
      format = a & 0xFFFF;
      channels = a >> 16;
      rate = f.U32();
      f.U32();  // byte rate
      std::uint32_t b = f.U32();
      bits = b >> 16;
      if (format == 0xFFFE && size >= 40) {
        f.U32();  // cbSize + valid bits
        f.U32();  // channel mask
        format = f.U32() & 0xFFFF;  // sub-format GUID starts with the format tag
      }
      have_fmt = true;
    } else if (id == "data") {
      payload = chunk;
      have_data = true;
    }
  }
  if (!have_fmt || !have_data) throw Error(name + ": missing fmt or data chunk");
  if (channels == 0 || rate == 0) throw Error(name + ": invalid channel count or sample rate");
  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.channels = channels;
  if (format == 1 && bits == 16) {
    const std::size_t n = payload.size() / 2;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto lo = static_cast<unsigned char>(payload[2 * i]);
      auto hi = static_cast<unsigned char>(payload[2 * i + 1]);
      auto v = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
      out.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    le::Reader d(payload.substr(0, payload.size() / 4 * 4));
    const std::size_t n = payload.size() / 4;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = d.F32();
  } else {
    throw Error(name + ": unsupported encoding (format " + std::to_string(format) + ", " +
                std::to_string(bits) + " bits)");
  }
  return out;
}

inline WavData ReadWav(const std::filesystem::path& path) {
  return ParseWav(ReadFile(path), path.string());
}

// Encodes mono samples in [-1, 1] as PCM 16-bit; values outside are clipped.
inline std::string EncodeWav16(const std::vector<double>& samples, int sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::string buf = "RIFF";
  le::PutU32(buf, 36 + data_bytes);
  buf += "WAVEfmt ";
  le::PutU32(buf, 16);
  le::PutU32(buf, 1u | (1u << 16));  // PCM, mono
  le::PutU32(buf, static_cast<std::uint32_t>(sample_rate));
  le::PutU32(buf, static_cast<std::uint32_t>(sample_rate) * 2);
  le::PutU32(buf, 2u | (16u << 16));  // block align, bits per sample
  buf += "data";
  le::PutU32(buf, data_bytes);
  for (double s : samples) {
    double v = std::clamp(s, -1.0, 1.0) * 32767.0;
    auto q = static_cast<std::int16_t>(std::lround(v));
    auto u = static_cast<std::uint16_t>(q);
    buf.push_back(static_cast<char>(u & 0xFF));
    buf.push_back(static_cast<char>(u >> 8));
  }
  return buf;
}

inline void WriteWav16(const std::filesystem::path& path, const std::vector<double>& samples,
                       int sample_rate) {
  WriteFile(path, EncodeWav16(samples, sample_rate));
}

}  // namespace werpred::wav

#endif  // WERPRED_WAV_HPP_
