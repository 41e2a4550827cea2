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

// Audio front-end: standardization to fixed-length 8 kHz buffers, log-mel
// spectrogram, MFCC and the frame-averaged signal descriptors used by the
// regression baseline.

#ifndef WERPRED_DSP_HPP_
#define WERPRED_DSP_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "werpred/common.hpp"
#include "werpred/tensor.hpp"
#include "werpred/wav.hpp"

namespace werpred::dsp {

struct DspConfig {
  int sample_rate = 8000;
  std::size_t n_samples = 48000;  // 6 s
  std::size_t hop = 80;           // 10 ms
  std::size_t win = 200;          // 25 ms
  std::size_t n_fft = 512;
  std::size_t n_mels = 96;
  double f_min = 0.0;
  double f_max = 4000.0;
  double preemphasis = 0.97;
  double log_floor = 1e-10;
  std::size_t n_mfcc = 13;
  double f0_min = 50.0;
  double f0_max = 400.0;
  std::size_t pitch_window = 400;  // 50 ms, enough for two periods at 50 Hz
  double voicing_threshold = 0.5;
  std::size_t delta_window = 2;

  std::size_t n_frames() const { return n_samples / hop + 1; }
};

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;
};

inline void CheckStandard(const AudioBuffer& a, const DspConfig& cfg) {
  if (a.sample_rate != cfg.sample_rate || a.samples.size() != cfg.n_samples)
    throw Error("audio buffer is not standardized (expected " + std::to_string(cfg.n_samples) +
                " samples at " + std::to_string(cfg.sample_rate) + " Hz)");
}

// Kaiser-windowed sinc resampler in polyphase form: one filter per output
// phase of the rational ratio to/from.
inline std::vector<double> Resample(std::span<const double> x, int from, int to,
                                    int zero_crossings = 16, double kaiser_beta = 8.6) {
  if (from <= 0 || to <= 0) throw Error("resample: rates must be positive");
  if (from == to) return {x.begin(), x.end()};
  const long g = std::gcd(from, to);
  const long up = to / g, down = from / g;
  const double cutoff = std::min(1.0, static_cast<double>(to) / from) * 0.97;
  const long half = static_cast<long>(std::ceil(zero_crossings / cutoff));
  const double i0_beta = std::cyl_bessel_i(0.0, kaiser_beta);
  // taps[p][j] weights x[base + j - half + 1] for output phase p, where
  // base = floor(n * down / up).
  std::vector<std::vector<double>> taps(up, std::vector<double>(2 * half));
  for (long p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / up;
    for (long j = 0; j < 2 * half; ++j) {
      const double t = frac - static_cast<double>(j - half + 1);  // position minus tap
      const double r = t / half;
      double w = 0.0;
      if (std::abs(r) < 1.0)
        w = std::cyl_bessel_i(0.0, kaiser_beta * std::sqrt(1.0 - r * r)) / i0_beta;
      const double arg = std::numbers::pi * cutoff * t;
      const double sinc = arg == 0.0 ? 1.0 : std::sin(arg) / arg;
      taps[p][j] = cutoff * sinc * w;
    }
  }
  const auto n_in = static_cast<long>(x.size());
  const long n_out = (n_in * up + down - 1) / down;
  std::vector<double> y(n_out, 0.0);
  for (long n = 0; n < n_out; ++n) {
    const long pos = n * down;
    const long base = pos / up;
    const long phase = pos % up;
    const auto& h = taps[phase];
    double acc = 0.0;
    for (long j = 0; j < 2 * half; ++j) {
      const long k = base + j - half + 1;
      if (k >= 0 && k < n_in) acc += h[j] * x[k];
    }
    y[n] = acc;
  }
  return y;
}

// Mono, 8 kHz, exactly n_samples (zero-padded or truncated to the first
// n_samples), peak-normalized to [-1, 1].
inline AudioBuffer Standardize(const wav::WavData& wav, const DspConfig& cfg = {}) {
  if (wav.frames() == 0) throw Error("zero-length audio");
  std::vector<double> mono(wav.frames(), 0.0);
  for (std::size_t i = 0; i < mono.size(); ++i) {
    double s = 0.0;
    for (int c = 0; c < wav.channels; ++c) s += wav.samples[i * wav.channels + c];
    mono[i] = s / wav.channels;
  }
  std::vector<double> x = Resample(mono, wav.sample_rate, cfg.sample_rate);
  x.resize(cfg.n_samples, 0.0);
  double peak = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw Error("non-finite audio sample");
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.0)
    for (double& v : x) v /= peak;
  return {std::move(x), cfg.sample_rate};
}

inline AudioBuffer LoadAndStandardize(const std::filesystem::path& path, const DspConfig& cfg = {}) {
  return Standardize(wav::ReadWav(path), cfg);
}

inline double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// n_mels + 2 band edges equally spaced on the mel scale.
inline std::vector<double> MelBandEdges(const DspConfig& cfg) {
  const double lo = HzToMel(cfg.f_min), hi = HzToMel(cfg.f_max);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = MelToHz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  return edges;
}

// Triangular filters, (n_mels, n_fft/2 + 1), unit peak height.
inline Tensor<double> MelFilterbank(const DspConfig& cfg) {
  const std::size_t n_bins = cfg.n_fft / 2 + 1;
  const auto edges = MelBandEdges(cfg);
  Tensor<double> fb(cfg.n_mels, n_bins);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.n_fft);
      const double w = std::min((f - l) / (c - l), (r - f) / (r - c));
      fb(m, k) = std::max(0.0, w);
    }
  }
  return fb;
}

// Symmetric Hamming window.
inline std::vector<double> HammingWindow(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return w;
}

// One-sided power spectrum |X_k|^2, k = 0..n_fft/2, of a zero-padded frame.
inline std::vector<double> PowerSpectrum(std::span<const double> frame, std::size_t n_fft) {
  if (frame.size() > n_fft) throw Error("frame longer than FFT size");
  std::vector<double> in(n_fft, 0.0);
  std::copy(frame.begin(), frame.end(), in.begin());
  std::vector<std::complex<double>> out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  std::vector<double> p(n_fft / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(out[k]);
  return p;
}

// Centered framing: frame t covers samples [t*hop - win/2, t*hop + win/2),
// zero outside the signal. Returns (n_frames, win).
inline Tensor<double> Frames(std::span<const double> x, const DspConfig& cfg) {
  const std::size_t n_frames = x.size() / cfg.hop + 1;
  Tensor<double> out(n_frames, cfg.win);
  const auto offset = static_cast<long>(cfg.win / 2);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const long start = static_cast<long>(t * cfg.hop) - offset;
    for (std::size_t i = 0; i < cfg.win; ++i) {
      const long k = start + static_cast<long>(i);
      out(t, i) = (k >= 0 && k < static_cast<long>(x.size())) ? x[k] : 0.0;
    }
  }
  return out;
}

// Log-mel energies (n_frames, n_mels), natural log with a floor.
inline Tensor<double> LogMel(const AudioBuffer& a, const DspConfig& cfg = {}) {
  CheckStandard(a, cfg);
  std::vector<double> emph(a.samples.size());
  for (std::size_t i = 0; i < emph.size(); ++i)
    emph[i] = a.samples[i] - (i ? cfg.preemphasis * a.samples[i - 1] : 0.0);
  const Tensor<double> frames = Frames(emph, cfg);
  const Tensor<double> fb = MelFilterbank(cfg);
  const auto window = HammingWindow(cfg.win);
  Tensor<double> out(frames.rows(), cfg.n_mels);
  std::vector<double> buf(cfg.win);
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    auto f = frames.row(t);
    for (std::size_t i = 0; i < cfg.win; ++i) buf[i] = f[i] * window[i];
    const auto power = PowerSpectrum(buf, cfg.n_fft);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      auto w = fb.row(m);
      for (std::size_t k = 0; k < power.size(); ++k) e += w[k] * power[k];
      out(t, m) = std::log(std::max(e, cfg.log_floor));
    }
  }
  return out;
}

// Orthonormal DCT-II matrix (n_out, n_in).
inline Tensor<double> DctMatrix(std::size_t n_out, std::size_t n_in) {
  Tensor<double> d(n_out, n_in);
  const double n = static_cast<double>(n_in);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (std::size_t i = 0; i < n_in; ++i)
      d(k, i) = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * i + 1.0) / (2.0 * n));
  }
  return d;
}

inline Tensor<double> ApplyDct(const Tensor<double>& log_mel, std::size_t n_coeffs) {
  const Tensor<double> d = DctMatrix(n_coeffs, log_mel.cols());
  Tensor<double> out(log_mel.rows(), n_coeffs);
  for (std::size_t t = 0; t < log_mel.rows(); ++t)
    for (std::size_t k = 0; k < n_coeffs; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < log_mel.cols(); ++i) s += d(k, i) * log_mel(t, i);
      out(t, k) = s;
    }
  return out;
}

inline Tensor<double> Mfcc(const AudioBuffer& a, const DspConfig& cfg = {}) {
  return ApplyDct(LogMel(a, cfg), cfg.n_mfcc);
}

// Regression deltas over +-window frames with edge replication.
inline Tensor<double> Deltas(const Tensor<double>& x, std::size_t window) {
  Tensor<double> out(x.rows(), x.cols());
  double denom = 0.0;
  for (std::size_t n = 1; n <= window; ++n) denom += 2.0 * static_cast<double>(n * n);
  const auto last = static_cast<long>(x.rows()) - 1;
  for (long t = 0; t <= last; ++t)
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double s = 0.0;
      for (std::size_t n = 1; n <= window; ++n) {
        const long a = std::min(last, t + static_cast<long>(n));
        const long b = std::max(0L, t - static_cast<long>(n));
        s += static_cast<double>(n) * (x(a, c) - x(b, c));
      }
      out(t, c) = s / denom;
    }
  return out;
}

struct PitchEstimate {
  double f0 = 0.0;       // 0 when unvoiced
  double voicing = 0.0;  // clamped normalized autocorrelation peak
};

// Normalized autocorrelation pitch tracker over lags for [f0_min, f0_max].
// Picks the shortest-lag local maximum within 10% of the best peak, which
// avoids locking onto sub-harmonics, then refines it by parabolic fit.
inline PitchEstimate EstimatePitch(std::span<const double> x, const DspConfig& cfg) {
  const std::size_t n = x.size();
  const auto min_lag = static_cast<std::size_t>(std::floor(cfg.sample_rate / cfg.f0_max));
  const auto max_lag = std::min(n - 2, static_cast<std::size_t>(std::ceil(cfg.sample_rate / cfg.f0_min)));
  if (min_lag < 1 || max_lag <= min_lag) return {};
  // energy[i] = sum of x[0..i)^2, for the overlap energies of each lag.
  std::vector<double> energy(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) energy[i + 1] = energy[i] + x[i] * x[i];
  std::vector<double> r(max_lag + 2, 0.0);
  for (std::size_t lag = min_lag - 1; lag <= max_lag + 1 && lag < n; ++lag) {
    double xy = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) xy += x[i] * x[i + lag];
    const double xx = energy[n - lag], yy = energy[n] - energy[lag];
    r[lag] = (xx > 0.0 && yy > 0.0) ? xy / std::sqrt(xx * yy) : 0.0;
  }
  double best = 0.0;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) best = std::max(best, r[lag]);
  if (best <= 0.0) return {};
  std::size_t chosen = 0;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
    const bool local_max = r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1];
    if (local_max && r[lag] >= 0.9 * best) {
      chosen = lag;
      break;
    }
  }
  if (chosen == 0) return {};
  PitchEstimate est;
  est.voicing = std::clamp(r[chosen], 0.0, 1.0);
  if (est.voicing < cfg.voicing_threshold) return {0.0, est.voicing};
  const double a = r[chosen - 1], b = r[chosen], c = r[chosen + 1];
  const double curv = a - 2.0 * b + c;
  const double shift = curv < 0.0 ? std::clamp(0.5 * (a - c) / curv, -0.5, 0.5) : 0.0;
  est.f0 = cfg.sample_rate / (static_cast<double>(chosen) + shift);
  return est;
}

inline constexpr std::size_t kSigFeatureDim = 43;

inline std::vector<std::string> SigFeatureNames() {
  std::vector<std::string> names;
  for (int k = 0; k < 13; ++k) names.push_back("sig_mfcc" + std::to_string(k));
  for (int k = 0; k < 13; ++k) names.push_back("sig_d_mfcc" + std::to_string(k));
  for (int k = 0; k < 13; ++k) names.push_back("sig_dd_mfcc" + std::to_string(k));
  for (const char* s : {"sig_log_energy", "sig_f0", "sig_voicing", "sig_loudness"}) names.emplace_back(s);
  return names;
}

// Frame means of: 13 MFCC, 13 deltas, 13 delta-deltas, log-energy, F0,
// voicing probability and log-RMS loudness (43 values).
inline std::vector<double> SigFeatures(const AudioBuffer& a, const DspConfig& cfg = {}) {
  CheckStandard(a, cfg);
  if (cfg.n_mfcc != 13) throw Error("signal features expect 13 MFCCs");
  const Tensor<double> mfcc = Mfcc(a, cfg);
  const Tensor<double> d1 = Deltas(mfcc, cfg.delta_window);
  const Tensor<double> d2 = Deltas(d1, cfg.delta_window);
  const Tensor<double> frames = Frames(a.samples, cfg);
  DspConfig pitch_cfg = cfg;
  pitch_cfg.win = cfg.pitch_window;
  const Tensor<double> pitch_frames = Frames(a.samples, pitch_cfg);
  const std::size_t n_frames = mfcc.rows();
  std::vector<std::vector<double>> cols(kSigFeatureDim, std::vector<double>(n_frames));
  for (std::size_t t = 0; t < n_frames; ++t) {
    for (std::size_t k = 0; k < 13; ++k) {
      cols[k][t] = mfcc(t, k);
      cols[13 + k][t] = d1(t, k);
      cols[26 + k][t] = d2(t, k);
    }
    double energy = 0.0;
    for (double v : frames.row(t)) energy += v * v;
    const auto pitch = EstimatePitch(pitch_frames.row(t), cfg);
    const double rms = std::sqrt(energy / static_cast<double>(cfg.win));
    cols[39][t] = std::log(std::max(energy, cfg.log_floor));
    cols[40][t] = pitch.f0;
    cols[41][t] = pitch.voicing;
    cols[42][t] = std::log(std::max(rms, cfg.log_floor));
  }
  std::vector<double> out(kSigFeatureDim);
  for (std::size_t k = 0; k < kSigFeatureDim; ++k)
    out[k] = PairwiseSum(cols[k]) / static_cast<double>(n_frames);
  return out;
}

// Per-utterance feature cache: one file per (id, kind); header is magic
// "WPFC", format version, rows, cols, then little-endian float32 row-major.
class FeatureCache {
 public:
  static constexpr std::uint32_t kVersion = 1;

  explicit FeatureCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  // Uses $WERPRED_CACHE_DIR when set.
  static std::optional<FeatureCache> FromEnvironment() {
    const char* dir = std::getenv("WERPRED_CACHE_DIR");
    if (!dir || !*dir) return std::nullopt;
    return FeatureCache(dir);
  }

  std::filesystem::path PathFor(const std::string& id, const std::string& kind) const {
    std::string safe;
    for (char c : id) safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return dir_ / (safe + "." + kind + ".feat");
  }

  static std::string Encode(const FeatureTensor& t) {
    std::string buf = "WPFC";
    le::PutU32(buf, kVersion);
    le::PutU32(buf, static_cast<std::uint32_t>(t.rows()));
    le::PutU32(buf, static_cast<std::uint32_t>(t.cols()));
    for (float v : t.values()) le::PutF32(buf, v);
    return buf;
  }

  static FeatureTensor Decode(std::string_view bytes) {
    if (bytes.substr(0, 4) != "WPFC") throw Error("feature cache: bad magic");
    le::Reader rd(bytes.substr(4));
    if (rd.U32() != kVersion) throw Error("feature cache: unsupported version");
    const std::size_t rows = rd.U32(), cols = rd.U32();
    std::vector<float> data(rows * cols);
    for (auto& v : data) v = rd.F32();
    return FeatureTensor(rows, cols, std::move(data));
  }

  std::optional<FeatureTensor> Load(const std::string& id, const std::string& kind) const {
    const auto p = PathFor(id, kind);
    if (!std::filesystem::exists(p)) return std::nullopt;
    return Decode(ReadFile(p));
  }

  void Store(const std::string& id, const std::string& kind, const FeatureTensor& t) const {
    WriteFile(PathFor(id, kind), Encode(t));
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace werpred::dsp

#endif  // WERPRED_DSP_HPP_
