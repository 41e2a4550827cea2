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

// Utterance datasets: JSON-lines manifests, train/dev splitting and a
// synthetic corpus generator whose transcripts and audio both carry WER
// information.

#ifndef WERPRED_CORPUS_HPP_
#define WERPRED_CORPUS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "werpred/common.hpp"
#include "werpred/scoring.hpp"
#include "werpred/wav.hpp"

namespace werpred::corpus {

enum class Style { kNonSpontaneous, kSpontaneous };

inline std::string StyleName(Style s) { return s == Style::kNonSpontaneous ? "NS" : "S"; }

inline Style ParseStyle(const std::string& s) {
  if (s == "NS") return Style::kNonSpontaneous;
  if (s == "S") return Style::kSpontaneous;
  throw Error("style must be \"NS\" or \"S\", got \"" + s + "\"");
}

struct Utterance {
  std::string id;
  std::optional<std::filesystem::path> audio_path;
  Tokens hyp;
  std::optional<Tokens> ref;  // absent or empty reference: WER undefined
  std::string show;
  Style style = Style::kNonSpontaneous;
  double duration_s = 0.0;

  bool has_reference() const { return ref && !ref->empty(); }
};

struct Dataset {
  std::string name;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
};

struct ManifestLoad {
  Dataset dataset;
  std::size_t dropped_empty_hyp = 0;
};

inline ManifestLoad LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  ManifestLoad out;
  out.dataset.name = path.stem().string();
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Utterance u;
    try {
      const auto j = nlohmann::json::parse(line);
      u.id = j.at("id").get<std::string>();
      if (u.id.empty()) throw Error("empty id");
      u.hyp = Tokenize(j.at("hyp").get<std::string>());
      if (j.contains("ref") && !j["ref"].is_null()) u.ref = Tokenize(j["ref"].get<std::string>());
      u.show = j.at("show").get<std::string>();
      u.style = ParseStyle(j.at("style").get<std::string>());
      if (j.contains("audio") && !j["audio"].is_null()) {
        std::filesystem::path p = j["audio"].get<std::string>();
        u.audio_path = p.is_absolute() ? p : base / p;
      }
      if (j.contains("duration_s") && !j["duration_s"].is_null())
        u.duration_s = j["duration_s"].get<double>();
    } catch (const std::exception& e) {
      throw Error(path.string() + ": line " + std::to_string(lineno) + ": malformed record: " + e.what());
    }
    if (u.audio_path && u.duration_s <= 0.0) {
      if (std::filesystem::exists(*u.audio_path)) {
        const auto w = wav::ReadWav(*u.audio_path);
        u.duration_s = static_cast<double>(w.frames()) / w.sample_rate;
      }
      if (u.duration_s <= 0.0)
        throw Error(path.string() + ": line " + std::to_string(lineno) +
                    ": duration_s must be positive when audio is given");
    }
    if (!seen.insert(u.id).second)
      throw Error("duplicate id " + u.id + " at line " + std::to_string(lineno));
    if (u.hyp.empty()) {
      ++out.dropped_empty_hyp;
      continue;
    }
    out.dataset.utterances.push_back(std::move(u));
  }
  return out;
}

inline std::string ManifestLine(const Utterance& u, const std::filesystem::path& base) {
  nlohmann::ordered_json j;
  j["id"] = u.id;
  if (u.audio_path) {
    auto rel = u.audio_path->lexically_relative(base);
    j["audio"] = (rel.empty() ? *u.audio_path : rel).generic_string();
  }
  j["hyp"] = Join(u.hyp);
  if (u.ref) j["ref"] = Join(*u.ref);
  j["show"] = u.show;
  j["style"] = StyleName(u.style);
  if (u.duration_s > 0.0) j["duration_s"] = u.duration_s;
  return j.dump();
}

inline void WriteManifest(const std::filesystem::path& path, const Dataset& d) {
  const auto base = path.parent_path();
  std::string buf;
  for (const auto& u : d.utterances) {
    buf += ManifestLine(u, base);
    buf += '\n';
  }
  WriteFile(path, buf);
}

// Random (unstratified) partition of [0, n); true marks a dev item.
inline std::vector<bool> DevMask(std::size_t n, double dev_fraction, std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw Error("dev fraction must be in (0, 1)");
  if (n < 2) throw Error("cannot split a dataset with fewer than 2 utterances");
  auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));
  n_dev = std::clamp<std::size_t>(n_dev, 1, n - 1);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<bool> is_dev(n, false);
  for (std::size_t i = 0; i < n_dev; ++i) is_dev[idx[i]] = true;
  return is_dev;
}

// Both halves keep manifest order.
inline std::pair<Dataset, Dataset> SplitTrainDev(const Dataset& d, double dev_fraction, std::uint64_t seed) {
  const auto is_dev = DevMask(d.size(), dev_fraction, seed);
  Dataset train{d.name + ".train", {}}, dev{d.name + ".dev", {}};
  for (std::size_t i = 0; i < d.size(); ++i) (is_dev[i] ? dev : train).utterances.push_back(d.utterances[i]);
  return {std::move(train), std::move(dev)};
}

// Mixture of a 0% spike, a mid-range Beta component and a 100% spike.
struct ErrorProfile {
  double w_zero = 0.2;
  double w_mid = 0.6;
  double w_full = 0.2;
  // Beta(a, b) scaled to (0, 100); spontaneous speech skews higher.
  double mid_a_ns = 2.0, mid_b_ns = 4.0;
  double mid_a_s = 3.0, mid_b_s = 2.5;
};

struct SynthConfig {
  std::size_t n_utterances = 1000;
  std::size_t n_test = 0;  // trailing utterances drawn from held-out shows
  std::size_t vocab_size = 400;
  std::size_t min_len = 4;
  std::size_t max_len = 20;
  ErrorProfile error_profile;
  int sample_rate = 8000;
  // (target WER, SNR dB) knots, linearly interpolated and clamped at the ends.
  std::vector<std::pair<double, double>> noise_snr_map = {{0.0, 30.0}, {100.0, -5.0}};
  std::uint64_t seed = 1;
  double confusable_fraction = 0.3;  // tail of the vocabulary that errors draw from
  double ref_confusable_rate = 0.03;
  std::size_t n_shows = 8;
  std::size_t n_test_shows = 4;
  double token_duration_s = 0.15;
  double edge_silence_s = 0.1;
  std::size_t embed_dim = 16;
  bool write_audio = true;

  void Validate() const {
    const auto& p = error_profile;
    if (p.w_zero < 0 || p.w_mid < 0 || p.w_full < 0 || std::abs(p.w_zero + p.w_mid + p.w_full - 1.0) > 1e-9)
      throw Error("error profile mixture weights must be non-negative and sum to 1");
    if (vocab_size < 2) throw Error("vocab_size must be at least 2");
    if (min_len < 1 || max_len < min_len) throw Error("invalid utterance length range");
    if (n_test > n_utterances) throw Error("n_test exceeds n_utterances");
    if (noise_snr_map.empty()) throw Error("noise_snr_map is empty");
    if (sample_rate <= 0) throw Error("sample_rate must be positive");
    if (n_shows == 0 || (n_test > 0 && n_test_shows == 0)) throw Error("need at least one show per split");
  }
};

inline double InterpolateSnr(const std::vector<std::pair<double, double>>& knots, double wer) {
  if (wer <= knots.front().first) return knots.front().second;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (wer <= knots[i].first) {
      const auto [x0, y0] = knots[i - 1];
      const auto [x1, y1] = knots[i];
      return y0 + (y1 - y0) * (wer - x0) / (x1 - x0);
    }
  }
  return knots.back().second;
}

struct SynthUtterance {
  double target_wer = 0.0;
  double realized_wer = 0.0;
};

struct SynthCorpus {
  Dataset dataset;
  std::vector<SynthUtterance> truth;  // parallel to dataset.utterances
  std::vector<std::string> vocabulary;
  std::size_t n_clean_words = 0;  // vocabulary[0, n_clean_words) are the in-domain words

  Dataset Train() const { return Slice(0, dataset.size() - n_test, dataset.name + ".train"); }
  Dataset Test() const { return Slice(dataset.size() - n_test, dataset.size(), dataset.name + ".test"); }

  std::size_t n_test = 0;

 private:
  Dataset Slice(std::size_t lo, std::size_t hi, std::string name) const {
    Dataset d{std::move(name), {}};
    d.utterances.assign(dataset.utterances.begin() + lo, dataset.utterances.begin() + hi);
    return d;
  }
};

namespace detail {

inline double SampleBeta(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng), y = gb(rng);
  return x / (x + y);
}

// Tone per token, fixed by the token's vocabulary index.
inline double ToneFrequency(std::size_t word_index) {
  return 250.0 + static_cast<double>((word_index * 7919) % 37) * 30.0;
}

}  // namespace detail

// Generates the corpus; when `audio_dir` is given (and cfg.write_audio) each
// utterance's audio is written there as <id>.wav. Audio renders the spoken
// (reference) words as tones plus white noise whose SNR falls as the target
// WER rises.
inline SynthCorpus SynthesizeCorpus(const SynthConfig& cfg,
                                    const std::optional<std::filesystem::path>& audio_dir = std::nullopt) {
  cfg.Validate();
  if (audio_dir && cfg.write_audio) {
    std::error_code ec;
    std::filesystem::create_directories(*audio_dir, ec);
    if (ec || !std::filesystem::is_directory(*audio_dir))
      throw Error("cannot create audio directory " + audio_dir->string());
  }
  std::mt19937_64 rng(cfg.seed);
  SynthCorpus out;
  out.dataset.name = "synth";
  out.n_test = cfg.n_test;
  const std::size_t V = cfg.vocab_size;
  auto n_conf = static_cast<std::size_t>(std::llround(cfg.confusable_fraction * static_cast<double>(V)));
  n_conf = std::clamp<std::size_t>(n_conf, 1, V - 1);
  out.n_clean_words = V - n_conf;
  for (std::size_t w = 0; w < V; ++w) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "w%04zu", w);
    out.vocabulary.emplace_back(buf);
  }
  // Zipf-like weights over the in-domain words.
  std::vector<double> zipf(out.n_clean_words);
  for (std::size_t i = 0; i < zipf.size(); ++i) zipf[i] = 1.0 / std::pow(static_cast<double>(i + 1), 0.8);
  std::discrete_distribution<std::size_t> clean_word(zipf.begin(), zipf.end());
  std::uniform_int_distribution<std::size_t> conf_word(out.n_clean_words, V - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t n_train = cfg.n_utterances - cfg.n_test;
  for (std::size_t i = 0; i < cfg.n_utterances; ++i) {
    const bool test = i >= n_train;
    const std::size_t n_shows = test ? cfg.n_test_shows : cfg.n_shows;
    const std::size_t show = std::uniform_int_distribution<std::size_t>(0, n_shows - 1)(rng);
    char show_name[32];
    std::snprintf(show_name, sizeof(show_name), "%sshow%02zu", test ? "test_" : "", show);
    const Style style = show % 2 ? Style::kSpontaneous : Style::kNonSpontaneous;

    const std::size_t n = std::uniform_int_distribution<std::size_t>(cfg.min_len, cfg.max_len)(rng);
    std::vector<std::size_t> ref_ids(n);
    for (auto& w : ref_ids) w = unit(rng) < cfg.ref_confusable_rate ? conf_word(rng) : clean_word(rng);

    const auto& ep = cfg.error_profile;
    const double u = unit(rng);
    double target;
    if (u < ep.w_zero) {
      target = 0.0;
    } else if (u < ep.w_zero + ep.w_mid) {
      target = style == Style::kSpontaneous ? 100.0 * detail::SampleBeta(rng, ep.mid_a_s, ep.mid_b_s)
                                            : 100.0 * detail::SampleBeta(rng, ep.mid_a_ns, ep.mid_b_ns);
    } else {
      target = 100.0;
    }
    const auto edits = static_cast<std::size_t>(std::llround(target * static_cast<double>(n) / 100.0));

    Tokens ref(n), hyp;
    for (std::size_t k = 0; k < n; ++k) ref[k] = out.vocabulary[ref_ids[k]];
    scoring::Alignment realized;
    for (int attempt = 0;; ++attempt) {
      std::size_t n_sub = 0, n_del = 0, n_ins = 0;
      for (std::size_t e = 0; e < edits; ++e) {
        const double r = unit(rng);
        (r < 0.6 ? n_sub : r < 0.8 ? n_del : n_ins)++;
      }
      while (n_sub + n_del > n) {
        --(n_del > 0 ? n_del : n_sub);
        ++n_ins;
      }
      // Keep at least one hypothesis token.
      if (n_del == n) {
        --n_del;
        ++n_sub;
      }
      std::vector<std::size_t> pos(n);
      for (std::size_t k = 0; k < n; ++k) pos[k] = k;
      std::shuffle(pos.begin(), pos.end(), rng);
      std::vector<int> op(n, 0);  // 0 keep, 1 substitute, 2 delete
      for (std::size_t k = 0; k < n_sub; ++k) op[pos[k]] = 1;
      for (std::size_t k = n_sub; k < n_sub + n_del; ++k) op[pos[k]] = 2;
      std::vector<std::size_t> hyp_ids;
      for (std::size_t k = 0; k < n; ++k) {
        if (op[k] == 0) hyp_ids.push_back(ref_ids[k]);
        if (op[k] == 1) {
          std::size_t w = conf_word(rng);
          while (w == ref_ids[k]) w = conf_word(rng);
          hyp_ids.push_back(w);
        }
      }
      for (std::size_t k = 0; k < n_ins; ++k) {
        const auto at = std::uniform_int_distribution<std::size_t>(0, hyp_ids.size())(rng);
        hyp_ids.insert(hyp_ids.begin() + static_cast<long>(at), conf_word(rng));
      }
      hyp.clear();
      for (auto w : hyp_ids) hyp.push_back(out.vocabulary[w]);
      realized = scoring::AlignWords(ref, hyp);
      const auto diff = static_cast<long>(realized.errors()) - static_cast<long>(edits);
      if (std::abs(diff) <= 1 || attempt >= 50) break;
    }

    Utterance utt;
    char id[32];
    std::snprintf(id, sizeof(id), "utt%06zu", i);
    utt.id = id;
    utt.hyp = hyp;
    utt.ref = ref;
    utt.show = show_name;
    utt.style = style;
    const double dur = 2.0 * cfg.edge_silence_s + static_cast<double>(n) * cfg.token_duration_s;
    const auto n_samples = static_cast<std::size_t>(std::llround(dur * cfg.sample_rate));
    utt.duration_s = static_cast<double>(n_samples) / cfg.sample_rate;

    // Audio is always drawn from the rng so the transcript stream does not
    // depend on whether audio is written.
    std::vector<double> signal(n_samples, 0.0);
    const auto lead = static_cast<std::size_t>(std::llround(cfg.edge_silence_s * cfg.sample_rate));
    const auto tok = static_cast<std::size_t>(std::llround(cfg.token_duration_s * cfg.sample_rate));
    const auto fade = std::max<std::size_t>(1, static_cast<std::size_t>(0.005 * cfg.sample_rate));
    double power = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double f = detail::ToneFrequency(ref_ids[k]);
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      for (std::size_t s = 0; s < tok; ++s) {
        const std::size_t at = lead + k * tok + s;
        if (at >= n_samples) break;
        const double env = std::min({1.0, static_cast<double>(s) / fade, static_cast<double>(tok - s) / fade});
        const double v = 0.5 * env * std::sin(2.0 * std::numbers::pi * f * s / cfg.sample_rate + phase);
        signal[at] = v;
        power += v * v;
      }
    }
    power /= static_cast<double>(std::max<std::size_t>(1, n * tok));
    const double snr_db = InterpolateSnr(cfg.noise_snr_map, target);
    const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    double peak = 0.0;
    for (double& v : signal) {
      v += sigma * gauss(rng);
      peak = std::max(peak, std::abs(v));
    }
    if (audio_dir && cfg.write_audio) {
      if (peak > 0.0)
        for (double& v : signal) v *= 0.9 / peak;
      const auto p = *audio_dir / (utt.id + ".wav");
      wav::WriteWav16(p, signal, cfg.sample_rate);
      utt.audio_path = p;
    }
    out.dataset.utterances.push_back(std::move(utt));
    out.truth.push_back({target, scoring::Wer(realized)});
  }
  return out;
}

// Side resources that make a synthetic corpus usable end to end: a word
// embedding table, a lexicon with a phoneme-category map, and POS tags for
// every hypothesis. Confusable words get a shared embedding offset, a
// distinct phoneme mix and a distinct tag distribution, the way real ASR
// error words differ from in-domain words.
struct SynthResources {
  std::filesystem::path embeddings, lexicon, phoneme_categories, pos_tags;
};

inline SynthResources WriteSynthResources(const SynthCorpus& corpus, const SynthConfig& cfg,
                                          const std::filesystem::path& dir) {
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t V = corpus.vocabulary.size();
  const std::size_t D = cfg.embed_dim;
  SynthResources res{dir / "embeddings.txt", dir / "lexicon.tsv", dir / "phonemes.json", dir / "pos.tsv"};

  std::vector<double> offset(D);
  for (auto& v : offset) v = gauss(rng);
  std::string emb = std::to_string(V) + " " + std::to_string(D) + "\n";
  char num[32];
  for (std::size_t w = 0; w < V; ++w) {
    const bool conf = w >= corpus.n_clean_words;
    emb += corpus.vocabulary[w];
    for (std::size_t k = 0; k < D; ++k) {
      const double v = 0.5 * gauss(rng) + (conf ? 0.7 * offset[k] : 0.0);
      std::snprintf(num, sizeof(num), " %.6f", v);
      emb += num;
    }
    emb += '\n';
  }
  WriteFile(res.embeddings, emb);

  const std::vector<std::pair<std::string, std::string>> phonemes = {
      {"a", "vowel"},   {"e", "vowel"},     {"i", "vowel"},     {"o", "vowel"},     {"u", "vowel"},
      {"m", "nasal"},   {"n", "nasal"},     {"p", "plosive"},   {"t", "plosive"},   {"k", "plosive"},
      {"b", "plosive"}, {"d", "plosive"},   {"f", "fricative"}, {"s", "fricative"}, {"v", "fricative"},
      {"z", "fricative"}, {"l", "liquid"},  {"r", "liquid"},    {"j", "glide"},     {"w", "glide"},
      {"@", "other"}};
  nlohmann::ordered_json cats;
  for (const auto& [ph, cat] : phonemes) cats[ph] = cat;
  WriteFile(res.phoneme_categories, cats.dump(2) + "\n");

  std::string lex;
  for (std::size_t w = 0; w < V; ++w) {
    const bool conf = w >= corpus.n_clean_words;
    const auto len = std::uniform_int_distribution<std::size_t>(2, 6)(rng);
    lex += corpus.vocabulary[w] + "\t";
    for (std::size_t k = 0; k < len; ++k) {
      std::size_t ph;
      if (conf && unit(rng) < 0.5) {
        ph = std::uniform_int_distribution<std::size_t>(7, 15)(rng);  // plosives and fricatives
      } else {
        ph = std::uniform_int_distribution<std::size_t>(0, phonemes.size() - 1)(rng);
      }
      if (k) lex += ' ';
      lex += phonemes[ph].first;
    }
    lex += '\n';
  }
  WriteFile(res.lexicon, lex);

  const std::vector<std::string> clean_tags = {"DET", "NOUN", "VERB", "ADJ", "ADP", "PRON"};
  const std::vector<std::string> conf_tags = {"NOUN", "ADV", "INTJ", "X"};
  std::vector<std::string> word_tag(V);
  for (std::size_t w = 0; w < V; ++w) {
    const auto& pool = w >= corpus.n_clean_words ? conf_tags : clean_tags;
    word_tag[w] = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  }
  std::string pos;
  for (const auto& u : corpus.dataset.utterances) {
    pos += u.id + "\t";
    for (std::size_t k = 0; k < u.hyp.size(); ++k) {
      const auto w = static_cast<std::size_t>(std::stoul(u.hyp[k].substr(1)));
      if (k) pos += ' ';
      pos += word_tag[w];
    }
    pos += '\n';
  }
  WriteFile(res.pos_tags, pos);
  return res;
}

}  // namespace werpred::corpus

#endif  // WERPRED_CORPUS_HPP_
