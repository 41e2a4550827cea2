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

// Engineered features of the regression baseline. Four families:
//
//   POS  normalized tag histogram + mean tag-bigram log10 probability
//   LM   total and mean log10 probability, perplexity, OOV rate
//   LEX  mean phoneme-category frequencies over in-lexicon words + OOV rate
//   SIG  frame-averaged acoustic descriptors (see dsp::SigFeatures)

#ifndef WERPRED_BASELINE_FEATURES_HPP_
#define WERPRED_BASELINE_FEATURES_HPP_

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "werpred/baseline/ngram.hpp"
#include "werpred/common.hpp"
#include "werpred/corpus.hpp"
#include "werpred/dsp.hpp"

namespace werpred::baseline {

enum class Family { kPos, kLex, kLm, kSig };

inline constexpr std::array<Family, 4> kAllFamilies = {Family::kPos, Family::kLex, Family::kLm, Family::kSig};

inline std::string FamilyName(Family f) {
  switch (f) {
    case Family::kPos: return "POS";
    case Family::kLex: return "LEX";
    case Family::kLm: return "LM";
    case Family::kSig: return "SIG";
  }
  return "?";
}

// "pos+lex+lm" or "pos,lex,lm"; returned in canonical order.
inline std::vector<Family> ParseFamilies(const std::string& text) {
  std::set<Family> picked;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, text.find(',') != std::string::npos ? ',' : '+')) {
    std::string lower;
    for (char c : item) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    bool found = false;
    for (Family f : kAllFamilies) {
      std::string name;
      for (char c : FamilyName(f)) name += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (lower == name) picked.insert(f), found = true;
    }
    if (!found) throw Error("unknown feature family \"" + item + "\" (expected pos, lex, lm, sig)");
  }
  if (picked.empty()) throw Error("no feature families selected");
  return {picked.begin(), picked.end()};
}

inline std::string FamiliesName(const std::vector<Family>& fams) {
  std::string s;
  for (Family f : fams) s += (s.empty() ? "" : "+") + FamilyName(f);
  return s;
}

// ---------------------------------------------------------------------------
// LM

inline constexpr std::size_t kLmFeatureDim = 4;

inline std::vector<double> LmFeatures(const Tokens& tokens, const NGramLM& lm) {
  std::vector<double> f(kLmFeatureDim, 0.0);
  if (tokens.empty()) return f;
  const auto s = lm.ScoreSentence(tokens);
  f[3] = static_cast<double>(s.oov) / static_cast<double>(tokens.size());
  if (s.scored == 0) return f;
  f[0] = s.log10_prob;
  f[1] = s.log10_prob / static_cast<double>(s.scored);
  f[2] = std::pow(10.0, -f[1]);
  return f;
}

// ---------------------------------------------------------------------------
// LEX

inline const std::vector<std::string>& PhonemeCategories() {
  static const std::vector<std::string> cats = {"vowel", "nasal", "plosive", "fricative", "liquid", "glide", "other"};
  return cats;
}

inline constexpr std::size_t kLexFeatureDim = 8;

class Lexicon {
 public:
  using CategoryVector = std::array<double, 7>;

  // Builds from "word<TAB>phonemes" text and a {phoneme: category} map.
  // Only the first pronunciation of a word is kept.
  static Lexicon Parse(const std::string& lexicon_text, const nlohmann::json& categories) {
    if (!categories.is_object()) throw Error("phoneme-category map must be a JSON object");
    std::unordered_map<std::string, std::size_t> cat_of;
    const auto& names = PhonemeCategories();
    for (const auto& [ph, cat] : categories.items()) {
      if (!cat.is_string()) throw Error("category of phoneme \"" + ph + "\" must be a string");
      const auto it = std::find(names.begin(), names.end(), cat.get<std::string>());
      if (it == names.end()) throw Error("unknown phoneme category \"" + cat.get<std::string>() + "\"");
      cat_of[ph] = static_cast<std::size_t>(it - names.begin());
    }
    Lexicon lex;
    std::istringstream in(lexicon_text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw Error("lexicon line " + std::to_string(line_no) + ": expected word<TAB>phonemes");
      const std::string word = line.substr(0, tab);
      const Tokens phones = Tokenize(line.substr(tab + 1));
      if (word.empty() || phones.empty())
        throw Error("lexicon line " + std::to_string(line_no) + ": empty word or pronunciation");
      CategoryVector v{};
      for (const auto& ph : phones) {
        const auto it = cat_of.find(ph);
        if (it == cat_of.end())
          throw Error("phoneme \"" + ph + "\" in pronunciation of \"" + word + "\" has no category");
        v[it->second] += 1.0 / static_cast<double>(phones.size());
      }
      lex.entries_.emplace(word, v);  // keeps the first pronunciation
    }
    return lex;
  }

  static Lexicon Load(const std::filesystem::path& lexicon, const std::filesystem::path& categories) {
    nlohmann::json cats;
    try {
      cats = nlohmann::json::parse(ReadFile(categories));
    } catch (const nlohmann::json::exception& e) {
      throw Error(categories.string() + ": " + e.what());
    }
    return Parse(ReadFile(lexicon), cats);
  }

  std::size_t size() const { return entries_.size(); }

  const CategoryVector* Find(const std::string& word) const {
    const auto it = entries_.find(word);
    return it == entries_.end() ? nullptr : &it->second;
  }

 private:
  std::unordered_map<std::string, CategoryVector> entries_;
};

inline std::vector<double> LexFeatures(const Tokens& tokens, const Lexicon& lex) {
  std::vector<double> f(kLexFeatureDim, 0.0);
  if (tokens.empty()) return f;
  std::size_t known = 0;
  for (const auto& t : tokens) {
    if (const auto* v = lex.Find(t)) {
      for (std::size_t k = 0; k < 7; ++k) f[k] += (*v)[k];
      ++known;
    }
  }
  if (known > 0)
    for (std::size_t k = 0; k < 7; ++k) f[k] /= static_cast<double>(known);
  f[7] = static_cast<double>(tokens.size() - known) / static_cast<double>(tokens.size());
  return f;
}

// ---------------------------------------------------------------------------
// POS

using PosTags = std::unordered_map<std::string, Tokens>;

// "id<TAB>tag tag ..." per line.
inline PosTags ParsePosTags(const std::string& text, const std::string& source = "POS sidecar") {
  PosTags tags;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string id = line.substr(0, tab);
    if (id.empty()) throw Error(source + " line " + std::to_string(line_no) + ": missing id");
    if (!tags.emplace(id, tab == std::string::npos ? Tokens{} : Tokenize(line.substr(tab + 1))).second)
      throw Error(source + ": duplicate id \"" + id + "\"");
  }
  return tags;
}

inline PosTags LoadPosTags(const std::filesystem::path& path) { return ParsePosTags(ReadFile(path), path.string()); }

inline const Tokens& TagsFor(const PosTags& tags, const std::string& id) {
  const auto it = tags.find(id);
  if (it == tags.end()) throw Error(id + ": no POS tags");
  return it->second;
}

// Tagset and tag-bigram LM, both taken from training-side tag sequences.
class PosModel {
 public:
  static PosModel Train(const std::vector<Tokens>& sequences) {
    PosModel m;
    std::set<std::string> seen;
    for (const auto& s : sequences) seen.insert(s.begin(), s.end());
    if (seen.empty()) throw Error("cannot train a POS model without tags");
    m.tagset_.assign(seen.begin(), seen.end());
    m.lm_ = NGramLM::Train(sequences, {.order = 2, .open_vocabulary = false});
    return m;
  }

  const std::vector<std::string>& tagset() const { return tagset_; }
  std::size_t dim() const { return tagset_.size() + 1; }

  std::vector<double> Features(const Tokens& tags) const {
    std::vector<double> f(dim(), 0.0);
    if (tags.empty()) return f;
    for (const auto& t : tags) {
      const auto it = std::lower_bound(tagset_.begin(), tagset_.end(), t);
      if (it == tagset_.end() || *it != t) throw Error("unknown POS tag \"" + t + "\"");
      f[static_cast<std::size_t>(it - tagset_.begin())] += 1.0 / static_cast<double>(tags.size());
    }
    const auto s = lm_->ScoreSentence(tags);
    f.back() = s.log10_prob / static_cast<double>(s.scored);
    return f;
  }

 private:
  std::vector<std::string> tagset_;
  std::optional<NGramLM> lm_;
};

// ---------------------------------------------------------------------------
// Rows

struct FeatureRow {
  std::string id;
  std::optional<std::vector<double>> pos, lex, lm, sig;

  const std::optional<std::vector<double>>& family(Family f) const {
    switch (f) {
      case Family::kPos: return pos;
      case Family::kLex: return lex;
      case Family::kLm: return lm;
      case Family::kSig: return sig;
    }
    return pos;
  }

  // Concatenation of the requested families, in the given order.
  std::vector<double> Concat(const std::vector<Family>& fams) const {
    std::vector<double> x;
    for (Family f : fams) {
      const auto& v = family(f);
      if (!v) throw Error("row lacks " + FamilyName(f) + " features");
      x.insert(x.end(), v->begin(), v->end());
    }
    return x;
  }
};

struct ExtractorConfig {
  std::size_t lm_order = 5;
  dsp::DspConfig dsp;
};

// Fitted extraction state. The word LM is trained on the training
// references, the tag LM on the training-side tag sequences.
class FeatureExtractor {
 public:
  FeatureExtractor(std::vector<Tokens> lm_corpus, std::vector<Tokens> pos_corpus, Lexicon lexicon,
                   ExtractorConfig cfg = {})
      : lm_corpus_(std::move(lm_corpus)),
        pos_corpus_(std::move(pos_corpus)),
        lexicon_(std::move(lexicon)),
        cfg_(cfg),
        lm_(NGramLM::Train(lm_corpus_, {.order = cfg.lm_order, .open_vocabulary = true})),
        pos_(PosModel::Train(pos_corpus_)) {}

  static FeatureExtractor Fit(const corpus::Dataset& train, const PosTags& tags, Lexicon lexicon,
                              ExtractorConfig cfg = {}) {
    std::vector<Tokens> refs, seqs;
    for (const auto& u : train.utterances) {
      if (!u.has_reference()) throw Error(u.id + ": reference transcript required for training");
      refs.push_back(*u.ref);
      seqs.push_back(TagsFor(tags, u.id));
    }
    return FeatureExtractor(std::move(refs), std::move(seqs), std::move(lexicon), cfg);
  }

  const NGramLM& lm() const { return lm_; }
  const PosModel& pos() const { return pos_; }
  const Lexicon& lexicon() const { return lexicon_; }
  const ExtractorConfig& config() const { return cfg_; }
  const std::vector<Tokens>& lm_corpus() const { return lm_corpus_; }
  const std::vector<Tokens>& pos_corpus() const { return pos_corpus_; }

  std::size_t Dim(Family f) const {
    switch (f) {
      case Family::kPos: return pos_.dim();
      case Family::kLex: return kLexFeatureDim;
      case Family::kLm: return kLmFeatureDim;
      case Family::kSig: return dsp::kSigFeatureDim;
    }
    return 0;
  }

  std::vector<std::string> ColumnNames(const std::vector<Family>& fams) const {
    std::vector<std::string> names;
    for (Family f : fams) switch (f) {
        case Family::kPos:
          for (const auto& t : pos_.tagset()) names.push_back("pos_" + t);
          names.emplace_back("pos_bigram_logprob");
          break;
        case Family::kLex:
          for (const auto& c : PhonemeCategories()) names.push_back("lex_" + c);
          names.emplace_back("lex_oov_rate");
          break;
        case Family::kLm:
          for (const char* s : {"lm_logprob", "lm_mean_logprob", "lm_perplexity", "lm_oov_rate"}) names.emplace_back(s);
          break;
        case Family::kSig:
          for (const auto& s : dsp::SigFeatureNames()) names.push_back(s);
          break;
      }
    return names;
  }

  // `tags` may be null when POS is not requested.
  FeatureRow Extract(const corpus::Utterance& u, const std::vector<Family>& fams, const PosTags* tags,
                     const std::optional<dsp::FeatureCache>& cache = std::nullopt) const {
    FeatureRow row{u.id, {}, {}, {}, {}};
    for (Family f : fams) switch (f) {
        case Family::kPos:
          if (!tags) throw Error("POS features need a tag sidecar");
          row.pos = pos_.Features(TagsFor(*tags, u.id));
          break;
        case Family::kLex:
          row.lex = LexFeatures(u.hyp, lexicon_);
          break;
        case Family::kLm:
          row.lm = LmFeatures(u.hyp, lm_);
          break;
        case Family::kSig:
          row.sig = SigRow(u, cache);
          break;
      }
    return row;
  }

 private:
  // Rounded to float so cached and fresh values agree.
  std::vector<double> SigRow(const corpus::Utterance& u, const std::optional<dsp::FeatureCache>& cache) const {
    if (!u.audio_path) throw Error(u.id + ": audio required");
    if (cache)
      if (auto hit = cache->Load(u.id, "sig")) return {hit->values().begin(), hit->values().end()};
    const auto v = dsp::SigFeatures(dsp::LoadAndStandardize(*u.audio_path, cfg_.dsp), cfg_.dsp);
    const FeatureTensor t = Tensor<double>(1, v.size(), v).Cast<float>();
    if (cache) cache->Store(u.id, "sig", t);
    return {t.values().begin(), t.values().end()};
  }

  std::vector<Tokens> lm_corpus_, pos_corpus_;
  Lexicon lexicon_;
  ExtractorConfig cfg_;
  NGramLM lm_;
  PosModel pos_;
};

// CSV with a header naming every dimension.
inline std::string FeatureCsv(const std::vector<FeatureRow>& rows, const std::vector<Family>& fams,
                              const FeatureExtractor& ex) {
  std::string out = "id";
  for (const auto& n : ex.ColumnNames(fams)) out += "," + n;
  out += '\n';
  char num[32];
  for (const auto& r : rows) {
    out += r.id;
    for (double v : r.Concat(fams)) {
      std::snprintf(num, sizeof(num), ",%.9g", v);
      out += num;
    }
    out += '\n';
  }
  return out;
}

}  // namespace werpred::baseline

#endif  // WERPRED_BASELINE_FEATURES_HPP_
