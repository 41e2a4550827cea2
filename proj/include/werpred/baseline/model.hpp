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

// Baseline model directory:
//
//   regressor.json   kind, feature families, fitted parameters, LM order
//   lm_corpus.txt    word LM training text, one sentence per line
//   pos_corpus.txt   tag LM training sequences, one per line
//   lexicon.tsv      copy of the lexicon
//   phonemes.json    copy of the phoneme-category map
//
// Extraction state is rebuilt from these files on load, which reproduces
// it exactly.

#ifndef WERPRED_BASELINE_MODEL_HPP_
#define WERPRED_BASELINE_MODEL_HPP_

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "werpred/baseline/features.hpp"
#include "werpred/baseline/regressors.hpp"
#include "werpred/common.hpp"

namespace werpred::baseline {

struct BaselineModel {
  FeatureExtractor extractor;
  Regressor regressor;
};

namespace detail {

inline std::string LinesOf(const std::vector<Tokens>& corpus) {
  std::string s;
  for (const auto& t : corpus) s += Join(t) + "\n";
  return s;
}

inline std::vector<Tokens> ReadLines(const std::filesystem::path& path) {
  std::vector<Tokens> out;
  std::istringstream in(ReadFile(path));
  for (std::string line; std::getline(in, line);) out.push_back(Tokenize(line));
  return out;
}

}  // namespace detail

inline void SaveBaseline(const std::filesystem::path& dir, const FeatureExtractor& ex, const Regressor& reg,
                         const std::filesystem::path& lexicon, const std::filesystem::path& categories) {
  std::filesystem::create_directories(dir);
  nlohmann::json j = reg.ToJson();
  j["lm_order"] = ex.config().lm_order;
  WriteFile(dir / "regressor.json", j.dump() + "\n");
  WriteFile(dir / "lm_corpus.txt", detail::LinesOf(ex.lm_corpus()));
  WriteFile(dir / "pos_corpus.txt", detail::LinesOf(ex.pos_corpus()));
  WriteFile(dir / "lexicon.tsv", ReadFile(lexicon));
  WriteFile(dir / "phonemes.json", ReadFile(categories));
}

inline BaselineModel LoadBaseline(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFile(dir / "regressor.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error((dir / "regressor.json").string() + ": " + e.what());
  }
  ExtractorConfig cfg;
  cfg.lm_order = j.value("lm_order", cfg.lm_order);
  return {FeatureExtractor(detail::ReadLines(dir / "lm_corpus.txt"), detail::ReadLines(dir / "pos_corpus.txt"),
                           Lexicon::Load(dir / "lexicon.tsv", dir / "phonemes.json"), cfg),
          Regressor::FromJson(j)};
}

}  // namespace werpred::baseline

#endif  // WERPRED_BASELINE_MODEL_HPP_
