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

#ifndef WERPRED_TEXTFEAT_HPP_
#define WERPRED_TEXTFEAT_HPP_

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "werpred/common.hpp"
#include "werpred/tensor.hpp"

namespace werpred::textfeat {

struct EmbedConfig {
  std::size_t max_len = 296;  // N
  std::size_t dim = 100;      // M
};

// Frozen word vectors. Unknown words map to the zero vector, same as padding.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& w) const { return entries_.count(w) > 0; }

  // Returns false when the word already existed (and was overwritten).
  bool Set(const std::string& word, std::vector<float> v) {
    if (v.size() != dim_) throw Error("embedding for " + word + " has wrong dimension");
    return entries_.insert_or_assign(word, std::move(v)).second;
  }

  // nullptr for out-of-vocabulary words.
  const std::vector<float>* Find(const std::string& w) const {
    auto it = entries_.find(w);
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<float>> entries_;
};

struct EmbeddingLoad {
  EmbeddingTable table;
  std::vector<std::string> warnings;
};

// word2vec text layout: "V D" header, then V lines "word v1 ... vD".
// Duplicate words: the last occurrence wins and a warning is recorded.
inline EmbeddingLoad LoadEmbeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embeddings " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": missing header");
  std::size_t vocab = 0, dim = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> vocab >> dim) || dim == 0) throw Error(path.string() + ": line 1: expected header \"V D\"");
  }
  EmbeddingLoad out{EmbeddingTable(dim), {}};
  std::size_t lineno = 1, rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const Tokens fields = Tokenize(line);
    if (fields.empty()) continue;
    if (fields.size() - 1 != dim)
      throw Error("line " + std::to_string(lineno) + ": expected " + std::to_string(dim) + " values");
    std::vector<float> v(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      try {
        std::size_t used = 0;
        v[k] = std::stof(fields[k + 1], &used);
        if (used != fields[k + 1].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw Error("line " + std::to_string(lineno) + ": bad number \"" + fields[k + 1] + "\"");
      }
    }
    if (!out.table.Set(fields[0], std::move(v)))
      out.warnings.push_back("line " + std::to_string(lineno) + ": duplicate word \"" + fields[0] +
                             "\"; last occurrence wins");
    ++rows;
  }
  if (rows != vocab)
    throw Error(path.string() + ": header declares " + std::to_string(vocab) + " words, found " +
                std::to_string(rows));
  return out;
}

struct EmbeddedUtterance {
  FeatureTensor matrix;        // (N, M)
  std::size_t truncated = 0;   // tokens dropped beyond N
  std::size_t oov = 0;
};

inline EmbeddedUtterance EmbedUtterance(const Tokens& tokens, const EmbeddingTable& table,
                                        const EmbedConfig& cfg) {
  if (table.dim() != cfg.dim)
    throw Error("embedding table dimension " + std::to_string(table.dim()) + " does not match configured " +
                std::to_string(cfg.dim));
  EmbeddedUtterance out{FeatureTensor(cfg.max_len, cfg.dim), 0, 0};
  const std::size_t used = std::min(tokens.size(), cfg.max_len);
  out.truncated = tokens.size() - used;
  for (std::size_t i = 0; i < used; ++i) {
    const auto* v = table.Find(tokens[i]);
    if (!v) {
      ++out.oov;
      continue;
    }
    std::copy(v->begin(), v->end(), out.matrix.row(i).begin());
  }
  return out;
}

}  // namespace werpred::textfeat

#endif  // WERPRED_TEXTFEAT_HPP_
