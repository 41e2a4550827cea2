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

// Interpolated Witten-Bell n-gram language model.
//
//   P(w | h) = (c(h w) + T(h) P(w | h')) / (c(h) + T(h))
//
// where T(h) is the number of distinct words seen after h and h' drops the
// oldest word of h. The recursion ends in the uniform distribution over the
// vocabulary. Unseen histories defer to h'.

#ifndef WERPRED_BASELINE_NGRAM_HPP_
#define WERPRED_BASELINE_NGRAM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "werpred/common.hpp"

namespace werpred::baseline {

inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";
inline constexpr const char* kUnk = "<unk>";

class NGramLM {
 public:
  using WordId = std::uint32_t;

  struct Options {
    std::size_t order = 5;
    // Open vocabulary adds <unk>, which receives every out-of-vocabulary
    // token. Closed vocabulary leaves such tokens unscored.
    bool open_vocabulary = true;
  };

  struct Score {
    double log10_prob = 0.0;  // over scored words, end of sentence excluded
    std::size_t scored = 0;
    std::size_t oov = 0;
  };

  static NGramLM Train(const std::vector<Tokens>& corpus, Options opt) {
    if (opt.order < 1) throw Error("n-gram order must be at least 1");
    std::size_t n_tokens = 0;
    for (const auto& s : corpus) n_tokens += s.size();
    if (corpus.empty() || n_tokens == 0) throw Error("cannot train a language model on an empty corpus");
    NGramLM lm;
    lm.opt_ = opt;
    lm.Intern(kBos);
    lm.Intern(kEos);
    if (opt.open_vocabulary) lm.Intern(kUnk);
    std::map<std::string, int> seen;
    for (const auto& s : corpus)
      for (const auto& w : s) seen[w];
    for (const auto& [w, _] : seen) lm.Intern(w);

    for (const auto& s : corpus) {
      const auto ids = lm.Encode(s);
      for (std::size_t i = 1; i < ids.size(); ++i) {
        // Every history length up to order-1 that fits, <s> included.
        for (std::size_t len = 0; len < opt.order && len <= i; ++len) {
          const std::vector<WordId> h(ids.begin() + static_cast<long>(i - len), ids.begin() + static_cast<long>(i));
          auto& node = lm.contexts_[h];
          if (node.next[ids[i]]++ == 0) ++node.types;
          ++node.total;
        }
      }
    }
    return lm;
  }

  const Options& options() const { return opt_; }
  // Predictable symbols: every word, </s> and (open vocabulary) <unk>.
  std::size_t vocabulary_size() const { return words_.size() - 1; }
  bool Contains(const std::string& w) const { return ids_.count(w) > 0 && w != kBos; }
  const std::vector<std::string>& words() const { return words_; }

  // Conditional probability of `w` after `history` (oldest first).
  double Prob(const std::string& w, const Tokens& history) const {
    std::vector<WordId> h;
    for (const auto& x : history) h.push_back(Lookup(x));
    return Prob(Lookup(w), h);
  }

  double Prob(WordId w, std::vector<WordId> h) const {
    if (h.size() > opt_.order - 1) h.erase(h.begin(), h.end() - static_cast<long>(opt_.order - 1));
    return ProbRec(w, h, 0);
  }

  // Log10 probability of a sentence's words, each given up to order-1
  // previous words (starting from <s>).
  Score ScoreSentence(const Tokens& tokens) const {
    Score s;
    std::vector<WordId> h = {Id(kBos)};
    for (const auto& tok : tokens) {
      const auto it = ids_.find(tok);
      const bool oov = it == ids_.end() || tok == kBos;
      if (oov) ++s.oov;
      if (oov && !opt_.open_vocabulary) {
        h = {Id(kBos)};  // no evidence across an unscored gap
        continue;
      }
      const WordId w = oov ? Id(kUnk) : it->second;
      s.log10_prob += std::log10(Prob(w, h));
      ++s.scored;
      h.push_back(w);
      if (h.size() > opt_.order - 1) h.erase(h.begin());
    }
    return s;
  }

  // Perplexity over words and sentence ends of a corpus.
  double Perplexity(const std::vector<Tokens>& corpus) const {
    double lp = 0.0;
    std::size_t n = 0;
    for (const auto& s : corpus) {
      std::vector<WordId> h = {Id(kBos)};
      Tokens ext = s;
      ext.push_back(kEos);
      for (const auto& tok : ext) {
        const auto it = ids_.find(tok);
        if (it == ids_.end() && !opt_.open_vocabulary) continue;
        const WordId w = it == ids_.end() ? Id(kUnk) : it->second;
        lp += std::log10(Prob(w, h));
        ++n;
        h.push_back(w);
        if (h.size() > opt_.order - 1) h.erase(h.begin());
      }
    }
    if (n == 0) throw Error("perplexity of an empty corpus");
    return std::pow(10.0, -lp / static_cast<double>(n));
  }

  WordId Id(const std::string& w) const { return ids_.at(w); }

 private:
  struct Node {
    std::uint64_t total = 0;
    std::uint64_t types = 0;
    std::unordered_map<WordId, std::uint64_t> next;
  };

  WordId Intern(const std::string& w) {
    const auto [it, added] = ids_.emplace(w, static_cast<WordId>(words_.size()));
    if (added) words_.push_back(w);
    return it->second;
  }

  WordId Lookup(const std::string& w) const {
    const auto it = ids_.find(w);
    if (it != ids_.end()) return it->second;
    if (!opt_.open_vocabulary) throw Error("word \"" + w + "\" is not in the closed vocabulary");
    return Id(kUnk);
  }

  std::vector<WordId> Encode(const Tokens& s) const {
    std::vector<WordId> ids = {Id(kBos)};
    for (const auto& w : s) ids.push_back(Id(w));
    ids.push_back(Id(kEos));
    return ids;
  }

  // Probability with history h[from:].
  double ProbRec(WordId w, const std::vector<WordId>& h, std::size_t from) const {
    const double lower = from == h.size() ? 1.0 / static_cast<double>(vocabulary_size())
                                          : ProbRec(w, h, from + 1);
    const std::vector<WordId> key(h.begin() + static_cast<long>(from), h.end());
    const auto it = contexts_.find(key);
    if (it == contexts_.end()) return lower;
    const Node& n = it->second;
    const auto c = n.next.find(w);
    const double cw = c == n.next.end() ? 0.0 : static_cast<double>(c->second);
    return (cw + static_cast<double>(n.types) * lower) / static_cast<double>(n.total + n.types);
  }

  Options opt_;
  std::unordered_map<std::string, WordId> ids_;
  std::vector<std::string> words_;
  std::map<std::vector<WordId>, Node> contexts_;
};

}  // namespace werpred::baseline

#endif  // WERPRED_BASELINE_NGRAM_HPP_
