#pragma once

// Shared test fixtures: a small worked newswire example whose smoothing
// behaviour is easy to reason about by hand, plus deterministic synthetic
// corpus generators.

#include <array>
#include <random>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include "tss/textio.hpp"

namespace fixture {

inline std::string news_sentence() {
  return "New York Times offers free iPhone 3G as gifts for new customers in "
         "New York.";
}

// Twelve content words; the last five never occur in the sentence and are
// reachable only through the association graph.
inline tss::Vocabulary news_vocabulary() {
  tss::Vocabulary v;
  v.words = {"new",      "york", "time", "free",    "iphone", "gift",
             "customer", "apple", "egg",  "city",   "service", "coupon"};
  v.df = {3, 2, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  v.rebuild_index();
  return v;
}

inline std::unordered_set<std::string> news_stopwords() {
  return {"as", "for", "in"};
}

inline tss::TokenizerConfig news_tokenizer() {
  tss::TokenizerConfig cfg;
  cfg.stopwords = news_stopwords();
  cfg.stemmer = "strip-plural-s";
  return cfg;
}

// Association edges over the twelve words, one connected component.
inline std::vector<std::tuple<std::string, std::string, double>>
news_graph_edges() {
  return {
      {"new", "york", 3.0},      {"york", "time", 2.0},
      {"new", "egg", 1.5},       {"iphone", "egg", 1.5},
      {"iphone", "apple", 2.5},  {"free", "gift", 1.8},
      {"free", "coupon", 1.6},   {"gift", "coupon", 1.7},
      {"customer", "service", 2.2}, {"york", "city", 1.9},
      {"customer", "coupon", 1.2},  {"iphone", "free", 1.4},
  };
}

// In-vocabulary positions of the sentence under news_tokenizer():
// new york time free iphone gift new customer new york.
inline std::vector<int> news_position_words() {
  return {0, 1, 2, 3, 4, 5, 0, 6, 0, 1};
}

inline std::mt19937 make_rng(unsigned seed) { return std::mt19937(seed); }

inline std::vector<double> random_signal(std::size_t n, std::mt19937& rng,
                                         double lo = 0.1, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> out(n);
  for (double& v : out) v = u(rng);
  return out;
}

inline std::vector<double> random_signed_signal(std::size_t n,
                                                std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = u(rng);
  return out;
}

// Two-class corpus where the classes share unigram statistics and differ
// only in local word order: class 0 emits the collocations "aa bb" and
// "cc dd ee ff", class 1 emits them reversed. Bag-of-words features cannot
// separate the classes; fine spatial scales can.
inline std::vector<tss::Document> ordered_pair_corpus(std::size_t per_class,
                                                      std::size_t n_chunks,
                                                      unsigned seed) {
  static const std::array<const char*, 6> w = {"aa", "bb", "cc",
                                               "dd", "ee", "ff"};
  static const std::array<const char*, 4> filler = {"gg", "hh", "ii", "jj"};
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> pick_chunk(0, 1);
  std::uniform_int_distribution<int> pick_filler(0, 3);
  std::vector<tss::Document> docs;
  for (int label = 0; label < 2; ++label) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::string text;
      for (std::size_t c = 0; c < n_chunks; ++c) {
        std::vector<std::string> chunk;
        if (pick_chunk(rng) == 0) {
          chunk = {w[0], w[1]};
        } else {
          chunk = {w[2], w[3], w[4], w[5]};
        }
        if (label == 1) std::reverse(chunk.begin(), chunk.end());
        for (const auto& t : chunk) {
          text += t;
          text += ' ';
        }
        text += filler[(std::size_t)pick_filler(rng)];
        text += ' ';
      }
      text += '.';
      tss::Document d;
      d.id = (label == 0 ? "a" : "b") + std::to_string(i);
      d.text = text;
      d.label = label == 0 ? "alpha" : "beta";
      docs.push_back(std::move(d));
    }
  }
  return docs;
}

// Documents built from per-sentence topic blocks: each block draws all its
// sentences from one vocabulary pool, so block boundaries are the natural
// segmentation answer.
inline tss::Document block_document(const std::vector<std::size_t>& block_sizes,
                                    unsigned seed) {
  static const std::array<std::array<const char*, 4>, 4> pools = {{
      {"engine", "wheel", "brake", "road"},
      {"flour", "oven", "sugar", "dough"},
      {"server", "packet", "router", "socket"},
      {"violin", "tempo", "chord", "melody"},
  }};
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> pick(0, 3);
  std::string text;
  for (std::size_t b = 0; b < block_sizes.size(); ++b) {
    const auto& pool = pools[b % pools.size()];
    for (std::size_t s = 0; s < block_sizes[b]; ++s) {
      for (int t = 0; t < 6; ++t) {
        text += pool[(std::size_t)pick(rng)];
        text += ' ';
      }
      text += ". ";
    }
  }
  tss::Document d;
  d.id = "blocks";
  d.text = text;
  return d;
}

}  // namespace fixture
