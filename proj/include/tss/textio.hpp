#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tss/error.hpp"

namespace tss {

/// A corpus document. `sentences` holds vocabulary indices and is filled by
/// index_document() once a vocabulary exists.
struct Document {
  std::string id;
  std::string text;
  std::optional<std::string> label;
  std::vector<std::vector<int>> sentences;
};

struct Vocabulary {
  std::vector<std::string> words;        // position -> word
  std::vector<long> df;                  // position -> document frequency
  std::unordered_map<std::string, int> index;  // word -> position

  std::size_t size() const { return words.size(); }

  bool contains(const std::string& w) const { return index.count(w) != 0; }

  int position(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? -1 : it->second;
  }

  void rebuild_index() {
    index.clear();
    for (std::size_t i = 0; i < words.size(); ++i)
      index.emplace(words[i], static_cast<int>(i));
  }
};

using Stemmer = std::function<std::string(const std::string&)>;

/// Named stemmer registry. "identity" is the default; "strip-plural-s" drops
/// a trailing 's' from words of length >= 4 not ending in "ss".
inline std::map<std::string, Stemmer>& stemmer_registry() {
  static std::map<std::string, Stemmer> reg = {
      {"identity", [](const std::string& w) { return w; }},
      {"strip-plural-s",
       [](const std::string& w) {
         if (w.size() >= 4 && w.back() == 's' && w[w.size() - 2] != 's')
           return w.substr(0, w.size() - 1);
         return w;
       }},
  };
  return reg;
}

inline void register_stemmer(const std::string& name, Stemmer fn) {
  stemmer_registry()[name] = std::move(fn);
}

inline const Stemmer& stemmer_by_name(const std::string& name) {
  auto& reg = stemmer_registry();
  auto it = reg.find(name);
  if (it == reg.end()) throw Error("unknown stemmer: " + name);
  return it->second;
}

struct TokenizerConfig {
  bool lowercase = true;
  std::unordered_set<std::string> stopwords;
  std::size_t max_vocab = 20000;  // DF-ranked cutoff, must be >= 1
  std::string stemmer = "identity";
};

namespace detail {

inline bool terminal_punct(char c) { return c == '.' || c == '!' || c == '?'; }

/// Strips leading/trailing non-alphanumeric ASCII from a token.
inline std::string trim_token(const std::string& t) {
  std::size_t b = 0, e = t.size();
  auto alnum = [](unsigned char c) { return std::isalnum(c) != 0; };
  while (b < e && !alnum(static_cast<unsigned char>(t[b]))) ++b;
  while (e > b && !alnum(static_cast<unsigned char>(t[e - 1]))) --e;
  return t.substr(b, e - b);
}

inline std::string to_lower(std::string s) {
  for (char& c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Splits text into sentences on terminal punctuation (. ! ?), whitespace-
/// tokenizes each, then applies lowercase -> stopword -> stemmer in that
/// order. Sentences left empty after filtering are dropped.
inline std::vector<std::vector<std::string>> tokenize(
    const std::string& text, const TokenizerConfig& config) {
  const Stemmer& stem = stemmer_by_name(config.stemmer);
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::string> current;
  std::string token;

  auto flush_token = [&] {
    if (token.empty()) return;
    std::string t = detail::trim_token(token);
    token.clear();
    if (t.empty()) return;
    if (config.lowercase) t = detail::to_lower(t);
    if (config.stopwords.count(t)) return;
    t = stem(t);
    if (!t.empty()) current.push_back(std::move(t));
  };
  auto flush_sentence = [&] {
    flush_token();
    if (!current.empty()) sentences.push_back(std::move(current));
    current.clear();
  };

  for (char c : text) {
    if (detail::terminal_punct(c)) {
      flush_sentence();
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      flush_token();
    } else {
      token.push_back(c);
    }
  }
  flush_sentence();
  return sentences;
}

/// Ranks words by document frequency (descending, ties broken by word
/// ascending) and keeps the top config.max_vocab.
inline Vocabulary build_vocabulary(const std::vector<Document>& corpus,
                                   const TokenizerConfig& config) {
  if (config.max_vocab < 1) throw Error("max_vocab must be >= 1");
  std::map<std::string, long> df;  // ordered: gives the lexical tie-break
  for (const Document& doc : corpus) {
    std::unordered_set<std::string> seen;
    for (const auto& sent : tokenize(doc.text, config))
      for (const auto& tok : sent) seen.insert(tok);
    for (const auto& tok : seen) ++df[tok];
  }
  if (df.empty())
    throw EmptyVocabulary("no token survived tokenization and filtering");

  std::vector<std::pair<std::string, long>> ranked(df.begin(), df.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  if (ranked.size() > config.max_vocab) ranked.resize(config.max_vocab);

  Vocabulary vocab;
  vocab.words.reserve(ranked.size());
  vocab.df.reserve(ranked.size());
  for (auto& [word, count] : ranked) {
    vocab.words.push_back(word);
    vocab.df.push_back(count);
  }
  vocab.rebuild_index();
  return vocab;
}

/// Tokenizes doc.text and fills doc.sentences with vocabulary indices.
/// Out-of-vocabulary tokens are dropped; a sentence may end up empty.
inline void index_document(Document& doc, const Vocabulary& vocab,
                           const TokenizerConfig& config) {
  doc.sentences.clear();
  for (const auto& sent : tokenize(doc.text, config)) {
    std::vector<int> ids;
    ids.reserve(sent.size());
    for (const auto& tok : sent) {
      const int pos = vocab.position(tok);
      if (pos >= 0) ids.push_back(pos);
    }
    doc.sentences.push_back(std::move(ids));
  }
}

inline void index_corpus(std::vector<Document>& corpus,
                         const Vocabulary& vocab,
                         const TokenizerConfig& config) {
  for (Document& doc : corpus) index_document(doc, vocab, config);
}

/// Per-sentence topic embeddings keyed by (document id, sentence index).
struct TopicTable {
  std::size_t k = 0;  // embedding dimensionality
  std::unordered_map<std::string, std::map<std::size_t, std::vector<double>>>
      by_doc;

  const std::vector<double>* find(const std::string& doc_id,
                                  std::size_t sentence) const {
    auto it = by_doc.find(doc_id);
    if (it == by_doc.end()) return nullptr;
    auto jt = it->second.find(sentence);
    return jt == it->second.end() ? nullptr : &jt->second;
  }
};

}  // namespace tss
