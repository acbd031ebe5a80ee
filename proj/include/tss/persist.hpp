#pragma once

// On-disk formats for every artifact the pipelines exchange: corpora,
// vocabularies, semantic graphs, signal matrices, topic-embedding tables,
// relevance judgments, run files, scale distributions, interval/keyword/
// segment trees, kernel matrices, and plot data. All writers go through a
// temp-file-plus-rename so a crash never leaves a truncated artifact, and
// all readers raise FormatError carrying the offending path and line.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "tss/error.hpp"
#include "tss/invariance.hpp"
#include "tss/matrix.hpp"
#include "tss/scalespace.hpp"
#include "tss/semgraph.hpp"
#include "tss/signal.hpp"
#include "tss/tasks.hpp"
#include "tss/textio.hpp"

namespace tss {

namespace detail {

/// Writes to `<path>.tmp` and renames into place on commit(); the temp file
/// is removed if the writer dies before committing.
class AtomicFile {
 public:
  explicit AtomicFile(const std::string& path)
      : path_(path), tmp_(path + ".tmp") {
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw FormatError(path_, 0, "cannot open for writing");
  }

  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) throw FormatError(path_, 0, "write failed");
    out_.close();
    if (std::rename(tmp_.c_str(), path_.c_str()) != 0)
      throw FormatError(path_, 0, "could not move temp file into place");
    committed_ = true;
  }

  ~AtomicFile() {
    if (!committed_) {
      if (out_.is_open()) out_.close();
      std::remove(tmp_.c_str());
    }
  }

 private:
  std::string path_;
  std::string tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

/// Shortest decimal form that parses back to the identical double.
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& path,
                           std::size_t line) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw FormatError(path, line,
                      "expected a real number, got '" + std::string(text) +
                          "'");
  return v;
}

inline long long parse_int(std::string_view text, const std::string& path,
                           std::size_t line) {
  long long v = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw FormatError(path, line,
                      "expected an integer, got '" + std::string(text) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

/// Splits on any run of spaces/tabs (the TREC qrels/run convention).
inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

/// Reads all lines, stripping one trailing CR if present.
class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw FormatError(path_, 0, "cannot open for reading");
  }

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++lineno_;
    return true;
  }

  std::size_t lineno() const { return lineno_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path_, lineno_, what);
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t lineno_ = 0;
};

}  // namespace detail

// --------------------------------------------------------------------------
// Corpus: JSON-lines, one object per line with keys id, text, optional label.
// --------------------------------------------------------------------------

inline void save_corpus(const std::vector<Document>& corpus,
                        const std::string& path) {
  detail::AtomicFile out(path);
  for (const auto& doc : corpus) {
    nlohmann::json row;
    row["id"] = doc.id;
    row["text"] = doc.text;
    if (doc.label) row["label"] = *doc.label;
    out.stream() << row.dump() << '\n';
  }
  out.commit();
}

inline std::vector<Document> load_corpus(const std::string& path) {
  detail::LineReader in(path);
  std::vector<Document> corpus;
  std::string line;
  while (in.next(line)) {
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded()) in.fail("invalid JSON object");
    if (!row.is_object() || !row.contains("id") || !row.contains("text"))
      in.fail("corpus rows need 'id' and 'text' keys");
    Document doc;
    if (!row["id"].is_string() || !row["text"].is_string())
      in.fail("'id' and 'text' must be strings");
    doc.id = row["id"].get<std::string>();
    doc.text = row["text"].get<std::string>();
    if (row.contains("label")) {
      if (!row["label"].is_string()) in.fail("'label' must be a string");
      doc.label = row["label"].get<std::string>();
    }
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

// --------------------------------------------------------------------------
// Vocabulary: TSV rows `index<TAB>word<TAB>df`, index ascending from 0.
// --------------------------------------------------------------------------

inline void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  detail::AtomicFile out(path);
  for (std::size_t i = 0; i < vocab.words.size(); ++i)
    out.stream() << i << '\t' << vocab.words[i] << '\t' << vocab.df[i]
                 << '\n';
  out.commit();
}

inline Vocabulary load_vocabulary(const std::string& path) {
  detail::LineReader in(path);
  Vocabulary vocab;
  std::string line;
  while (in.next(line)) {
    if (line.empty()) continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 3) in.fail("expected `index\\tword\\tdf`");
    const long long idx = detail::parse_int(cols[0], in.path(), in.lineno());
    if (idx != static_cast<long long>(vocab.words.size()))
      in.fail("indices must ascend from 0 without gaps");
    if (cols[1].empty()) in.fail("empty word");
    const long long df = detail::parse_int(cols[2], in.path(), in.lineno());
    if (df < 0) in.fail("negative document frequency");
    vocab.words.emplace_back(cols[1]);
    vocab.df.push_back(static_cast<long>(df));
  }
  vocab.rebuild_index();
  return vocab;
}

// --------------------------------------------------------------------------
// Semantic graph: TSV rows `word_a<TAB>word_b<TAB>weight` (each undirected
// pair listed once, weight positive) plus node-weight rows `word<TAB>*<TAB>
// weight`. Words are resolved against a vocabulary on both ends.
// --------------------------------------------------------------------------

inline void save_graph(const SemanticGraph& graph, const Vocabulary& vocab,
                       const std::string& path) {
  if (graph.size != vocab.size())
    throw DimensionMismatch("graph has " + std::to_string(graph.size) +
                            " nodes but the vocabulary has " +
                            std::to_string(vocab.size()) + " words");
  detail::AtomicFile out(path);
  for (std::size_t i = 0; i < graph.node_weights.size(); ++i)
    if (graph.node_weights[i] != 1.0)
      out.stream() << vocab.words[i] << "\t*\t"
                   << detail::fmt_double(graph.node_weights[i]) << '\n';
  for (const auto& [key, weight] : graph.edges)
    out.stream() << vocab.words[key.first] << '\t' << vocab.words[key.second]
                 << '\t' << detail::fmt_double(weight) << '\n';
  out.commit();
}

inline SemanticGraph load_graph(const std::string& path,
                                const Vocabulary& vocab) {
  detail::LineReader in(path);
  SemanticGraph graph(vocab.size());
  std::string line;
  while (in.next(line)) {
    if (line.empty()) continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 3) in.fail("expected `word_a\\tword_b\\tweight`");
    const int a = vocab.position(std::string(cols[0]));
    if (a < 0) in.fail("unknown word '" + std::string(cols[0]) + "'");
    const double w = detail::parse_double(cols[2], in.path(), in.lineno());
    if (!(w > 0.0)) in.fail("weights must be positive");
    if (cols[1] == "*") {
      graph.node_weights[static_cast<std::size_t>(a)] = w;
      continue;
    }
    const int b = vocab.position(std::string(cols[1]));
    if (b < 0) in.fail("unknown word '" + std::string(cols[1]) + "'");
    if (a == b) in.fail("self-edges are not allowed");
    graph.add_edge(static_cast<std::size_t>(a), static_cast<std::size_t>(b),
                   w);
  }
  return graph;
}

// --------------------------------------------------------------------------
// Signal matrix: header `TSS1 rows cols`, then rows of tab-separated reals.
// Signals additionally carry kind/normalized on a comment line so they
// round-trip; bare matrices load as generic unnormalized signals.
// --------------------------------------------------------------------------

inline void save_matrix(const Matrix& m, const std::string& path) {
  detail::AtomicFile out(path);
  out.stream() << "TSS1 " << m.rows << ' ' << m.cols << '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c) out.stream() << '\t';
      out.stream() << detail::fmt_double(m.at(r, c));
    }
    out.stream() << '\n';
  }
  out.commit();
}

namespace detail {

inline const char* signal_kind_name(SignalKind kind) {
  switch (kind) {
    case SignalKind::Word2D: return "word2d";
    case SignalKind::Sentence2D: return "sentence2d";
    case SignalKind::Generic: break;
  }
  return "generic";
}

inline std::optional<SignalKind> signal_kind_from(std::string_view name) {
  if (name == "word2d") return SignalKind::Word2D;
  if (name == "sentence2d") return SignalKind::Sentence2D;
  if (name == "generic") return SignalKind::Generic;
  return std::nullopt;
}

inline Matrix load_matrix_body(LineReader& in, std::string* meta) {
  std::string line;
  if (!in.next(line)) in.fail("missing `TSS1 rows cols` header");
  const auto head = split_ws(line);
  if (head.size() != 3 || head[0] != "TSS1")
    in.fail("expected header `TSS1 rows cols`");
  const long long rows = parse_int(head[1], in.path(), in.lineno());
  const long long cols = parse_int(head[2], in.path(), in.lineno());
  if (rows < 0 || cols < 0) in.fail("negative dimensions");
  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  std::size_t r = 0;
  while (r < m.rows) {
    if (!in.next(line)) in.fail("unexpected end of file inside matrix body");
    if (!line.empty() && line[0] == '#') {
      if (meta && meta->empty()) *meta = line;
      continue;
    }
    const auto vals = split(line, '\t');
    if (vals.size() != m.cols)
      in.fail("expected " + std::to_string(m.cols) + " values, got " +
              std::to_string(vals.size()));
    for (std::size_t c = 0; c < m.cols; ++c)
      m.at(r, c) = parse_double(vals[c], in.path(), in.lineno());
    ++r;
  }
  return m;
}

}  // namespace detail

inline Matrix load_matrix(const std::string& path) {
  detail::LineReader in(path);
  return detail::load_matrix_body(in, nullptr);
}

inline void save_signal(const Signal2D& sig, const std::string& path) {
  detail::AtomicFile out(path);
  out.stream() << "TSS1 " << sig.values.rows << ' ' << sig.values.cols
               << '\n';
  out.stream() << "# kind=" << detail::signal_kind_name(sig.kind)
               << " normalized=" << (sig.normalized ? 1 : 0) << '\n';
  for (std::size_t r = 0; r < sig.values.rows; ++r) {
    for (std::size_t c = 0; c < sig.values.cols; ++c) {
      if (c) out.stream() << '\t';
      out.stream() << detail::fmt_double(sig.values.at(r, c));
    }
    out.stream() << '\n';
  }
  out.commit();
}

inline Signal2D load_signal(const std::string& path) {
  detail::LineReader in(path);
  std::string meta;
  Signal2D sig;
  sig.values = detail::load_matrix_body(in, &meta);
  if (!meta.empty()) {
    const std::string body = meta.substr(1);
    for (const auto field : detail::split_ws(body)) {
      const auto eq = field.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = field.substr(0, eq);
      const auto val = field.substr(eq + 1);
      if (key == "kind") {
        const auto kind = detail::signal_kind_from(val);
        if (!kind)
          throw FormatError(path, in.lineno(),
                            "unknown signal kind '" + std::string(val) + "'");
        sig.kind = *kind;
      } else if (key == "normalized") {
        sig.normalized = val == "1";
      }
    }
  }
  return sig;
}

// --------------------------------------------------------------------------
// Topic embeddings: TSV rows `doc_id<TAB>sentence_index<TAB>v1,v2,…,vk`.
// --------------------------------------------------------------------------

inline void save_topic_table(const TopicTable& table,
                             const std::string& path) {
  detail::AtomicFile out(path);
  std::map<std::string, const std::map<std::size_t, std::vector<double>>*>
      ordered;
  for (const auto& [doc_id, rows] : table.by_doc) ordered[doc_id] = &rows;
  for (const auto& [doc_id, rows] : ordered)
    for (const auto& [sentence, vec] : *rows) {
      out.stream() << doc_id << '\t' << sentence << '\t';
      for (std::size_t i = 0; i < vec.size(); ++i) {
        if (i) out.stream() << ',';
        out.stream() << detail::fmt_double(vec[i]);
      }
      out.stream() << '\n';
    }
  out.commit();
}

inline TopicTable load_topic_table(const std::string& path) {
  detail::LineReader in(path);
  TopicTable table;
  std::string line;
  while (in.next(line)) {
    if (line.empty()) continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 3)
      in.fail("expected `doc_id\\tsentence_index\\tv1,v2,…`");
    const long long sentence =
        detail::parse_int(cols[1], in.path(), in.lineno());
    if (sentence < 0) in.fail("negative sentence index");
    std::vector<double> vec;
    for (const auto item : detail::split(cols[2], ','))
      vec.push_back(detail::parse_double(item, in.path(), in.lineno()));
    if (table.k == 0)
      table.k = vec.size();
    else if (vec.size() != table.k)
      in.fail("embedding length " + std::to_string(vec.size()) +
              " differs from earlier rows of length " +
              std::to_string(table.k));
    auto& slot =
        table.by_doc[std::string(cols[0])][static_cast<std::size_t>(sentence)];
    if (!slot.empty()) in.fail("duplicate (doc, sentence) row");
    slot = std::move(vec);
  }
  return table;
}

// --------------------------------------------------------------------------
// Relevance judgments: TREC qrels `query_id 0 doc_id relevance`.
// --------------------------------------------------------------------------

inline void save_qrels(const Qrels& qrels, const std::string& path) {
  detail::AtomicFile out(path);
  for (const auto& [query_id, docs] : qrels)
    for (const auto& [doc_id, relevance] : docs)
      out.stream() << query_id << " 0 " << doc_id << ' ' << relevance
                   << '\n';
  out.commit();
}

inline Qrels load_qrels(const std::string& path) {
  detail::LineReader in(path);
  Qrels qrels;
  std::string line;
  while (in.next(line)) {
    if (line.empty()) continue;
    const auto cols = detail::split_ws(line);
    if (cols.size() != 4)
      in.fail("expected `query_id 0 doc_id relevance`");
    const long long rel = detail::parse_int(cols[3], in.path(), in.lineno());
    qrels[std::string(cols[0])][std::string(cols[2])] =
        static_cast<int>(rel);
  }
  return qrels;
}

// --------------------------------------------------------------------------
// Run files: TREC run format `query_id Q0 doc_id rank score tag`.
// --------------------------------------------------------------------------

struct RunRow {
  std::string query_id;
  std::string doc_id;
  std::size_t rank = 0;  // 1-based within its query
  double score = 0.0;
  std::string tag = "tss";
};

inline void save_run(const std::vector<RunRow>& rows,
                     const std::string& path) {
  detail::AtomicFile out(path);
  for (const auto& row : rows)
    out.stream() << row.query_id << " Q0 " << row.doc_id << ' ' << row.rank
                 << ' ' << detail::fmt_double(row.score) << ' ' << row.tag
                 << '\n';
  out.commit();
}

inline std::vector<RunRow> load_run(const std::string& path) {
  detail::LineReader in(path);
  std::vector<RunRow> rows;
  std::string line;
  while (in.next(line)) {
    if (line.empty()) continue;
    const auto cols = detail::split_ws(line);
    if (cols.size() != 6)
      in.fail("expected `query_id Q0 doc_id rank score tag`");
    if (cols[1] != "Q0") in.fail("second column must be Q0");
    RunRow row;
    row.query_id = std::string(cols[0]);
    row.doc_id = std::string(cols[2]);
    const long long rank = detail::parse_int(cols[3], in.path(), in.lineno());
    if (rank < 1) in.fail("ranks are 1-based");
    row.rank = static_cast<std::size_t>(rank);
    row.score = detail::parse_double(cols[4], in.path(), in.lineno());
    row.tag = std::string(cols[5]);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Groups run rows into per-query rankings ordered by rank ascending,
/// queries in first-appearance order.
inline std::vector<RankedList> run_to_ranked(const std::vector<RunRow>& rows) {
  std::vector<RankedList> out;
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<std::pair<std::size_t, std::string>>> buckets;
  for (const auto& row : rows) {
    auto [it, fresh] = slot.emplace(row.query_id, out.size());
    if (fresh) {
      out.push_back({row.query_id, {}});
      buckets.emplace_back();
    }
    buckets[it->second].emplace_back(row.rank, row.doc_id);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::stable_sort(buckets[i].begin(), buckets[i].end(),
                     [](const auto& a, const auto& b) {
                       return a.first < b.first;
                     });
    for (auto& [rank, doc] : buckets[i]) out[i].docs.push_back(std::move(doc));
  }
  return out;
}

// --------------------------------------------------------------------------
// Scale distribution: TSV rows `scale<TAB>weight`, one per ladder level
// (a leading 0-scale row marks a ladder that includes the unsmoothed
// level). A comment line carries the weight-normalization regime and the
// ladder ratio.
// --------------------------------------------------------------------------

inline void save_scale_distribution(const ScaleDistribution& dist,
                                    const std::string& path) {
  dist.validate();
  detail::AtomicFile out(path);
  out.stream() << "# norm="
               << (dist.norm == WeightNorm::Probability ? "probability"
                                                        : "l2")
               << " ratio=" << detail::fmt_double(dist.ladder.ratio) << '\n';
  const auto levels = dist.ladder.levels();
  for (std::size_t i = 0; i < levels.size(); ++i)
    out.stream() << detail::fmt_double(levels[i]) << '\t'
                 << detail::fmt_double(dist.weights[i]) << '\n';
  out.commit();
}

inline ScaleDistribution load_scale_distribution(const std::string& path) {
  detail::LineReader in(path);
  ScaleDistribution dist;
  std::vector<double> levels;
  std::string line;
  while (in.next(line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = line.substr(1);
      for (const auto field : detail::split_ws(body)) {
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) continue;
        const auto key = field.substr(0, eq);
        const auto val = field.substr(eq + 1);
        if (key == "norm") {
          if (val == "probability")
            dist.norm = WeightNorm::Probability;
          else if (val == "l2")
            dist.norm = WeightNorm::L2;
          else
            in.fail("unknown norm '" + std::string(val) + "'");
        } else if (key == "ratio") {
          dist.ladder.ratio =
              detail::parse_double(val, in.path(), in.lineno());
        }
      }
      continue;
    }
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 2) in.fail("expected `scale\\tweight`");
    const double scale = detail::parse_double(cols[0], in.path(), in.lineno());
    const double weight =
        detail::parse_double(cols[1], in.path(), in.lineno());
    if (scale < 0.0) in.fail("scales must be nonnegative");
    if (!levels.empty() && scale <= levels.back())
      in.fail("scales must be strictly increasing");
    if (weight < 0.0) in.fail("weights must be nonnegative");
    levels.push_back(scale);
    dist.weights.push_back(weight);
  }
  if (!levels.empty() && levels.front() == 0.0) {
    dist.ladder.includes_zero = true;
    levels.erase(levels.begin());
  }
  dist.ladder.scales = std::move(levels);
  dist.validate();
  return dist;
}

// --------------------------------------------------------------------------
// Interval trees: JSON-lines rows node_id/parent_id/x/y/s_emerge/s_end plus
// the polarity so trees reload faithfully.
// --------------------------------------------------------------------------

inline void save_interval_tree(const IntervalTree& tree,
                               const std::string& path) {
  detail::AtomicFile out(path);
  for (const auto& n : tree.nodes) {
    nlohmann::json row;
    row["node_id"] = n.id;
    row["parent_id"] = n.parent;
    row["x"] = n.x;
    if (n.has_y) row["y"] = n.y;
    row["sign"] = n.sign;
    row["s_emerge"] = n.s_emerge;
    row["s_end"] = n.s_end;
    out.stream() << row.dump() << '\n';
  }
  out.commit();
}

inline IntervalTree load_interval_tree(const std::string& path) {
  detail::LineReader in(path);
  IntervalTree tree;
  std::string line;
  while (in.next(line)) {
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded()) in.fail("invalid JSON object");
    for (const char* key : {"node_id", "parent_id", "x", "s_emerge", "s_end"})
      if (!row.contains(key))
        in.fail(std::string("missing key '") + key + "'");
    IntervalNode n;
    n.id = row["node_id"].get<std::size_t>();
    n.parent = row["parent_id"].get<int>();
    n.x = row["x"].get<std::size_t>();
    if (row.contains("y")) {
      n.y = row["y"].get<std::size_t>();
      n.has_y = true;
    }
    if (row.contains("sign")) n.sign = row["sign"].get<int>();
    n.s_emerge = row["s_emerge"].get<double>();
    n.s_end = row["s_end"].get<double>();
    if (n.id != tree.nodes.size())
      in.fail("node ids must ascend from 0 without gaps");
    if (n.parent >= 0) {
      if (static_cast<std::size_t>(n.parent) >= tree.nodes.size())
        in.fail("parent_id must reference an earlier node");
      tree.nodes[static_cast<std::size_t>(n.parent)].children.push_back(n.id);
    }
    tree.nodes.push_back(std::move(n));
  }
  return tree;
}

// --------------------------------------------------------------------------
// Keyword trees: JSON-lines rows word/x/emergence/parent.
// --------------------------------------------------------------------------

inline void save_keyword_tree(const KeywordTree& tree,
                              const std::string& path) {
  detail::AtomicFile out(path);
  for (const auto& n : tree.nodes) {
    nlohmann::json row;
    row["word"] = n.word;
    row["x"] = n.x;
    row["emergence"] = n.emergence;
    row["parent"] = n.parent;
    out.stream() << row.dump() << '\n';
  }
  out.commit();
}

inline KeywordTree load_keyword_tree(const std::string& path) {
  detail::LineReader in(path);
  KeywordTree tree;
  std::string line;
  while (in.next(line)) {
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded()) in.fail("invalid JSON object");
    for (const char* key : {"word", "x", "emergence", "parent"})
      if (!row.contains(key))
        in.fail(std::string("missing key '") + key + "'");
    KeywordNode n;
    n.word = row["word"].get<std::string>();
    n.x = row["x"].get<std::size_t>();
    n.emergence = row["emergence"].get<double>();
    n.parent = row["parent"].get<int>();
    if (n.parent >= 0 &&
        static_cast<std::size_t>(n.parent) >= tree.nodes.size())
      in.fail("parent must reference an earlier node");
    tree.nodes.push_back(std::move(n));
  }
  return tree;
}

// --------------------------------------------------------------------------
// Segment trees: a meta row with the sentence count, then JSON-lines rows
// x/persistence/level ordered by persistence descending.
// --------------------------------------------------------------------------

inline void save_segment_tree(const SegmentTree& tree,
                              const std::string& path) {
  detail::AtomicFile out(path);
  nlohmann::json meta;
  meta["sentence_count"] = tree.sentence_count;
  out.stream() << meta.dump() << '\n';
  for (const auto& b : tree.boundaries) {
    nlohmann::json row;
    row["x"] = b.x;
    row["persistence"] = b.persistence;
    row["level"] = b.level;
    out.stream() << row.dump() << '\n';
  }
  out.commit();
}

inline SegmentTree load_segment_tree(const std::string& path) {
  detail::LineReader in(path);
  SegmentTree tree;
  std::string line;
  bool saw_meta = false;
  while (in.next(line)) {
    if (line.empty()) continue;
    nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
    if (row.is_discarded()) in.fail("invalid JSON object");
    if (!saw_meta) {
      if (!row.contains("sentence_count"))
        in.fail("first row must carry 'sentence_count'");
      tree.sentence_count = row["sentence_count"].get<std::size_t>();
      saw_meta = true;
      continue;
    }
    for (const char* key : {"x", "persistence", "level"})
      if (!row.contains(key))
        in.fail(std::string("missing key '") + key + "'");
    SegmentBoundary b;
    b.x = row["x"].get<std::size_t>();
    b.persistence = row["persistence"].get<double>();
    b.level = row["level"].get<int>();
    tree.boundaries.push_back(b);
  }
  return tree;
}

// --------------------------------------------------------------------------
// Plot data: CSV `x,s,value` (velocity curves, contour points).
// --------------------------------------------------------------------------

struct PlotPoint {
  double x = 0.0;
  double s = 0.0;
  double value = 0.0;
};

inline void save_plot_csv(const std::vector<PlotPoint>& points,
                          const std::string& path) {
  detail::AtomicFile out(path);
  out.stream() << "x,s,value\n";
  for (const auto& p : points)
    out.stream() << detail::fmt_double(p.x) << ',' << detail::fmt_double(p.s)
                 << ',' << detail::fmt_double(p.value) << '\n';
  out.commit();
}

inline std::vector<PlotPoint> load_plot_csv(const std::string& path) {
  detail::LineReader in(path);
  std::vector<PlotPoint> points;
  std::string line;
  if (!in.next(line)) in.fail("missing `x,s,value` header");
  if (line != "x,s,value") in.fail("expected header `x,s,value`");
  while (in.next(line)) {
    if (line.empty()) continue;
    const auto cols = detail::split(line, ',');
    if (cols.size() != 3) in.fail("expected `x,s,value`");
    PlotPoint p;
    p.x = detail::parse_double(cols[0], in.path(), in.lineno());
    p.s = detail::parse_double(cols[1], in.path(), in.lineno());
    p.value = detail::parse_double(cols[2], in.path(), in.lineno());
    points.push_back(p);
  }
  return points;
}

// --------------------------------------------------------------------------
// Kernel matrices: header `TSK1 n`, a tab-separated id line, then n rows of
// n tab-separated reals. Exported for external classifiers.
// --------------------------------------------------------------------------

struct KernelMatrixFile {
  std::vector<std::string> ids;
  Matrix values;
};

inline void save_kernel_matrix(const KernelMatrixFile& km,
                               const std::string& path) {
  if (km.values.rows != km.ids.size() || km.values.cols != km.ids.size())
    throw DimensionMismatch("kernel matrix must be square over its ids");
  detail::AtomicFile out(path);
  out.stream() << "TSK1 " << km.ids.size() << '\n';
  for (std::size_t i = 0; i < km.ids.size(); ++i) {
    if (i) out.stream() << '\t';
    out.stream() << km.ids[i];
  }
  out.stream() << '\n';
  for (std::size_t r = 0; r < km.values.rows; ++r) {
    for (std::size_t c = 0; c < km.values.cols; ++c) {
      if (c) out.stream() << '\t';
      out.stream() << detail::fmt_double(km.values.at(r, c));
    }
    out.stream() << '\n';
  }
  out.commit();
}

inline KernelMatrixFile load_kernel_matrix(const std::string& path) {
  detail::LineReader in(path);
  std::string line;
  if (!in.next(line)) in.fail("missing `TSK1 n` header");
  const auto head = detail::split_ws(line);
  if (head.size() != 2 || head[0] != "TSK1")
    in.fail("expected header `TSK1 n`");
  const long long n = detail::parse_int(head[1], in.path(), in.lineno());
  if (n < 0) in.fail("negative size");
  KernelMatrixFile km;
  if (!in.next(line)) in.fail("missing id line");
  if (n > 0) {
    for (const auto id : detail::split(line, '\t'))
      km.ids.emplace_back(id);
    if (km.ids.size() != static_cast<std::size_t>(n))
      in.fail("expected " + std::to_string(n) + " ids");
  }
  km.values = Matrix(static_cast<std::size_t>(n),
                     static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < km.values.rows; ++r) {
    if (!in.next(line)) in.fail("unexpected end of file inside matrix body");
    const auto vals = detail::split(line, '\t');
    if (vals.size() != km.values.cols)
      in.fail("expected " + std::to_string(km.values.cols) + " values");
    for (std::size_t c = 0; c < km.values.cols; ++c)
      km.values.at(r, c) = detail::parse_double(vals[c], in.path(),
                                                in.lineno());
  }
  return km;
}

// --------------------------------------------------------------------------
// Margin tables: CSV export for inspection (`row_id,s=<scale>,…`).
// --------------------------------------------------------------------------

inline void save_margin_table(const MarginTable& table,
                              const std::string& path) {
  detail::AtomicFile out(path);
  out.stream() << "row_id";
  for (const double s : table.ladder.levels())
    out.stream() << ",s=" << detail::fmt_double(s);
  out.stream() << '\n';
  for (std::size_t r = 0; r < table.values.rows; ++r) {
    out.stream() << (r < table.row_ids.size() ? table.row_ids[r]
                                              : std::to_string(r));
    for (std::size_t c = 0; c < table.values.cols; ++c)
      out.stream() << ',' << detail::fmt_double(table.values.at(r, c));
    out.stream() << '\n';
  }
  out.commit();
}

}  // namespace tss
