// Command-line surface for the text scale-space library: builds
// vocabularies and association graphs, materializes and smooths textual
// signals, exports smoothing stacks, extracts keyword hierarchies and
// segment trees, trains scale distributions for classification and
// retrieval, computes kernel matrices, runs retrieval, and scores runs.
//
// Exit codes: 0 success, 1 data/file errors, 2 usage errors.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tss/tss.hpp"

namespace {

// ---------------------------------------------------------------------------
// Shared option bundles
// ---------------------------------------------------------------------------

struct TokenizerOpts {
  bool no_lowercase = false;
  std::string stopwords_path;
  std::string stemmer = "identity";
  std::size_t max_vocab = 20000;

  tss::TokenizerConfig config() const {
    tss::TokenizerConfig cfg;
    cfg.lowercase = !no_lowercase;
    cfg.stemmer = stemmer;
    cfg.max_vocab = max_vocab;
    if (!stopwords_path.empty()) {
      std::ifstream in(stopwords_path);
      if (!in)
        throw tss::FormatError(stopwords_path, 0, "cannot open for reading");
      std::string word;
      while (std::getline(in, word)) {
        if (!word.empty() && word.back() == '\r') word.pop_back();
        if (!word.empty()) cfg.stopwords.insert(word);
      }
    }
    return cfg;
  }
};

void add_tokenizer_flags(CLI::App* cmd, TokenizerOpts& tok) {
  cmd->add_flag("--no-lowercase", tok.no_lowercase,
                "keep the original letter case");
  cmd->add_option("--stopwords", tok.stopwords_path,
                  "file with one stopword per line");
  cmd->add_option("--stemmer", tok.stemmer,
                  "registered stemmer name (default identity)");
}

struct LadderOpts {
  double s_min = 0.5;
  double s_max = 64.0;
  std::size_t levels = 8;

  tss::ScaleLadder ladder(bool includes_zero) const {
    auto out = tss::build_scale_ladder(s_min, s_max, levels);
    out.includes_zero = includes_zero;
    return out;
  }
};

void add_ladder_flags(CLI::App* cmd, LadderOpts& lad) {
  cmd->add_option("--smin", lad.s_min, "finest ladder scale (default 0.5)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--smax", lad.s_max, "coarsest ladder scale (default 64)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--levels", lad.levels,
                  "number of geometric ladder levels (default 8)")
      ->check(CLI::Range(std::size_t{2}, std::size_t{64}));
}

struct SmootherOpts {
  std::string graph_path;
  std::string mode = "distance";
  double lambda = 0.5;
  double semantic_scale = -1.0;  // < 0 means "track the spatial scale"

  tss::SemanticMode semantic_mode() const {
    if (graph_path.empty() || mode == "identity")
      return tss::SemanticMode::Identity;
    if (mode == "distance") return tss::SemanticMode::DistanceKernel;
    if (mode == "solve") return tss::SemanticMode::GraphSolve;
    throw tss::Error("unknown semantic mode '" + mode + "'");
  }
};

void add_smoother_flags(CLI::App* cmd, SmootherOpts& sem, bool require_graph) {
  auto* graph = cmd->add_option("--graph", sem.graph_path,
                                "semantic graph TSV (omit for no semantic "
                                "smoothing)");
  if (require_graph) graph->required();
  cmd->add_option("--mode", sem.mode,
                  "semantic operator: distance | solve | identity")
      ->check(CLI::IsMember({"distance", "solve", "identity"}));
  cmd->add_option("--lambda", sem.lambda,
                  "solver-mode smoothing strength in [0,1]")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--sy", sem.semantic_scale,
                  "fixed semantic scale; omit to track the spatial scale");
}

struct KernelOpts {
  std::string kind = "linear";
  double sigma = 1.0;

  tss::KernelKind kernel() const {
    if (kind == "linear") return tss::KernelKind::linear();
    if (kind == "rbf") return tss::KernelKind::rbf(sigma);
    if (kind == "js") return tss::KernelKind::jensen_shannon();
    throw tss::Error("unknown kernel '" + kind + "'");
  }
};

void add_kernel_flags(CLI::App* cmd, KernelOpts& k) {
  cmd->add_option("--kernel", k.kind, "single-scale kernel: linear | rbf | js")
      ->check(CLI::IsMember({"linear", "rbf", "js"}));
  cmd->add_option("--sigma", k.sigma, "rbf bandwidth (default 1)")
      ->check(CLI::PositiveNumber);
}

// ---------------------------------------------------------------------------
// Data plumbing
// ---------------------------------------------------------------------------

std::vector<tss::Document> load_indexed_corpus(const std::string& path,
                                               const tss::Vocabulary& vocab,
                                               const TokenizerOpts& tok) {
  auto corpus = tss::load_corpus(path);
  tss::index_corpus(corpus, vocab, tok.config());
  return corpus;
}

const tss::Document& pick_document(const std::vector<tss::Document>& corpus,
                                   const std::string& id,
                                   const std::string& path) {
  if (corpus.empty()) throw tss::FormatError(path, 0, "corpus is empty");
  if (id.empty()) return corpus.front();
  for (const auto& doc : corpus)
    if (doc.id == id) return doc;
  throw tss::Error("document '" + id + "' not found in " + path);
}

tss::Signal2D make_signal(const tss::Document& doc,
                          const tss::Vocabulary& vocab,
                          const std::string& kind) {
  if (kind == "word2d") return tss::word2d_signal(doc, vocab);
  if (kind == "sentence2d") return tss::sentence2d_signal(doc, vocab);
  throw tss::Error("unknown signal kind '" + kind + "'");
}

/// Single-scale kernels compare signals cell by cell, so classification
/// pipelines bring every document to one spatial length first. 0 picks the
/// longest document in the corpus.
std::size_t resolve_resample_length(const std::vector<tss::Document>& corpus,
                                    const tss::Vocabulary& vocab,
                                    const std::string& kind,
                                    std::size_t requested) {
  if (requested > 0) return requested;
  std::size_t longest = 1;
  for (const auto& doc : corpus)
    longest = std::max(longest,
                       make_signal(doc, vocab, kind).spatial_len());
  return longest;
}

tss::StackConfig stack_config(const tss::ScaleLadder& ladder,
                              const SmootherOpts& sem) {
  tss::StackConfig cfg;
  if (sem.semantic_scale >= 0.0)
    cfg.semantic_scales.assign(ladder.scales.size(), sem.semantic_scale);
  return cfg;
}

struct StackContext {
  tss::Vocabulary vocab;
  tss::SemanticGraph graph;
  tss::SemanticSmoother smoother;
  tss::ScaleLadder ladder;
  tss::StackConfig cfg;

  StackContext(const std::string& vocab_path, const SmootherOpts& sem,
               const LadderOpts& lad)
      : vocab(tss::load_vocabulary(vocab_path)), graph(0) {
    if (!sem.graph_path.empty()) {
      graph = tss::load_graph(sem.graph_path, vocab);
      smoother = tss::SemanticSmoother(graph, sem.semantic_mode(), sem.lambda);
    }
    ladder = lad.ladder(true);
    cfg = stack_config(ladder, sem);
  }

  tss::ScaleSpaceStack stack_of(const tss::Document& doc,
                                const std::string& signal_kind) const {
    return tss::build_stack(make_signal(doc, vocab, signal_kind), ladder,
                            smoother, cfg);
  }

  tss::ScaledSignal scaled_of(const tss::Document& doc,
                              const std::string& signal_kind) const {
    return tss::stack_signals(stack_of(doc, signal_kind));
  }
};

/// Deterministic label indexing: lexicographic order of the distinct labels.
std::map<std::string, int> label_index(const std::vector<tss::Document>& docs) {
  std::set<std::string> seen;
  for (const auto& doc : docs) {
    if (!doc.label)
      throw tss::Error("document '" + doc.id + "' is missing a label");
    seen.insert(*doc.label);
  }
  std::map<std::string, int> out;
  int next = 0;
  for (const auto& label : seen) out[label] = next++;
  return out;
}

void resolve_threads(int threads) {
  if (threads < 1) {
    if (const char* env = std::getenv("SCALESPACE_THREADS"))
      threads = std::atoi(env);
  }
  tss::set_worker_threads(threads < 1 ? 1 : threads);
}

std::string format_metric(const char* name, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s=%.4f", name, value);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"text scale-space toolkit: smoothing, keywords, segmentation, "
               "scale-invariant kernels, and retrieval"};
  app.require_subcommand(1);
  app.fallthrough();

  int threads = 0;
  app.add_option("--threads", threads,
                 "worker thread cap (falls back to SCALESPACE_THREADS, "
                 "then 1)");
  app.immediate_callback();
  app.callback([&] { resolve_threads(threads); });

  // ---- build-vocab ---------------------------------------------------------
  struct {
    std::string corpus, out;
    TokenizerOpts tok;
  } bv;
  {
    auto* cmd = app.add_subcommand(
        "build-vocab", "rank words by document frequency into a vocabulary");
    cmd->add_option("--corpus", bv.corpus, "corpus JSON-lines file")
        ->required();
    cmd->add_option("--out", bv.out, "vocabulary TSV to write")->required();
    cmd->add_option("--max-size", bv.tok.max_vocab,
                    "vocabulary size cap (default 20000)")
        ->check(CLI::PositiveNumber);
    add_tokenizer_flags(cmd, bv.tok);
    cmd->callback([&] {
      const auto corpus = tss::load_corpus(bv.corpus);
      tss::save_vocabulary(tss::build_vocabulary(corpus, bv.tok.config()),
                           bv.out);
    });
  }

  // ---- build-graph ---------------------------------------------------------
  struct {
    std::string corpus, vocab, out;
    std::size_t window = 3;
    double threshold = 0.0;
    TokenizerOpts tok;
  } bg;
  {
    auto* cmd = app.add_subcommand(
        "build-graph",
        "build the word-association graph from co-occurrence statistics");
    cmd->add_option("--corpus", bg.corpus, "corpus JSON-lines file")
        ->required();
    cmd->add_option("--vocab", bg.vocab, "vocabulary TSV")->required();
    cmd->add_option("--out", bg.out, "graph TSV to write")->required();
    cmd->add_option("--window", bg.window,
                    "co-occurrence window in tokens (default 3)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threshold", bg.threshold,
                    "drop association scores at or below this (default 0)");
    add_tokenizer_flags(cmd, bg.tok);
    cmd->callback([&] {
      const auto vocab = tss::load_vocabulary(bg.vocab);
      const auto corpus = load_indexed_corpus(bg.corpus, vocab, bg.tok);
      tss::save_graph(tss::build_pmi_graph(corpus, vocab, bg.window,
                                           bg.threshold),
                      vocab, bg.out);
    });
  }

  // ---- signal --------------------------------------------------------------
  struct {
    std::string corpus, vocab, doc, kind = "word2d", out;
    bool normalize = false;
    TokenizerOpts tok;
  } sg;
  {
    auto* cmd = app.add_subcommand(
        "signal", "materialize a document's 2D signal matrix");
    cmd->add_option("--corpus", sg.corpus, "corpus JSON-lines file")
        ->required();
    cmd->add_option("--vocab", sg.vocab, "vocabulary TSV")->required();
    cmd->add_option("--doc", sg.doc, "document id (default: first)");
    cmd->add_option("--signal", sg.kind, "signal kind: word2d | sentence2d")
        ->check(CLI::IsMember({"word2d", "sentence2d"}));
    cmd->add_flag("--normalize", sg.normalize, "rescale to total mass 1");
    cmd->add_option("--out", sg.out, "signal matrix file to write")
        ->required();
    add_tokenizer_flags(cmd, sg.tok);
    cmd->callback([&] {
      const auto vocab = tss::load_vocabulary(sg.vocab);
      const auto corpus = load_indexed_corpus(sg.corpus, vocab, sg.tok);
      auto sig = make_signal(pick_document(corpus, sg.doc, sg.corpus), vocab,
                             sg.kind);
      if (sg.normalize) sig = tss::normalize_signal(sig);
      tss::save_signal(sig, sg.out);
    });
  }

  // ---- smooth ---------------------------------------------------------------
  struct {
    std::string corpus, vocab, doc, kind = "word2d", out;
    double sx = 1.0, sy = 1.0;
    SmootherOpts sem;
    TokenizerOpts tok;
  } sm;
  {
    auto* cmd = app.add_subcommand(
        "smooth", "smooth a document signal at one (spatial, semantic) scale");
    cmd->add_option("--corpus", sm.corpus, "corpus JSON-lines file")
        ->required();
    cmd->add_option("--vocab", sm.vocab, "vocabulary TSV")->required();
    cmd->add_option("--doc", sm.doc, "document id (default: first)");
    cmd->add_option("--signal", sm.kind, "signal kind: word2d | sentence2d")
        ->check(CLI::IsMember({"word2d", "sentence2d"}));
    cmd->add_option("--sx", sm.sx, "spatial scale (>= 0)")
        ->required()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--sy", sm.sy, "semantic scale (>= 0)")
        ->required()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", sm.out, "smoothed matrix file to write")
        ->required();
    cmd->add_option("--graph", sm.sem.graph_path,
                    "semantic graph TSV (omit for spatial-only smoothing)");
    cmd->add_option("--mode", sm.sem.mode,
                    "semantic operator: distance | solve | identity")
        ->check(CLI::IsMember({"distance", "solve", "identity"}));
    cmd->add_option("--lambda", sm.sem.lambda,
                    "solver-mode smoothing strength in [0,1]")
        ->check(CLI::Range(0.0, 1.0));
    add_tokenizer_flags(cmd, sm.tok);
    cmd->callback([&] {
      const auto vocab = tss::load_vocabulary(sm.vocab);
      const auto corpus = load_indexed_corpus(sm.corpus, vocab, sm.tok);
      const auto sig = make_signal(pick_document(corpus, sm.doc, sm.corpus),
                                   vocab, sm.kind);

      tss::SemanticSmoother smoother;
      tss::SemanticGraph graph(0);
      if (!sm.sem.graph_path.empty()) {
        graph = tss::load_graph(sm.sem.graph_path, vocab);
        smoother =
            tss::SemanticSmoother(graph, sm.sem.semantic_mode(),
                                  sm.sem.lambda);
      }
      if (sm.sx == 0.0 && sm.sy == 0.0) {
        tss::save_matrix(sig.values, sm.out);
        return;
      }
      tss::ScaleLadder one;
      one.scales = {sm.sx > 0.0 ? sm.sx : sm.sy};
      tss::StackConfig cfg;
      cfg.include_zero = false;
      cfg.smooth_spatial = sm.sx > 0.0;
      cfg.semantic_scales = {sm.sy};
      const auto stack = tss::build_stack(sig, one, smoother, cfg);
      tss::save_matrix(stack.level(0).values, sm.out);
    });
  }

  // ---- stack ----------------------------------------------------------------
  struct {
    std::string corpus, vocab, doc, kind = "word2d", prefix;
    LadderOpts lad;
    SmootherOpts sem;
    TokenizerOpts tok;
  } st;
  {
    auto* cmd = app.add_subcommand(
        "stack", "export a document's full smoothing stack level by level");
    cmd->add_option("--corpus", st.corpus, "corpus JSON-lines file")
        ->required();
    cmd->add_option("--vocab", st.vocab, "vocabulary TSV")->required();
    cmd->add_option("--doc", st.doc, "document id (default: first)");
    cmd->add_option("--signal", st.kind, "signal kind: word2d | sentence2d")
        ->check(CLI::IsMember({"word2d", "sentence2d"}));
    cmd->add_option("--out-prefix", st.prefix,
                    "writes <prefix><level>.tss per level")
        ->required();
    add_ladder_flags(cmd, st.lad);
    add_smoother_flags(cmd, st.sem, false);
    add_tokenizer_flags(cmd, st.tok);
    cmd->callback([&] {
      StackContext ctx(st.vocab, st.sem, st.lad);
      const auto corpus = load_indexed_corpus(st.corpus, ctx.vocab, st.tok);
      const auto stack =
          ctx.stack_of(pick_document(corpus, st.doc, st.corpus), st.kind);
      for (std::size_t i = 0; i < stack.size(); ++i)
        tss::save_matrix(stack.level(i).values,
                         st.prefix + std::to_string(i) + ".tss");
    });
  }

  // ---- keywords --------------------------------------------------------------
  struct {
    std::string corpus, vocab, doc, out;
    LadderOpts lad;
    SmootherOpts sem;
    TokenizerOpts tok;
  } kw;
  {
    auto* cmd = app.add_subcommand(
        "keywords", "extract the coarse-to-fine keyword hierarchy");
    cmd->add_option("--corpus", kw.corpus, "corpus JSON-lines file")
        ->required();
    cmd->add_option("--vocab", kw.vocab, "vocabulary TSV")->required();
    cmd->add_option("--doc", kw.doc, "document id (default: first)");
    cmd->add_option("--out", kw.out, "keyword tree JSON-lines to write")
        ->required();
    add_ladder_flags(cmd, kw.lad);
    add_smoother_flags(cmd, kw.sem, true);
    add_tokenizer_flags(cmd, kw.tok);
    cmd->callback([&] {
      const auto vocab = tss::load_vocabulary(kw.vocab);
      const auto graph = tss::load_graph(kw.sem.graph_path, vocab);
      const auto corpus = load_indexed_corpus(kw.corpus, vocab, kw.tok);
      const auto ladder = kw.lad.ladder(true);
      tss::KeywordConfig cfg;
      cfg.stack = stack_config(ladder, kw.sem);
      cfg.mode = kw.sem.semantic_mode();
      cfg.lambda = kw.sem.lambda;
      tss::save_keyword_tree(
          tss::keyword_hierarchy(pick_document(corpus, kw.doc, kw.corpus),
                                 vocab, graph, ladder, cfg),
          kw.out);
    });
  }

  // ---- segment ---------------------------------------------------------------
  struct {
    std::string corpus, vocab, doc, out;
    double semantic_scale = 1.0;
    LadderOpts lad;
    SmootherOpts sem;
    TokenizerOpts tok;
  } seg;
  {
    auto* cmd = app.add_subcommand(
        "segment", "detect hierarchical topic boundaries between sentences");
    cmd->add_option("--corpus", seg.corpus, "corpus JSON-lines file")
        ->required();
    cmd->add_option("--vocab", seg.vocab, "vocabulary TSV")->required();
    cmd->add_option("--doc", seg.doc, "document id (default: first)");
    cmd->add_option("--out", seg.out, "segment tree JSON-lines to write")
        ->required();
    cmd->add_option("--sy", seg.semantic_scale,
                    "fixed semantic scale (default 1)")
        ->check(CLI::NonNegativeNumber);
    add_ladder_flags(cmd, seg.lad);
    cmd->add_option("--graph", seg.sem.graph_path,
                    "semantic graph TSV (optional)");
    cmd->add_option("--mode", seg.sem.mode,
                    "semantic operator: distance | solve | identity")
        ->check(CLI::IsMember({"distance", "solve", "identity"}));
    cmd->add_option("--lambda", seg.sem.lambda,
                    "solver-mode smoothing strength in [0,1]")
        ->check(CLI::Range(0.0, 1.0));
    add_tokenizer_flags(cmd, seg.tok);
    cmd->callback([&] {
      const auto vocab = tss::load_vocabulary(seg.vocab);
      const auto corpus = load_indexed_corpus(seg.corpus, vocab, seg.tok);
      const auto ladder = seg.lad.ladder(false);
      tss::SemanticSmoother smoother;
      tss::SemanticGraph graph(0);
      if (!seg.sem.graph_path.empty()) {
        graph = tss::load_graph(seg.sem.graph_path, vocab);
        smoother = tss::SemanticSmoother(graph, seg.sem.semantic_mode(),
                                         seg.sem.lambda);
      }
      tss::save_segment_tree(
          tss::hierarchical_segment(pick_document(corpus, seg.doc, seg.corpus),
                                    vocab, ladder, seg.semantic_scale,
                                    smoother),
          seg.out);
    });
  }

  // ---- sitk-train -------------------------------------------------------------
  struct {
    std::string corpus, vocab, out, kind = "word2d";
    std::size_t resample = 0;
    LadderOpts lad;
    SmootherOpts sem;
    KernelOpts ker;
    TokenizerOpts tok;
  } skt;
  {
    auto* cmd = app.add_subcommand(
        "sitk-train",
        "learn a classification scale distribution from labeled documents");
    cmd->add_option("--corpus", skt.corpus,
                    "labeled corpus JSON-lines file (every row needs label)")
        ->required();
    cmd->add_option("--vocab", skt.vocab, "vocabulary TSV")->required();
    cmd->add_option("--signal", skt.kind, "signal kind: word2d | sentence2d")
        ->check(CLI::IsMember({"word2d", "sentence2d"}));
    cmd->add_option("--resample", skt.resample,
                    "common spatial length (default: longest document)");
    cmd->add_option("--out", skt.out, "scale distribution TSV to write")
        ->required();
    add_ladder_flags(cmd, skt.lad);
    add_smoother_flags(cmd, skt.sem, false);
    add_kernel_flags(cmd, skt.ker);
    add_tokenizer_flags(cmd, skt.tok);
    cmd->callback([&] {
      StackContext ctx(skt.vocab, skt.sem, skt.lad);
      const auto corpus = load_indexed_corpus(skt.corpus, ctx.vocab, skt.tok);
      const auto labels = label_index(corpus);
      const std::size_t length = resolve_resample_length(
          corpus, ctx.vocab, skt.kind, skt.resample);
      std::vector<tss::ScaledSignal> docs(corpus.size());
      std::vector<int> y(corpus.size());
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto sig = tss::resample_bilinear(
            make_signal(corpus[i], ctx.vocab, skt.kind), length);
        docs[i] = tss::stack_signals(
            tss::build_stack(sig, ctx.ladder, ctx.smoother, ctx.cfg));
        y[i] = labels.at(*corpus[i].label);
      }
      const auto margins =
          tss::hit_miss_margins(docs, y, ctx.ladder, skt.ker.kernel());
      tss::save_scale_distribution(tss::learn_scale_distribution(margins),
                                   skt.out);
    });
  }

  // ---- kernel-matrix ------------------------------------------------------------
  struct {
    std::string corpus, vocab, dist, out, kind = "word2d";
    std::size_t resample = 0;
    SmootherOpts sem;
    KernelOpts ker;
    TokenizerOpts tok;
  } km;
  {
    auto* cmd = app.add_subcommand(
        "kernel-matrix",
        "export the scale-weighted kernel matrix over a corpus");
    cmd->add_option("--corpus", km.corpus, "corpus JSON-lines file")
        ->required();
    cmd->add_option("--vocab", km.vocab, "vocabulary TSV")->required();
    cmd->add_option("--dist", km.dist, "scale distribution TSV")->required();
    cmd->add_option("--signal", km.kind, "signal kind: word2d | sentence2d")
        ->check(CLI::IsMember({"word2d", "sentence2d"}));
    cmd->add_option("--resample", km.resample,
                    "common spatial length (default: longest document)");
    cmd->add_option("--out", km.out, "kernel matrix file to write")
        ->required();
    add_smoother_flags(cmd, km.sem, false);
    add_kernel_flags(cmd, km.ker);
    add_tokenizer_flags(cmd, km.tok);
    cmd->callback([&] {
      const auto dist = tss::load_scale_distribution(km.dist);
      const auto vocab = tss::load_vocabulary(km.vocab);
      tss::SemanticSmoother smoother;
      tss::SemanticGraph graph(0);
      if (!km.sem.graph_path.empty()) {
        graph = tss::load_graph(km.sem.graph_path, vocab);
        smoother = tss::SemanticSmoother(graph, km.sem.semantic_mode(),
                                         km.sem.lambda);
      }
      const auto corpus = load_indexed_corpus(km.corpus, vocab, km.tok);
      tss::StackConfig cfg = stack_config(dist.ladder, km.sem);
      cfg.include_zero = dist.ladder.includes_zero;
      const std::size_t length =
          resolve_resample_length(corpus, vocab, km.kind, km.resample);

      std::vector<tss::ScaledSignal> docs(corpus.size());
      for (std::size_t i = 0; i < corpus.size(); ++i)
        docs[i] = tss::stack_signals(tss::build_stack(
            tss::resample_bilinear(make_signal(corpus[i], vocab, km.kind),
                                   length),
            dist.ladder, smoother, cfg));

      tss::KernelMatrixFile out;
      out.values = tss::Matrix(corpus.size(), corpus.size());
      for (const auto& doc : corpus) out.ids.push_back(doc.id);
      const auto kernel = km.ker.kernel();
      tss::parallel_for(corpus.size(), [&](std::size_t i) {
        for (std::size_t j = i; j < corpus.size(); ++j) {
          const double v = tss::sitk(docs[i], docs[j], dist, kernel);
          out.values(i, j) = v;
          out.values(j, i) = v;
        }
      });
      tss::save_kernel_matrix(out, km.out);
    });
  }

  // ---- silm-train -----------------------------------------------------------
  struct {
    std::string docs, queries, vocab, qrels, out, kind = "word2d";
    LadderOpts lad;
    SmootherOpts sem;
    TokenizerOpts tok;
  } slt;
  {
    auto* cmd = app.add_subcommand(
        "silm-train",
        "learn a retrieval scale distribution from graded judgments");
    cmd->add_option("--docs", slt.docs, "document corpus JSON-lines file")
        ->required();
    cmd->add_option("--queries", slt.queries, "query corpus JSON-lines file")
        ->required();
    cmd->add_option("--vocab", slt.vocab, "vocabulary TSV")->required();
    cmd->add_option("--qrels", slt.qrels, "TREC qrels with graded relevance")
        ->required();
    cmd->add_option("--signal", slt.kind, "signal kind: word2d | sentence2d")
        ->check(CLI::IsMember({"word2d", "sentence2d"}));
    cmd->add_option("--out", slt.out, "scale distribution TSV to write")
        ->required();
    add_ladder_flags(cmd, slt.lad);
    add_smoother_flags(cmd, slt.sem, false);
    add_tokenizer_flags(cmd, slt.tok);
    cmd->callback([&] {
      StackContext ctx(slt.vocab, slt.sem, slt.lad);
      const auto docs = load_indexed_corpus(slt.docs, ctx.vocab, slt.tok);
      const auto queries =
          load_indexed_corpus(slt.queries, ctx.vocab, slt.tok);
      const auto qrels = tss::load_qrels(slt.qrels);

      std::map<std::string, std::size_t> doc_slot;
      for (std::size_t i = 0; i < docs.size(); ++i) doc_slot[docs[i].id] = i;
      std::vector<tss::ScaledSignal> doc_stacks(docs.size());
      for (std::size_t i = 0; i < docs.size(); ++i)
        doc_stacks[i] = ctx.scaled_of(docs[i], slt.kind);

      std::vector<tss::JudgedQuery> judged;
      for (const auto& query : queries) {
        const auto it = qrels.find(query.id);
        if (it == qrels.end()) continue;
        tss::JudgedQuery jq;
        jq.query_id = query.id;
        jq.query = ctx.scaled_of(query, slt.kind);
        for (const auto& [doc_id, grade] : it->second) {
          const auto slot = doc_slot.find(doc_id);
          if (slot == doc_slot.end())
            throw tss::Error("qrels references unknown document '" + doc_id +
                             "'");
          jq.doc_ids.push_back(doc_id);
          jq.docs.push_back(doc_stacks[slot->second]);
          jq.grades.push_back(grade);
        }
        judged.push_back(std::move(jq));
      }
      const auto margins = tss::pairwise_margins(judged, ctx.ladder);
      tss::save_scale_distribution(tss::learn_scale_distribution(margins),
                                   slt.out);
    });
  }

  // ---- retrieve ---------------------------------------------------------------
  struct {
    std::string docs, queries, vocab, dist, out, tag = "tss",
                kind = "word2d";
    std::size_t top = 0;
    SmootherOpts sem;
    TokenizerOpts tok;
  } rt;
  {
    auto* cmd = app.add_subcommand(
        "retrieve", "rank all documents against each query");
    cmd->add_option("--docs", rt.docs, "document corpus JSON-lines file")
        ->required();
    cmd->add_option("--queries", rt.queries, "query corpus JSON-lines file")
        ->required();
    cmd->add_option("--vocab", rt.vocab, "vocabulary TSV")->required();
    cmd->add_option("--dist", rt.dist, "scale distribution TSV")->required();
    cmd->add_option("--signal", rt.kind, "signal kind: word2d | sentence2d")
        ->check(CLI::IsMember({"word2d", "sentence2d"}));
    cmd->add_option("--out", rt.out, "TREC run file to write")->required();
    cmd->add_option("--top", rt.top, "keep this many documents per query "
                                     "(default: all)");
    cmd->add_option("--tag", rt.tag, "run tag (default tss)");
    add_smoother_flags(cmd, rt.sem, false);
    add_tokenizer_flags(cmd, rt.tok);
    cmd->callback([&] {
      const auto dist = tss::load_scale_distribution(rt.dist);
      const auto vocab = tss::load_vocabulary(rt.vocab);
      tss::SemanticSmoother smoother;
      tss::SemanticGraph graph(0);
      if (!rt.sem.graph_path.empty()) {
        graph = tss::load_graph(rt.sem.graph_path, vocab);
        smoother = tss::SemanticSmoother(graph, rt.sem.semantic_mode(),
                                         rt.sem.lambda);
      }
      const auto docs = load_indexed_corpus(rt.docs, vocab, rt.tok);
      const auto queries = load_indexed_corpus(rt.queries, vocab, rt.tok);
      tss::StackConfig cfg = stack_config(dist.ladder, rt.sem);
      cfg.include_zero = dist.ladder.includes_zero;

      std::vector<tss::ScaledSignal> doc_stacks(docs.size());
      for (std::size_t i = 0; i < docs.size(); ++i)
        doc_stacks[i] = tss::stack_signals(
            tss::build_stack(make_signal(docs[i], vocab, rt.kind),
                             dist.ladder, smoother, cfg));

      std::vector<tss::RunRow> rows;
      for (const auto& query : queries) {
        const auto qsig = tss::stack_signals(
            tss::build_stack(make_signal(query, vocab, rt.kind), dist.ladder,
                             smoother, cfg));
        std::vector<std::pair<double, std::size_t>> scored(docs.size());
        tss::parallel_for(docs.size(), [&](std::size_t i) {
          scored[i] = {tss::silm_relevance(qsig, doc_stacks[i], dist), i};
        });
        std::sort(scored.begin(), scored.end(),
                  [&](const auto& a, const auto& b) {
                    if (a.first != b.first) return a.first > b.first;
                    return docs[a.second].id < docs[b.second].id;
                  });
        const std::size_t keep =
            rt.top == 0 ? scored.size() : std::min(rt.top, scored.size());
        for (std::size_t r = 0; r < keep; ++r)
          rows.push_back({query.id, docs[scored[r].second].id, r + 1,
                          scored[r].first, rt.tag});
      }
      tss::save_run(rows, rt.out);
    });
  }

  // ---- passages ---------------------------------------------------------------
  struct {
    std::string docs, queries, vocab, dist, out, doc, query,
                kind = "word2d";
    std::size_t window = 3;
    SmootherOpts sem;
    TokenizerOpts tok;
  } ps;
  {
    auto* cmd = app.add_subcommand(
        "passages", "retrieve the best passages of a document for a query");
    cmd->add_option("--docs", ps.docs, "document corpus JSON-lines file")
        ->required();
    cmd->add_option("--queries", ps.queries, "query corpus JSON-lines file")
        ->required();
    cmd->add_option("--vocab", ps.vocab, "vocabulary TSV")->required();
    cmd->add_option("--dist", ps.dist, "scale distribution TSV")->required();
    cmd->add_option("--doc", ps.doc, "document id (default: first)");
    cmd->add_option("--query", ps.query, "query id (default: first)");
    cmd->add_option("--signal", ps.kind, "signal kind: word2d | sentence2d")
        ->check(CLI::IsMember({"word2d", "sentence2d"}));
    cmd->add_option("--window", ps.window, "passage window (default 3)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", ps.out, "passage JSON-lines to write")
        ->required();
    add_smoother_flags(cmd, ps.sem, false);
    add_tokenizer_flags(cmd, ps.tok);
    cmd->callback([&] {
      const auto dist = tss::load_scale_distribution(ps.dist);
      const auto vocab = tss::load_vocabulary(ps.vocab);
      tss::SemanticSmoother smoother;
      tss::SemanticGraph graph(0);
      if (!ps.sem.graph_path.empty()) {
        graph = tss::load_graph(ps.sem.graph_path, vocab);
        smoother = tss::SemanticSmoother(graph, ps.sem.semantic_mode(),
                                         ps.sem.lambda);
      }
      const auto docs = load_indexed_corpus(ps.docs, vocab, ps.tok);
      const auto queries = load_indexed_corpus(ps.queries, vocab, ps.tok);
      tss::StackConfig cfg = stack_config(dist.ladder, ps.sem);
      cfg.include_zero = dist.ladder.includes_zero;

      const auto& doc = pick_document(docs, ps.doc, ps.docs);
      const auto& query = pick_document(queries, ps.query, ps.queries);
      const auto doc_stack = tss::build_stack(
          make_signal(doc, vocab, ps.kind), dist.ladder, smoother, cfg);
      const auto qsig = tss::stack_signals(
          tss::build_stack(make_signal(query, vocab, ps.kind), dist.ladder,
                           smoother, cfg));
      const auto passages =
          tss::passage_retrieve(qsig, doc_stack, dist, ps.window);

      tss::detail::AtomicFile out(ps.out);
      for (const auto& p : passages) {
        nlohmann::json row;
        row["begin"] = p.begin;
        row["end"] = p.end;
        row["score"] = p.score;
        out.stream() << row.dump() << '\n';
      }
      out.commit();
    });
  }

  // ---- eval ---------------------------------------------------------------------
  struct {
    std::string qrels, run, gold, pred;
  } ev;
  {
    auto* cmd = app.add_subcommand(
        "eval", "score a run against judgments (and labels, if given)");
    auto* qrels = cmd->add_option("--qrels", ev.qrels, "TREC qrels file");
    cmd->add_option("--run", ev.run, "TREC run file")->needs(qrels);
    qrels->needs(cmd->get_option("--run"));
    auto* gold = cmd->add_option(
        "--gold", ev.gold, "gold labels TSV (id<TAB>label)");
    cmd->add_option("--pred", ev.pred, "predicted labels TSV (id<TAB>label)")
        ->needs(gold);
    gold->needs(cmd->get_option("--pred"));
    cmd->callback([&] {
      if (ev.qrels.empty() && ev.gold.empty())
        throw CLI::ValidationError(
            "eval", "pass --qrels/--run or --gold/--pred");
      if (!ev.qrels.empty()) {
        const auto qrels = tss::load_qrels(ev.qrels);
        const auto run = tss::run_to_ranked(tss::load_run(ev.run));
        const auto report = tss::evaluate_retrieval(run, qrels);
        std::cout << format_metric("MAP", report.map) << '\n'
                  << format_metric("P@5", report.p5) << '\n'
                  << format_metric("P@10", report.p10) << '\n';
      }
      if (!ev.gold.empty()) {
        auto read_labels = [](const std::string& path) {
          std::map<std::string, std::string> out;
          tss::detail::LineReader in(path);
          std::string line;
          while (in.next(line)) {
            if (line.empty()) continue;
            const auto cols = tss::detail::split(line, '\t');
            if (cols.size() != 2) in.fail("expected `id\\tlabel`");
            out[std::string(cols[0])] = std::string(cols[1]);
          }
          return out;
        };
        const auto gold_labels = read_labels(ev.gold);
        const auto pred_labels = read_labels(ev.pred);
        std::set<std::string> names;
        for (const auto& [id, label] : gold_labels) names.insert(label);
        for (const auto& [id, label] : pred_labels) names.insert(label);
        std::map<std::string, int> code;
        int next = 0;
        for (const auto& name : names) code[name] = next++;
        std::vector<int> gold_vec, pred_vec;
        for (const auto& [id, label] : gold_labels) {
          const auto it = pred_labels.find(id);
          if (it == pred_labels.end())
            throw tss::LabelMismatch("no prediction for '" + id + "'");
          gold_vec.push_back(code.at(label));
          pred_vec.push_back(code.at(it->second));
        }
        const auto report = tss::evaluate_classification(pred_vec, gold_vec);
        std::cout << format_metric("microF1", report.micro_f1) << '\n';
      }
    });
  }

  // Let global flags (--threads) appear after the subcommand name too.
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) {
         return true;
       }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const tss::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
