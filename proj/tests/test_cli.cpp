#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helpers/fixtures.hpp"
#include "tss/persist.hpp"

namespace {

namespace fs = std::filesystem;

struct Scratch {
  fs::path dir;

  Scratch() {
    dir = fs::temp_directory_path() /
          ("tss_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }

  std::string path(const std::string& name) const {
    return (dir / name).string();
  }
};

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CliResult run_cli(const Scratch& tmp, const std::string& args,
                  const std::string& env = "") {
  const std::string out_path = tmp.path("stdout.txt");
  const std::string err_path = tmp.path("stderr.txt");
  const std::string cmd = env + std::string(TSS_CLI_BIN) + " " + args +
                          " > " + out_path + " 2> " + err_path;
  const int raw = std::system(cmd.c_str());
  CliResult res;
  res.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  return res;
}

// News-sentence fixture on disk: corpus, pinned vocabulary, association
// graph, and the stopword list that reproduces the 10-position signal.
struct NewsFiles {
  std::string corpus, vocab, graph, stopwords;

  explicit NewsFiles(const Scratch& tmp) {
    corpus = tmp.path("corpus.jsonl");
    vocab = tmp.path("vocab.tsv");
    graph = tmp.path("graph.tsv");
    stopwords = tmp.path("stopwords.txt");

    tss::Document doc;
    doc.id = "news";
    doc.text = fixture::news_sentence();
    tss::save_corpus({doc}, corpus);

    const auto v = fixture::news_vocabulary();
    tss::save_vocabulary(v, vocab);

    tss::SemanticGraph g(v.size());
    for (const auto& [a, b, w] : fixture::news_graph_edges())
      g.add_edge(std::size_t(v.position(a)), std::size_t(v.position(b)), w);
    tss::save_graph(g, v, graph);

    std::ofstream stop(stopwords);
    for (const auto& word : fixture::news_stopwords()) stop << word << '\n';
  }

  std::string tokenizer_flags() const {
    return " --stopwords " + stopwords + " --stemmer strip-plural-s";
  }
};

}  // namespace

TEST_CASE("smooth emits the news sentence as a 10x12 matrix at scale (1,1)") {
  Scratch tmp;
  NewsFiles files(tmp);
  const auto out = tmp.path("smoothed.tss");

  const auto res = run_cli(
      tmp, "smooth --corpus " + files.corpus + " --vocab " + files.vocab +
               " --graph " + files.graph +
               " --signal word2d --sx 1 --sy 1 --out " + out +
               files.tokenizer_flags());
  REQUIRE(res.code == 0);

  const auto m = tss::load_matrix(out);
  CHECK(m.rows == 10);   // sentence positions
  CHECK(m.cols == 12);   // pinned vocabulary words
  double total = 0.0;
  for (double v : m.data) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(total == Catch::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("usage errors exit 2, data errors exit 1, help exits 0") {
  Scratch tmp;
  NewsFiles files(tmp);

  CHECK(run_cli(tmp, "--bogus-flag").code == 2);
  CHECK(run_cli(tmp, "no-such-subcommand").code == 2);
  CHECK(run_cli(tmp, "smooth --sx 1").code == 2);  // missing required flags
  CHECK(run_cli(tmp, "smooth --corpus " + files.corpus + " --vocab " +
                         files.vocab +
                         " --sx -3 --sy 1 --out " + tmp.path("x.tss"))
            .code == 2);

  CHECK(run_cli(tmp, "--help").code == 0);
  CHECK(run_cli(tmp, "smooth --help").code == 0);
  CHECK(run_cli(tmp, "eval --help").code == 0);

  const auto missing = run_cli(
      tmp, "smooth --corpus " + tmp.path("absent.jsonl") + " --vocab " +
               files.vocab + " --sx 1 --sy 1 --out " + tmp.path("x.tss"));
  CHECK(missing.code == 1);
  CHECK(!missing.err.empty());

  // Malformed data file: exit 1 and the message names the line.
  std::ofstream(tmp.path("bad.tsv")) << "0\tapple\n";
  CHECK(run_cli(tmp, "smooth --corpus " + files.corpus + " --vocab " +
                         tmp.path("bad.tsv") +
                         " --sx 1 --sy 1 --out " + tmp.path("x.tss"))
            .code == 1);
}

TEST_CASE("identical invocations produce byte-identical files") {
  Scratch tmp;
  NewsFiles files(tmp);
  const auto out1 = tmp.path("a.tss");
  const auto out2 = tmp.path("b.tss");
  const auto base = "smooth --corpus " + files.corpus + " --vocab " +
                    files.vocab + " --graph " + files.graph +
                    " --sx 2 --sy 2" + files.tokenizer_flags();

  REQUIRE(run_cli(tmp, base + " --out " + out1).code == 0);
  REQUIRE(run_cli(tmp, base + " --out " + out2 + " --threads 4").code == 0);
  CHECK(slurp(out1) == slurp(out2));

  // The worker cap can also arrive through the environment.
  const auto out3 = tmp.path("c.tss");
  REQUIRE(run_cli(tmp, base + " --out " + out3, "SCALESPACE_THREADS=3 ")
              .code == 0);
  CHECK(slurp(out1) == slurp(out3));
}

TEST_CASE("subcommands do not mutate their inputs") {
  Scratch tmp;
  NewsFiles files(tmp);
  const auto corpus_before = slurp(files.corpus);
  const auto vocab_before = slurp(files.vocab);
  const auto graph_before = slurp(files.graph);

  REQUIRE(run_cli(tmp, "keywords --corpus " + files.corpus + " --vocab " +
                           files.vocab + " --graph " + files.graph +
                           " --smin 0.5 --smax 8 --levels 5 --out " +
                           tmp.path("kw.jsonl") + files.tokenizer_flags())
              .code == 0);

  CHECK(slurp(files.corpus) == corpus_before);
  CHECK(slurp(files.vocab) == vocab_before);
  CHECK(slurp(files.graph) == graph_before);
}

TEST_CASE("build-vocab then build-graph round-trip through the library") {
  Scratch tmp;
  NewsFiles files(tmp);
  const auto vocab_out = tmp.path("built_vocab.tsv");
  const auto graph_out = tmp.path("built_graph.tsv");

  REQUIRE(run_cli(tmp, "build-vocab --corpus " + files.corpus + " --out " +
                           vocab_out + files.tokenizer_flags())
              .code == 0);
  const auto vocab = tss::load_vocabulary(vocab_out);
  CHECK(vocab.size() >= 7);
  CHECK(vocab.contains("new"));
  CHECK(vocab.df[std::size_t(vocab.position("new"))] == 1);

  REQUIRE(run_cli(tmp, "build-graph --corpus " + files.corpus + " --vocab " +
                           vocab_out + " --out " + graph_out +
                           " --window 3" + files.tokenizer_flags())
              .code == 0);
  const auto graph = tss::load_graph(graph_out, vocab);
  CHECK(graph.size == vocab.size());
  CHECK(!graph.edges.empty());
}

TEST_CASE("signal exports the raw one-hot matrix") {
  Scratch tmp;
  NewsFiles files(tmp);
  const auto out = tmp.path("signal.tss");
  REQUIRE(run_cli(tmp, "signal --corpus " + files.corpus + " --vocab " +
                           files.vocab + " --signal word2d --out " + out +
                           files.tokenizer_flags())
              .code == 0);
  const auto sig = tss::load_signal(out);
  CHECK(sig.values.rows == 10);
  CHECK(sig.values.cols == 12);
  const auto expected = fixture::news_position_words();
  for (std::size_t x = 0; x < sig.values.rows; ++x)
    for (std::size_t y = 0; y < sig.values.cols; ++y)
      CHECK(sig.values.at(x, y) ==
            (y == std::size_t(expected[x]) ? 1.0 : 0.0));
}

TEST_CASE("stack exports one matrix file per ladder level") {
  Scratch tmp;
  NewsFiles files(tmp);
  REQUIRE(run_cli(tmp, "stack --corpus " + files.corpus + " --vocab " +
                           files.vocab + " --graph " + files.graph +
                           " --smin 1 --smax 4 --levels 3 --out-prefix " +
                           tmp.path("lvl_") + files.tokenizer_flags())
              .code == 0);
  // Zero level plus three ladder levels.
  for (int i = 0; i < 4; ++i) {
    const auto m = tss::load_matrix(tmp.path("lvl_" + std::to_string(i) +
                                             ".tss"));
    CHECK(m.rows == 10);
    CHECK(m.cols == 12);
  }
  CHECK(!fs::exists(tmp.path("lvl_4.tss")));
}

TEST_CASE("keywords and segment emit loadable trees") {
  Scratch tmp;
  NewsFiles files(tmp);
  const auto kw_out = tmp.path("kw.jsonl");
  REQUIRE(run_cli(tmp, "keywords --corpus " + files.corpus + " --vocab " +
                           files.vocab + " --graph " + files.graph +
                           " --smin 0.5 --smax 8 --levels 5 --out " + kw_out +
                           files.tokenizer_flags())
              .code == 0);
  const auto kw = tss::load_keyword_tree(kw_out);
  CHECK(!kw.nodes.empty());
  for (std::size_t i = 1; i < kw.nodes.size(); ++i)
    CHECK(kw.nodes[i - 1].emergence >= kw.nodes[i].emergence);

  tss::Document doc;
  doc.id = "blocks";
  doc.text =
      "flour oven sugar . dough oven flour . sugar dough oven . "
      "engine brake wheel . road tire engine . brake road wheel .";
  const auto seg_corpus = tmp.path("seg.jsonl");
  tss::save_corpus({doc}, seg_corpus);
  const auto seg_vocab = tmp.path("seg_vocab.tsv");
  REQUIRE(run_cli(tmp, "build-vocab --corpus " + seg_corpus + " --out " +
                           seg_vocab)
              .code == 0);
  const auto seg_out = tmp.path("seg_tree.jsonl");
  REQUIRE(run_cli(tmp, "segment --corpus " + seg_corpus + " --vocab " +
                           seg_vocab +
                           " --smin 0.5 --smax 4 --levels 4 --out " + seg_out)
              .code == 0);
  const auto tree = tss::load_segment_tree(seg_out);
  CHECK(tree.sentence_count == 6);
  REQUIRE(!tree.boundaries.empty());
  // The junction sits between sentences 2 and 3.
  CHECK(tree.boundaries.front().x >= 2);
  CHECK(tree.boundaries.front().x <= 3);
}

TEST_CASE("eval prints MAP=0.8333 on the hand fixture") {
  Scratch tmp;
  const auto qrels_path = tmp.path("qrels.txt");
  const auto run_path = tmp.path("run.txt");

  tss::Qrels qrels;
  qrels["q1"]["dA"] = 1;
  qrels["q1"]["dB"] = 0;
  qrels["q1"]["dC"] = 1;
  tss::save_qrels(qrels, qrels_path);
  tss::save_run({{"q1", "dA", 1, 0.9, "t"},
                 {"q1", "dB", 2, 0.5, "t"},
                 {"q1", "dC", 3, 0.1, "t"}},
                run_path);

  const auto res =
      run_cli(tmp, "eval --qrels " + qrels_path + " --run " + run_path);
  REQUIRE(res.code == 0);
  CHECK(res.out.find("MAP=0.8333") != std::string::npos);
  CHECK(res.out.find("P@5=0.4000") != std::string::npos);
  CHECK(res.out.find("P@10=0.2000") != std::string::npos);

  CHECK(run_cli(tmp, "eval").code == 2);
}

TEST_CASE("eval scores classification label files") {
  Scratch tmp;
  std::ofstream(tmp.path("gold.tsv")) << "a\tx\nb\tx\nc\ty\nd\ty\n";
  std::ofstream(tmp.path("pred.tsv")) << "a\tx\nb\ty\nc\ty\nd\ty\n";
  const auto res = run_cli(tmp, "eval --gold " + tmp.path("gold.tsv") +
                                    " --pred " + tmp.path("pred.tsv"));
  REQUIRE(res.code == 0);
  CHECK(res.out.find("microF1=0.7500") != std::string::npos);
}

TEST_CASE("train, retrieve, and eval close the loop on a toy collection") {
  Scratch tmp;
  std::vector<tss::Document> docs(3);
  docs[0].id = "d1";
  docs[0].text =
      "flour oven sugar dough . oven dough flour sugar . bake bread flour .";
  docs[1].id = "d2";
  docs[1].text =
      "engine brake wheel road . tire road engine brake . drive fast road .";
  docs[2].id = "d3";
  docs[2].text = "flour sugar bake . oven bread dough . road wheel engine .";
  std::vector<tss::Document> queries(2);
  queries[0].id = "q1";
  queries[0].text = "flour oven sugar dough bake";
  queries[1].id = "q2";
  queries[1].text = "engine brake wheel road drive";
  tss::Qrels qrels;
  qrels["q1"]["d1"] = 2;
  qrels["q1"]["d3"] = 1;
  qrels["q1"]["d2"] = 0;
  qrels["q2"]["d2"] = 2;
  qrels["q2"]["d3"] = 1;
  qrels["q2"]["d1"] = 0;

  const auto docs_path = tmp.path("docs.jsonl");
  const auto queries_path = tmp.path("queries.jsonl");
  const auto qrels_path = tmp.path("qrels.txt");
  tss::save_corpus(docs, docs_path);
  tss::save_corpus(queries, queries_path);
  tss::save_qrels(qrels, qrels_path);

  const auto vocab_path = tmp.path("vocab.tsv");
  const auto graph_path = tmp.path("graph.tsv");
  REQUIRE(run_cli(tmp, "build-vocab --corpus " + docs_path + " --out " +
                           vocab_path)
              .code == 0);
  REQUIRE(run_cli(tmp, "build-graph --corpus " + docs_path + " --vocab " +
                           vocab_path + " --out " + graph_path)
              .code == 0);

  const auto dist_path = tmp.path("dist.tsv");
  REQUIRE(run_cli(tmp, "silm-train --docs " + docs_path + " --queries " +
                           queries_path + " --vocab " + vocab_path +
                           " --graph " + graph_path + " --qrels " +
                           qrels_path +
                           " --smin 0.5 --smax 8 --levels 5 --out " +
                           dist_path)
              .code == 0);
  const auto dist = tss::load_scale_distribution(dist_path);
  CHECK(dist.weights.size() == 6);

  const auto run_path = tmp.path("run.txt");
  REQUIRE(run_cli(tmp, "retrieve --docs " + docs_path + " --queries " +
                           queries_path + " --vocab " + vocab_path +
                           " --graph " + graph_path + " --dist " + dist_path +
                           " --out " + run_path)
              .code == 0);
  const auto rows = tss::load_run(run_path);
  CHECK(rows.size() == 6);

  const auto res =
      run_cli(tmp, "eval --qrels " + qrels_path + " --run " + run_path);
  REQUIRE(res.code == 0);
  CHECK(res.out.find("MAP=1.0000") != std::string::npos);

  // Kernel matrix over the same stacks: symmetric with unit-ish diagonal.
  const auto gram_path = tmp.path("gram.tsk");
  REQUIRE(run_cli(tmp, "kernel-matrix --corpus " + docs_path + " --vocab " +
                           vocab_path + " --graph " + graph_path +
                           " --dist " + dist_path +
                           " --kernel js --out " + gram_path)
              .code == 0);
  const auto gram = tss::load_kernel_matrix(gram_path);
  REQUIRE(gram.ids.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(gram.values(i, i) == Catch::Approx(1.0).margin(1e-9));
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(gram.values(i, j) == gram.values(j, i));
  }

  // Passage search against the first document.
  const auto pass_path = tmp.path("passages.jsonl");
  const auto pres = run_cli(
      tmp, "passages --docs " + docs_path + " --queries " + queries_path +
               " --vocab " + vocab_path + " --graph " + graph_path +
               " --dist " + dist_path + " --doc d1 --query q1 --window 4" +
               " --out " + pass_path);
  REQUIRE(pres.code == 0);
  CHECK(fs::exists(pass_path));
}
