// End-to-end acceptance harness for the scale-space text library. Each
// criterion prints one PASS/FAIL line; the process exits nonzero if any
// criterion fails. Checks run against independent oracles and synthetic
// corpora with frozen seeds, so every run is deterministic.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "helpers/fixtures.hpp"
#include "helpers/oracles.hpp"
#include "tss/tss.hpp"

namespace {

// Appends a failure reason; returns the condition so call sites can chain.
bool expect(bool ok, std::string& why, const std::string& msg) {
  if (!ok) {
    if (!why.empty()) why += "; ";
    why += msg;
  }
  return ok;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

tss::Matrix column_signal(const std::vector<double>& v) {
  tss::Matrix m(v.size(), 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
  return m;
}

// ---------------------------------------------------------------------------
// 1. Kernel laws: semigroup, unit mass, causality.
// ---------------------------------------------------------------------------
bool kernel_laws(std::string& why) {
  const std::array<double, 4> scales = {0.5, 1.0, 2.0, 4.0};
  for (double s1 : scales)
    for (double s2 : scales) {
      const auto a = tss::discrete_gaussian_kernel(s1, 1e-14);
      const auto b = tss::discrete_gaussian_kernel(s2, 1e-14);
      const auto c = tss::discrete_gaussian_kernel(s1 + s2, 1e-14);
      const auto ab = oracle::convolve_kernels(a, b);
      double worst = 0.0;
      for (int d = -c.center_offset; d <= c.center_offset; ++d)
        worst = std::max(worst, std::fabs(ab.tap(d) - c.tap(d)));
      expect(worst < 1e-10, why,
             "semigroup gap " + fmt(worst) + " at scales " + fmt(s1) + "+" +
                 fmt(s2));
    }

  for (double s : {0.5, 1.0, 2.0, 4.0, 8.0, 32.0}) {
    for (const auto& k :
         {tss::sampled_gaussian_kernel(s), tss::discrete_gaussian_kernel(s),
          tss::poisson_kernel(s)}) {
      double mass = 0.0;
      for (double t : k.taps) mass += t;
      expect(std::fabs(mass - 1.0) <= 1e-12, why,
             "kernel mass " + fmt(mass) + " at scale " + fmt(s));
    }
  }

  for (double s : {0.5, 1.0, 7.0, 40.0}) {
    const auto p = tss::poisson_kernel(s);
    expect(p.min_displacement() == 0 && p.tap(-1) == 0.0, why,
           "one-sided kernel reads past positions at scale " + fmt(s));
  }
  return why.empty();
}

// ---------------------------------------------------------------------------
// 2. Smoothing agrees with explicit heat-equation time stepping.
// ---------------------------------------------------------------------------
std::vector<double> euler_heat(std::vector<double> u, double s, double dt) {
  const std::size_t n = u.size();
  const auto steps = (std::size_t)std::llround(s / dt);
  std::vector<double> next(n, 0.0);
  for (std::size_t step = 0; step < steps; ++step) {
    for (std::size_t i = 0; i < n; ++i) {
      const double left = i == 0 ? u[0] : u[i - 1];
      const double right = i + 1 == n ? u[n - 1] : u[i + 1];
      next[i] = u[i] + dt * 0.5 * (left - 2.0 * u[i] + right);
    }
    u.swap(next);
  }
  return u;
}

bool diffusion_agreement(std::string& why) {
  auto rng = fixture::make_rng(2024);
  const double s = 4.0;
  double worst = 0.0;
  for (int round = 0; round < 20; ++round) {
    const auto sig = fixture::random_signal(128, rng);
    const auto reference = euler_heat(sig, s, 0.001);
    const auto smoothed = tss::convolve_1d(
        sig, tss::discrete_gaussian_kernel(s), tss::BoundaryMode::Mirror);
    for (std::size_t i = 16; i < 112; ++i)
      worst = std::max(worst,
                       std::fabs(smoothed[i] - reference[i]) /
                           std::fabs(reference[i]));
  }
  expect(worst < 0.02, why,
         "max interior relative error " + fmt(worst) + " vs 0.02");
  return why.empty();
}

// ---------------------------------------------------------------------------
// 3. Iterative graph smoothing equals a dense direct solve.
// ---------------------------------------------------------------------------
tss::SemanticGraph random_graph(std::size_t n, double edge_prob,
                                std::mt19937& rng) {
  tss::SemanticGraph g(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> w(0.1, 2.0);
  std::uniform_real_distribution<double> m(0.5, 2.0);
  for (std::size_t y = 0; y + 1 < n; ++y) g.add_edge(y, y + 1, w(rng));
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t z = y + 2; z < n; ++z)
      if (u(rng) < edge_prob) g.add_edge(y, z, w(rng));
  for (std::size_t y = 0; y < n; ++y) g.set_node_weight(y, m(rng));
  return g;
}

std::vector<double> dense_smooth(const std::vector<double>& f,
                                 const tss::SemanticGraph& g, double lambda) {
  const std::size_t n = f.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  std::vector<double> b(n, 0.0);
  for (std::size_t y = 0; y < n; ++y) {
    a[y][y] = (1.0 - lambda) * g.node_weights[y];
    b[y] = (1.0 - lambda) * g.node_weights[y] * f[y];
  }
  for (const auto& [key, w] : g.edges) {
    a[key.first][key.first] += 2.0 * lambda * w;
    a[key.second][key.second] += 2.0 * lambda * w;
    a[key.first][key.second] -= 2.0 * lambda * w;
    a[key.second][key.first] -= 2.0 * lambda * w;
  }
  return oracle::dense_solve(std::move(a), std::move(b));
}

tss::Signal1D semantic_vector(std::vector<double> v) {
  tss::Signal1D s;
  s.values = std::move(v);
  s.domain = tss::SignalDomain::Semantic;
  return s;
}

bool graph_solver_agreement(std::string& why) {
  auto rng = fixture::make_rng(33);
  std::uniform_int_distribution<std::size_t> pick_n(2, 20);
  std::uniform_real_distribution<double> pick_lambda(0.05, 0.95);
  double worst = 0.0;
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = pick_n(rng);
    const auto g = random_graph(n, 0.3, rng);
    const auto f = fixture::random_signal(n, rng, -1.0, 1.0);
    const double lambda = pick_lambda(rng);
    const auto got = tss::graph_smooth(semantic_vector(f), g, lambda);
    const auto ref = dense_smooth(f, g, lambda);
    for (std::size_t y = 0; y < n; ++y)
      worst = std::max(worst, std::fabs(got.values[y] - ref[y]));

    const auto id = tss::graph_smooth(semantic_vector(f), g, 0.0);
    expect(id.values == f, why, "zero-strength smoothing is not the identity");

    double num = 0.0, den = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      num += g.node_weights[y] * f[y];
      den += g.node_weights[y];
    }
    const auto near = tss::graph_smooth(semantic_vector(f), g, 0.999);
    for (double v : near.values)
      expect(std::fabs(v - num / den) < 1e-2, why,
             "near-limit smoothing off the weighted mean by " +
                 fmt(std::fabs(v - num / den)));
    if (!why.empty()) return false;
  }
  expect(worst <= 1e-8, why,
         "iterative/dense gap " + fmt(worst) + " vs 1e-8");
  return why.empty();
}

// ---------------------------------------------------------------------------
// 4. Smoothing never increases the interior extrema count.
// ---------------------------------------------------------------------------
bool extrema_monotonicity(std::string& why) {
  auto rng = fixture::make_rng(4242);
  const auto ladder = tss::build_scale_ladder(0.5, 16.0, 6);
  tss::StackConfig cfg;
  cfg.boundary = tss::BoundaryMode::Mirror;
  int violations = 0;
  for (int round = 0; round < 100; ++round) {
    const auto sig = fixture::random_signed_signal(256, rng);
    const auto stack = tss::build_stack(column_signal(sig), ladder,
                                        tss::SemanticSmoother(), cfg);
    std::size_t prev = tss::detect_extrema(stack.level(0).values).size();
    for (std::size_t i = 1; i < stack.size(); ++i) {
      const std::size_t cur =
          tss::detect_extrema(stack.level(i).values).size();
      if (cur > prev) ++violations;
      prev = cur;
    }
  }
  expect(violations == 0, why,
         std::to_string(violations) + " extrema-count increases across 100 "
                                      "signals");
  return why.empty();
}

// ---------------------------------------------------------------------------
// 5. Closed-form scale weights attain the grid-search optimum.
// ---------------------------------------------------------------------------
bool weight_optimality(std::string& why) {
  auto rng = fixture::make_rng(23);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_m(2, 4);
  std::uniform_int_distribution<std::size_t> pick_rows(3, 8);
  int evaluated = 0;
  for (int trial = 0; trial < 200 && evaluated < 25; ++trial) {
    const std::size_t m = pick_m(rng);
    const std::size_t rows = pick_rows(rng);
    tss::MarginTable table;
    table.ladder = tss::build_scale_ladder(1.0, double(1 << m), m);
    table.values = tss::Matrix(rows, m, 0.0);
    for (double& v : table.values.data) v = dist(rng);

    tss::ScaleDistribution q;
    try {
      q = tss::learn_scale_distribution(table);
    } catch (const tss::NoPositiveMargin&) {
      continue;  // all mean margins nonpositive: nothing to optimize
    }
    ++evaluated;

    const auto mean = table.column_means();
    double norm_sq = 0.0, objective = 0.0, pos_norm = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      norm_sq += q.weights[j] * q.weights[j];
      objective += q.weights[j] * mean[j];
      const double p = std::max(mean[j], 0.0);
      pos_norm += p * p;
    }
    pos_norm = std::sqrt(pos_norm);
    expect(std::fabs(std::sqrt(norm_sq) - 1.0) <= 1e-12, why,
           "weights are not unit-norm");
    for (std::size_t j = 0; j < m; ++j) {
      if (mean[j] <= 0.0)
        expect(q.weights[j] == 0.0, why,
               "nonpositive mean margin kept weight " + fmt(q.weights[j]));
      else
        expect(std::fabs(q.weights[j] * pos_norm - mean[j]) <= 1e-12, why,
               "weight deviates from the positive part");
    }

    const double grid = oracle::grid_best_margin(mean);
    expect(objective >= grid - 1e-9 && std::fabs(objective - grid) <= 1e-3,
           why,
           "objective " + fmt(objective) + " vs grid optimum " + fmt(grid));
    if (!why.empty()) return false;
  }
  expect(evaluated == 25, why, "only " + std::to_string(evaluated) +
                                   " usable margin tables out of 25");
  return why.empty();
}

// ---------------------------------------------------------------------------
// 6. Joint smoothing of the worked news sentence.
// ---------------------------------------------------------------------------
bool joint_smoothing_example(std::string& why) {
  tss::Document doc;
  doc.id = "news";
  doc.text = fixture::news_sentence();
  const auto vocab = fixture::news_vocabulary();
  tss::index_document(doc, vocab, fixture::news_tokenizer());

  tss::SemanticGraph graph(vocab.size());
  for (const auto& [a, b, w] : fixture::news_graph_edges())
    graph.add_edge((std::size_t)vocab.position(a),
                   (std::size_t)vocab.position(b), w);
  const tss::SemanticSmoother smoother(graph,
                                       tss::SemanticMode::DistanceKernel);

  const auto sig = tss::word2d_signal(doc, vocab);
  const auto expected = fixture::news_position_words();
  std::size_t iphone_pos = 0;
  for (std::size_t x = 0; x < expected.size(); ++x)
    if (expected[x] == vocab.position("iphone")) iphone_pos = x;

  auto smooth_at = [&](double s) {
    tss::ScaleLadder ladder;
    ladder.scales = {s};
    tss::StackConfig cfg;
    cfg.include_zero = false;
    cfg.semantic_scales = {s};
    return tss::build_stack(sig.values, ladder, smoother, cfg).level(0).values;
  };

  const auto fine = smooth_at(1.0);
  expect(fine.rows == 10 && fine.cols == 12, why,
         "smoothed signal is not 10 positions by 12 words");
  const double apple_mass =
      fine(iphone_pos, (std::size_t)vocab.position("apple"));
  expect(apple_mass > 0.0, why,
         "no associated-word mass at the mention position (got " +
             fmt(apple_mass) + ")");

  const auto coarse = smooth_at(64.0);
  double lo = 1e300, hi = -1e300;
  for (double v : coarse.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  expect(lo > 0.0 && hi / lo < 2.0, why,
         "coarse smoothing max/min ratio " + fmt(hi / lo) + " vs 2");
  return why.empty();
}

// ---------------------------------------------------------------------------
// 7. Scale-weighted classification trend on planted word patterns.
// ---------------------------------------------------------------------------
const std::array<const char*, 6> kFillers = {"stone", "cloud", "river",
                                             "field", "night", "day"};
const std::array<const char*, 4> kPattern = {"mercury", "venus", "earth",
                                             "mars"};

// Two classes share unigram statistics for n > 1 and differ only in how the
// pattern words are laid out: contiguous n-grams versus the same words
// scattered apart. Fillers are drawn at random; plant positions are fixed.
std::vector<tss::Document> planted_pattern_corpus(int n, std::size_t per_class,
                                                  unsigned seed) {
  const std::size_t L = n == 4 ? 48 : 32;
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> pick_filler(0, 5);
  std::vector<tss::Document> docs;
  for (int label = 0; label < 2; ++label) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<std::string> tok(L);
      for (auto& t : tok) t = kFillers[(std::size_t)pick_filler(rng)];
      auto place = [&](std::size_t x, int w) {
        tok[std::min(x, L - 1)] = kPattern[(std::size_t)w];
      };
      if (n == 1) {
        for (std::size_t a : {4u, 12u, 20u, 28u})
          place(a, label == 0 ? 0 : 1);
      } else if (n == 2) {
        if (label == 0) {
          for (std::size_t a : {6u, 16u, 26u}) {
            place(a, 0);
            place(a + 1, 1);
          }
        } else {
          for (std::size_t a : {6u, 16u, 26u}) place(a, 0);
          for (std::size_t a : {11u, 21u, 30u}) place(a, 1);
        }
      } else {
        if (label == 0) {
          for (std::size_t a : {10u, 30u})
            for (int w = 0; w < 4; ++w) place(a + (std::size_t)w, w);
        } else {
          const std::size_t slots[8] = {3, 9, 15, 21, 27, 33, 39, 45};
          for (int k = 0; k < 8; ++k) place(slots[k], k % 4);
        }
      }
      std::string text;
      for (const auto& t : tok) {
        text += t;
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

bool classification_trend(std::string& why) {
  const auto kind = tss::KernelKind::rbf(8.0);
  for (int n : {1, 2, 4}) {
    auto corpus = planted_pattern_corpus(n, 90, 100 + (unsigned)n);
    tss::TokenizerConfig tok;
    auto vocab = tss::build_vocabulary(corpus, tok);
    tss::index_corpus(corpus, vocab, tok);
    const auto graph = tss::build_pmi_graph(corpus, vocab, 3, 0.0);
    auto ladder = tss::build_scale_ladder(0.25, 1024.0, 7);
    ladder.includes_zero = true;
    const tss::SemanticSmoother smoother(graph,
                                         tss::SemanticMode::DistanceKernel);
    const tss::StackConfig cfg;

    std::vector<tss::ScaledSignal> sigs;
    std::vector<int> labels;
    for (const auto& d : corpus) {
      sigs.push_back(tss::stack_signals(tss::build_stack(
          tss::word2d_signal(d, vocab), ladder, smoother, cfg)));
      labels.push_back(d.label == "alpha" ? 0 : 1);
    }

    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < sigs.size(); ++i)
      (i % 3 == 2 ? test : train).push_back(i);
    std::vector<tss::ScaledSignal> train_sigs;
    std::vector<int> train_labels, test_labels;
    for (auto i : train) {
      train_sigs.push_back(sigs[i]);
      train_labels.push_back(labels[i]);
    }
    for (auto i : test) test_labels.push_back(labels[i]);

    const auto table =
        tss::hit_miss_margins(train_sigs, train_labels, ladder, kind);
    const auto q = tss::to_probability(tss::learn_scale_distribution(table));

    // The pattern stays detectable until smoothing merges it with the
    // scattered layout: every level up to four times the squared width.
    const double cut = 4.0 * n * n;
    double in_band = 0.0;
    for (std::size_t l = 0; l < q.weights.size(); ++l)
      if (q.ladder.levels()[l] <= cut) in_band += q.weights[l];
    expect(in_band > 0.5, why,
           "n=" + std::to_string(n) + ": only " + fmt(in_band) +
               " of the weight mass lies at scales <= " + fmt(cut));

    auto kernel_of = [&](std::size_t a, std::size_t b, int level) {
      return level < 0 ? tss::sitk(sigs[a], sigs[b], q, kind)
                       : tss::single_scale_kernel(sigs[a][(std::size_t)level],
                                                  sigs[b][(std::size_t)level],
                                                  kind);
    };
    auto f1_at = [&](int level) {
      tss::Matrix gram(train.size(), train.size(), 0.0);
      for (std::size_t a = 0; a < train.size(); ++a)
        for (std::size_t b = 0; b < train.size(); ++b)
          gram(a, b) = kernel_of(train[a], train[b], level);
      tss::Matrix cross(test.size(), train.size(), 0.0);
      for (std::size_t a = 0; a < test.size(); ++a)
        for (std::size_t b = 0; b < train.size(); ++b)
          cross(a, b) = kernel_of(test[a], train[b], level);
      tss::KernelPerceptron model(50);
      model.train(gram, train_labels);
      return tss::evaluate_classification(model.predict(cross), test_labels)
          .micro_f1;
    };
    double best_single = 0.0;
    for (std::size_t l = 0; l < ladder.level_count(); ++l)
      best_single = std::max(best_single, f1_at((int)l));
    const double mixed = f1_at(-1);
    expect(mixed >= best_single - 0.02, why,
           "n=" + std::to_string(n) + ": mixed-scale F1 " + fmt(mixed) +
               " vs best single-scale " + fmt(best_single));
  }
  return why.empty();
}

// ---------------------------------------------------------------------------
// 8. Scale-weighted retrieval trend with planted passages.
// ---------------------------------------------------------------------------
const std::array<std::array<const char*, 3>, 10> kTopics = {{
    {"violin", "tempo", "melody"},
    {"engine", "brake", "gear"},
    {"flour", "dough", "oven"},
    {"packet", "router", "socket"},
    {"anchor", "sail", "harbor"},
    {"glacier", "summit", "ridge"},
    {"pigment", "canvas", "easel"},
    {"verdict", "jury", "appeal"},
    {"orbit", "comet", "nebula"},
    {"kernel", "compiler", "linker"},
}};

bool retrieval_trend(std::string& why) {
  const std::array<const char*, 8> fillers = {"thing", "place", "time",
                                              "part",  "case",  "fact",
                                              "point", "group"};
  std::mt19937 rng(808);
  std::uniform_int_distribution<int> pick_filler(0, 7);
  std::uniform_int_distribution<int> pick_topic_word(0, 2);

  // Fifty documents; document i hides a five-token passage for topic i % 10
  // among fillers, plus scattered distractor words from other topics.
  const std::size_t L = 40, W = 5;
  std::vector<tss::Document> corpus;
  std::vector<std::size_t> planted(50);
  std::uniform_int_distribution<std::size_t> pick_start(3, L - W - 3);
  for (std::size_t i = 0; i < 50; ++i) {
    const std::size_t topic = i % 10;
    std::vector<std::string> tok(L);
    for (auto& t : tok) t = fillers[(std::size_t)pick_filler(rng)];
    const std::size_t b = pick_start(rng);
    planted[i] = b;
    for (std::size_t k = 0; k < W; ++k)
      tok[b + k] = kTopics[topic][(std::size_t)pick_topic_word(rng)];
    std::uniform_int_distribution<std::size_t> pick_pos(0, L - 1);
    std::uniform_int_distribution<std::size_t> pick_other(1, 9);
    for (int k = 0; k < 4; ++k) {
      std::size_t p = pick_pos(rng);
      while (p >= b && p < b + W) p = pick_pos(rng);
      const std::size_t other = (topic + pick_other(rng)) % 10;
      tok[p] = kTopics[other][(std::size_t)pick_topic_word(rng)];
    }
    std::string text;
    for (const auto& t : tok) {
      text += t;
      text += ' ';
    }
    text += '.';
    tss::Document d;
    d.id = "d" + std::to_string(i);
    d.text = text;
    corpus.push_back(std::move(d));
  }
  std::vector<tss::Document> queries;
  for (std::size_t t = 0; t < 10; ++t) {
    tss::Document q;
    q.id = "q" + std::to_string(t);
    q.text = std::string(kTopics[t][0]) + " " + kTopics[t][1] + " " +
             kTopics[t][2] + " .";
    queries.push_back(std::move(q));
  }

  std::vector<tss::Document> all = corpus;
  for (const auto& q : queries) all.push_back(q);
  tss::TokenizerConfig tok;
  auto vocab = tss::build_vocabulary(all, tok);
  tss::index_corpus(corpus, vocab, tok);
  tss::index_corpus(queries, vocab, tok);

  auto ladder = tss::build_scale_ladder(0.5, 32.0, 7);
  ladder.includes_zero = true;
  const tss::StackConfig cfg;
  const tss::SemanticSmoother identity;

  std::vector<tss::ScaledSignal> doc_sigs;
  std::vector<tss::ScaleSpaceStack> doc_stacks;
  for (const auto& d : corpus) {
    doc_stacks.push_back(tss::build_stack(tss::word2d_signal(d, vocab),
                                          ladder, identity, cfg));
    doc_sigs.push_back(tss::stack_signals(doc_stacks.back()));
  }
  std::vector<tss::ScaledSignal> query_sigs;
  for (const auto& q : queries)
    query_sigs.push_back(tss::stack_signals(tss::build_stack(
        tss::word2d_signal(q, vocab), ladder, identity, cfg)));

  tss::Qrels qrels;
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t i = 0; i < 50; ++i)
      qrels["q" + std::to_string(t)]["d" + std::to_string(i)] =
          (i % 10 == t) ? 1 : 0;

  // Scale weights come from the first five queries' judgments only.
  std::vector<tss::JudgedQuery> judged;
  for (std::size_t t = 0; t < 5; ++t) {
    tss::JudgedQuery jq;
    jq.query_id = "q" + std::to_string(t);
    jq.query = query_sigs[t];
    for (std::size_t i = 0; i < 50; ++i) {
      jq.doc_ids.push_back("d" + std::to_string(i));
      jq.docs.push_back(doc_sigs[i]);
      jq.grades.push_back(i % 10 == t ? 1 : 0);
    }
    judged.push_back(std::move(jq));
  }
  const auto q = tss::learn_scale_distribution(
      tss::pairwise_margins(judged, ladder));

  auto map_with = [&](const tss::ScaleDistribution& dist) {
    std::vector<tss::RankedList> run;
    for (std::size_t t = 0; t < 10; ++t) {
      std::vector<std::pair<double, std::string>> scored;
      for (std::size_t i = 0; i < 50; ++i)
        scored.push_back(
            {-tss::silm_relevance(query_sigs[t], doc_sigs[i], dist),
             "d" + std::to_string(i)});
      std::sort(scored.begin(), scored.end());
      tss::RankedList list;
      list.query_id = "q" + std::to_string(t);
      for (const auto& [s, id] : scored) list.docs.push_back(id);
      run.push_back(std::move(list));
    }
    return tss::evaluate_retrieval(run, qrels).map;
  };

  const double mixed_map = map_with(q);
  double best_single = 0.0;
  for (std::size_t l = 0; l < ladder.level_count(); ++l) {
    tss::ScaleDistribution spike;
    spike.ladder = ladder;
    spike.weights.assign(ladder.level_count(), 0.0);
    spike.weights[l] = 1.0;
    spike.norm = tss::WeightNorm::Probability;
    best_single = std::max(best_single, map_with(spike));
  }
  expect(mixed_map >= best_single - 0.02, why,
         "mixed-scale MAP " + fmt(mixed_map) + " vs best single-scale " +
             fmt(best_single));

  // Passage leg: the top window must overlap the planted passage, and match
  // the exhaustive argmax whenever an interest point lands within half a
  // window of it.
  int overlap = 0;
  for (std::size_t t = 0; t < 10; ++t) {
    const std::size_t doc = t;
    const auto passages =
        tss::passage_retrieve(query_sigs[t], doc_stacks[doc], q, W);
    if (passages.empty()) continue;
    const std::size_t b = planted[doc];
    if (passages[0].begin < b + W && passages[0].end > b) ++overlap;

    const std::size_t n = doc_stacks[doc].spatial_len();
    double best = -1e300;
    std::size_t best_b = 0;
    for (std::size_t s = 0; s + W <= n; ++s) {
      const auto part = tss::detail::slice_rows(doc_stacks[doc], s, W);
      const double sc = tss::silm_relevance(query_sigs[t], part, q);
      if (sc > best) {
        best = sc;
        best_b = s;
      }
    }
    const auto points = tss::detect_interest_points(doc_stacks[doc]);
    const double center = double(best_b) + double(W - 1) / 2.0;
    bool reachable = false;
    for (const auto& p : points)
      if (std::fabs(double(p.x) - center) <= double(W) / 2.0) reachable = true;
    if (reachable)
      expect(passages[0].begin == best_b, why,
             "query " + std::to_string(t) + ": top window starts at " +
                 std::to_string(passages[0].begin) +
                 " but the exhaustive optimum at " + std::to_string(best_b) +
                 " was reachable");
  }
  expect(overlap >= 8, why, "top passage overlapped the planted one for only " +
                                std::to_string(overlap) + "/10 queries");
  return why.empty();
}

// ---------------------------------------------------------------------------
// 9. Hierarchical segmentation of three-block documents.
// ---------------------------------------------------------------------------
bool segmentation_accuracy(std::string& why) {
  int localized = 0;
  for (unsigned i = 0; i < 50; ++i) {
    std::mt19937 rng(9000 + i);
    std::uniform_int_distribution<std::size_t> size(5, 8);
    const std::size_t n1 = size(rng), n2 = size(rng), n3 = size(rng);
    std::vector<tss::Document> corpus = {
        fixture::block_document({n1, n2, n3}, 7000 + i)};
    tss::TokenizerConfig tok;
    auto vocab = tss::build_vocabulary(corpus, tok);
    tss::index_corpus(corpus, vocab, tok);
    const auto ladder = tss::build_scale_ladder(0.5, 64.0, 8);
    const auto seg = tss::hierarchical_segment(corpus[0], vocab, ladder, 1.0);

    const long long b1 = (long long)n1, b2 = (long long)(n1 + n2);
    bool has1 = false, has2 = false;
    double best1 = -1e300, best2 = -1e300, max_spurious = -1e300;
    for (const auto& b : seg.boundaries) {
      const long long x = (long long)b.x;
      const bool near1 = std::llabs(x - b1) <= 1;
      const bool near2 = std::llabs(x - b2) <= 1;
      if (near1) {
        has1 = true;
        best1 = std::max(best1, b.persistence);
      }
      if (near2) {
        has2 = true;
        best2 = std::max(best2, b.persistence);
      }
      if (!near1 && !near2) max_spurious = std::max(max_spurious, b.persistence);
    }
    if (has1 && has2) ++localized;
    if (has1 && has2 && max_spurious > -1e300)
      expect(std::min(best1, best2) > max_spurious, why,
             "instance " + std::to_string(i) +
                 ": an off-junction contour persists at least as long (" +
                 fmt(max_spurious) + ") as a block boundary (" +
                 fmt(std::min(best1, best2)) + ")");
  }
  expect(localized >= 48, why,
         "both junctions found within one sentence in only " +
             std::to_string(localized) + "/50 instances");
  return why.empty();
}

// ---------------------------------------------------------------------------
// 10. Evaluation metrics equal independent oracles on hand fixtures.
// ---------------------------------------------------------------------------
bool metric_oracles(std::string& why) {
  // Two relevant documents ranked first and third: average precision 5/6.
  tss::Qrels qrels;
  qrels["q1"] = {{"dA", 1}, {"dB", 0}, {"dC", 1}};
  qrels["q2"] = {{"dA", 0}, {"dB", 0}};  // no relevant documents at all
  std::vector<tss::RankedList> run = {{"q1", {"dA", "dB", "dC"}},
                                      {"q2", {"dB", "dA"}}};
  const auto report = tss::evaluate_retrieval(run, qrels);

  const std::set<std::string> pos1 = {"dA", "dC"};
  const double ap1 = oracle::average_precision({"dA", "dB", "dC"}, pos1);
  expect(report.per_query_ap.at("q1") == ap1, why,
         "per-query average precision deviates from the oracle");
  expect(std::fabs(ap1 - 5.0 / 6.0) <= 1e-15, why,
         "hand fixture average precision is not 5/6");
  expect(report.per_query_ap.at("q2") == 0.0, why,
         "no-relevant query should score zero");
  expect(report.map == (ap1 + 0.0) / 2.0, why,
         "mean average precision is not the oracle mean");
  const double p5 = (oracle::precision_at({"dA", "dB", "dC"}, pos1, 5) +
                     oracle::precision_at({"dB", "dA"}, {}, 5)) /
                    2.0;
  const double p10 = (oracle::precision_at({"dA", "dB", "dC"}, pos1, 10) +
                      oracle::precision_at({"dB", "dA"}, {}, 10)) /
                     2.0;
  expect(report.p5 == p5, why, "precision at 5 deviates from the oracle");
  expect(report.p10 == p10, why, "precision at 10 deviates from the oracle");

  const std::vector<int> gold = {0, 0, 1, 1, 2, 2, 0, 1};
  const std::vector<int> pred = {0, 1, 1, 1, 2, 0, 0, 2};
  const auto cls = tss::evaluate_classification(pred, gold);
  const double f1 = oracle::micro_f1(gold, pred, {0, 1, 2});
  expect(cls.micro_f1 == f1, why, "micro-F1 deviates from the oracle");
  const auto perfect = tss::evaluate_classification(gold, gold);
  expect(perfect.micro_f1 == 1.0, why, "perfect predictions are not 1.0");
  return why.empty();
}

struct Criterion {
  const char* name;
  double budget_seconds;
  bool (*fn)(std::string&);
};

}  // namespace

int main() {
  const std::array<Criterion, 10> criteria = {{
      {"kernel laws (semigroup, unit mass, causality)", 1.0, kernel_laws},
      {"smoothing matches heat-equation time stepping", 5.0,
       diffusion_agreement},
      {"iterative graph smoothing matches a dense solve", 10.0,
       graph_solver_agreement},
      {"interior extrema never multiply with scale", 10.0,
       extrema_monotonicity},
      {"closed-form scale weights attain the grid optimum", 30.0,
       weight_optimality},
      {"joint smoothing of the worked news sentence", 1.0,
       joint_smoothing_example},
      {"scale-weighted classification trend", 120.0, classification_trend},
      {"scale-weighted retrieval trend", 120.0, retrieval_trend},
      {"hierarchical segmentation of topic blocks", 60.0,
       segmentation_accuracy},
      {"evaluation metrics equal independent oracles", 1.0, metric_oracles},
  }};

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    std::string why;
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = c.fn(why);
    } catch (const std::exception& e) {
      why = std::string("unexpected exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (ok && elapsed > c.budget_seconds) {
      ok = false;
      why = "exceeded the " + fmt(c.budget_seconds) + " s budget (" +
            fmt(elapsed) + " s)";
    }
    std::printf("%s — %2zu. %s (%.2f s)%s%s\n", ok ? "PASS" : "FAIL", i + 1,
                c.name, elapsed, why.empty() ? "" : ": ", why.c_str());
    if (!ok) ++failures;
  }
  if (failures > 0) {
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}
