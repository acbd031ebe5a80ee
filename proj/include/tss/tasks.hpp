#pragma once

// End-to-end pipelines on top of the smoothing stack: keyword hierarchies
// from tracked maxima, hierarchical text segmentation from the velocity of
// the smoothed sentence signal, passage retrieval around interest points,
// retrieval/classification metrics, and a small kernel perceptron used by
// the evaluation harnesses.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tss/error.hpp"
#include "tss/invariance.hpp"
#include "tss/matrix.hpp"
#include "tss/parallel.hpp"
#include "tss/scalespace.hpp"
#include "tss/semgraph.hpp"
#include "tss/signal.hpp"
#include "tss/textio.hpp"

namespace tss {

// --------------------------------------------------------------------------
// Keyword hierarchy
// --------------------------------------------------------------------------

struct KeywordNode {
  std::string word;
  std::size_t x = 0;        // word position of the tracked maximum
  double emergence = 0.0;   // scale at which the keyword becomes visible
  int parent = -1;          // index into KeywordTree::nodes, -1 for roots
};

/// Keywords ordered coarse-to-fine: the first node survives the longest
/// smoothing and is the document's dominant term.
struct KeywordTree {
  std::vector<KeywordNode> nodes;
};

struct KeywordConfig {
  StackConfig stack;                              // boundary, family, levels
  SemanticMode mode = SemanticMode::DistanceKernel;
  double lambda = 0.5;                            // solver-mode strength
};

/// Tracks the maxima of the word-level 2D signal through the smoothing
/// stack and reports one keyword per tracked maximum, ordered by emergence
/// scale descending. A word owning several maxima at the same tree depth is
/// reported once, keeping the earliest (coarsest) emergence.
inline KeywordTree keyword_hierarchy(const Document& doc,
                                     const Vocabulary& vocab,
                                     const SemanticGraph& graph,
                                     const ScaleLadder& ladder,
                                     const KeywordConfig& cfg = {}) {
  const Signal2D sig = word2d_signal(doc, vocab);
  const SemanticSmoother smoother(graph, cfg.mode, cfg.lambda);
  const auto stack = build_stack(sig, ladder, smoother, cfg.stack);
  // Keywords live on maxima, so the tree tracks maxima only; that keeps
  // every parent link between keyword-bearing chains.
  const auto tree = build_interval_tree(stack, +1);

  struct Raw {
    std::string word;
    std::size_t x;
    double emergence;
    int parent;  // index into raw
    int depth;
  };
  std::vector<Raw> raw;
  raw.reserve(tree.nodes.size());
  for (const auto& n : tree.nodes) {
    Raw r;
    r.word = vocab.words.at(n.y);
    r.x = n.x;
    r.emergence = n.s_end;
    r.parent = n.parent;
    r.depth = r.parent < 0 ? 0 : raw[std::size_t(r.parent)].depth + 1;
    raw.push_back(std::move(r));
  }

  // Deduplicate words within a depth; creation order puts the coarsest
  // (earliest-emerging) occurrence first.
  std::map<std::pair<int, std::string>, std::size_t> first_at;
  std::vector<int> remap(raw.size(), -1);
  std::vector<Raw> unique_nodes;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Raw r = raw[i];
    if (r.parent >= 0) r.parent = remap[std::size_t(r.parent)];
    const auto key = std::make_pair(r.depth, r.word);
    const auto it = first_at.find(key);
    if (it != first_at.end()) {
      remap[i] = int(it->second);
      continue;
    }
    remap[i] = int(unique_nodes.size());
    first_at.emplace(key, unique_nodes.size());
    unique_nodes.push_back(std::move(r));
  }

  // Coarse first; parents always precede their children because a child
  // never outlives its parent chain.
  std::vector<std::size_t> order(unique_nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return unique_nodes[a].emergence >
                            unique_nodes[b].emergence;
                   });
  std::vector<int> position(unique_nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = int(i);

  KeywordTree out;
  out.nodes.reserve(unique_nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Raw& r = unique_nodes[order[i]];
    KeywordNode node;
    node.word = r.word;
    node.x = r.x;
    node.emergence = r.emergence;
    node.parent = r.parent < 0 ? -1 : position[std::size_t(r.parent)];
    out.nodes.push_back(std::move(node));
  }
  return out;
}

// --------------------------------------------------------------------------
// Hierarchical segmentation
// --------------------------------------------------------------------------

struct SegmentBoundary {
  std::size_t x = 0;         // sentence index of the boundary
  double persistence = 0.0;  // scale span of the tracked contour
  int level = 0;             // persistence tier, 0 = most persistent
};

/// Boundaries ordered by persistence descending; `level` buckets them into
/// persistence tertiles (0 = sections, 1 = subsections, 2 = fine units).
struct SegmentTree {
  std::vector<SegmentBoundary> boundaries;
  std::size_t sentence_count = 0;
};

/// Per-level, per-position L2 norm over the semantic axis of a derivative
/// stack: the speed at which the smoothed signal changes along positions.
inline Matrix velocity_field(const ScaleSpaceStack& dstack) {
  Matrix v(dstack.size(), dstack.spatial_len(), 0.0);
  for (std::size_t i = 0; i < dstack.size(); ++i) {
    const Matrix& lvl = dstack.level(i).values;
    for (std::size_t x = 0; x < lvl.rows; ++x) {
      double acc = 0.0;
      for (std::size_t c = 0; c < lvl.cols; ++c) acc += lvl(x, c) * lvl(x, c);
      v(i, x) = std::sqrt(acc);
    }
  }
  return v;
}

/// Segments a document by tracking the local maxima of the sentence-signal
/// velocity coarse-to-fine down the ladder. Contours that survive to the
/// finest scale become boundaries; their persistence is the scale at which
/// the contour was created, and tiers are assigned by persistence rank.
/// The semantic axis is smoothed at the fixed scale `semantic_scale`.
inline SegmentTree hierarchical_segment(
    const Document& doc, const Vocabulary& vocab, const ScaleLadder& ladder,
    double semantic_scale = 1.0,
    const SemanticSmoother& smoother = SemanticSmoother()) {
  const Signal2D sig = sentence2d_signal(doc, vocab);
  if (sig.values.rows < 3)
    throw TooShort("segmentation needs at least three sentences");
  if (ladder.scales.size() < 2)
    throw TooShort("segmentation needs at least two ladder levels");

  const std::vector<double> sem(ladder.scales.size(), semantic_scale);
  const auto dstack = derivative_stack(sig.values, ladder, 1, smoother,
                                       BoundaryMode::Mirror, sem);
  const Matrix v = velocity_field(dstack);

  // An exactly homogeneous signal leaves only rounding residue in the
  // derivative; anything at that level is not a boundary.
  double input_mag = 0.0;
  for (double val : sig.values.data) input_mag = std::max(input_mag, std::fabs(val));
  const double floor = 1e-9 * input_mag;

  ScaleSpaceStack vstack;
  for (std::size_t i = 0; i < dstack.size(); ++i) {
    StackLevel lvl;
    lvl.s_x = dstack.level(i).s_x;
    lvl.s_y = dstack.level(i).s_y;
    lvl.values = Matrix(v.cols, 1, 0.0);
    for (std::size_t x = 0; x < v.cols; ++x) lvl.values(x, 0) = v(i, x);
    vstack.levels.push_back(std::move(lvl));
  }
  // Boundaries are velocity peaks, so only maxima chains are tracked.
  const auto tree = build_interval_tree(vstack, +1);
  const double s_fine = ladder.scales.front();

  SegmentTree out;
  out.sentence_count = sig.values.rows;
  for (const auto& n : tree.nodes) {
    if (n.s_emerge != s_fine) continue;      // must track back to scale zero
    if (!(v(0, n.x) > floor)) continue;      // rounding residue, not contrast
    SegmentBoundary b;
    b.x = n.x;
    b.persistence = n.s_end;
    out.boundaries.push_back(b);
  }
  std::sort(out.boundaries.begin(), out.boundaries.end(),
            [](const SegmentBoundary& a, const SegmentBoundary& b) {
              if (a.persistence != b.persistence)
                return a.persistence > b.persistence;
              return a.x < b.x;
            });
  const std::size_t n = out.boundaries.size();
  for (std::size_t i = 0; i < n; ++i)
    out.boundaries[i].level = int((i * 3) / n);
  return out;
}

// --------------------------------------------------------------------------
// Passage retrieval
// --------------------------------------------------------------------------

/// Half-open sentence span [begin, end) with its relevance score.
struct Passage {
  std::size_t begin = 0;
  std::size_t end = 0;
  double score = 0.0;
};

namespace detail {

inline ScaledSignal slice_rows(const ScaleSpaceStack& stack, std::size_t begin,
                               std::size_t count) {
  ScaledSignal out;
  out.reserve(stack.size());
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const Matrix& lvl = stack.level(i).values;
    Matrix part(count, lvl.cols, 0.0);
    for (std::size_t r = 0; r < count; ++r)
      for (std::size_t c = 0; c < lvl.cols; ++c)
        part(r, c) = lvl(begin + r, c);
    out.push_back(std::move(part));
  }
  return out;
}

}  // namespace detail

/// Ranks windows of the document around its interest points by their
/// scale-weighted relevance to the query. Every window whose center lies
/// within half a window of an interest point competes; overlapping winners
/// collapse onto the best-scoring one. Result is sorted by score descending.
inline std::vector<Passage> passage_retrieve(
    const ScaledSignal& query, const ScaleSpaceStack& doc_stack,
    const ScaleDistribution& weights, std::size_t window = 3,
    const InterestPointConfig& ip_cfg = {}) {
  const std::size_t n = doc_stack.spatial_len();
  if (window == 0) throw InvalidRange("passage window must be positive");
  if (n <= window)
    throw TooShort("document must be longer than the passage window");
  if (query.size() != doc_stack.size())
    throw DimensionMismatch("query levels and document stack disagree");

  const auto points = detect_interest_points(doc_stack, ip_cfg);
  if (points.empty()) return {};

  // Candidate window starts: centers within half a window of some point.
  const double center_off = double(window - 1) / 2.0;
  const double reach = double(window) / 2.0;
  const std::size_t last_start = n - window;
  std::set<std::size_t> starts;
  for (const auto& p : points) {
    const double lo = double(p.x) - reach - center_off;
    const double hi = double(p.x) + reach - center_off;
    const std::size_t b0 =
        std::size_t(std::max(0.0, std::ceil(lo)));
    const std::size_t b1 = std::size_t(
        std::clamp(std::floor(hi), 0.0, double(last_start)));
    for (std::size_t b = std::min(b0, last_start); b <= b1; ++b)
      starts.insert(b);
  }

  const std::vector<std::size_t> start_list(starts.begin(), starts.end());
  std::vector<double> scores(start_list.size(), 0.0);
  parallel_for(start_list.size(), [&](std::size_t i) {
    const auto part = detail::slice_rows(doc_stack, start_list[i], window);
    scores[i] = silm_relevance(query, part, weights);
  });

  std::vector<Passage> candidates;
  candidates.reserve(start_list.size());
  for (std::size_t i = 0; i < start_list.size(); ++i)
    candidates.push_back({start_list[i], start_list[i] + window, scores[i]});
  std::sort(candidates.begin(), candidates.end(),
            [](const Passage& a, const Passage& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.begin < b.begin;
            });

  std::vector<Passage> kept;
  for (const auto& c : candidates) {
    bool overlaps = false;
    for (const auto& k : kept)
      if (c.begin < k.end && k.begin < c.end) {
        overlaps = true;
        break;
      }
    if (!overlaps) kept.push_back(c);
  }
  return kept;
}

// --------------------------------------------------------------------------
// Evaluation
// --------------------------------------------------------------------------

/// One query's retrieval output, best document first.
struct RankedList {
  std::string query_id;
  std::vector<std::string> docs;
};

/// query id -> document id -> relevance grade (> 0 means relevant).
using Qrels = std::map<std::string, std::map<std::string, int>>;

struct EvalReport {
  double micro_f1 = 0.0;
  double map = 0.0;
  double p5 = 0.0;
  double p10 = 0.0;
  std::map<std::string, double> per_query_ap;
  std::map<std::string, double> per_class_f1;
};

namespace detail {

inline double precision_at(const std::vector<std::string>& docs,
                           const std::map<std::string, int>& judged,
                           std::size_t k) {
  std::size_t rel = 0;
  for (std::size_t i = 0; i < docs.size() && i < k; ++i) {
    const auto it = judged.find(docs[i]);
    if (it != judged.end() && it->second > 0) ++rel;
  }
  return double(rel) / double(k);
}

}  // namespace detail

/// Mean average precision plus precision at 5 and 10 over a run. Every run
/// query must carry judgments; queries whose judgments list no relevant
/// document contribute an average precision of zero.
inline EvalReport evaluate_retrieval(const std::vector<RankedList>& run,
                                     const Qrels& qrels) {
  if (run.empty()) throw MissingJudgments("run contains no queries");
  EvalReport report;
  for (const auto& list : run) {
    const auto it = qrels.find(list.query_id);
    if (it == qrels.end())
      throw MissingJudgments("no judgments for query '" + list.query_id +
                             "'");
    const auto& judged = it->second;
    std::size_t total_rel = 0;
    for (const auto& [doc, grade] : judged)
      if (grade > 0) ++total_rel;

    double ap = 0.0;
    if (total_rel > 0) {
      std::size_t seen_rel = 0;
      for (std::size_t rank = 0; rank < list.docs.size(); ++rank) {
        const auto jt = judged.find(list.docs[rank]);
        if (jt == judged.end() || jt->second <= 0) continue;
        ++seen_rel;
        ap += double(seen_rel) / double(rank + 1);
      }
      ap /= double(total_rel);
    }
    report.per_query_ap[list.query_id] = ap;
    report.map += ap;
    report.p5 += detail::precision_at(list.docs, judged, 5);
    report.p10 += detail::precision_at(list.docs, judged, 10);
  }
  report.map /= double(run.size());
  report.p5 /= double(run.size());
  report.p10 /= double(run.size());
  return report;
}

/// Micro-averaged F1 over one-vs-all decisions, plus per-class F1 scores.
inline EvalReport evaluate_classification(const std::vector<int>& predictions,
                                          const std::vector<int>& gold) {
  if (predictions.size() != gold.size())
    throw LabelMismatch("predictions and gold labels differ in length");
  if (predictions.empty())
    throw LabelMismatch("no instances to evaluate");

  std::map<int, std::size_t> tp, fp, fn;
  std::set<int> classes;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    classes.insert(predictions[i]);
    classes.insert(gold[i]);
    if (predictions[i] == gold[i]) {
      ++tp[gold[i]];
    } else {
      ++fp[predictions[i]];
      ++fn[gold[i]];
    }
  }

  EvalReport report;
  std::size_t sum_tp = 0, sum_fp = 0, sum_fn = 0;
  for (int c : classes) {
    const std::size_t ctp = tp.count(c) ? tp[c] : 0;
    const std::size_t cfp = fp.count(c) ? fp[c] : 0;
    const std::size_t cfn = fn.count(c) ? fn[c] : 0;
    sum_tp += ctp;
    sum_fp += cfp;
    sum_fn += cfn;
    const double denom = double(2 * ctp + cfp + cfn);
    report.per_class_f1[std::to_string(c)] =
        denom > 0.0 ? 2.0 * double(ctp) / denom : 0.0;
  }
  const double denom = double(2 * sum_tp + sum_fp + sum_fn);
  report.micro_f1 = denom > 0.0 ? 2.0 * double(sum_tp) / denom : 0.0;
  return report;
}

// --------------------------------------------------------------------------
// Kernel perceptron (one-vs-all, precomputed kernel)
// --------------------------------------------------------------------------

/// Mistake-driven one-vs-all perceptron over a precomputed kernel matrix.
/// Deterministic: fixed visiting order, ties resolved to the lowest class.
class KernelPerceptron {
 public:
  explicit KernelPerceptron(std::size_t epochs = 20) : epochs_(epochs) {}

  void train(const Matrix& gram, const std::vector<int>& labels) {
    if (gram.rows != gram.cols || gram.rows != labels.size())
      throw DimensionMismatch(
          "training needs a square kernel matrix with one label per row");
    int max_label = -1;
    for (int lbl : labels) {
      if (lbl < 0) throw LabelMismatch("class labels must be nonnegative");
      max_label = std::max(max_label, lbl);
    }
    classes_ = std::size_t(max_label + 1);
    labels_ = labels;
    const std::size_t n = labels.size();
    alpha_ = Matrix(classes_, n, 0.0);
    bias_.assign(classes_, 0.0);

    for (std::size_t epoch = 0; epoch < epochs_; ++epoch) {
      bool mistakes = false;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < classes_; ++c) {
          const double y = labels_[i] == int(c) ? 1.0 : -1.0;
          double score = bias_[c];
          for (std::size_t j = 0; j < n; ++j) {
            if (alpha_(c, j) == 0.0) continue;
            const double yj = labels_[j] == int(c) ? 1.0 : -1.0;
            score += alpha_(c, j) * yj * gram(j, i);
          }
          if (y * score <= 0.0) {
            alpha_(c, i) += 1.0;
            bias_[c] += y;
            mistakes = true;
          }
        }
      }
      if (!mistakes) break;
    }
  }

  /// Predicts one label per row of `cross`, whose columns are kernel values
  /// against the training instances in training order.
  std::vector<int> predict(const Matrix& cross) const {
    if (cross.cols != labels_.size())
      throw DimensionMismatch(
          "prediction needs kernel values against every training instance");
    std::vector<int> out(cross.rows, 0);
    parallel_for(cross.rows, [&](std::size_t t) {
      int best_class = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < classes_; ++c) {
        double score = bias_[c];
        for (std::size_t j = 0; j < labels_.size(); ++j) {
          if (alpha_(c, j) == 0.0) continue;
          const double yj = labels_[j] == int(c) ? 1.0 : -1.0;
          score += alpha_(c, j) * yj * cross(t, j);
        }
        if (score > best_score) {
          best_score = score;
          best_class = int(c);
        }
      }
      out[t] = best_class;
    });
    return out;
  }

  std::size_t classes() const { return classes_; }

 private:
  std::size_t epochs_;
  std::size_t classes_ = 0;
  std::vector<int> labels_;
  Matrix alpha_;
  std::vector<double> bias_;
};

}  // namespace tss
