#pragma once

// Multi-scale similarity. A document rendered at every rung of a scale
// ladder can be compared to another one scale at a time; this header
// provides the per-scale kernels and distances, the scale-dependent margin
// tables built from labeled or preference-judged corpora, the closed-form
// learner that turns mean margins into a weight per scale, and the two
// consumers of those weights: a scale-weighted kernel for classification
// and a scale-weighted relevance score for retrieval.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "tss/error.hpp"
#include "tss/matrix.hpp"
#include "tss/parallel.hpp"
#include "tss/scalespace.hpp"

namespace tss {

// --------------------------------------------------------------------------
// Kernel kinds
// --------------------------------------------------------------------------

enum class KernelFunc { Linear, Rbf, JensenShannon };

struct KernelKind {
  KernelFunc func = KernelFunc::Linear;
  double sigma = 1.0;  // RBF width; unused by the other kinds

  static KernelKind linear() { return {KernelFunc::Linear, 1.0}; }
  static KernelKind rbf(double sigma) {
    KernelKind k{KernelFunc::Rbf, sigma};
    k.validate();
    return k;
  }
  static KernelKind jensen_shannon() { return {KernelFunc::JensenShannon, 1.0}; }

  void validate() const {
    if (func == KernelFunc::Rbf && !(sigma > 0.0))
      throw InvalidRange("rbf kernel width must be positive");
  }
};

/// One document rendered at every scale of a shared ladder, finest first.
/// All documents entering a comparison must share matrix dimensions.
using ScaledSignal = std::vector<Matrix>;

/// Copies of every level of a smoothing stack, in stack order.
inline ScaledSignal stack_signals(const ScaleSpaceStack& stack) {
  ScaledSignal out;
  out.reserve(stack.size());
  for (const auto& lvl : stack.levels) out.push_back(lvl.values);
  return out;
}

namespace detail {

inline void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw DimensionMismatch(
        "kernel arguments must share dimensions, got " +
        std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
        std::to_string(b.rows) + "x" + std::to_string(b.cols));
}

inline double frobenius_inner(const Matrix& a, const Matrix& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

inline double squared_distance(const Matrix& a, const Matrix& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc;
}

/// Base-2 Jensen-Shannon divergence of the two signals viewed as
/// probability distributions over their cells; always in [0, 1].
inline double js_divergence(const Matrix& a, const Matrix& b) {
  double mass_a = 0.0, mass_b = 0.0;
  for (double v : a.data) mass_a += std::max(v, 0.0);
  for (double v : b.data) mass_b += std::max(v, 0.0);
  if (!(mass_a > 0.0) || !(mass_b > 0.0))
    throw ZeroMass("jensen-shannon kernel needs signals with positive mass");
  const double inv_log2 = 1.0 / std::log(2.0);
  double js = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double p = std::max(a.data[i], 0.0) / mass_a;
    const double q = std::max(b.data[i], 0.0) / mass_b;
    const double m = 0.5 * (p + q);
    if (p > 0.0) js += 0.5 * p * std::log(p / m) * inv_log2;
    if (q > 0.0) js += 0.5 * q * std::log(q / m) * inv_log2;
  }
  return std::clamp(js, 0.0, 1.0);
}

}  // namespace detail

/// Similarity of two equally-shaped signals at one fixed scale.
/// Linear is the elementwise-product sum; RBF is exp(-||a-b||^2 / 2 sigma^2);
/// Jensen-Shannon is 1 minus the base-2 JS divergence, so it lives in [0, 1]
/// and equals 1 exactly when both signals describe the same distribution.
inline double single_scale_kernel(const Matrix& a, const Matrix& b,
                                  const KernelKind& kind) {
  kind.validate();
  detail::check_same_shape(a, b);
  switch (kind.func) {
    case KernelFunc::Linear:
      return detail::frobenius_inner(a, b);
    case KernelFunc::Rbf:
      return std::exp(-detail::squared_distance(a, b) /
                      (2.0 * kind.sigma * kind.sigma));
    case KernelFunc::JensenShannon:
      return 1.0 - detail::js_divergence(a, b);
  }
  return 0.0;  // unreachable
}

/// Kernel-induced distance sqrt(k(a,a) + k(b,b) - 2 k(a,b)); a tiny negative
/// radicand from rounding is clamped to zero before the root.
inline double scale_distance(const Matrix& a, const Matrix& b,
                             const KernelKind& kind) {
  const double kaa = single_scale_kernel(a, a, kind);
  const double kbb = single_scale_kernel(b, b, kind);
  const double kab = single_scale_kernel(a, b, kind);
  return std::sqrt(std::max(0.0, kaa + kbb - 2.0 * kab));
}

// --------------------------------------------------------------------------
// Margin tables
// --------------------------------------------------------------------------

/// Per-instance, per-scale margins. Rows are training instances (one
/// document, or one preference pair); columns follow the ladder levels.
struct MarginTable {
  ScaleLadder ladder;
  Matrix values;                     // rows: instances, cols: ladder levels
  std::vector<std::string> row_ids;  // optional instance names for export

  std::vector<double> column_means() const {
    std::vector<double> mean(values.cols, 0.0);
    if (values.rows == 0) return mean;
    for (std::size_t i = 0; i < values.rows; ++i)
      for (std::size_t j = 0; j < values.cols; ++j)
        mean[j] += values(i, j);
    for (double& m : mean) m /= double(values.rows);
    return mean;
  }
};

/// Margins from a labeled corpus: for every document and every scale, the
/// distance to its nearest same-label neighbor is subtracted from the
/// distance to its nearest other-label neighbor. Positive margins mean the
/// scale separates the classes around that document. Nearest-neighbor ties
/// resolve to the lowest document index.
inline MarginTable hit_miss_margins(const std::vector<ScaledSignal>& docs,
                                    const std::vector<int>& labels,
                                    const ScaleLadder& ladder,
                                    const KernelKind& kind) {
  kind.validate();
  if (docs.size() != labels.size())
    throw DimensionMismatch("need exactly one label per document");
  const std::size_t n = docs.size();
  const std::size_t m = ladder.level_count();

  std::map<int, std::size_t> class_sizes;
  for (int lbl : labels) ++class_sizes[lbl];
  if (class_sizes.size() < 2)
    throw DegenerateClass("margin computation needs at least two classes");
  for (const auto& [lbl, count] : class_sizes)
    if (count < 2)
      throw DegenerateClass("class " + std::to_string(lbl) +
                            " has a single document; no within-class "
                            "neighbor exists");
  for (const auto& d : docs)
    if (d.size() != m)
      throw DimensionMismatch("document has " + std::to_string(d.size()) +
                              " scale levels but the ladder has " +
                              std::to_string(m));

  MarginTable out;
  out.ladder = ladder;
  out.values = Matrix(n, m, 0.0);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) pairs.emplace_back(i, k);

  for (std::size_t j = 0; j < m; ++j) {
    Matrix dist(n, n, 0.0);
    parallel_for(pairs.size(), [&](std::size_t p) {
      const auto [i, k] = pairs[p];
      const double d = scale_distance(docs[i][j], docs[k][j], kind);
      dist(i, k) = d;
      dist(k, i) = d;
    });
    for (std::size_t i = 0; i < n; ++i) {
      double best_hit = std::numeric_limits<double>::infinity();
      double best_miss = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i) continue;
        double& best = (labels[k] == labels[i]) ? best_hit : best_miss;
        if (dist(i, k) < best) best = dist(i, k);
      }
      out.values(i, j) = best_miss - best_hit;
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Relevance (negative KL) and preference-pair margins
// --------------------------------------------------------------------------

enum class RelevanceKind { NegativeKL };

namespace detail {

/// Negative Kullback-Leibler divergence -KL(query || doc) of the two
/// signals viewed as distributions over their cells, with a 1e-9 floor
/// added inside the logarithm to both arguments so coarse zeros stay
/// finite. When the row counts differ, the query rows are replicated
/// across the document rows (row r of the document reads query row
/// floor(r * q_rows / d_rows)), which sums the per-sentence comparison
/// over the whole document; column counts must match exactly.
inline double negative_kl(const Matrix& query, const Matrix& doc) {
  if (query.cols != doc.cols)
    throw DimensionMismatch("query and document signals must share their "
                            "semantic dimension, got " +
                            std::to_string(query.cols) + " vs " +
                            std::to_string(doc.cols));
  if (query.rows == 0 || doc.rows == 0)
    throw EmptySignal("relevance needs non-empty signals");

  const std::size_t rows = doc.rows;
  const auto query_row = [&](std::size_t r) {
    return (r * query.rows) / rows;
  };

  double mass_q = 0.0, mass_d = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t qr = query_row(r);
    for (std::size_t c = 0; c < doc.cols; ++c) {
      mass_q += std::max(query(qr, c), 0.0);
      mass_d += std::max(doc(r, c), 0.0);
    }
  }
  if (!(mass_q > 0.0) || !(mass_d > 0.0))
    throw ZeroMass("relevance needs signals with positive mass");

  constexpr double kEps = 1e-9;
  double kl = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t qr = query_row(r);
    for (std::size_t c = 0; c < doc.cols; ++c) {
      const double p = std::max(query(qr, c), 0.0) / mass_q;
      if (p <= 0.0) continue;
      const double d = std::max(doc(r, c), 0.0) / mass_d;
      kl += p * std::log((p + kEps) / (d + kEps));
    }
  }
  return -kl;
}

}  // namespace detail

/// Relevance of a document to a query at one fixed scale; higher is more
/// relevant and zero (the maximum) is attained when the signals match.
inline double relevance_at_scale(const Matrix& query, const Matrix& doc,
                                 RelevanceKind kind = RelevanceKind::NegativeKL) {
  (void)kind;  // single relevance family today
  return detail::negative_kl(query, doc);
}

/// One retrieval query with graded judgments over candidate documents.
struct JudgedQuery {
  std::string query_id;
  ScaledSignal query;                 // query signal per ladder level
  std::vector<std::string> doc_ids;   // one id per judged document
  std::vector<ScaledSignal> docs;     // judged documents per ladder level
  std::vector<int> grades;            // higher grade = more relevant
};

/// Margins from graded judgments: one row per ordered pair (i, j) with
/// grade_i > grade_j within one query, holding the relevance difference
/// r(Q, d_i | s) - r(Q, d_j | s) per scale.
inline MarginTable pairwise_margins(const std::vector<JudgedQuery>& queries,
                                    const ScaleLadder& ladder,
                                    RelevanceKind kind = RelevanceKind::NegativeKL) {
  const std::size_t m = ladder.level_count();

  struct PrefPair {
    const JudgedQuery* query;
    std::size_t better, worse;
  };
  std::vector<PrefPair> pairs;
  std::vector<std::string> ids;
  for (const auto& jq : queries) {
    if (jq.query.size() != m)
      throw DimensionMismatch("query '" + jq.query_id + "' has " +
                              std::to_string(jq.query.size()) +
                              " scale levels but the ladder has " +
                              std::to_string(m));
    if (jq.docs.size() != jq.grades.size())
      throw DimensionMismatch("query '" + jq.query_id +
                              "' needs one grade per judged document");
    for (const auto& d : jq.docs)
      if (d.size() != m)
        throw DimensionMismatch("judged document under query '" +
                                jq.query_id +
                                "' disagrees with the ladder length");
    const std::size_t before = pairs.size();
    for (std::size_t i = 0; i < jq.docs.size(); ++i)
      for (std::size_t j = 0; j < jq.docs.size(); ++j)
        if (jq.grades[i] > jq.grades[j]) {
          pairs.push_back({&jq, i, j});
          const std::string di =
              i < jq.doc_ids.size() ? jq.doc_ids[i] : std::to_string(i);
          const std::string dj =
              j < jq.doc_ids.size() ? jq.doc_ids[j] : std::to_string(j);
          ids.push_back(jq.query_id + ":" + di + ">" + dj);
        }
    if (pairs.size() == before)
      throw NoPreferencePairs("query '" + jq.query_id +
                              "' has no pair of documents with distinct "
                              "grades");
  }

  MarginTable out;
  out.ladder = ladder;
  out.values = Matrix(pairs.size(), m, 0.0);
  out.row_ids = std::move(ids);
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto& pp = pairs[p];
    for (std::size_t j = 0; j < m; ++j) {
      const double ri =
          relevance_at_scale(pp.query->query[j], pp.query->docs[pp.better][j],
                             kind);
      const double rj =
          relevance_at_scale(pp.query->query[j], pp.query->docs[pp.worse][j],
                             kind);
      out.values(p, j) = ri - rj;
    }
  });
  return out;
}

// --------------------------------------------------------------------------
// Scale distribution
// --------------------------------------------------------------------------

enum class WeightNorm { L2, Probability };

/// Nonnegative weight per ladder scale. The learner emits unit-L2 weights;
/// expectation-style consumers divide by the weight sum first, and the
/// `norm` flag records which regime the weights are currently in.
struct ScaleDistribution {
  ScaleLadder ladder;
  std::vector<double> weights;
  WeightNorm norm = WeightNorm::L2;

  void validate() const {
    if (weights.size() != ladder.level_count())
      throw DimensionMismatch("scale distribution has " +
                              std::to_string(weights.size()) +
                              " weights for a ladder of " +
                              std::to_string(ladder.level_count()) +
                              " levels");
    double sum = 0.0, sum_sq = 0.0;
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0)
        throw InvalidRange("scale weights must be finite and nonnegative");
      sum += w;
      sum_sq += w * w;
    }
    const double norm_value =
        norm == WeightNorm::L2 ? std::sqrt(sum_sq) : sum;
    if (std::fabs(norm_value - 1.0) > 1e-9)
      throw InvalidRange("scale weights are not normalized for their "
                         "declared regime");
  }
};

/// Rescales the weights so they sum to one. Idempotent on distributions
/// already in the probability regime.
inline ScaleDistribution to_probability(ScaleDistribution q) {
  if (q.norm == WeightNorm::Probability) return q;
  const double total =
      std::accumulate(q.weights.begin(), q.weights.end(), 0.0);
  if (!(total > 0.0))
    throw NoPositiveMargin("cannot renormalize an all-zero weight vector");
  for (double& w : q.weights) w /= total;
  q.norm = WeightNorm::Probability;
  return q;
}

/// Equal weight on every ladder scale, in the requested regime.
inline ScaleDistribution uniform_scale_distribution(
    const ScaleLadder& ladder, WeightNorm norm = WeightNorm::Probability) {
  ScaleDistribution q;
  q.ladder = ladder;
  const std::size_t m = ladder.level_count();
  if (m == 0) throw InvalidRange("ladder has no levels");
  const double w =
      norm == WeightNorm::L2 ? 1.0 / std::sqrt(double(m)) : 1.0 / double(m);
  q.weights.assign(m, w);
  q.norm = norm;
  return q;
}

/// Closed-form scale weights from a margin table: the positive part of the
/// column-mean margin vector, L2-normalized. Maximizes the summed expected
/// margin over the unit ball of nonnegative weight vectors. Throws
/// NoPositiveMargin when no scale has a positive mean margin.
inline ScaleDistribution learn_scale_distribution(const MarginTable& margins) {
  if (margins.values.rows == 0 || margins.values.cols == 0)
    throw TooShort("margin table is empty");
  for (double v : margins.values.data)
    if (!std::isfinite(v))
      throw InvalidRange("margin table has non-finite entries");

  std::vector<double> mean = margins.column_means();
  double norm_sq = 0.0;
  for (double& v : mean) {
    v = std::max(v, 0.0);
    norm_sq += v * v;
  }
  if (!(norm_sq > 0.0))
    throw NoPositiveMargin("every scale has a non-positive mean margin");
  const double inv_norm = 1.0 / std::sqrt(norm_sq);

  ScaleDistribution q;
  q.ladder = margins.ladder;
  q.weights.resize(mean.size());
  for (std::size_t j = 0; j < mean.size(); ++j)
    q.weights[j] = mean[j] * inv_norm;
  q.norm = WeightNorm::L2;
  return q;
}

// --------------------------------------------------------------------------
// Scale-weighted kernel and relevance
// --------------------------------------------------------------------------

namespace detail {

inline std::vector<double> probability_weights(const ScaleDistribution& q,
                                               std::size_t a_levels,
                                               std::size_t b_levels) {
  const ScaleDistribution p = to_probability(q);
  if (a_levels != p.weights.size() || b_levels != p.weights.size())
    throw DimensionMismatch(
        "documents and scale weights disagree on the ladder length");
  return p.weights;
}

}  // namespace detail

/// Scale-weighted kernel: the expectation of the single-scale kernel under
/// the scale distribution. Weights in the L2 regime are converted to the
/// probability regime first.
inline double sitk(const ScaledSignal& a, const ScaledSignal& b,
                   const ScaleDistribution& q, const KernelKind& kind) {
  const std::vector<double> w =
      detail::probability_weights(q, a.size(), b.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j)
    if (w[j] != 0.0) acc += w[j] * single_scale_kernel(a[j], b[j], kind);
  return acc;
}

/// Scale-weighted relevance: the expectation of the per-scale relevance
/// under the scale distribution; higher is more relevant.
inline double silm_relevance(const ScaledSignal& query,
                             const ScaledSignal& doc,
                             const ScaleDistribution& q,
                             RelevanceKind kind = RelevanceKind::NegativeKL) {
  const std::vector<double> w =
      detail::probability_weights(q, query.size(), doc.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j)
    if (w[j] != 0.0) acc += w[j] * relevance_at_scale(query[j], doc[j], kind);
  return acc;
}

}  // namespace tss
