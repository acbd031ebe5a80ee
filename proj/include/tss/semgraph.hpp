#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <utility>
#include <vector>

#include "tss/error.hpp"
#include "tss/kernels.hpp"
#include "tss/matrix.hpp"
#include "tss/parallel.hpp"
#include "tss/signal.hpp"
#include "tss/textio.hpp"

namespace tss {

/// Undirected association graph over the vocabulary. Edge weights are
/// affinities (larger = closer); node weights set the fidelity term of the
/// regularized smoother and default to 1.
struct SemanticGraph {
  std::size_t size = 0;
  std::map<std::pair<std::size_t, std::size_t>, double> edges;  // key y < z
  std::vector<double> node_weights;

  explicit SemanticGraph(std::size_t m = 0)
      : size(m), node_weights(m, 1.0) {}

  void add_edge(std::size_t y, std::size_t z, double w) {
    if (y == z) throw Error("semantic graph: self-edges are not allowed");
    if (y >= size || z >= size)
      throw Error("semantic graph: node index out of range");
    if (!(w > 0.0) || !std::isfinite(w))
      throw Error("semantic graph: edge weights must be positive and finite");
    edges[{std::min(y, z), std::max(y, z)}] = w;
  }

  double edge(std::size_t y, std::size_t z) const {
    auto it = edges.find({std::min(y, z), std::max(y, z)});
    return it == edges.end() ? 0.0 : it->second;
  }

  void set_node_weight(std::size_t y, double w) {
    if (y >= size) throw Error("semantic graph: node index out of range");
    if (!(w > 0.0) || !std::isfinite(w))
      throw Error("semantic graph: node weights must be positive and finite");
    node_weights[y] = w;
  }

  std::vector<std::vector<std::pair<std::size_t, double>>> adjacency() const {
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(size);
    for (const auto& [key, w] : edges) {
      adj[key.first].push_back({key.second, w});
      adj[key.second].push_back({key.first, w});
    }
    return adj;
  }

  bool connected() const {
    if (size == 0) return true;
    const auto adj = adjacency();
    std::vector<char> seen(size, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (const auto& [v, w] : adj[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == size;
  }
};

enum class SemanticMode { Identity, DistanceKernel, GraphSolve };

struct SmoothingConfig {
  double lambda = 0.5;          // fidelity/penalty tradeoff of the solver
  double semantic_scale = 0.0;  // kernel width of the distance operator
  SemanticMode mode = SemanticMode::Identity;

  void validate() const {
    if (lambda < 0.0 || lambda > 1.0)
      throw Error("smoothing lambda must lie in [0, 1]");
    if (semantic_scale < 0.0)
      throw InvalidScale("semantic scale must be >= 0");
  }
};

/// Word co-occurrence graph weighted by add-one-smoothed pointwise mutual
/// information. Windows slide over each document's in-vocabulary token
/// stream (crossing sentence boundaries); edges at or below the threshold,
/// and all non-positive scores, are dropped.
inline SemanticGraph build_pmi_graph(const std::vector<Document>& corpus,
                                     const Vocabulary& vocab,
                                     std::size_t window, double threshold) {
  if (window < 1) throw Error("co-occurrence window must be >= 1");
  const std::size_t m = vocab.size();
  std::map<std::pair<std::size_t, std::size_t>, double> counts;
  for (const Document& doc : corpus) {
    std::vector<std::size_t> stream;
    for (const auto& sent : doc.sentences)
      for (int id : sent) stream.push_back(static_cast<std::size_t>(id));
    for (std::size_t i = 0; i < stream.size(); ++i)
      for (std::size_t j = i + 1; j < stream.size() && j - i <= window; ++j) {
        if (stream[i] == stream[j]) continue;
        const auto key = std::minmax(stream[i], stream[j]);
        counts[{key.first, key.second}] += 1.0;
      }
  }

  std::vector<double> row_total(m, 0.0);
  double total = 0.0;
  for (const auto& [key, c] : counts) {
    row_total[key.first] += c;
    row_total[key.second] += c;
    total += 2.0 * c;
  }

  SemanticGraph graph(m);
  for (const auto& [key, c] : counts) {
    const double pmi = std::log((c + 1.0) * total /
                                ((row_total[key.first] + 1.0) *
                                 (row_total[key.second] + 1.0)));
    if (pmi > threshold && pmi > 0.0)
      graph.add_edge(key.first, key.second, pmi);
  }
  return graph;
}

/// All-pairs dissimilarity: shortest-path distance where traversing an edge
/// of affinity w costs 1/w. Unreachable pairs are +infinity.
inline Matrix graph_dissimilarity(const SemanticGraph& graph) {
  const std::size_t m = graph.size;
  const double inf = std::numeric_limits<double>::infinity();
  Matrix dist(m, m, inf);
  const auto adj = graph.adjacency();
  parallel_for(m, [&](std::size_t source) {
    std::vector<double> d(m, inf);
    d[source] = 0.0;
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    pq.push({0.0, source});
    while (!pq.empty()) {
      const auto [du, u] = pq.top();
      pq.pop();
      if (du > d[u]) continue;
      for (const auto& [v, w] : adj[u]) {
        const double cand = du + 1.0 / w;
        if (cand < d[v]) {
          d[v] = cand;
          pq.push({cand, v});
        }
      }
    }
    for (std::size_t z = 0; z < m; ++z) dist.at(source, z) = d[z];
  });
  return dist;
}

namespace detail {

inline Matrix kernel_operator_from_distances(const Matrix& dist, double s_y) {
  const std::size_t m = dist.rows;
  Matrix op(m, m, 0.0);
  if (s_y == 0.0) {
    for (std::size_t y = 0; y < m; ++y) op.at(y, y) = 1.0;
    return op;
  }
  for (std::size_t y = 0; y < m; ++y) {
    double row_sum = 0.0;
    for (std::size_t z = 0; z < m; ++z) {
      const double d = dist.at(y, z);
      if (std::isinf(d)) continue;
      const double v = std::exp(-d * d / (2.0 * s_y));
      op.at(y, z) = v;
      row_sum += v;
    }
    for (std::size_t z = 0; z < m; ++z) op.at(y, z) /= row_sum;
  }
  return op;
}

}  // namespace detail

/// Row-stochastic smoothing operator: entry (y,z) proportional to a Gaussian
/// in the graph dissimilarity. Zero scale gives the identity; isolated words
/// keep their mass.
inline Matrix semantic_kernel_operator(const SemanticGraph& graph,
                                       double s_y) {
  if (s_y < 0.0) throw InvalidScale("semantic scale must be >= 0");
  return detail::kernel_operator_from_distances(graph_dissimilarity(graph),
                                                s_y);
}

/// Applies a row-stochastic operator transposed over the semantic axis:
/// out(x, z) = sum_y in(x, y) op(y, z). Each source entry distributes its
/// mass over the operator row, so total mass is conserved.
inline void apply_semantic_operator(Matrix& signal, const Matrix& op) {
  if (signal.cols != op.rows)
    throw DimensionMismatch("signal width does not match operator size");
  parallel_for(signal.rows, [&](std::size_t r) {
    std::vector<double> out(signal.cols, 0.0);
    for (std::size_t y = 0; y < signal.cols; ++y) {
      const double v = signal.at(r, y);
      if (v == 0.0) continue;
      for (std::size_t z = 0; z < op.cols; ++z) out[z] += v * op.at(y, z);
    }
    signal.set_row(r, out);
  });
}

namespace detail {

/// Jacobi-preconditioned conjugate gradient on the (SPD for lambda < 1)
/// stationarity system ((1-lambda) diag(mu) + 2 lambda L) gamma =
/// (1-lambda) diag(mu) f, where L is the Laplacian of the affinity graph
/// and the factor 2 comes from the ordered-pair penalty sum.
inline std::vector<double> graph_smooth_vector(
    const std::vector<double>& f, const SemanticGraph& graph, double lambda,
    const std::vector<std::vector<std::pair<std::size_t, double>>>& adj) {
  const std::size_t m = f.size();
  const auto& mu = graph.node_weights;

  if (lambda == 0.0) return f;
  if (lambda == 1.0) {
    if (!graph.connected())
      throw SingularSystem(
          "full-penalty smoothing needs a connected graph");
    double num = 0.0, den = 0.0;
    for (std::size_t y = 0; y < m; ++y) {
      num += mu[y] * f[y];
      den += mu[y];
    }
    return std::vector<double>(m, num / den);
  }

  std::vector<double> degree(m, 0.0);
  for (std::size_t y = 0; y < m; ++y)
    for (const auto& [z, w] : adj[y]) degree[y] += w;

  auto matvec = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (std::size_t y = 0; y < m; ++y) {
      double lap = degree[y] * x[y];
      for (const auto& [z, w] : adj[y]) lap -= w * x[z];
      out[y] = (1.0 - lambda) * mu[y] * x[y] + 2.0 * lambda * lap;
    }
  };

  std::vector<double> b(m), diag(m);
  double b_norm2 = 0.0;
  for (std::size_t y = 0; y < m; ++y) {
    b[y] = (1.0 - lambda) * mu[y] * f[y];
    diag[y] = (1.0 - lambda) * mu[y] + 2.0 * lambda * degree[y];
    b_norm2 += b[y] * b[y];
  }
  if (b_norm2 == 0.0) return std::vector<double>(m, 0.0);

  std::vector<double> x(m, 0.0), r = b, z(m), p(m), ap(m);
  for (std::size_t y = 0; y < m; ++y) z[y] = r[y] / diag[y];
  p = z;
  double rz = 0.0;
  for (std::size_t y = 0; y < m; ++y) rz += r[y] * z[y];

  const double tol2 = 1e-24 * b_norm2;  // residual 1e-12 relative
  const std::size_t max_iter = 20 * m + 100;
  for (std::size_t it = 0; it < max_iter; ++it) {
    double r_norm2 = 0.0;
    for (std::size_t y = 0; y < m; ++y) r_norm2 += r[y] * r[y];
    if (r_norm2 <= tol2) break;
    matvec(p, ap);
    double pap = 0.0;
    for (std::size_t y = 0; y < m; ++y) pap += p[y] * ap[y];
    if (pap <= 0.0) throw SingularSystem("smoothing system is not positive");
    const double alpha = rz / pap;
    for (std::size_t y = 0; y < m; ++y) {
      x[y] += alpha * p[y];
      r[y] -= alpha * ap[y];
    }
    double rz_next = 0.0;
    for (std::size_t y = 0; y < m; ++y) {
      z[y] = r[y] / diag[y];
      rz_next += r[y] * z[y];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t y = 0; y < m; ++y) p[y] = z[y] + beta * p[y];
  }
  return x;
}

}  // namespace detail

/// Regularized graph smoothing of a semantic-domain vector: trades fidelity
/// to f against agreement along graph edges. lambda = 0 returns f; lambda = 1
/// returns the node-weighted mean (connected graphs only).
inline Signal1D graph_smooth(const Signal1D& f, const SemanticGraph& graph,
                             double lambda) {
  if (f.domain != SignalDomain::Semantic)
    throw Error("graph_smooth expects a semantic-domain vector");
  if (f.values.size() != graph.size)
    throw DimensionMismatch("vector length does not match graph size");
  if (lambda < 0.0 || lambda > 1.0)
    throw Error("smoothing lambda must lie in [0, 1]");
  Signal1D out = f;
  out.values =
      detail::graph_smooth_vector(f.values, graph, lambda, graph.adjacency());
  out.normalized = false;
  return out;
}

/// Row-wise graph smoothing over the semantic axis of a matrix.
inline void graph_smooth_rows(Matrix& signal, const SemanticGraph& graph,
                              double lambda) {
  if (signal.cols != graph.size)
    throw DimensionMismatch("signal width does not match graph size");
  if (lambda < 0.0 || lambda > 1.0)
    throw Error("smoothing lambda must lie in [0, 1]");
  const auto adj = graph.adjacency();
  parallel_for(signal.rows, [&](std::size_t r) {
    signal.set_row(r, detail::graph_smooth_vector(signal.row_vector(r), graph,
                                                  lambda, adj));
  });
}

/// Factory for semantic-axis operators used by the separable smoother. The
/// distance-kernel mode caches the all-pairs dissimilarity matrix so a whole
/// scale ladder pays for it once.
class SemanticSmoother {
 public:
  SemanticSmoother() = default;
  SemanticSmoother(const SemanticGraph& graph, SemanticMode mode,
                   double lambda = 0.5)
      : graph_(&graph), mode_(mode), lambda_(lambda) {
    if (lambda < 0.0 || lambda > 1.0)
      throw Error("smoothing lambda must lie in [0, 1]");
  }

  SemanticMode mode() const { return mode_; }

  /// Operator for one ladder level. The solver mode ignores s_y (its strength
  /// is fixed by lambda); the distance-kernel mode widens with s_y.
  SemanticOp op(double s_y) const {
    if (mode_ == SemanticMode::Identity || graph_ == nullptr) return nullptr;
    if (mode_ == SemanticMode::GraphSolve) {
      const SemanticGraph* g = graph_;
      const double lambda = lambda_;
      return [g, lambda](Matrix& m) { graph_smooth_rows(m, *g, lambda); };
    }
    if (s_y < 0.0) throw InvalidScale("semantic scale must be >= 0");
    if (s_y == 0.0) return nullptr;
    if (!dist_) dist_ = std::make_shared<Matrix>(graph_dissimilarity(*graph_));
    auto op = std::make_shared<Matrix>(
        detail::kernel_operator_from_distances(*dist_, s_y));
    return [op](Matrix& m) { apply_semantic_operator(m, *op); };
  }

 private:
  const SemanticGraph* graph_ = nullptr;
  SemanticMode mode_ = SemanticMode::Identity;
  double lambda_ = 0.5;
  mutable std::shared_ptr<Matrix> dist_;
};

}  // namespace tss
