#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tss/error.hpp"
#include "tss/matrix.hpp"
#include "tss/textio.hpp"

namespace tss {

enum class SignalKind { Word2D, Sentence2D, Generic };

/// Non-negative signal over the joint spatial (rows) x semantic (cols)
/// domain. When `normalized` is set the total mass is 1 within 1e-9.
struct Signal2D {
  Matrix values;
  SignalKind kind = SignalKind::Generic;
  bool normalized = false;

  std::size_t spatial_len() const { return values.rows; }
  std::size_t semantic_len() const { return values.cols; }
  double total() const { return values.total(); }
};

enum class SignalDomain { Spatial, Semantic };

struct Signal1D {
  std::vector<double> values;
  SignalDomain domain = SignalDomain::Semantic;
  bool normalized = false;

  double total() const {
    double t = 0.0;
    for (double v : values) t += v;
    return t;
  }
};

/// Spatial sequence of k-dimensional topic embeddings, one row per sentence.
/// Treated as a vector-variate 1D signal: the column axis is never
/// semantically smoothed.
struct TopicSignal {
  Matrix values;  // rows = sentences, cols = k

  std::size_t spatial_len() const { return values.rows; }
  std::size_t dimensionality() const { return values.cols; }
};

/// Word-level 2D signal: one row per in-vocabulary token position, entry
/// (x,y) = 1 iff the token at position x is vocabulary word y.
inline Signal2D word2d_signal(const Document& doc, const Vocabulary& vocab) {
  std::vector<int> positions;
  for (const auto& sent : doc.sentences)
    for (int id : sent) positions.push_back(id);
  if (positions.empty())
    throw EmptySignal("document '" + doc.id + "' has no in-vocabulary tokens");

  Signal2D sig;
  sig.kind = SignalKind::Word2D;
  sig.values = Matrix(positions.size(), vocab.size());
  for (std::size_t x = 0; x < positions.size(); ++x)
    sig.values.at(x, static_cast<std::size_t>(positions[x])) = 1.0;
  return sig;
}

/// Collapses the spatial axis: f(y) = sum_x f(x,y), the BOW view.
inline Signal1D bow1d_signal(const Signal2D& sig) {
  Signal1D out;
  out.domain = SignalDomain::Semantic;
  out.values.assign(sig.semantic_len(), 0.0);
  for (std::size_t x = 0; x < sig.spatial_len(); ++x)
    for (std::size_t y = 0; y < sig.semantic_len(); ++y)
      out.values[y] += sig.values.at(x, y);
  out.normalized = sig.normalized;
  return out;
}

/// Sentence-level 2D signal: row x holds the raw bag-of-words counts of
/// sentence x. Sentences with no in-vocabulary token yield all-zero rows.
inline Signal2D sentence2d_signal(const Document& doc,
                                  const Vocabulary& vocab) {
  if (doc.sentences.empty())
    throw EmptySignal("document '" + doc.id + "' has no sentences");
  Signal2D sig;
  sig.kind = SignalKind::Sentence2D;
  sig.values = Matrix(doc.sentences.size(), vocab.size());
  bool any = false;
  for (std::size_t x = 0; x < doc.sentences.size(); ++x)
    for (int id : doc.sentences[x]) {
      sig.values.at(x, static_cast<std::size_t>(id)) += 1.0;
      any = true;
    }
  if (!any)
    throw EmptySignal("document '" + doc.id +
                      "': all sentences empty after filtering");
  return sig;
}

/// Copies the per-sentence topic embeddings of `doc` in sentence order.
inline TopicSignal topic1d_signal(const Document& doc,
                                  const TopicTable& table) {
  const std::size_t n = doc.sentences.size();
  if (n == 0)
    throw EmptySignal("document '" + doc.id + "' has no sentences");
  TopicSignal sig;
  sig.values = Matrix(n, table.k);
  for (std::size_t x = 0; x < n; ++x) {
    const std::vector<double>* row = table.find(doc.id, x);
    if (!row) throw MissingEmbedding(doc.id, x);
    for (std::size_t j = 0; j < table.k; ++j) sig.values.at(x, j) = (*row)[j];
  }
  return sig;
}

inline Signal2D normalize_signal(Signal2D sig) {
  const double mass = sig.total();
  if (!(mass > 0.0)) throw ZeroMass("signal has no mass to normalize");
  if (sig.normalized && std::fabs(mass - 1.0) <= 1e-9) return sig;
  for (double& v : sig.values.data) v /= mass;
  sig.normalized = true;
  return sig;
}

inline Signal1D normalize_signal(Signal1D sig) {
  const double mass = sig.total();
  if (!(mass > 0.0)) throw ZeroMass("signal has no mass to normalize");
  if (sig.normalized && std::fabs(mass - 1.0) <= 1e-9) return sig;
  for (double& v : sig.values) v /= mass;
  sig.normalized = true;
  return sig;
}

namespace detail {

/// Endpoint-aligned linear interpolation of the columns of `m` to new_rows
/// rows: target row x reads source coordinate x*(N-1)/(N'-1).
inline Matrix resample_rows(const Matrix& m, std::size_t new_rows) {
  if (new_rows == m.rows) return m;
  Matrix out(new_rows, m.cols);
  if (m.rows == 1) {
    for (std::size_t x = 0; x < new_rows; ++x)
      for (std::size_t y = 0; y < m.cols; ++y) out.at(x, y) = m.at(0, y);
    return out;
  }
  const double ratio = new_rows == 1
                           ? 0.0
                           : static_cast<double>(m.rows - 1) /
                                 static_cast<double>(new_rows - 1);
  for (std::size_t x = 0; x < new_rows; ++x) {
    const double src = static_cast<double>(x) * ratio;
    std::size_t lo = static_cast<std::size_t>(src);
    if (lo >= m.rows - 1) lo = m.rows - 2;
    const double frac = src - static_cast<double>(lo);
    for (std::size_t y = 0; y < m.cols; ++y)
      out.at(x, y) = (1.0 - frac) * m.at(lo, y) + frac * m.at(lo + 1, y);
  }
  return out;
}

}  // namespace detail

/// Resamples the spatial axis to new_spatial_len by per-column linear
/// interpolation; the semantic axis is untouched. Normalized inputs are
/// re-normalized.
inline Signal2D resample_bilinear(const Signal2D& sig,
                                  std::size_t new_spatial_len) {
  if (new_spatial_len < 1) throw Error("new spatial length must be >= 1");
  if (new_spatial_len == sig.spatial_len()) return sig;
  Signal2D out;
  out.kind = sig.kind;
  out.values = detail::resample_rows(sig.values, new_spatial_len);
  if (sig.normalized) return normalize_signal(std::move(out));
  return out;
}

inline TopicSignal resample_bilinear(const TopicSignal& sig,
                                     std::size_t new_spatial_len) {
  if (new_spatial_len < 1) throw Error("new spatial length must be >= 1");
  TopicSignal out;
  out.values = detail::resample_rows(sig.values, new_spatial_len);
  return out;
}

}  // namespace tss
