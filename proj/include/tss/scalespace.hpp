#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "tss/error.hpp"
#include "tss/kernels.hpp"
#include "tss/matrix.hpp"
#include "tss/semgraph.hpp"
#include "tss/signal.hpp"

namespace tss {

/// Geometric grid of positive scales. The optional zero base level is kept
/// out of `scales` and tracked by the flag.
struct ScaleLadder {
  std::vector<double> scales;
  double ratio = 0.0;  // 0 when the spacing is irregular
  bool includes_zero = false;

  std::vector<double> levels() const {
    std::vector<double> out;
    if (includes_zero) out.push_back(0.0);
    out.insert(out.end(), scales.begin(), scales.end());
    return out;
  }
  std::size_t level_count() const {
    return scales.size() + (includes_zero ? 1 : 0);
  }
};

inline ScaleLadder build_scale_ladder(double s_min, double s_max,
                                      std::size_t count) {
  if (!(s_min > 0.0) || !(s_max > s_min))
    throw InvalidRange("scale ladder needs 0 < s_min < s_max");
  if (count < 2) throw InvalidRange("scale ladder needs at least 2 levels");
  ScaleLadder ladder;
  ladder.ratio = std::pow(s_max / s_min, 1.0 / double(count - 1));
  ladder.scales.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    ladder.scales[i] = s_min * std::pow(ladder.ratio, double(i));
  ladder.scales.front() = s_min;
  ladder.scales.back() = s_max;
  return ladder;
}

struct StackLevel {
  double s_x = 0.0;
  double s_y = 0.0;
  Matrix values;
};

/// Progressively smoothed copies of one signal, finest level first.
struct ScaleSpaceStack {
  std::vector<StackLevel> levels;
  bool includes_zero = false;
  int derivative_order = 0;  // 0 for plain smoothing stacks

  std::size_t size() const { return levels.size(); }
  const StackLevel& level(std::size_t i) const { return levels[i]; }
  std::size_t spatial_len() const {
    return levels.empty() ? 0 : levels.front().values.rows;
  }
  std::size_t semantic_len() const {
    return levels.empty() ? 0 : levels.front().values.cols;
  }
};

struct StackConfig {
  KernelFamily family = KernelFamily::DiscreteGaussian;
  BoundaryMode boundary = BoundaryMode::Renormalize;
  bool include_zero = true;   // prepend the unsmoothed base as level 0
  bool smooth_spatial = true; // convolve along rows (the position axis)
  // Per-ladder-level semantic scales; empty means s_y = s_x.
  std::vector<double> semantic_scales;
};

/// Builds the smoothing stack of a matrix signal: rows are positions,
/// columns semantic coordinates. The semantic factory may be an identity
/// smoother for signals whose column axis must stay untouched.
inline ScaleSpaceStack build_stack(const Matrix& base,
                                   const ScaleLadder& ladder,
                                   const SemanticSmoother& semantic,
                                   const StackConfig& cfg = {}) {
  if (base.rows == 0 || base.cols == 0)
    throw EmptySignal("cannot build a stack over an empty signal");
  if (!cfg.semantic_scales.empty() &&
      cfg.semantic_scales.size() != ladder.scales.size())
    throw DimensionMismatch(
        "one semantic scale per ladder level is required");

  ScaleSpaceStack stack;
  stack.includes_zero = cfg.include_zero;
  if (cfg.include_zero) {
    StackLevel zero;
    zero.values = base;
    stack.levels.push_back(std::move(zero));
  }
  Signal2D wrap;
  wrap.values = base;
  wrap.kind = SignalKind::Generic;
  for (std::size_t i = 0; i < ladder.scales.size(); ++i) {
    StackLevel lvl;
    lvl.s_x = cfg.smooth_spatial ? ladder.scales[i] : 0.0;
    lvl.s_y = cfg.semantic_scales.empty() ? ladder.scales[i]
                                          : cfg.semantic_scales[i];
    lvl.values = smooth_separable_2d(wrap, lvl.s_x, semantic.op(lvl.s_y),
                                     cfg.boundary, cfg.family)
                     .values;
    if (semantic.mode() == SemanticMode::Identity) lvl.s_y = 0.0;
    stack.levels.push_back(std::move(lvl));
  }
  return stack;
}

inline ScaleSpaceStack build_stack(const Signal2D& sig,
                                   const ScaleLadder& ladder,
                                   const SemanticSmoother& semantic,
                                   const StackConfig& cfg = {}) {
  return build_stack(sig.values, ladder, semantic, cfg);
}

/// Spatial-domain vector: smoothed along its only axis.
inline ScaleSpaceStack build_stack(const Signal1D& sig,
                                   const ScaleLadder& ladder,
                                   const StackConfig& cfg = {}) {
  if (sig.domain != SignalDomain::Spatial)
    throw Error("semantic-domain vectors need a semantic smoother");
  Matrix base(sig.values.size(), 1);
  for (std::size_t x = 0; x < sig.values.size(); ++x)
    base.at(x, 0) = sig.values[x];
  return build_stack(base, ladder, SemanticSmoother(), cfg);
}

/// Semantic-domain vector (bag of words): only the semantic operator runs.
inline ScaleSpaceStack build_stack(const Signal1D& sig,
                                   const ScaleLadder& ladder,
                                   const SemanticSmoother& semantic,
                                   StackConfig cfg = {}) {
  if (sig.domain != SignalDomain::Semantic)
    throw Error("spatial-domain vectors take no semantic smoother");
  Matrix base(1, sig.values.size());
  base.set_row(0, sig.values);
  cfg.smooth_spatial = false;
  return build_stack(base, ladder, semantic, cfg);
}

/// Topic sequences: per-dimension spatial smoothing, semantic axis untouched.
inline ScaleSpaceStack build_stack(const TopicSignal& sig,
                                   const ScaleLadder& ladder,
                                   const StackConfig& cfg = {}) {
  return build_stack(sig.values, ladder, SemanticSmoother(), cfg);
}

/// Per-level spatial-derivative signals: each ladder level is the base
/// convolved along rows with the order-k Gaussian derivative at that scale
/// (after the semantic pass, which commutes with the spatial one). The zero
/// level is never included; derivative kernels need s > 0.
inline ScaleSpaceStack derivative_stack(
    const Matrix& base, const ScaleLadder& ladder, int order,
    const SemanticSmoother& semantic = SemanticSmoother(),
    BoundaryMode boundary = BoundaryMode::Mirror,
    const std::vector<double>& semantic_scales = {}) {
  if (base.rows == 0 || base.cols == 0)
    throw EmptySignal("cannot build a stack over an empty signal");
  if (boundary == BoundaryMode::Renormalize)
    throw Error("derivative stacks need mirror or zero-pad boundaries");
  if (!semantic_scales.empty() &&
      semantic_scales.size() != ladder.scales.size())
    throw DimensionMismatch("one semantic scale per ladder level is required");

  ScaleSpaceStack stack;
  stack.derivative_order = order;
  for (std::size_t i = 0; i < ladder.scales.size(); ++i) {
    StackLevel lvl;
    lvl.s_x = ladder.scales[i];
    lvl.s_y = semantic_scales.empty() ? ladder.scales[i] : semantic_scales[i];
    lvl.values = base;
    if (auto op = semantic.op(lvl.s_y))
      op(lvl.values);
    else
      lvl.s_y = 0.0;
    const Kernel1D k = gaussian_derivative_kernel(lvl.s_x, order);
    parallel_for(lvl.values.cols, [&](std::size_t c) {
      lvl.values.set_column(
          c, convolve_1d(lvl.values.column(c), k, boundary));
    });
    stack.levels.push_back(std::move(lvl));
  }
  return stack;
}

inline ScaleSpaceStack derivative_stack(
    const Signal2D& sig, const ScaleLadder& ladder, int order,
    const SemanticSmoother& semantic = SemanticSmoother(),
    BoundaryMode boundary = BoundaryMode::Mirror) {
  return derivative_stack(sig.values, ladder, order, semantic, boundary);
}

struct Extremum {
  std::size_t x = 0;  // spatial index, or the only varying axis
  std::size_t y = 0;  // semantic index; 0 for 1D signals
  int sign = 0;       // +1 maximum, -1 minimum
  double value = 0.0;
};

namespace detail {

inline std::vector<Extremum> extrema_along(const Matrix& m, bool row_axis) {
  const std::size_t n = row_axis ? m.rows : m.cols;
  std::vector<Extremum> out;
  if (n < 3) return out;
  auto get = [&](std::size_t i) {
    return row_axis ? m.at(i, 0) : m.at(0, i);
  };
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double v = get(i);
    Extremum e;
    e.value = v;
    if (row_axis)
      e.x = i;
    else
      e.y = i;
    if (v > get(i - 1) && v > get(i + 1))
      e.sign = 1;
    else if (v < get(i - 1) && v < get(i + 1))
      e.sign = -1;
    else
      continue;
    if (!row_axis) e.x = i;  // 1xM rows: expose the index as x as well
    out.push_back(e);
  }
  return out;
}

}  // namespace detail

/// Strict interior local extrema. Single-column and single-row matrices are
/// scanned along their only axis with the 3-neighborhood; everything else
/// uses the 8-neighborhood, excluding boundary rows and columns.
inline std::vector<Extremum> detect_extrema(const Matrix& level) {
  if (level.cols == 1) return detail::extrema_along(level, true);
  if (level.rows == 1) return detail::extrema_along(level, false);
  std::vector<Extremum> out;
  if (level.rows < 3) return out;
  // Boundary positions (the spatial axis) are excluded; the semantic axis
  // clamps, so its edge columns can still host extrema.
  for (std::size_t x = 1; x + 1 < level.rows; ++x)
    for (std::size_t y = 0; y < level.cols; ++y) {
      const double v = level.at(x, y);
      bool is_max = true, is_min = true;
      for (int dx = -1; dx <= 1 && (is_max || is_min); ++dx)
        for (int dy = -1; dy <= 1; ++dy) {
          if (dx == 0 && dy == 0) continue;
          const int ny = int(y) + dy;
          if (ny < 0 || ny >= int(level.cols)) continue;
          const double nb =
              level.at(std::size_t(int(x) + dx), std::size_t(ny));
          if (v <= nb) is_max = false;
          if (v >= nb) is_min = false;
        }
      if (is_max || is_min)
        out.push_back({x, y, is_max ? 1 : -1, v});
    }
  return out;
}

struct IntervalNode {
  std::size_t id = 0;
  int parent = -1;          // -1 for roots
  std::size_t x = 0;        // position at the finest level where seen
  std::size_t y = 0;
  bool has_y = false;       // false for 1D signals
  int sign = 0;
  double s_emerge = 0.0;    // finest ladder scale at which the chain exists
  double s_end = 0.0;       // extinction: scale bound above which it is gone
  std::vector<std::size_t> children;
};

struct IntervalTree {
  std::vector<IntervalNode> nodes;

  std::vector<std::size_t> roots() const {
    std::vector<std::size_t> out;
    for (const auto& n : nodes)
      if (n.parent < 0) out.push_back(n.id);
    return out;
  }
};

namespace detail {

inline double chebyshev(const Extremum& a, const Extremum& b) {
  const double dx = std::fabs(double(a.x) - double(b.x));
  const double dy = std::fabs(double(a.y) - double(b.y));
  return std::max(dx, dy);
}

}  // namespace detail

/// Tracks extrema from the coarsest level toward the finest. Coarsest-level
/// extrema are roots; at each finer level, extrema link to the nearest
/// same-sign survivor of the coarser level within radius max(1, ceil(2
/// sqrt(ds))); the rest open new nodes under the nearest coarser extremum.
/// `sign_filter` restricts tracking to one polarity: +1 follows maxima only,
/// -1 minima only, 0 both.
inline IntervalTree build_interval_tree(const ScaleSpaceStack& stack,
                                        int sign_filter = 0) {
  IntervalTree tree;
  if (stack.size() < 2)
    throw TooShort("interval trees need at least two stack levels");
  const bool flat = stack.semantic_len() == 1 || stack.spatial_len() == 1;

  const std::size_t top = stack.size() - 1;
  auto scale_of = [&](std::size_t lvl) { return stack.level(lvl).s_x > 0.0
                                             ? stack.level(lvl).s_x
                                             : stack.level(lvl).s_y; };
  auto scan = [&](std::size_t lvl) {
    auto found = detect_extrema(stack.level(lvl).values);
    if (sign_filter != 0)
      found.erase(std::remove_if(found.begin(), found.end(),
                                 [&](const Extremum& e) {
                                   return e.sign != sign_filter;
                                 }),
                  found.end());
    return found;
  };

  struct Chain {
    std::size_t node;
    Extremum cur;
  };
  std::vector<Chain> active;

  const auto coarse = scan(top);
  const double s_top = scale_of(top);
  for (const auto& e : coarse) {
    IntervalNode n;
    n.id = tree.nodes.size();
    n.parent = -1;
    n.x = e.x;
    n.y = e.y;
    n.has_y = !flat;
    n.sign = e.sign;
    n.s_emerge = s_top;
    n.s_end = s_top;
    active.push_back({n.id, e});
    tree.nodes.push_back(std::move(n));
  }

  for (std::size_t lvl = top; lvl-- > 0;) {
    const double s_fine = scale_of(lvl);
    const double s_coarse = scale_of(lvl + 1);
    const double radius =
        std::max(1.0, std::ceil(2.0 * std::sqrt(
                          std::max(0.0, s_coarse - s_fine))));
    const auto fine = scan(lvl);

    // Greedy nearest-first matching between coarser chains and fine extrema.
    struct Cand {
      double dist;
      std::size_t chain;
      std::size_t ext;
    };
    std::vector<Cand> cands;
    for (std::size_t c = 0; c < active.size(); ++c)
      for (std::size_t e = 0; e < fine.size(); ++e) {
        if (active[c].cur.sign != fine[e].sign) continue;
        const double d = detail::chebyshev(active[c].cur, fine[e]);
        if (d <= radius) cands.push_back({d, c, e});
      }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) {
                       if (a.dist != b.dist) return a.dist < b.dist;
                       if (a.chain != b.chain) return a.chain < b.chain;
                       return a.ext < b.ext;
                     });
    std::vector<int> chain_match(active.size(), -1);
    std::vector<int> ext_match(fine.size(), -1);
    for (const auto& cand : cands) {
      if (chain_match[cand.chain] >= 0 || ext_match[cand.ext] >= 0) continue;
      chain_match[cand.chain] = int(cand.ext);
      ext_match[cand.ext] = int(cand.chain);
    }

    std::vector<Chain> next_active;
    for (std::size_t c = 0; c < active.size(); ++c) {
      if (chain_match[c] < 0) continue;  // chain not seen this fine level
      Chain moved = active[c];
      moved.cur = fine[std::size_t(chain_match[c])];
      IntervalNode& node = tree.nodes[moved.node];
      node.x = moved.cur.x;
      node.y = moved.cur.y;
      node.s_emerge = s_fine;
      next_active.push_back(moved);
    }
    for (std::size_t e = 0; e < fine.size(); ++e) {
      if (ext_match[e] >= 0) continue;
      IntervalNode n;
      n.id = tree.nodes.size();
      n.x = fine[e].x;
      n.y = fine[e].y;
      n.has_y = !flat;
      n.sign = fine[e].sign;
      n.s_emerge = s_fine;
      n.s_end = s_coarse;
      // Parent: nearest chain alive at the coarser level, any sign.
      n.parent = -1;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& chain : active) {
        const double d = detail::chebyshev(chain.cur, fine[e]);
        if (d < best) {
          best = d;
          n.parent = int(tree.nodes[chain.node].id);
        }
      }
      if (n.parent >= 0)
        tree.nodes[std::size_t(n.parent)].children.push_back(n.id);
      next_active.push_back({n.id, fine[e]});
      tree.nodes.push_back(std::move(n));
    }
    active.swap(next_active);
  }
  return tree;
}

struct InterestPoint {
  std::size_t x = 0;
  double scale = 0.0;     // midpoint of the two differenced scales
  double response = 0.0;  // signed for 1D signals, non-negative for 2D
  int sign = 0;
  std::size_t level = 0;  // index of the finer of the two stack levels
};

struct InterestPointConfig {
  double contrast = 0.03;  // threshold as a fraction of the peak |response|
};

/// Difference-of-adjacent-levels detector. 2D signals are reduced to a
/// response curve by the L2 norm over the semantic axis (maxima only); 1D
/// signals keep signed responses. Extrema must be strict over the 3x3
/// neighborhood in (x, level), with the level axis clamped at its ends.
inline std::vector<InterestPoint> detect_interest_points(
    const ScaleSpaceStack& stack, const InterestPointConfig& cfg = {}) {
  if (stack.size() < 3)
    throw TooShort("interest points need at least three stack levels");
  const std::size_t n_levels = stack.size() - 1;  // adjacent differences
  const bool flat = stack.semantic_len() == 1;
  const std::size_t n = flat ? stack.spatial_len()
                             : stack.level(0).values.rows;

  Matrix resp(n_levels, n, 0.0);
  for (std::size_t i = 0; i < n_levels; ++i) {
    const Matrix& a = stack.level(i).values;
    const Matrix& b = stack.level(i + 1).values;
    for (std::size_t x = 0; x < n; ++x) {
      if (flat) {
        resp.at(i, x) = b.at(x, 0) - a.at(x, 0);
      } else {
        double acc = 0.0;
        for (std::size_t y = 0; y < a.cols; ++y) {
          const double d = b.at(x, y) - a.at(x, y);
          acc += d * d;
        }
        resp.at(i, x) = std::sqrt(acc);
      }
    }
  }

  double peak = 0.0;
  for (double v : resp.data) peak = std::max(peak, std::fabs(v));
  double base_mag = 0.0;
  for (double v : stack.level(0).values.data)
    base_mag = std::max(base_mag, std::fabs(v));
  // Responses at rounding level are no contrast at all.
  if (peak <= 1e-9 * base_mag) return {};
  const double threshold = cfg.contrast * peak;

  std::vector<InterestPoint> out;
  for (std::size_t i = 0; i < n_levels; ++i)
    for (std::size_t x = 1; x + 1 < n; ++x) {
      const double v = resp.at(i, x);
      if (std::fabs(v) < threshold) continue;
      bool is_max = true;
      bool is_min = flat;  // norm responses only admit maxima
      for (int di = -1; di <= 1; ++di)
        for (int dx = -1; dx <= 1; ++dx) {
          if (di == 0 && dx == 0) continue;
          const int ii = int(i) + di;
          if (ii < 0 || ii >= int(n_levels)) continue;  // clamped level axis
          const double nb = resp.at(std::size_t(ii), std::size_t(int(x) + dx));
          if (v <= nb) is_max = false;
          if (v >= nb) is_min = false;
        }
      if (!is_max && !is_min) continue;
      InterestPoint p;
      p.x = x;
      p.level = i;
      p.scale = 0.5 * (stack.level(i).s_x + stack.level(i + 1).s_x);
      p.response = v;
      p.sign = is_max ? 1 : -1;
      out.push_back(p);
    }

  std::stable_sort(out.begin(), out.end(),
                   [](const InterestPoint& a, const InterestPoint& b) {
                     if (std::fabs(a.response) != std::fabs(b.response))
                       return std::fabs(a.response) > std::fabs(b.response);
                     if (a.level != b.level) return a.level < b.level;
                     return a.x < b.x;
                   });
  return out;
}

}  // namespace tss
