#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "tss/error.hpp"
#include "tss/matrix.hpp"
#include "tss/parallel.hpp"
#include "tss/signal.hpp"

namespace tss {

enum class KernelFamily {
  SampledGaussian,
  DiscreteGaussian,
  Poisson,
  GaussianDerivative
};

enum class BoundaryMode { Renormalize, Mirror, ZeroPad };

inline constexpr double kDefaultTruncMass = 1e-12;

/// 1D kernel given by taps at integer displacements. taps[center_offset]
/// is the tap at displacement 0. Smoothing families carry non-negative taps
/// summing to 1 after truncation renormalization; the Poisson family has no
/// taps at negative displacement.
struct Kernel1D {
  std::vector<double> taps;
  int center_offset = 0;
  double scale = 0.0;
  KernelFamily family = KernelFamily::DiscreteGaussian;
  int derivative_order = 0;

  int min_displacement() const { return -center_offset; }
  int max_displacement() const {
    return static_cast<int>(taps.size()) - 1 - center_offset;
  }
  double tap(int n) const {
    const int i = n + center_offset;
    if (i < 0 || i >= static_cast<int>(taps.size())) return 0.0;
    return taps[static_cast<std::size_t>(i)];
  }
  bool smoothing() const { return family != KernelFamily::GaussianDerivative; }

  double sum() const {
    double t = 0.0;
    for (double v : taps) t += v;
    return t;
  }
};

namespace detail {

inline void check_trunc_mass(double trunc_mass) {
  if (!(trunc_mass > 0.0) || trunc_mass > 1e-3)
    throw Error("trunc_mass must lie in (0, 1e-3]");
}

/// e^{-s} I_n(s) for n = 0..n_max. Ascending power series below s = 20,
/// downward Miller recurrence above, normalized through
/// I_0(s) + 2 sum_k I_k(s) = e^s. Relative accuracy ~1e-14.
inline std::vector<double> discrete_gaussian_pmf(double s, int n_max) {
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
  if (s == 0.0) {
    out[0] = 1.0;
    return out;
  }
  if (s <= 20.0) {
    const double es = std::exp(-s);
    const double half = 0.5 * s;
    for (int n = 0; n <= n_max; ++n) {
      // term_0 = (s/2)^n / n!, term_{k+1} = term_k (s/2)^2 / ((k+1)(k+n+1))
      double term = std::exp(n * std::log(half) - std::lgamma(n + 1.0));
      double acc = term;
      for (int k = 0; term > acc * 1e-18; ++k) {
        term *= half * half / ((k + 1.0) * (k + n + 1.0));
        acc += term;
      }
      out[static_cast<std::size_t>(n)] = es * acc;
    }
    return out;
  }
  const int start =
      n_max + 30 + static_cast<int>(2.0 * std::sqrt(s + n_max));
  std::vector<double> v(static_cast<std::size_t>(start) + 2, 0.0);
  v[static_cast<std::size_t>(start) + 1] = 0.0;
  v[static_cast<std::size_t>(start)] = 1e-280;
  for (int k = start; k >= 1; --k) {
    v[static_cast<std::size_t>(k) - 1] =
        v[static_cast<std::size_t>(k) + 1] +
        (2.0 * k / s) * v[static_cast<std::size_t>(k)];
    if (v[static_cast<std::size_t>(k) - 1] > 1e250) {
      for (std::size_t j = static_cast<std::size_t>(k) - 1; j < v.size(); ++j)
        v[j] *= 1e-250;
    }
  }
  double norm = v[0];
  for (int k = 1; k <= start; ++k) norm += 2.0 * v[static_cast<std::size_t>(k)];
  for (int n = 0; n <= n_max; ++n)
    out[static_cast<std::size_t>(n)] = v[static_cast<std::size_t>(n)] / norm;
  return out;
}

inline Kernel1D impulse_kernel(KernelFamily family) {
  Kernel1D k;
  k.taps = {1.0};
  k.center_offset = 0;
  k.scale = 0.0;
  k.family = family;
  return k;
}

inline void renormalize_taps(Kernel1D& k) {
  const double s = k.sum();
  for (double& t : k.taps) t /= s;
}

}  // namespace detail

/// Gaussian density sampled at integer displacements, truncated to
/// |n| <= ceil(4 sqrt(s)) extended until the omitted tail mass drops below
/// trunc_mass, then renormalized to sum 1.
inline Kernel1D sampled_gaussian_kernel(double s,
                                        double trunc_mass = kDefaultTruncMass) {
  detail::check_trunc_mass(trunc_mass);
  if (!(s > 0.0)) throw InvalidScale("sampled Gaussian requires s > 0");
  int radius = static_cast<int>(std::ceil(4.0 * std::sqrt(s)));
  while (std::erfc((radius + 0.5) / std::sqrt(2.0 * s)) >= trunc_mass)
    ++radius;
  Kernel1D k;
  k.family = KernelFamily::SampledGaussian;
  k.scale = s;
  k.center_offset = radius;
  k.taps.assign(static_cast<std::size_t>(2 * radius) + 1, 0.0);
  const double norm = 1.0 / std::sqrt(2.0 * M_PI * s);
  for (int n = -radius; n <= radius; ++n)
    k.taps[static_cast<std::size_t>(n + radius)] =
        norm * std::exp(-0.5 * n * n / s);
  detail::renormalize_taps(k);
  return k;
}

/// Discrete Gaussian kernel e^{-s} I_n(s); the unique integer-grid smoothing
/// family with exact semigroup structure. s = 0 yields the unit impulse.
inline Kernel1D discrete_gaussian_kernel(double s,
                                         double trunc_mass = kDefaultTruncMass) {
  detail::check_trunc_mass(trunc_mass);
  if (s < 0.0) throw InvalidScale("discrete Gaussian requires s >= 0");
  if (s == 0.0) return detail::impulse_kernel(KernelFamily::DiscreteGaussian);

  int radius = std::max(1, static_cast<int>(std::ceil(4.0 * std::sqrt(s))));
  std::vector<double> pmf;
  for (;;) {
    pmf = detail::discrete_gaussian_pmf(s, radius);
    double mass = pmf[0];
    for (int n = 1; n <= radius; ++n)
      mass += 2.0 * pmf[static_cast<std::size_t>(n)];
    if (1.0 - mass < trunc_mass) break;
    radius += std::max(1, radius / 4);
  }
  Kernel1D k;
  k.family = KernelFamily::DiscreteGaussian;
  k.scale = s;
  k.center_offset = radius;
  k.taps.assign(static_cast<std::size_t>(2 * radius) + 1, 0.0);
  for (int n = -radius; n <= radius; ++n)
    k.taps[static_cast<std::size_t>(n + radius)] =
        pmf[static_cast<std::size_t>(std::abs(n))];
  detail::renormalize_taps(k);
  return k;
}

/// Causal Poisson kernel e^{-s} s^n / n!, taps at n >= 0 only. Convolution
/// with it reads the current and earlier positions, never future ones.
inline Kernel1D poisson_kernel(double s, double trunc_mass = kDefaultTruncMass) {
  detail::check_trunc_mass(trunc_mass);
  if (s < 0.0) throw InvalidScale("Poisson kernel requires s >= 0");
  if (s == 0.0) return detail::impulse_kernel(KernelFamily::Poisson);

  Kernel1D k;
  k.family = KernelFamily::Poisson;
  k.scale = s;
  k.center_offset = 0;
  const double log_s = std::log(s);
  double log_p = -s;  // log of e^{-s} s^n / n! at n = 0
  double cum = 0.0;
  for (int n = 0; cum < 1.0 - trunc_mass; ++n) {
    if (n > 0) log_p += log_s - std::log(static_cast<double>(n));
    const double p = std::exp(log_p);
    k.taps.push_back(p);
    cum += p;
    if (n > s + 40.0 * std::sqrt(s + 1.0) + 100.0) break;  // safety stop
  }
  detail::renormalize_taps(k);
  return k;
}

/// k-th analytic derivative of the Gaussian density sampled at integer
/// displacements (orders 1..3). Odd orders are antisymmetric by construction
/// so their taps cancel in pairs; even orders keep the raw samples unless
/// zero_sum_even is set.
inline Kernel1D gaussian_derivative_kernel(double s, int order,
                                           double trunc_mass = kDefaultTruncMass,
                                           bool zero_sum_even = false) {
  detail::check_trunc_mass(trunc_mass);
  if (!(s > 0.0)) throw InvalidScale("Gaussian derivative requires s > 0");
  if (order < 1 || order > 3)
    throw UnsupportedOrder("derivative order must be 1, 2, or 3");

  int radius = static_cast<int>(std::ceil(4.0 * std::sqrt(s)));
  while (std::erfc((radius + 0.5) / std::sqrt(2.0 * s)) >= trunc_mass)
    ++radius;
  radius += order;

  Kernel1D k;
  k.family = KernelFamily::GaussianDerivative;
  k.derivative_order = order;
  k.scale = s;
  k.center_offset = radius;
  k.taps.assign(static_cast<std::size_t>(2 * radius) + 1, 0.0);
  const double norm = 1.0 / std::sqrt(2.0 * M_PI * s);
  auto density = [&](double x) { return norm * std::exp(-0.5 * x * x / s); };
  auto deriv = [&](double x) {
    const double g = density(x);
    switch (order) {
      case 1:
        return -x / s * g;
      case 2:
        return (x * x - s) / (s * s) * g;
      default:
        return -x * (x * x - 3.0 * s) / (s * s * s) * g;
    }
  };
  const bool odd = (order % 2) == 1;
  k.taps[static_cast<std::size_t>(radius)] = odd ? 0.0 : deriv(0.0);
  for (int n = 1; n <= radius; ++n) {
    const double v = deriv(static_cast<double>(n));
    k.taps[static_cast<std::size_t>(radius + n)] = v;
    k.taps[static_cast<std::size_t>(radius - n)] = odd ? -v : v;
  }
  if (!odd && zero_sum_even) {
    const double mean = k.sum() / static_cast<double>(k.taps.size());
    for (double& t : k.taps) t -= mean;
  }
  return k;
}

namespace detail {

inline int mirror_index(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
  return i;
}

/// Gather convolution with per-position renormalization of the overlapping
/// taps. Does not restore the global mass; callers do that once per signal.
inline std::vector<double> convolve_renorm_raw(const std::vector<double>& sig,
                                               const Kernel1D& k) {
  const int n = static_cast<int>(sig.size());
  std::vector<double> out(sig.size(), 0.0);
  for (int x = 0; x < n; ++x) {
    double acc = 0.0, weight = 0.0;
    for (int d = k.min_displacement(); d <= k.max_displacement(); ++d) {
      const int src = x - d;
      if (src < 0 || src >= n) continue;
      const double t = k.tap(d);
      acc += t * sig[static_cast<std::size_t>(src)];
      weight += t;
    }
    out[static_cast<std::size_t>(x)] = weight > 0.0 ? acc / weight : 0.0;
  }
  return out;
}

inline std::vector<double> convolve_pad(const std::vector<double>& sig,
                                        const Kernel1D& k, bool mirror) {
  const int n = static_cast<int>(sig.size());
  std::vector<double> out(sig.size(), 0.0);
  for (int x = 0; x < n; ++x) {
    double acc = 0.0;
    for (int d = k.min_displacement(); d <= k.max_displacement(); ++d) {
      const int src = x - d;
      if (src < 0 || src >= n) {
        if (!mirror) continue;
        acc += k.tap(d) * sig[static_cast<std::size_t>(mirror_index(src, n))];
      } else {
        acc += k.tap(d) * sig[static_cast<std::size_t>(src)];
      }
    }
    out[static_cast<std::size_t>(x)] = acc;
  }
  return out;
}

}  // namespace detail

/// Convolves a signal with a kernel; output length equals input length.
/// Renormalize mode rescales the overlapping taps to sum 1 at each position
/// and restores the signal's total mass, so non-negative signals keep their
/// mass exactly; it requires a smoothing kernel.
inline std::vector<double> convolve_1d(const std::vector<double>& signal,
                                       const Kernel1D& kernel,
                                       BoundaryMode boundary) {
  if (signal.empty()) throw Error("convolve_1d: empty signal");
  switch (boundary) {
    case BoundaryMode::ZeroPad:
      return detail::convolve_pad(signal, kernel, false);
    case BoundaryMode::Mirror:
      return detail::convolve_pad(signal, kernel, true);
    case BoundaryMode::Renormalize: {
      if (!kernel.smoothing())
        throw Error("renormalize boundary requires a smoothing kernel");
      std::vector<double> out = detail::convolve_renorm_raw(signal, kernel);
      double in_total = 0.0, out_total = 0.0;
      for (double v : signal) in_total += v;
      for (double v : out) out_total += v;
      if (in_total != 0.0 && out_total != 0.0) {
        const double f = in_total / out_total;
        for (double& v : out) v *= f;
      }
      return out;
    }
  }
  throw Error("convolve_1d: unknown boundary mode");
}

/// In-place operator on the semantic (column) axis of a matrix; rows are
/// treated independently. An empty function is the identity.
using SemanticOp = std::function<void(Matrix&)>;

/// Separable spatial-semantic smoothing: the spatial kernel runs along every
/// column, then the semantic operator along every row. Under Renormalize the
/// total mass of the input is restored exactly once at the end, which keeps
/// the two axis passes commutative.
inline Signal2D smooth_separable_2d(const Signal2D& sig, double s_x,
                                    const SemanticOp& semantic,
                                    BoundaryMode boundary,
                                    KernelFamily family =
                                        KernelFamily::DiscreteGaussian) {
  if (s_x < 0.0) throw InvalidScale("spatial scale must be >= 0");
  Signal2D out = sig;
  const double total_in = sig.total();

  if (s_x > 0.0) {
    Kernel1D k;
    switch (family) {
      case KernelFamily::SampledGaussian:
        k = sampled_gaussian_kernel(s_x);
        break;
      case KernelFamily::DiscreteGaussian:
        k = discrete_gaussian_kernel(s_x);
        break;
      case KernelFamily::Poisson:
        k = poisson_kernel(s_x);
        break;
      default:
        throw Error("smooth_separable_2d requires a smoothing family");
    }
    parallel_for(out.values.cols, [&](std::size_t y) {
      std::vector<double> col = out.values.column(y);
      switch (boundary) {
        case BoundaryMode::ZeroPad:
          col = detail::convolve_pad(col, k, false);
          break;
        case BoundaryMode::Mirror:
          col = detail::convolve_pad(col, k, true);
          break;
        case BoundaryMode::Renormalize:
          col = detail::convolve_renorm_raw(col, k);
          break;
      }
      out.values.set_column(y, col);
    });
  }

  if (semantic) semantic(out.values);

  if (boundary == BoundaryMode::Renormalize) {
    const double total_out = out.total();
    if (total_in != 0.0 && total_out != 0.0) {
      const double f = total_in / total_out;
      for (double& v : out.values.data) v *= f;
    }
    out.normalized = sig.normalized;
  } else {
    out.normalized = false;
  }
  return out;
}

/// Explicit finite-difference integration of the 1D heat equation
/// d_s gamma = 1/2 laplacian(gamma) up to scale s with zero-flux boundaries.
/// Test oracle for Gaussian smoothing; dt above 0.25 is rejected as unstable.
inline std::vector<double> diffusion_oracle(const std::vector<double>& sig,
                                            double s, double dt) {
  if (sig.empty()) throw Error("diffusion_oracle: empty signal");
  if (s < 0.0) throw InvalidScale("diffusion scale must be >= 0");
  if (!(dt > 0.0) || dt > 0.25)
    throw UnstableStep("diffusion step must lie in (0, 0.25]");
  if (s == 0.0) return sig;

  const int steps = static_cast<int>(std::ceil(s / dt));
  const double h = s / steps;
  const int n = static_cast<int>(sig.size());
  std::vector<double> cur = sig, next(sig.size());
  for (int step = 0; step < steps; ++step) {
    for (int x = 0; x < n; ++x) {
      const double left = cur[static_cast<std::size_t>(x == 0 ? 0 : x - 1)];
      const double right =
          cur[static_cast<std::size_t>(x == n - 1 ? n - 1 : x + 1)];
      next[static_cast<std::size_t>(x)] =
          cur[static_cast<std::size_t>(x)] +
          0.5 * h *
              (left - 2.0 * cur[static_cast<std::size_t>(x)] + right);
    }
    cur.swap(next);
  }
  return cur;
}

}  // namespace tss
