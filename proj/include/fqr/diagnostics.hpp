#pragma once

// Convergence diagnostics for scalar MCMC traces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace fqr {

namespace detail {

inline double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

}  // namespace detail

/// Spectral density at frequency zero, Bartlett lag window of width sqrt(n).
inline double spectral_density_at_zero(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double mu = detail::mean_of(x);
  const auto max_lag = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = lag; t < n; ++t) s += (x[t] - mu) * (x[t - lag] - mu);
    return s / static_cast<double>(n);
  };
  double s0 = autocov(0);
  for (std::size_t lag = 1; lag <= max_lag && lag < n; ++lag) {
    const double weight = 1.0 - static_cast<double>(lag) / static_cast<double>(max_lag + 1);
    s0 += 2.0 * weight * autocov(lag);
  }
  return std::max(s0, 0.0);
}

/// Geweke z-score comparing the first `first` and last `last` fractions of a trace.
/// Returns 0 for constant traces.
inline double geweke_z(std::span<const double> trace, double first = 0.1, double last = 0.5) {
  const std::size_t n = trace.size();
  const auto na = static_cast<std::size_t>(std::floor(first * static_cast<double>(n)));
  const auto nb = static_cast<std::size_t>(std::floor(last * static_cast<double>(n)));
  if (na < 2 || nb < 2) return 0.0;
  const auto a = trace.first(na);
  const auto b = trace.last(nb);
  const double var = spectral_density_at_zero(a) / static_cast<double>(na) +
                     spectral_density_at_zero(b) / static_cast<double>(nb);
  if (!(var > 0.0)) return 0.0;
  return (detail::mean_of(a) - detail::mean_of(b)) / std::sqrt(var);
}

/// Monte Carlo standard error of the trace mean by non-overlapping batch means
/// with floor(sqrt(n)) batches.
inline double batch_means_se(std::span<const double> trace) {
  const std::size_t n = trace.size();
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  if (batches < 2) return 0.0;
  const std::size_t size = n / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) means[b] = detail::mean_of(trace.subspan(b * size, size));
  const double mu = detail::mean_of(means);
  double ss = 0.0;
  for (double m : means) ss += (m - mu) * (m - mu);
  const double batch_var = ss / static_cast<double>(batches - 1);
  return std::sqrt(batch_var / static_cast<double>(batches));
}

}  // namespace fqr
