#pragma once

// Periodic orthonormal Daubechies DWT and the basis transform built from it.
//
// Alignment convention (identical to PyWavelets' "periodization" mode): for a
// length-N input with synthesis low-pass h and high-pass g[n] = (-1)^n h[L-1-n],
//
//   approx[k] = sum_n h[n] x[(2k + 1 - L/2 + n) mod N]
//   detail[k] = sum_n g[n] x[(2k + 1 - L/2 + n) mod N]
//
// Multi-level coefficients are laid out as [A_J, D_J, D_{J-1}, ..., D_1],
// coarsest first.

#include <Eigen/Core>

#include <bit>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fqr/daubechies.hpp"

namespace fqr {

enum class WaveletBoundary { kPeriodic };
enum class PadPolicy { kZeroPadToDyadic };

struct WaveletSpec {
  int order = 4;   ///< vanishing moments
  int levels = 7;  ///< decomposition depth J
  WaveletBoundary boundary = WaveletBoundary::kPeriodic;
  PadPolicy pad_policy = PadPolicy::kZeroPadToDyadic;
};

inline std::size_t next_dyadic(std::size_t n) { return std::bit_ceil(std::max<std::size_t>(n, 1)); }

/// Orthonormal filter pair with the taps validated at construction.
class DaubechiesFilter {
 public:
  explicit DaubechiesFilter(int order) {
    const auto taps = daubechies_lowpass(order);
    low_.assign(taps.begin(), taps.end());
    const std::size_t len = low_.size();
    high_.resize(len);
    for (std::size_t n = 0; n < len; ++n) {
      high_[n] = ((n % 2 == 0) ? 1.0 : -1.0) * low_[len - 1 - n];
    }
    validate();
  }

  std::span<const double> low() const { return low_; }
  std::span<const double> high() const { return high_; }
  std::size_t length() const { return low_.size(); }
  long offset() const { return 1 - static_cast<long>(low_.size()) / 2; }

 private:
  void validate() const {
    const std::size_t len = low_.size();
    for (std::size_t shift = 0; shift < len; shift += 2) {
      double acc = 0.0;
      for (std::size_t n = 0; n + shift < len; ++n) acc += low_[n] * low_[n + shift];
      const double expected = shift == 0 ? 1.0 : 0.0;
      if (std::abs(acc - expected) > 1e-12) {
        throw std::logic_error("Daubechies taps fail orthonormality at shift " +
                               std::to_string(shift));
      }
    }
  }

  std::vector<double> low_;
  std::vector<double> high_;
};

namespace detail {

inline void check_dyadic(std::size_t n, int levels) {
  if (n == 0 || !std::has_single_bit(n)) {
    throw std::invalid_argument("DWT length " + std::to_string(n) + " is not a power of two");
  }
  if (levels < 1) throw std::invalid_argument("DWT levels must be >= 1");
  if ((std::size_t{1} << levels) > n) {
    throw std::invalid_argument("DWT depth " + std::to_string(levels) + " too deep for length " +
                                std::to_string(n));
  }
}

inline std::size_t wrap(long idx, std::size_t n) {
  const long m = static_cast<long>(n);
  long r = idx % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

// One analysis step on data[0, n): writes approx to out[0, n/2) and detail to
// out[n/2, n).
inline void analysis_step(const DaubechiesFilter& f, const double* data, std::size_t n,
                          double* out) {
  const auto h = f.low();
  const auto g = f.high();
  const std::size_t half = n / 2;
  const long off = f.offset();
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0;
    double d = 0.0;
    const long base = 2 * static_cast<long>(k) + off;
    for (std::size_t j = 0; j < h.size(); ++j) {
      const double x = data[wrap(base + static_cast<long>(j), n)];
      a += h[j] * x;
      d += g[j] * x;
    }
    out[k] = a;
    out[half + k] = d;
  }
}

// Inverse of analysis_step: coeffs[0, n/2) approx, coeffs[n/2, n) detail.
inline void synthesis_step(const DaubechiesFilter& f, const double* coeffs, std::size_t n,
                           double* out) {
  const auto h = f.low();
  const auto g = f.high();
  const std::size_t half = n / 2;
  const long off = f.offset();
  std::fill(out, out + n, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    const double a = coeffs[k];
    const double d = coeffs[half + k];
    const long base = 2 * static_cast<long>(k) + off;
    for (std::size_t j = 0; j < h.size(); ++j) {
      out[wrap(base + static_cast<long>(j), n)] += h[j] * a + g[j] * d;
    }
  }
}

inline std::vector<double> forward(const DaubechiesFilter& filter, std::span<const double> signal,
                                   int levels) {
  check_dyadic(signal.size(), levels);
  std::vector<double> coeffs(signal.begin(), signal.end());
  std::vector<double> scratch(signal.size());
  std::size_t n = signal.size();
  for (int level = 0; level < levels; ++level) {
    analysis_step(filter, coeffs.data(), n, scratch.data());
    std::copy(scratch.begin(), scratch.begin() + static_cast<long>(n), coeffs.begin());
    n /= 2;
  }
  return coeffs;
}

inline std::vector<double> inverse(const DaubechiesFilter& filter, std::span<const double> coeffs,
                                   int levels) {
  check_dyadic(coeffs.size(), levels);
  std::vector<double> signal(coeffs.begin(), coeffs.end());
  std::vector<double> scratch(coeffs.size());
  std::size_t n = coeffs.size() >> (levels - 1);
  for (int level = 0; level < levels; ++level) {
    synthesis_step(filter, signal.data(), n, scratch.data());
    std::copy(scratch.begin(), scratch.begin() + static_cast<long>(n), signal.begin());
    n *= 2;
  }
  return signal;
}

}  // namespace detail

/// Forward multi-level DWT of a dyadic-length signal.
inline std::vector<double> dwt(std::span<const double> signal, const WaveletSpec& spec) {
  detail::check_dyadic(signal.size(), spec.levels);
  return detail::forward(DaubechiesFilter(spec.order), signal, spec.levels);
}

/// Inverse multi-level DWT.
inline std::vector<double> idwt(std::span<const double> coeffs, const WaveletSpec& spec) {
  detail::check_dyadic(coeffs.size(), spec.levels);
  return detail::inverse(DaubechiesFilter(spec.order), coeffs, spec.levels);
}

/// A contiguous block of basis indices sharing one global shrinkage scale.
struct BasisGroup {
  std::size_t begin = 0;
  std::size_t size = 0;
};

enum class BasisKind { kWavelet, kIdentity };

/// Synthesis matrix Phi (K x padded grid) with its regularisation groups.
/// Immutable after construction.
class BasisTransform {
 public:
  /// Identity basis on a grid of `grid_len` points (K = T, one group). Used by
  /// the location-wise Bayesian QR fit and by oracle tests.
  static BasisTransform identity(std::size_t grid_len) {
    if (grid_len == 0) throw std::invalid_argument("identity basis needs a non-empty grid");
    BasisTransform b;
    b.kind_ = BasisKind::kIdentity;
    b.grid_len_ = grid_len;
    b.padded_len_ = grid_len;
    b.groups_ = {BasisGroup{0, grid_len}};
    b.build_sparse_columns();
    return b;
  }

  static BasisTransform wavelet(std::size_t grid_len, const WaveletSpec& spec) {
    if (grid_len == 0) throw std::invalid_argument("wavelet basis needs a non-empty grid");
    daubechies_lowpass(spec.order);  // throws on unsupported order
    BasisTransform b;
    b.kind_ = BasisKind::kWavelet;
    b.spec_ = spec;
    b.grid_len_ = grid_len;
    b.padded_len_ = next_dyadic(grid_len);
    detail::check_dyadic(b.padded_len_, spec.levels);
    b.filter_.emplace_back(spec.order);

    const std::size_t coarse = b.padded_len_ >> spec.levels;
    b.groups_.push_back({0, coarse});
    std::size_t start = coarse;
    for (int j = spec.levels; j >= 1; --j) {
      const std::size_t size = b.padded_len_ >> j;
      b.groups_.push_back({start, size});
      start += size;
    }
    b.build_sparse_columns();
    return b;
  }

  BasisKind kind() const { return kind_; }
  bool is_identity() const { return kind_ == BasisKind::kIdentity; }
  const WaveletSpec& spec() const { return spec_; }
  std::size_t size() const { return padded_len_; }  ///< K
  std::size_t grid_len() const { return grid_len_; }  ///< T
  std::size_t padded_len() const { return padded_len_; }  ///< T'
  const std::vector<BasisGroup>& groups() const { return groups_; }

  /// Group index of every basis function.
  std::vector<std::size_t> group_of_index() const {
    std::vector<std::size_t> out(size());
    for (std::size_t j = 0; j < groups_.size(); ++j) {
      for (std::size_t h = 0; h < groups_[j].size; ++h) out[groups_[j].begin + h] = j;
    }
    return out;
  }

  /// B(t) on the observed grid from basis coefficients (length K -> length T).
  void synthesize(std::span<const double> coeffs, std::span<double> out) const {
    if (coeffs.size() != size() || out.size() != grid_len_) {
      throw std::invalid_argument("synthesize: size mismatch");
    }
    if (is_identity()) {
      std::copy(coeffs.begin(), coeffs.end(), out.begin());
      return;
    }
    const auto padded = synthesize_padded(coeffs);
    std::copy(padded.begin(), padded.begin() + static_cast<long>(grid_len_), out.begin());
  }

  /// Full inverse transform on the padded grid.
  std::vector<double> synthesize_padded(std::span<const double> coeffs) const {
    if (is_identity()) return {coeffs.begin(), coeffs.end()};
    return detail::inverse(filter_.front(), coeffs, spec_.levels);
  }

  /// Phi * g where g lives on the observed grid and is zero on the padding.
  void analyze(std::span<const double> grid_values, std::span<double> out) const {
    if (grid_values.size() != grid_len_ || out.size() != size()) {
      throw std::invalid_argument("analyze: size mismatch");
    }
    if (is_identity()) {
      std::copy(grid_values.begin(), grid_values.end(), out.begin());
      return;
    }
    std::vector<double> padded(padded_len_, 0.0);
    std::copy(grid_values.begin(), grid_values.end(), padded.begin());
    const auto c = detail::forward(filter_.front(), padded, spec_.levels);
    std::copy(c.begin(), c.end(), out.begin());
  }

  /// Lower triangle of Phi * diag(weights) * Phi' (weights on the observed
  /// grid). The upper triangle of `out` is left untouched.
  void weighted_gram(std::span<const double> weights, Eigen::MatrixXd& out) const {
    if (weights.size() != grid_len_) throw std::invalid_argument("weighted_gram: size mismatch");
    const auto k = static_cast<Eigen::Index>(size());
    out.resize(k, k);
    out.triangularView<Eigen::Lower>().setZero();
    for (std::size_t l = 0; l < grid_len_; ++l) {
      const double w = weights[l];
      if (w == 0.0) continue;
      const std::size_t b = col_start_[l];
      const std::size_t e = col_start_[l + 1];
      for (std::size_t u = b; u < e; ++u) {
        const double wu = w * col_value_[u];
        const auto row_u = static_cast<Eigen::Index>(col_index_[u]);
        for (std::size_t v = b; v <= u; ++v) {
          out(row_u, static_cast<Eigen::Index>(col_index_[v])) += wu * col_value_[v];
        }
      }
    }
  }

  /// Dense K x T synthesis matrix restricted to the observed grid.
  Eigen::MatrixXd phi() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(size()),
                                              static_cast<Eigen::Index>(grid_len_));
    for (std::size_t l = 0; l < grid_len_; ++l) {
      for (std::size_t u = col_start_[l]; u < col_start_[l + 1]; ++u) {
        m(static_cast<Eigen::Index>(col_index_[u]), static_cast<Eigen::Index>(l)) = col_value_[u];
      }
    }
    return m;
  }

  /// Dense K x T' synthesis matrix on the padded grid.
  Eigen::MatrixXd phi_padded() const {
    const auto k = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd m(k, static_cast<Eigen::Index>(padded_len_));
    std::vector<double> unit(size(), 0.0);
    for (std::size_t r = 0; r < size(); ++r) {
      unit[r] = 1.0;
      const auto row = synthesize_padded(unit);
      unit[r] = 0.0;
      for (std::size_t c = 0; c < padded_len_; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
      }
    }
    return m;
  }

 private:
  BasisTransform() = default;

  // Column-compressed Phi restricted to the observed grid: for location l the
  // basis functions with phi_k(t_l) != 0, ordered by k.
  void build_sparse_columns() {
    col_start_.assign(grid_len_ + 1, 0);
    col_index_.clear();
    col_value_.clear();
    if (is_identity()) {
      for (std::size_t l = 0; l < grid_len_; ++l) {
        col_start_[l] = l;
        col_index_.push_back(l);
        col_value_.push_back(1.0);
      }
      col_start_[grid_len_] = grid_len_;
      return;
    }
    std::vector<std::vector<std::pair<std::size_t, double>>> cols(grid_len_);
    std::vector<double> unit(size(), 0.0);
    for (std::size_t k = 0; k < size(); ++k) {
      unit[k] = 1.0;
      const auto row = detail::inverse(filter_.front(), unit, spec_.levels);
      unit[k] = 0.0;
      for (std::size_t l = 0; l < grid_len_; ++l) {
        if (row[l] != 0.0) cols[l].emplace_back(k, row[l]);
      }
    }
    for (std::size_t l = 0; l < grid_len_; ++l) {
      col_start_[l] = col_index_.size();
      for (const auto& [k, v] : cols[l]) {
        col_index_.push_back(k);
        col_value_.push_back(v);
      }
    }
    col_start_[grid_len_] = col_index_.size();
  }

  BasisKind kind_ = BasisKind::kWavelet;
  WaveletSpec spec_{};
  std::size_t grid_len_ = 0;
  std::size_t padded_len_ = 0;
  std::vector<BasisGroup> groups_;
  std::vector<DaubechiesFilter> filter_;
  std::vector<std::size_t> col_start_;
  std::vector<std::size_t> col_index_;
  std::vector<double> col_value_;
};

/// Builds the wavelet basis for a grid of `grid_len` points, zero-padding the
/// coefficient space to the next power of two.
inline BasisTransform build_basis(std::size_t grid_len, const WaveletSpec& spec) {
  return BasisTransform::wavelet(grid_len, spec);
}

}  // namespace fqr
