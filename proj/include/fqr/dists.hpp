#pragma once

// Densities and variate generators used by the model and the sampler.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "fqr/error.hpp"
#include "fqr/rng.hpp"

namespace fqr {

/// Quantile level tau together with the constants of the asymmetric-Laplace
/// normal scale mixture: eps = theta * xi + sqrt(psi_scale * sigma * xi) * Z.
class QuantileLevel {
 public:
  explicit QuantileLevel(double tau) : tau_(tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
      throw std::invalid_argument("quantile level must lie in (0, 1), got " + std::to_string(tau));
    }
  }

  double tau() const { return tau_; }
  /// tau * (1 - tau)
  double spread() const { return tau_ * (1.0 - tau_); }
  double theta() const { return (1.0 - 2.0 * tau_) / spread(); }
  double psi_scale() const { return 2.0 / spread(); }

 private:
  double tau_;
};

/// rho_tau(u) = u * (tau - 1{u <= 0})
inline double check_loss(double u, const QuantileLevel& q) {
  return u * (q.tau() - (u <= 0.0 ? 1.0 : 0.0));
}

/// Log density of AL(0, tau, sigma).
inline double al_logpdf(double eps, const QuantileLevel& q, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("al_logpdf: sigma must be positive");
  return std::log(q.spread() / sigma) - check_loss(eps, q) / sigma;
}

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be positive and finite");
  }
}

/// Exponential with the given mean.
inline double sample_exponential(double mean, RngStream& rng) {
  require_positive(mean, "exponential mean");
  return -mean * std::log(rng.uniform());
}

/// Gamma(shape, rate).
inline double sample_gamma(double shape, double rate, RngStream& rng) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  std::gamma_distribution<double> gamma(shape, 1.0);
  return gamma(rng) / rate;
}

/// Inverse gamma with density proportional to x^(-shape-1) exp(-rate/x).
inline double sample_inverse_gamma(double shape, double rate, RngStream& rng) {
  require_positive(shape, "inverse-gamma shape");
  require_positive(rate, "inverse-gamma rate");
  std::gamma_distribution<double> gamma(shape, 1.0);
  double g = gamma(rng);
  // Gamma(shape < 1) can underflow to zero.
  g = std::max(g, std::numeric_limits<double>::min());
  return rate / g;
}

/// Inverse Gaussian IG(mean, shape) via the Michael-Schucany-Haas
/// transformation. The root is evaluated in the cancellation-free form
/// mean / (1 + w + sqrt(w^2 + 2w)) with w = mean * nu^2 / (2 shape), which stays
/// accurate when mean / shape is huge.
inline double sample_inverse_gaussian(double mean, double shape, RngStream& rng) {
  require_positive(mean, "inverse-Gaussian mean");
  require_positive(shape, "inverse-Gaussian shape");
  const double nu = rng.normal();
  const double w = mean * nu * nu / (2.0 * shape);
  const double x = mean / (1.0 + w + std::sqrt(w * w + 2.0 * w));
  if (rng.uniform() * (mean + x) <= mean) return x;
  return mean * (mean / x);
}

/// Standard normal.
inline double sample_normal(RngStream& rng) { return rng.normal(); }

/// Draws from N(M^-1 m, M^-1) given precision M and linear term m. Holds a
/// reusable factorisation so repeated K x K draws do not allocate.
class PrecisionSampler {
 public:
  static constexpr int kMaxJitterRetries = 3;

  explicit PrecisionSampler(Eigen::Index dim = 0) : llt_(dim), z_(dim), dim_(dim) {}

  Eigen::Index size() const { return dim_; }

  /// Factorises `precision` (lower triangle is read) and writes a draw to
  /// `out`. Returns the number of jitter retries that were needed.
  int draw(const Eigen::MatrixXd& precision, const Eigen::VectorXd& linear, RngStream& rng,
           Eigen::VectorXd& out) {
    const Eigen::Index k = precision.rows();
    if (precision.cols() != k || linear.size() != k) {
      throw std::invalid_argument("sample_mvn_precision: dimension mismatch");
    }
    int retries = factorize(precision);
    out = llt_.solve(linear);
    z_.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) z_[i] = rng.normal();
    llt_.matrixU().solveInPlace(z_);
    out += z_;
    return retries;
  }

 private:
  int factorize(const Eigen::MatrixXd& precision) {
    llt_.compute(precision);
    if (llt_.info() == Eigen::Success) return 0;
    const Eigen::Index k = precision.rows();
    const double step = 1e-10 * precision.trace() / static_cast<double>(k);
    for (int attempt = 1; attempt <= kMaxJitterRetries; ++attempt) {
      jittered_ = precision;
      jittered_.diagonal().array() += step * attempt;
      llt_.compute(jittered_);
      if (llt_.info() == Eigen::Success) return attempt;
    }
    throw NumericalError("Cholesky factorisation failed after " +
                         std::to_string(kMaxJitterRetries) + " jitter retries");
  }

  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd jittered_;
  Eigen::VectorXd z_;
  Eigen::Index dim_;
};

/// One-shot multivariate normal draw in precision parameterisation.
inline Eigen::VectorXd sample_mvn_precision(const Eigen::MatrixXd& precision,
                                            const Eigen::VectorXd& linear, RngStream& rng) {
  PrecisionSampler sampler(precision.rows());
  Eigen::VectorXd out;
  sampler.draw(precision, linear, rng, out);
  return out;
}

}  // namespace fqr
