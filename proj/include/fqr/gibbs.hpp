#pragma once

// Blocked Gibbs sampler for functional quantile regression.
//
// Model at quantile tau, for curve i and grid location l:
//
//   y_i(t_l) = X_i' B(t_l) + theta xi_il + sqrt(psi_scale sigma_l xi_il) Z_il,
//   xi_il ~ Exp(mean sigma_l),   B = B* Phi,
//   B*_ajh ~ N(0, lambda_ajh^2 psi_aj^2),   sigma_l ~ IG(a0, b0).
//
// One iteration runs, in this order:
//   1. sigma_l | B, y           (xi integrated out)  ~ IG(a0 + N, b0 + sum_i rho(r_il))
//   2. 1/xi_il | B, sigma, y    ~ InvGauss(1/(tau(1-tau)|r_il|), 1/(2 sigma_l tau(1-tau)))
//   3. B*_a | rest, a = 1..p    ~ N(M^-1 m, M^-1)
//   4. local, global and hyper scales of the shrinkage prior
// and then records B = B* Phi. Step 1 marginalises xi, so it must stay ahead
// of step 2.
//
// Every random draw comes from a stream keyed by (seed, chain, site,
// iteration), so the result does not depend on the number of threads.

#include <Eigen/Core>
#include <Eigen/QR>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fqr/dataset.hpp"
#include "fqr/diagnostics.hpp"
#include "fqr/dists.hpp"
#include "fqr/error.hpp"
#include "fqr/rng.hpp"
#include "fqr/wavelet.hpp"

namespace fqr {

/// Local shrinkage law g1.
enum class PriorFamily {
  kHorseshoe,  ///< lambda ~ C+(0, 1)
  kLasso,      ///< lambda^2 ~ Exp(rate 1/2)
  kRidge,      ///< lambda = 1
};

/// Treatment of the global scales psi_aj ~ C+(0, s_a).
enum class GlobalScaleMode {
  kVagueHyperprior,  ///< s_a ~ C+(0, 1)
  kFixedScale,       ///< s_a = PriorSpec::scale
  kFixedPsi,         ///< psi_aj = PriorSpec::scale, not updated
};

struct PriorSpec {
  PriorFamily family = PriorFamily::kHorseshoe;
  GlobalScaleMode global = GlobalScaleMode::kVagueHyperprior;
  double scale = 1.0;
};

struct McmcSettings {
  std::size_t n_iter = 8000;
  std::size_t burn_in = 2000;
  std::size_t thin = 3;
  std::size_t n_chains = 1;
  std::uint64_t master_seed = 1;

  std::size_t retained_per_chain() const { return (n_iter - burn_in) / thin; }
};

struct ModelSpec {
  QuantileLevel tau{0.5};
  BasisKind basis = BasisKind::kWavelet;
  WaveletSpec wavelet{};
  PriorSpec prior{};
  double sigma_a0 = 0.01;
  double sigma_b0 = 0.01;
  McmcSettings mcmc{};

  void validate() const {
    if (mcmc.burn_in >= mcmc.n_iter) throw std::invalid_argument("burn_in must be < n_iter");
    if (mcmc.thin < 1) throw std::invalid_argument("thin must be >= 1");
    if (mcmc.n_chains < 1) throw std::invalid_argument("n_chains must be >= 1");
    if (!(prior.scale > 0.0)) throw std::invalid_argument("prior scale must be positive");
    if (!(sigma_a0 > 0.0) || !(sigma_b0 > 0.0)) {
      throw std::invalid_argument("sigma prior hyperparameters must be positive");
    }
  }
};

/// Current values of all unknowns in one chain. Shrinkage scales are held
/// squared.
struct SamplerState {
  Eigen::MatrixXd b_star;     ///< p x K basis coefficients
  Eigen::MatrixXd b;          ///< p x T, B* Phi on the observed grid
  Eigen::VectorXd sigma;      ///< T
  Eigen::MatrixXd xi;         ///< N x T
  Eigen::MatrixXd lambda_sq;  ///< p x K local scales
  Eigen::MatrixXd psi_sq;     ///< p x (J+1) global scales
  Eigen::MatrixXd nu;         ///< p x K, horseshoe auxiliaries for lambda
  Eigen::MatrixXd gamma;      ///< p x (J+1), auxiliaries for psi
  Eigen::VectorXd s_sq;       ///< p, hyper scale s_a^2
  Eigen::VectorXd kappa;      ///< p, auxiliary for s_a
  std::uint64_t jitter_retries = 0;
};

inline constexpr double kLatentFloor = 1e-12;
inline constexpr double kResidualFloor = 1e-10;
inline constexpr double kInitialSigmaFloor = 1e-6;
inline constexpr double kScaleFloor = 1e-100;
inline constexpr double kScaleCeiling = 1e100;

namespace detail {

inline double clamp_scale(double v) { return std::clamp(v, kScaleFloor, kScaleCeiling); }

/// Type-7 (linear interpolation) empirical quantile; sorts `values`.
inline double empirical_quantile(std::vector<double>& values, double p) {
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace detail

class GibbsSampler {
 public:
  GibbsSampler(const FunctionalDataset& data, const Eigen::MatrixXd& design, const ModelSpec& spec,
               std::uint64_t chain_id = 0, int threads = 1)
      : GibbsSampler(data, design, spec, make_basis(data, spec), chain_id, threads) {}

  GibbsSampler(const FunctionalDataset& data, const Eigen::MatrixXd& design, const ModelSpec& spec,
               BasisTransform basis, std::uint64_t chain_id = 0, int threads = 1)
      : data_(data),
        design_(design),
        spec_(spec),
        basis_(std::move(basis)),
        chain_id_(chain_id),
        threads_(std::max(threads, 1)),
        group_of_(basis_.group_of_index()) {
    spec_.validate();
    if (design_.rows() != data_.y.rows()) {
      throw DataError("design has " + std::to_string(design_.rows()) + " rows but data has " +
                      std::to_string(data_.y.rows()) + " curves");
    }
    if (basis_.grid_len() != static_cast<std::size_t>(data_.y.cols())) {
      throw std::invalid_argument("basis grid length does not match data");
    }
  }

  static BasisTransform make_basis(const FunctionalDataset& data, const ModelSpec& spec) {
    const auto t = static_cast<std::size_t>(data.y.cols());
    return spec.basis == BasisKind::kIdentity ? BasisTransform::identity(t)
                                              : build_basis(t, spec.wavelet);
  }

  const BasisTransform& basis() const { return basis_; }
  const ModelSpec& spec() const { return spec_; }
  Eigen::Index n_covariates() const { return design_.cols(); }

  /// B* = 0, sigma_l = MAD of y(t_l) about its empirical tau-quantile
  /// (floored at 1e-6), xi = sigma, every shrinkage scale at 1.
  SamplerState init_state() const {
    const Eigen::Index n = data_.y.rows();
    const Eigen::Index t = data_.y.cols();
    const Eigen::Index p = design_.cols();
    if (!data_.y.allFinite()) throw DataError("response matrix contains non-finite values");
    if (!design_.allFinite()) throw DataError("design matrix contains non-finite values");
    if (n > 0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design_);
      if (qr.rank() < p) throw DataError("design matrix is rank deficient");
    }
    const auto k = static_cast<Eigen::Index>(basis_.size());
    const auto groups = static_cast<Eigen::Index>(basis_.groups().size());

    SamplerState s;
    s.b_star = Eigen::MatrixXd::Zero(p, k);
    s.b = Eigen::MatrixXd::Zero(p, t);
    s.sigma.resize(t);
    std::vector<double> column(static_cast<std::size_t>(n));
    for (Eigen::Index l = 0; l < t; ++l) {
      double mad = 0.0;
      if (n > 0) {
        for (Eigen::Index i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = data_.y(i, l);
        const double q = detail::empirical_quantile(column, spec_.tau.tau());
        for (Eigen::Index i = 0; i < n; ++i) {
          column[static_cast<std::size_t>(i)] = std::abs(data_.y(i, l) - q);
        }
        mad = detail::empirical_quantile(column, 0.5);
      }
      s.sigma[l] = std::max(mad, kInitialSigmaFloor);
    }
    s.xi = s.sigma.transpose().replicate(n, 1);
    s.lambda_sq = Eigen::MatrixXd::Ones(p, k);
    const double psi0 = spec_.prior.global == GlobalScaleMode::kFixedPsi
                            ? spec_.prior.scale * spec_.prior.scale
                            : 1.0;
    s.psi_sq = Eigen::MatrixXd::Constant(p, groups, psi0);
    s.nu = Eigen::MatrixXd::Ones(p, k);
    s.gamma = Eigen::MatrixXd::Ones(p, groups);
    const double s0 = spec_.prior.global == GlobalScaleMode::kFixedScale
                          ? spec_.prior.scale * spec_.prior.scale
                          : 1.0;
    s.s_sq = Eigen::VectorXd::Constant(p, s0);
    s.kappa = Eigen::VectorXd::Ones(p);
    return s;
  }

  /// Step 1.
  void update_sigma(SamplerState& s, std::uint64_t iter) const {
    const Eigen::Index n = data_.y.rows();
    const Eigen::Index t = data_.y.cols();
    const double shape = spec_.sigma_a0 + static_cast<double>(n);
#pragma omp parallel for schedule(static) num_threads(threads_) if (threads_ > 1)
    for (Eigen::Index l = 0; l < t; ++l) {
      double loss = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) loss += check_loss(residual(s, i, l), spec_.tau);
      RngStream rng = stream(Site::kSigma, static_cast<std::uint64_t>(l), iter);
      s.sigma[l] = std::max(sample_inverse_gamma(shape, spec_.sigma_b0 + loss, rng), kLatentFloor);
    }
  }

  /// Step 2.
  void update_latent_xi(SamplerState& s, std::uint64_t iter) const {
    const Eigen::Index n = data_.y.rows();
    const Eigen::Index t = data_.y.cols();
    const double spread = spec_.tau.spread();
#pragma omp parallel for schedule(static) num_threads(threads_) if (threads_ > 1)
    for (Eigen::Index l = 0; l < t; ++l) {
      const double shape = 1.0 / (2.0 * s.sigma[l] * spread);
      RngStream rng = stream(Site::kXi, static_cast<std::uint64_t>(l), iter);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double r = std::max(std::abs(residual(s, i, l)), kResidualFloor);
        const double inv = sample_inverse_gaussian(1.0 / (spread * r), shape, rng);
        s.xi(i, l) = std::max(1.0 / inv, kLatentFloor);
      }
    }
  }

  /// Step 3: sweeps covariates in ascending order, each drawn from its
  /// Gaussian full conditional with precision
  ///   M = Phi diag_l(sum_i w_il x_ia^2) Phi' + diag(1 / (lambda^2 psi^2))
  /// and linear term m = Phi (sum_i w_il x_ia R_il)_l, where
  /// w_il = tau(1-tau) / (2 sigma_l xi_il) and R is the partial residual of the
  /// working response y - theta xi.
  void update_basis_coefficients(SamplerState& s, std::uint64_t iter) {
    const Eigen::Index n = data_.y.rows();
    const Eigen::Index t = data_.y.cols();
    const Eigen::Index p = design_.cols();
    const auto k = static_cast<Eigen::Index>(basis_.size());

    prepare_working_response(s);
    std::vector<double> data_precision;
    std::vector<double> linear;
    std::vector<double> cached_precision;
    Eigen::VectorXd draw(k);
    std::vector<double> curve(static_cast<std::size_t>(t));

    for (Eigen::Index a = 0; a < p; ++a) {
      covariate_terms(s, a, data_precision, linear);
      RngStream rng = stream(Site::kCoefficients, static_cast<std::uint64_t>(a), iter);
      if (basis_.is_identity()) {
        for (Eigen::Index j = 0; j < k; ++j) {
          const double prec = data_precision[static_cast<std::size_t>(j)] + 1.0 / prior_variance(s, a, j);
          draw[j] = linear[static_cast<std::size_t>(j)] / prec + rng.normal() / std::sqrt(prec);
        }
      } else {
        if (data_precision != cached_precision) {
          basis_.weighted_gram(data_precision, gram_);
          cached_precision = data_precision;
        }
        precision_ = gram_;
        for (Eigen::Index j = 0; j < k; ++j) precision_(j, j) += 1.0 / prior_variance(s, a, j);
        if (mvn_.size() != k) mvn_ = PrecisionSampler(k);
        const Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(linear.data(), k);
        try {
          s.jitter_retries += static_cast<std::uint64_t>(mvn_.draw(precision_, m, rng, draw));
        } catch (const NumericalError& e) {
          throw NumericalError(std::string(e.what()) + " (covariate " + std::to_string(a) +
                               ", iteration " + std::to_string(iter) + ")");
        }
      }
      if (!draw.allFinite()) {
        throw NumericalError("non-finite basis coefficients for covariate " + std::to_string(a) +
                             " at iteration " + std::to_string(iter));
      }
      s.b_star.row(a) = draw.transpose();
      basis_.synthesize(std::span<const double>(draw.data(), static_cast<std::size_t>(k)), curve);
      for (Eigen::Index l = 0; l < t; ++l) {
        const double delta = curve[static_cast<std::size_t>(l)] - s.b(a, l);
        s.b(a, l) = curve[static_cast<std::size_t>(l)];
        for (Eigen::Index i = 0; i < n; ++i) partial_(i, l) -= design_(i, a) * delta;
      }
    }
  }

  /// Dense precision M (both triangles) and linear term m of covariate a's
  /// full conditional at the current state. Same arithmetic as step 3.
  std::pair<Eigen::MatrixXd, Eigen::VectorXd> coefficient_conditional(const SamplerState& s, Eigen::Index a) {
    const auto k = static_cast<Eigen::Index>(basis_.size());
    prepare_working_response(s);
    std::vector<double> data_precision;
    std::vector<double> linear;
    covariate_terms(s, a, data_precision, linear);
    Eigen::MatrixXd m(k, k);
    basis_.weighted_gram(data_precision, m);
    m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
    for (Eigen::Index j = 0; j < k; ++j) m(j, j) += 1.0 / prior_variance(s, a, j);
    return {m, Eigen::Map<const Eigen::VectorXd>(linear.data(), k)};
  }

  /// Step 4.
  void update_shrinkage(SamplerState& s, std::uint64_t iter) const {
    const Eigen::Index p = s.b_star.rows();
    const auto k = static_cast<Eigen::Index>(basis_.size());
    const auto& groups = basis_.groups();
    const auto family = spec_.prior.family;

    if (family != PriorFamily::kRidge) {
#pragma omp parallel for schedule(static) num_threads(threads_) if (threads_ > 1)
      for (Eigen::Index idx = 0; idx < p * k; ++idx) {
        const Eigen::Index a = idx / k;
        const Eigen::Index j = idx % k;
        const double psi_sq = s.psi_sq(a, static_cast<Eigen::Index>(group_of_[static_cast<std::size_t>(j)]));
        const double b = s.b_star(a, j);
        RngStream rng = stream(Site::kLocalScale, static_cast<std::uint64_t>(idx), iter);
        if (family == PriorFamily::kHorseshoe) {
          const double lam = sample_inverse_gamma(1.0, 1.0 / s.nu(a, j) + b * b / (2.0 * psi_sq), rng);
          s.lambda_sq(a, j) = detail::clamp_scale(lam);
          s.nu(a, j) = detail::clamp_scale(sample_inverse_gamma(1.0, 1.0 + 1.0 / s.lambda_sq(a, j), rng));
        } else {
          const double ratio = std::max(std::abs(b) / std::sqrt(psi_sq), kLatentFloor);
          const double inv = sample_inverse_gaussian(1.0 / ratio, 1.0, rng);
          s.lambda_sq(a, j) = detail::clamp_scale(1.0 / inv);
        }
      }
    }

    if (spec_.prior.global == GlobalScaleMode::kFixedPsi) return;

    const auto n_groups = static_cast<Eigen::Index>(groups.size());
    for (Eigen::Index a = 0; a < p; ++a) {
      for (Eigen::Index g = 0; g < n_groups; ++g) {
        const auto& grp = groups[static_cast<std::size_t>(g)];
        double ss = 0.0;
        for (std::size_t h = 0; h < grp.size; ++h) {
          const auto j = static_cast<Eigen::Index>(grp.begin + h);
          ss += s.b_star(a, j) * s.b_star(a, j) / s.lambda_sq(a, j);
        }
        RngStream rng = stream(Site::kGlobalScale, static_cast<std::uint64_t>(a * n_groups + g), iter);
        const double shape = (static_cast<double>(grp.size) + 1.0) / 2.0;
        s.psi_sq(a, g) = detail::clamp_scale(sample_inverse_gamma(shape, 1.0 / s.gamma(a, g) + ss / 2.0, rng));
        s.gamma(a, g) = detail::clamp_scale(
            sample_inverse_gamma(1.0, 1.0 / s.s_sq[a] + 1.0 / s.psi_sq(a, g), rng));
      }
      if (spec_.prior.global == GlobalScaleMode::kVagueHyperprior) {
        double inv_gamma_sum = 0.0;
        for (Eigen::Index g = 0; g < n_groups; ++g) inv_gamma_sum += 1.0 / s.gamma(a, g);
        RngStream rng = stream(Site::kHyperScale, static_cast<std::uint64_t>(a), iter);
        const double shape = (static_cast<double>(n_groups) + 1.0) / 2.0;
        s.s_sq[a] = detail::clamp_scale(sample_inverse_gamma(shape, 1.0 / s.kappa[a] + inv_gamma_sum, rng));
        s.kappa[a] = detail::clamp_scale(sample_inverse_gamma(1.0, 1.0 + 1.0 / s.s_sq[a], rng));
      }
    }
  }

  /// Steps 1-4 of one iteration.
  void step(SamplerState& s, std::uint64_t iter) {
    update_sigma(s, iter);
    update_latent_xi(s, iter);
    update_basis_coefficients(s, iter);
    update_shrinkage(s, iter);
  }

 private:
  /// Weights w_il and the full residual of the working response y - theta xi.
  void prepare_working_response(const SamplerState& s) {
    const Eigen::Index n = data_.y.rows();
    const Eigen::Index t = data_.y.cols();
    const Eigen::Index p = design_.cols();
    const double spread = spec_.tau.spread();
    const double theta = spec_.tau.theta();
    weights_.resize(n, t);
    partial_.resize(n, t);
    for (Eigen::Index l = 0; l < t; ++l) {
      const double c = spread / (2.0 * s.sigma[l]);
      for (Eigen::Index i = 0; i < n; ++i) {
        weights_(i, l) = c / s.xi(i, l);
        double fit = 0.0;
        for (Eigen::Index a = 0; a < p; ++a) fit += design_(i, a) * s.b(a, l);
        partial_(i, l) = data_.y(i, l) - theta * s.xi(i, l) - fit;
      }
    }
  }

  /// Data part of covariate a's precision diagonal on the grid, and the linear
  /// term projected onto the basis.
  void covariate_terms(const SamplerState& s, Eigen::Index a, std::vector<double>& data_precision,
                       std::vector<double>& linear) const {
    const Eigen::Index n = data_.y.rows();
    const Eigen::Index t = data_.y.cols();
    data_precision.assign(static_cast<std::size_t>(t), 0.0);
    std::vector<double> data_linear(static_cast<std::size_t>(t));
    for (Eigen::Index l = 0; l < t; ++l) {
      double dp = 0.0;
      double dl = 0.0;
      const double b_al = s.b(a, l);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x = design_(i, a);
        const double wx = weights_(i, l) * x;
        dp += wx * x;
        dl += wx * (partial_(i, l) + x * b_al);
      }
      data_precision[static_cast<std::size_t>(l)] = dp;
      data_linear[static_cast<std::size_t>(l)] = dl;
    }
    linear.resize(basis_.size());
    basis_.analyze(data_linear, linear);
  }

  double residual(const SamplerState& s, Eigen::Index i, Eigen::Index l) const {
    double fit = 0.0;
    for (Eigen::Index a = 0; a < design_.cols(); ++a) fit += design_(i, a) * s.b(a, l);
    return data_.y(i, l) - fit;
  }

  double prior_variance(const SamplerState& s, Eigen::Index a, Eigen::Index j) const {
    const auto g = static_cast<Eigen::Index>(group_of_[static_cast<std::size_t>(j)]);
    return std::max(s.lambda_sq(a, j) * s.psi_sq(a, g), kScaleFloor);
  }

  RngStream stream(Site site, std::uint64_t index, std::uint64_t iter) const {
    return RngStream(spec_.mcmc.master_seed, chain_id_, site_key(site, index), iter);
  }

  const FunctionalDataset& data_;
  const Eigen::MatrixXd& design_;
  ModelSpec spec_;
  BasisTransform basis_;
  std::uint64_t chain_id_;
  int threads_;
  std::vector<std::size_t> group_of_;

  Eigen::MatrixXd weights_;
  Eigen::MatrixXd partial_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd precision_;
  PrecisionSampler mvn_;
};

/// Convenience wrapper matching the sampler's initial state.
inline SamplerState init_state(const FunctionalDataset& data, const Eigen::MatrixXd& design,
                               const ModelSpec& spec) {
  return GibbsSampler(data, design, spec).init_state();
}

struct DrawsMeta {
  ModelSpec spec{};
  std::uint64_t jitter_retries = 0;
  double wall_seconds = 0.0;
};

struct GewekeScore {
  std::size_t chain = 0;
  std::size_t location = 0;
  double z = 0.0;
};

/// Retained draws of B(t) (layout g, a, l) and sigma(t) (layout g, l),
/// chains concatenated in chain order.
struct PosteriorDraws {
  std::size_t n_draws = 0;
  std::size_t n_covariates = 0;
  std::size_t grid_len = 0;
  double tau = 0.5;
  std::vector<double> b;
  std::vector<double> sigma;
  DrawsMeta meta{};
  std::vector<GewekeScore> geweke;

  void resize(std::size_t g, std::size_t p, std::size_t t) {
    n_draws = g;
    n_covariates = p;
    grid_len = t;
    b.assign(g * p * t, 0.0);
    sigma.assign(g * t, 0.0);
  }

  double b_at(std::size_t g, std::size_t a, std::size_t l) const {
    return b[(g * n_covariates + a) * grid_len + l];
  }

  /// G x T draws of one coefficient function.
  Eigen::MatrixXd coefficient(std::size_t a) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n_draws), static_cast<Eigen::Index>(grid_len));
    for (std::size_t g = 0; g < n_draws; ++g) {
      for (std::size_t l = 0; l < grid_len; ++l) {
        m(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(l)) = b_at(g, a, l);
      }
    }
    return m;
  }

  Eigen::MatrixXd sigma_matrix() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n_draws), static_cast<Eigen::Index>(grid_len));
    for (std::size_t g = 0; g < n_draws; ++g) {
      for (std::size_t l = 0; l < grid_len; ++l) {
        m(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(l)) = sigma[g * grid_len + l];
      }
    }
    return m;
  }
};

struct RunOptions {
  int threads = 1;
  /// Overrides the basis implied by the spec (used with identity-basis oracles).
  const BasisTransform* basis = nullptr;
};

/// Runs every chain of `spec.mcmc` and merges the retained draws. Chains run in
/// parallel when more than one thread is available; with one chain the
/// threads go to the within-iteration site loops.
inline PosteriorDraws run_chain(const FunctionalDataset& data, const Eigen::MatrixXd& design,
                                const ModelSpec& spec, const RunOptions& options = {}) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t chains = spec.mcmc.n_chains;
  const std::size_t per_chain = spec.mcmc.retained_per_chain();
  const auto p = static_cast<std::size_t>(design.cols());
  const auto t = static_cast<std::size_t>(data.y.cols());

  PosteriorDraws out;
  out.resize(chains * per_chain, p, t);
  out.tau = spec.tau.tau();
  out.meta.spec = spec;
  out.geweke.resize(chains * t);

  const int threads = std::max(options.threads, 1);
  const bool chain_parallel = chains > 1 && threads > 1;
  const int inner_threads = chain_parallel ? 1 : threads;
  std::vector<std::uint64_t> retries(chains, 0);
  std::vector<std::exception_ptr> failures(chains);

#pragma omp parallel for schedule(static, 1) num_threads(threads) if (chain_parallel)
  for (std::size_t c = 0; c < chains; ++c) {
    try {
      GibbsSampler sampler = options.basis
                                 ? GibbsSampler(data, design, spec, *options.basis, c, inner_threads)
                                 : GibbsSampler(data, design, spec, c, inner_threads);
      SamplerState state = sampler.init_state();
      std::vector<double> log_sigma(per_chain * t);
      std::size_t kept = 0;
      for (std::size_t it = 1; it <= spec.mcmc.n_iter; ++it) {
        sampler.step(state, it);
        if (it <= spec.mcmc.burn_in || (it - spec.mcmc.burn_in) % spec.mcmc.thin != 0) continue;
        const std::size_t g = c * per_chain + kept;
        for (std::size_t a = 0; a < p; ++a) {
          for (std::size_t l = 0; l < t; ++l) {
            out.b[(g * p + a) * t + l] =
                state.b(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(l));
          }
        }
        for (std::size_t l = 0; l < t; ++l) {
          const double sg = state.sigma[static_cast<Eigen::Index>(l)];
          out.sigma[g * t + l] = sg;
          log_sigma[l * per_chain + kept] = std::log(sg);
        }
        ++kept;
      }
      for (std::size_t l = 0; l < t; ++l) {
        const std::span<const double> trace(log_sigma.data() + l * per_chain, per_chain);
        out.geweke[c * t + l] = GewekeScore{c, l, geweke_z(trace)};
      }
      retries[c] = state.jitter_retries;
    } catch (...) {
      failures[c] = std::current_exception();
    }
  }
  for (std::size_t c = 0; c < chains; ++c) {
    if (failures[c]) std::rethrow_exception(failures[c]);
    out.meta.jitter_retries += retries[c];
  }
  out.meta.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace fqr
