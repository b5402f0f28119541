#pragma once

// Posterior summaries of functional coefficients: pointwise and simultaneous
// credible bands, simultaneous band scores (SimBaS) and flagged regions.
//
// Conventions:
//   sd uses divisor G - 1.
//   z_g = max_l |B^(g)(t_l) - m(t_l)| / sd(t_l), over locations with sd > 0.
//   q_alpha = z_(G - floor(alpha G)), the order statistic (1-indexed, ascending).
//   SimBaS(t_l) = #{g : z_g >= |m(t_l)| / sd(t_l)} / G.
// With these choices SimBaS(t_l) <= alpha holds exactly when the alpha-level
// band m +- q_alpha sd excludes zero at t_l. A location with sd = 0 has the
// degenerate band [m, m] and SimBaS 1 if m = 0, 1/G otherwise.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fqr/dataset.hpp"
#include "fqr/error.hpp"
#include "fqr/gibbs.hpp"

namespace fqr {

struct Band {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct PointwiseSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  Eigen::VectorXd lo;  ///< alpha/2 quantile
  Eigen::VectorXd hi;  ///< 1 - alpha/2 quantile
};

namespace detail {

inline void require_draws(const Eigen::MatrixXd& draws) {
  if (draws.rows() < 2) throw std::invalid_argument("need at least 2 posterior draws");
}

inline void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

inline Eigen::VectorXd column_sd(const Eigen::MatrixXd& draws, const Eigen::VectorXd& mean) {
  const double g = static_cast<double>(draws.rows());
  Eigen::VectorXd sd(draws.cols());
  for (Eigen::Index l = 0; l < draws.cols(); ++l) {
    sd[l] = std::sqrt((draws.col(l).array() - mean[l]).square().sum() / (g - 1.0));
  }
  return sd;
}

/// Per-draw maximum standardized deviation, ignoring locations with sd = 0.
inline std::vector<double> max_deviations(const Eigen::MatrixXd& draws, const Eigen::VectorXd& mean,
                                          const Eigen::VectorXd& sd) {
  std::vector<double> z(static_cast<std::size_t>(draws.rows()), 0.0);
  for (Eigen::Index l = 0; l < draws.cols(); ++l) {
    if (!(sd[l] > 0.0)) continue;
    for (Eigen::Index g = 0; g < draws.rows(); ++g) {
      auto& zg = z[static_cast<std::size_t>(g)];
      zg = std::max(zg, std::abs(draws(g, l) - mean[l]) / sd[l]);
    }
  }
  return z;
}

inline double band_multiplier(std::vector<double> z, double alpha) {
  std::sort(z.begin(), z.end());
  const auto g = z.size();
  // Largest k with k / G <= alpha, compared the same way SimBaS is.
  const double gd = static_cast<double>(g);
  auto drop = static_cast<std::size_t>(std::floor(alpha * gd));
  while (drop + 1 < g && static_cast<double>(drop + 1) / gd <= alpha) ++drop;
  while (drop > 0 && static_cast<double>(drop) / gd > alpha) --drop;
  return z[g - drop - 1];
}

}  // namespace detail

/// Column means, sds and type-7 quantile bands at alpha/2 and 1 - alpha/2 of a
/// G x T draw matrix. alpha = 1 gives the median on both sides.
inline PointwiseSummary pointwise_summary(const Eigen::MatrixXd& draws, double alpha = 0.05) {
  detail::require_draws(draws);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  PointwiseSummary s;
  s.mean = draws.colwise().mean().transpose();
  s.sd = detail::column_sd(draws, s.mean);
  s.lo.resize(draws.cols());
  s.hi.resize(draws.cols());
  std::vector<double> column(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index l = 0; l < draws.cols(); ++l) {
    for (Eigen::Index g = 0; g < draws.rows(); ++g) column[static_cast<std::size_t>(g)] = draws(g, l);
    s.lo[l] = detail::empirical_quantile(column, alpha / 2.0);
    s.hi[l] = detail::empirical_quantile(column, 1.0 - alpha / 2.0);
  }
  return s;
}

/// Joint (1 - alpha) credible band mean +- q_alpha sd.
inline Band simultaneous_band(const Eigen::MatrixXd& draws, double alpha) {
  detail::require_draws(draws);
  detail::require_alpha(alpha);
  const Eigen::VectorXd mean = draws.colwise().mean().transpose();
  const Eigen::VectorXd sd = detail::column_sd(draws, mean);
  const double q = detail::band_multiplier(detail::max_deviations(draws, mean, sd), alpha);
  return Band{mean - q * sd, mean + q * sd};
}

/// Simultaneous band scores, one per location.
inline Eigen::VectorXd simbas(const Eigen::MatrixXd& draws) {
  detail::require_draws(draws);
  const Eigen::VectorXd mean = draws.colwise().mean().transpose();
  const Eigen::VectorXd sd = detail::column_sd(draws, mean);
  const auto z = detail::max_deviations(draws, mean, sd);
  const double g = static_cast<double>(draws.rows());
  Eigen::VectorXd out(draws.cols());
  for (Eigen::Index l = 0; l < draws.cols(); ++l) {
    if (!(sd[l] > 0.0)) {
      out[l] = mean[l] == 0.0 ? 1.0 : 1.0 / g;
      continue;
    }
    const double u = std::abs(mean[l]) / sd[l];
    const auto count = std::count_if(z.begin(), z.end(), [u](double v) { return v >= u; });
    out[l] = static_cast<double>(count) / g;
  }
  return out;
}

/// Half the log2 fold change: the |B| threshold for a delta-fold group
/// difference when the group covariate is coded +-1.
inline double pm1_effect_threshold(double delta) { return 0.5 * std::log2(delta); }

struct FlaggedRun {
  std::size_t start = 0;  ///< first index, inclusive
  std::size_t end = 0;    ///< last index, inclusive
  double max_abs_mean = 0.0;

  std::size_t length() const { return end - start + 1; }
};

/// Flags t_l when SimBaS <= alpha and |mean| >= threshold, then keeps maximal
/// runs of at least min_run consecutive flagged locations.
inline std::vector<FlaggedRun> flag_regions(const Eigen::VectorXd& scores, const Eigen::VectorXd& mean,
                                            double alpha, double threshold, std::size_t min_run = 3) {
  if (scores.size() != mean.size()) throw std::invalid_argument("flag_regions: length mismatch");
  std::vector<FlaggedRun> runs;
  const auto t = static_cast<std::size_t>(scores.size());
  std::size_t l = 0;
  while (l < t) {
    auto hit = [&](std::size_t i) {
      const auto e = static_cast<Eigen::Index>(i);
      return scores[e] <= alpha && std::abs(mean[e]) >= threshold;
    };
    if (!hit(l)) {
      ++l;
      continue;
    }
    FlaggedRun run{l, l, 0.0};
    while (l < t && hit(l)) {
      run.end = l;
      run.max_abs_mean = std::max(run.max_abs_mean, std::abs(mean[static_cast<Eigen::Index>(l)]));
      ++l;
    }
    if (run.length() >= std::max<std::size_t>(min_run, 1)) runs.push_back(run);
  }
  return runs;
}

struct InferenceSettings {
  double alpha = 0.05;
  double threshold = pm1_effect_threshold(1.5);
  std::size_t min_run = 3;
  std::vector<double> plot_alphas{0.001, 0.01, 0.05, 0.10};
};

/// p x T summaries of every coefficient function.
struct InferenceResult {
  InferenceSettings settings{};
  Eigen::MatrixXd mean;
  Eigen::MatrixXd sd;
  Eigen::MatrixXd band_lo;
  Eigen::MatrixXd band_hi;
  Eigen::MatrixXd pointwise_lo;
  Eigen::MatrixXd pointwise_hi;
  Eigen::MatrixXd simbas;
  std::vector<std::vector<FlaggedRun>> flags;

  bool flagged(std::size_t a, std::size_t l) const {
    for (const auto& r : flags[a]) {
      if (l >= r.start && l <= r.end) return true;
    }
    return false;
  }
};

inline InferenceResult summarize(const PosteriorDraws& draws, const InferenceSettings& settings = {}) {
  const auto p = static_cast<Eigen::Index>(draws.n_covariates);
  const auto t = static_cast<Eigen::Index>(draws.grid_len);
  InferenceResult r;
  r.settings = settings;
  for (auto* m : {&r.mean, &r.sd, &r.band_lo, &r.band_hi, &r.pointwise_lo, &r.pointwise_hi, &r.simbas}) {
    m->resize(p, t);
  }
  r.flags.resize(static_cast<std::size_t>(p));
  for (Eigen::Index a = 0; a < p; ++a) {
    const Eigen::MatrixXd coef = draws.coefficient(static_cast<std::size_t>(a));
    const auto pw = pointwise_summary(coef, settings.alpha);
    const auto band = simultaneous_band(coef, settings.alpha);
    const Eigen::VectorXd score = simbas(coef);
    r.mean.row(a) = pw.mean.transpose();
    r.sd.row(a) = pw.sd.transpose();
    r.pointwise_lo.row(a) = pw.lo.transpose();
    r.pointwise_hi.row(a) = pw.hi.transpose();
    r.band_lo.row(a) = band.lo.transpose();
    r.band_hi.row(a) = band.hi.transpose();
    r.simbas.row(a) = score.transpose();
    r.flags[static_cast<std::size_t>(a)] =
        flag_regions(score, pw.mean, settings.alpha, settings.threshold, settings.min_run);
  }
  return r;
}

namespace detail {

inline std::ofstream open_output(const std::string& path, const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  return out;
}

}  // namespace detail

/// covariate,grid_value,mean,sd,lo,hi,simbas,flagged,pw_lo,pw_hi; lo/hi are
/// the simultaneous band at settings.alpha and pw_* the pointwise band.
inline void write_summary_csv(const std::string& path, const InferenceResult& r, const Eigen::VectorXd& grid,
                              const std::string& header_comment = {}) {
  auto out = detail::open_output(path, header_comment);
  out << "covariate,grid_value,mean,sd,lo,hi,simbas,flagged,pw_lo,pw_hi\n";
  for (Eigen::Index a = 0; a < r.mean.rows(); ++a) {
    for (Eigen::Index l = 0; l < r.mean.cols(); ++l) {
      out << a << ',' << format_real(grid[l]) << ',' << format_real(r.mean(a, l)) << ','
          << format_real(r.sd(a, l)) << ',' << format_real(r.band_lo(a, l)) << ','
          << format_real(r.band_hi(a, l)) << ',' << format_real(r.simbas(a, l)) << ','
          << (r.flagged(static_cast<std::size_t>(a), static_cast<std::size_t>(l)) ? 1 : 0) << ','
          << format_real(r.pointwise_lo(a, l)) << ',' << format_real(r.pointwise_hi(a, l)) << '\n';
    }
  }
}

inline void write_flags_csv(const std::string& path, const InferenceResult& r, const Eigen::VectorXd& grid,
                            const std::string& header_comment = {}) {
  auto out = detail::open_output(path, header_comment);
  out << "covariate,start_index,end_index,start_value,end_value,length,max_abs_mean\n";
  for (std::size_t a = 0; a < r.flags.size(); ++a) {
    for (const auto& run : r.flags[a]) {
      out << a << ',' << run.start << ',' << run.end << ','
          << format_real(grid[static_cast<Eigen::Index>(run.start)]) << ','
          << format_real(grid[static_cast<Eigen::Index>(run.end)]) << ',' << run.length() << ','
          << format_real(run.max_abs_mean) << '\n';
    }
  }
}

/// Simultaneous and pointwise bands at each of settings.plot_alphas.
inline void write_band_plot_csv(const std::string& path, const PosteriorDraws& draws,
                                const InferenceSettings& settings, const Eigen::VectorXd& grid,
                                const std::string& header_comment = {}) {
  auto out = detail::open_output(path, header_comment);
  out << "covariate,alpha,grid_value,joint_lo,joint_hi,pointwise_lo,pointwise_hi\n";
  for (std::size_t a = 0; a < draws.n_covariates; ++a) {
    const Eigen::MatrixXd coef = draws.coefficient(a);
    for (double alpha : settings.plot_alphas) {
      const auto band = simultaneous_band(coef, alpha);
      const auto pw = pointwise_summary(coef, alpha);
      for (Eigen::Index l = 0; l < coef.cols(); ++l) {
        out << a << ',' << format_real(alpha) << ',' << format_real(grid[l]) << ','
            << format_real(band.lo[l]) << ',' << format_real(band.hi[l]) << ',' << format_real(pw.lo[l])
            << ',' << format_real(pw.hi[l]) << '\n';
      }
    }
  }
}

}  // namespace fqr
