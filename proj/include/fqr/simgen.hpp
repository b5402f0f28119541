#pragma once

// Synthetic mass-spectrum-like curves with seven Gaussian peaks whose
// magnitudes follow group-specific laws, plus AR(1) noise, and the metrics
// used to score fitted group effects against the known truth.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "fqr/dataset.hpp"
#include "fqr/error.hpp"
#include "fqr/rng.hpp"

namespace fqr {

/// Law of a peak magnitude c_{k,a}.
struct MagnitudeLaw {
  enum class Kind {
    kNormal,           ///< N(a, b^2)
    kScaledT,          ///< a * t_b + shift
    kShiftedInvGamma,  ///< IG(shape a, scale b) + shift, density of the IG part ~ x^(-a-1) e^(-b/x)
  };
  Kind kind = Kind::kNormal;
  double a = 30.0;
  double b = 1.5;
  double shift = 0.0;

  static MagnitudeLaw normal(double mean, double sd) { return {Kind::kNormal, mean, sd, 0.0}; }
  static MagnitudeLaw scaled_t(double scale, double df, double shift) { return {Kind::kScaledT, scale, df, shift}; }
  static MagnitudeLaw shifted_inverse_gamma(double shape, double scale, double shift) {
    return {Kind::kShiftedInvGamma, shape, scale, shift};
  }

  /// Only the laws of the two settings are drawn without std::distributions so
  /// that datasets are identical across standard libraries.
  double draw(RngStream& rng) const {
    switch (kind) {
      case Kind::kNormal:
        return a + b * rng.normal();
      case Kind::kScaledT: {
        if (b != 2.0) throw std::invalid_argument("scaled t magnitudes support 2 degrees of freedom only");
        // t_2 = Z / sqrt(chi2_2 / 2) and chi2_2 / 2 ~ Exp(1).
        const double z = rng.normal();
        return shift + a * z / std::sqrt(-std::log(rng.uniform()));
      }
      case Kind::kShiftedInvGamma: {
        if (a != 1.0) throw std::invalid_argument("inverse-gamma magnitudes support shape 1 only");
        return shift + b / -std::log(rng.uniform());
      }
    }
    return 0.0;
  }

  bool operator==(const MagnitudeLaw&) const = default;
};

struct Peak {
  double mu = 0.0;
  double sd = 1.0;
  MagnitudeLaw group1{};
  MagnitudeLaw group2{};
};

enum class SettingKind { kSymmetricHeavyTailed, kRightSkewed };

struct SimSetting {
  SettingKind kind = SettingKind::kSymmetricHeavyTailed;
  std::array<Peak, 7> peaks{};
  std::size_t grid_len = 501;
  double t_min = 0.0;
  double t_max = 15.0;
  std::size_t n_per_group = 200;
  double ar_rho = 0.8;
  double marginal_sd = 3.0;

  double innovation_sd() const { return marginal_sd * std::sqrt(1.0 - ar_rho * ar_rho); }

  Eigen::VectorXd grid() const {
    return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(grid_len), t_min, t_max);
  }

  std::string name() const {
    return kind == SettingKind::kSymmetricHeavyTailed ? "symmetric_heavy_tailed" : "right_skewed";
  }

  static SimSetting make(SettingKind kind) {
    static constexpr std::array<double, 7> kMu{1.209, 2.938, 4.700, 7.267, 9.013, 10.545, 13.200};
    static constexpr std::array<double, 7> kSd{0.145, 0.150, 0.155, 0.160, 0.165, 0.170, 0.175};
    SimSetting s;
    s.kind = kind;
    const auto base = MagnitudeLaw::normal(30.0, 1.5);
    for (std::size_t k = 0; k < 7; ++k) s.peaks[k] = Peak{kMu[k], kSd[k], base, base};
    if (kind == SettingKind::kSymmetricHeavyTailed) {
      s.peaks[2].group1 = MagnitudeLaw::scaled_t(1.75, 2.0, 30.0);
      s.peaks[2].group2 = MagnitudeLaw::normal(30.0, 1.0);
      s.peaks[5].group1 = MagnitudeLaw::normal(30.0, 1.0);
      s.peaks[5].group2 = MagnitudeLaw::scaled_t(1.75, 2.0, 30.0);
    } else {
      s.peaks[1].group1 = MagnitudeLaw::shifted_inverse_gamma(1.0, 0.35, 30.0);
      s.peaks[1].group2 = MagnitudeLaw::normal(30.6, 0.4);
      s.peaks[5].group1 = MagnitudeLaw::normal(30.5, 0.4);
      s.peaks[5].group2 = MagnitudeLaw::shifted_inverse_gamma(1.0, 0.35, 30.0);
    }
    return s;
  }
};

inline SettingKind parse_setting(const std::string& name) {
  if (name == "symmetric_heavy_tailed" || name == "i") return SettingKind::kSymmetricHeavyTailed;
  if (name == "right_skewed" || name == "ii") return SettingKind::kRightSkewed;
  throw ConfigError("unknown simulation setting '" + name + "' (use symmetric_heavy_tailed or right_skewed)");
}

inline double normal_pdf(double t, double mu, double sd) {
  const double z = (t - mu) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

/// Peak shapes f(t_l | mu_k, sd_k), 7 x T.
inline Eigen::MatrixXd peak_shapes(const SimSetting& s) {
  const Eigen::VectorXd grid = s.grid();
  Eigen::MatrixXd f(7, grid.size());
  for (Eigen::Index k = 0; k < 7; ++k) {
    for (Eigen::Index l = 0; l < grid.size(); ++l) {
      f(k, l) = normal_pdf(grid[l], s.peaks[static_cast<std::size_t>(k)].mu, s.peaks[static_cast<std::size_t>(k)].sd);
    }
  }
  return f;
}

/// Fills `out` with a stationary Gaussian AR(1) path.
inline void draw_ar1(const SimSetting& s, RngStream& rng, std::span<double> out) {
  if (out.empty()) return;
  out[0] = s.marginal_sd * rng.normal();
  const double innov = s.innovation_sd();
  for (std::size_t l = 1; l < out.size(); ++l) out[l] = s.ar_rho * out[l - 1] + innov * rng.normal();
}

struct SimulatedData {
  FunctionalDataset data;
  Eigen::MatrixXd design;  ///< [1, +1] for group 1 rows, then [1, -1] for group 2
};

/// Curve i of replicate `replicate` reads the stream (seed, replicate,
/// simulation site i, 0): 7 magnitudes first, then the noise path.
inline SimulatedData generate_dataset(const SimSetting& s, std::uint64_t seed, std::uint64_t replicate = 0) {
  const Eigen::MatrixXd f = peak_shapes(s);
  const auto n = static_cast<Eigen::Index>(2 * s.n_per_group);
  const auto t = static_cast<Eigen::Index>(s.grid_len);
  SimulatedData out;
  out.data.grid = s.grid();
  out.data.y.resize(n, t);
  out.design.resize(n, 2);
  std::vector<double> noise(s.grid_len);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool first = i < static_cast<Eigen::Index>(s.n_per_group);
    RngStream rng(seed, replicate, site_key(Site::kSimulation, static_cast<std::uint64_t>(i)), 0);
    std::array<double, 7> c{};
    for (std::size_t k = 0; k < 7; ++k) c[k] = (first ? s.peaks[k].group1 : s.peaks[k].group2).draw(rng);
    draw_ar1(s, rng, noise);
    for (Eigen::Index l = 0; l < t; ++l) {
      double v = noise[static_cast<std::size_t>(l)];
      for (Eigen::Index k = 0; k < 7; ++k) v += c[static_cast<std::size_t>(k)] * f(k, l);
      out.data.y(i, l) = v;
    }
    out.design(i, 0) = 1.0;
    out.design(i, 1) = first ? 1.0 : -1.0;
  }
  return out;
}

namespace detail {

inline double nth_quantile(std::vector<double>& v, double tau) {
  // Type-1 quantile of a large Monte Carlo sample.
  const auto idx = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(v.size()))) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(idx), v.end());
  return v[idx];
}

}  // namespace detail

struct TruthCurves {
  Eigen::VectorXd group1;  ///< Q_tau of y_1(t_l)
  Eigen::VectorXd group2;  ///< Q_tau of y_2(t_l)
  Eigen::VectorXd effect;  ///< (group1 - group2) / 2
};

/// Monte Carlo quantiles of each group's curve value at every grid point.
/// Magnitudes of peaks whose laws agree across groups and the noise draws are
/// shared between the groups, so locations away from differing peaks get an
/// effect of exactly zero.
inline TruthCurves group_quantile_curves(const SimSetting& s, double tau, std::size_t draws = 1000000,
                                         std::uint64_t seed = 20240517) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must lie in (0, 1)");
  if (draws < 1) throw std::invalid_argument("need at least one Monte Carlo draw");
  const Eigen::MatrixXd f = peak_shapes(s);
  std::array<std::vector<double>, 7> c1;
  std::array<std::vector<double>, 7> c2;
  for (std::size_t k = 0; k < 7; ++k) {
    c1[k].resize(draws);
    if (!(s.peaks[k].group1 == s.peaks[k].group2)) c2[k].resize(draws);
  }
  std::vector<double> e(draws);
  for (std::size_t m = 0; m < draws; ++m) {
    RngStream rng(seed, 0, site_key(Site::kTruthOracle, m), 0);
    for (std::size_t k = 0; k < 7; ++k) {
      c1[k][m] = s.peaks[k].group1.draw(rng);
      if (!c2[k].empty()) c2[k][m] = s.peaks[k].group2.draw(rng);
    }
    e[m] = s.marginal_sd * rng.normal();
  }

  const auto t = static_cast<Eigen::Index>(s.grid_len);
  TruthCurves out{Eigen::VectorXd(t), Eigen::VectorXd(t), Eigen::VectorXd(t)};
  std::vector<double> y1(draws);
  std::vector<double> y2(draws);
  for (Eigen::Index l = 0; l < t; ++l) {
    for (std::size_t m = 0; m < draws; ++m) {
      double a = e[m];
      double b = e[m];
      for (std::size_t k = 0; k < 7; ++k) {
        const double fk = f(static_cast<Eigen::Index>(k), l);
        a += c1[k][m] * fk;
        b += (c2[k].empty() ? c1[k][m] : c2[k][m]) * fk;
      }
      y1[m] = a;
      y2[m] = b;
    }
    out.group1[l] = detail::nth_quantile(y1, tau);
    out.group2[l] = detail::nth_quantile(y2, tau);
    out.effect[l] = 0.5 * (out.group1[l] - out.group2[l]);
  }
  return out;
}

/// True group main effect B_2^tau(t) under +-1 coding. Results are cached per
/// (setting, tau, draws, seed) for the life of the process.
inline Eigen::VectorXd true_effect_curve(const SimSetting& s, double tau, std::size_t draws = 1000000,
                                         std::uint64_t seed = 20240517) {
  using CacheKey = std::tuple<int, double, std::size_t, std::uint64_t>;
  static std::mutex mutex;
  static std::map<CacheKey, Eigen::VectorXd> cache;
  const CacheKey key{static_cast<int>(s.kind), tau, draws, seed};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  Eigen::VectorXd effect = group_quantile_curves(s, tau, draws, seed).effect;
  std::lock_guard lock(mutex);
  cache.emplace(key, effect);
  return effect;
}

/// Trapezoid rule on a possibly uneven grid.
inline double trapezoid(const Eigen::VectorXd& values, const Eigen::VectorXd& grid) {
  if (values.size() != grid.size()) throw std::invalid_argument("trapezoid: length mismatch");
  double s = 0.0;
  for (Eigen::Index l = 1; l < grid.size(); ++l) s += 0.5 * (values[l] + values[l - 1]) * (grid[l] - grid[l - 1]);
  return s;
}

inline double imse(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth, const Eigen::VectorXd& grid) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("imse: length mismatch");
  return trapezoid((estimate - truth).array().square().matrix(), grid);
}

/// Mean over draws (rows) of the integrated squared deviation from the draw mean.
inline double ivar(const Eigen::MatrixXd& draws, const Eigen::VectorXd& grid) {
  if (draws.cols() != grid.size()) throw std::invalid_argument("ivar: length mismatch");
  if (draws.rows() == 0) throw std::invalid_argument("ivar: no draws");
  const Eigen::VectorXd mean = draws.colwise().mean().transpose();
  double total = 0.0;
  for (Eigen::Index g = 0; g < draws.rows(); ++g) {
    total += trapezoid((draws.row(g).transpose() - mean).array().square().matrix(), grid);
  }
  return total / static_cast<double>(draws.rows());
}

struct DetectionRates {
  double alpha = 0.05;
  std::optional<double> sensitivity;  ///< empty when the truth has no positives
  std::optional<double> fpr;          ///< empty when the truth has no negatives
};

/// Truth positives are |truth| >= delta; a location is flagged at alpha when
/// SimBaS <= alpha and |estimate| >= delta.
inline std::vector<DetectionRates> sensitivity_fpr(const Eigen::VectorXd& scores, const Eigen::VectorXd& estimate,
                                                   const Eigen::VectorXd& truth, const std::vector<double>& alphas,
                                                   double delta = 0.3) {
  if (scores.size() != estimate.size() || scores.size() != truth.size()) {
    throw std::invalid_argument("sensitivity_fpr: length mismatch");
  }
  std::vector<DetectionRates> out;
  for (double alpha : alphas) {
    std::size_t pos = 0;
    std::size_t neg = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (Eigen::Index l = 0; l < truth.size(); ++l) {
      const bool positive = std::abs(truth[l]) >= delta;
      const bool flagged = scores[l] <= alpha && std::abs(estimate[l]) >= delta;
      (positive ? pos : neg) += 1;
      if (flagged) (positive ? tp : fp) += 1;
    }
    DetectionRates r;
    r.alpha = alpha;
    if (pos > 0) r.sensitivity = static_cast<double>(tp) / static_cast<double>(pos);
    if (neg > 0) r.fpr = static_cast<double>(fp) / static_cast<double>(neg);
    out.push_back(r);
  }
  return out;
}

/// Scores of one fitted method on one replicate.
struct ReplicateMetrics {
  std::string method;
  double tau = 0.5;
  std::size_t replicate = 0;
  double imse = 0.0;
  double ivar = 0.0;
  std::vector<DetectionRates> rates;
};

/// Averages of ReplicateMetrics over replicates, per (method, tau).
struct MetricReport {
  struct Row {
    std::string method;
    double tau = 0.5;
    double alpha = 0.05;
    std::size_t replicates = 0;
    std::optional<double> sensitivity;
    std::optional<double> fpr;
    double imse_mean = 0.0;
    double imse_sd = 0.0;
    double ivar_mean = 0.0;
    double ivar_sd = 0.0;
  };
  std::vector<Row> rows;

  const Row* find(const std::string& method, double tau, double alpha) const {
    for (const auto& r : rows) {
      if (r.method == method && r.tau == tau && r.alpha == alpha) return &r;
    }
    return nullptr;
  }
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

}  // namespace detail

/// Per-replicate rates are averaged over the replicates where they are defined.
inline MetricReport aggregate_metrics(const std::vector<ReplicateMetrics>& reps) {
  MetricReport report;
  std::vector<std::pair<std::string, double>> keys;
  for (const auto& r : reps) {
    if (std::find(keys.begin(), keys.end(), std::pair{r.method, r.tau}) == keys.end()) keys.emplace_back(r.method, r.tau);
  }
  for (const auto& [method, tau] : keys) {
    std::vector<const ReplicateMetrics*> group;
    for (const auto& r : reps) {
      if (r.method == method && r.tau == tau) group.push_back(&r);
    }
    std::vector<double> imses;
    std::vector<double> ivars;
    for (const auto* r : group) {
      imses.push_back(r->imse);
      ivars.push_back(r->ivar);
    }
    const auto [im, is] = detail::mean_sd(imses);
    const auto [vm, vs] = detail::mean_sd(ivars);
    for (std::size_t j = 0; j < group.front()->rates.size(); ++j) {
      MetricReport::Row row{method, tau, group.front()->rates[j].alpha, group.size(), {}, {}, im, is, vm, vs};
      std::vector<double> sens;
      std::vector<double> fprs;
      for (const auto* r : group) {
        if (r->rates[j].sensitivity) sens.push_back(*r->rates[j].sensitivity);
        if (r->rates[j].fpr) fprs.push_back(*r->rates[j].fpr);
      }
      if (!sens.empty()) row.sensitivity = detail::mean_sd(sens).first;
      if (!fprs.empty()) row.fpr = detail::mean_sd(fprs).first;
      report.rows.push_back(row);
    }
  }
  return report;
}

inline void write_metric_report_csv(const std::string& path, const MetricReport& report,
                                    const std::string& header_comment = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "method,tau,alpha,replicates,sensitivity,fpr,imse_mean,imse_sd,ivar_mean,ivar_sd\n";
  for (const auto& r : report.rows) {
    out << r.method << ',' << format_real(r.tau) << ',' << format_real(r.alpha) << ',' << r.replicates << ','
        << detail::format_optional(r.sensitivity) << ',' << detail::format_optional(r.fpr) << ','
        << format_real(r.imse_mean) << ',' << format_real(r.imse_sd) << ',' << format_real(r.ivar_mean) << ','
        << format_real(r.ivar_sd) << '\n';
  }
}

inline void write_replicate_metrics_csv(const std::string& path, const std::vector<ReplicateMetrics>& reps,
                                        const std::string& header_comment = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "method,tau,replicate,alpha,sensitivity,fpr,imse,ivar\n";
  for (const auto& r : reps) {
    for (const auto& d : r.rates) {
      out << r.method << ',' << format_real(r.tau) << ',' << r.replicate << ',' << format_real(d.alpha) << ','
          << detail::format_optional(d.sensitivity) << ',' << detail::format_optional(d.fpr) << ','
          << format_real(r.imse) << ',' << format_real(r.ivar) << '\n';
    }
  }
}

}  // namespace fqr
