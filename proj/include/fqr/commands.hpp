#pragma once

// Implementations of the fqreg subcommands. Each command writes its outputs
// under the configured output directory; every file starts with a comment
// naming the run-manifest hash, and no file records timing, so reruns with
// the same configuration and seed reproduce the outputs byte for byte.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fqr/config.hpp"
#include "fqr/dataset.hpp"
#include "fqr/draws_io.hpp"
#include "fqr/error.hpp"
#include "fqr/gibbs.hpp"
#include "fqr/inference.hpp"
#include "fqr/simgen.hpp"
#include "fqr/wavelet.hpp"

#ifndef FQR_VERSION
#define FQR_VERSION "0.0.0"
#endif

namespace fqr {

inline constexpr std::string_view kVersion = FQR_VERSION;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a(ss.str());
}

/// SplitMix64 finaliser, used to derive per-replicate seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::string tau_tag(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tau%g", tau);
  return buf;
}

struct Manifest {
  std::uint64_t hash = 0;
  std::string body;

  std::string header() const { return "fqreg " + std::string(kVersion) + " manifest " + hash_hex(hash); }
};

inline Manifest make_manifest(const std::string& command, const RunConfig& config,
                              const std::vector<std::pair<std::string, std::string>>& inputs) {
  std::ostringstream body;
  body << "command = " << command << '\n' << "version = " << kVersion << '\n' << "[config]\n" << config.canonical;
  body << "[inputs]\n";
  for (const auto& [name, path] : inputs) body << name << " = " << hash_hex(file_hash(path)) << '\n';
  Manifest m;
  m.body = body.str();
  m.hash = fnv1a(m.body);
  return m;
}

struct CommandContext {
  int threads = 1;
  std::ostream* log = &std::cout;
};

inline ModelSpec spec_for(const RunConfig& config, double tau, std::size_t grid_len) {
  ModelSpec spec = config.model;
  spec.tau = QuantileLevel(tau);
  spec.wavelet.levels = config.wavelet_levels > 0 ? config.wavelet_levels : auto_wavelet_levels(grid_len);
  return spec;
}

/// Naive per-location Bayesian quantile regression: identity basis, ridge
/// prior with a fixed, very wide global scale.
inline ModelSpec bayes_qr_spec(ModelSpec spec, double psi) {
  spec.basis = BasisKind::kIdentity;
  spec.prior = PriorSpec{PriorFamily::kRidge, GlobalScaleMode::kFixedPsi, psi};
  return spec;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw DataError("cannot create output directory " + dir);
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void write_geweke_csv(const std::string& path, const PosteriorDraws& d, const Eigen::VectorXd& grid,
                             const std::string& header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "# " << header << '\n';
  std::size_t large = 0;
  for (const auto& g : d.geweke) large += std::abs(g.z) > 2.0 ? 1 : 0;
  out << "# log sigma traces with |z| > 2: " << large << " of " << d.geweke.size() << '\n';
  out << "chain,location,grid_value,z\n";
  for (const auto& g : d.geweke) {
    out << g.chain << ',' << g.location << ',' << format_real(grid[static_cast<Eigen::Index>(g.location)]) << ','
        << format_real(g.z) << '\n';
  }
}

inline void write_manifest(const std::string& dir, const Manifest& m, const std::string& runs) {
  std::ofstream out(join(dir, "manifest.txt"));
  if (!out) throw DataError("cannot write manifest in " + dir);
  out << "# " << m.header() << '\n' << "manifest_hash = " << hash_hex(m.hash) << '\n' << m.body << "[runs]\n" << runs;
}

inline void write_inference_outputs(const std::string& dir, const std::string& prefix, const PosteriorDraws& draws,
                                    const InferenceSettings& settings, const Eigen::VectorXd& grid,
                                    const std::string& header) {
  const auto result = summarize(draws, settings);
  write_summary_csv(join(dir, prefix + "summary.csv"), result, grid, header);
  write_flags_csv(join(dir, prefix + "flags.csv"), result, grid, header);
  write_band_plot_csv(join(dir, prefix + "bands.csv"), draws, settings, grid, header);
}

/// fqreg fit: one posterior per tau, chains merged after burn-in.
inline void cmd_fit(const RunConfig& config, const CommandContext& ctx = {}) {
  const auto in = ingest(config.curves_path, config.design_path);
  ensure_dir(config.output_dir);
  const auto manifest =
      make_manifest("fit", config, {{"curves", config.curves_path}, {"design", config.design_path}});
  const auto header = manifest.header();
  const auto t = static_cast<std::size_t>(in.data.y.cols());
  std::ostringstream runs;
  for (double tau : config.taus) {
    const ModelSpec spec = spec_for(config, tau, t);
    *ctx.log << "fit " << tau_tag(tau) << ": N=" << in.data.y.rows() << " T=" << t << " p=" << in.design.cols()
             << " chains=" << spec.mcmc.n_chains << " iterations=" << spec.mcmc.n_iter << std::endl;
    PosteriorDraws draws;
    try {
      draws = run_chain(in.data, in.design, spec, RunOptions{ctx.threads, nullptr});
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto tag = tau_tag(tau);
    write_draws(join(config.output_dir, "draws_" + tag + ".fqrd"), draws, manifest.hash);
    if (config.draws_csv) write_draws_csv(join(config.output_dir, "draws_" + tag + ".csv"), draws, header);
    write_inference_outputs(config.output_dir, tag + "_", draws, config.inference, in.data.grid, header);
    write_geweke_csv(join(config.output_dir, tag + "_geweke.csv"), draws, in.data.grid, header);
    runs << tag << ": seed = " << spec.mcmc.master_seed << ", chains = " << spec.mcmc.n_chains
         << ", retained draws = " << draws.n_draws << ", wavelet levels = " << spec.wavelet.levels
         << ", jitter retries = " << draws.meta.jitter_retries << '\n';
    *ctx.log << "fit " << tag << ": " << draws.n_draws << " draws in " << draws.meta.wall_seconds << " s" << std::endl;
  }
  write_manifest(config.output_dir, manifest, runs.str());
}

/// Scores the group effect (covariate 1) of one posterior against the truth.
inline ReplicateMetrics score_effect(const PosteriorDraws& draws, const Eigen::VectorXd& truth,
                                     const Eigen::VectorXd& grid, const std::vector<double>& alphas, double delta) {
  if (draws.n_covariates < 2) throw DataError("scoring needs a group covariate in column 2 of the design");
  if (draws.grid_len != static_cast<std::size_t>(truth.size())) throw DataError("draws and truth grids differ");
  const Eigen::MatrixXd coef = draws.coefficient(1);
  const Eigen::VectorXd mean = coef.colwise().mean().transpose();
  ReplicateMetrics m;
  m.tau = draws.tau;
  m.imse = imse(mean, truth, grid);
  m.ivar = ivar(coef, grid);
  m.rates = sensitivity_fpr(simbas(coef), mean, truth, alphas, delta);
  return m;
}

/// fqreg simulate: replicate datasets, fits of each configured method at
/// each tau, per-replicate and averaged metrics.
inline MetricReport cmd_simulate(const RunConfig& config, const CommandContext& ctx = {}) {
  const auto& sim = config.simulate;
  const SimSetting setting = SimSetting::make(sim.setting);
  const Eigen::VectorXd grid = setting.grid();
  ensure_dir(config.output_dir);
  const auto manifest = make_manifest("simulate", config, {});
  const auto header = manifest.header();

  std::vector<Eigen::VectorXd> truths;
  for (double tau : config.taus) {
    const auto curves = group_quantile_curves(setting, tau, sim.truth_draws, sim.truth_seed);
    truths.push_back(curves.effect);
    std::ofstream out(join(config.output_dir, "truth_" + tau_tag(tau) + ".csv"));
    if (!out) throw DataError("cannot write truth curve in " + config.output_dir);
    out << "# " << header << '\n' << "# setting " << setting.name()
        << "; inverse-gamma magnitudes use shape 1, scale 0.35 (density ~ x^-2 exp(-0.35/x))\n";
    out << "grid_value,quantile_group1,quantile_group2,effect\n";
    for (Eigen::Index l = 0; l < grid.size(); ++l) {
      out << format_real(grid[l]) << ',' << format_real(curves.group1[l]) << ',' << format_real(curves.group2[l])
          << ',' << format_real(curves.effect[l]) << '\n';
    }
  }

  std::vector<ReplicateMetrics> reps;
  std::ostringstream runs;
  for (std::size_t r = 0; r < sim.replicates; ++r) {
    const auto data = generate_dataset(setting, sim.seed, r);
    if (sim.write_datasets) {
      write_curves_csv(join(config.output_dir, "replicate" + std::to_string(r) + "_curves.csv"), data.data, header);
      write_design_csv(join(config.output_dir, "replicate" + std::to_string(r) + "_design.csv"), data.design, header);
    }
    for (std::size_t j = 0; j < config.taus.size(); ++j) {
      const double tau = config.taus[j];
      for (const auto& method : sim.methods) {
        ModelSpec spec = spec_for(config, tau, setting.grid_len);
        if (method == "bayes_qr") spec = bayes_qr_spec(spec, sim.qr_psi);
        spec.mcmc.master_seed = mix_seed(config.model.mcmc.master_seed ^ (0x1000003ULL * (r + 1)));
        const auto draws = run_chain(data.data, data.design, spec, RunOptions{ctx.threads, nullptr});
        auto m = score_effect(draws, truths[j], grid, sim.alphas, sim.delta);
        m.method = method;
        m.replicate = r;
        reps.push_back(m);
        runs << "replicate " << r << ' ' << tau_tag(tau) << ' ' << method << ": seed = " << spec.mcmc.master_seed
             << ", retained draws = " << draws.n_draws << ", jitter retries = " << draws.meta.jitter_retries << '\n';
        *ctx.log << "simulate replicate " << r << ' ' << tau_tag(tau) << ' ' << method << ": IMSE " << m.imse
                 << ", IVar " << m.ivar << " (" << draws.meta.wall_seconds << " s)" << std::endl;
      }
    }
  }
  const auto report = aggregate_metrics(reps);
  write_replicate_metrics_csv(join(config.output_dir, "replicate_metrics.csv"), reps, header);
  write_metric_report_csv(join(config.output_dir, "metrics.csv"), report, header);
  write_manifest(config.output_dir, manifest, runs.str());
  return report;
}

struct ReportOptions {
  /// Score covariate 1 against this simulation setting's true effect.
  std::optional<SettingKind> truth_setting;
};

/// fqreg report: plot-ready CSVs from a draws file.
inline void cmd_report(const std::string& draws_path, const RunConfig& config, const ReportOptions& options = {},
                       const CommandContext& ctx = {}) {
  const auto loaded = read_draws(draws_path);
  const auto& draws = loaded.draws;
  Eigen::VectorXd grid;
  if (!config.curves_path.empty()) {
    const auto rows = detail::read_numeric_csv(config.curves_path);
    if (rows.empty()) throw DataError(config.curves_path + ": empty curves file");
    grid = Eigen::Map<const Eigen::VectorXd>(rows.front().data(), static_cast<Eigen::Index>(rows.front().size()));
  } else if (options.truth_setting) {
    grid = SimSetting::make(*options.truth_setting).grid();
  } else {
    grid = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(draws.grid_len), 0.0,
                                      static_cast<double>(draws.grid_len) - 1.0);
  }
  if (static_cast<std::size_t>(grid.size()) != draws.grid_len) {
    throw DataError("grid has " + std::to_string(grid.size()) + " points but draws have " +
                    std::to_string(draws.grid_len));
  }
  ensure_dir(config.output_dir);
  const std::string header = "fqreg " + std::string(kVersion) + " manifest " + hash_hex(loaded.manifest_hash);
  const auto tag = "report_" + tau_tag(draws.tau) + "_";
  write_inference_outputs(config.output_dir, tag, draws, config.inference, grid, header);
  if (options.truth_setting) {
    const SimSetting setting = SimSetting::make(*options.truth_setting);
    const auto truth = true_effect_curve(setting, draws.tau, config.simulate.truth_draws, config.simulate.truth_seed);
    auto m = score_effect(draws, truth, grid, config.simulate.alphas, config.simulate.delta);
    m.method = "external";
    write_replicate_metrics_csv(join(config.output_dir, tag + "metrics.csv"), {m}, header);
  }
  *ctx.log << "report: " << draws.n_draws << " draws, " << draws.n_covariates << " covariates, " << draws.grid_len
           << " locations -> " << config.output_dir << std::endl;
}

/// fqreg basis --export: the K x T synthesis matrix and its groups.
inline void cmd_basis_export(std::size_t grid_len, const WaveletSpec& spec, const std::string& path) {
  BasisTransform basis = [&] {
    try {
      return build_basis(grid_len, spec);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }();
  const Eigen::MatrixXd phi = basis.phi();
  const auto owner = basis.group_of_index();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "# Daubechies order " << spec.order << ", " << spec.levels << " levels, periodic boundary, grid "
      << grid_len << " zero-padded to " << basis.padded_len() << '\n';
  out << "# row k = inverse DWT of unit coefficient k on the padded grid, first " << grid_len << " columns kept\n";
  out << "# coefficient order [A_J, D_J, ..., D_1]; analysis a[k] = sum_n h[n] x[(2k + 1 - L/2 + n) mod N]\n";
  out << "# columns: index,group,phi_1..phi_T\n";
  for (Eigen::Index k = 0; k < phi.rows(); ++k) {
    out << k << ',' << owner[static_cast<std::size_t>(k)];
    for (Eigen::Index l = 0; l < phi.cols(); ++l) out << ',' << format_real(phi(k, l));
    out << '\n';
  }
}

}  // namespace fqr
