// fqreg: Bayesian functional quantile regression from the command line.
//
// Exit codes: 0 success, 1 usage error, 2 config error, 3 data error,
// 4 numerical failure.

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "fqr/fqr.hpp"

namespace {

fqr::RunConfig load(const std::string& path, const std::vector<std::string>& overrides, bool require_data) {
  fqr::ConfigTable table = path.empty() ? fqr::ConfigTable{} : fqr::ConfigTable::from_file(path);
  for (const auto& s : overrides) table.set(s);
  return fqr::load_run_config(table, require_data);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian functional quantile regression with wavelet shrinkage priors"};
  app.set_version_flag("--version", std::string(fqr::kVersion));
  app.require_subcommand(1);

  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (results do not depend on this)")->check(CLI::PositiveNumber);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "Config file (TOML-style key = value)");
    cmd->add_option("--set", overrides, "Override a config key, e.g. --set mcmc.n_iter=4000")->take_all();
  };

  auto* fit = app.add_subcommand("fit", "Fit one posterior per quantile level and summarise it");
  add_config(fit);

  auto* simulate = app.add_subcommand("simulate", "Generate replicate datasets, fit them and score the fits");
  add_config(simulate);

  std::string draws_path;
  std::string truth_setting;
  auto* report = app.add_subcommand("report", "Write estimate, band, SimBaS and flag CSVs from a draws file");
  report->add_option("draws", draws_path, "Binary draws file (.fqrd)")->required()->check(CLI::ExistingFile);
  report->add_option("--truth", truth_setting,
                     "Also score covariate 1 against a simulation setting (symmetric_heavy_tailed | right_skewed)");
  add_config(report);

  std::string export_path;
  std::size_t grid_len = 512;
  int order = 4;
  int levels = 0;
  auto* basis = app.add_subcommand("basis", "Inspect the wavelet basis");
  basis->add_option("--export", export_path, "Write the K x T synthesis matrix to this CSV")->required();
  basis->add_option("--grid-len", grid_len, "Number of grid points T")->check(CLI::PositiveNumber);
  basis->add_option("--order", order, "Daubechies vanishing moments (1-10)");
  basis->add_option("--levels", levels, "Decomposition levels J (0 = automatic)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  fqr::CommandContext ctx;
  ctx.threads = threads;
  try {
    if (fit->parsed()) {
      fqr::cmd_fit(load(config_path, overrides, true), ctx);
    } else if (simulate->parsed()) {
      fqr::cmd_simulate(load(config_path, overrides, false), ctx);
    } else if (report->parsed()) {
      fqr::ReportOptions opts;
      if (!truth_setting.empty()) opts.truth_setting = fqr::parse_setting(truth_setting);
      fqr::cmd_report(draws_path, load(config_path, overrides, false), opts, ctx);
    } else if (basis->parsed()) {
      const int j = levels > 0 ? levels : fqr::auto_wavelet_levels(grid_len);
      fqr::cmd_basis_export(grid_len, fqr::WaveletSpec{order, j}, export_path);
    }
  } catch (const fqr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const fqr::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const fqr::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
