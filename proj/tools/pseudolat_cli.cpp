// Command-line front end: simulate, compare-waveforms, export-dataset, crlb.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pseudolat/config.hpp"
#include "pseudolat/errors.hpp"
#include "pseudolat/harness.hpp"
#include "pseudolat/io.hpp"

namespace fs = std::filesystem;
using namespace pseudolat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::string out_dir = ".";
  bool quiet = false;
};

// Loading is split from running so that every config problem maps to exit code 2.
template <class Load>
auto load_or_config_error(Load&& load) {
  try {
    return load();
  } catch (const IoError& e) {
    throw ConfigError("<file>", e.what());
  }
}

void apply_overrides(ScenarioConfig& cfg, const GlobalFlags& g) {
  if (g.seed) cfg.base_seed = *g.seed;
  if (g.runs) cfg.runs = *g.runs;
  cfg.validate();
}

void apply_overrides(WaveformComparisonConfig& cfg, const GlobalFlags& g) {
  if (g.seed) cfg.base_seed = *g.seed;
  if (g.runs) cfg.trials = *g.runs;
  cfg.validate();
}

fs::path prepare_out_dir(const GlobalFlags& g) {
  const fs::path dir(g.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
  return dir;
}

int simulate(const std::string& config, const GlobalFlags& g) {
  auto cfg = load_or_config_error([&] { return load_scenario(config); });
  apply_overrides(cfg, g);
  const fs::path dir = prepare_out_dir(g);
  const MetricsReport report = run_scenario(cfg);
  write_scenario_outputs(report, dir);
  if (!g.quiet) {
    const auto& s = report.error_stats;
    std::cout << report.scenario << ": " << s.count << " runs, median " << format_double(s.median) << " m, mean "
              << format_double(s.mean) << " m, rmse " << format_double(s.rmse) << " m, p95 "
              << format_double(s.p95) << " m, converged " << format_double(report.convergence_rate) << " ("
              << report.runtime_s << " s)\n";
  }
  return kExitOk;
}

int compare(const std::string& config, const GlobalFlags& g) {
  auto cfg = load_or_config_error([&] { return load_waveform_comparison(config); });
  apply_overrides(cfg, g);
  const fs::path dir = prepare_out_dir(g);
  const WaveformComparison cmp = compare_waveforms(cfg);
  write_waveform_outputs(cmp, dir);
  if (!g.quiet) {
    for (const auto& c : cmp.cells) {
      std::cout << to_string(c.scheme) << " @ " << format_double(c.delta_f_hz) << " Hz: mean "
                << format_double(c.stats.mean) << " m, median " << format_double(c.stats.median) << " m, var "
                << format_double(c.stats.variance) << " m^2, censored " << c.censored << "\n";
    }
    for (const auto& s : cfg.spacings) {
      std::cout << "OTFS improvement @ " << format_double(s.delta_f_hz)
                << " Hz: " << format_double(cmp.improvement(s.delta_f_hz)) << "\n";
    }
    std::cout << "(" << cmp.runtime_s << " s)\n";
  }
  return kExitOk;
}

int export_dataset_cmd(const std::string& config, const std::string& out, const GlobalFlags& g) {
  auto cfg = load_or_config_error([&] { return load_scenario(config); });
  apply_overrides(cfg, g);
  const fs::path path(out);
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path.parent_path().string(), "cannot create directory: " + ec.message());
  }
  const DatasetExport ex = scenario_dataset(cfg);
  export_dataset(ex.matrices, path);
  if (!g.quiet) {
    std::cout << "wrote " << ex.matrices.size() << " matrices to " << path.string();
    if (ex.skipped_revolutions > 0) std::cout << " (" << ex.skipped_revolutions << " incomplete skipped)";
    std::cout << "\n";
  }
  return kExitOk;
}

int crlb_cmd(const std::string& config, const GlobalFlags& g) {
  auto cfg = load_or_config_error([&] { return load_scenario(config); });
  apply_overrides(cfg, g);
  const fs::path dir = prepare_out_dir(g);
  const CrlbReport rep = scenario_crlb(cfg);
  write_text_file(dir / "crlb.json", crlb_json(rep));
  if (!g.quiet) {
    std::cout << "CRLB trace " << format_double(rep.bound.trace()) << " m^2 over " << rep.n_anchors
              << " anchors" << (rep.bound.rank_deficient ? " (rank deficient)" : "") << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-anchor UAV localization simulator"};
  app.fallthrough();
  app.require_subcommand(1);

  GlobalFlags g;
  std::uint64_t seed = 0;
  int runs = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the config base_seed");
  auto* runs_opt = app.add_option("--runs", runs, "Override runs (trials for compare-waveforms)")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Directory for output files");
  app.add_flag("--quiet", g.quiet, "Suppress the console summary");

  std::string config;
  std::string out;
  auto* sim = app.add_subcommand("simulate", "Closed-loop Monte-Carlo localization -> report.csv, summary.json");
  sim->add_option("config", config, "Scenario JSON")->required();
  auto* cmp = app.add_subcommand("compare-waveforms", "OTFS vs OFDM ranging -> waveform_errors.csv, waveform_hist.csv");
  cmp->add_option("config", config, "Waveform comparison JSON")->required();
  auto* exp = app.add_subcommand("export-dataset", "Per-revolution measurement matrices as CSV");
  exp->add_option("config", config, "Scenario JSON")->required();
  exp->add_option("--out", out, "Output CSV path")->required();
  auto* crl = app.add_subcommand("crlb", "Cramer-Rao bound of the scenario geometry -> crlb.json");
  crl->add_option("config", config, "Scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  if (seed_opt->count() > 0) g.seed = seed;
  if (runs_opt->count() > 0) g.runs = runs;

  try {
    if (sim->parsed()) return simulate(config, g);
    if (cmp->parsed()) return compare(config, g);
    if (exp->parsed()) return export_dataset_cmd(config, out, g);
    return crlb_cmd(config, g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
