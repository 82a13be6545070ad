// Command-line front end for the experiment sweeps.

#include "posce/harness/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace h = posce::harness;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file (flat keys)");
  app->add_option("--seed", c.seed, "root seed, overrides the config");
  app->add_option("--out", c.out, "output path (stdout when omitted)");
  app->add_option("--threads", c.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
}

h::ExperimentConfig resolve(const Common& c) {
  h::ExperimentConfig cfg = c.config.empty() ? h::ExperimentConfig{} : h::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw posce::Error("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-cell high-mobility OFDM channel estimation experiments"};
  app.require_subcommand(1);

  Common c;
  std::string report;
  auto* mse_snr = app.add_subcommand("mse-snr", "channel MSE versus SNR");
  auto* mse_pos = app.add_subcommand("mse-position", "channel MSE versus track position");
  auto* mse_vel = app.add_subcommand("mse-velocity", "channel MSE versus train speed");
  auto* ber = app.add_subcommand("ber-snr", "bit error rate versus SNR");
  auto* design = app.add_subcommand("design-pilots", "search a low-coherence pilot pattern");
  auto* diag = app.add_subcommand("diagnose-elimination", "pilot-row interference before/after elimination");
  for (auto* sub : {mse_snr, mse_pos, mse_vel, ber, design, diag}) add_common(sub, c);
  design->add_option("--report", report, "coherence report CSV (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    const h::ExperimentConfig cfg = resolve(c);
    const h::RunOptions opt{c.threads};
    std::vector<h::ResultRow> rows;
    if (mse_snr->parsed()) rows = h::run_mse_vs_snr(cfg, opt);
    if (mse_pos->parsed()) rows = h::run_mse_vs_position(cfg, opt);
    if (mse_vel->parsed()) rows = h::run_mse_vs_velocity(cfg, opt);
    if (ber->parsed()) rows = h::run_ber_vs_snr(cfg, opt);
    if (diag->parsed()) rows = h::run_diagnose_elimination(cfg, opt);
    if (design->parsed()) {
      const h::PilotDesignOutput d = h::run_pilot_design(cfg);
      emit(c.out, d.pattern_json.dump(2) + "\n");
      emit(report, h::to_csv(d.report));
      return 0;
    }
    emit(c.out, h::to_csv(rows));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
