// Command-line front end: epsilon sweeps, expansion-only runs, assumption
// certificates, and the randomized norm-oracle suite, all driven by a
// declarative key = value config file.
#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include "bll/harness.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;  // overrides config when given
  int jobs = 0;         // overrides config when > 0
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("config", o.config_path, "run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out_dir, "output directory (overrides config)");
  cmd->add_option("--jobs", o.jobs, "worker threads (overrides config)");
  cmd->add_flag("--verbose", o.verbose, "per-case progress on stderr");
}

bll::RunConfig load_with_overrides(const CommonOpts& o) {
  bll::RunConfig cfg = bll::load_config(o.config_path);
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.jobs > 0) cfg.jobs = o.jobs;
  if (o.verbose) cfg.verbose = true;
  if (const char* seed = std::getenv("BLL_SEED")) {
    cfg.seed = std::strtoul(seed, nullptr, 10);
    if (cfg.verbose)
      std::fprintf(stderr, "seed overridden by BLL_SEED: %lu\n", cfg.seed);
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boundary-layer laboratory"};
  app.require_subcommand(1);

  CommonOpts sweep_o, exp_o, chk_o, orc_o;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "full epsilon sweep: expansion + solver + rate fits + report");
  add_common(sweep, sweep_o);
  CLI::App* expansion = app.add_subcommand(
      "expansion", "build the expansion only and check its identities");
  add_common(expansion, exp_o);
  CLI::App* check = app.add_subcommand(
      "check-assumptions", "evaluate the assumption certificates");
  add_common(check, chk_o);
  CLI::App* oracle = app.add_subcommand(
      "norm-oracle", "run the randomized norm-oracle suite");
  add_common(oracle, orc_o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) {
      bll::RunConfig cfg = load_with_overrides(sweep_o);
      cfg.validate(true);
      const bll::RunReport rep = bll::run_sweep(cfg);
      bll::emit_report(rep, cfg.out_dir);
      bool all = true;
      for (const auto& v : rep.verdicts) {
        std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", v.name.c_str(),
                    v.detail.c_str());
        all = all && v.pass;
      }
      std::printf("report written to %s\n", cfg.out_dir.c_str());
      return all ? 0 : 1;
    }
    if (expansion->parsed()) {
      const bll::RunConfig cfg = load_with_overrides(exp_o);
      return bll::run_expansion_only(cfg, cfg.out_dir);
    }
    if (check->parsed()) {
      const bll::RunConfig cfg = load_with_overrides(chk_o);
      return bll::run_check_assumptions(cfg, cfg.out_dir);
    }
    if (oracle->parsed()) {
      const bll::RunConfig cfg = load_with_overrides(orc_o);
      return bll::run_norm_oracle_cmd(cfg, cfg.out_dir);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
