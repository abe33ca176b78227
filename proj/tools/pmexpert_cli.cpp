// pmexpert: run, batch, sweep and validate experiments from a JSON config.
//
// Exit codes: 0 success, 1 validation failure, 2 config error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pmexpert.hpp"

namespace {

struct Args {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, Args& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config, "experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", args.out, "output directory (overrides the config)");
  cmd->add_option("--seed", args.seed, "base seed (overrides the config)");
  cmd->add_option("--runs", args.runs, "number of seeds (overrides the config)");
  cmd->add_option("--threads", args.threads, "worker threads for batch and sweep")->check(CLI::PositiveNumber);
}

pmexpert::CommandOptions options(const Args& args) {
  pmexpert::CommandOptions opt;
  if (!args.out.empty()) opt.out_dir = args.out;
  opt.seed = args.seed;
  opt.runs = args.runs;
  opt.threads = args.threads;
  return opt;
}

/// Default suite, plus the lemma checks and loss-access count over the
/// config's own seeds when one is given.
int validate(const Args& args) {
  auto checks = pmexpert::default_validation(args.threads);
  if (!args.config.empty()) {
    auto cfg = pmexpert::load_config(args.config);
    if (args.seed) cfg.base_seed = *args.seed;
    if (args.runs) cfg.seed_count = *args.runs;
    const auto sc = cfg.scenario();
    pmexpert::CheckResult c{"config_runs", true, 0.0, {}};
    std::size_t bad_access = 0;
    for (std::size_t i = 0; i < cfg.seed_count; ++i) {
      const auto a = pmexpert::run_scenario(sc, cfg.base_seed + i);
      if (a.report.diagnostics && !a.report.diagnostics->all_passed()) c.worst += 1.0;
      if (a.transcript.loss_queries != a.transcript.observed_count) ++bad_access;
    }
    c.passed = c.worst == 0.0 && bad_access == 0;
    c.detail = std::to_string(cfg.seed_count) + " seeds, " + std::to_string(static_cast<int>(c.worst)) +
               " with lemma failures, " + std::to_string(bad_access) + " with unobserved loss reads";
    checks.push_back(c);
  }
  pmexpert::print_checks(std::cout, checks);
  for (const auto& c : checks)
    if (!c.passed) return pmexpert::kExitValidationFailure;
  return pmexpert::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimax expert mixtures under partial monitoring"};
  app.require_subcommand(1);
  Args args;
  auto* run = app.add_subcommand("run", "play one game and write rounds.csv and summary.json");
  auto* batch = app.add_subcommand("batch", "Monte-Carlo over seeds; writes batch_summary.json");
  auto* sweep = app.add_subcommand("sweep", "batch per horizon; writes scaling.csv and the fitted slope");
  auto* check = app.add_subcommand("validate", "run the randomized self-checks");
  add_common(run, args, true);
  add_common(batch, args, true);
  add_common(sweep, args, true);
  add_common(check, args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pmexpert::kExitConfigError;
  }

  try {
    if (check->parsed()) return validate(args);
    const auto cfg = pmexpert::load_config(args.config);
    const auto opt = options(args);
    if (run->parsed()) return pmexpert::run_command(cfg, opt);
    if (batch->parsed()) return pmexpert::batch_command(cfg, opt);
    return pmexpert::sweep_command(cfg, opt);
  } catch (const pmexpert::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == pmexpert::ErrorCode::ConfigError ? pmexpert::kExitConfigError
                                                        : pmexpert::kExitValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pmexpert::kExitValidationFailure;
  }
}
