#pragma once

#include <iosfwd>
#include <string>

#include "mbcool/config.hpp"

namespace mbcool {

/// Process exit codes shared by the CLI and the command functions.
inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;       ///< bad flags, config or input data
inline constexpr int exit_numerical = 2;   ///< integration / truncation failure
inline constexpr int exit_io = 3;          ///< unreadable input or unwritable output

/// Each command writes its files into cfg.out_dir (created if missing) and
/// logs progress to `log` at cfg.verbosity. Every output embeds the
/// effective-config hash and seed; reruns with identical settings are
/// byte-identical.

/// Writes sweep_rap.csv: one row per (transition, duration). Rows whose
/// integration fails are kept as NaN sentinels and the command returns
/// exit_numerical after finishing the grid.
int cmd_sweep_rap(const RunConfig& cfg, std::ostream& log);

/// Writes cool_trials.csv (per-trial herald records) and cool_summary.json
/// (Monte Carlo statistics per cumulative cycle count, the exact-chain
/// reference, and the closed-form model columns). Zero accepted trials is a
/// valid outcome: statistics are marked undefined and the exit code is 0.
int cmd_cool(const RunConfig& cfg, std::ostream& log);

/// Writes rabi_scan.csv: a synthetic excitation-vs-time scan from the
/// configured population source (thermal / protocol Monte Carlo / closed
/// form), optionally shot-sampled.
int cmd_rabi(const RunConfig& cfg, std::ostream& log);

/// Reads fit.input_csv and writes fit_result.json. Non-convergence is
/// reported inside the JSON (converged=false), not via the exit code.
int cmd_fit(const RunConfig& cfg, std::ostream& log);

/// Dispatches by command name and maps exceptions to exit codes
/// (ConfigError/ParseError/invalid-argument -> 1, integration or truncation
/// failures -> 2, IoError -> 3).
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log);

}  // namespace mbcool
