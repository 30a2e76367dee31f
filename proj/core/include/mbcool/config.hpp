#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mbcool/analysis.hpp"
#include "mbcool/dynamics.hpp"
#include "mbcool/fock.hpp"
#include "mbcool/protocol.hpp"

namespace mbcool {

/// One duration grid of the RAP-efficiency sweep. The pulse template
/// (amplitude, chirp, sample count) comes from the matching protocol pulse;
/// only the duration is swept and the sideband order follows the transition.
struct SweepGrid {
    Transition transition = Transition::carrier;
    double t_start_s = 5e-6;
    double t_stop_s = 100e-6;
    int points = 20;
};

enum class RabiSource {
    thermal,    ///< populations = thermal(nbar)
    protocol,   ///< populations = heralded Monte Carlo histogram
    analytic    ///< populations = closed-form heralded model (single cycle)
};

const char* to_string(RabiSource s);
RabiSource rabi_source_from_string(const std::string& name);

struct RabiConfig {
    RabiSource source = RabiSource::thermal;
    Transition transition = Transition::blue_sideband;
    double t_start_s = 10e-6;
    double t_stop_s = 500e-6;
    int points = 50;
    long long shots_per_point = 900;
    bool sample_shots = true;   ///< false writes the noiseless curve
    double epsilon = 0.05;      ///< failure probability of the analytic source
};

struct FitConfig {
    std::string input_csv;      ///< scan to fit; required by the fit command
    double guess_p0 = 0.5;
    double guess_eta = 0.094;
    double guess_nbar_tail = 10.0;
    double guess_omega0_hz = 83e3;
    double omega0_prior_hz = 0.0;        ///< > 0 (with sigma) constrains omega0
    double omega0_prior_sigma_hz = 0.0;
};

/// Everything one command invocation needs. All fields have working
/// defaults; a config file, MBCOOL_* environment variables and command-line
/// flags override them in that order.
struct RunConfig {
    ModeConfig mode = default_mode_config();
    ProtocolConfig protocol{};
    SidebandScale scale_mode = SidebandScale::n1_coupling;
    std::vector<SweepGrid> sweep{{Transition::carrier, 5e-6, 100e-6, 20},
                                 {Transition::blue_sideband, 10e-6, 300e-6, 30}};
    RabiConfig rabi{};
    FitConfig fit{};
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int verbosity = 1;

    /// Validates every nested config. Throws ConfigError.
    void validate() const;
};

/// Parses a strict JSON config: unknown keys and wrong types are rejected
/// (ConfigError), omitted keys keep their defaults.
RunConfig parse_run_config(const std::string& json_text);

/// parse_run_config over a file. Throws IoError when unreadable.
RunConfig load_run_config(const std::string& path);

/// Canonical serialization of the *effective* config: every field
/// materialized, keys sorted, round-trips through parse_run_config.
std::string canonical_config_json(const RunConfig& cfg);

/// FNV-1a 64-bit hash of canonical_config_json; printed into every output
/// file header so results can be traced back to the exact settings.
std::uint64_t config_hash(const RunConfig& cfg);

/// config_hash formatted as 16 lowercase hex digits.
std::string config_hash_hex(const RunConfig& cfg);

/// Command-line values that override the config file.
struct CliOverrides {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<long long> shots;
    std::optional<int> cycles;
};

/// Builds the effective config for `command` (one of sweep-rap, cool, rabi,
/// fit): defaults, then the config file (--config or MBCOOL_CONFIG), then
/// MBCOOL_SEED / MBCOOL_OUT / MBCOOL_SHOTS / MBCOOL_CYCLES, then the flags.
/// --shots applies to cool (trial count) and rabi (shots per point) and is a
/// usage error elsewhere; --cycles applies to cool and rabi. Environment
/// values are ignored where they do not apply. Validates before returning.
RunConfig assemble_run_config(const std::string& command, const CliOverrides& cli);

}  // namespace mbcool
