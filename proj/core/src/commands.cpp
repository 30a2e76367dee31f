#include "mbcool/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mbcool/analysis.hpp"
#include "mbcool/dynamics.hpp"
#include "mbcool/errors.hpp"
#include "mbcool/protocol.hpp"
#include "mbcool/rng.hpp"

namespace mbcool {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string header_comment(const RunConfig& cfg) {
    return "config=" + config_hash_hex(cfg) + " seed=" + std::to_string(cfg.seed);
}

fs::path prepare_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.out_dir +
                          "': " + ec.message());
    return dir;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<double> linspace(double start, double stop, int points) {
    std::vector<double> t(points);
    for (int i = 0; i < points; ++i)
        t[i] = points == 1 ? start : start + (stop - start) * i / (points - 1.0);
    return t;
}

int transition_order(Transition t) {
    switch (t) {
        case Transition::carrier: return 0;
        case Transition::blue_sideband: return +1;
        case Transition::red_sideband: return -1;
    }
    return 0;
}

json meta_block(const RunConfig& cfg, const char* command) {
    return json{{"command", command},
                {"config_hash", config_hash_hex(cfg)},
                {"seed", cfg.seed}};
}

// Mean per-pulse failure probabilities of the integrated transfer model under
// the thermal initial distribution; the inputs the closed-form columns expect.
double mean_sideband_failure(const TransferModel& model, double nbar) {
    const int n_top = truncation_for(nbar, 1e-12);
    double eps = 0.0;
    for (int n = 0; n <= n_top; ++n)
        eps += thermal_pn(nbar, n) * (1.0 - model.sideband_at(n));
    return eps;
}

json statistics_to_json(const HeraldStatistics& st) {
    json j{{"n_trials", st.n_trials},
           {"n_accepted", st.n_accepted},
           {"heralded_fraction", st.heralded_fraction},
           {"heralded_fraction_se", st.heralded_fraction_se},
           {"conditional_defined", st.conditional_defined}};
    if (st.conditional_defined) {
        j["p0_given_herald"] = st.p0_given_herald;
        j["p0_given_herald_se"] = st.p0_given_herald_se;
        j["motional_histogram"] = st.motional_histogram;
    } else {
        j["p0_given_herald"] = nullptr;
        j["p0_given_herald_se"] = nullptr;
        j["motional_histogram"] = json::array();
    }
    return j;
}

long long sample_binomial(RngStream& rng, long long shots, double p) {
    long long k = 0;
    for (long long s = 0; s < shots; ++s) k += rng.bernoulli(p) ? 1 : 0;
    return k;
}

}  // namespace

int cmd_sweep_rap(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    if (cfg.sweep.empty()) throw ConfigError("sweep requires at least one grid");

    const fs::path dir = prepare_out_dir(cfg);
    const fs::path path = dir / "sweep_rap.csv";
    std::ofstream out = open_output(path);
    out << "# " << header_comment(cfg) << "\n";
    out << "transition,duration_s,efficiency\n";

    const ThermalDistribution init =
        ThermalDistribution::truncated(cfg.protocol.nbar, cfg.mode.n_max);
    int failures = 0;
    int rows = 0;
    for (const SweepGrid& grid : cfg.sweep) {
        RapPulse pulse = grid.transition == Transition::carrier
                             ? cfg.protocol.carrier_pulse
                             : cfg.protocol.sideband_pulse;
        pulse.sideband_order = transition_order(grid.transition);
        for (double T : linspace(grid.t_start_s, grid.t_stop_s, grid.points)) {
            pulse.duration_s = T;
            double eff = std::numeric_limits<double>::quiet_NaN();
            try {
                eff = transfer_efficiency(pulse, init, cfg.mode, cfg.scale_mode);
            } catch (const IntegrationError& e) {
                ++failures;
                if (cfg.verbosity >= 1)
                    log << "sweep-rap: " << to_string(grid.transition) << " T=" << T
                        << ": " << e.what() << "\n";
            } catch (const TruncationOverflow& e) {
                ++failures;
                if (cfg.verbosity >= 1)
                    log << "sweep-rap: " << to_string(grid.transition) << " T=" << T
                        << ": " << e.what() << "\n";
            }
            out << to_string(grid.transition) << "," << fmt_g17(T) << ","
                << fmt_g17(eff) << "\n";
            ++rows;
        }
    }
    finish_output(out, path);
    if (cfg.verbosity >= 1)
        log << "sweep-rap: wrote " << rows << " rows to " << path.string()
            << (failures ? " (" + std::to_string(failures) + " failed rows)" : "")
            << "\n";
    return failures > 0 ? exit_numerical : exit_ok;
}

int cmd_cool(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const fs::path dir = prepare_out_dir(cfg);
    const fs::path trials_path = dir / "cool_trials.csv";
    const fs::path summary_path = dir / "cool_summary.json";
    std::ofstream trials_out = open_output(trials_path);
    std::ofstream summary_out = open_output(summary_path);

    ProtocolConfig pc = cfg.protocol;
    pc.rng_seed = cfg.seed;
    const TransferModel model = TransferModel::from_pulses(
        pc.carrier_pulse, pc.sideband_pulse, cfg.mode, cfg.scale_mode);
    const std::vector<TrialOutcome> outcomes = run_trials(pc, model);

    trials_out << "# " << header_comment(cfg) << "\n";
    trials_out << "trial,n_initial,herald_bits,n_after_raps,final_n,accepted\n";
    for (size_t i = 0; i < outcomes.size(); ++i) {
        const TrialOutcome& t = outcomes[i];
        trials_out << i << "," << t.n_initial << ",";
        for (std::uint8_t b : t.herald_bits) trials_out << (b ? '1' : '0');
        trials_out << "," << t.n_after_raps << "," << t.final_n << ","
                   << (t.accepted ? 1 : 0) << "\n";
    }
    finish_output(trials_out, trials_path);

    const double eps_sb = mean_sideband_failure(model, pc.nbar);
    const double eps_carrier = 1.0 - model.p_carrier;
    const std::vector<ChainLevel> chain = exact_chain(pc, model);

    json analytic_levels = json::array();
    json chain_levels = json::array();
    json mc_levels = json::array();
    for (int m = 1; m <= pc.cycles_m; ++m) {
        analytic_levels.push_back(
            {{"m", m},
             {"p0_ideal", analytic_p0(eps_sb, pc.nbar, m, HeraldModel::ideal)},
             {"p0_with_carrier",
              analytic_p0(eps_sb, pc.nbar, m, HeraldModel::with_carrier)}});
        const ChainLevel& lvl = chain[m - 1];
        chain_levels.push_back({{"m", m},
                                {"heralded_fraction", lvl.heralded_fraction},
                                {"p0_given_herald", lvl.p0_given_herald}});
        json st = statistics_to_json(herald_statistics_at(outcomes, m));
        st["m"] = m;
        mc_levels.push_back(std::move(st));
    }

    json head = json::array();
    for (int n = 0; n < 8; ++n) head.push_back(model.sideband_at(n));
    const json summary{
        {"_meta", meta_block(cfg, "cool")},
        {"transfer",
         {{"p_carrier", model.p_carrier},
          {"epsilon_carrier", eps_carrier},
          {"epsilon_sideband_mean", eps_sb},
          {"p_sideband_head", head}}},
        {"detection_escape",
         detection_escape_probability(pc.heating_rate_hz, pc.detection_time_s)},
        {"analytic", analytic_levels},
        {"exact_chain", chain_levels},
        {"monte_carlo", mc_levels}};
    summary_out << summary.dump(2) << "\n";
    finish_output(summary_out, summary_path);

    if (cfg.verbosity >= 1) {
        const HeraldStatistics st = herald_statistics(outcomes);
        log << "cool: " << st.n_accepted << "/" << st.n_trials
            << " trials heralded dark";
        if (st.conditional_defined)
            log << ", p0|herald = " << st.p0_given_herald << " +- "
                << st.p0_given_herald_se;
        else
            log << ", conditional statistics undefined";
        log << "\n";
        log << "cool: wrote " << trials_path.string() << " and "
            << summary_path.string() << "\n";
    }
    return exit_ok;
}

int cmd_rabi(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const fs::path dir = prepare_out_dir(cfg);
    const fs::path path = dir / "rabi_scan.csv";

    std::vector<double> pops;
    std::string source_note;
    switch (cfg.rabi.source) {
        case RabiSource::thermal: {
            pops = ThermalDistribution::truncated(
                       cfg.protocol.nbar, truncation_for(cfg.protocol.nbar, 1e-12))
                       .probabilities;
            source_note = "source=thermal nbar=" + fmt_g17(cfg.protocol.nbar);
            break;
        }
        case RabiSource::protocol: {
            ProtocolConfig pc = cfg.protocol;
            pc.rng_seed = cfg.seed;
            const TransferModel model = TransferModel::from_pulses(
                pc.carrier_pulse, pc.sideband_pulse, cfg.mode, cfg.scale_mode);
            const HeraldStatistics st = herald_statistics(run_trials(pc, model));
            if (!st.conditional_defined) {
                log << "rabi: no heralded trials to synthesize a scan from ("
                    << st.n_trials << " trials, 0 accepted)\n";
                return exit_numerical;
            }
            pops = st.motional_histogram;
            source_note = "source=protocol cycles=" + std::to_string(pc.cycles_m) +
                          " accepted=" + std::to_string(st.n_accepted) + "/" +
                          std::to_string(st.n_trials);
            break;
        }
        case RabiSource::analytic: {
            // Single-cycle closed-form herald model. Its spike + tail carry
            // less than unit mass; the deficit is reported, and the
            // populations are scaled up front so the synthesized signal uses
            // a proper distribution.
            const double eps = cfg.rabi.epsilon;
            const double nbar = cfg.protocol.nbar;
            pops.assign(truncation_for(nbar, 1e-12) + 1, 0.0);
            pops[0] = analytic_p0(eps, nbar, 1, HeraldModel::with_carrier);
            for (size_t n = 1; n < pops.size(); ++n)
                pops[n] = analytic_pn_given_herald(eps, nbar, static_cast<int>(n));
            double mass = 0.0;
            for (double p : pops) mass += p;
            for (double& p : pops) p /= mass;
            source_note = "source=analytic epsilon=" + fmt_g17(eps) +
                          " nbar=" + fmt_g17(nbar) +
                          " model_mass_deficit=" + fmt_g17(1.0 - mass);
            break;
        }
    }

    RabiScan scan;
    scan.transition = cfg.rabi.transition;
    scan.shots_per_point = cfg.rabi.shots_per_point;
    scan.times_s = linspace(cfg.rabi.t_start_s, cfg.rabi.t_stop_s, cfg.rabi.points);
    const std::vector<double> signal =
        rabi_signal(pops, scan.transition, scan.times_s, cfg.mode);
    scan.excitation.resize(signal.size());
    for (size_t i = 0; i < signal.size(); ++i) {
        const double p = std::min(1.0, std::max(0.0, signal[i]));
        if (cfg.rabi.sample_shots) {
            RngStream rng = RngStream::for_trial(cfg.seed, i);
            scan.excitation[i] =
                static_cast<double>(sample_binomial(rng, scan.shots_per_point, p)) /
                static_cast<double>(scan.shots_per_point);
        } else {
            scan.excitation[i] = p;
        }
    }

    save_scan(path.string(), scan,
              {header_comment(cfg),
               source_note + (cfg.rabi.sample_shots ? "" : " noiseless")});
    if (cfg.verbosity >= 1)
        log << "rabi: wrote " << scan.times_s.size() << " points to " << path.string()
            << "\n";
    return exit_ok;
}

int cmd_fit(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    if (cfg.fit.input_csv.empty())
        throw ConfigError("fit requires fit.input_csv to point at a scan");

    const fs::path dir = prepare_out_dir(cfg);
    const fs::path path = dir / "fit_result.json";
    std::ofstream out = open_output(path);

    const RabiScan scan = load_scan(cfg.fit.input_csv);
    FitResult guess;
    guess.p0 = cfg.fit.guess_p0;
    guess.eta = cfg.fit.guess_eta;
    guess.nbar_tail = cfg.fit.guess_nbar_tail;
    guess.omega0_hz = cfg.fit.guess_omega0_hz;
    FitOptions fopts;
    fopts.omega0_prior_hz = cfg.fit.omega0_prior_hz;
    fopts.omega0_prior_sigma_hz = cfg.fit.omega0_prior_sigma_hz;
    const FitResult fit = fit_rabi(scan, guess, fopts);

    json cov = json::array();
    for (int i = 0; i < 4; ++i) {
        json row = json::array();
        for (int j = 0; j < 4; ++j) row.push_back(fit.covariance[i][j]);
        cov.push_back(std::move(row));
    }
    const json result{
        {"_meta", meta_block(cfg, "fit")},
        {"input",
         {{"path", cfg.fit.input_csv},
          {"points", scan.times_s.size()},
          {"shots_per_point", scan.shots_per_point},
          {"transition", to_string(scan.transition)}}},
        {"guess",
         {{"p0", guess.p0},
          {"eta", guess.eta},
          {"nbar_tail", guess.nbar_tail},
          {"omega0_hz", guess.omega0_hz}}},
        {"fit",
         {{"p0", fit.p0},
          {"eta", fit.eta},
          {"nbar_tail", fit.nbar_tail},
          {"omega0_hz", fit.omega0_hz},
          {"residual_rms", fit.residual_rms},
          {"converged", fit.converged},
          {"degenerate", fit.degenerate},
          {"uncertainties",
           {{"p0", fit.uncertainty(0)},
            {"eta", fit.uncertainty(1)},
            {"nbar_tail", fit.uncertainty(2)},
            {"omega0_hz", fit.uncertainty(3)}}},
          {"covariance", cov}}}};
    out << result.dump(2) << "\n";
    finish_output(out, path);

    if (cfg.verbosity >= 1)
        log << "fit: p0 = " << fit.p0 << " +- " << fit.uncertainty(0)
            << (fit.converged ? "" : " (not converged)")
            << (fit.degenerate ? " (degenerate)" : "") << ", wrote " << path.string()
            << "\n";
    return exit_ok;
}

int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log) {
    try {
        if (name == "sweep-rap") return cmd_sweep_rap(cfg, log);
        if (name == "cool") return cmd_cool(cfg, log);
        if (name == "rabi") return cmd_rabi(cfg, log);
        if (name == "fit") return cmd_fit(cfg, log);
        log << "unknown command: " << name << "\n";
        return exit_usage;
    } catch (const IntegrationError& e) {
        log << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    } catch (const TruncationOverflow& e) {
        log << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    } catch (const IoError& e) {
        log << "i/o error: " << e.what() << "\n";
        return exit_io;
    } catch (const ParseError& e) {
        log << "parse error: " << e.what() << "\n";
        return exit_usage;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return exit_usage;
    }
}

}  // namespace mbcool
