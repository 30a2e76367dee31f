#include "mbcool/protocol.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mbcool/parallel.hpp"

namespace mbcool {

void ProtocolConfig::validate() const {
    if (!(nbar >= 0.0)) throw std::invalid_argument("ProtocolConfig: nbar must be >= 0");
    if (cycles_m < 1) throw std::invalid_argument("ProtocolConfig: cycles_m must be >= 1");
    if (!(detection_time_s >= 0.0))
        throw std::invalid_argument("ProtocolConfig: detection_time must be >= 0");
    if (!(detection_fidelity > 0.5 && detection_fidelity <= 1.0))
        throw std::invalid_argument("ProtocolConfig: detection_fidelity in (0.5, 1]");
    if (!(heating_rate_hz >= 0.0))
        throw std::invalid_argument("ProtocolConfig: heating_rate must be >= 0");
    if (shots < 1) throw std::invalid_argument("ProtocolConfig: shots must be >= 1");
    carrier_pulse.validate();
    sideband_pulse.validate();
    if (carrier_pulse.sideband_order != 0)
        throw std::invalid_argument("ProtocolConfig: carrier pulse must have order 0");
    if (sideband_pulse.sideband_order != +1)
        throw std::invalid_argument("ProtocolConfig: sideband pulse must have order +1");
}

double TransferModel::sideband_at(int n) const {
    if (n < 0) throw std::invalid_argument("TransferModel: n < 0");
    if (p_sideband.empty()) throw std::invalid_argument("TransferModel: empty table");
    const std::size_t i = static_cast<std::size_t>(n);
    return i < p_sideband.size() ? p_sideband[i] : p_sideband.back();
}

TransferModel TransferModel::from_pulses(const RapPulse& carrier, const RapPulse& sideband,
                                         const ModeConfig& cfg, SidebandScale mode,
                                         int n_table, const IntegratorOptions& opts) {
    carrier.validate();
    sideband.validate();
    cfg.validate();
    if (carrier.sideband_order != 0)
        throw std::invalid_argument("TransferModel: carrier pulse must have order 0");
    if (sideband.sideband_order != +1)
        throw std::invalid_argument("TransferModel: sideband pulse must have order +1");
    if (n_table < 1) throw std::invalid_argument("TransferModel: n_table must be >= 1");

    TransferModel model;
    const double carrier_scale = ladder_coupling_scale(0, 0, cfg, mode);
    model.p_carrier =
        evolve_two_level(carrier, carrier.peak_rabi_hz * carrier_scale,
                         TwoLevelAmplitudes::ground(), opts)
            .population_excited();

    // table slot n holds the n <-> n+1 pair's transfer probability; the
    // |e,0> dark rule is applied by the branch logic, not baked in here
    const double ref = reference_coupling_hz(+1, cfg, mode);
    model.p_sideband.resize(static_cast<std::size_t>(n_table));
    parallel_for(model.p_sideband.size(), [&](std::size_t n) {
        const double omega = sideband.peak_rabi_hz *
                             coupling(static_cast<int>(n), +1, cfg) / ref;
        model.p_sideband[n] =
            evolve_two_level(sideband, omega, TwoLevelAmplitudes::ground(), opts)
                .population_excited();
    });
    return model;
}

TransferModel TransferModel::ideal(int n_table) { return constant_failure(0.0, n_table); }

TransferModel TransferModel::constant_failure(double epsilon, int n_table) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("TransferModel: epsilon in [0, 1]");
    if (n_table < 1) throw std::invalid_argument("TransferModel: n_table must be >= 1");
    TransferModel model;
    model.p_carrier = 1.0 - epsilon;
    model.p_sideband.assign(static_cast<std::size_t>(n_table), 1.0 - epsilon);
    return model;
}

// Draw order per trial (fixed; reproducibility depends on it): thermal n,
// carrier flip, then per cycle: sideband flip (skipped for the dark |e,0>),
// detection report, heating gate, heating count (only when the gate fires).
TrialOutcome run_trial(const ProtocolConfig& config, const TransferModel& model,
                       RngStream& rng) {
    TrialOutcome out;
    int n = rng.thermal_n(config.nbar);
    bool excited = false;
    out.n_initial = n;
    out.herald_bits.reserve(static_cast<std::size_t>(config.cycles_m));
    out.n_after_cycle.reserve(static_cast<std::size_t>(config.cycles_m));

    if (rng.bernoulli(model.p_carrier)) excited = true;

    const double lambda = config.heating_rate_hz * config.detection_time_s;
    const double p_heat = -std::expm1(-lambda);

    for (int cycle = 0; cycle < config.cycles_m; ++cycle) {
        if (excited) {
            if (n >= 1 && rng.bernoulli(model.sideband_at(n))) {
                excited = false;
                --n;
            }
        } else if (rng.bernoulli(model.sideband_at(n))) {
            excited = true;
            ++n;
        }
        out.n_after_raps = n;

        bool reported_dark = excited;
        if (!rng.bernoulli(config.detection_fidelity)) reported_dark = !reported_dark;
        out.herald_bits.push_back(reported_dark ? 1 : 0);
        if (!reported_dark) {
            out.final_n = n;
            out.n_after_cycle.push_back(n);
            out.accepted = false;
            return out;
        }
        if (p_heat > 0.0 && rng.bernoulli(p_heat)) n += rng.truncated_poisson_ge1(lambda);
        out.final_n = n;
        out.n_after_cycle.push_back(n);
    }
    out.accepted = true;
    return out;
}

std::vector<TrialOutcome> run_trials(const ProtocolConfig& config,
                                     const TransferModel& model) {
    config.validate();
    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(config.shots));
    parallel_for(outcomes.size(), [&](std::size_t i) {
        RngStream rng = RngStream::for_trial(config.rng_seed, static_cast<std::uint64_t>(i));
        outcomes[i] = run_trial(config, model, rng);
    });
    return outcomes;
}

namespace {

int leading_dark_cycles(const TrialOutcome& t) {
    const int bits = static_cast<int>(t.herald_bits.size());
    return t.accepted ? bits : bits - 1;
}

HeraldStatistics statistics_impl(const std::vector<TrialOutcome>& outcomes, int cycles) {
    if (outcomes.empty())
        throw std::invalid_argument("herald_statistics: no trials");
    if (cycles < 1) throw std::invalid_argument("herald_statistics: cycles must be >= 1");
    HeraldStatistics st;
    st.n_trials = static_cast<long long>(outcomes.size());
    int max_n = 0;
    for (const TrialOutcome& t : outcomes) {
        if (leading_dark_cycles(t) < cycles) continue;
        ++st.n_accepted;
        max_n = std::max(max_n, t.n_after_cycle[static_cast<std::size_t>(cycles - 1)]);
    }
    const double nt = static_cast<double>(st.n_trials);
    st.heralded_fraction = static_cast<double>(st.n_accepted) / nt;
    st.heralded_fraction_se =
        std::sqrt(st.heralded_fraction * (1.0 - st.heralded_fraction) / nt);
    if (st.n_accepted == 0) {
        st.conditional_defined = false;
        st.p0_given_herald = std::numeric_limits<double>::quiet_NaN();
        st.p0_given_herald_se = std::numeric_limits<double>::quiet_NaN();
        return st;
    }
    st.conditional_defined = true;
    st.motional_histogram.assign(static_cast<std::size_t>(max_n) + 1, 0.0);
    for (const TrialOutcome& t : outcomes) {
        if (leading_dark_cycles(t) < cycles) continue;
        st.motional_histogram[static_cast<std::size_t>(
            t.n_after_cycle[static_cast<std::size_t>(cycles - 1)])] += 1.0;
    }
    const double na = static_cast<double>(st.n_accepted);
    for (double& h : st.motional_histogram) h /= na;
    st.p0_given_herald = st.motional_histogram[0];
    st.p0_given_herald_se =
        std::sqrt(st.p0_given_herald * (1.0 - st.p0_given_herald) / na);
    return st;
}

}  // namespace

HeraldStatistics herald_statistics(const std::vector<TrialOutcome>& outcomes) {
    int cycles = 0;
    for (const TrialOutcome& t : outcomes)
        cycles = std::max(cycles, static_cast<int>(t.herald_bits.size()));
    return statistics_impl(outcomes, std::max(cycles, 1));
}

HeraldStatistics herald_statistics_at(const std::vector<TrialOutcome>& outcomes,
                                      int cycles) {
    return statistics_impl(outcomes, cycles);
}

double analytic_p0(double epsilon, double nbar, int m, HeraldModel variant) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::domain_error("analytic_p0: epsilon in [0, 1]");
    if (!(nbar >= 0.0)) throw std::domain_error("analytic_p0: nbar >= 0");
    if (m < 1) throw std::domain_error("analytic_p0: m >= 1");
    const double factor = variant == HeraldModel::with_carrier ? 2.0 : 1.0;
    return 1.0 / (1.0 + factor * std::pow(epsilon, m) * nbar);
}

double analytic_pn_given_herald(double epsilon, double nbar, int n) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::domain_error("analytic_pn_given_herald: epsilon in [0, 1]");
    if (!(nbar >= 0.0)) throw std::domain_error("analytic_pn_given_herald: nbar >= 0");
    if (n < 1)
        throw std::domain_error(
            "analytic_pn_given_herald: defined for n >= 1 only; use analytic_p0 for n = 0");
    const double r = nbar / (1.0 + nbar);
    return epsilon / (1.0 + 2.0 * epsilon * nbar) * std::pow(r, n);
}

double detection_escape_probability(double heating_rate_hz, double detection_time_s) {
    if (!(heating_rate_hz >= 0.0))
        throw std::domain_error("detection_escape_probability: rate >= 0");
    if (!(detection_time_s >= 0.0))
        throw std::domain_error("detection_escape_probability: time >= 0");
    return -std::expm1(-heating_rate_hz * detection_time_s);
}

std::vector<ChainLevel> exact_chain(const ProtocolConfig& config,
                                    const TransferModel& model) {
    config.validate();
    // support: thermal tail below 1e-12, plus room for per-cycle growth
    // (one sideband quantum and a handful of heating quanta per cycle)
    const int n_th = truncation_for(config.nbar, 1e-12);
    const int grow = config.cycles_m * 12 + 2;
    const std::size_t N = static_cast<std::size_t>(n_th + grow + 1);

    std::vector<double> g(N, 0.0), e(N, 0.0);
    {
        ThermalDistribution init = ThermalDistribution::truncated(config.nbar, n_th);
        for (std::size_t n = 0; n < init.probabilities.size() && n < N; ++n)
            g[n] = init.probabilities[n];
    }

    // carrier (first cycle only, motionally insensitive)
    for (std::size_t n = 0; n < N; ++n) {
        e[n] = model.p_carrier * g[n];
        g[n] *= 1.0 - model.p_carrier;
    }

    const double lambda = config.heating_rate_hz * config.detection_time_s;
    std::vector<double> poisson;  // pmf of the heating increment, k = 0..
    {
        double pk = std::exp(-lambda), acc = pk;
        poisson.push_back(pk);
        for (int k = 1; acc < 1.0 - 1e-15 && k < 64; ++k) {
            pk *= lambda / k;
            poisson.push_back(pk);
            acc += pk;
        }
    }

    const double f = config.detection_fidelity;
    std::vector<ChainLevel> levels;
    levels.reserve(static_cast<std::size_t>(config.cycles_m));
    std::vector<double> g2(N), e2(N), heated(N);

    for (int cycle = 0; cycle < config.cycles_m; ++cycle) {
        // sideband: |e,n>=1> -> |g,n-1>, |g,n> -> |e,n+1>, |e,0> dark
        std::fill(g2.begin(), g2.end(), 0.0);
        std::fill(e2.begin(), e2.end(), 0.0);
        e2[0] += e[0];
        for (std::size_t n = 1; n < N; ++n) {
            const double p = model.sideband_at(static_cast<int>(n));
            g2[n - 1] += p * e[n];
            e2[n] += (1.0 - p) * e[n];
        }
        for (std::size_t n = 0; n < N; ++n) {
            const double p = model.sideband_at(static_cast<int>(n));
            const std::size_t up = std::min(n + 1, N - 1);
            e2[up] += p * g[n];
            g2[n] += (1.0 - p) * g[n];
        }
        // detection: keep the dark-reported subensemble, true state intact
        for (std::size_t n = 0; n < N; ++n) {
            e2[n] *= f;
            g2[n] *= 1.0 - f;
        }
        // heating during the detection window of the dark outcome
        auto heat = [&](std::vector<double>& v) {
            std::fill(heated.begin(), heated.end(), 0.0);
            for (std::size_t n = 0; n < N; ++n) {
                if (v[n] == 0.0) continue;
                for (std::size_t k = 0; k < poisson.size(); ++k) {
                    const std::size_t up = std::min(n + k, N - 1);
                    heated[up] += v[n] * poisson[k];
                }
            }
            v.swap(heated);
        };
        heat(e2);
        heat(g2);
        g.swap(g2);
        e.swap(e2);

        ChainLevel lvl;
        double mass = 0.0;
        for (std::size_t n = 0; n < N; ++n) mass += g[n] + e[n];
        lvl.heralded_fraction = mass;
        lvl.dist_n.resize(N);
        for (std::size_t n = 0; n < N; ++n) lvl.dist_n[n] = (g[n] + e[n]) / mass;
        lvl.p0_given_herald = lvl.dist_n[0];
        levels.push_back(std::move(lvl));
    }
    return levels;
}

}  // namespace mbcool
