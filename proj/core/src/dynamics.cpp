#include "mbcool/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mbcool/parallel.hpp"

namespace mbcool {

using std::numbers::pi;

double Drive::rabi_at(double t) const {
    if (envelope == EnvelopeKind::square) return peak_rabi_hz;
    const double s = std::sin(pi * t / duration_s);
    return peak_rabi_hz * s * s;
}

double Drive::detuning_at(double t) const {
    return chirp_range_hz / duration_s * (t - 0.5 * duration_s);
}

Drive drive_from_pulse(const RapPulse& pulse, double omega_n_hz) {
    pulse.validate();
    return Drive{pulse.duration_s, omega_n_hz, pulse.chirp_range_hz,
                 EnvelopeKind::squared_sine};
}

double TwoLevelAmplitudes::norm() const {
    return std::sqrt(std::norm(c_g) + std::norm(c_e));
}

double TwoLevelAmplitudes::population_excited() const { return std::norm(c_e); }

TwoLevelAmplitudes evolve_two_level(const Drive& drive, TwoLevelAmplitudes start,
                                    const IntegratorOptions& opts) {
    if (!(drive.duration_s > 0.0))
        throw std::invalid_argument("evolve_two_level: duration must be > 0");
    detail::cvec y{start.c_g, start.c_e};
    // i y' = pi [ -delta  Omega ; Omega  delta ] y
    auto rhs = [&drive](double t, const detail::cvec& s, detail::cvec& dydt) {
        const double om = pi * drive.rabi_at(t);
        const double dl = pi * drive.detuning_at(t);
        const std::complex<double> i_unit{0.0, 1.0};
        dydt[0] = i_unit * (dl * s[0] - om * s[1]);
        dydt[1] = -i_unit * (om * s[0] + dl * s[1]);
    };
    if (opts.fixed_steps > 0)
        integrate_fixed(rhs, y, 0.0, drive.duration_s, opts.fixed_steps);
    else
        integrate_adaptive(rhs, y, 0.0, drive.duration_s, opts);
    return {y[0], y[1]};
}

TwoLevelAmplitudes evolve_two_level(const RapPulse& pulse, double omega_n_hz,
                                    TwoLevelAmplitudes start,
                                    const IntegratorOptions& opts) {
    IntegratorOptions o = opts;
    if (o.fixed_steps < 0) o.fixed_steps = pulse.n_time_samples;
    return evolve_two_level(drive_from_pulse(pulse, omega_n_hz), start, o);
}

double transfer_probability(const Drive& drive, const IntegratorOptions& opts) {
    return evolve_two_level(drive, TwoLevelAmplitudes::ground(), opts).population_excited();
}

namespace {

// Rabi frequency (Hz) of an ion currently occupying Fock index n. Sidebands
// use the |s|-th-order matrix element of that occupation,
// omega0 * |<n+s|D|n>| (~ omega0 * eta * sqrt(n+1) for s = +1) -- the same
// n <-> n+1 element that sets the ion's sideband Rabi-probe frequency. The
// carrier is treated as motionally insensitive: every ladder is driven at the
// calibrated carrier rate (its zeroth-order coupling), so P_carrier does not
// depend on n. The exact n-dependent carrier element stays available through
// fock::coupling and in the full validation engine.
double pair_coupling_hz(int n, int s, const ModeConfig& cfg) {
    if (s == 0) return coupling(0, 0, cfg);
    return coupling(n, std::abs(s), cfg);
}

// Ladders with no partner level to move to: de-excitation e,n -> g,n-|s|
// (s > 0) needs n >= s; excitation g,n -> e,n-|s| on a red drive (s < 0)
// needs n >= |s|. |e,0> in particular is the protocol's dark state.
bool ladder_is_dark(int n, int s) {
    if (s > 0) return n < s;
    if (s < 0) return n < -s;
    return false;
}

} // namespace

double reference_coupling_hz(int s, const ModeConfig& cfg, SidebandScale mode) {
    if (s < -2 || s > 2) throw std::invalid_argument("reference_coupling_hz: |s| <= 2");
    if (mode == SidebandScale::bare_omega0) return cfg.omega0_hz;
    if (s == 0) return coupling(0, 0, cfg);
    return coupling(0, std::abs(s), cfg);
}

double ladder_coupling_scale(int n, int s, const ModeConfig& cfg, SidebandScale mode) {
    if (n < 0) throw std::invalid_argument("ladder_coupling_scale: n < 0");
    if (s < -2 || s > 2) throw std::invalid_argument("ladder_coupling_scale: |s| <= 2");
    if (ladder_is_dark(n, s)) return 0.0;
    return pair_coupling_hz(n, s, cfg) / reference_coupling_hz(s, cfg, mode);
}

LadderEnsemble LadderEnsemble::build(const ThermalDistribution& init, int sideband_order,
                                     const ModeConfig& cfg, SidebandScale mode) {
    cfg.validate();
    if (sideband_order < -2 || sideband_order > 2)
        throw std::invalid_argument("LadderEnsemble: |sideband_order| <= 2");
    LadderEnsemble ens;
    ens.sideband_order = sideband_order;
    ens.scale_mode = mode;
    ens.ladders.resize(init.probabilities.size());
    const int s = sideband_order;
    for (int n = 0; n < static_cast<int>(init.probabilities.size()); ++n) {
        Ladder& l = ens.ladders[n];
        l.weight = init.probabilities[n];
        l.n_initial = n;
        l.starts_excited = s > 0;
        l.dark = ladder_is_dark(n, s);
        l.n_final = l.dark ? n : n + (s > 0 ? -s : s);
        l.coupling_hz = l.dark ? 0.0 : pair_coupling_hz(n, s, cfg);
        l.scale = l.dark ? 0.0 : l.coupling_hz / reference_coupling_hz(s, cfg, mode);
        l.amplitudes = l.starts_excited ? TwoLevelAmplitudes::excited()
                                        : TwoLevelAmplitudes::ground();
        l.transfer = 0.0;
    }
    return ens;
}

double LadderEnsemble::evolve(const RapPulse& pulse, const IntegratorOptions& opts) {
    pulse.validate();
    parallel_for(ladders.size(), [&](std::size_t idx) {
        Ladder& l = ladders[idx];
        if (l.dark) {
            l.transfer = 0.0;
            return;
        }
        const double omega_n = pulse.peak_rabi_hz * l.scale;
        const TwoLevelAmplitudes start = l.starts_excited
                                             ? TwoLevelAmplitudes::excited()
                                             : TwoLevelAmplitudes::ground();
        l.amplitudes = evolve_two_level(pulse, omega_n, start, opts);
        l.transfer = l.starts_excited ? std::norm(l.amplitudes.c_g)
                                      : std::norm(l.amplitudes.c_e);
    });
    double eff = 0.0;
    for (const Ladder& l : ladders) eff += l.weight * l.transfer;
    return eff;
}

double transfer_efficiency(const RapPulse& pulse, const ThermalDistribution& init,
                           const ModeConfig& cfg, SidebandScale mode,
                           const IntegratorOptions& opts) {
    LadderEnsemble ens = LadderEnsemble::build(init, pulse.sideband_order, cfg, mode);
    return ens.evolve(pulse, opts);
}

FullState FullState::basis(int n_max, bool excited, int n) {
    if (n_max < 1) throw std::invalid_argument("FullState: n_max < 1");
    if (n < 0 || n > n_max) throw std::invalid_argument("FullState: n outside [0, n_max]");
    FullState st;
    st.n_max = n_max;
    st.amps.assign(2 * static_cast<std::size_t>(n_max + 1), {0.0, 0.0});
    st.at(excited, n) = {1.0, 0.0};
    return st;
}

std::complex<double>& FullState::at(bool excited, int n) {
    return amps[(excited ? n_max + 1 : 0) + n];
}

const std::complex<double>& FullState::at(bool excited, int n) const {
    return amps[(excited ? n_max + 1 : 0) + n];
}

double FullState::norm() const {
    double s = 0.0;
    for (const auto& a : amps) s += std::norm(a);
    return std::sqrt(s);
}

double FullState::population_excited() const {
    double s = 0.0;
    for (int n = 0; n <= n_max; ++n) s += std::norm(at(true, n));
    return s;
}

double FullState::top_level_population() const {
    double s = 0.0;
    for (int n = std::max(0, n_max - 1); n <= n_max; ++n)
        s += std::norm(at(false, n)) + std::norm(at(true, n));
    return s;
}

FullState evolve_full(const RapPulse& pulse, const FullState& start,
                      const std::vector<int>& sideband_orders, const ModeConfig& cfg,
                      SidebandScale mode, const IntegratorOptions& opts,
                      EnvelopeKind envelope) {
    pulse.validate();
    cfg.validate();
    if (sideband_orders.empty())
        throw std::invalid_argument("evolve_full: no sideband orders requested");
    if (start.n_max < 1 || start.amps.size() != 2 * static_cast<std::size_t>(start.n_max + 1))
        throw std::invalid_argument("evolve_full: malformed start state");
    constexpr double truncation_budget = 1e-6;
    if (start.top_level_population() >= truncation_budget)
        throw TruncationOverflow("evolve_full: initial state touches the Fock cutoff",
                                 start.top_level_population());

    const int n_max = start.n_max;
    const int s0 = pulse.sideband_order;
    // bare drive amplitude recovered from the pulse's calibrated peak
    const double bare_peak_hz = mode == SidebandScale::bare_omega0
        ? pulse.peak_rabi_hz
        : pulse.peak_rabi_hz * cfg.omega0_hz / reference_coupling_hz(s0, cfg, mode);

    struct Band {
        int s;
        int n_lo;                                // lowest g-side index
        std::vector<std::complex<double>> elem;  // <n+s|D|n> for n = n_lo..
    };
    std::vector<Band> bands;
    bands.reserve(sideband_orders.size());
    for (int s : sideband_orders) {
        if (s < -2 || s > 2)
            throw std::invalid_argument("evolve_full: |sideband order| <= 2 supported");
        Band b;
        b.s = s;
        b.n_lo = std::max(0, -s);
        const int n_hi = std::min(n_max, n_max - s);
        for (int n = b.n_lo; n <= n_hi; ++n)
            b.elem.push_back(displacement_element(n + s, n, cfg.lamb_dicke));
        bands.push_back(std::move(b));
    }

    const double nu_ang = 2.0 * pi * cfg.trap_frequency_hz;
    const double T = pulse.duration_s;
    const double chirp_rate = pulse.chirp_range_hz / T;
    const std::size_t e_off = static_cast<std::size_t>(n_max) + 1;

    auto rhs = [&](double t, const detail::cvec& y, detail::cvec& dydt) {
        std::fill(dydt.begin(), dydt.end(), std::complex<double>{0.0, 0.0});
        double env = 1.0;
        if (envelope == EnvelopeKind::squared_sine) {
            const double sn = std::sin(pi * t / T);
            env = sn * sn;
        }
        const double half_omega_ang = pi * bare_peak_hz * env; // (2*pi*Omega)/2
        if (half_omega_ang == 0.0) return;
        // accumulated chirp phase: 2*pi * int delta dt = pi*(range/T)*t*(t-T)
        const double phi = pi * chirp_rate * t * (t - T);
        for (const Band& b : bands) {
            const double theta = (b.s - s0) * nu_ang * t - phi;
            const std::complex<double> rot{std::cos(theta), std::sin(theta)};
            for (int k = 0; k < static_cast<int>(b.elem.size()); ++k) {
                const int n = b.n_lo + k;             // g-side Fock index
                const std::size_t gi = static_cast<std::size_t>(n);
                const std::size_t ei = e_off + static_cast<std::size_t>(n + b.s);
                const std::complex<double> c = half_omega_ang * (b.elem[k] * rot);
                // i y' = H y  =>  y' = -i H y
                dydt[ei] += std::complex<double>{0.0, -1.0} * c * y[gi];
                dydt[gi] += std::complex<double>{0.0, -1.0} * std::conj(c) * y[ei];
            }
        }
    };

    FullState out = start;
    if (opts.fixed_steps > 0)
        integrate_fixed(rhs, out.amps, 0.0, T, opts.fixed_steps);
    else
        integrate_adaptive(rhs, out.amps, 0.0, T, opts);

    const double drift = std::abs(out.norm() - 1.0);
    if (drift > 1e-8)
        throw IntegrationError("evolve_full: norm drift " + std::to_string(drift) +
                                   " exceeds 1e-8",
                               T);
    if (out.top_level_population() >= truncation_budget)
        throw TruncationOverflow("evolve_full: population reached the Fock cutoff",
                                 out.top_level_population());
    return out;
}

} // namespace mbcool
