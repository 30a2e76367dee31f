#pragma once

#include <cstdint>
#include <vector>

#include "mbcool/dynamics.hpp"
#include "mbcool/fock.hpp"
#include "mbcool/pulse.hpp"
#include "mbcool/rng.hpp"

namespace mbcool {

/// Everything one cooling run needs: initial thermal occupation, cycle count,
/// detection and heating figures, the two pulse definitions, trial budget and
/// seed. Defaults are the experiment's operating values.
struct ProtocolConfig {
    double nbar = 18.0;
    int cycles_m = 1;
    double detection_time_s = 1.5e-3;
    double detection_fidelity = 0.995;
    double heating_rate_hz = 37.0;  ///< upward quanta per second during detection
    RapPulse carrier_pulse{35e-6, 83e3, 200e3, 0};
    RapPulse sideband_pulse{250e-6, 5.8e3, 40e3, +1};
    long long shots = 900;  ///< number of Monte Carlo trials
    std::uint64_t rng_seed = 0;

    /// Throws std::invalid_argument on out-of-domain values
    /// (detection_fidelity in (0.5, 1], heating >= 0, cycles_m >= 1,
    /// shots >= 1, nbar >= 0, carrier order 0, sideband order +1).
    void validate() const;
};

/// Per-n success probabilities the Monte Carlo consumes. The carrier is
/// motionally insensitive (one number); the sideband table is indexed by the
/// ion's current Fock index n and holds the transfer probability of its
/// n <-> n+1 ladder, used by both branches the drive acts on:
/// |e,n>: success moves to |g,n-1> (n >= 1; |e,0> is dark and never rolled);
/// |g,n>: success moves to |e,n+1>.
/// Indices past the table reuse the last entry (the thermal mass out there is
/// below 1e-7 at the operating point).
struct TransferModel {
    double p_carrier = 1.0;
    std::vector<double> p_sideband;

    double sideband_at(int n) const;

    /// Integrate both pulses: the carrier once (n-independent), the sideband
    /// once per table slot at its ladder coupling. n_table slots.
    static TransferModel from_pulses(const RapPulse& carrier, const RapPulse& sideband,
                                     const ModeConfig& cfg,
                                     SidebandScale mode = SidebandScale::n1_coupling,
                                     int n_table = 512, const IntegratorOptions& opts = {});

    /// Every transfer succeeds (failure probability 0).
    static TransferModel ideal(int n_table = 512);

    /// Every transfer succeeds with the constant probability 1 - epsilon:
    /// the hook behind the closed-form model comparisons.
    static TransferModel constant_failure(double epsilon, int n_table = 512);
};

/// Record of one protocol attempt.
struct TrialOutcome {
    std::vector<std::uint8_t> herald_bits;  ///< per executed cycle; 1 = dark
    std::vector<int> n_after_cycle;  ///< n after that cycle's detection (+heating)
    int n_initial = 0;               ///< thermal sample the trial started from
    int n_after_raps = 0;  ///< n before the last executed detection's heating
    int final_n = 0;       ///< n after the last executed detection
    bool accepted = false; ///< every herald bit dark
};

/// One attempt: thermal sample, carrier flip, then cycles_m rounds of
/// sideband + detection (the carrier runs only in the first cycle). A bright
/// report ends the trial (rejection; the ion rethermalizes before the next
/// attempt). A dark report applies detection-window heating and continues.
TrialOutcome run_trial(const ProtocolConfig& config, const TransferModel& model,
                       RngStream& rng);

/// All trials, one reproducible substream per trial index; results are
/// identical for a given (seed, config, model) regardless of thread count.
std::vector<TrialOutcome> run_trials(const ProtocolConfig& config,
                                     const TransferModel& model);

/// Acceptance statistics over a set of trials.
struct HeraldStatistics {
    long long n_trials = 0;
    long long n_accepted = 0;
    double heralded_fraction = 0.0;
    double heralded_fraction_se = 0.0;
    bool conditional_defined = false;  ///< false when nothing was accepted
    double p0_given_herald = 0.0;      ///< NaN when undefined
    double p0_given_herald_se = 0.0;
    std::vector<double> motional_histogram;  ///< over final_n, accepted trials
};

/// Statistics of the full-length protocol (all cycles_m herald bits).
HeraldStatistics herald_statistics(const std::vector<TrialOutcome>& outcomes);

/// Statistics of the truncated protocol that stops after `cycles` cycles:
/// trials whose first `cycles` bits are dark, with n taken after that cycle.
/// Cycles beyond a trial's rejection point exclude it, so this equals a fresh
/// run with cycles_m = cycles.
HeraldStatistics herald_statistics_at(const std::vector<TrialOutcome>& outcomes,
                                      int cycles);

/// Closed-form conditional ground-state probability after m dark cycles.
enum class HeraldModel {
    ideal,         ///< 1 / (1 + eps^m nbar): sideband failures only
    with_carrier,  ///< 1 / (1 + 2 eps^m nbar): carrier failure channel doubles
                   ///  the false-herald mass
};
double analytic_p0(double epsilon, double nbar, int m, HeraldModel variant);

/// Closed-form conditional probability of Fock index n >= 1 after one dark
/// cycle, eps/(1+2 eps nbar) * (nbar/(1+nbar))^n. The distribution's summed
/// mass together with analytic_p0 falls short of 1 by eps*nbar/(1+2*eps*nbar);
/// the deficit is the model's own and is reported, never renormalized away.
double analytic_pn_given_herald(double epsilon, double nbar, int n);

/// Probability that at least one heating quantum arrives during detection,
/// 1 - exp(-rate * time).
double detection_escape_probability(double heating_rate_hz, double detection_time_s);

/// Exact per-cycle chain statistics: evolves the joint (qubit, n) probability
/// distribution through the same mechanics run_trial samples (same tables,
/// same dark rule, same heating law) and conditions on all-dark records.
/// Level k of the result describes the protocol truncated after cycle k+1.
struct ChainLevel {
    double heralded_fraction = 0.0;  ///< P(first k cycles all dark)
    double p0_given_herald = 0.0;    ///< P(n = 0 | first k cycles dark)
    std::vector<double> dist_n;      ///< conditional motional distribution
};
std::vector<ChainLevel> exact_chain(const ProtocolConfig& config,
                                    const TransferModel& model);

}  // namespace mbcool
