#pragma once

#include <complex>
#include <vector>

#include "mbcool/fock.hpp"
#include "mbcool/ode.hpp"
#include "mbcool/pulse.hpp"

namespace mbcool {

/// Interpretation of RapPulse::peak_rabi_hz when the drive is mapped onto the
/// Fock ladders of its transition:
///  - n1_coupling: peak_rabi is the spectroscopic n=1 line of the transition
///    (the 0 <-> |s| pair), so per-ion strengths scale by the exact Laguerre
///    ratio, ~sqrt(n+1) for an ion at n on a first sideband.
///  - bare_omega0: peak_rabi is the bare carrier-scale Rabi frequency and the
///    full matrix element (including the eta factor) is applied on top.
enum class SidebandScale { n1_coupling, bare_omega0 };

/// Amplitude envelope selector. RAP pulses are squared-sine; the square shape
/// exists for validation against constant-drive closed forms.
enum class EnvelopeKind { squared_sine, square };

/// Concrete single-ladder drive: what the two-level integrator actually sees.
struct Drive {
    double duration_s = 0.0;
    double peak_rabi_hz = 0.0;   ///< effective coupling of this ladder
    double chirp_range_hz = 0.0;
    EnvelopeKind envelope = EnvelopeKind::squared_sine;

    double rabi_at(double t) const;
    double detuning_at(double t) const;
};

/// Drive for one ladder of `pulse` whose effective coupling is omega_n_hz.
Drive drive_from_pulse(const RapPulse& pulse, double omega_n_hz);

/// State of one two-level ladder, |psi> = c_g |g> + c_e |e>.
struct TwoLevelAmplitudes {
    std::complex<double> c_g{1.0, 0.0};
    std::complex<double> c_e{0.0, 0.0};

    double norm() const;
    double population_excited() const;
    static TwoLevelAmplitudes ground() { return {{1.0, 0.0}, {0.0, 0.0}}; }
    static TwoLevelAmplitudes excited() { return {{0.0, 0.0}, {1.0, 0.0}}; }
};

/// Integrate i d/dt (c_g, c_e) = (H/hbar)(c_g, c_e) with
///   H(t)/hbar = pi * [ -delta(t) sigma_z + Omega(t) sigma_x ]
/// (angular units built from the ordinary frequencies delta, Omega in Hz; the
/// frame is the accumulated-chirp-phase frame, so the instantaneous detuning
/// sits on the diagonal). A resonant square drive therefore gives
/// P_e(t) = sin^2(pi Omega t), i.e. a pi pulse at t = 1/(2 Omega), and a slow
/// linear sweep approaches the Landau-Zener transfer 1 - exp(-pi^2 Omega^2 T / range).
TwoLevelAmplitudes evolve_two_level(const Drive& drive, TwoLevelAmplitudes start,
                                    const IntegratorOptions& opts = {});

/// Same, with the ladder coupling omega_n_hz substituted for the pulse's
/// reference amplitude (envelope shape and chirp taken from the pulse).
TwoLevelAmplitudes evolve_two_level(const RapPulse& pulse, double omega_n_hz,
                                    TwoLevelAmplitudes start,
                                    const IntegratorOptions& opts = {});

/// Transfer probability of one ladder starting from |g>.
double transfer_probability(const Drive& drive, const IntegratorOptions& opts = {});

/// Dimensionless drive scale of an ion currently at Fock index n under a
/// transition of sideband order s (the ratio coupling / reference). Sideband
/// couplings are the ion's own |s|-th matrix element
/// omega0 * |<n+|s|| D |n>| (~ sqrt(n+1) growth for |s| = 1) -- the same
/// element that sets the ion's sideband Rabi-probe frequency. The carrier is
/// motionally insensitive: all ladders run at the calibrated carrier rate.
///  - s = 0: ion starts |g,n> and transfers to |e,n>; scale 1 for every n;
///  - s > 0: ion starts |e,n> and de-excites to |g,n-s>; n < s has no
///    target and returns 0 (dark; |e,0> is the protocol's dark state);
///  - s < 0: ion starts |g,n> and transfers to |e,n+s>; n < |s| is dark.
/// The n1_coupling reference is the spectroscopic n=1 sideband line (the
/// 0 <-> |s| pair of a ground-state ion); bare_omega0 uses omega0 itself.
double ladder_coupling_scale(int n, int s, const ModeConfig& cfg, SidebandScale mode);

/// Calibration coupling (Hz) a pulse's peak_rabi is measured against for a
/// transition of sideband order s under the given scale mode.
double reference_coupling_hz(int s, const ModeConfig& cfg, SidebandScale mode);

/// One thermal ladder of a RAP transition, with its statistical weight.
struct Ladder {
    double weight = 0.0;     ///< thermal probability of the initial state
    int n_initial = 0;       ///< motional index before the pulse
    int n_final = 0;         ///< motional index after a successful transfer
    bool starts_excited = false;
    bool dark = false;       ///< no partner level; the pulse does nothing
    double coupling_hz = 0.0;///< absolute pair coupling
    double scale = 0.0;      ///< coupling / reference (drive units of the pulse)
    TwoLevelAmplitudes amplitudes; ///< filled by LadderEnsemble::evolve
    double transfer = 0.0;         ///< filled by LadderEnsemble::evolve
};

/// All ladders a thermal ensemble occupies under one transition.
struct LadderEnsemble {
    int sideband_order = 0;
    SidebandScale scale_mode = SidebandScale::n1_coupling;
    std::vector<Ladder> ladders;

    static LadderEnsemble build(const ThermalDistribution& init, int sideband_order,
                                const ModeConfig& cfg,
                                SidebandScale mode = SidebandScale::n1_coupling);

    /// Evolve every coupled ladder under the pulse (in parallel; results are
    /// written per-ladder so the outcome is scheduling-independent) and return
    /// the weighted mean transfer probability.
    double evolve(const RapPulse& pulse, const IntegratorOptions& opts = {});
};

/// Thermal-averaged transfer probability sum_n p_n * P_transfer(n) of one RAP
/// pulse, with the start state labeled per ladder_coupling_scale.
double transfer_efficiency(const RapPulse& pulse, const ThermalDistribution& init,
                           const ModeConfig& cfg,
                           SidebandScale mode = SidebandScale::n1_coupling,
                           const IntegratorOptions& opts = {});

/// Joint qubit + truncated-oscillator state for the validation engine.
/// Index layout: amps[q * (n_max+1) + n], q = 0 ground, q = 1 excited.
struct FullState {
    int n_max = 0;
    std::vector<std::complex<double>> amps;

    static FullState basis(int n_max, bool excited, int n);
    std::complex<double>& at(bool excited, int n);
    const std::complex<double>& at(bool excited, int n) const;
    double norm() const;
    double population_excited() const;
    /// Population summed over the top two Fock levels of both qubit states;
    /// the truncation-health figure.
    double top_level_population() const;
};

/// Full truncated-Hilbert-space integration of one RAP pulse, keeping the
/// listed sideband orders of the drive expansion
///   H/hbar = (Omega0(t)_ang / 2) sum_s sum_n <n+s|e^{i eta(a+a†)}|n>
///            e^{i[(s - s0) * 2*pi*nu * t - phi(t)]} |e,n+s><g,n| + h.c.
/// where s0 = pulse.sideband_order, phi is the accumulated chirp phase and
/// Omega0(t) is the bare drive amplitude recovered from peak_rabi via the
/// scale mode. Validates the per-ladder two-level reduction.
///
/// Throws TruncationOverflow if the top two Fock levels hold >= 1e-6
/// population at the start or the end, and IntegrationError if the final norm
/// drifts from unity by more than 1e-8.
FullState evolve_full(const RapPulse& pulse, const FullState& start,
                      const std::vector<int>& sideband_orders, const ModeConfig& cfg,
                      SidebandScale mode = SidebandScale::n1_coupling,
                      const IntegratorOptions& opts = {},
                      EnvelopeKind envelope = EnvelopeKind::squared_sine);

} // namespace mbcool
