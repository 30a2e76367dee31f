#pragma once

namespace mbcool {

/// One rapid-adiabatic-passage pulse: squared-sine amplitude envelope with a
/// linear frequency chirp swept symmetrically through resonance. Frequencies
/// are ordinary frequencies (Hz); duration is seconds.
struct RapPulse {
    double duration_s = 0.0;
    double peak_rabi_hz = 0.0;   ///< envelope maximum, reached at t = T/2
    double chirp_range_hz = 0.0; ///< full sweep width: detuning runs -range/2 .. +range/2
    int sideband_order = 0;      ///< which ladder the drive addresses (|s| <= 2)
    int n_time_samples = 1024;   ///< grid size for the fixed-step fallback

    /// Throws std::invalid_argument on nonsensical values.
    void validate() const;
};

/// Instantaneous drive detuning delta(t) = (range/T) * (t - T/2), Hz.
/// Starts below resonance, crosses zero at T/2, ends above.
/// t outside [0, duration] (beyond FP slack) throws std::domain_error.
double detuning_at(const RapPulse& pulse, double t);

/// Instantaneous Rabi frequency peak * sin^2(pi t / T), Hz; zero at both ends.
/// Same domain handling as detuning_at.
double amplitude_at(const RapPulse& pulse, double t);

/// Accumulated drive phase 2*pi * integral of detuning_at from 0 to t, rad.
/// Closed form for the linear chirp: pi * (range/T) * t * (t - T).
/// The chirp is continuous-phase: this integral, not a stepped frequency,
/// is what the laboratory-frame drive applies.
double chirp_phase_at(const RapPulse& pulse, double t);

/// Landau-Zener-style figure of merit Omega_eff^2 / (sweep rate), where
/// Omega_eff = peak_rabi * coupling_scale and the sweep rate is
/// chirp_range / duration, everything in ordinary-frequency units (so the
/// exponent of the Landau-Zener transfer formula is pi^2 times this value).
/// coupling_scale is the dimensionless per-ladder ratio (1.0 = the pulse's
/// reference ladder). Returns +inf when the chirp range is zero and 0 when
/// the effective drive vanishes.
double adiabaticity_metric(const RapPulse& pulse, double coupling_scale = 1.0);

} // namespace mbcool
