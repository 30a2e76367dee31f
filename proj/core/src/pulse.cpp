#include "mbcool/pulse.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mbcool {

namespace {

// Clamp t into [0, T], allowing only floating-point slack past the ends.
double checked_time(const RapPulse& pulse, double t) {
    const double slack = 16.0 * std::numeric_limits<double>::epsilon() * pulse.duration_s;
    if (t < -slack || t > pulse.duration_s + slack)
        throw std::domain_error("pulse time outside [0, duration]");
    if (t < 0.0) return 0.0;
    if (t > pulse.duration_s) return pulse.duration_s;
    return t;
}

} // namespace

void RapPulse::validate() const {
    if (!(duration_s > 0.0))
        throw std::invalid_argument("RapPulse: duration_s must be > 0");
    if (!(peak_rabi_hz >= 0.0))
        throw std::invalid_argument("RapPulse: peak_rabi_hz must be >= 0");
    if (!(chirp_range_hz >= 0.0))
        throw std::invalid_argument("RapPulse: chirp_range_hz must be >= 0");
    if (sideband_order < -2 || sideband_order > 2)
        throw std::invalid_argument("RapPulse: |sideband_order| <= 2 supported");
    if (n_time_samples < 2)
        throw std::invalid_argument("RapPulse: n_time_samples must be >= 2");
}

double detuning_at(const RapPulse& pulse, double t) {
    t = checked_time(pulse, t);
    return pulse.chirp_range_hz / pulse.duration_s * (t - 0.5 * pulse.duration_s);
}

double amplitude_at(const RapPulse& pulse, double t) {
    t = checked_time(pulse, t);
    const double s = std::sin(std::numbers::pi * t / pulse.duration_s);
    return pulse.peak_rabi_hz * s * s;
}

double chirp_phase_at(const RapPulse& pulse, double t) {
    t = checked_time(pulse, t);
    // 2*pi * int_0^t (range/T)(t' - T/2) dt' = pi * (range/T) * t * (t - T)
    return std::numbers::pi * pulse.chirp_range_hz / pulse.duration_s * t
         * (t - pulse.duration_s);
}

double adiabaticity_metric(const RapPulse& pulse, double coupling_scale) {
    const double omega_eff = pulse.peak_rabi_hz * coupling_scale;
    if (omega_eff == 0.0) return 0.0;
    if (pulse.chirp_range_hz == 0.0)
        return std::numeric_limits<double>::infinity();
    return omega_eff * omega_eff * pulse.duration_s / pulse.chirp_range_hz;
}

} // namespace mbcool
