#pragma once

#include <complex>
#include <vector>

namespace mbcool {

/// Static parameters of one qubit + harmonic oscillator pair.
/// All frequencies are ordinary frequencies in Hz (no 2π folded in).
struct ModeConfig {
    double trap_frequency_hz = 1.06e6; ///< secular frequency of the mode
    double lamb_dicke = 0.094;         ///< eta, dimensionless
    double omega0_hz = 83.0e3;         ///< bare carrier Rabi frequency
    int n_max = 255;                   ///< highest retained Fock index

    /// Throws std::invalid_argument on out-of-range values
    /// (requires 0 < eta < 1, n_max >= 1, omega0 > 0, trap frequency > 0).
    void validate() const;
};

/// Thermal occupation p_n = nbar^n / (nbar+1)^(n+1), evaluated in log space
/// so large n does not overflow. nbar = 0 gives a pure ground state.
double thermal_pn(double nbar, int n);

/// Thermal distribution truncated at n_max with the analytic tail mass
/// (nbar/(nbar+1))^n_max folded into the last bin, so the vector sums to 1
/// exactly (up to rounding).
struct ThermalDistribution {
    double nbar = 0.0;
    std::vector<double> probabilities; // size n_max + 1, last bin folded

    static ThermalDistribution truncated(double nbar, int n_max);
    int n_max() const { return static_cast<int>(probabilities.size()) - 1; }
};

/// Smallest n_max such that the untruncated tail above it,
/// (nbar/(nbar+1))^(n_max+1), stays below tail_tol.
int truncation_for(double nbar, double tail_tol = 1e-6);

/// Matrix element <n_to| exp(i eta (a + a†)) |n_from| of the displacement
/// generated by the drive. Closed form:
///   <m|D(i eta)|n> = e^{-eta^2/2} (i eta)^{|m-n|} sqrt(n_<! / n_>!)
///                    L^{|m-n|}_{n_<}(eta^2)
/// with the factorial ratio evaluated through lgamma and the associated
/// Laguerre polynomial through the standard upward recurrence
/// (std::assoc_laguerre). Zero when either index is negative.
std::complex<double> displacement_element(int n_to, int n_from, double eta);

/// Coupling strength (Hz) of the ladder |n> -> |n+s| for sideband order s:
/// omega0 * |<n+s| exp(i eta (a+a†)) |n>|. Returns 0 when n+s < 0 or n < 0.
/// In the Lamb-Dicke limit this reduces to omega0 (carrier, s=0),
/// omega0*eta*sqrt(n) (s=-1) and omega0*eta*sqrt(n+1) (s=+1).
double coupling(int n, int s, const ModeConfig& cfg);

/// Lamb-Dicke parameter eta = k_axial sqrt(hbar / (2 m omega_trap)) for a
/// running-wave drive of wavelength `wavelength_m` whose projection on the
/// mode axis is cos_angle. trap_frequency_hz is an ordinary frequency.
double lamb_dicke_parameter(double wavelength_m, double cos_angle,
                            double mass_kg, double trap_frequency_hz);

/// Default mode parameters: a single 40Ca+ ion, 729 nm quadrupole drive along
/// a 1.06 MHz axial mode. lamb_dicke is computed from those constants
/// (~0.094) rather than hard-coded.
ModeConfig default_mode_config();

namespace constants {
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double amu = 1.66053906660e-27;         // kg
inline constexpr double ca40_mass_kg = 39.962590863 * amu;
inline constexpr double drive_wavelength_m = 729.0e-9;
} // namespace constants

} // namespace mbcool
