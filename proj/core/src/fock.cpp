#include "mbcool/fock.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace mbcool {

void ModeConfig::validate() const {
    if (!(trap_frequency_hz > 0.0))
        throw std::invalid_argument("ModeConfig: trap_frequency_hz must be > 0");
    if (!(lamb_dicke > 0.0) || !(lamb_dicke < 1.0))
        throw std::invalid_argument("ModeConfig: lamb_dicke must be in (0, 1)");
    if (!(omega0_hz > 0.0))
        throw std::invalid_argument("ModeConfig: omega0_hz must be > 0");
    if (n_max < 1)
        throw std::invalid_argument("ModeConfig: n_max must be >= 1");
}

double thermal_pn(double nbar, int n) {
    if (nbar < 0.0) throw std::invalid_argument("thermal_pn: nbar < 0");
    if (n < 0) throw std::invalid_argument("thermal_pn: n < 0");
    if (nbar == 0.0) return n == 0 ? 1.0 : 0.0;
    // p_n = r^n / (nbar + 1), r = nbar/(nbar+1). Small n by direct product
    // (exact at n = 0, one rounding per factor); the log form keeps deep
    // tails (n ~ 1e4) finite without a long multiplication chain.
    if (n <= 64) {
        const double r = nbar / (nbar + 1.0);
        double p = 1.0 / (nbar + 1.0);
        for (int k = 0; k < n; ++k) p *= r;
        return p;
    }
    return std::exp(n * (std::log(nbar) - std::log1p(nbar)) - std::log1p(nbar));
}

ThermalDistribution ThermalDistribution::truncated(double nbar, int n_max) {
    if (nbar < 0.0) throw std::invalid_argument("ThermalDistribution: nbar < 0");
    if (n_max < 0) throw std::invalid_argument("ThermalDistribution: n_max < 0");
    ThermalDistribution dist;
    dist.nbar = nbar;
    dist.probabilities.resize(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n < n_max; ++n) dist.probabilities[n] = thermal_pn(nbar, n);
    // whole tail sum_{n >= n_max} p_n = r^n_max goes into the last bin, so the
    // truncated vector is normalized exactly
    const double log_r = nbar == 0.0 ? -std::numeric_limits<double>::infinity()
                                     : std::log(nbar) - std::log1p(nbar);
    dist.probabilities[n_max] = n_max == 0 ? 1.0 : std::exp(n_max * log_r);
    return dist;
}

int truncation_for(double nbar, double tail_tol) {
    if (nbar < 0.0) throw std::invalid_argument("truncation_for: nbar < 0");
    if (!(tail_tol > 0.0)) throw std::invalid_argument("truncation_for: tail_tol must be > 0");
    if (nbar == 0.0 || tail_tol >= 1.0) return 0;
    const double log_r = std::log(nbar) - std::log1p(nbar);
    auto tail = [&](int k) { return std::exp((k + 1) * log_r); };
    int k = static_cast<int>(std::ceil(std::log(tail_tol) / log_r)) - 1;
    if (k < 0) k = 0;
    while (tail(k) >= tail_tol) ++k;          // guard against rounding in ceil
    while (k > 0 && tail(k - 1) < tail_tol) --k;
    return k;
}

std::complex<double> displacement_element(int n_to, int n_from, double eta) {
    if (n_to < 0 || n_from < 0) return {0.0, 0.0};
    if (eta < 0.0) throw std::invalid_argument("displacement_element: eta < 0");
    const int n_lo = std::min(n_to, n_from);
    const int n_hi = std::max(n_to, n_from);
    const unsigned dn = static_cast<unsigned>(n_hi - n_lo);
    if (eta == 0.0) return {n_to == n_from ? 1.0 : 0.0, 0.0};
    const double x = eta * eta;
    // magnitude via lgamma so factorial ratios of large n stay in range
    const double log_mag = -0.5 * x + dn * std::log(eta)
                         + 0.5 * (std::lgamma(n_lo + 1.0) - std::lgamma(n_hi + 1.0));
    const double lag = std::assoc_laguerre(static_cast<unsigned>(n_lo), dn, x);
    const double real_part = std::exp(log_mag) * lag; // sign carried by L
    // (i)^dn phase from the displacement argument i*eta
    switch (dn % 4) {
        case 0: return {real_part, 0.0};
        case 1: return {0.0, real_part};
        case 2: return {-real_part, 0.0};
        default: return {0.0, -real_part};
    }
}

double coupling(int n, int s, const ModeConfig& cfg) {
    if (n < 0 || n + s < 0) return 0.0;
    return cfg.omega0_hz * std::abs(displacement_element(n + s, n, cfg.lamb_dicke));
}

double lamb_dicke_parameter(double wavelength_m, double cos_angle,
                            double mass_kg, double trap_frequency_hz) {
    if (!(wavelength_m > 0.0) || !(mass_kg > 0.0) || !(trap_frequency_hz > 0.0))
        throw std::invalid_argument("lamb_dicke_parameter: nonpositive input");
    const double k = 2.0 * std::numbers::pi / wavelength_m * cos_angle;
    const double omega = 2.0 * std::numbers::pi * trap_frequency_hz;
    return k * std::sqrt(constants::hbar / (2.0 * mass_kg * omega));
}

ModeConfig default_mode_config() {
    ModeConfig cfg;
    cfg.trap_frequency_hz = 1.06e6;
    cfg.lamb_dicke = lamb_dicke_parameter(constants::drive_wavelength_m, 1.0,
                                          constants::ca40_mass_kg,
                                          cfg.trap_frequency_hz);
    cfg.omega0_hz = 83.0e3;
    cfg.n_max = truncation_for(18.0, 1e-6);
    return cfg;
}

} // namespace mbcool
