#pragma once

#include <array>
#include <string>
#include <vector>

#include "mbcool/fock.hpp"
#include "mbcool/levmar.hpp"

namespace mbcool {

/// Which spectroscopy line a scan was taken on. Sideband flops couple the
/// pair |g,n> <-> |e,n±1>; both sideband labels of a given mode share the
/// n <-> n+1 matrix elements, so they produce the same frequency comb and
/// differ only in which qubit state is bright.
enum class Transition { carrier, red_sideband, blue_sideband };

const char* to_string(Transition t);
Transition transition_from_string(const std::string& name);  ///< throws std::invalid_argument

/// One excitation-vs-time scan: P(excited) sampled at increasing times.
struct RabiScan {
    std::vector<double> times_s;
    std::vector<double> excitation;   ///< estimated P(excited), each in [0, 1]
    long long shots_per_point = 1;
    Transition transition = Transition::carrier;

    /// Throws std::invalid_argument unless times are strictly increasing,
    /// the two vectors have equal nonzero length, every excitation lies in
    /// [0, 1] and shots_per_point >= 1.
    void validate() const;
};

/// Ideal Rabi signal P(t) = sum_n p_n sin^2(omega_n t / 2) for a motional
/// distribution p_n (index = Fock number, starting at 0), where omega_n is
/// 2*pi times the coupling of the driven pair: coupling(n, 0, cfg) on the
/// carrier and coupling(n, +1, cfg) on either sideband.
/// Throws std::domain_error when the populations do not sum to 1 within
/// 1e-6 or contain a negative entry.
std::vector<double> rabi_signal(const std::vector<double>& populations,
                                Transition transition,
                                const std::vector<double>& times_s,
                                const ModeConfig& cfg);

/// Signed pair matrix elements f_n (dimensionless, |f_n| <= 1) such that the
/// pair driven from Fock level n flops at |f_n| * omega0_hz:
///   carrier   f_n = e^{-x/2} L_n(x),               x = eta^2
///   sideband  f_n = e^{-x/2} eta L^1_n(x)/sqrt(n+1)
/// Evaluated with an O(count) three-term recurrence; matches
/// |displacement_element| up to sign. d_deta, when non-null, receives
/// d f_n / d eta.
std::vector<double> pair_elements(int count, double eta, Transition transition,
                                  std::vector<double>* d_deta = nullptr);

/// Four-parameter model of a heralded-cooling scan: a ground-state spike of
/// weight p0 plus a thermal tail over n >= 1 with mean parameter nbar_tail,
/// flopping at frequencies set by (eta, omega0_hz).
struct FitResult {
    double p0 = 0.0;
    double eta = 0.0;
    double nbar_tail = 0.0;
    double omega0_hz = 0.0;
    std::array<std::array<double, 4>, 4> covariance{};  ///< order (p0, eta, nbar_tail, omega0)
    double residual_rms = 0.0;  ///< unweighted rms of (model - data)
    bool converged = false;
    /// Information matrix numerically singular, or some parameter's
    /// uncertainty spans its entire allowed range (the data do not constrain
    /// it; e.g. a scan with no visible oscillation).
    bool degenerate = false;

    double uncertainty(int param) const;  ///< sqrt of a diagonal covariance entry
};

struct FitOptions {
    std::array<double, 4> lower{0.0, 1e-3, 0.0, 1.0};
    std::array<double, 4> upper{1.0, 0.5, 200.0, 1e7};
    int n_starts = 5;                ///< deterministic multi-start count (>= 1)
    double omega0_prior_hz = 0.0;    ///< > 0 adds a Gaussian prior residual on omega0
    double omega0_prior_sigma_hz = 0.0;
    int model_n_cap = 8000;          ///< hard ceiling on the modeled tail length
    LevMarOptions levmar{};
};

/// Weighted-residual functor used by fit_rabi, exposed so the analytic
/// Jacobian can be checked independently. Parameter order
/// theta = (p0, eta, nbar_tail, omega0_hz).
ResidualFn make_rabi_residual_fn(const RabiScan& scan, const FitOptions& opts = {});

/// Fits (p0, eta, nbar_tail, omega0) to a scan by damped least squares with
/// per-point binomial weights, starting from `guess` plus a fixed set of
/// perturbed restarts; the lowest-cost start wins (first index on ties).
FitResult fit_rabi(const RabiScan& scan, const FitResult& guess,
                   const FitOptions& opts = {});

/// Thermal-occupation estimate from a carrier scan: fits (nbar, omega0) with
/// eta pinned to cfg.lamb_dicke and a fully thermal population. nbar_sigma is
/// inflated by sqrt(reduced chi^2) when the model misfits the data. The
/// wide_uncertainty flag marks estimates whose relative sigma exceeds 0.5
/// (a scan too short to resolve the contrast decay, or one with no usable
/// contrast at all) or that failed to converge.
struct NbarEstimate {
    double nbar = 0.0;
    double nbar_sigma = 0.0;
    double omega0_hz = 0.0;
    bool converged = false;
    bool wide_uncertainty = true;
};

NbarEstimate estimate_nbar_from_carrier(const RabiScan& scan, const ModeConfig& cfg,
                                        double nbar_guess = 10.0);

enum class ScanFormat { csv };

/// Reads a scan written by save_scan: '#' comment lines (a
/// "# transition=..." comment restores the transition label), then the
/// exact header "time_s,excitation,shots", then one row per point. Throws
/// ParseError carrying the 1-based line number on malformed rows,
/// out-of-range values, non-increasing times or inconsistent shot counts,
/// and IoError when the file cannot be opened.
RabiScan load_scan(const std::string& path, ScanFormat format = ScanFormat::csv);

/// Writes comments (each line prefixed with "# "), a transition comment, the
/// header row and the data rows. Doubles are printed with enough digits to
/// round-trip exactly. Throws IoError on failure to write.
void save_scan(const std::string& path, const RabiScan& scan,
               const std::vector<std::string>& comments = {},
               ScanFormat format = ScanFormat::csv);

}  // namespace mbcool
