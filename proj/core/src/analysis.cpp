#include "mbcool/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string_view>

#include "mbcool/errors.hpp"

namespace mbcool {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// L^a_n(x) for n = 0..count-1 through the upward recurrence
// (n+1) L^a_{n+1} = (2n+1+a-x) L^a_n - (n+a) L^a_{n-1}.
std::vector<double> laguerre_column(int count, int alpha, double x) {
    std::vector<double> out(static_cast<size_t>(std::max(count, 0)));
    if (count <= 0) return out;
    out[0] = 1.0;
    if (count > 1) out[1] = 1.0 + alpha - x;
    for (int n = 1; n + 1 < count; ++n)
        out[n + 1] =
            ((2.0 * n + 1.0 + alpha - x) * out[n] - (n + alpha) * out[n - 1]) / (n + 1.0);
    return out;
}

// Binomial standard error of an excitation estimate, floored at 1/(2 shots)
// so end-of-range points (y = 0 or 1) keep a finite weight.
std::vector<double> binomial_sigmas(const RabiScan& scan) {
    std::vector<double> sigma(scan.excitation.size());
    const double n = static_cast<double>(scan.shots_per_point);
    for (size_t i = 0; i < sigma.size(); ++i) {
        const double y = scan.excitation[i];
        sigma[i] = std::max(std::sqrt(y * (1.0 - y) / n), 0.5 / n);
    }
    return sigma;
}

// Weighted residuals for the spike-plus-tail model; theta = (p0, eta,
// nbar_tail, omega0_hz). Captures the scan by value.
struct SpikeTailModel {
    std::vector<double> t, y, sigma;
    Transition transition = Transition::carrier;
    double prior_hz = 0.0;
    double prior_sigma_hz = 0.0;
    int n_cap = 8000;

    void operator()(const Eigen::VectorXd& th, Eigen::VectorXd& r,
                    Eigen::MatrixXd* jac) const {
        const double p0 = th[0], eta = th[1], nb = th[2], om = th[3];
        const int m = static_cast<int>(t.size());
        const bool with_prior = prior_sigma_hz > 0.0;
        const int rows = m + (with_prior ? 1 : 0);
        r.resize(rows);
        if (jac) jac->resize(rows, 4);

        const int count = std::min(n_cap, truncation_for(nb, 1e-10) + 9);
        std::vector<double> df;
        const std::vector<double> f =
            pair_elements(count, eta, transition, jac ? &df : nullptr);

        // pop_0 = p0; pop_n = (1-p0)(1-r) r^(n-1) for n >= 1, r = nb/(nb+1)
        const double rr = nb / (nb + 1.0);
        const double dr_dnb = 1.0 / ((nb + 1.0) * (nb + 1.0));
        std::vector<double> pop(count), dpop_dp0(count), dpop_dnb(count);
        pop[0] = p0;
        dpop_dp0[0] = 1.0;
        dpop_dnb[0] = 0.0;
        double pw = 1.0, pw_prev = 0.0;  // r^(n-1) and r^(n-2)
        for (int n = 1; n < count; ++n) {
            const double tail = (1.0 - rr) * pw;
            pop[n] = (1.0 - p0) * tail;
            dpop_dp0[n] = -tail;
            const double dtail_dr = -pw + (1.0 - rr) * (n - 1) * pw_prev;
            dpop_dnb[n] = (1.0 - p0) * dtail_dr * dr_dnb;
            pw_prev = pw;
            pw *= rr;
        }

        for (int i = 0; i < m; ++i) {
            double P = 0.0, dP_p0 = 0.0, dP_eta = 0.0, dP_nb = 0.0, dP_om = 0.0;
            for (int n = 0; n < count; ++n) {
                const double w = kTwoPi * om * f[n];
                const double half = 0.5 * w * t[i];
                const double s = std::sin(half);
                const double s2 = s * s;
                P += pop[n] * s2;
                if (jac) {
                    const double ds2_dw = 0.5 * t[i] * std::sin(w * t[i]);
                    dP_p0 += dpop_dp0[n] * s2;
                    dP_nb += dpop_dnb[n] * s2;
                    dP_eta += pop[n] * ds2_dw * kTwoPi * om * df[n];
                    dP_om += pop[n] * ds2_dw * kTwoPi * f[n];
                }
            }
            const double inv_sigma = 1.0 / sigma[i];
            r[i] = (P - y[i]) * inv_sigma;
            if (jac) {
                (*jac)(i, 0) = dP_p0 * inv_sigma;
                (*jac)(i, 1) = dP_eta * inv_sigma;
                (*jac)(i, 2) = dP_nb * inv_sigma;
                (*jac)(i, 3) = dP_om * inv_sigma;
            }
        }
        if (with_prior) {
            r[m] = (om - prior_hz) / prior_sigma_hz;
            if (jac) {
                jac->row(m).setZero();
                (*jac)(m, 3) = 1.0 / prior_sigma_hz;
            }
        }
    }
};

// Weighted residuals for the fully thermal carrier model; theta = (nbar,
// omega0_hz), eta fixed.
struct ThermalCarrierModel {
    std::vector<double> t, y, sigma;
    double eta = 0.094;
    int n_cap = 8000;

    void operator()(const Eigen::VectorXd& th, Eigen::VectorXd& r,
                    Eigen::MatrixXd* jac) const {
        const double nb = th[0], om = th[1];
        const int m = static_cast<int>(t.size());
        r.resize(m);
        if (jac) jac->resize(m, 2);

        const int count = std::min(n_cap, truncation_for(nb, 1e-10) + 9);
        const std::vector<double> f = pair_elements(count, eta, Transition::carrier);

        // pop_n = (1-r) r^n
        const double rr = nb / (nb + 1.0);
        const double dr_dnb = 1.0 / ((nb + 1.0) * (nb + 1.0));
        std::vector<double> pop(count), dpop_dnb(count);
        double pw = 1.0, pw_prev = 0.0;  // r^n and r^(n-1)
        for (int n = 0; n < count; ++n) {
            pop[n] = (1.0 - rr) * pw;
            dpop_dnb[n] = (-pw + (1.0 - rr) * n * pw_prev) * dr_dnb;
            pw_prev = pw;
            pw *= rr;
        }

        for (int i = 0; i < m; ++i) {
            double P = 0.0, dP_nb = 0.0, dP_om = 0.0;
            for (int n = 0; n < count; ++n) {
                const double w = kTwoPi * om * f[n];
                const double s = std::sin(0.5 * w * t[i]);
                const double s2 = s * s;
                P += pop[n] * s2;
                if (jac) {
                    dP_nb += dpop_dnb[n] * s2;
                    dP_om += pop[n] * (0.5 * t[i] * std::sin(w * t[i])) * kTwoPi * f[n];
                }
            }
            const double inv_sigma = 1.0 / sigma[i];
            r[i] = (P - y[i]) * inv_sigma;
            if (jac) {
                (*jac)(i, 0) = dP_nb * inv_sigma;
                (*jac)(i, 1) = dP_om * inv_sigma;
            }
        }
    }
};

std::string_view trim(std::string_view sv) {
    while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t')) sv.remove_prefix(1);
    while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r'))
        sv.remove_suffix(1);
    return sv;
}

double parse_double_field(std::string_view field, const char* name, int lineno) {
    field = trim(field);
    double value = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw ParseError(std::string("bad ") + name + " value '" + std::string(field) + "'",
                         lineno);
    if (!std::isfinite(value))
        throw ParseError(std::string(name) + " is not finite", lineno);
    return value;
}

long long parse_shots_field(std::string_view field, int lineno) {
    field = trim(field);
    long long value = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        throw ParseError("bad shots value '" + std::string(field) + "'", lineno);
    return value;
}

}  // namespace

const char* to_string(Transition t) {
    switch (t) {
        case Transition::carrier: return "carrier";
        case Transition::red_sideband: return "red_sideband";
        case Transition::blue_sideband: return "blue_sideband";
    }
    return "carrier";
}

Transition transition_from_string(const std::string& name) {
    if (name == "carrier") return Transition::carrier;
    if (name == "red_sideband") return Transition::red_sideband;
    if (name == "blue_sideband") return Transition::blue_sideband;
    throw std::invalid_argument("unknown transition '" + name +
                                "' (expected carrier, red_sideband or blue_sideband)");
}

void RabiScan::validate() const {
    if (times_s.empty()) throw std::invalid_argument("scan has no points");
    if (times_s.size() != excitation.size())
        throw std::invalid_argument("times and excitation lengths differ");
    if (shots_per_point < 1) throw std::invalid_argument("shots_per_point must be >= 1");
    for (size_t i = 0; i < times_s.size(); ++i) {
        if (!std::isfinite(times_s[i]))
            throw std::invalid_argument("non-finite scan time");
        if (i > 0 && !(times_s[i] > times_s[i - 1]))
            throw std::invalid_argument("scan times must be strictly increasing");
        if (!(excitation[i] >= 0.0 && excitation[i] <= 1.0))
            throw std::invalid_argument("excitation outside [0, 1]");
    }
}

std::vector<double> rabi_signal(const std::vector<double>& populations,
                                Transition transition,
                                const std::vector<double>& times_s,
                                const ModeConfig& cfg) {
    cfg.validate();
    double total = 0.0;
    for (double p : populations) {
        if (p < -1e-12) throw std::domain_error("negative population entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw std::domain_error("populations must sum to 1 (got " + std::to_string(total) +
                                ")");

    const int s = transition == Transition::carrier ? 0 : +1;
    std::vector<double> omega(populations.size());
    for (size_t n = 0; n < populations.size(); ++n)
        omega[n] = kTwoPi * coupling(static_cast<int>(n), s, cfg);

    std::vector<double> out(times_s.size());
    for (size_t i = 0; i < times_s.size(); ++i) {
        double acc = 0.0;
        for (size_t n = 0; n < populations.size(); ++n) {
            const double sn = std::sin(0.5 * omega[n] * times_s[i]);
            acc += populations[n] * sn * sn;
        }
        out[i] = acc;
    }
    return out;
}

std::vector<double> pair_elements(int count, double eta, Transition transition,
                                  std::vector<double>* d_deta) {
    if (count < 0) throw std::invalid_argument("pair_elements: negative count");
    if (!(eta > 0.0 && eta < 1.0))
        throw std::invalid_argument("pair_elements: eta must lie in (0, 1)");
    const double x = eta * eta;
    const double damp = std::exp(-0.5 * x);
    std::vector<double> f(static_cast<size_t>(count));

    if (transition == Transition::carrier) {
        const auto l0 = laguerre_column(count, 0, x);
        for (int n = 0; n < count; ++n) f[n] = damp * l0[n];
        if (d_deta) {
            // d/deta [e^{-x/2} L_n] = eta e^{-x/2} (-L_n - 2 L^1_{n-1}), x = eta^2
            const auto l1 = laguerre_column(count, 1, x);
            d_deta->resize(count);
            for (int n = 0; n < count; ++n) {
                const double lprev = n >= 1 ? l1[n - 1] : 0.0;
                (*d_deta)[n] = eta * damp * (-l0[n] - 2.0 * lprev);
            }
        }
    } else {
        const auto l1 = laguerre_column(count, 1, x);
        for (int n = 0; n < count; ++n)
            f[n] = damp * eta * l1[n] / std::sqrt(n + 1.0);
        if (d_deta) {
            // d/deta [e^{-x/2} eta L^1_n / sqrt(n+1)]
            //   = e^{-x/2} ((1-x) L^1_n - 2x L^2_{n-1}) / sqrt(n+1)
            const auto l2 = laguerre_column(count, 2, x);
            d_deta->resize(count);
            for (int n = 0; n < count; ++n) {
                const double lprev = n >= 1 ? l2[n - 1] : 0.0;
                (*d_deta)[n] =
                    damp * ((1.0 - x) * l1[n] - 2.0 * x * lprev) / std::sqrt(n + 1.0);
            }
        }
    }
    return f;
}

double FitResult::uncertainty(int param) const {
    if (param < 0 || param > 3) throw std::out_of_range("parameter index");
    const double v = covariance[param][param];
    return v > 0.0 ? std::sqrt(v) : 0.0;
}

ResidualFn make_rabi_residual_fn(const RabiScan& scan, const FitOptions& opts) {
    scan.validate();
    SpikeTailModel model;
    model.t = scan.times_s;
    model.y = scan.excitation;
    model.sigma = binomial_sigmas(scan);
    model.transition = scan.transition;
    model.prior_hz = opts.omega0_prior_hz;
    model.prior_sigma_hz = opts.omega0_prior_sigma_hz;
    model.n_cap = opts.model_n_cap;
    return model;
}

FitResult fit_rabi(const RabiScan& scan, const FitResult& guess, const FitOptions& opts) {
    scan.validate();
    if (scan.times_s.size() < 5)
        throw std::invalid_argument("fit_rabi: need at least 5 scan points");
    if (opts.n_starts < 1) throw std::invalid_argument("fit_rabi: n_starts must be >= 1");

    const ResidualFn fn = make_rabi_residual_fn(scan, opts);
    Eigen::VectorXd lo(4), hi(4);
    for (int i = 0; i < 4; ++i) {
        lo[i] = opts.lower[i];
        hi[i] = opts.upper[i];
    }

    // Fixed restart pattern: the caller's guess, then spike-weight extremes
    // combined with a frequency ladder wide enough to escape comb aliases
    // (the eta * omega0 product is nearly degenerate, so a misguessed
    // frequency otherwise drags eta into a wrong-comb local minimum).
    std::vector<std::array<double, 4>> starts;
    starts.push_back({guess.p0, guess.eta, guess.nbar_tail, guess.omega0_hz});
    const double p0_alt[] = {0.1, 0.9, 0.3, 0.7};
    const double om_scale[] = {1.0, 1.4, 0.7, 2.0};
    for (int k = 0; k + 1 < opts.n_starts; ++k)
        starts.push_back({p0_alt[k % 4], guess.eta, guess.nbar_tail,
                          guess.omega0_hz * om_scale[k % 4]});

    LevMarResult best;
    bool have_best = false;
    for (const auto& s : starts) {
        Eigen::VectorXd th0(4);
        for (int i = 0; i < 4; ++i) th0[i] = s[i];
        LevMarResult cand = levmar_fit(fn, th0, lo, hi, opts.levmar);
        if (!have_best || cand.cost < best.cost) {
            best = std::move(cand);
            have_best = true;
        }
    }

    FitResult out;
    out.p0 = best.theta[0];
    out.eta = best.theta[1];
    out.nbar_tail = best.theta[2];
    out.omega0_hz = best.theta[3];
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out.covariance[i][j] = best.covariance(i, j);
    out.converged = best.converged;
    out.degenerate = best.degenerate;
    // A parameter whose marginal uncertainty covers its whole allowed range
    // is unconstrained by the data.
    for (int i = 0; i < 4; ++i) {
        const double width = opts.upper[i] - opts.lower[i];
        if (width > 0.0 && !(out.uncertainty(i) < width)) out.degenerate = true;
    }

    const std::vector<double> sigma = binomial_sigmas(scan);

    // A scan statistically consistent with a constant carries no oscillation
    // information; every frequency-model parameter is then meaningless even
    // though the local quadratic looks fine.
    {
        double sw = 0.0, swy = 0.0;
        for (size_t i = 0; i < sigma.size(); ++i) {
            const double w = 1.0 / (sigma[i] * sigma[i]);
            sw += w;
            swy += w * scan.excitation[i];
        }
        const double ybar = swy / sw;
        double chi2_const = 0.0;
        for (size_t i = 0; i < sigma.size(); ++i) {
            const double d = (scan.excitation[i] - ybar) / sigma[i];
            chi2_const += d * d;
        }
        const double dof = static_cast<double>(sigma.size()) - 1.0;
        if (chi2_const < dof + 3.0 * std::sqrt(2.0 * dof)) out.degenerate = true;
    }
    Eigen::VectorXd r;
    fn(best.theta, r, nullptr);
    double ss = 0.0;
    for (size_t i = 0; i < sigma.size(); ++i) {
        const double d = r[static_cast<Eigen::Index>(i)] * sigma[i];
        ss += d * d;
    }
    out.residual_rms = std::sqrt(ss / static_cast<double>(sigma.size()));
    return out;
}

NbarEstimate estimate_nbar_from_carrier(const RabiScan& scan, const ModeConfig& cfg,
                                        double nbar_guess) {
    scan.validate();
    cfg.validate();
    if (scan.times_s.size() < 3)
        throw std::invalid_argument("estimate_nbar_from_carrier: need at least 3 points");
    if (!(nbar_guess >= 0.0))
        throw std::invalid_argument("estimate_nbar_from_carrier: nbar_guess must be >= 0");

    ThermalCarrierModel model;
    model.t = scan.times_s;
    model.y = scan.excitation;
    model.sigma = binomial_sigmas(scan);
    model.eta = cfg.lamb_dicke;
    const ResidualFn fn = model;

    Eigen::VectorXd lo(2), hi(2);
    lo << 0.0, 1.0;
    hi << 500.0, 1e7;

    const double nb_starts[] = {nbar_guess, 1.0, 5.0, 20.0, 60.0};
    LevMarResult best;
    bool have_best = false;
    for (double nb0 : nb_starts) {
        Eigen::VectorXd th0(2);
        th0 << nb0, cfg.omega0_hz;
        LevMarResult cand = levmar_fit(fn, th0, lo, hi);
        if (!have_best || cand.cost < best.cost) {
            best = std::move(cand);
            have_best = true;
        }
    }

    NbarEstimate est;
    est.nbar = best.theta[0];
    est.omega0_hz = best.theta[1];
    est.nbar_sigma = best.covariance(0, 0) > 0.0 ? std::sqrt(best.covariance(0, 0)) : 0.0;
    // Inflate by sqrt(reduced chi^2) when the model cannot describe the data:
    // the local curvature then understates the real uncertainty (e.g. a
    // contrast-free scan fit confidently to the wrong nbar).
    const double dof = static_cast<double>(scan.times_s.size()) - 2.0;
    if (dof >= 1.0 && best.cost > dof)
        est.nbar_sigma *= std::sqrt(best.cost / dof);
    est.converged = best.converged;
    // A scan statistically indistinguishable from a constant carries no
    // dephasing information, yet the model can reproduce it exactly with a
    // large nbar; flag such fits rather than trust their local curvature.
    bool no_contrast = false;
    {
        double sw = 0.0, swy = 0.0;
        for (size_t i = 0; i < model.sigma.size(); ++i) {
            const double w = 1.0 / (model.sigma[i] * model.sigma[i]);
            sw += w;
            swy += w * scan.excitation[i];
        }
        const double ybar = swy / sw;
        double chi2_const = 0.0;
        for (size_t i = 0; i < model.sigma.size(); ++i) {
            const double d = (scan.excitation[i] - ybar) / model.sigma[i];
            chi2_const += d * d;
        }
        const double dof_const = static_cast<double>(model.sigma.size()) - 1.0;
        no_contrast = chi2_const < dof_const + 3.0 * std::sqrt(2.0 * dof_const);
    }
    est.wide_uncertainty = !best.converged || best.degenerate || no_contrast ||
                           est.nbar_sigma > 0.5 * std::max(est.nbar, 0.2);
    return est;
}

RabiScan load_scan(const std::string& path, ScanFormat) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scan file: " + path);

    RabiScan scan;
    bool header_seen = false;
    bool shots_seen = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view sv = trim(line);
        if (sv.empty()) continue;
        if (sv.front() == '#') {
            std::string_view body = trim(sv.substr(1));
            constexpr std::string_view kTransitionKey = "transition=";
            if (body.substr(0, kTransitionKey.size()) == kTransitionKey) {
                const std::string name(trim(body.substr(kTransitionKey.size())));
                try {
                    scan.transition = transition_from_string(name);
                } catch (const std::invalid_argument& e) {
                    throw ParseError(e.what(), lineno);
                }
            }
            continue;
        }
        if (!header_seen) {
            if (sv != "time_s,excitation,shots")
                throw ParseError("expected header 'time_s,excitation,shots'", lineno);
            header_seen = true;
            continue;
        }

        const size_t c1 = sv.find(',');
        const size_t c2 = c1 == std::string_view::npos ? c1 : sv.find(',', c1 + 1);
        if (c1 == std::string_view::npos || c2 == std::string_view::npos ||
            sv.find(',', c2 + 1) != std::string_view::npos)
            throw ParseError("expected 3 comma-separated fields", lineno);

        const double t = parse_double_field(sv.substr(0, c1), "time_s", lineno);
        const double y = parse_double_field(sv.substr(c1 + 1, c2 - c1 - 1), "excitation",
                                            lineno);
        const long long shots = parse_shots_field(sv.substr(c2 + 1), lineno);

        if (!scan.times_s.empty() && !(t > scan.times_s.back()))
            throw ParseError("time_s must be strictly increasing", lineno);
        if (!(y >= 0.0 && y <= 1.0))
            throw ParseError("excitation outside [0, 1]", lineno);
        if (shots < 1) throw ParseError("shots must be >= 1", lineno);
        if (shots_seen && shots != scan.shots_per_point)
            throw ParseError("shots must be identical on every row", lineno);

        scan.times_s.push_back(t);
        scan.excitation.push_back(y);
        scan.shots_per_point = shots;
        shots_seen = true;
    }
    if (!header_seen)
        throw ParseError("missing header 'time_s,excitation,shots'", std::max(lineno, 1));
    if (scan.times_s.empty()) throw ParseError("no data rows", std::max(lineno, 1));
    return scan;
}

void save_scan(const std::string& path, const RabiScan& scan,
               const std::vector<std::string>& comments, ScanFormat) {
    scan.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);

    for (const auto& c : comments) {
        std::string flat = c;
        std::replace(flat.begin(), flat.end(), '\n', ' ');
        out << "# " << flat << "\n";
    }
    out << "# transition=" << to_string(scan.transition) << "\n";
    out << "time_s,excitation,shots\n";
    char buf[96];
    for (size_t i = 0; i < scan.times_s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%lld\n", scan.times_s[i],
                      scan.excitation[i], scan.shots_per_point);
        out << buf;
    }
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace mbcool
