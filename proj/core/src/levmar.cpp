#include "mbcool/levmar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mbcool {

namespace {

Eigen::VectorXd clamp_box(Eigen::VectorXd v, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
    return v;
}

}  // namespace

LevMarResult levmar_fit(const ResidualFn& fn, const Eigen::VectorXd& theta0,
                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        const LevMarOptions& opts) {
    const Eigen::Index p = theta0.size();
    if (lower.size() != p || upper.size() != p)
        throw std::invalid_argument("levmar_fit: bound vectors must match parameter count");
    for (Eigen::Index i = 0; i < p; ++i)
        if (!(lower[i] <= upper[i]))
            throw std::invalid_argument("levmar_fit: lower bound exceeds upper bound");

    LevMarResult res;
    res.theta = clamp_box(theta0, lower, upper);

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    fn(res.theta, r, &jac);
    if (jac.rows() != r.size() || jac.cols() != p)
        throw std::invalid_argument("levmar_fit: Jacobian shape mismatch");

    double cost = r.squaredNorm();
    res.cost_trace.push_back(cost);
    double lambda = opts.initial_damping;

    Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::VectorXd jtr = jac.transpose() * r;

    for (int it = 0; it < opts.max_iterations; ++it) {
        res.iterations = it + 1;

        Eigen::MatrixXd damped = jtj;
        for (Eigen::Index i = 0; i < p; ++i)
            damped(i, i) += lambda * std::max(jtj(i, i), 1e-32);

        Eigen::VectorXd step = damped.ldlt().solve(-jtr);
        Eigen::VectorXd trial = clamp_box(res.theta + step, lower, upper);
        Eigen::VectorXd actual_step = trial - res.theta;

        Eigen::VectorXd r_trial;
        fn(trial, r_trial, nullptr);
        const double cost_trial = r_trial.squaredNorm();

        if (std::isfinite(cost_trial) && cost_trial < cost) {
            const double drop = cost - cost_trial;
            const double step_norm = actual_step.norm();
            res.theta = trial;
            cost = cost_trial;
            res.cost_trace.push_back(cost);
            lambda = std::max(lambda * opts.damping_decrease, 1e-14);

            fn(res.theta, r, &jac);
            jtj = jac.transpose() * jac;
            jtr = jac.transpose() * r;

            if (step_norm <= opts.step_tolerance * (res.theta.norm() + opts.step_tolerance) ||
                drop <= opts.cost_tolerance * std::max(cost, 1e-300)) {
                res.converged = true;
                break;
            }
        } else {
            lambda *= opts.damping_increase;
            if (lambda > 1e14) {
                // No downhill direction at any damping: either at a (possibly
                // box-constrained) optimum or stuck; treat a tiny gradient as
                // convergence.
                res.converged = jtr.lpNorm<Eigen::Infinity>() <
                                1e-8 * std::max(1.0, std::sqrt(cost));
                break;
            }
        }
    }

    res.cost = cost;

    // Degeneracy is judged on the correlation-scaled system so it reflects
    // genuinely unconstrained directions, not parameter units.
    Eigen::VectorXd d(p);
    for (Eigen::Index i = 0; i < p; ++i) d[i] = std::sqrt(std::max(jtj(i, i), 0.0));
    Eigen::MatrixXd corr(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) {
            const double dd = d[i] * d[j];
            corr(i, j) = dd > 0.0 ? jtj(i, j) / dd : (i == j ? 1.0 : 0.0);
        }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
    const auto& ev = es.eigenvalues();
    const double emax = ev.maxCoeff();
    const double emin = ev.minCoeff();
    res.degenerate = !(emin > 0.0) || emax / emin > opts.degenerate_condition ||
                     !std::isfinite(emax) || d.minCoeff() <= 0.0;

    // cov = (J^T J)^{-1} = D^{-1} corr^{-1} D^{-1}; degenerate directions are
    // pseudo-inverted so the determined ones still report a usable covariance.
    Eigen::VectorXd inv = ev;
    for (Eigen::Index i = 0; i < p; ++i)
        inv[i] = (ev[i] > emax * 1e-14 && ev[i] > 0.0) ? 1.0 / ev[i] : 0.0;
    const Eigen::MatrixXd corr_inv =
        es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    res.covariance.resize(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) {
            const double dd = d[i] * d[j];
            res.covariance(i, j) = dd > 0.0 ? corr_inv(i, j) / dd : 0.0;
        }
    return res;
}

}  // namespace mbcool
