#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace mbcool {

/// Fills the residual vector r(theta) (any length >= dim(theta)) and, when
/// jac is non-null, the matrix d r_i / d theta_j. Residuals are expected to
/// be pre-weighted (divided by their standard errors), so the covariance of
/// the optimum is (J^T J)^{-1} directly.
using ResidualFn =
    std::function<void(const Eigen::VectorXd& theta, Eigen::VectorXd& r,
                       Eigen::MatrixXd* jac)>;

struct LevMarOptions {
    int max_iterations = 200;
    double initial_damping = 1e-3;
    double damping_increase = 8.0;
    double damping_decrease = 0.25;
    double step_tolerance = 1e-10;   ///< converged when the accepted step is this small
    double cost_tolerance = 1e-12;   ///< ... or the relative cost drop is this small
    /// Condition-number bound on the correlation-scaled J^T J (unit
    /// diagonal, so parameter units cancel) beyond which the fit is flagged
    /// degenerate.
    double degenerate_condition = 1e10;
};

struct LevMarResult {
    Eigen::VectorXd theta;
    Eigen::MatrixXd covariance;
    double cost = 0.0;  ///< sum of squared (weighted) residuals at theta
    bool converged = false;
    bool degenerate = false;
    int iterations = 0;
    std::vector<double> cost_trace;  ///< accepted costs; nonincreasing
};

/// Damped least squares (Levenberg-Marquardt with Marquardt diagonal
/// scaling) under box constraints enforced by projection. Steps are accepted
/// only when they lower the cost, so cost_trace is monotone by construction.
LevMarResult levmar_fit(const ResidualFn& fn, const Eigen::VectorXd& theta0,
                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        const LevMarOptions& opts = {});

}  // namespace mbcool
