#pragma once

// Small dense Levenberg-Marquardt used by the registration stages.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "modsr/error.hpp"
#include "modsr/registration.hpp"

namespace modsr::detail {

struct LmOptions {
    int max_iterations = 50;
    double relative_tolerance = 1e-8;
    double jacobian_step = 1e-6;  // relative, with an absolute floor of the same size
    int max_escalations = 5;
};

struct LmReport {
    RefineStatus status = RefineStatus::NotRun;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    int iterations = 0;
    int escalations = 0;  // rejected trial steps over the whole run
    std::vector<double> cost_trace;  // accepted costs, starting with the initial one
};

/// Central-difference Jacobian of `residuals` at x.
template <class ResidualFn>
Eigen::MatrixXd numeric_jacobian(const Eigen::VectorXd& x, Eigen::Index rows, ResidualFn&& residuals, double step) {
    Eigen::MatrixXd jac(rows, x.size());
    Eigen::VectorXd xp = x;
    Eigen::VectorXd rp(rows);
    Eigen::VectorXd rm(rows);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = step * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + h;
        residuals(xp, rp);
        xp[j] = x[j] - h;
        residuals(xp, rm);
        xp[j] = x[j];
        jac.col(j) = (rp - rm) / (2.0 * h);
    }
    return jac;
}

/// Minimizes 0.5 |r(x)|^2 (reported costs are |r|^2). `residuals(x, r)` fills r;
/// `jacobian(x, r) -> MatrixXd`. Accepted steps never increase the cost.
template <class ResidualFn, class JacobianFn>
LmReport levenberg_marquardt(Eigen::VectorXd& x, Eigen::Index rows, ResidualFn&& residuals, JacobianFn&& jacobian,
                             const LmOptions& opts) {
    LmReport report;
    Eigen::VectorXd r(rows);
    residuals(x, r);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) throw NumericalError("Levenberg-Marquardt: non-finite initial cost");
    report.initial_cost = cost;
    report.cost_trace.push_back(cost);
    report.status = RefineStatus::MaxIterations;

    double lambda = -1.0;
    bool accepted_any = false;
    Eigen::VectorXd trial_r(rows);
    for (int it = 0; it < opts.max_iterations; ++it) {
        report.iterations = it + 1;
        if (cost == 0.0) {
            report.status = RefineStatus::Converged;
            break;
        }
        const Eigen::MatrixXd jac = jacobian(x, r);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;
        Eigen::VectorXd diag = jtj.diagonal();
        const double diag_max = diag.maxCoeff();
        for (Eigen::Index k = 0; k < diag.size(); ++k) diag[k] = std::max(diag[k], 1e-12 * std::max(diag_max, 1e-300));
        if (lambda < 0.0) lambda = 1e-3;

        bool accepted = false;
        int escalations = 0;
        double new_cost = cost;
        double predicted_rel = 0.0;
        while (escalations < opts.max_escalations) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * diag;
            const Eigen::VectorXd step = a.ldlt().solve(-jtr);
            // Predicted decrease of the linearized model.
            predicted_rel = -(2.0 * jtr.dot(step) + (jac * step).squaredNorm()) / cost;
            Eigen::VectorXd trial = x + step;
            residuals(trial, trial_r);
            const double trial_cost = trial_r.squaredNorm();
            if (std::isfinite(trial_cost) && trial_cost < cost) {
                x = trial;
                r = trial_r;
                new_cost = trial_cost;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
            ++escalations;
            ++report.escalations;
        }
        if (!accepted) {
            if (accepted_any || predicted_rel < opts.relative_tolerance)
                report.status = accepted_any ? RefineStatus::Converged : RefineStatus::NoImprovement;
            else
                report.status = RefineStatus::Diverged;
            break;
        }
        accepted_any = true;
        const double rel = (cost - new_cost) / cost;
        cost = new_cost;
        report.cost_trace.push_back(cost);
        if (rel < opts.relative_tolerance) {
            report.status = RefineStatus::Converged;
            break;
        }
    }
    report.final_cost = cost;
    return report;
}

}  // namespace modsr::detail
