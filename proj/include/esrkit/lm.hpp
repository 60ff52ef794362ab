#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace esr {

// ---------------------------------------------------------------------------
// Damped least squares with numeric Jacobians
// ---------------------------------------------------------------------------
//
// Minimizes 1/2 |r(p)|^2 over named parameters, optionally through a smooth
// soft-L1 loss for outlier-heavy data.  Bounds are enforced by smooth
// reparameterization (log for one-sided, scaled logistic for two-sided), so
// the optimizer itself is unconstrained.  Everything is deterministic:
// identical inputs and options give bit-identical results.

struct ParamSpec {
    std::string name;
    double init = 0.0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

struct FitOptions {
    int max_iter = 200;
    double ftol = 1e-12;  // relative cost reduction
    double xtol = 1e-12;  // relative step size
    double gtol = 1e-10;  // gradient infinity norm (scaled)
    bool robust = false;  // soft-L1 loss
    double f_scale = 0.0; // robust transition scale; 0 = plain prefit, then 1.4826 MAD rounds
};

struct FitResult {
    std::vector<std::string> names;
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;  // scaled by residual variance
    Eigen::VectorXd ci95;        // 1.96 sqrt(diag covariance)
    double cost = 0.0;           // 1/2 |r|^2 at the optimum (robust-transformed if robust)
    int iterations = 0;
    bool converged = false;
    std::vector<std::string> notes;  // e.g. unconstrained parameter warnings

    double param(const std::string& name) const;
    double ci(const std::string& name) const;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// residuals(p) has fixed length m >= 1; central-difference Jacobian with
// relative step 1e-6 on the internal (transformed) parameters.
FitResult lm_fit(const ResidualFn& residuals, const std::vector<ParamSpec>& params,
                 const FitOptions& options = {});

}  // namespace esr
