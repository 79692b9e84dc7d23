#pragma once

#include "isp/qrm_solver.hpp"

#include <string>
#include <utility>
#include <vector>

namespace isp {

struct IterationOptions {
    int K_max = 8;
    double tol = 1e-3;     ///< stop when err_k drops below this
    VectorFieldN U0;       ///< empty values = zero start
    std::string dump_dir;  ///< write per-iteration U/p fields when non-empty
};

/// Convergence trace of the outer loop.  err_k is the consecutive relative
/// source error |p_k - p_{k-1}|_inf / |p_k|_inf (+inf when the denominator
/// vanishes); theta_hat is the exponentiated least-squares slope of
/// log err_k against k, recorded once at least three iterations ran and at
/// least two err values are positive and finite (0 otherwise).
struct IterationReport {
    std::vector<double> err;
    std::vector<double> J_values;
    double theta_hat = 0.0;
    int K = 0;
    std::string stop_reason; ///< "tol" or "K_max"
};

/// p(x) = sum_n u_n(x) Psi_n(0).
ScalarField extract_source(const VectorFieldN& U, const TimeBasis& basis);

struct IterationResult {
    VectorFieldN U;
    IterationReport report;
};

/// Fixed-point loop: freeze the nonlinearity at the previous iterate, solve
/// the linearized problem, extract the source, and repeat until err_k < tol
/// or K_max steps.  Solver failures are rethrown with the iteration index.
IterationResult run_iteration(const QrmSolver& solver, const BoundaryData& data,
                              const Nonlinearity& F, const TimeBasis& basis,
                              const IterationOptions& opts = {});

/// Convenience overload that assembles the solver in place.
IterationResult run_iteration(const BoundaryData& data, const StiffnessMatrix& S,
                              const ScalarField& c, const ScalarField& W,
                              const Nonlinearity& F, const TimeBasis& basis,
                              const IterationOptions& opts = {});

/// CSV with columns k,err_k,J_k.
void write_report_csv(const IterationReport& report, const std::string& path);

} // namespace isp
