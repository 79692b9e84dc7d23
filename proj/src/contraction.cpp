#include "isp/contraction.hpp"

#include "isp/csv.hpp"
#include "isp/errors.hpp"

#include <cmath>
#include <limits>

namespace isp {

ScalarField extract_source(const VectorFieldN& U, const TimeBasis& basis) {
    require(U.grid != nullptr, ErrorCategory::invalid_argument,
            "extract_source: field has no grid");
    require(static_cast<int>(U.values.cols()) == basis.N, ErrorCategory::invalid_argument,
            "extract_source: mode count does not match the basis");
    Eigen::VectorXd psi0(basis.N);
    for (int n = 1; n <= basis.N; ++n) psi0[n - 1] = eval_basis(basis, n, 0.0);
    ScalarField p = make_field(*U.grid);
    p.values = U.values * psi0;
    return p;
}

IterationResult run_iteration(const QrmSolver& solver, const BoundaryData& data,
                              const Nonlinearity& F, const TimeBasis& basis,
                              const IterationOptions& opts) {
    require(opts.K_max >= 1, ErrorCategory::invalid_argument,
            "run_iteration: K_max must be at least 1");
    require(std::isfinite(opts.tol) && opts.tol > 0.0, ErrorCategory::invalid_argument,
            "run_iteration: tol must be positive");

    const Grid2D& g = solver.grid();
    VectorFieldN U{&g, Eigen::MatrixXd::Zero(g.count(), solver.modes())};
    if (opts.U0.values.size() != 0) {
        require(opts.U0.grid == &g && opts.U0.values.cols() == solver.modes(),
                ErrorCategory::invalid_argument,
                "run_iteration: U0 must live on the solver grid with one column per mode");
        validate_finite(opts.U0, "run_iteration: U0");
        U.values = opts.U0.values;
    }

    IterationReport report;
    ScalarField p_prev = extract_source(U, basis);
    for (int k = 1; k <= opts.K_max; ++k) {
        VectorFieldN rhs, U_next;
        try {
            rhs = nonlinear_rhs(U, basis, F);
            U_next = solver.solve(data, rhs, &U);
        } catch (const Error& e) {
            throw Error(e.category(), "iteration " + std::to_string(k) + ": " + e.what());
        }
        U = std::move(U_next);
        report.J_values.push_back(solver.objective(U, rhs));
        ScalarField p = extract_source(U, basis);
        const double den = p.values.cwiseAbs().maxCoeff();
        const double num = (p.values - p_prev.values).cwiseAbs().maxCoeff();
        report.err.push_back(den > 0.0 ? num / den : std::numeric_limits<double>::infinity());
        p_prev = std::move(p);
        report.K = k;
        if (!opts.dump_dir.empty()) {
            const std::string stem = opts.dump_dir + "/iter_" + std::to_string(k);
            write_vector_field_csv(U, stem + "_U.csv");
            write_field_csv(p_prev, stem + "_p.csv");
        }
        if (report.err.back() < opts.tol) {
            report.stop_reason = "tol";
            break;
        }
    }
    if (report.stop_reason.empty()) report.stop_reason = "K_max";

    if (report.K >= 3) {
        double sk = 0.0, sy = 0.0, skk = 0.0, sky = 0.0;
        int m = 0;
        for (int k = 1; k <= report.K; ++k) {
            const double e = report.err[k - 1];
            if (!(std::isfinite(e) && e > 0.0)) continue;
            const double y = std::log(e);
            sk += k;
            sy += y;
            skk += static_cast<double>(k) * k;
            sky += k * y;
            ++m;
        }
        if (m >= 2 && skk * m > sk * sk)
            report.theta_hat = std::exp((m * sky - sk * sy) / (m * skk - sk * sk));
    }
    return {std::move(U), std::move(report)};
}

IterationResult run_iteration(const BoundaryData& data, const StiffnessMatrix& S,
                              const ScalarField& c, const ScalarField& W,
                              const Nonlinearity& F, const TimeBasis& basis,
                              const IterationOptions& opts) {
    require(c.grid != nullptr, ErrorCategory::invalid_argument, "run_iteration: c has no grid");
    QrmSolver solver(*c.grid, S, c, W);
    return run_iteration(solver, data, F, basis, opts);
}

void write_report_csv(const IterationReport& report, const std::string& path) {
    CsvWriter csv(path);
    csv.header({"k", "err_k", "J_k"});
    for (int k = 1; k <= report.K; ++k) {
        csv.cell(static_cast<long long>(k));
        csv.cell(report.err[k - 1]);
        csv.cell(report.J_values[k - 1]);
        csv.end_row();
    }
}

} // namespace isp
