#include "isp/carleman.hpp"

#include "isp/csv.hpp"
#include "isp/errors.hpp"

#include <cmath>

namespace isp {

namespace {

double radius(const CarlemanParams& p, double x, double y) {
    return std::hypot(x - p.x0x, y - p.x0y);
}

} // namespace

void validate_carleman(const CarlemanParams& p, const Grid2D& grid) {
    require(std::isfinite(p.lambda) && p.lambda > 0.0, ErrorCategory::invalid_argument,
            "carleman: lambda must be positive");
    require(std::isfinite(p.beta) && p.beta > 0.0, ErrorCategory::invalid_argument,
            "carleman: beta must be positive");
    require(std::isfinite(p.b) && p.b > 0.0, ErrorCategory::invalid_argument,
            "carleman: b must be positive");
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    for (int i = 0; i < grid.Nx; ++i) {
        for (int j = 0; j < grid.Nx; ++j) {
            const double r = radius(p, grid.x(i), grid.y(j));
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
        }
    }
    // node min undershoots the continuum min over the square by at most h/2
    // (distance is 1-Lipschitz along boundary edges)
    require(rmin - grid.h / 2.0 > 1.0, ErrorCategory::invalid_argument,
            "carleman: x0 too close to the domain (need r > 1 with margin, got min r = " +
                format_full(rmin) + ")");
    require(p.b > rmax, ErrorCategory::invalid_argument,
            "carleman: b must exceed max r over the domain (max r = " + format_full(rmax) + ")");
    const double max_exp = 2.0 * p.lambda * std::pow(rmax / p.b, p.beta);
    require(max_exp < 700.0, ErrorCategory::invalid_argument,
            "carleman: weight exponent " + format_full(max_exp) + " would overflow");
}

ScalarField weight_field(const CarlemanParams& p, const Grid2D& grid) {
    validate_carleman(p, grid);
    ScalarField w = make_field(grid);
    for (int i = 0; i < grid.Nx; ++i)
        for (int j = 0; j < grid.Nx; ++j)
            w.values[grid.index(i, j)] =
                std::exp(2.0 * p.lambda * std::pow(radius(p, grid.x(i), grid.y(j)) / p.b, p.beta));
    return w;
}

std::vector<CarlemanDiagnosticRow> carleman_diagnostic(const ScalarField& v,
                                                       const CarlemanParams& params,
                                                       const std::vector<double>& lambdas) {
    const Grid2D& g = *v.grid;
    validate_finite(v, "carleman_diagnostic");
    const double vmax = v.values.cwiseAbs().maxCoeff();
    // the estimate applies to fields vanishing with their normal derivative
    // on the boundary; check both discretely
    for (int idx : g.boundary_idx)
        require(std::abs(v.values[idx]) <= 1e-8 * vmax, ErrorCategory::invalid_argument,
                "carleman_diagnostic: v does not vanish on the boundary");
    for (int idx : g.boundary_idx) {
        const int i = g.i_of(idx), j = g.j_of(idx);
        int step = 0;
        if (i == 0)
            step = g.Nx;
        else if (i == g.Nx - 1)
            step = -g.Nx;
        else if (j == 0)
            step = 1;
        else
            step = -1;
        if ((i == 0 || i == g.Nx - 1) && (j == 0 || j == g.Nx - 1)) continue; // corners
        const double dn =
            (-3.0 * v.values[idx] + 4.0 * v.values[idx + step] - v.values[idx + 2 * step]) /
            (2.0 * g.h);
        require(std::abs(dn) <= g.h * vmax, ErrorCategory::invalid_argument,
                "carleman_diagnostic: normal derivative of v does not vanish on the boundary");
    }

    const auto lap = laplacian(v);
    const auto [vx, vy] = gradient(v);
    const double inv_h2 = 1.0 / (g.h * g.h);
    const double inv_4h2 = 1.0 / (4.0 * g.h * g.h);
    const Eigen::VectorXd& u = v.values;

    std::vector<CarlemanDiagnosticRow> rows;
    CarlemanParams p = params;
    for (double lam : lambdas) {
        p.lambda = lam;
        const ScalarField W = weight_field(p, g);
        double lhs = 0.0, hess = 0.0, zero = 0.0, grad = 0.0;
        for (int idx : g.interior_idx) {
            const double w = W.values[idx];
            const double vxx = (u[idx + g.Nx] - 2.0 * u[idx] + u[idx - g.Nx]) * inv_h2;
            const double vyy = (u[idx + 1] - 2.0 * u[idx] + u[idx - 1]) * inv_h2;
            const double vxy = (u[idx + g.Nx + 1] - u[idx + g.Nx - 1] - u[idx - g.Nx + 1] +
                                u[idx - g.Nx - 1]) *
                               inv_4h2;
            lhs += w * lap.values[idx] * lap.values[idx];
            hess += w * (vxx * vxx + 2.0 * vxy * vxy + vyy * vyy);
            zero += w * u[idx] * u[idx];
            grad += w * (vx.values[idx] * vx.values[idx] + vy.values[idx] * vy.values[idx]);
        }
        const double h2 = g.h * g.h;
        CarlemanDiagnosticRow row;
        row.lambda = lam;
        row.lhs = lhs * h2;
        row.hess_term = hess / lam * h2;
        row.zero_term = zero * lam * lam * lam * h2;
        row.grad_term = grad * lam * h2;
        row.rhs0 = row.hess_term + row.zero_term + row.grad_term;
        row.ratio = row.rhs0 > 0.0 ? row.lhs / row.rhs0 : 0.0;
        rows.push_back(row);
    }
    return rows;
}

void write_diagnostic_csv(const std::vector<CarlemanDiagnosticRow>& rows,
                          const std::string& path) {
    CsvWriter csv(path);
    csv.header({"lambda", "lhs", "rhs0", "ratio"});
    for (const auto& r : rows) {
        csv.cell(r.lambda);
        csv.cell(r.lhs);
        csv.cell(r.rhs0);
        csv.cell(r.ratio);
        csv.end_row();
    }
}

} // namespace isp
