#pragma once

#include "isp/grid_fd.hpp"

#include <string>
#include <vector>

namespace isp {

/// Parameters of the weight W(x) = exp(2 lambda (r(x)/b)^beta) with
/// r(x) = |x - x0|.  Defaults follow the working configuration for
/// Omega = (-1,1)^2: x0 = (0,-3), b = 5, lambda = 40, beta = 20.
struct CarlemanParams {
    double x0x = 0.0;
    double x0y = -3.0;
    double b = 5.0;
    double lambda = 40.0;
    double beta = 20.0;
};

/// Enforces r > 1 on the closed grid square (with an h margin), b > max r,
/// positive lambda/beta, and a non-overflowing exponent.  Throws
/// ErrorCategory::invalid_argument.
void validate_carleman(const CarlemanParams& params, const Grid2D& grid);

ScalarField weight_field(const CarlemanParams& params, const Grid2D& grid);

struct CarlemanDiagnosticRow {
    double lambda = 0.0;
    double lhs = 0.0;       ///< sum W |Lap_h v|^2 h^2 over interior nodes
    double hess_term = 0.0; ///< (1/lambda) sum W |D2_h v|^2 h^2
    double zero_term = 0.0; ///< lambda^3 sum W |v|^2 h^2
    double grad_term = 0.0; ///< lambda sum W |grad_h v|^2 h^2
    double rhs0 = 0.0;      ///< hess_term + zero_term + grad_term
    double ratio = 0.0;
};

/// Numerical shadow of the Carleman estimate: evaluates LHS and RHS0 for a
/// field vanishing together with its normal derivative on the grid boundary
/// (checked), for each lambda in the sweep.
std::vector<CarlemanDiagnosticRow> carleman_diagnostic(const ScalarField& v,
                                                       const CarlemanParams& params,
                                                       const std::vector<double>& lambdas);

/// CSV with columns lambda,lhs,rhs0,ratio.
void write_diagnostic_csv(const std::vector<CarlemanDiagnosticRow>& rows,
                          const std::string& path);

} // namespace isp
