#pragma once

#include "isp/forward_sim.hpp"
#include "isp/grid_fd.hpp"
#include "isp/time_basis.hpp"

#include <string>
#include <vector>

namespace isp {

/// Time-integrated Cauchy data: G(node, m) = int_0^T g(node, t) Psi_m(t) dt
/// and likewise Q from q, for m = 1..N.
struct BoundaryData {
    Eigen::MatrixXd G, Q;
    double delta = 0.0;      ///< multiplicative noise applied to G,Q
    std::uint64_t seed = 0;
};

/// Projects uniformly time-sampled snapshots onto the basis with composite
/// Simpson quadrature: u_n(x) = int_0^T u(x,t) Psi_n(t) dt.
///
/// `times` must be the uniform grid 0..T inclusive with an even interval
/// count of at least 4N (mode-n oscillation resolution); otherwise
/// ErrorCategory::invalid_argument.
VectorFieldN project_field(const Grid2D& grid, const std::vector<Eigen::VectorXd>& frames,
                           const std::vector<double>& times, const TimeBasis& basis);

/// Same quadrature applied per boundary node to g and q.  delta > 0 then
/// perturbs the *integrated* data entrywise, G first then Q, node-major:
/// G <- G (1 + delta U[-1,1]) from the seeded generator.
BoundaryData project_boundary(const CauchyTraces& traces, const TimeBasis& basis,
                              double delta = 0.0, std::uint64_t seed = 0);

/// e_N(x) = |u_true_at_0(x) - sum_n U_n(x) Psi_n(0)|, pointwise.
ScalarField truncation_error(const ScalarField& u_true_at_0, const VectorFieldN& U,
                             const TimeBasis& basis);

/// u^N(x, t) = sum_n U_n(x) Psi_n(t).
ScalarField reconstruct_time(const VectorFieldN& U, const TimeBasis& basis, double t);

/// CSV with columns face,node_x,node_y,m,G,Q; node-major rows.
void write_boundary_data_csv(const BoundaryData& data, const Grid2D& omega,
                             const std::string& path);
BoundaryData read_boundary_data_csv(const Grid2D& omega, const std::string& path);

} // namespace isp
