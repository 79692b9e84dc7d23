#include "isp/spectral_projection.hpp"

#include "isp/csv.hpp"
#include "isp/errors.hpp"
#include "isp/quadrature.hpp"
#include "isp/rng.hpp"

#include <cmath>

namespace isp {

namespace {

// Quadrature weights mapping uniform samples of data(t) to int data Psi_n dt:
// on each sample interval the data is replaced by its local 6-point Lagrange
// interpolant and the product with Psi_n is integrated by Gauss-Legendre nodes
// at which Psi_n is evaluated exactly. The sample density therefore only has
// to resolve the data itself, not the oscillation of the highest mode.
Eigen::MatrixXd projection_matrix(const std::vector<double>& times, const TimeBasis& basis) {
    const std::size_t nt = times.size();
    require(nt >= 3 && nt % 2 == 1, ErrorCategory::invalid_argument,
            "projection: need an odd count of uniform time samples (even interval count)");
    const std::size_t n_int = nt - 1;
    require(static_cast<int>(n_int) >= 4 * basis.N, ErrorCategory::invalid_argument,
            "projection: too few time samples (" + std::to_string(n_int) + " intervals) for N=" +
                std::to_string(basis.N) + " modes; need at least 4N");
    const double dt = basis.T / static_cast<double>(n_int);
    for (std::size_t k = 0; k < nt; ++k)
        require(std::abs(times[k] - k * dt) <= 1e-9 * basis.T, ErrorCategory::invalid_argument,
                "projection: time samples are not the uniform grid over [0,T]");
    const std::size_t stencil = std::min<std::size_t>(6, nt);
    const QuadratureRule gl = gauss_legendre(12);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nt, basis.N);
    std::vector<double> lagrange(stencil);
    for (std::size_t k = 0; k < n_int; ++k) {
        const std::size_t s0 =
            std::min(k >= stencil / 2 - 1 ? k - (stencil / 2 - 1) : 0, nt - stencil);
        for (std::size_t q = 0; q < gl.size(); ++q) {
            const double t = (static_cast<double>(k) + 0.5 * (1.0 + gl.nodes[q])) * dt;
            const double w = 0.5 * dt * gl.weights[q];
            for (std::size_t j = 0; j < stencil; ++j) {
                double num = 1.0, den = 1.0;
                for (std::size_t m = 0; m < stencil; ++m) {
                    if (m == j) continue;
                    num *= t - static_cast<double>(s0 + m) * dt;
                    den *= static_cast<double>(j) - static_cast<double>(m);
                }
                lagrange[j] = num / (den * std::pow(dt, static_cast<double>(stencil - 1)));
            }
            for (int n = 1; n <= basis.N; ++n) {
                const double psi = w * eval_basis(basis, n, std::min(t, basis.T));
                for (std::size_t j = 0; j < stencil; ++j)
                    P(s0 + j, n - 1) += psi * lagrange[j];
            }
        }
    }
    return P;
}

} // namespace

VectorFieldN project_field(const Grid2D& grid, const std::vector<Eigen::VectorXd>& frames,
                           const std::vector<double>& times, const TimeBasis& basis) {
    require(frames.size() == times.size(), ErrorCategory::invalid_argument,
            "project_field: frame/time count mismatch");
    const Eigen::MatrixXd P = projection_matrix(times, basis);
    Eigen::MatrixXd D(grid.count(), static_cast<Eigen::Index>(frames.size()));
    for (std::size_t k = 0; k < frames.size(); ++k) {
        require(frames[k].size() == grid.count(), ErrorCategory::invalid_argument,
                "project_field: frame size does not match grid");
        D.col(static_cast<Eigen::Index>(k)) = frames[k];
    }
    VectorFieldN U;
    U.grid = &grid;
    U.values = D * P;
    validate_finite(U, "project_field");
    return U;
}

BoundaryData project_boundary(const CauchyTraces& traces, const TimeBasis& basis, double delta,
                              std::uint64_t seed) {
    require(delta >= 0.0 && std::isfinite(delta), ErrorCategory::invalid_argument,
            "project_boundary: delta must be non-negative");
    const Eigen::MatrixXd P = projection_matrix(traces.times, basis);
    require(traces.g.cols() == static_cast<Eigen::Index>(traces.times.size()) &&
                traces.q.cols() == traces.g.cols() && traces.q.rows() == traces.g.rows(),
            ErrorCategory::invalid_argument, "project_boundary: inconsistent trace shapes");
    BoundaryData out;
    out.G = traces.g * P;
    out.Q = traces.q * P;
    out.delta = delta;
    out.seed = seed;
    if (delta > 0.0) {
        UniformPm1 rng(seed);
        for (Eigen::Index b = 0; b < out.G.rows(); ++b)
            for (Eigen::Index m = 0; m < out.G.cols(); ++m)
                out.G(b, m) *= 1.0 + delta * rng.next();
        for (Eigen::Index b = 0; b < out.Q.rows(); ++b)
            for (Eigen::Index m = 0; m < out.Q.cols(); ++m)
                out.Q(b, m) *= 1.0 + delta * rng.next();
    }
    require(out.G.allFinite() && out.Q.allFinite(), ErrorCategory::nonfinite,
            "project_boundary: non-finite integrated data");
    return out;
}

ScalarField truncation_error(const ScalarField& u_true_at_0, const VectorFieldN& U,
                             const TimeBasis& basis) {
    require(U.grid == u_true_at_0.grid, ErrorCategory::invalid_argument,
            "truncation_error: fields on different grids");
    require(U.values.cols() == basis.N, ErrorCategory::invalid_argument,
            "truncation_error: mode count does not match basis");
    Eigen::VectorXd psi0(basis.N);
    for (int n = 1; n <= basis.N; ++n) psi0[n - 1] = eval_basis(basis, n, 0.0);
    ScalarField e = make_field(*U.grid);
    e.values = (u_true_at_0.values - U.values * psi0).cwiseAbs();
    return e;
}

ScalarField reconstruct_time(const VectorFieldN& U, const TimeBasis& basis, double t) {
    require(U.values.cols() == basis.N, ErrorCategory::invalid_argument,
            "reconstruct_time: mode count does not match basis");
    Eigen::VectorXd psi(basis.N);
    for (int n = 1; n <= basis.N; ++n) psi[n - 1] = eval_basis(basis, n, t);
    ScalarField f = make_field(*U.grid);
    f.values = U.values * psi;
    return f;
}

namespace {

const char* face_of(const Grid2D& g, int idx) {
    const int i = g.i_of(idx), j = g.j_of(idx);
    if (i == 0) return "x-";
    if (i == g.Nx - 1) return "x+";
    return j == 0 ? "y-" : "y+";
}

} // namespace

void write_boundary_data_csv(const BoundaryData& data, const Grid2D& omega,
                             const std::string& path) {
    require(data.G.rows() == static_cast<Eigen::Index>(omega.boundary_idx.size()),
            ErrorCategory::invalid_argument, "write_boundary_data_csv: data/grid mismatch");
    CsvWriter csv(path);
    csv.header({"face", "node_x", "node_y", "m", "G", "Q"});
    for (Eigen::Index b = 0; b < data.G.rows(); ++b) {
        const int idx = omega.boundary_idx[static_cast<std::size_t>(b)];
        for (Eigen::Index m = 0; m < data.G.cols(); ++m) {
            csv.cell(std::string(face_of(omega, idx)));
            csv.cell(omega.x(omega.i_of(idx)));
            csv.cell(omega.y(omega.j_of(idx)));
            csv.cell(static_cast<long long>(m + 1));
            csv.cell(data.G(b, m));
            csv.cell(data.Q(b, m));
            csv.end_row();
        }
    }
}

BoundaryData read_boundary_data_csv(const Grid2D& omega, const std::string& path) {
    const CsvTable tab = read_csv(path);
    require(tab.columns == std::vector<std::string>({"face", "node_x", "node_y", "m", "G", "Q"}),
            ErrorCategory::io, "read_boundary_data_csv: unexpected header in " + path);
    const std::size_t nb = omega.boundary_idx.size();
    require(tab.rows.size() % nb == 0, ErrorCategory::io,
            "read_boundary_data_csv: row count is not a multiple of the boundary node count");
    const std::size_t N = tab.rows.size() / nb;
    BoundaryData out;
    out.G.resize(nb, N);
    out.Q.resize(nb, N);
    for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t m = 0; m < N; ++m) {
            const auto& row = tab.rows[b * N + m];
            require(std::stoul(row[3]) == m + 1, ErrorCategory::io,
                    "read_boundary_data_csv: mode order mismatch in " + path);
            out.G(b, m) = std::stod(row[4]);
            out.Q(b, m) = std::stod(row[5]);
        }
    }
    require(out.G.allFinite() && out.Q.allFinite(), ErrorCategory::nonfinite,
            "read_boundary_data_csv: non-finite values in " + path);
    return out;
}

} // namespace isp
