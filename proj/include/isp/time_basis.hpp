#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace isp {

/// Orthonormal basis of L^2(0,T) obtained by Gram-Schmidt from
/// phi_n(t) = (t - T/2)^(n-1) e^(t - T/2), n = 1..N.
///
/// Two coefficient representations are stored.  `coeffs` expresses
/// Psi_m over the raw phi_n family, which is the natural bookkeeping but
/// numerically useless for large N (the phi Gram matrix is catastrophically
/// ill-conditioned past N ~ 15).  Evaluation therefore goes through
/// `leg_coeffs`, coefficients over the equivalent well-conditioned family
/// chi_k(t) = P_{k-1}((t - T/2)/(T/2)) e^(t - T/2) with P_k the Legendre
/// polynomials.  Both families span the same nested subspaces, so the
/// Gram-Schmidt output is the identical function sequence.
struct TimeBasis {
    double T = 0.0;                   ///< final time
    int N = 0;                        ///< number of retained modes
    Eigen::MatrixXd coeffs;           ///< lower-tri, Psi_m = sum_n coeffs(m-1,n-1) phi_n
    Eigen::MatrixXd leg_coeffs;       ///< lower-tri, Psi_m over chi_k (used for evaluation)
    std::vector<double> quad_nodes;   ///< composite Gauss-Legendre nodes on [0,T]
    std::vector<double> quad_weights; ///< matching weights
};

/// Matrix s_mn = \int_0^T Psi_n'(t) Psi_m(t) dt together with the
/// reconstruction samples Psi_n(0).  Unit diagonal, zero below it.
struct StiffnessMatrix {
    Eigen::MatrixXd S;
    Eigen::VectorXd psi0;
};

/// Builds the basis. n_quad is the total composite Gauss-Legendre node count
/// on [0,T] (16-node panels, rounded up to whole panels).
///
/// Throws ErrorCategory::invalid_argument for bad N/T/n_quad and
/// ErrorCategory::conditioning when the constructed basis fails its own
/// orthonormality/structure residual check at 1e-10, which is the observable
/// symptom of N too large for the quadrature resolution or for double
/// precision.
TimeBasis build_basis(int N, double T, int n_quad = 256);

/// Psi_n(t); n is 1-based, requires 1 <= n <= N and 0 <= t <= T.
double eval_basis(const TimeBasis& basis, int n, double t);

/// Psi_n'(t), analytically exact (no numerical differentiation).
double eval_basis_derivative(const TimeBasis& basis, int n, double t);

StiffnessMatrix stiffness_matrix(const TimeBasis& basis);

/// Condition estimate of the column-normalized, quadrature-sampled phi
/// family; diagnostic reported when construction is refused.
double phi_condition_estimate(const TimeBasis& basis);

/// CSV dump of Psi_n sampled on a uniform grid; columns t, Psi_1..Psi_N.
void write_basis_samples_csv(const TimeBasis& basis, const std::string& path,
                             int n_samples);

/// CSV dump of a dense matrix (no header row).
void write_matrix_csv(const Eigen::MatrixXd& M, const std::string& path);

} // namespace isp
