#include "isp/time_basis.hpp"

#include "isp/csv.hpp"
#include "isp/errors.hpp"
#include "isp/quadrature.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <fstream>

namespace isp {

namespace {

// Legendre values P_0..P_{K-1} and derivatives at z, via Bonnet plus
// P_k' = P_{k-2}' + (2k-1) P_{k-1} (division-free, valid at z = +-1).
void legendre_table(double z, int K, std::vector<double>& P, std::vector<double>& dP) {
    P.resize(K);
    dP.resize(K);
    P[0] = 1.0;
    dP[0] = 0.0;
    if (K == 1) return;
    P[1] = z;
    dP[1] = 1.0;
    for (int k = 2; k < K; ++k) {
        P[k] = ((2.0 * k - 1.0) * z * P[k - 1] - (k - 1.0) * P[k - 2]) / k;
        dP[k] = dP[k - 2] + (2.0 * k - 1.0) * P[k - 1];
    }
}

// Samples of chi_k(t) = P_{k-1}((t-T/2)/(T/2)) e^{t-T/2} and of chi_k' at the
// quadrature nodes; rows are k-1 = 0..N-1.
void sample_chi(const TimeBasis& b, Eigen::MatrixXd& chi, Eigen::MatrixXd* dchi) {
    const int N = b.N;
    const int Q = static_cast<int>(b.quad_nodes.size());
    const double c = b.T / 2.0;
    chi.resize(N, Q);
    if (dchi) dchi->resize(N, Q);
    std::vector<double> P, dP;
    for (int q = 0; q < Q; ++q) {
        const double x = b.quad_nodes[q] - c;
        const double ex = std::exp(x);
        legendre_table(x / c, N, P, dP);
        for (int k = 0; k < N; ++k) {
            chi(k, q) = P[k] * ex;
            if (dchi) (*dchi)(k, q) = (P[k] + dP[k] / c) * ex;
        }
    }
}

// s_mn and Psi_n(0) from the chi representation of a constructed basis.
StiffnessMatrix stiffness_from(const TimeBasis& b) {
    const int N = b.N;
    const int Q = static_cast<int>(b.quad_nodes.size());
    Eigen::MatrixXd chi, dchi;
    sample_chi(b, chi, &dchi);
    Eigen::MatrixXd V = b.leg_coeffs * chi;   // Psi_m samples
    Eigen::MatrixXd Vd = b.leg_coeffs * dchi; // Psi_m' samples
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(b.quad_weights.data(), Q);
    StiffnessMatrix out;
    out.S = V * w.asDiagonal() * Vd.transpose(); // S(m,n) = sum_q w V_m Vd_n
    out.psi0.resize(N);
    for (int n = 1; n <= N; ++n) out.psi0[n - 1] = eval_basis(b, n, 0.0);
    return out;
}

double structure_residual(const TimeBasis& b, const StiffnessMatrix& st) {
    const int Q = static_cast<int>(b.quad_nodes.size());
    Eigen::MatrixXd chi;
    sample_chi(b, chi, nullptr);
    Eigen::MatrixXd V = b.leg_coeffs * chi;
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(b.quad_weights.data(), Q);
    Eigen::MatrixXd G = V * w.asDiagonal() * V.transpose();
    double r = (G - Eigen::MatrixXd::Identity(b.N, b.N)).cwiseAbs().maxCoeff();
    for (int m = 0; m < b.N; ++m) {
        r = std::max(r, std::abs(st.S(m, m) - 1.0));
        for (int n = 0; n < m; ++n) r = std::max(r, std::abs(st.S(m, n)));
    }
    return r;
}

// Monomial coefficient triangle of the Legendre polynomials, scaled so row
// k gives chi_{k+1} over phi_{j+1}: chi_{k+1} = sum_j A(k,j) phi_{j+1}.
Eigen::MatrixXd chi_to_phi(int N, double c) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    A(0, 0) = 1.0;
    if (N == 1) return A;
    A(1, 1) = 1.0 / c;
    for (int k = 2; k < N; ++k) {
        for (int j = 0; j <= k; ++j) {
            double v = -(k - 1.0) * A(k - 2, j);
            if (j > 0) v += (2.0 * k - 1.0) * A(k - 1, j - 1) / c;
            A(k, j) = v / k;
        }
    }
    return A;
}

} // namespace

TimeBasis build_basis(int N, double T, int n_quad) {
    require(N >= 1, ErrorCategory::invalid_argument, "build_basis: N must be >= 1");
    require(std::isfinite(T) && T > 0.0, ErrorCategory::invalid_argument,
            "build_basis: T must be finite and positive");
    require(n_quad >= 1, ErrorCategory::invalid_argument,
            "build_basis: n_quad must be positive");

    TimeBasis b;
    b.T = T;
    b.N = N;
    const QuadratureRule rule = composite_gauss_legendre(0.0, T, static_cast<std::size_t>(n_quad));
    b.quad_nodes = rule.nodes;
    b.quad_weights = rule.weights;
    const int Q = static_cast<int>(rule.size());

    Eigen::MatrixXd chi;
    b.leg_coeffs = Eigen::MatrixXd::Zero(N, N);
    sample_chi(b, chi, nullptr);
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(b.quad_weights.data(), Q);

    // Modified Gram-Schmidt with one reorthogonalization pass, run on the
    // sampled chi family while tracking the coefficient rows.
    Eigen::MatrixXd V(N, Q); // orthonormal samples
    for (int m = 0; m < N; ++m) {
        Eigen::VectorXd v = chi.row(m).transpose();
        Eigen::VectorXd cf = Eigen::VectorXd::Zero(N);
        cf[m] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (int j = 0; j < m; ++j) {
                const double r = V.row(j).transpose().cwiseProduct(w).dot(v);
                v -= r * V.row(j).transpose();
                cf -= r * b.leg_coeffs.row(j).transpose();
            }
        }
        const double nrm = std::sqrt(v.cwiseProduct(w).dot(v));
        require(std::isfinite(nrm) && nrm > 1e-300, ErrorCategory::conditioning,
                "build_basis: Gram-Schmidt annihilated mode " + std::to_string(m + 1));
        V.row(m) = v.transpose() / nrm;
        b.leg_coeffs.row(m) = cf.transpose() / nrm;
    }

    b.coeffs = b.leg_coeffs * chi_to_phi(N, T / 2.0);

    const StiffnessMatrix st = stiffness_from(b);
    const double resid = structure_residual(b, st);
    if (!(resid < 1e-10)) {
        throw Error(ErrorCategory::conditioning,
                    "build_basis: orthonormality/structure residual " + format_full(resid) +
                        " exceeds 1e-10 at N=" + std::to_string(N) + ", n_quad=" +
                        std::to_string(n_quad) + "; phi condition estimate " +
                        format_full(phi_condition_estimate(b)) +
                        " — raise n_quad or lower N");
    }
    return b;
}

double eval_basis(const TimeBasis& basis, int n, double t) {
    require(n >= 1 && n <= basis.N, ErrorCategory::invalid_argument,
            "eval_basis: mode index out of range");
    require(t >= 0.0 && t <= basis.T, ErrorCategory::invalid_argument,
            "eval_basis: t outside [0,T]");
    const double c = basis.T / 2.0;
    const double x = t - c;
    std::vector<double> P, dP;
    legendre_table(x / c, n, P, dP);
    double acc = 0.0;
    for (int k = 0; k < n; ++k) acc += basis.leg_coeffs(n - 1, k) * P[k];
    return acc * std::exp(x);
}

double eval_basis_derivative(const TimeBasis& basis, int n, double t) {
    require(n >= 1 && n <= basis.N, ErrorCategory::invalid_argument,
            "eval_basis_derivative: mode index out of range");
    require(t >= 0.0 && t <= basis.T, ErrorCategory::invalid_argument,
            "eval_basis_derivative: t outside [0,T]");
    const double c = basis.T / 2.0;
    const double x = t - c;
    std::vector<double> P, dP;
    legendre_table(x / c, n, P, dP);
    double acc = 0.0;
    for (int k = 0; k < n; ++k) acc += basis.leg_coeffs(n - 1, k) * (P[k] + dP[k] / c);
    return acc * std::exp(x);
}

StiffnessMatrix stiffness_matrix(const TimeBasis& basis) {
    require(basis.N >= 1 && !basis.quad_nodes.empty(), ErrorCategory::invalid_argument,
            "stiffness_matrix: basis not built");
    return stiffness_from(basis);
}

double phi_condition_estimate(const TimeBasis& basis) {
    const int N = basis.N;
    const int Q = static_cast<int>(basis.quad_nodes.size());
    const double c = basis.T / 2.0;
    Eigen::MatrixXd A(Q, N);
    for (int q = 0; q < Q; ++q) {
        const double x = basis.quad_nodes[q] - c;
        const double sw = std::sqrt(basis.quad_weights[q]);
        double pw = 1.0;
        for (int n = 0; n < N; ++n) {
            A(q, n) = pw * std::exp(x) * sw;
            pw *= x;
        }
    }
    for (int n = 0; n < N; ++n) A.col(n) /= A.col(n).norm();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const double smax = svd.singularValues()(0);
    return smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
}

void write_basis_samples_csv(const TimeBasis& basis, const std::string& path, int n_samples) {
    require(n_samples >= 2, ErrorCategory::invalid_argument,
            "write_basis_samples_csv: need at least 2 samples");
    CsvWriter csv(path);
    std::vector<std::string> header{"t"};
    for (int n = 1; n <= basis.N; ++n) header.push_back("Psi_" + std::to_string(n));
    csv.header(header);
    for (int i = 0; i < n_samples; ++i) {
        const double t = basis.T * static_cast<double>(i) / (n_samples - 1);
        csv.cell(t);
        for (int n = 1; n <= basis.N; ++n) csv.cell(eval_basis(basis, n, t));
        csv.end_row();
    }
}

void write_matrix_csv(const Eigen::MatrixXd& M, const std::string& path) {
    CsvWriter csv(path);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) csv.cell(M(i, j));
        csv.end_row();
    }
}

} // namespace isp
