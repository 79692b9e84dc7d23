#pragma once

#include "isp/carleman.hpp"
#include "isp/forward_sim.hpp"
#include "isp/grid_fd.hpp"
#include "isp/spectral_projection.hpp"
#include "isp/time_basis.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <vector>

namespace isp {

/// One linearized Carleman-weighted least-squares step:
///
///   J(V) = sum_{interior nodes} What(x) |Lap_h V - c(x) S V + rhs(x)|^2 h^2
///          (+ eps |V_free|^2 when eps > 0),   What = W / max W,
///
/// minimized over fields matching the Cauchy data: V = G on the boundary
/// ring and V = G - h Q on the first interior layer (the one-sided encoding
/// of the outward normal derivative; corner-adjacent layer nodes read the
/// x-face neighbour, like the trace extraction).  Everything except the
/// right-hand side and the data is baked into one sparse normal system, so
/// a single setup serves every outer iteration and noise draw.
///
/// Up to `direct_limit` unknowns the normal system is factorized directly
/// (LDLT).  Above it, memory forces an iterative path: preconditioned CG on
/// the normal equations, relative residual 1e-10.  Because S has a unit
/// diagonal, every mode shares the scalar operator B = sigma (Lap_h - c),
/// the diagonal blocks of the normal matrix are B^T B plus a mode-dependent
/// diagonal, and every off-diagonal block is a scalar multiple of one shared
/// center-coupling matrix plus a diagonal.  That makes a symmetric block
/// Gauss-Seidel preconditioner affordable: N scalar-sized factorizations and
/// two triangular mode sweeps per CG application.
class QrmSolver {
public:
    QrmSolver(const Grid2D& grid, const StiffnessMatrix& S, const ScalarField& c,
              const ScalarField& W, double eps = 0.0, int direct_limit = 200000);

    /// Minimizer of J for this data/right-hand side.  rhs may be empty
    /// (treated as zero); otherwise it must live on the solver grid.  warm,
    /// when given, seeds the iterative path (the answer does not depend on
    /// it beyond the solver tolerance).
    VectorFieldN solve(const BoundaryData& data, const VectorFieldN& rhs,
                       const VectorFieldN* warm = nullptr) const;

    /// Residual field Lap_h V - c S V + rhs (zero on the boundary ring).
    VectorFieldN residual(const VectorFieldN& V, const VectorFieldN& rhs) const;

    /// The functional J evaluated at an arbitrary field.
    double objective(const VectorFieldN& V, const VectorFieldN& rhs) const;

    const Grid2D& grid() const { return *grid_; }
    int modes() const { return N_; }

    /// CG iterations of the most recent solve (0 on the direct path).
    int last_iterations() const { return last_iterations_; }

private:
    const Grid2D* grid_;
    Eigen::MatrixXd S_;
    ScalarField c_;
    ScalarField what_; ///< normalized weight
    double eps_;
    int N_;
    std::vector<int> free_pos_;   ///< node -> dense free-node position, -1 if constrained
    std::vector<int> free_nodes_; ///< inverse of free_pos_
    std::vector<int> bpos_;       ///< node -> row in G/Q, -1 off the boundary
    std::vector<int> layer_src_;  ///< first-layer node -> boundary node it is eliminated from
    Eigen::SparseMatrix<double> A_; ///< sqrt(What h^2)-scaled residual rows over free unknowns
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
    std::vector<std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>> mode_ldlt_;
    Eigen::SparseMatrix<double> scalar_normal_; ///< B^T B over free nodes
    Eigen::SparseMatrix<double> K_;  ///< shared center-coupling matrix F^T diag(sigma^2 c) B
    Eigen::VectorXd csig2_;          ///< sigma^2 c^2 at free nodes
    Eigen::VectorXd s2_;             ///< s2(n) = sum_{m<n} S(m,n)^2
    Eigen::MatrixXd T2_;             ///< T2(a,b) = sum_{m<b} S(m,a) S(m,b)
    mutable int last_iterations_ = 0;

    Eigen::VectorXd solve_normal(const Eigen::VectorXd& atb,
                                 const Eigen::VectorXd* x0 = nullptr) const;

    /// Symmetric block Gauss-Seidel application z = M^{-1} r (mode sweeps).
    Eigen::VectorXd sgs_precond(const Eigen::VectorXd& r) const;

    /// Fills constrained entries of V from the data, leaves the rest at 0.
    void scatter_constraints(const BoundaryData& data, Eigen::MatrixXd& V) const;
};

/// Everything solve() needs, bundled for one-shot use.
struct LinearizedProblem {
    const Grid2D* grid = nullptr;
    StiffnessMatrix S;
    ScalarField c;
    ScalarField W;
    VectorFieldN rhs;
    BoundaryData data;
    double eps = 0.0;
};

VectorFieldN solve_linearized(const LinearizedProblem& prob);

/// F_m(x) = int_0^T F(x, t, u^N(x,t), grad u^N(x,t)) Psi_m(t) dt with
/// u^N = sum_n U_n Psi_n, evaluated with the basis quadrature rule; spatial
/// gradients use the grid stencils.
VectorFieldN nonlinear_rhs(const VectorFieldN& U_prev, const TimeBasis& basis,
                           const Nonlinearity& F);

} // namespace isp
