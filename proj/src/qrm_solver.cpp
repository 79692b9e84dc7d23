#include "isp/qrm_solver.hpp"

#include "isp/csv.hpp"
#include "isp/errors.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace isp {

namespace {

/// Known part of the field: boundary ring from G, first layer from G - h Q
/// through the face-of-the-normal boundary neighbour; free nodes zero.
Eigen::MatrixXd constrained_values(const Grid2D& g, const std::vector<int>& bpos,
                                   const std::vector<int>& layer_src,
                                   const BoundaryData& data, int N) {
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(g.count(), N);
    for (int idx : g.boundary_idx) V.row(idx) = data.G.row(bpos[idx]);
    for (int idx : g.first_layer_idx) {
        const int b = bpos[layer_src[idx]];
        V.row(idx) = data.G.row(b) - g.h * data.Q.row(b);
    }
    return V;
}

} // namespace

QrmSolver::QrmSolver(const Grid2D& grid, const StiffnessMatrix& S, const ScalarField& c,
                     const ScalarField& W, double eps, int direct_limit)
    : grid_(&grid), S_(S.S), eps_(eps), N_(static_cast<int>(S.S.rows())) {
    require(grid.Nx >= 5, ErrorCategory::invalid_argument,
            "QrmSolver: grid must have at least one unknown layer (Nx >= 5)");
    require(N_ >= 1 && S_.cols() == N_, ErrorCategory::invalid_argument,
            "QrmSolver: S must be a nonempty square matrix");
    require(c.grid == &grid && W.grid == &grid, ErrorCategory::invalid_argument,
            "QrmSolver: c and W must live on the solver grid");
    validate_finite(c, "QrmSolver: c");
    validate_finite(W, "QrmSolver: W");
    require(W.values.minCoeff() > 0.0, ErrorCategory::invalid_argument,
            "QrmSolver: weight must be strictly positive");
    require(std::isfinite(eps) && eps >= 0.0, ErrorCategory::invalid_argument,
            "QrmSolver: eps must be finite and nonnegative");

    c_ = c;
    what_ = W;
    what_.values /= W.values.maxCoeff();

    const int Nx = grid.Nx;
    const int count = grid.count();
    bpos_.assign(count, -1);
    for (int b = 0; b < static_cast<int>(grid.boundary_idx.size()); ++b)
        bpos_[grid.boundary_idx[b]] = b;

    layer_src_.assign(count, -1);
    for (int idx : grid.first_layer_idx) {
        const int i = grid.i_of(idx), j = grid.j_of(idx);
        int src;
        if (i == 1)
            src = grid.index(0, j);
        else if (i == Nx - 2)
            src = grid.index(Nx - 1, j);
        else if (j == 1)
            src = grid.index(i, 0);
        else
            src = grid.index(i, Nx - 1);
        layer_src_[idx] = src;
    }

    free_pos_.assign(count, -1);
    for (int i = 2; i <= Nx - 3; ++i)
        for (int j = 2; j <= Nx - 3; ++j) {
            free_pos_[grid.index(i, j)] = static_cast<int>(free_nodes_.size());
            free_nodes_.push_back(grid.index(i, j));
        }

    const int n_rows = static_cast<int>(grid.interior_idx.size()) * N_;
    const int n_cols = static_cast<int>(free_nodes_.size()) * N_;
    const double inv_h2 = 1.0 / (grid.h * grid.h);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(grid.interior_idx.size()) * N_ * (5 + N_ / 2));
    int row_block = 0;
    for (int idx : grid.interior_idx) {
        const double sigma = std::sqrt(what_.values[idx]) * grid.h;
        const int stenc[5] = {idx, idx - Nx, idx + Nx, idx - 1, idx + 1};
        const double coef[5] = {-4.0 * inv_h2, inv_h2, inv_h2, inv_h2, inv_h2};
        for (int m = 0; m < N_; ++m) {
            const int r = row_block * N_ + m;
            for (int s = 0; s < 5; ++s)
                if (free_pos_[stenc[s]] >= 0)
                    trips.emplace_back(r, free_pos_[stenc[s]] * N_ + m, sigma * coef[s]);
            if (free_pos_[idx] >= 0)
                for (int n = m; n < N_; ++n)
                    if (S_(m, n) != 0.0)
                        trips.emplace_back(r, free_pos_[idx] * N_ + n,
                                           -sigma * c_.values[idx] * S_(m, n));
        }
        ++row_block;
    }
    A_.resize(n_rows, n_cols);
    A_.setFromTriplets(trips.begin(), trips.end());
    trips.clear();
    trips.shrink_to_fit();

    if (n_cols <= direct_limit) {
        Eigen::SparseMatrix<double> normal = Eigen::SparseMatrix<double>(A_.transpose()) * A_;
        if (eps_ > 0.0) {
            Eigen::SparseMatrix<double> reg(n_cols, n_cols);
            reg.setIdentity();
            normal += eps_ * reg;
        }
        ldlt_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
        ldlt_->compute(normal);
        require(ldlt_->info() == Eigen::Success, ErrorCategory::solver,
                "QrmSolver: normal-system factorization failed (try a small eps)");
        return;
    }

    // Iterative path.  With the unit diagonal of S, the normal matrix has
    // diagonal blocks B^T B + diag(s2(n) sigma^2 c^2) for the shared scalar
    // operator B = sigma (Lap_h - c delta_center), and lower blocks
    //   (n, n') = -S(n', n) K + T2(n, n') diag(sigma^2 c^2),  n > n',
    // where K = F^T diag(sigma^2 c) B collapses the center-row couplings
    // (F maps free nodes to their interior rows).  The sweeps of the block
    // Gauss-Seidel preconditioner only ever apply K, B^T B, diagonals, and
    // the N scalar-sized LDLT factors of the diagonal blocks.
    std::vector<Eigen::Triplet<double>> strips, ktrips;
    strips.reserve(static_cast<std::size_t>(grid.interior_idx.size()) * 6);
    ktrips.reserve(static_cast<std::size_t>(free_nodes_.size()) * 6);
    row_block = 0;
    for (int idx : grid.interior_idx) {
        const double sigma = std::sqrt(what_.values[idx]) * grid.h;
        const int stenc[5] = {idx, idx - Nx, idx + Nx, idx - 1, idx + 1};
        const double coef[5] = {-4.0 * inv_h2 - c_.values[idx], inv_h2, inv_h2, inv_h2, inv_h2};
        const double kw = sigma * sigma * c_.values[idx];
        for (int s = 0; s < 5; ++s)
            if (free_pos_[stenc[s]] >= 0) {
                strips.emplace_back(row_block, free_pos_[stenc[s]], sigma * coef[s]);
                if (free_pos_[idx] >= 0)
                    ktrips.emplace_back(free_pos_[idx], free_pos_[stenc[s]], kw * coef[s]);
            }
        ++row_block;
    }
    const int n_free = static_cast<int>(free_nodes_.size());
    Eigen::SparseMatrix<double> B(static_cast<int>(grid.interior_idx.size()), n_free);
    B.setFromTriplets(strips.begin(), strips.end());
    scalar_normal_ = Eigen::SparseMatrix<double>(B.transpose()) * B;
    K_.resize(n_free, n_free);
    K_.setFromTriplets(ktrips.begin(), ktrips.end());

    csig2_.resize(n_free);
    for (int k = 0; k < n_free; ++k) {
        const int idx = free_nodes_[k];
        const double sigma2 = what_.values[idx] * grid.h * grid.h;
        csig2_[k] = sigma2 * c_.values[idx] * c_.values[idx];
    }
    T2_.setZero(N_, N_);
    for (int b2 = 0; b2 < N_; ++b2)
        for (int a = 0; a < N_; ++a)
            for (int m = 0; m < b2; ++m) T2_(a, b2) += S_(m, a) * S_(m, b2);
    s2_ = T2_.diagonal();

    mode_ldlt_.resize(N_);
    for (int n = 0; n < N_; ++n) {
        Eigen::SparseMatrix<double> shift(n_free, n_free);
        std::vector<Eigen::Triplet<double>> dt;
        dt.reserve(n_free);
        for (int k = 0; k < n_free; ++k) dt.emplace_back(k, k, s2_[n] * csig2_[k] + eps_);
        shift.setFromTriplets(dt.begin(), dt.end());
        const Eigen::SparseMatrix<double> block = scalar_normal_ + shift;
        mode_ldlt_[n] = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
        mode_ldlt_[n]->compute(block);
        require(mode_ldlt_[n]->info() == Eigen::Success, ErrorCategory::solver,
                "QrmSolver: preconditioner factorization failed for mode " +
                    std::to_string(n + 1));
    }
}

Eigen::VectorXd QrmSolver::sgs_precond(const Eigen::VectorXd& r) const {
    const int n_free = static_cast<int>(free_nodes_.size());
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        rmap(r.data(), n_free, N_);
    const Eigen::MatrixXd R = rmap;

    // Forward sweep: (D + L) y = r, modes in increasing order.
    Eigen::MatrixXd Y(n_free, N_);
    for (int n = 0; n < N_; ++n) {
        Eigen::VectorXd acc = R.col(n);
        if (n > 0) {
            const Eigen::VectorXd wy = Y.leftCols(n) * S_.col(n).head(n);
            const Eigen::VectorXd wt = Y.leftCols(n) * T2_.row(n).head(n).transpose();
            acc += K_ * wy - csig2_.cwiseProduct(wt);
        }
        Y.col(n) = mode_ldlt_[n]->solve(acc);
    }

    // Backward sweep: (D + L^T) z = D y, modes in decreasing order.
    Eigen::MatrixXd Z(n_free, N_);
    for (int n = N_ - 1; n >= 0; --n) {
        Eigen::VectorXd acc = scalar_normal_ * Y.col(n);
        acc += (s2_[n] * csig2_.array() + eps_).matrix().cwiseProduct(Y.col(n));
        const int tail = N_ - 1 - n;
        if (tail > 0) {
            const Eigen::VectorXd wz = Z.rightCols(tail) * S_.row(n).tail(tail).transpose();
            const Eigen::VectorXd wt = Z.rightCols(tail) * T2_.col(n).tail(tail);
            acc += K_.transpose() * wz - csig2_.cwiseProduct(wt);
        }
        Z.col(n) = mode_ldlt_[n]->solve(acc);
    }

    Eigen::VectorXd z(r.size());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        z.data(), n_free, N_) = Z;
    return z;
}

Eigen::VectorXd QrmSolver::solve_normal(const Eigen::VectorXd& atb,
                                        const Eigen::VectorXd* x0) const {
    if (ldlt_) {
        Eigen::VectorXd x = ldlt_->solve(atb);
        require(ldlt_->info() == Eigen::Success, ErrorCategory::solver,
                "QrmSolver: back-substitution failed");
        return x;
    }

    const auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        Eigen::VectorXd out = A_.transpose() * (A_ * v);
        if (eps_ > 0.0) out += eps_ * v;
        return out;
    };
    const auto precond = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
        return sgs_precond(r);
    };

    const double target = 1e-10 * atb.norm();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(atb.size());
    last_iterations_ = 0;
    if (atb.norm() == 0.0) return x;
    Eigen::VectorXd r = atb;
    if (x0 != nullptr && x0->size() == atb.size() && x0->allFinite()) {
        x = *x0;
        r -= apply(x);
    }
    Eigen::VectorXd z = precond(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    const int max_iters = 5000;
    for (int it = 0; it < max_iters; ++it) {
        if (r.norm() <= target) return x;
        const Eigen::VectorXd Ap = apply(p);
        const double alpha = rz / p.dot(Ap);
        require(std::isfinite(alpha), ErrorCategory::solver,
                "QrmSolver: conjugate gradient broke down");
        x += alpha * p;
        r -= alpha * Ap;
        z = precond(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        last_iterations_ = it + 1;
    }
    require(r.norm() <= target, ErrorCategory::solver,
            "QrmSolver: conjugate gradient did not reach 1e-10 in 5000 iterations");
    return x;
}

void QrmSolver::scatter_constraints(const BoundaryData& data, Eigen::MatrixXd& V) const {
    require(data.G.rows() == static_cast<Eigen::Index>(grid_->boundary_idx.size()) &&
                data.Q.rows() == data.G.rows() && data.G.cols() == N_ && data.Q.cols() == N_,
            ErrorCategory::invalid_argument,
            "QrmSolver: boundary data shape does not match the grid/mode count");
    V = constrained_values(*grid_, bpos_, layer_src_, data, N_);
}

VectorFieldN QrmSolver::solve(const BoundaryData& data, const VectorFieldN& rhs,
                              const VectorFieldN* warm) const {
    const bool has_rhs = rhs.values.size() != 0;
    if (has_rhs) {
        require(rhs.grid == grid_ && rhs.values.cols() == N_, ErrorCategory::invalid_argument,
                "QrmSolver: rhs must live on the solver grid with one column per mode");
        validate_finite(rhs, "QrmSolver: rhs");
    }
    require(data.G.allFinite() && data.Q.allFinite(), ErrorCategory::nonfinite,
            "QrmSolver: boundary data contains non-finite entries");

    Eigen::MatrixXd V;
    scatter_constraints(data, V);

    // Residual of the constrained part: stencil and mode coupling applied to
    // the known entries only (free entries are zero here).
    VectorFieldN known{grid_, V};
    VectorFieldN kres = residual(known, rhs);

    const int n_int = static_cast<int>(grid_->interior_idx.size());
    Eigen::VectorXd b(static_cast<Eigen::Index>(n_int) * N_);
    int row_block = 0;
    for (int idx : grid_->interior_idx) {
        const double sigma = std::sqrt(what_.values[idx]) * grid_->h;
        for (int m = 0; m < N_; ++m) b[row_block * N_ + m] = -sigma * kres.values(idx, m);
        ++row_block;
    }

    Eigen::VectorXd x0;
    if (warm != nullptr && warm->grid == grid_ && warm->values.cols() == N_) {
        x0.resize(static_cast<Eigen::Index>(free_nodes_.size()) * N_);
        for (int k = 0; k < static_cast<int>(free_nodes_.size()); ++k)
            for (int m = 0; m < N_; ++m) x0[k * N_ + m] = warm->values(free_nodes_[k], m);
    }
    Eigen::VectorXd x = solve_normal(A_.transpose() * b, x0.size() != 0 ? &x0 : nullptr);

    for (int k = 0; k < static_cast<int>(free_nodes_.size()); ++k)
        for (int m = 0; m < N_; ++m) V(free_nodes_[k], m) = x[k * N_ + m];
    VectorFieldN out{grid_, std::move(V)};
    validate_finite(out, "QrmSolver: solution");
    return out;
}

VectorFieldN QrmSolver::residual(const VectorFieldN& V, const VectorFieldN& rhs) const {
    require(V.grid == grid_ && V.values.cols() == N_, ErrorCategory::invalid_argument,
            "QrmSolver: field must live on the solver grid with one column per mode");
    const bool has_rhs = rhs.values.size() != 0;
    if (has_rhs)
        require(rhs.grid == grid_ && rhs.values.cols() == N_, ErrorCategory::invalid_argument,
                "QrmSolver: rhs must live on the solver grid with one column per mode");

    VectorFieldN res{grid_, Eigen::MatrixXd::Zero(grid_->count(), N_)};
    ScalarField mode = make_field(*grid_);
    for (int m = 0; m < N_; ++m) {
        mode.values = V.values.col(m);
        res.values.col(m) = laplacian(mode).values;
    }
    Eigen::MatrixXd coupling = V.values * S_.transpose();
    for (int idx : grid_->interior_idx) {
        res.values.row(idx) -= c_.values[idx] * coupling.row(idx);
        if (has_rhs) res.values.row(idx) += rhs.values.row(idx);
    }
    for (int idx : grid_->boundary_idx) res.values.row(idx).setZero();
    return res;
}

double QrmSolver::objective(const VectorFieldN& V, const VectorFieldN& rhs) const {
    VectorFieldN res = residual(V, rhs);
    const double h2 = grid_->h * grid_->h;
    double J = 0.0;
    for (int idx : grid_->interior_idx)
        J += what_.values[idx] * res.values.row(idx).squaredNorm() * h2;
    if (eps_ > 0.0)
        for (int idx : free_nodes_) J += eps_ * V.values.row(idx).squaredNorm();
    return J;
}

VectorFieldN solve_linearized(const LinearizedProblem& prob) {
    require(prob.grid != nullptr, ErrorCategory::invalid_argument,
            "solve_linearized: grid is not set");
    QrmSolver solver(*prob.grid, prob.S, prob.c, prob.W, prob.eps);
    return solver.solve(prob.data, prob.rhs);
}

VectorFieldN nonlinear_rhs(const VectorFieldN& U_prev, const TimeBasis& basis,
                           const Nonlinearity& F) {
    require(U_prev.grid != nullptr, ErrorCategory::invalid_argument,
            "nonlinear_rhs: field has no grid");
    const Grid2D& g = *U_prev.grid;
    const int N = static_cast<int>(U_prev.values.cols());
    require(N == basis.N, ErrorCategory::invalid_argument,
            "nonlinear_rhs: mode count does not match the basis");
    validate_finite(U_prev, "nonlinear_rhs: U_prev");

    VectorFieldN rhs{&g, Eigen::MatrixXd::Zero(g.count(), N)};
    if (!F.f) return rhs;

    const int nq = static_cast<int>(basis.quad_nodes.size());
    Eigen::MatrixXd psi(nq, N);
    for (int k = 0; k < nq; ++k)
        for (int n = 1; n <= N; ++n) psi(k, n - 1) = eval_basis(basis, n, basis.quad_nodes[k]);

    Eigen::MatrixXd gx(g.count(), N), gy(g.count(), N);
    ScalarField mode = make_field(g);
    for (int m = 0; m < N; ++m) {
        mode.values = U_prev.values.col(m);
        auto grad = gradient(mode);
        gx.col(m) = grad.first.values;
        gy.col(m) = grad.second.values;
    }

    const Eigen::MatrixXd ut = U_prev.values * psi.transpose(); // (node, quad)
    const Eigen::MatrixXd p1t = gx * psi.transpose();
    const Eigen::MatrixXd p2t = gy * psi.transpose();

    Eigen::MatrixXd fvals(g.count(), nq);
    for (int idx = 0; idx < g.count(); ++idx) {
        const double x = g.x(g.i_of(idx)), y = g.y(g.j_of(idx));
        for (int k = 0; k < nq; ++k) {
            const double v = F.eval(x, y, basis.quad_nodes[k], ut(idx, k), p1t(idx, k),
                                    p2t(idx, k));
            require(std::isfinite(v), ErrorCategory::nonfinite,
                    "nonlinear_rhs: F is not finite at (" + format_full(x) + ", " +
                        format_full(y) + "), t = " + format_full(basis.quad_nodes[k]));
            fvals(idx, k) = v * basis.quad_weights[k];
        }
    }
    rhs.values = fvals * psi;
    return rhs;
}

} // namespace isp
