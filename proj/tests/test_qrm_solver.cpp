#include <doctest.h>

#include "isp/errors.hpp"
#include "isp/qrm_solver.hpp"
#include "isp/rng.hpp"

#include <cmath>
#include <limits>

using namespace isp;

namespace {

ScalarField synth_c(const Grid2D& g) {
    ScalarField c = make_field(g);
    for (int idx = 0; idx < g.count(); ++idx) {
        const double x = g.x(g.i_of(idx)), y = g.y(g.j_of(idx));
        c.values[idx] = 1.0 + 0.3 * std::sin(2.0 * x) * std::cos(y);
    }
    return c;
}

ScalarField synth_w(const Grid2D& g) {
    ScalarField w = make_field(g);
    for (int idx = 0; idx < g.count(); ++idx) {
        const double x = g.x(g.i_of(idx)), y = g.y(g.j_of(idx));
        w.values[idx] = std::exp(x + 0.5 * y) + 0.25;
    }
    return w;
}

VectorFieldN manufactured(const Grid2D& g, int N) {
    VectorFieldN U{&g, Eigen::MatrixXd(g.count(), N)};
    for (int idx = 0; idx < g.count(); ++idx) {
        const double x = g.x(g.i_of(idx)), y = g.y(g.j_of(idx));
        for (int m = 0; m < N; ++m)
            U.values(idx, m) = std::sin(1.0 + m + 3.0 * x) * std::cos(2.0 * y + m);
    }
    return U;
}

/// Cauchy data read off a nodal field: G from the boundary ring, Q from the
/// first-order relation the constraint encoding uses (corner-adjacent layer
/// nodes read the x-face neighbour).
BoundaryData data_from_field(const Grid2D& g, const Eigen::MatrixXd& U) {
    const int N = static_cast<int>(U.cols());
    const int nb = static_cast<int>(g.boundary_idx.size());
    std::vector<int> bpos(g.count(), -1);
    for (int b = 0; b < nb; ++b) bpos[g.boundary_idx[b]] = b;
    BoundaryData data;
    data.G.resize(nb, N);
    data.Q = Eigen::MatrixXd::Zero(nb, N);
    for (int b = 0; b < nb; ++b) data.G.row(b) = U.row(g.boundary_idx[b]);
    for (int idx : g.first_layer_idx) {
        const int i = g.i_of(idx), j = g.j_of(idx);
        int src;
        if (i == 1)
            src = g.index(0, j);
        else if (i == g.Nx - 2)
            src = g.index(g.Nx - 1, j);
        else if (j == 1)
            src = g.index(i, 0);
        else
            src = g.index(i, g.Nx - 1);
        data.Q.row(bpos[src]) = (U.row(src) - U.row(idx)) / g.h;
    }
    return data;
}

VectorFieldN rough_rhs(const Grid2D& g, int N) {
    VectorFieldN rhs{&g, Eigen::MatrixXd(g.count(), N)};
    for (int idx = 0; idx < g.count(); ++idx) {
        const double x = g.x(g.i_of(idx)), y = g.y(g.j_of(idx));
        for (int m = 0; m < N; ++m)
            rhs.values(idx, m) = std::cos(3.0 * x + m) + x * std::sin(5.0 * y - m);
    }
    return rhs;
}

} // namespace

TEST_CASE("solver reproduces a manufactured exact solution") {
    const auto g = build_grid(1.0, 20);
    const auto basis = build_basis(3, 1.5);
    const auto S = stiffness_matrix(basis);
    const auto c = synth_c(g);
    const auto W = synth_w(g);
    QrmSolver solver(g, S, c, W);
    CHECK(solver.modes() == 3);
    CHECK(solver.last_iterations() == 0);

    const auto Ustar = manufactured(g, 3);
    VectorFieldN rhs{&g, -solver.residual(Ustar, VectorFieldN{}).values};
    const auto data = data_from_field(g, Ustar.values);

    const auto V = solver.solve(data, rhs);
    const double scale = Ustar.values.cwiseAbs().maxCoeff();
    const double err = (V.values - Ustar.values).cwiseAbs().maxCoeff() / scale;
    CHECK(err < 1e-6); // observed 2e-12 on the direct path
    CHECK(solver.objective(V, rhs) < 1e-12);

    // bitwise determinism, same instance and a fresh one
    const auto V2 = solver.solve(data, rhs);
    CHECK((V2.values - V.values).cwiseAbs().maxCoeff() == 0.0);
    QrmSolver again(g, S, c, W);
    const auto V3 = again.solve(data, rhs);
    CHECK((V3.values - V.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero data and empty rhs give the zero minimizer") {
    const auto g = build_grid(1.0, 12);
    const auto basis = build_basis(2, 1.5);
    const auto S = stiffness_matrix(basis);
    QrmSolver solver(g, S, synth_c(g), synth_w(g));
    BoundaryData data;
    data.G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.boundary_idx.size()), 2);
    data.Q = data.G;
    const auto V = solver.solve(data, VectorFieldN{});
    CHECK(V.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(solver.objective(V, VectorFieldN{}) == 0.0);
}

TEST_CASE("solution is the constrained minimizer of the weighted functional") {
    const auto g = build_grid(1.0, 14);
    const int N = 3;
    const auto basis = build_basis(N, 1.5);
    const auto S = stiffness_matrix(basis);
    QrmSolver solver(g, S, synth_c(g), synth_w(g));

    const auto Ustar = manufactured(g, N);
    const auto data = data_from_field(g, Ustar.values);
    const auto rhs = rough_rhs(g, N); // inconsistent: J stays positive
    const auto V = solver.solve(data, rhs);
    const double J0 = solver.objective(V, rhs);
    CHECK(J0 > 0.0);

    // constraints hold exactly (no penalty residue)
    std::vector<int> bpos(g.count(), -1);
    for (int b = 0; b < static_cast<int>(g.boundary_idx.size()); ++b)
        bpos[g.boundary_idx[b]] = b;
    for (int idx : g.boundary_idx)
        CHECK((V.values.row(idx) - data.G.row(bpos[idx])).cwiseAbs().maxCoeff() == 0.0);
    for (int idx : g.first_layer_idx) {
        const int i = g.i_of(idx), j = g.j_of(idx);
        int src;
        if (i == 1)
            src = g.index(0, j);
        else if (i == g.Nx - 2)
            src = g.index(g.Nx - 1, j);
        else if (j == 1)
            src = g.index(i, 0);
        else
            src = g.index(i, g.Nx - 1);
        const Eigen::RowVectorXd want = data.G.row(bpos[src]) - g.h * data.Q.row(bpos[src]);
        CHECK((V.values.row(idx) - want).cwiseAbs().maxCoeff() == 0.0);
    }

    // every feasible perturbation raises J
    UniformPm1 rng(7);
    VectorFieldN trial{&g, V.values};
    for (int p = 0; p < 100; ++p) {
        trial.values = V.values;
        for (int i = 2; i <= g.Nx - 3; ++i)
            for (int j = 2; j <= g.Nx - 3; ++j)
                for (int m = 0; m < N; ++m)
                    trial.values(g.index(i, j), m) += 1e-3 * rng.next();
        CHECK(solver.objective(trial, rhs) >= J0 - 1e-9 * (1.0 + J0));
    }

    // the directional derivative vanishes along feasible directions
    for (int d = 0; d < 5; ++d) {
        VectorFieldN dir{&g, Eigen::MatrixXd::Zero(g.count(), N)};
        for (int i = 2; i <= g.Nx - 3; ++i)
            for (int j = 2; j <= g.Nx - 3; ++j)
                for (int m = 0; m < N; ++m) dir.values(g.index(i, j), m) = rng.next();
        const double delta = 1e-3;
        VectorFieldN plus{&g, V.values + delta * dir.values};
        VectorFieldN minus{&g, V.values - delta * dir.values};
        const double dd =
            (solver.objective(plus, rhs) - solver.objective(minus, rhs)) / (2.0 * delta);
        CHECK(std::abs(dd) < 1e-7 * (1.0 + J0));
    }
}

TEST_CASE("rescaling the weight leaves the minimizer unchanged") {
    const auto g = build_grid(1.0, 14);
    const auto basis = build_basis(3, 1.5);
    const auto S = stiffness_matrix(basis);
    const auto c = synth_c(g);
    const auto W = synth_w(g);
    ScalarField W1000 = W;
    W1000.values *= 1000.0;

    const auto data = data_from_field(g, manufactured(g, 3).values);
    const auto rhs = rough_rhs(g, 3);
    const auto Va = QrmSolver(g, S, c, W).solve(data, rhs);
    const auto Vb = QrmSolver(g, S, c, W1000).solve(data, rhs);
    const double scale = std::max(1.0, Va.values.cwiseAbs().maxCoeff());
    CHECK((Va.values - Vb.values).cwiseAbs().maxCoeff() / scale < 1e-10);
}

TEST_CASE("iterative path agrees with the direct factorization") {
    const auto g = build_grid(1.0, 16);
    const int N = 3;
    const auto basis = build_basis(N, 1.5);
    const auto S = stiffness_matrix(basis);
    const auto c = synth_c(g);
    const auto W = synth_w(g);
    const auto data = data_from_field(g, manufactured(g, N).values);
    const auto rhs = rough_rhs(g, N);

    QrmSolver direct(g, S, c, W);
    QrmSolver iterative(g, S, c, W, 0.0, /*direct_limit=*/0);
    const auto Vd = direct.solve(data, rhs);
    const auto Vi = iterative.solve(data, rhs);
    CHECK(direct.last_iterations() == 0);
    CHECK(iterative.last_iterations() > 0);
    const double scale = std::max(1.0, Vd.values.cwiseAbs().maxCoeff());
    CHECK((Vi.values - Vd.values).cwiseAbs().maxCoeff() / scale < 1e-8);

    // a warm start changes the route, not the destination
    const auto Vw = iterative.solve(data, rhs, &rhs);
    CHECK((Vw.values - Vd.values).cwiseAbs().maxCoeff() / scale < 1e-8);
    const auto Vx = iterative.solve(data, rhs, &Vi);
    CHECK(iterative.last_iterations() == 0); // already converged
    CHECK((Vx.values - Vi.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("small epsilon regularization barely moves an exact solution") {
    const auto g = build_grid(1.0, 14);
    const auto basis = build_basis(2, 1.5);
    const auto S = stiffness_matrix(basis);
    QrmSolver plain(g, S, synth_c(g), synth_w(g));
    QrmSolver rescued(g, S, synth_c(g), synth_w(g), 1e-10);

    const auto Ustar = manufactured(g, 2);
    VectorFieldN rhs{&g, -plain.residual(Ustar, VectorFieldN{}).values};
    const auto data = data_from_field(g, Ustar.values);
    const auto V = rescued.solve(data, rhs);
    const double scale = Ustar.values.cwiseAbs().maxCoeff();
    CHECK((V.values - Ustar.values).cwiseAbs().maxCoeff() / scale < 1e-5);
}

TEST_CASE("solve_linearized matches a hand-built solver") {
    const auto g = build_grid(1.0, 12);
    const auto basis = build_basis(2, 1.5);
    LinearizedProblem prob;
    prob.grid = &g;
    prob.S = stiffness_matrix(basis);
    prob.c = synth_c(g);
    prob.W = synth_w(g);
    prob.rhs = rough_rhs(g, 2);
    prob.data = data_from_field(g, manufactured(g, 2).values);
    const auto Va = solve_linearized(prob);
    const auto Vb = QrmSolver(g, prob.S, prob.c, prob.W).solve(prob.data, prob.rhs);
    CHECK((Va.values - Vb.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nonlinear_rhs: no nonlinearity means a zero right-hand side") {
    const auto g = build_grid(1.0, 10);
    const auto basis = build_basis(3, 1.5);
    const auto U = manufactured(g, 3);
    const auto rhs = nonlinear_rhs(U, basis, Nonlinearity{});
    CHECK(rhs.grid == &g);
    CHECK(rhs.values.rows() == g.count());
    CHECK(rhs.values.cols() == 3);
    CHECK(rhs.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nonlinear_rhs: F = s reproduces the modal coefficients") {
    const auto g = build_grid(1.0, 10);
    const int N = 4;
    const auto basis = build_basis(N, 1.5);
    Nonlinearity F;
    F.f = [](double, double, double, double s, double, double) { return s; };

    // single occupied mode: the component survives by orthonormality
    VectorFieldN one{&g, Eigen::MatrixXd::Zero(g.count(), N)};
    for (int idx = 0; idx < g.count(); ++idx)
        one.values(idx, 1) = 0.5 + g.x(g.i_of(idx)) * g.y(g.j_of(idx));
    auto rhs = nonlinear_rhs(one, basis, F);
    CHECK((rhs.values - one.values).cwiseAbs().maxCoeff() < 1e-9);

    // general field: the projection is the identity on the span
    const auto U = manufactured(g, N);
    rhs = nonlinear_rhs(U, basis, F);
    CHECK((rhs.values - U.values).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("nonlinear_rhs matches a brute-force quadrature oracle") {
    const auto g = build_grid(1.0, 10);
    const int N = 4;
    const double T = 1.5;
    const auto basis = build_basis(N, T, /*n_quad=*/2048);
    VectorFieldN U = manufactured(g, N);
    U.values *= 0.7;
    Nonlinearity F;
    F.f = [](double, double, double, double s, double p1, double p2) {
        return s * (1.0 - s) + 0.5 * (std::abs(p1) - std::abs(p2));
    };
    const auto rhs = nonlinear_rhs(U, basis, F);

    // gradients of the modal fields, same stencils the module uses
    Eigen::MatrixXd gx(g.count(), N), gy(g.count(), N);
    ScalarField mode = make_field(g);
    for (int m = 0; m < N; ++m) {
        mode.values = U.values.col(m);
        const auto grad = gradient(mode);
        gx.col(m) = grad.first.values;
        gy.col(m) = grad.second.values;
    }

    const int samples[5] = {g.index(3, 4), g.index(5, 5), g.index(1, 2), g.index(0, 7),
                            g.index(8, 3)};
    const int M = 20000; // Simpson intervals
    const double ht = T / M;
    for (const int idx : samples) {
        const double x = g.x(g.i_of(idx)), y = g.y(g.j_of(idx));
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(N);
        for (int k = 0; k <= M; ++k) {
            const double t = k * ht;
            double u = 0.0, p1 = 0.0, p2 = 0.0;
            Eigen::VectorXd psi(N);
            for (int n = 1; n <= N; ++n) {
                psi[n - 1] = eval_basis(basis, n, t);
                u += U.values(idx, n - 1) * psi[n - 1];
                p1 += gx(idx, n - 1) * psi[n - 1];
                p2 += gy(idx, n - 1) * psi[n - 1];
            }
            const double w = (k == 0 || k == M) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
            acc += (w * ht / 3.0) * F.f(x, y, t, u, p1, p2) * psi;
        }
        for (int m = 0; m < N; ++m)
            CHECK(rhs.values(idx, m) == doctest::Approx(acc[m]).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("nonlinear_rhs points at the node where F blows up") {
    const auto g = build_grid(1.0, 10);
    const auto basis = build_basis(2, 1.5);
    const auto U = manufactured(g, 2);
    Nonlinearity F;
    F.f = [](double x, double, double, double, double, double) {
        return x > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    };
    try {
        nonlinear_rhs(U, basis, F);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::nonfinite);
        CHECK(std::string(e.what()).find("nonlinear_rhs: F is not finite") != std::string::npos);
        CHECK(std::string(e.what()).find("t = ") != std::string::npos);
    }
}

TEST_CASE("solver validates its inputs") {
    const auto g = build_grid(1.0, 12);
    const auto g_other = build_grid(1.0, 10);
    const auto basis = build_basis(2, 1.5);
    const auto S = stiffness_matrix(basis);
    const auto c = synth_c(g);
    const auto W = synth_w(g);

    // weight must be strictly positive
    ScalarField W_bad = W;
    W_bad.values[5] = 0.0;
    CHECK_THROWS_AS(QrmSolver(g, S, c, W_bad), Error);

    // fields from another grid are rejected
    CHECK_THROWS_AS(QrmSolver(g, S, synth_c(g_other), W), Error);

    QrmSolver solver(g, S, c, W);
    const auto data = data_from_field(g, manufactured(g, 2).values);

    // rhs living elsewhere
    const auto rhs_other = rough_rhs(g_other, 2);
    try {
        solver.solve(data, rhs_other);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::invalid_argument);
    }

    // misshapen data
    BoundaryData bad = data;
    bad.Q = bad.Q.topRows(3).eval();
    CHECK_THROWS_AS(solver.solve(bad, VectorFieldN{}), Error);

    // non-finite data
    BoundaryData nan_data = data;
    nan_data.G(0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        solver.solve(nan_data, VectorFieldN{});
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::nonfinite);
    }
}
