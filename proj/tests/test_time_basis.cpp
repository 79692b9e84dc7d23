#include <doctest.h>

#include "isp/errors.hpp"
#include "isp/time_basis.hpp"

#include <cmath>
#include <cstring>

using namespace isp;

namespace {

// Quadrature inner product of two basis functions through the public
// evaluators, so the check does not reuse the constructor's internals.
double inner(const TimeBasis& b, int i, int j, bool d_first = false) {
    double acc = 0.0;
    for (std::size_t q = 0; q < b.quad_nodes.size(); ++q) {
        const double t = b.quad_nodes[q];
        const double fi = d_first ? eval_basis_derivative(b, i, t) : eval_basis(b, i, t);
        acc += b.quad_weights[q] * fi * eval_basis(b, j, t);
    }
    return acc;
}

} // namespace

TEST_CASE("N=1 closed form: Psi_1 = phi_1 / sqrt(sinh T)") {
    const auto b = build_basis(1, 1.5);
    // ||phi_1||^2 = int_0^T e^{2(t-T/2)} dt = sinh(T)
    CHECK(eval_basis(b, 1, 0.75) == doctest::Approx(1.0 / std::sqrt(std::sinh(1.5))).epsilon(1e-12));
    CHECK(eval_basis(b, 1, 0.75) == doctest::Approx(0.68530463342605862).epsilon(1e-12));
    CHECK(inner(b, 1, 1) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("orthonormality defect below 1e-10 at N=40") {
    const auto b = build_basis(40, 1.5);
    double defect = 0.0;
    for (int i = 1; i <= 40; ++i)
        for (int j = i; j <= 40; ++j)
            defect = std::max(defect, std::abs(inner(b, i, j) - (i == j ? 1.0 : 0.0)));
    CHECK(defect < 1e-10);
}

TEST_CASE("no Psi_n' is identically zero") {
    const auto b = build_basis(5, 1.5);
    for (int n = 1; n <= 5; ++n) {
        double e = 0.0;
        for (std::size_t q = 0; q < b.quad_nodes.size(); ++q) {
            const double d = eval_basis_derivative(b, n, b.quad_nodes[q]);
            e += b.quad_weights[q] * d * d;
        }
        CHECK(e > 0.5); // far from zero, not merely positive
    }
}

TEST_CASE("phi coefficient matrix is lower triangular with positive diagonal") {
    const auto b = build_basis(8, 1.5);
    for (int m = 0; m < 8; ++m) {
        CHECK(b.coeffs(m, m) > 0.0);
        for (int n = m + 1; n < 8; ++n) CHECK(b.coeffs(m, n) == 0.0);
    }
    // frozen from a 60-digit Gram-Schmidt on the raw phi family
    CHECK(b.coeffs(1, 0) == doctest::Approx(-0.63456099472063973).epsilon(1e-10));
    CHECK(b.coeffs(1, 1) == doctest::Approx(1.931142607286319).epsilon(1e-10));
}

TEST_CASE("Psi_2 at T/2 reduces to its phi_1 coefficient") {
    const auto b = build_basis(4, 1.5);
    CHECK(eval_basis(b, 2, 0.75) == doctest::Approx(b.coeffs(1, 0)).epsilon(1e-12));
}

TEST_CASE("evaluation argument validation") {
    const auto b = build_basis(3, 1.5);
    CHECK_THROWS_AS(eval_basis(b, 0, 0.5), Error);
    CHECK_THROWS_AS(eval_basis(b, 4, 0.5), Error);
    CHECK_THROWS_AS(eval_basis(b, 1, -0.01), Error);
    CHECK_THROWS_AS(eval_basis_derivative(b, 1, 1.51), Error);
    CHECK_THROWS_AS(build_basis(0, 1.5), Error);
    CHECK_THROWS_AS(build_basis(3, -1.0), Error);
}

TEST_CASE("derivative identity Psi_1' = Psi_1") {
    const auto b = build_basis(6, 1.5);
    for (double t : {0.0, 0.4, 0.75, 1.2, 1.5})
        CHECK(eval_basis_derivative(b, 1, t) ==
              doctest::Approx(eval_basis(b, 1, t)).epsilon(1e-12));
}

TEST_CASE("derivative matches central differences at second order") {
    const auto b = build_basis(6, 1.5);
    const double t = 0.3;
    auto cd_err = [&](double h) {
        const double cd = (eval_basis(b, 5, t + h) - eval_basis(b, 5, t - h)) / (2.0 * h);
        return std::abs(cd - eval_basis_derivative(b, 5, t));
    };
    const double e1 = cd_err(1e-3), e2 = cd_err(5e-4);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
    // frozen 60-digit values
    CHECK(eval_basis(b, 5, 0.3) == doctest::Approx(-0.95093508349849322).epsilon(1e-10));
    CHECK(eval_basis_derivative(b, 5, 0.3) == doctest::Approx(-2.0148322333489845).epsilon(1e-10));
}

TEST_CASE("stiffness matrix structure and frozen entries") {
    const auto b = build_basis(3, 1.5);
    const auto st = stiffness_matrix(b);
    for (int m = 0; m < 3; ++m) {
        CHECK(std::abs(st.S(m, m) - 1.0) < 1e-10);
        for (int n = 0; n < m; ++n) CHECK(std::abs(st.S(m, n)) < 1e-10);
    }
    CHECK(st.S.determinant() == doctest::Approx(1.0).epsilon(1e-8));
    // strictly-upper entries, frozen from 60-digit quadrature
    CHECK(st.S(0, 1) == doctest::Approx(2.8179330958728748).epsilon(1e-9));
    CHECK(st.S(0, 2) == doctest::Approx(2.5208725343685085).epsilon(1e-9));
    CHECK(st.S(1, 2) == doctest::Approx(5.0749521448960419).epsilon(1e-9));
    // Psi_n(0), frozen
    CHECK(st.psi0[0] == doctest::Approx(0.32371498726891207).epsilon(1e-10));
    CHECK(st.psi0[1] == doctest::Approx(-0.98390077177144806).epsilon(1e-10));
    CHECK(st.psi0[2] == doctest::Approx(1.5211662233543292).epsilon(1e-10));
}

TEST_CASE("int Psi_1' Psi_2 vanishes (lower-triangle rule, derivative on the low index)") {
    const auto b = build_basis(4, 1.5);
    CHECK(std::abs(inner(b, 1, 2, /*d_first=*/true)) < 1e-10);
    // the mirrored orientation is NOT zero; its by-parts value is
    // Psi_2(T)Psi_1(T) - Psi_2(0)Psi_1(0)
    const double parts = eval_basis(b, 2, 1.5) * eval_basis(b, 1, 1.5) -
                         eval_basis(b, 2, 0.0) * eval_basis(b, 1, 0.0);
    CHECK(inner(b, 2, 1, true) == doctest::Approx(parts).epsilon(1e-10));
    CHECK(std::abs(inner(b, 2, 1, true)) > 1.0);
}

TEST_CASE("stiffness entries agree with a 10x-node quadrature oracle") {
    const auto b = build_basis(10, 1.5, 256);
    const auto fine = build_basis(10, 1.5, 2560);
    const auto s1 = stiffness_matrix(b), s2 = stiffness_matrix(fine);
    CHECK((s1.S - s2.S).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("construction refuses under-resolved quadrature loudly") {
    CHECK_THROWS_AS(build_basis(40, 1.5, 48), Error);
    try {
        build_basis(40, 1.5, 48);
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::conditioning);
    }
}

TEST_CASE("construction is deterministic") {
    const auto a = build_basis(25, 1.5);
    const auto b = build_basis(25, 1.5);
    CHECK(std::memcmp(a.leg_coeffs.data(), b.leg_coeffs.data(),
                      sizeof(double) * 25 * 25) == 0);
    CHECK(std::memcmp(a.coeffs.data(), b.coeffs.data(), sizeof(double) * 25 * 25) == 0);
}
