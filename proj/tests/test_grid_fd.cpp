#include <doctest.h>

#include "isp/errors.hpp"
#include "isp/grid_fd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

using namespace isp;

namespace {

ScalarField fill(const Grid2D& g, double (*fn)(double, double)) {
    ScalarField f = make_field(g);
    for (int i = 0; i < g.Nx; ++i)
        for (int j = 0; j < g.Nx; ++j) f.values[g.index(i, j)] = fn(g.x(i), g.y(j));
    return f;
}

double interior_sup_diff(const Grid2D& g, const ScalarField& a, double (*oracle)(double, double)) {
    double e = 0.0;
    for (int idx : g.interior_idx)
        e = std::max(e, std::abs(a.values[idx] - oracle(g.x(g.i_of(idx)), g.y(g.j_of(idx)))));
    return e;
}

} // namespace

TEST_CASE("build_grid geometry and index sets") {
    const auto g = build_grid(1.0, 80);
    CHECK(g.h == doctest::Approx(2.0 / 79.0).epsilon(1e-15));
    CHECK(g.h * (g.Nx - 1) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(g.boundary_idx.size() == 4u * 79u);
    CHECK(g.boundary_idx.size() + g.interior_idx.size() == 80u * 80u);

    const auto tiny = build_grid(1.0, 3);
    CHECK(tiny.boundary_idx.size() == 8u);
    CHECK(tiny.interior_idx.size() == 1u);
    CHECK(tiny.interior_idx[0] == tiny.index(1, 1));
    CHECK(tiny.x(0) == -1.0);
    CHECK(tiny.x(2) == doctest::Approx(1.0).epsilon(1e-15));

    std::set<int> bset(g.boundary_idx.begin(), g.boundary_idx.end());
    for (int idx : g.interior_idx) CHECK(bset.count(idx) == 0u);
    std::set<int> iset(g.interior_idx.begin(), g.interior_idx.end());
    for (int idx : g.first_layer_idx) CHECK(iset.count(idx) == 1u);

    CHECK_THROWS_AS(build_grid(1.0, 2), Error);
    CHECK_THROWS_AS(build_grid(-1.0, 10), Error);
}

TEST_CASE("laplacian is exact on quadratics and zero on linears") {
    const auto g = build_grid(1.0, 21);
    const auto quad = laplacian(fill(g, [](double x, double y) { return x * x + y * y; }));
    for (int idx : g.interior_idx) CHECK(quad.values[idx] == doctest::Approx(4.0).epsilon(1e-11));
    const auto lin = laplacian(fill(g, [](double x, double y) { return 3.0 * x - 2.0 * y + 1.0; }));
    for (int idx : g.interior_idx) CHECK(std::abs(lin.values[idx]) < 1e-11);
    for (int idx : g.boundary_idx) CHECK(quad.values[idx] == 0.0);
}

TEST_CASE("laplacian converges at second order on a sine product") {
    auto fn = [](double x, double y) { return std::sin(M_PI * x) * std::sin(M_PI * y); };
    auto lap = [](double x, double y) {
        return -2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y);
    };
    const auto g1 = build_grid(1.0, 41);
    const auto g2 = build_grid(1.0, 81);
    const double e1 = interior_sup_diff(g1, laplacian(fill(g1, fn)), lap);
    const double e2 = interior_sup_diff(g2, laplacian(fill(g2, fn)), lap);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("gradient is exact on linears and second order on cubics") {
    const auto g = build_grid(1.0, 21);
    auto [gx, gy] = gradient(fill(g, [](double x, double y) { return 3.0 * x - 2.0 * y; }));
    for (int idx = 0; idx < g.count(); ++idx) {
        CHECK(gx.values[idx] == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(gy.values[idx] == doctest::Approx(-2.0).epsilon(1e-12));
    }
    auto [cx, cy] = gradient(fill(g, [](double, double) { return 7.5; }));
    CHECK(cx.values.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(cy.values.cwiseAbs().maxCoeff() < 1e-12);

    auto cube = [](double x, double) { return x * x * x; };
    auto dcube = [](double x, double) { return 3.0 * x * x; };
    const auto g2 = build_grid(1.0, 41);
    const double e1 = interior_sup_diff(g, gradient(fill(g, cube)).first, dcube);
    const double e2 = interior_sup_diff(g2, gradient(fill(g2, cube)).first, dcube);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("normal_trace directions, corner rule, quadratic exactness") {
    const auto small = build_grid(1.0, 11); // h = 0.2
    const auto big = build_grid(2.0, 21);   // same h, offset 5
    CHECK(subgrid_offset(big, small) == 5);

    const auto ux = fill(big, [](double x, double) { return x; });
    const auto t = normal_trace(ux, small);
    for (std::size_t b = 0; b < small.boundary_idx.size(); ++b) {
        const int idx = small.boundary_idx[b];
        const int i = small.i_of(idx), j = small.j_of(idx);
        double expect = 0.0;
        if (i == 0)
            expect = -1.0; // corners land here via the x-face rule
        else if (i == small.Nx - 1)
            expect = 1.0;
        else
            expect = 0.0;
        (void)j;
        CHECK(t[b] == doctest::Approx(expect).epsilon(1e-12));
    }

    const auto uq = fill(big, [](double x, double y) { return x * x + y * y; });
    const auto tq = normal_trace(uq, small);
    for (std::size_t b = 0; b < small.boundary_idx.size(); ++b)
        CHECK(tq[b] == doctest::Approx(2.0).epsilon(1e-10));

    const auto uc = fill(big, [](double, double) { return 4.2; });
    CHECK(normal_trace(uc, small).cwiseAbs().maxCoeff() < 1e-12);

    const auto bad = build_grid(2.0, 31); // h mismatch
    CHECK_THROWS_AS(normal_trace(fill(bad, [](double x, double) { return x; }), small), Error);
    try {
        subgrid_offset(bad, small);
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::misalignment);
    }
}

TEST_CASE("discrete Green identity for compactly supported fields") {
    const auto g = build_grid(1.0, 41);
    auto bump = [](double x, double y) {
        const double a = (1.0 - x * x) * (1.0 - y * y);
        return a * a;
    };
    auto bump3 = [](double x, double y) {
        const double a = (1.0 - x * x) * (1.0 - y * y);
        return a * a * a;
    };
    const auto u = fill(g, bump), v = fill(g, bump3);
    const auto lu = laplacian(u), lv = laplacian(v);
    double s1 = 0.0, s2 = 0.0;
    for (int idx : g.interior_idx) {
        s1 += lu.values[idx] * v.values[idx];
        s2 += u.values[idx] * lv.values[idx];
    }
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-8));
}

TEST_CASE("field CSV round-trips bit-exactly") {
    const auto g = build_grid(1.0, 7);
    ScalarField f = make_field(g);
    for (int idx = 0; idx < g.count(); ++idx) f.values[idx] = M_PI * (idx + 1) / 3.0;
    const std::string path = "test_field_roundtrip.csv";
    write_field_csv(f, path);
    const auto back = read_field_csv(g, path);
    for (int idx = 0; idx < g.count(); ++idx) CHECK(back.values[idx] == f.values[idx]);

    VectorFieldN vf;
    vf.grid = &g;
    vf.values.resize(g.count(), 3);
    for (int idx = 0; idx < g.count(); ++idx)
        for (int n = 0; n < 3; ++n) vf.values(idx, n) = std::sqrt(2.0) * (idx + 1) * (n + 1);
    const std::string vpath = "test_vfield_roundtrip.csv";
    write_vector_field_csv(vf, vpath);
    const auto vback = read_vector_field_csv(g, vpath);
    CHECK((vback.values - vf.values).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
    std::remove(vpath.c_str());
}

TEST_CASE("validate_finite flags NaN") {
    const auto g = build_grid(1.0, 5);
    ScalarField f = make_field(g, 1.0);
    f.values[3] = std::nan("");
    CHECK_THROWS_AS(validate_finite(f, "test"), Error);
    try {
        validate_finite(f, "test");
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::nonfinite);
    }
}
