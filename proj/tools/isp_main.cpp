#include <CLI11.hpp>

#include "isp/carleman.hpp"
#include "isp/errors.hpp"
#include "isp/experiments.hpp"
#include "isp/time_basis.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

using namespace isp;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_outcome(const std::string& name, const TestOutcome& out) {
    std::printf("%s: %d iteration%s (%s), wall %.1f s\n", name.c_str(), out.report.K,
                out.report.K == 1 ? "" : "s", out.report.stop_reason.c_str(),
                out.wall_seconds);
    if (out.report.theta_hat > 0.0)
        std::printf("  fitted contraction rate theta_hat = %.3f\n", out.report.theta_hat);
    for (const auto& m : out.regions) {
        if (m.contrast > 0.0)
            std::printf("  %-8s max = %.4f  (true %g, rel err %.2f%%)\n", m.label.c_str(),
                        m.max_comp, m.contrast, 100.0 * m.rel_err);
        else
            std::printf("  %-8s mean |p| = %.4f  (void)\n", m.label.c_str(), m.mean_abs);
    }
}

int cmd_simulate(const std::string& config_path) {
    const auto cfg = load_config(config_path);
    const auto tc = test_case_from_config(cfg);
    std::printf("forward simulation: case %s, Nx = %d, T = %g\n", tc.name.c_str(), cfg.Nx,
                cfg.T);
    auto prep = prepare_experiment(tc, cfg, /*with_solver=*/false);
    const auto traces = add_noise(prep.traces, cfg.delta, cfg.seed);

    const auto dir = std::filesystem::path(cfg.out_dir) / tc.name;
    std::filesystem::create_directories(dir);
    write_traces_csv(traces, *prep.omega, (dir / "traces.csv").string());
    write_field_csv(prep.p_true, (dir / "p_true.csv").string());
    std::printf("wrote %s and %s (delta = %g, seed = %llu)\n",
                (dir / "traces.csv").c_str(), (dir / "p_true.csv").c_str(), cfg.delta,
                static_cast<unsigned long long>(cfg.seed));
    return 0;
}

int cmd_reconstruct(const std::string& config_path) {
    const auto cfg = load_config(config_path);
    const auto tc = test_case_from_config(cfg);
    std::printf("reconstruction: case %s, Nx = %d, N = %d, delta = %g, seed = %llu\n",
                tc.name.c_str(), cfg.Nx, cfg.N, cfg.delta,
                static_cast<unsigned long long>(cfg.seed));
    const auto out = run_test(tc, cfg);
    print_outcome(tc.name, out);
    std::printf("artifacts in %s\n",
                (std::filesystem::path(cfg.out_dir) / tc.name).c_str());
    return 0;
}

int cmd_paper_tests(const std::string& scale, const std::string& out_override) {
    auto cfg = scale == "paper" ? paper_config() : desk_config();
    if (!out_override.empty()) cfg.out_dir = out_override;
    const std::vector<int> N_list =
        scale == "paper" ? std::vector<int>{15, 35, 40} : std::vector<int>{10, 20, 25};
    std::filesystem::create_directories(cfg.out_dir);
    std::printf("scale %s: Nx = %d, N = %d, delta = %g, seed = %llu\n", scale.c_str(),
                cfg.Nx, cfg.N, cfg.delta, static_cast<unsigned long long>(cfg.seed));

    // Test 1 shares one forward solve between the cut-off panel and the
    // inversion.
    const auto t0 = std::chrono::steady_clock::now();
    auto prep = prepare_experiment(make_test_case("test1"), cfg);
    std::printf("test1 forward data ready (%.1f s)\n", seconds_since(t0));

    const auto rows = choose_cutoff(prep, N_list);
    write_cutoff_csv(rows, (std::filesystem::path(cfg.out_dir) / "cutoff.csv").string());
    std::printf("cut-off panel:\n");
    for (const auto& r : rows) std::printf("  N = %-3d  |e_N|_inf = %.6e\n", r.N, r.e_inf);

    const auto out1 = invert_experiment(prep, cfg.delta, cfg.seed);
    write_outcome(prep, out1, (std::filesystem::path(cfg.out_dir) / "test1").string());
    print_outcome("test1", out1);

    for (const char* name : {"test2", "test3"}) {
        const auto out = run_test(make_test_case(name), cfg);
        print_outcome(name, out);
    }
    std::printf("artifacts in %s, total %.1f s\n", cfg.out_dir.c_str(), seconds_since(t0));
    return 0;
}

int cmd_basis_check(int N, double T, int n_quad) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto basis = build_basis(N, T, n_quad);
    const auto stiff = stiffness_matrix(basis);

    // Gram matrix through the basis quadrature.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t k = 0; k < basis.quad_nodes.size(); ++k) {
        Eigen::VectorXd psi(N);
        for (int n = 1; n <= N; ++n) psi[n - 1] = eval_basis(basis, n, basis.quad_nodes[k]);
        gram += basis.quad_weights[k] * psi * psi.transpose();
    }
    const double ortho = (gram - Eigen::MatrixXd::Identity(N, N)).cwiseAbs().maxCoeff();
    const double diag = (stiff.S.diagonal().array() - 1.0).abs().maxCoeff();
    double lower = 0.0;
    for (int m = 0; m < N; ++m)
        for (int n = 0; n < m; ++n) lower = std::max(lower, std::abs(stiff.S(m, n)));

    std::printf("N = %d, T = %g, n_quad = %d\n", N, T, n_quad);
    std::printf("orthonormality defect   = %.3e\n", ortho);
    std::printf("unit-diagonal defect    = %.3e\n", diag);
    std::printf("lower-triangle defect   = %.3e\n", lower);
    std::printf("|S|_1 = %.1f, phi condition estimate = %.3e\n",
                stiff.S.cwiseAbs().colwise().sum().maxCoeff(), phi_condition_estimate(basis));
    std::printf("elapsed = %.2f s\n", seconds_since(t0));

    if (ortho < 1e-10 && diag < 1e-10 && lower < 1e-10) {
        std::printf("all structure defects below 1e-10\n");
        return 0;
    }
    std::printf("structure defects exceed 1e-10\n");
    return static_cast<int>(ErrorCategory::conditioning);
}

int cmd_carleman_diag(const std::string& config_path) {
    const auto cfg = load_config(config_path);
    const auto grid = build_inner_grid(cfg);

    // Polynomial bump ((x^2-1)(y^2-1))^2 scaled to the unit square of the
    // configured domain: vanishes with its normal derivative on the boundary.
    ScalarField v = make_field(grid);
    for (int i = 0; i < grid.Nx; ++i) {
        const double x = grid.x(i) / grid.R;
        for (int j = 0; j < grid.Nx; ++j) {
            const double y = grid.y(j) / grid.R;
            const double a = (x * x - 1.0) * (y * y - 1.0);
            v.values[grid.index(i, j)] = a * a;
        }
    }

    auto params = cfg.carleman;
    const std::vector<double> lambdas = {10.0, 20.0, 40.0, 80.0};
    const auto rows = carleman_diagnostic(v, params, lambdas);

    std::filesystem::create_directories(cfg.out_dir);
    const auto path = std::filesystem::path(cfg.out_dir) / "carleman_diag.csv";
    write_diagnostic_csv(rows, path.string());

    std::printf("carleman diagnostic (beta = %g, b = %g, x0 = (%g, %g), Nx = %d):\n",
                params.beta, params.b, params.x0x, params.x0y, grid.Nx);
    std::printf("  %-8s %-14s %-14s %s\n", "lambda", "lhs", "rhs0", "ratio");
    for (const auto& r : rows)
        std::printf("  %-8g %-14.6e %-14.6e %.6e\n", r.lambda, r.lhs, r.rhs0, r.ratio);
    std::printf("wrote %s\n", path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"source reconstruction for nonlinear parabolic equations from "
                 "lateral Cauchy data"};
    app.require_subcommand(1);

    std::string config_path;
    std::string scale = "desk";
    std::string out_override;
    int basis_N = 40;
    double basis_T = 1.5;
    int basis_quad = 256;

    auto* sim = app.add_subcommand("simulate", "run the forward model, write Cauchy traces");
    sim->add_option("--config", config_path, "configuration file")->required();

    auto* rec = app.add_subcommand("reconstruct", "recover the source for the configured case");
    rec->add_option("--config", config_path, "configuration file")->required();

    auto* pap =
        app.add_subcommand("paper-tests", "reproduce tests 1-3 and the cut-off panel");
    pap->add_option("--scale", scale, "desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    pap->add_option("--out", out_override, "output directory (default out)");

    auto* bas = app.add_subcommand("basis-check", "report basis structure defects");
    bas->add_option("--N", basis_N, "number of modes")->required();
    bas->add_option("--T", basis_T, "final time (default 1.5)");
    bas->add_option("--n-quad", basis_quad, "quadrature nodes (default 256)");

    auto* car =
        app.add_subcommand("carleman-diag", "weighted-estimate diagnostic on a bump field");
    car->add_option("--config", config_path, "configuration file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(config_path);
        if (rec->parsed()) return cmd_reconstruct(config_path);
        if (pap->parsed()) return cmd_paper_tests(scale, out_override);
        if (bas->parsed()) return cmd_basis_check(basis_N, basis_T, basis_quad);
        if (car->parsed()) return cmd_carleman_diag(config_path);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
