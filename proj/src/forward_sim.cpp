#include "isp/forward_sim.hpp"

#include "isp/csv.hpp"
#include "isp/errors.hpp"
#include "isp/rng.hpp"

#include <cmath>

namespace isp {

double chi_cutoff(double z) {
    if (z <= 1.0) return 1.0;
    if (z >= 2.0) return 0.0;
    const double a = std::exp(-1.0 / (2.0 - z)); // ->0 as z->2
    const double b = std::exp(-1.0 / (z - 1.0)); // ->0 as z->1
    return a / (a + b);
}

double Nonlinearity::eval(double x, double y, double t, double s, double p1, double p2) const {
    if (!f) return 0.0;
    double v = f(x, y, t, s, p1, p2);
    if (trunc_bound > 0.0) v *= chi_cutoff((std::abs(s) + std::hypot(p1, p2)) / trunc_bound);
    return v;
}

ScalarField peaks_coefficient(const Grid2D& grid) {
    ScalarField c = make_field(grid);
    for (int i = 0; i < grid.Nx; ++i) {
        const double x = grid.x(i);
        for (int j = 0; j < grid.Nx; ++j) {
            const double y = grid.y(j);
            const double peaks = 3.0 * (1.0 - x) * (1.0 - x) * std::exp(-x * x - (y + 1.0) * (y + 1.0)) -
                                 10.0 * (x / 5.0 - x * x * x - std::pow(y, 5)) * std::exp(-x * x - y * y) -
                                 (1.0 / 3.0) * std::exp(-(x + 1.0) * (x + 1.0) - y * y);
            c.values[grid.index(i, j)] = 1.0 + peaks / 50.0;
        }
    }
    return c;
}

ForwardSolution solve_forward(const ForwardConfig& cfg) {
    require(cfg.c.grid != nullptr && cfg.c.grid == cfg.p.grid, ErrorCategory::invalid_argument,
            "solve_forward: c and p must live on the same grid");
    const Grid2D& G = *cfg.c.grid;
    validate_finite(cfg.c, "solve_forward: c");
    validate_finite(cfg.p, "solve_forward: p");
    require(std::isfinite(cfg.T) && cfg.T > 0.0, ErrorCategory::invalid_argument,
            "solve_forward: T must be positive");
    require(cfg.n_t_out >= 2 && cfg.n_t_out % 2 == 0, ErrorCategory::invalid_argument,
            "solve_forward: n_t_out must be even and >= 2");
    const double c_min = cfg.c.values.minCoeff();
    require(c_min > 0.0, ErrorCategory::invalid_argument,
            "solve_forward: c must be strictly positive");

    ForwardSolution sol;
    const int Nb = G.Nx;
    const double h = G.h;

    Eigen::VectorXd u = cfg.p.values;
    for (int idx : G.boundary_idx) {
        require(std::abs(u[idx]) <= 1e-12, ErrorCategory::invalid_argument,
                "solve_forward: p must vanish on the outer boundary");
        u[idx] = 0.0;
    }

    int snap_off = -1;
    if (cfg.R_omega > 0.0) {
        require(cfg.R_omega < G.R, ErrorCategory::invalid_argument,
                "solve_forward: R_omega must be smaller than the big-grid half-width");
        const double steps = (G.R - cfg.R_omega) / h;
        require(std::abs(steps - std::round(steps)) <= 1e-9, ErrorCategory::misalignment,
                "solve_forward: (R_big - R_omega)/h is not an integer");
        const int k = static_cast<int>(std::round(steps));
        require(cfg.snap_margin >= 2 && k >= cfg.snap_margin, ErrorCategory::misalignment,
                "solve_forward: snapshot margin does not fit between Omega and the big boundary");
        sol.snap_grid = build_grid(cfg.R_omega + cfg.snap_margin * h,
                                   (G.Nx - 2 * k) + 2 * cfg.snap_margin);
        snap_off = k - cfg.snap_margin;
        // compact support inside Omega with a one-cell margin
        const double lim = cfg.R_omega - h * (1.0 - 1e-9);
        for (int idx = 0; idx < G.count(); ++idx) {
            const double x = G.x(G.i_of(idx)), y = G.y(G.j_of(idx));
            if (std::max(std::abs(x), std::abs(y)) >= lim)
                require(u[idx] == 0.0, ErrorCategory::invalid_argument,
                        "solve_forward: p is not compactly supported inside the measurement square");
        }
    }

    const double dt_bound = c_min * h * h / 4.0;
    double dt0 = 0.9 * dt_bound;
    if (cfg.dt > 0.0) {
        require(cfg.dt <= dt_bound * (1.0 + 1e-12), ErrorCategory::cfl,
                "solve_forward: dt " + format_full(cfg.dt) + " violates the stability bound " +
                    format_full(dt_bound));
        dt0 = cfg.dt;
    }
    const int spf = std::max(1, static_cast<int>(std::ceil(cfg.T / (cfg.n_t_out * dt0) - 1e-12)));
    const long n_steps = static_cast<long>(cfg.n_t_out) * spf;
    const double dt = cfg.T / static_cast<double>(n_steps);
    sol.dt = dt;

    auto snapshot = [&](double t) {
        sol.times.push_back(t);
        if (snap_off < 0) return;
        Eigen::VectorXd frame(sol.snap_grid.count());
        for (int i = 0; i < sol.snap_grid.Nx; ++i)
            for (int j = 0; j < sol.snap_grid.Nx; ++j)
                frame[sol.snap_grid.index(i, j)] = u[G.index(i + snap_off, j + snap_off)];
        sol.frames.push_back(std::move(frame));
    };
    snapshot(0.0);

    Eigen::VectorXd unew = Eigen::VectorXd::Zero(G.count());
    const double inv_h2 = 1.0 / (h * h);
    const double inv_2h = 1.0 / (2.0 * h);
    const bool has_f = static_cast<bool>(cfg.F.f);
    const double* cv = cfg.c.values.data();

    for (long step = 0; step < n_steps; ++step) {
        const double t = step * dt;
        const double* up = u.data();
        double* un = unew.data();
        for (int i = 1; i < Nb - 1; ++i) {
            const double x = G.x(i);
            const int row = i * Nb;
            for (int j = 1; j < Nb - 1; ++j) {
                const int c = row + j;
                const double lap =
                    (up[c - Nb] + up[c + Nb] + up[c - 1] + up[c + 1] - 4.0 * up[c]) * inv_h2;
                double rhs = lap;
                if (has_f) {
                    const double p1 = (up[c + Nb] - up[c - Nb]) * inv_2h;
                    const double p2 = (up[c + 1] - up[c - 1]) * inv_2h;
                    rhs += cfg.F.eval(x, G.y(j), t, up[c], p1, p2);
                }
                un[c] = up[c] + dt / cv[c] * rhs;
            }
        }
        u.swap(unew);
        require(u.allFinite(), ErrorCategory::nonfinite,
                "solve_forward: non-finite state at step " + std::to_string(step + 1) + " (t=" +
                    format_full((step + 1) * dt) + ")");
        if ((step + 1) % spf == 0) snapshot((step + 1) * dt);
    }
    sol.final_full = u;
    return sol;
}

CauchyTraces extract_traces(const ForwardSolution& sol, const Grid2D& omega) {
    require(!sol.frames.empty(), ErrorCategory::invalid_argument,
            "extract_traces: solution has no stored snapshots (R_omega was 0?)");
    const Grid2D& S = sol.snap_grid;
    const int k = subgrid_offset(S, omega);
    const int nb = static_cast<int>(omega.boundary_idx.size());
    const int nt = static_cast<int>(sol.times.size());
    CauchyTraces tr;
    tr.times = sol.times;
    tr.g.resize(nb, nt);
    tr.q.resize(nb, nt);
    for (int f = 0; f < nt; ++f) {
        ScalarField frame;
        frame.grid = &S;
        frame.values = sol.frames[f];
        for (int b = 0; b < nb; ++b) {
            const int idx = omega.boundary_idx[b];
            tr.g(b, f) = frame.values[S.index(omega.i_of(idx) + k, omega.j_of(idx) + k)];
        }
        tr.q.col(f) = normal_trace(frame, omega);
    }
    require(tr.g.allFinite() && tr.q.allFinite(), ErrorCategory::nonfinite,
            "extract_traces: non-finite trace values");
    return tr;
}

CauchyTraces add_noise(const CauchyTraces& traces, double delta, std::uint64_t seed) {
    require(delta >= 0.0 && std::isfinite(delta), ErrorCategory::invalid_argument,
            "add_noise: delta must be non-negative");
    if (delta == 0.0) return traces;
    CauchyTraces out = traces;
    UniformPm1 rng(seed);
    for (Eigen::Index b = 0; b < out.g.rows(); ++b)
        for (Eigen::Index t = 0; t < out.g.cols(); ++t) out.g(b, t) *= 1.0 + delta * rng.next();
    for (Eigen::Index b = 0; b < out.q.rows(); ++b)
        for (Eigen::Index t = 0; t < out.q.cols(); ++t) out.q(b, t) *= 1.0 + delta * rng.next();
    out.delta = delta;
    return out;
}

namespace {

const char* face_of(const Grid2D& g, int idx) {
    const int i = g.i_of(idx), j = g.j_of(idx);
    if (i == 0) return "x-";
    if (i == g.Nx - 1) return "x+";
    return j == 0 ? "y-" : "y+";
}

} // namespace

void write_traces_csv(const CauchyTraces& traces, const Grid2D& omega, const std::string& path) {
    require(traces.g.rows() == static_cast<Eigen::Index>(omega.boundary_idx.size()),
            ErrorCategory::invalid_argument, "write_traces_csv: trace/grid mismatch");
    CsvWriter csv(path);
    csv.header({"face", "node_x", "node_y", "t", "g", "q"});
    for (Eigen::Index b = 0; b < traces.g.rows(); ++b) {
        const int idx = omega.boundary_idx[static_cast<std::size_t>(b)];
        for (std::size_t f = 0; f < traces.times.size(); ++f) {
            csv.cell(std::string(face_of(omega, idx)));
            csv.cell(omega.x(omega.i_of(idx)));
            csv.cell(omega.y(omega.j_of(idx)));
            csv.cell(traces.times[f]);
            csv.cell(traces.g(b, static_cast<Eigen::Index>(f)));
            csv.cell(traces.q(b, static_cast<Eigen::Index>(f)));
            csv.end_row();
        }
    }
}

CauchyTraces read_traces_csv(const Grid2D& omega, const std::string& path) {
    const CsvTable tab = read_csv(path);
    require(tab.columns == std::vector<std::string>({"face", "node_x", "node_y", "t", "g", "q"}),
            ErrorCategory::io, "read_traces_csv: unexpected header in " + path);
    const std::size_t nb = omega.boundary_idx.size();
    require(tab.rows.size() % nb == 0, ErrorCategory::io,
            "read_traces_csv: row count is not a multiple of the boundary node count");
    const std::size_t nt = tab.rows.size() / nb;
    CauchyTraces tr;
    tr.times.resize(nt);
    tr.g.resize(nb, nt);
    tr.q.resize(nb, nt);
    for (std::size_t b = 0; b < nb; ++b) {
        const int idx = omega.boundary_idx[b];
        for (std::size_t f = 0; f < nt; ++f) {
            const auto& row = tab.rows[b * nt + f];
            require(std::abs(std::stod(row[1]) - omega.x(omega.i_of(idx))) < 1e-9 &&
                        std::abs(std::stod(row[2]) - omega.y(omega.j_of(idx))) < 1e-9,
                    ErrorCategory::io, "read_traces_csv: node order mismatch in " + path);
            const double t = std::stod(row[3]);
            if (b == 0)
                tr.times[f] = t;
            else
                require(t == tr.times[f], ErrorCategory::io,
                        "read_traces_csv: inconsistent time stamps in " + path);
            tr.g(b, f) = std::stod(row[4]);
            tr.q(b, f) = std::stod(row[5]);
        }
    }
    require(tr.g.allFinite() && tr.q.allFinite(), ErrorCategory::nonfinite,
            "read_traces_csv: non-finite trace values in " + path);
    return tr;
}

} // namespace isp
