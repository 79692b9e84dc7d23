#pragma once

#include "isp/grid_fd.hpp"

#include <functional>
#include <string>
#include <vector>

namespace isp {

/// Smooth cutoff: 1 for z <= 1, 0 for z >= 2, monotone C-infinity blend
/// (exp(-1/w) partition of unity) in between.
double chi_cutoff(double z);

/// Right-hand side nonlinearity F(x, y, t, s, p1, p2) with optional smooth
/// truncation: when trunc_bound = M*sqrt(T) > 0 the evaluator returns
/// chi((|s| + |(p1,p2)|)/trunc_bound) * F, which vanishes identically once
/// |s| + |p| >= 2*trunc_bound.
struct Nonlinearity {
    std::function<double(double, double, double, double, double, double)> f;
    double trunc_bound = 0.0;

    double eval(double x, double y, double t, double s, double p1, double p2) const;
};

/// Forward problem setup on the big grid (c.grid == p.grid).
///
/// R_omega > 0 selects the measurement square (-R_omega, R_omega)^2: the
/// initial condition must then vanish on and outside a one-cell margin of
/// it, and the solver keeps time snapshots on an aligned subgrid with
/// `snap_margin` extra cells around Omega so that traces (including the
/// outward normal derivative) can be extracted later.  R_omega = 0 runs the
/// plain forward solve and keeps only the final state.
struct ForwardConfig {
    double T = 0.0;
    double dt = 0.0;    ///< <= 0 selects the automatic stable step
    int n_t_out = 256;  ///< uniform output intervals on [0,T] (even)
    double R_omega = 0.0;
    int snap_margin = 4;
    ScalarField c;
    ScalarField p;
    Nonlinearity F;
};

struct ForwardSolution {
    Grid2D snap_grid;                    ///< populated when R_omega > 0
    std::vector<double> times;           ///< n_t_out + 1 uniform times
    std::vector<Eigen::VectorXd> frames; ///< u on snap_grid at each time
    Eigen::VectorXd final_full;          ///< u(.,T) on the big grid
    double dt = 0.0;                     ///< actual step used
};

/// Lateral Cauchy data sampled on the boundary of the measurement square.
struct CauchyTraces {
    std::vector<double> times;
    Eigen::MatrixXd g; ///< (boundary node, time): Dirichlet trace
    Eigen::MatrixXd q; ///< (boundary node, time): outward normal derivative
    double delta = 0.0;
};

/// Scaled "peaks" conductivity c(x,y) = 1 + peaks(x,y)/50.
ScalarField peaks_coefficient(const Grid2D& grid);

/// Explicit scheme u^{j+1} = u^j + (dt/c) (Lap_h u^j + F(x,t_j,u^j,grad_h u^j)),
/// zero Dirichlet data on the big-grid boundary at every step.
ForwardSolution solve_forward(const ForwardConfig& cfg);

/// Restricts the stored snapshots to omega's boundary: g by node lookup,
/// q by the second-order outward one-sided stencil.
CauchyTraces extract_traces(const ForwardSolution& sol, const Grid2D& omega);

/// Multiplicative noise a -> a (1 + delta * U[-1,1]) applied entrywise, g
/// first then q, each scanned node-major; delta = 0 returns the input
/// unchanged.  Deterministic for a fixed seed.
CauchyTraces add_noise(const CauchyTraces& traces, double delta, std::uint64_t seed);

/// CSV with columns face,node_x,node_y,t,g,q; one row per (boundary node,
/// time), node-major, nodes in omega.boundary_idx order.
void write_traces_csv(const CauchyTraces& traces, const Grid2D& omega,
                      const std::string& path);
CauchyTraces read_traces_csv(const Grid2D& omega, const std::string& path);

} // namespace isp
