#pragma once

#include "isp/carleman.hpp"
#include "isp/contraction.hpp"
#include "isp/forward_sim.hpp"
#include "isp/qrm_solver.hpp"
#include "isp/spectral_projection.hpp"
#include "isp/time_basis.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace isp {

/// Everything one experiment needs, grouped the way the config file is.
/// Member defaults are the nominal full-scale constants; paper_config() and
/// desk_config() return the tuned presets the benchmark suite actually runs
/// (same grids, fewer modes and a gentler weight -- see README).
struct ExperimentConfig {
    // [domain]
    double R = 1.0;       ///< measurement half-width, Omega = (-R, R)^2
    double R_outer = 6.0; ///< requested big-domain half-width (rounded up to the grid)
    int Nx = 80;          ///< nodes per side on Omega
    // [time]
    double T = 1.5;
    int n_t_out = 256; ///< uniform snapshot intervals on [0, T]
    // [basis]
    int N = 40;
    int n_quad = 256;
    // [carleman]
    CarlemanParams carleman;
    // [iteration]
    int K_max = 8;
    double tol = 1e-3;
    double eps = 0.0; ///< optional normal-system regularization (0 or [1e-12, 1e-8])
    // [noise]
    double delta = 0.2;
    std::uint64_t seed = 1;
    // [forward]
    double dt = 0.0; ///< 0 = automatic stable step
    int snap_margin = 4;
    // [test]
    std::string test_case = "test1"; ///< test1 | test2 | test3 | custom
    std::string custom_p;            ///< source id, custom case only
    std::string custom_F;            ///< nonlinearity id, custom case only
    // [io]
    std::string out_dir = "out";
    bool dump_iterates = false;
};

ExperimentConfig paper_config();
ExperimentConfig desk_config();

/// Parses the sectioned key = value file (full-line # or ; comments) on top
/// of the member defaults.  Unknown sections or keys, malformed values, and
/// invariant violations all throw ErrorCategory::config with the file line.
ExperimentConfig load_config(const std::string& path);

/// The invariant check load_config ends with, callable on built configs.
void validate_config(const ExperimentConfig& cfg);

Grid2D build_inner_grid(const ExperimentConfig& cfg);

/// Big grid aligned with the inner one: same h, Omega nodes a subset.  The
/// requested R_outer is rounded *up* to the nearest aligned value R + k h.
Grid2D build_outer_grid(const ExperimentConfig& cfg);

/// One labelled constant-contrast region of a true source.
struct InclusionSpec {
    std::string label;
    std::function<bool(double, double)> inside;
    double contrast = 0.0; ///< 0 marks a void checked by mean, not max
};

/// Named source p(x): the union of the inclusions (voids contribute 0).
struct SourceSpec {
    std::string id;
    std::vector<InclusionSpec> regions;

    double eval(double x, double y) const;
};

/// ids: ellipse8 | three_disks | ring1
SourceSpec make_source(const std::string& id);

/// ids: zero | linear | linear_sqrt_grad | logistic_grad_split | grad_norm
Nonlinearity make_nonlinearity(const std::string& id);

struct TestCase {
    std::string name;
    SourceSpec source;
    Nonlinearity F;
};

/// test1 = ellipse8 + linear_sqrt_grad, test2 = three_disks +
/// logistic_grad_split, test3 = ring1 + grad_norm; "custom" must be
/// assembled from the registries directly.
TestCase make_test_case(const std::string& name);

/// The TestCase a config selects (resolves custom_p/custom_F for "custom").
TestCase test_case_from_config(const ExperimentConfig& cfg);

ScalarField sample_source(const SourceSpec& source, const Grid2D& grid);

/// Heavy seed-independent stage: grids, basis, forward simulation, traces,
/// snapshots restricted to Omega, and (optionally) the linearized solver.
/// One prepared experiment serves every noise draw and outer iteration.
/// Move-only: fields point at the owned grids.
struct PreparedExperiment {
    ExperimentConfig cfg;
    TestCase test;
    std::unique_ptr<Grid2D> omega;
    TimeBasis basis;
    StiffnessMatrix S;
    ScalarField c;      ///< on omega
    ScalarField W;      ///< on omega
    ScalarField p_true; ///< on omega
    CauchyTraces traces;
    std::vector<Eigen::VectorXd> omega_frames; ///< snapshots on omega
    std::unique_ptr<QrmSolver> solver;         ///< null when with_solver = false

    PreparedExperiment() = default;
    PreparedExperiment(PreparedExperiment&&) = default;
    PreparedExperiment& operator=(PreparedExperiment&&) = default;
    PreparedExperiment(const PreparedExperiment&) = delete;
    PreparedExperiment& operator=(const PreparedExperiment&) = delete;
};

PreparedExperiment prepare_experiment(const TestCase& test, const ExperimentConfig& cfg,
                                      bool with_solver = true);

/// Per-region reconstruction quality: max over the true support against the
/// contrast for inclusions, mean |p_comp| for voids (rel_err = nan there).
struct RegionMetric {
    std::string label;
    double contrast = 0.0;
    double max_comp = 0.0;
    double mean_abs = 0.0;
    double rel_err = 0.0;
};

struct TestOutcome {
    ScalarField p_comp; ///< on the prepared omega grid
    IterationReport report;
    std::vector<RegionMetric> regions;
    double wall_seconds = 0.0;
};

/// Light per-seed stage: integrate the traces, perturb them, iterate.
/// dump_dir, when non-empty, receives per-iteration U/p fields.
TestOutcome invert_experiment(const PreparedExperiment& prep, double delta,
                              std::uint64_t seed, const std::string& dump_dir = "");

/// p_true.csv, p_comp.csv, report.csv, summary.csv under dir (created).
void write_outcome(const PreparedExperiment& prep, const TestOutcome& outcome,
                   const std::string& dir);

/// prepare + invert + write into cfg.out_dir/<test name>.
TestOutcome run_test(const TestCase& test, const ExperimentConfig& cfg);

struct CutoffRow {
    int N = 0;
    double e_inf = 0.0; ///< |e_N|_{L_inf(Omega)} at t = 0
};

/// Truncation-error panel over mode counts, from the prepared snapshots:
/// e_N(x) = |p_true(x) - sum_{n<=N} u_n(x) Psi_n(0)| with noiseless u_n.
std::vector<CutoffRow> choose_cutoff(const PreparedExperiment& prep,
                                     const std::vector<int>& N_list);

/// CSV with columns N,e_inf.
void write_cutoff_csv(const std::vector<CutoffRow>& rows, const std::string& path);

} // namespace isp
