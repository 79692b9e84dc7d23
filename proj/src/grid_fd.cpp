#include "isp/grid_fd.hpp"

#include "isp/csv.hpp"
#include "isp/errors.hpp"

#include <cmath>

namespace isp {

Grid2D build_grid(double R, int Nx) {
    require(std::isfinite(R) && R > 0.0, ErrorCategory::invalid_argument,
            "build_grid: R must be finite and positive");
    require(Nx >= 3, ErrorCategory::invalid_argument, "build_grid: Nx must be >= 3");
    Grid2D g;
    g.R = R;
    g.Nx = Nx;
    g.h = 2.0 * R / (Nx - 1);
    for (int i = 0; i < Nx; ++i) {
        for (int j = 0; j < Nx; ++j) {
            const int idx = g.index(i, j);
            if (g.on_boundary(i, j)) {
                g.boundary_idx.push_back(idx);
            } else {
                g.interior_idx.push_back(idx);
                if (i == 1 || j == 1 || i == Nx - 2 || j == Nx - 2)
                    g.first_layer_idx.push_back(idx);
            }
        }
    }
    return g;
}

ScalarField make_field(const Grid2D& grid, double fill) {
    ScalarField f;
    f.grid = &grid;
    f.values = Eigen::VectorXd::Constant(grid.count(), fill);
    return f;
}

void validate_finite(const ScalarField& field, const std::string& what) {
    require(field.grid != nullptr && field.values.size() == field.grid->count(),
            ErrorCategory::invalid_argument, what + ": field/grid size mismatch");
    require(field.values.allFinite(), ErrorCategory::nonfinite,
            what + ": field contains non-finite values");
}

void validate_finite(const VectorFieldN& field, const std::string& what) {
    require(field.grid != nullptr && field.values.rows() == field.grid->count(),
            ErrorCategory::invalid_argument, what + ": field/grid size mismatch");
    require(field.values.allFinite(), ErrorCategory::nonfinite,
            what + ": field contains non-finite values");
}

ScalarField laplacian(const ScalarField& field) {
    const Grid2D& g = *field.grid;
    ScalarField out = make_field(g);
    const double inv_h2 = 1.0 / (g.h * g.h);
    const Eigen::VectorXd& u = field.values;
    for (int i = 1; i < g.Nx - 1; ++i) {
        for (int j = 1; j < g.Nx - 1; ++j) {
            const int c = g.index(i, j);
            out.values[c] = (u[c - g.Nx] + u[c + g.Nx] + u[c - 1] + u[c + 1] - 4.0 * u[c]) * inv_h2;
        }
    }
    return out;
}

std::pair<ScalarField, ScalarField> gradient(const ScalarField& field) {
    const Grid2D& g = *field.grid;
    ScalarField dx = make_field(g), dy = make_field(g);
    const double inv_2h = 1.0 / (2.0 * g.h);
    const Eigen::VectorXd& u = field.values;
    auto one_sided = [&](int c, int step) {
        // forward if step>0: (-3 u0 + 4 u1 - u2) / 2h, mirrored otherwise
        return (-3.0 * u[c] + 4.0 * u[c + step] - u[c + 2 * step]) * inv_2h *
               (step > 0 ? 1.0 : -1.0);
    };
    for (int i = 0; i < g.Nx; ++i) {
        for (int j = 0; j < g.Nx; ++j) {
            const int c = g.index(i, j);
            if (i == 0)
                dx.values[c] = one_sided(c, g.Nx);
            else if (i == g.Nx - 1)
                dx.values[c] = one_sided(c, -g.Nx);
            else
                dx.values[c] = (u[c + g.Nx] - u[c - g.Nx]) * inv_2h;
            if (j == 0)
                dy.values[c] = one_sided(c, 1);
            else if (j == g.Nx - 1)
                dy.values[c] = one_sided(c, -1);
            else
                dy.values[c] = (u[c + 1] - u[c - 1]) * inv_2h;
        }
    }
    return {std::move(dx), std::move(dy)};
}

int subgrid_offset(const Grid2D& big, const Grid2D& small) {
    require(std::abs(big.h - small.h) <= 1e-12 * big.h, ErrorCategory::misalignment,
            "subgrid_offset: grid spacings differ");
    const double steps = (big.R - small.R) / big.h;
    const double rounded = std::round(steps);
    require(rounded >= 0.0 && std::abs(steps - rounded) <= 1e-9, ErrorCategory::misalignment,
            "subgrid_offset: (R_big - R_small)/h is not a non-negative integer");
    const int k = static_cast<int>(rounded);
    require(k + small.Nx <= big.Nx, ErrorCategory::misalignment,
            "subgrid_offset: small grid does not fit inside big grid");
    return k;
}

Eigen::VectorXd normal_trace(const ScalarField& field_on_big, const Grid2D& small) {
    const Grid2D& big = *field_on_big.grid;
    const int k = subgrid_offset(big, small);
    require(k >= 2, ErrorCategory::misalignment,
            "normal_trace: need a 2h margin outside the small grid");
    const Eigen::VectorXd& u = field_on_big.values;
    const double inv_2h = 1.0 / (2.0 * small.h);
    Eigen::VectorXd out(static_cast<Eigen::Index>(small.boundary_idx.size()));
    for (std::size_t b = 0; b < small.boundary_idx.size(); ++b) {
        const int idx = small.boundary_idx[b];
        const int i = small.i_of(idx), j = small.j_of(idx);
        const int c = big.index(i + k, j + k);
        int step = 0; // outward direction as a big-grid index step
        if (i == 0)
            step = -big.Nx; // x-faces win at corners
        else if (i == small.Nx - 1)
            step = big.Nx;
        else if (j == 0)
            step = -1;
        else
            step = 1;
        out[b] = (-3.0 * u[c] + 4.0 * u[c + step] - u[c + 2 * step]) * inv_2h;
    }
    return out;
}

void write_field_csv(const ScalarField& field, const std::string& path) {
    const Grid2D& g = *field.grid;
    CsvWriter csv(path);
    csv.header({"x", "y", "value"});
    for (int i = 0; i < g.Nx; ++i) {
        for (int j = 0; j < g.Nx; ++j) {
            csv.cell(g.x(i));
            csv.cell(g.y(j));
            csv.cell(field.values[g.index(i, j)]);
            csv.end_row();
        }
    }
}

ScalarField read_field_csv(const Grid2D& grid, const std::string& path) {
    const CsvTable tab = read_csv(path);
    require(tab.column_index("value") == 2 && tab.columns.size() == 3, ErrorCategory::io,
            "read_field_csv: expected header x,y,value in " + path);
    require(static_cast<int>(tab.rows.size()) == grid.count(), ErrorCategory::io,
            "read_field_csv: row count does not match grid in " + path);
    ScalarField f = make_field(grid);
    for (int idx = 0; idx < grid.count(); ++idx) {
        const auto& row = tab.rows[idx];
        const double x = std::stod(row[0]), y = std::stod(row[1]);
        require(std::abs(x - grid.x(grid.i_of(idx))) < 1e-9 &&
                    std::abs(y - grid.y(grid.j_of(idx))) < 1e-9,
                ErrorCategory::io, "read_field_csv: node coordinates out of order in " + path);
        f.values[idx] = std::stod(row[2]);
    }
    validate_finite(f, "read_field_csv");
    return f;
}

void write_vector_field_csv(const VectorFieldN& field, const std::string& path) {
    const Grid2D& g = *field.grid;
    const int N = static_cast<int>(field.values.cols());
    CsvWriter csv(path);
    std::vector<std::string> header{"x", "y"};
    for (int n = 1; n <= N; ++n) header.push_back("u" + std::to_string(n));
    csv.header(header);
    for (int i = 0; i < g.Nx; ++i) {
        for (int j = 0; j < g.Nx; ++j) {
            csv.cell(g.x(i));
            csv.cell(g.y(j));
            for (int n = 0; n < N; ++n) csv.cell(field.values(g.index(i, j), n));
            csv.end_row();
        }
    }
}

VectorFieldN read_vector_field_csv(const Grid2D& grid, const std::string& path) {
    const CsvTable tab = read_csv(path);
    require(tab.columns.size() >= 3 && tab.columns[0] == "x" && tab.columns[1] == "y",
            ErrorCategory::io, "read_vector_field_csv: bad header in " + path);
    require(static_cast<int>(tab.rows.size()) == grid.count(), ErrorCategory::io,
            "read_vector_field_csv: row count does not match grid in " + path);
    const int N = static_cast<int>(tab.columns.size()) - 2;
    VectorFieldN f;
    f.grid = &grid;
    f.values.resize(grid.count(), N);
    for (int idx = 0; idx < grid.count(); ++idx) {
        const auto& row = tab.rows[idx];
        for (int n = 0; n < N; ++n) f.values(idx, n) = std::stod(row[2 + n]);
    }
    validate_finite(f, "read_vector_field_csv");
    return f;
}

} // namespace isp
