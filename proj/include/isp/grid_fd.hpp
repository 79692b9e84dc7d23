#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace isp {

/// Uniform square grid over (-R,R)^2 with Nx points per axis.
///
/// Node ordering is row-major over (i,j): index(i,j) = i*Nx + j with
/// x_i = -R + i*h and y_j = -R + j*h, 0-based.  This bijection is the
/// serialization order everywhere (CSV rows, field vectors).
struct Grid2D {
    double R = 0.0;
    int Nx = 0;
    double h = 0.0;
    std::vector<int> boundary_idx;    ///< boundary nodes, row-major scan order
    std::vector<int> interior_idx;    ///< all non-boundary nodes
    std::vector<int> first_layer_idx; ///< interior nodes adjacent to the boundary

    int index(int i, int j) const { return i * Nx + j; }
    int i_of(int idx) const { return idx / Nx; }
    int j_of(int idx) const { return idx % Nx; }
    double x(int i) const { return -R + i * h; }
    double y(int j) const { return -R + j * h; }
    int count() const { return Nx * Nx; }
    bool on_boundary(int i, int j) const {
        return i == 0 || j == 0 || i == Nx - 1 || j == Nx - 1;
    }
};

struct ScalarField {
    const Grid2D* grid = nullptr;
    Eigen::VectorXd values; ///< one entry per node, row-major order
};

/// N stacked scalar fields (one per time mode); values(node, mode).
struct VectorFieldN {
    const Grid2D* grid = nullptr;
    Eigen::MatrixXd values;
};

Grid2D build_grid(double R, int Nx);

ScalarField make_field(const Grid2D& grid, double fill = 0.0);

/// Throws ErrorCategory::nonfinite if any entry is NaN/Inf.
void validate_finite(const ScalarField& field, const std::string& what);
void validate_finite(const VectorFieldN& field, const std::string& what);

/// 5-point Laplacian on interior nodes; boundary entries of the result are 0.
ScalarField laplacian(const ScalarField& field);

/// (d/dx, d/dy): central differences where both neighbours exist, otherwise
/// second-order one-sided 3-point stencils (grid edges).
std::pair<ScalarField, ScalarField> gradient(const ScalarField& field);

/// Index offset k such that node (i,j) of `small` is node (i+k, j+k) of
/// `big`.  Throws ErrorCategory::misalignment unless the spacings match and
/// (R_big - R_small)/h is an integer.
int subgrid_offset(const Grid2D& big, const Grid2D& small);

/// Outward normal derivative of a field living on the bigger grid, sampled
/// at the boundary nodes of `small` (in small.boundary_idx order) with a
/// second-order one-sided stencil pointing outward.  Corners take the x-face
/// normal.  Requires `small` embedded in the big grid with 2h margin.
Eigen::VectorXd normal_trace(const ScalarField& field_on_big, const Grid2D& small);

/// CSV: header x,y,value; row-major node order; 17 significant digits.
void write_field_csv(const ScalarField& field, const std::string& path);
ScalarField read_field_csv(const Grid2D& grid, const std::string& path);

/// CSV: header x,y,u1..uN.
void write_vector_field_csv(const VectorFieldN& field, const std::string& path);
VectorFieldN read_vector_field_csv(const Grid2D& grid, const std::string& path);

} // namespace isp
