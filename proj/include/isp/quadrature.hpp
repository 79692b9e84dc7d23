#pragma once

#include <cstddef>
#include <vector>

namespace isp {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }

    template <class F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
        return acc;
    }
};

/// n-point Gauss-Legendre rule on [-1, 1].
QuadratureRule gauss_legendre(std::size_t n);

/// Composite Gauss-Legendre rule on [a, b] with at least n_nodes total nodes,
/// built from fixed-order panels (16 nodes per panel).
QuadratureRule composite_gauss_legendre(double a, double b, std::size_t n_nodes);

/// Composite Simpson weights for n_intervals (even) uniform intervals of width h.
/// Returned vector has n_intervals + 1 entries.
std::vector<double> simpson_weights(std::size_t n_intervals, double h);

} // namespace isp
