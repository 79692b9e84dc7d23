#include "isp/quadrature.hpp"

#include "isp/errors.hpp"

#include <cmath>

namespace isp {

namespace {

// Legendre P_n(x) and P_n'(x) by the Bonnet recurrence.
void legendre_pair(std::size_t n, double x, double& p, double& dp) {
    double p0 = 1.0, p1 = x;
    if (n == 0) { p = p0; dp = 0.0; return; }
    for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
    }
    p = p1;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
}

} // namespace

QuadratureRule gauss_legendre(std::size_t n) {
    require(n >= 1, ErrorCategory::invalid_argument, "gauss_legendre: n must be >= 1");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        // Tricomi initial guess, then Newton on P_n.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double p = 0.0, dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            legendre_pair(n, x, p, dp);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        legendre_pair(n, x, p, dp);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.weights[i] = w;
        rule.nodes[n - 1 - i] = x;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[m - 1] = 0.0;
    return rule;
}

QuadratureRule composite_gauss_legendre(double a, double b, std::size_t n_nodes) {
    require(b > a, ErrorCategory::invalid_argument, "composite_gauss_legendre: need b > a");
    require(n_nodes >= 1, ErrorCategory::invalid_argument,
            "composite_gauss_legendre: need n_nodes >= 1");
    constexpr std::size_t panel_order = 16;
    const std::size_t panels = (n_nodes + panel_order - 1) / panel_order;
    const QuadratureRule base = gauss_legendre(panel_order);

    QuadratureRule rule;
    rule.nodes.reserve(panels * panel_order);
    rule.weights.reserve(panels * panel_order);
    const double width = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + p * width;
        const double mid = lo + 0.5 * width;
        for (std::size_t i = 0; i < panel_order; ++i) {
            rule.nodes.push_back(mid + 0.5 * width * base.nodes[i]);
            rule.weights.push_back(0.5 * width * base.weights[i]);
        }
    }
    return rule;
}

std::vector<double> simpson_weights(std::size_t n_intervals, double h) {
    require(n_intervals >= 2 && n_intervals % 2 == 0, ErrorCategory::invalid_argument,
            "simpson_weights: n_intervals must be even and >= 2");
    std::vector<double> w(n_intervals + 1, 0.0);
    for (std::size_t i = 0; i + 2 <= n_intervals; i += 2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    return w;
}

} // namespace isp
