#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace densopt {

/// Quadrature on the reference triangle {(x,y): x,y >= 0, x+y <= 1}.
/// Points are barycentric (l0, l1, l2); weights sum to the reference area 1/2.
struct QuadratureRule {
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;
    int exactness_degree = 0;
};

/// 7-point symmetric rule, exact for polynomials of total degree 5.
inline const QuadratureRule& triangle_rule_degree5()
{
    static const QuadratureRule rule = [] {
        QuadratureRule q;
        q.exactness_degree = 5;
        const double sq15 = std::sqrt(15.0);
        const double a1 = (6.0 - sq15) / 21.0;
        const double a2 = (6.0 + sq15) / 21.0;
        const double w0 = 9.0 / 80.0;
        const double w1 = (155.0 - sq15) / 2400.0;
        const double w2 = (155.0 + sq15) / 2400.0;
        q.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
        q.weights.push_back(w0);
        const double b1 = 1.0 - 2.0 * a1;
        const double b2 = 1.0 - 2.0 * a2;
        for (const auto& p : {std::array<double, 3>{a1, a1, b1}, {a1, b1, a1}, {b1, a1, a1}}) {
            q.points.push_back(p);
            q.weights.push_back(w1);
        }
        for (const auto& p : {std::array<double, 3>{a2, a2, b2}, {a2, b2, a2}, {b2, a2, a2}}) {
            q.points.push_back(p);
            q.weights.push_back(w2);
        }
        return q;
    }();
    return rule;
}

/// Gauss-Legendre rule on [0,1].
struct LineRule {
    std::vector<double> points;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule mapped to [0,1]; exact to degree 2n-1.
inline LineRule gauss_legendre(int n)
{
    const auto legendre = [n](double x, double& p, double& dp) {
        double p0 = 1.0, p1 = x;
        for (int j = 2; j <= n; ++j) {
            const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
            p0 = p1;
            p1 = p2;
        }
        p = p1;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
    };

    LineRule r;
    r.points.resize(static_cast<std::size_t>(n));
    r.weights.resize(static_cast<std::size_t>(n));
    const double pi = std::acos(-1.0);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double p = 0.0, dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            legendre(x, p, dp);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        legendre(x, p, dp);
        const auto slot = static_cast<std::size_t>(n - 1 - i);
        r.points[slot] = 0.5 * (1.0 + x);
        r.weights[slot] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

} // namespace densopt
