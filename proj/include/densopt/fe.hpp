#pragma once

#include <array>

#include "densopt/mesh.hpp"
#include "densopt/quadrature.hpp"

namespace densopt::fe {

using Local6 = std::array<double, 36>;
using Local3 = std::array<double, 9>;

/// Element matrices of a P2 triangle weighted by each P1 hat function of its vertices:
///   stiff[l](i,j) = int_T phi_l grad(psi_i).grad(psi_j),  mass[l](i,j) = int_T phi_l psi_i psi_j.
/// The weight ρ+c of an element is therefore sum_l (ρ_l + c) * {stiff,mass}[l].
struct TriangleTensors {
    std::array<Local6, 3> stiff{};
    std::array<Local6, 3> mass{};
};

inline TriangleTensors triangle_tensors(const Point2& a, const Point2& b, const Point2& c)
{
    const double det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    const double area = 0.5 * std::abs(det);
    // gradients of barycentric coordinates
    const std::array<std::array<double, 2>, 3> gl = {{
        {(b[1] - c[1]) / det, (c[0] - b[0]) / det},
        {(c[1] - a[1]) / det, (a[0] - c[0]) / det},
        {(a[1] - b[1]) / det, (b[0] - a[0]) / det},
    }};

    TriangleTensors out;
    const auto& rule = triangle_rule_degree5();
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const auto& l = rule.points[q];
        const double w = rule.weights[q] * 2.0 * area;
        const std::array<double, 6> psi = {
            l[0] * (2 * l[0] - 1), l[1] * (2 * l[1] - 1), l[2] * (2 * l[2] - 1),
            4 * l[0] * l[1],       4 * l[1] * l[2],       4 * l[2] * l[0],
        };
        std::array<std::array<double, 2>, 6> g{};
        for (int d = 0; d < 2; ++d) {
            g[0][d] = (4 * l[0] - 1) * gl[0][d];
            g[1][d] = (4 * l[1] - 1) * gl[1][d];
            g[2][d] = (4 * l[2] - 1) * gl[2][d];
            g[3][d] = 4 * (l[1] * gl[0][d] + l[0] * gl[1][d]);
            g[4][d] = 4 * (l[2] * gl[1][d] + l[1] * gl[2][d]);
            g[5][d] = 4 * (l[0] * gl[2][d] + l[2] * gl[0][d]);
        }
        for (int v = 0; v < 3; ++v) {
            const double wv = w * l[static_cast<std::size_t>(v)];
            auto& S = out.stiff[static_cast<std::size_t>(v)];
            auto& M = out.mass[static_cast<std::size_t>(v)];
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) {
                    const auto ij = static_cast<std::size_t>(6 * i + j);
                    S[ij] += wv * (g[static_cast<std::size_t>(i)][0] * g[static_cast<std::size_t>(j)][0] +
                                   g[static_cast<std::size_t>(i)][1] * g[static_cast<std::size_t>(j)][1]);
                    M[ij] += wv * psi[static_cast<std::size_t>(i)] * psi[static_cast<std::size_t>(j)];
                }
        }
    }
    return out;
}

/// Reference P2 basis on [0,1] (left vertex, midpoint, right vertex).
inline std::array<double, 3> p2_line_values(double t)
{
    return {(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)};
}

inline std::array<double, 3> p2_line_derivatives(double t) { return {4 * t - 3, 4 - 8 * t, 4 * t - 1}; }

/// P2 interval element weighted by the two P1 hats (left, right).
struct IntervalTensors {
    std::array<Local3, 2> stiff{};
    std::array<Local3, 2> mass{};
};

inline IntervalTensors interval_tensors(double h)
{
    IntervalTensors out;
    const auto rule = gauss_legendre(4);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const double t = rule.points[q];
        const auto v = p2_line_values(t);
        const auto d = p2_line_derivatives(t);
        const std::array<double, 2> hat = {1 - t, t};
        for (std::size_t s = 0; s < 2; ++s) {
            const double w = rule.weights[q] * hat[s];
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) {
                    out.stiff[s][3 * i + j] += w * d[i] * d[j] / h;
                    out.mass[s][3 * i + j] += w * v[i] * v[j] * h;
                }
        }
    }
    return out;
}

} // namespace densopt::fe
