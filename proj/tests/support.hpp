#pragma once

#include <memory>
#include <vector>

#include "densopt/densopt.hpp"

namespace densopt::test {

inline std::shared_ptr<const TriMesh> grid(int n, const Rect& box = {})
{
    return std::make_shared<const TriMesh>(build_tri_mesh(n, n, box));
}

/// n×n grid on the unit square with diagonals alternating cell by cell. For even n it is
/// invariant under quarter turns, so ρ ≡ 1 has an exactly double μ₁ = μ₂.
inline std::shared_ptr<const TriMesh> union_jack(int n)
{
    std::vector<Point2> verts;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) verts.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
    std::vector<Triangle> tris;
    const auto id = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
            if ((i + j) % 2 == 0) {
                tris.push_back({v00, v10, v11});
                tris.push_back({v00, v11, v01});
            } else {
                tris.push_back({v00, v10, v01});
                tris.push_back({v10, v11, v01});
            }
        }
    }
    return std::make_shared<const TriMesh>(std::move(verts), std::move(tris));
}

inline std::shared_ptr<const IntervalMesh> interval(int n, double a = 1.0)
{
    return std::make_shared<const IntervalMesh>(a, n);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace densopt::test
