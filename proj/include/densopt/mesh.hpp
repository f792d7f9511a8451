#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "densopt/error.hpp"

namespace densopt {

using Point2 = std::array<double, 2>;
using Triangle = std::array<int, 3>;
using Edge = std::array<int, 2>;

/// Axis-aligned rectangle (x0,y0)-(x1,y1).
struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
};

/// Structured-grid provenance of a mesh built by build_tri_mesh.
struct GridInfo {
    int nx = 0;
    int ny = 0;
    Rect box;
};

/// Conforming triangulation with P1 (vertex) and P2 (vertex + edge) numbering.
///
/// P2 DOF layout: vertices first (0..V-1), then one DOF per edge (V..V+E-1).
/// Local P2 order inside a triangle (a,b,c): a, b, c, mid(ab), mid(bc), mid(ca).
class TriMesh {
public:
    TriMesh() = default;

    TriMesh(std::vector<Point2> vertices, std::vector<Triangle> triangles,
            std::optional<GridInfo> grid = std::nullopt)
        : vertices_(std::move(vertices)), triangles_(std::move(triangles)), grid_(grid)
    {
        for (const auto& t : triangles_)
            for (int v : t)
                detail::require(v >= 0 && v < static_cast<int>(vertices_.size()),
                                "TriMesh: triangle references a missing vertex");
        build_edges();
    }

    const std::vector<Point2>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    const std::vector<Edge>& edges() const { return edges_; }
    /// Edge ids of triangle t, ordered (ab, bc, ca).
    const std::array<int, 3>& triangle_edges(std::size_t t) const { return tri_edges_[t]; }
    const std::optional<GridInfo>& grid() const { return grid_; }

    std::size_t vertex_count() const { return vertices_.size(); }
    std::size_t triangle_count() const { return triangles_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    std::size_t p1_dof_count() const { return vertices_.size(); }
    std::size_t p2_dof_count() const { return vertices_.size() + edges_.size(); }

    Point2 edge_midpoint(std::size_t e) const
    {
        const auto& a = vertices_[static_cast<std::size_t>(edges_[e][0])];
        const auto& b = vertices_[static_cast<std::size_t>(edges_[e][1])];
        return {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
    }

    /// Signed area (positive for counter-clockwise orientation).
    double signed_area(std::size_t t) const
    {
        const auto& tri = triangles_[t];
        const auto& a = vertices_[static_cast<std::size_t>(tri[0])];
        const auto& b = vertices_[static_cast<std::size_t>(tri[1])];
        const auto& c = vertices_[static_cast<std::size_t>(tri[2])];
        return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
    }

    double total_area() const
    {
        double s = 0.0;
        for (std::size_t t = 0; t < triangles_.size(); ++t) s += signed_area(t);
        return s;
    }

    /// Global P2 DOFs of triangle t in local order.
    std::array<int, 6> p2_dofs(std::size_t t) const
    {
        const auto& tri = triangles_[t];
        const auto& e = tri_edges_[t];
        const int nv = static_cast<int>(vertices_.size());
        return {tri[0], tri[1], tri[2], nv + e[0], nv + e[1], nv + e[2]};
    }

    /// Number of triangles adjacent to each edge (1 on the boundary, 2 inside).
    std::vector<int> edge_valence() const
    {
        std::vector<int> val(edges_.size(), 0);
        for (const auto& te : tri_edges_)
            for (int e : te) ++val[static_cast<std::size_t>(e)];
        return val;
    }

    /// Lumped P1 mass: integral of each vertex hat function.
    std::vector<double> vertex_areas() const
    {
        std::vector<double> w(vertices_.size(), 0.0);
        for (std::size_t t = 0; t < triangles_.size(); ++t) {
            const double a = std::abs(signed_area(t)) / 3.0;
            for (int v : triangles_[t]) w[static_cast<std::size_t>(v)] += a;
        }
        return w;
    }

    /// Longest edge length.
    double max_edge_length() const
    {
        double h = 0.0;
        for (const auto& e : edges_) {
            const auto& a = vertices_[static_cast<std::size_t>(e[0])];
            const auto& b = vertices_[static_cast<std::size_t>(e[1])];
            h = std::max(h, std::hypot(b[0] - a[0], b[1] - a[1]));
        }
        return h;
    }

    /// Plain-text export: header "nx ny x0 y0 x1 y1", vertex lines "x y", triangle lines "a b c".
    /// Meshes without grid provenance write nx = ny = 0 and their bounding box.
    void write(std::ostream& os) const;

private:
    void build_edges()
    {
        std::map<std::pair<int, int>, int> index;
        tri_edges_.resize(triangles_.size());
        for (std::size_t t = 0; t < triangles_.size(); ++t) {
            const auto& tri = triangles_[t];
            for (int k = 0; k < 3; ++k) {
                const int a = tri[static_cast<std::size_t>(k)];
                const int b = tri[static_cast<std::size_t>((k + 1) % 3)];
                const auto key = std::minmax(a, b);
                auto [it, inserted] = index.try_emplace({key.first, key.second}, static_cast<int>(edges_.size()));
                if (inserted) edges_.push_back({key.first, key.second});
                tri_edges_[t][static_cast<std::size_t>(k)] = it->second;
            }
        }
    }

    std::vector<Point2> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> tri_edges_;
    std::optional<GridInfo> grid_;
};

/// Uniform nx-by-ny grid on `box`, every cell split along its (x0,y0)-(x1,y1) diagonal.
/// Vertex (i,j) has index j*(nx+1)+i.
inline TriMesh build_tri_mesh(int nx, int ny, const Rect& box = {})
{
    detail::require(nx >= 1 && ny >= 1, "build_tri_mesh: cell counts must be positive");
    detail::require(box.x1 > box.x0 && box.y1 > box.y0, "build_tri_mesh: degenerate rectangle");

    std::vector<Point2> verts;
    verts.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
    for (int j = 0; j <= ny; ++j) {
        const double y = (j == ny) ? box.y1 : box.y0 + box.height() * j / ny;
        for (int i = 0; i <= nx; ++i) {
            const double x = (i == nx) ? box.x1 : box.x0 + box.width() * i / nx;
            verts.push_back({x, y});
        }
    }
    std::vector<Triangle> tris;
    tris.reserve(static_cast<std::size_t>(2 * nx * ny));
    const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
            tris.push_back({v00, v10, v11});
            tris.push_back({v00, v11, v01});
        }
    }
    return TriMesh(std::move(verts), std::move(tris), GridInfo{nx, ny, box});
}

inline void TriMesh::write(std::ostream& os) const
{
    Rect box;
    int nx = 0, ny = 0;
    if (grid_) {
        box = grid_->box;
        nx = grid_->nx;
        ny = grid_->ny;
    } else if (!vertices_.empty()) {
        box = {vertices_[0][0], vertices_[0][1], vertices_[0][0], vertices_[0][1]};
        for (const auto& v : vertices_) {
            box.x0 = std::min(box.x0, v[0]);
            box.y0 = std::min(box.y0, v[1]);
            box.x1 = std::max(box.x1, v[0]);
            box.y1 = std::max(box.y1, v[1]);
        }
    }
    const auto old_prec = os.precision(17);
    os << nx << ' ' << ny << ' ' << box.x0 << ' ' << box.y0 << ' ' << box.x1 << ' ' << box.y1 << '\n';
    for (const auto& v : vertices_) os << v[0] << ' ' << v[1] << '\n';
    for (const auto& t : triangles_) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    os.precision(old_prec);
}

/// Uniform partition of [0, a] into n cells.
class IntervalMesh {
public:
    IntervalMesh(double length, int cells) : length_(length), cells_(cells)
    {
        detail::require(length > 0.0 && std::isfinite(length), "IntervalMesh: length must be positive");
        detail::require(cells >= 1, "IntervalMesh: cell count must be positive");
    }

    double length() const { return length_; }
    int cells() const { return cells_; }
    std::size_t node_count() const { return static_cast<std::size_t>(cells_) + 1; }
    double spacing() const { return length_ / cells_; }

    /// Node i computed directly from its index, so x_n == a exactly.
    double node(int i) const { return i == cells_ ? length_ : length_ * i / cells_; }

    std::vector<double> nodes() const
    {
        std::vector<double> x(node_count());
        for (int i = 0; i <= cells_; ++i) x[static_cast<std::size_t>(i)] = node(i);
        return x;
    }

    /// P2 numbering interleaves vertices (2i) and cell midpoints (2i+1).
    std::size_t p2_dof_count() const { return 2 * static_cast<std::size_t>(cells_) + 1; }

private:
    double length_;
    int cells_;
};

inline IntervalMesh build_interval_mesh(double a, int n) { return IntervalMesh(a, n); }

} // namespace densopt
