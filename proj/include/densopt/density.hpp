#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <cstdint>
#include <random>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "densopt/error.hpp"
#include "densopt/mesh.hpp"

namespace densopt {

/// Nodal (P1) density in [0,1] attached to a mesh.
template <class Mesh>
class BasicDensity {
public:
    BasicDensity() = default;

    BasicDensity(std::shared_ptr<const Mesh> mesh, Eigen::VectorXd values)
        : mesh_(std::move(mesh)), values_(std::move(values))
    {
        detail::require(mesh_ != nullptr, "density: null mesh");
        detail::require(static_cast<std::size_t>(values_.size()) == node_count(),
                        "density: value count does not match mesh vertices");
        for (Eigen::Index i = 0; i < values_.size(); ++i)
            detail::require(values_[i] >= 0.0 && values_[i] <= 1.0, "density: nodal value outside [0,1]");
    }

    const Mesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    const Eigen::VectorXd& values() const { return values_; }
    double operator[](Eigen::Index i) const { return values_[i]; }
    Eigen::Index size() const { return values_.size(); }

    double max_value() const { return values_.size() ? values_.maxCoeff() : 0.0; }
    double min_value() const { return values_.size() ? values_.minCoeff() : 0.0; }

private:
    std::size_t node_count() const
    {
        if constexpr (std::is_same_v<Mesh, TriMesh>)
            return mesh_->vertex_count();
        else
            return mesh_->node_count();
    }

    std::shared_ptr<const Mesh> mesh_;
    Eigen::VectorXd values_;
};

using DensityField = BasicDensity<TriMesh>;
using DensityField1D = BasicDensity<IntervalMesh>;

/// Target mass and penalty weight for the mass constraint.
struct MassBudget {
    double m = 0.4;
    double alpha = 0.0;
};

/// Integral weights of the P1 hat functions (exact mass for P1 integrands).
inline Eigen::VectorXd hat_integrals(const TriMesh& mesh)
{
    const auto w = mesh.vertex_areas();
    return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

inline Eigen::VectorXd hat_integrals(const IntervalMesh& mesh)
{
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.node_count()));
    for (int i = 0; i < mesh.cells(); ++i) {
        const double h = mesh.node(i + 1) - mesh.node(i);
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

template <class Mesh>
double mass(const BasicDensity<Mesh>& rho)
{
    return hat_integrals(rho.mesh()).dot(rho.values());
}

/// Componentwise clamp to [0,1].
template <class Mesh>
BasicDensity<Mesh> project_box(std::shared_ptr<const Mesh> mesh, const Eigen::VectorXd& values)
{
    Eigen::VectorXd v = values.cwiseMax(0.0).cwiseMin(1.0);
    return BasicDensity<Mesh>(std::move(mesh), std::move(v));
}

inline Eigen::VectorXd clamp_unit(const Eigen::VectorXd& values) { return values.cwiseMax(0.0).cwiseMin(1.0); }

inline DensityField uniform_density(std::shared_ptr<const TriMesh> mesh, double value)
{
    const auto n = static_cast<Eigen::Index>(mesh->vertex_count());
    return DensityField(std::move(mesh), Eigen::VectorXd::Constant(n, value));
}

struct Disk {
    Point2 center{0.0, 0.0};
    double radius = 0.0;
};

/// Vertex interpolant of the indicator of a union of open disks.
inline DensityField disks_indicator(std::shared_ptr<const TriMesh> mesh, const std::vector<Disk>& disks)
{
    for (const auto& d : disks) detail::require(d.radius >= 0.0, "disk_indicator: negative radius");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh->vertex_count()));
    const auto& verts = mesh->vertices();
    for (std::size_t i = 0; i < verts.size(); ++i) {
        for (const auto& d : disks) {
            const double dx = verts[i][0] - d.center[0];
            const double dy = verts[i][1] - d.center[1];
            if (dx * dx + dy * dy < d.radius * d.radius) {
                v[static_cast<Eigen::Index>(i)] = 1.0;
                break;
            }
        }
    }
    return DensityField(std::move(mesh), std::move(v));
}

inline DensityField disk_indicator(std::shared_ptr<const TriMesh> mesh, Point2 center, double radius)
{
    return disks_indicator(std::move(mesh), {Disk{center, radius}});
}

/// Smooth random field in [lo, hi]: a sum of a few random cosine modes, rescaled.
inline DensityField random_smooth_field(std::shared_ptr<const TriMesh> mesh, std::uint64_t seed, double lo = 0.0,
                                        double hi = 1.0, int modes = 6)
{
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    struct Mode {
        double fx, fy, phase, amp;
    };
    std::vector<Mode> ms;
    const double pi = std::acos(-1.0);
    for (int i = 0; i < modes; ++i)
        ms.push_back({1.0 + 4.0 * u(gen), 1.0 + 4.0 * u(gen), 2.0 * pi * u(gen), u(gen)});
    const auto& verts = mesh->vertices();
    Eigen::VectorXd v(static_cast<Eigen::Index>(verts.size()));
    for (std::size_t i = 0; i < verts.size(); ++i) {
        double s = 0.0;
        for (const auto& m : ms) s += m.amp * std::cos(m.fx * verts[i][0] + m.fy * verts[i][1] + m.phase);
        v[static_cast<Eigen::Index>(i)] = s;
    }
    const double mn = v.minCoeff(), mx = v.maxCoeff();
    const double span = mx > mn ? mx - mn : 1.0;
    v = ((v.array() - mn) / span * (hi - lo) + lo).matrix();
    return DensityField(std::move(mesh), clamp_unit(v));
}

/// Vertex interpolant of the indicator of a union of closed segments [s, e] in [0, a].
/// Segments may touch but not overlap.
inline DensityField1D segments_indicator_1d(std::shared_ptr<const IntervalMesh> mesh,
                                            std::vector<std::pair<double, double>> segments)
{
    std::sort(segments.begin(), segments.end());
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto [s, e] = segments[i];
        detail::require(s < e, "segments_indicator_1d: empty or reversed segment");
        detail::require(s >= 0.0 && e <= mesh->length(), "segments_indicator_1d: segment outside [0,a]");
        if (i > 0) detail::require(segments[i - 1].second <= s, "segments_indicator_1d: overlapping segments");
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh->node_count()));
    const double tol = 1e-12 * mesh->length();
    for (int i = 0; i <= mesh->cells(); ++i) {
        const double x = mesh->node(i);
        for (const auto& [s, e] : segments)
            if (x >= s - tol && x <= e + tol) {
                v[i] = 1.0;
                break;
            }
    }
    return DensityField1D(std::move(mesh), std::move(v));
}

/// Sample a profile function at the nodes of a 1D mesh (values clamped to [0,1]).
template <class F>
DensityField1D sample_1d(std::shared_ptr<const IntervalMesh> mesh, F&& profile)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(mesh->node_count()));
    for (int i = 0; i <= mesh->cells(); ++i) v[i] = profile(mesh->node(i));
    return DensityField1D(std::move(mesh), clamp_unit(v));
}

/// Piecewise-linear interpolation of a density on a structured grid mesh at the vertices of
/// another mesh covering the same box (e.g. a uniform refinement).
inline DensityField interpolate_grid(const DensityField& src, std::shared_ptr<const TriMesh> dst)
{
    const auto& g = src.mesh().grid();
    detail::require(g.has_value(), "interpolate_grid: source mesh is not a structured grid");
    const int nx = g->nx, ny = g->ny;
    const Rect& b = g->box;
    const double hx = b.width() / nx, hy = b.height() / ny;
    Eigen::VectorXd v(static_cast<Eigen::Index>(dst->vertex_count()));
    for (std::size_t p = 0; p < dst->vertex_count(); ++p) {
        const auto& x = dst->vertices()[p];
        const double fx = (x[0] - b.x0) / hx, fy = (x[1] - b.y0) / hy;
        const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, nx - 1);
        const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, ny - 1);
        const double s = std::clamp(fx - i, 0.0, 1.0), t = std::clamp(fy - j, 0.0, 1.0);
        const auto at = [&](int a, int c) { return src[static_cast<Eigen::Index>(c) * (nx + 1) + a]; };
        const double v00 = at(i, j), v10 = at(i + 1, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
        // cells are split along the (i,j)-(i+1,j+1) diagonal
        v[static_cast<Eigen::Index>(p)] = s >= t ? v00 + s * (v10 - v00) + t * (v11 - v10)
                                                 : v00 + t * (v01 - v00) + s * (v11 - v01);
    }
    return DensityField(std::move(dst), clamp_unit(v));
}

} // namespace densopt
