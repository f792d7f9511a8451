#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <numeric>
#include <ostream>
#include <vector>

#include <Eigen/Core>

#include "densopt/density.hpp"
#include "densopt/eigensolve.hpp"
#include "densopt/error.hpp"
#include "densopt/mesh.hpp"

namespace densopt {

/// One connected piece of the thresholded support, as a standalone mesh.
struct SupportComponent {
    /// Kept-triangle indices in the parent mesh.
    std::vector<std::size_t> triangles;
    /// Parent vertex index of each local vertex.
    std::vector<std::size_t> parent_vertex;
    DensityField rho;
};

struct SupportExtract {
    double threshold = 0.01;
    std::vector<std::size_t> kept_triangles;
    /// Parent vertex index → local index in `rho`, or -1 when dropped.
    std::vector<long> vertex_map;
    /// Density restricted to the kept triangles (all components together).
    DensityField rho;
    std::vector<SupportComponent> components;

    std::size_t component_count() const { return components.size(); }
};

namespace detail {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
    std::size_t find(std::size_t x)
    {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b)
    {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

inline DensityField restrict_density(const DensityField& rho, const std::vector<std::size_t>& tris,
                                     std::vector<std::size_t>& parent_vertex, std::vector<long>& local)
{
    const auto& mesh = rho.mesh();
    local.assign(mesh.vertex_count(), -1);
    parent_vertex.clear();
    std::vector<Triangle> sub;
    sub.reserve(tris.size());
    for (auto t : tris) {
        Triangle nt{};
        for (std::size_t i = 0; i < 3; ++i) {
            const auto v = static_cast<std::size_t>(mesh.triangles()[t][i]);
            if (local[v] < 0) {
                local[v] = static_cast<long>(parent_vertex.size());
                parent_vertex.push_back(v);
            }
            nt[i] = static_cast<int>(local[v]);
        }
        sub.push_back(nt);
    }
    std::vector<Point2> verts;
    verts.reserve(parent_vertex.size());
    Eigen::VectorXd values(static_cast<Eigen::Index>(parent_vertex.size()));
    for (std::size_t i = 0; i < parent_vertex.size(); ++i) {
        verts.push_back(mesh.vertices()[parent_vertex[i]]);
        values[static_cast<Eigen::Index>(i)] = rho[parent_vertex[i]];
    }
    return DensityField(std::make_shared<const TriMesh>(std::move(verts), std::move(sub)), std::move(values));
}

} // namespace detail

/// Keeps the triangles whose three vertex densities all exceed `tau` and splits them into
/// vertex-connected components, ordered by their smallest parent triangle index.
inline SupportExtract extract_support(const DensityField& rho, double tau = 0.01)
{
    detail::require(tau > 0.0 && tau < 1.0, "extract_support: threshold must lie in (0,1)");
    const auto& mesh = rho.mesh();
    SupportExtract out{tau, {}, {}, rho, {}};
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles()[t];
        if (rho[static_cast<std::size_t>(tri[0])] > tau && rho[static_cast<std::size_t>(tri[1])] > tau &&
            rho[static_cast<std::size_t>(tri[2])] > tau)
            out.kept_triangles.push_back(t);
    }
    detail::require(!out.kept_triangles.empty(), "extract_support: no triangle exceeds the threshold");

    std::vector<std::size_t> parents;
    out.rho = detail::restrict_density(rho, out.kept_triangles, parents, out.vertex_map);

    detail::UnionFind uf(mesh.vertex_count());
    for (auto t : out.kept_triangles) {
        const auto& tri = mesh.triangles()[t];
        uf.unite(static_cast<std::size_t>(tri[0]), static_cast<std::size_t>(tri[1]));
        uf.unite(static_cast<std::size_t>(tri[0]), static_cast<std::size_t>(tri[2]));
    }
    std::vector<long> slot(mesh.vertex_count(), -1);
    std::vector<std::vector<std::size_t>> groups;
    for (auto t : out.kept_triangles) {
        const auto root = uf.find(static_cast<std::size_t>(mesh.triangles()[t][0]));
        if (slot[root] < 0) {
            slot[root] = static_cast<long>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(slot[root])].push_back(t);
    }
    for (auto& g : groups) {
        std::vector<std::size_t> pv;
        std::vector<long> unused;
        auto sub = detail::restrict_density(rho, g, pv, unused);
        out.components.push_back(SupportComponent{std::move(g), std::move(pv), std::move(sub)});
    }
    return out;
}

/// Sorted union of the unrelaxed spectra of every support component. Each component
/// contributes min(count, its DOF count) eigenvalues, so the merged list is exact up to
/// index `count - 1`.
inline std::vector<double> merged_support_spectrum(const SupportExtract& sx, int count, const EigenOptions& opts = {})
{
    detail::require(count >= 1, "merged_support_spectrum: count must be positive");
    std::vector<double> all;
    for (const auto& c : sx.components) {
        const int n = std::min<int>(count, static_cast<int>(c.rho.mesh().p2_dof_count()));
        const auto s = unrelaxed_solve_on_support(c.rho, n, opts);
        all.insert(all.end(), s.eigenvalues.data(), s.eigenvalues.data() + s.eigenvalues.size());
    }
    std::sort(all.begin(), all.end());
    return all;
}

/// μ_k of the unrelaxed problem on {ρ > τ}, merged across connected components.
inline double postprocessed_mu(const DensityField& rho, double tau, int k, const EigenOptions& opts = {})
{
    detail::require(k >= 0, "postprocessed_mu: k must be nonnegative");
    const auto sx = extract_support(rho, tau);
    detail::require(sx.rho.mesh().p2_dof_count() >= static_cast<std::size_t>(k + 1),
                    "postprocessed_mu: support has too few degrees of freedom");
    const auto all = merged_support_spectrum(sx, k + 1, opts);
    if (all.size() <= static_cast<std::size_t>(k))
        throw SolverError("postprocessed_mu: components do not supply enough eigenvalues");
    return all[static_cast<std::size_t>(k)];
}

/// One-line summary: "components <c> triangles <t> vertices <v> area <a>".
inline void write_support_summary(std::ostream& os, const SupportExtract& sx)
{
    os << "components " << sx.component_count() << " triangles " << sx.kept_triangles.size() << " vertices "
       << sx.rho.mesh().vertex_count() << " area " << sx.rho.mesh().total_area() << '\n';
}

} // namespace densopt
