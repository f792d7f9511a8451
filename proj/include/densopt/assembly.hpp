#pragma once

#include <algorithm>
#include <memory>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "densopt/density.hpp"
#include "densopt/error.hpp"
#include "densopt/fe.hpp"
#include "densopt/mesh.hpp"

namespace densopt {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Relaxation of the degenerate weight: stiffness ρ+ε with mass ρ+ε² (EpsEps2),
/// the naive ρ+ε on both sides (EpsEps), or no relaxation at all (Unrelaxed, needs ρ > 0).
enum class Scheme { EpsEps2, EpsEps, Unrelaxed };

inline std::string to_string(Scheme s)
{
    switch (s) {
    case Scheme::EpsEps2: return "eps_eps2";
    case Scheme::EpsEps: return "eps_eps";
    case Scheme::Unrelaxed: return "unrelaxed";
    }
    return "unknown";
}

inline Scheme parse_scheme(const std::string& s)
{
    if (s == "eps_eps2") return Scheme::EpsEps2;
    if (s == "eps_eps") return Scheme::EpsEps;
    if (s == "unrelaxed") return Scheme::Unrelaxed;
    throw InputError("unknown scheme '" + s + "' (expected eps_eps2 or eps_eps)");
}

/// Weight offsets added to ρ in the stiffness and mass integrals.
inline std::pair<double, double> scheme_shifts(Scheme s, double eps)
{
    switch (s) {
    case Scheme::EpsEps2: return {eps, eps * eps};
    case Scheme::EpsEps: return {eps, eps};
    case Scheme::Unrelaxed: return {0.0, 0.0};
    }
    return {0.0, 0.0};
}

namespace detail {

/// Fixed CSC pattern plus, for every element, the value slot of each local (i,j) pair.
template <int Local>
struct ScatterMap {
    SparseMatrix pattern;
    std::vector<std::array<int, Local * Local>> slots;

    template <class DofsOf>
    void build(Eigen::Index ndof, std::size_t nelem, DofsOf&& dofs_of)
    {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(nelem * Local * Local);
        for (std::size_t e = 0; e < nelem; ++e) {
            const auto d = dofs_of(e);
            for (int i = 0; i < Local; ++i)
                for (int j = 0; j < Local; ++j) trip.emplace_back(d[static_cast<std::size_t>(i)], d[static_cast<std::size_t>(j)], 0.0);
        }
        pattern.resize(ndof, ndof);
        pattern.setFromTriplets(trip.begin(), trip.end());
        pattern.makeCompressed();
        slots.resize(nelem);
        const int* outer = pattern.outerIndexPtr();
        const int* inner = pattern.innerIndexPtr();
        for (std::size_t e = 0; e < nelem; ++e) {
            const auto d = dofs_of(e);
            for (int i = 0; i < Local; ++i)
                for (int j = 0; j < Local; ++j) {
                    const int col = d[static_cast<std::size_t>(j)];
                    const int* first = inner + outer[col];
                    const int* last = inner + outer[col + 1];
                    const int* pos = std::lower_bound(first, last, d[static_cast<std::size_t>(i)]);
                    slots[e][static_cast<std::size_t>(Local * i + j)] = static_cast<int>(pos - inner);
                }
        }
    }
};

} // namespace detail

/// P2 discretization of a triangle mesh: element tensors and the sparse scatter pattern.
/// Immutable after construction; share it across assemblies of different densities.
class TriDiscretization {
public:
    explicit TriDiscretization(std::shared_ptr<const TriMesh> mesh) : mesh_(std::move(mesh))
    {
        detail::require(mesh_ != nullptr, "TriDiscretization: null mesh");
        const auto& verts = mesh_->vertices();
        const auto& tris = mesh_->triangles();
        tensors_.reserve(tris.size());
        for (const auto& t : tris)
            tensors_.push_back(fe::triangle_tensors(verts[static_cast<std::size_t>(t[0])],
                                                    verts[static_cast<std::size_t>(t[1])],
                                                    verts[static_cast<std::size_t>(t[2])]));
        scatter_.build(static_cast<Eigen::Index>(mesh_->p2_dof_count()), tris.size(),
                       [this](std::size_t e) { return mesh_->p2_dofs(e); });
    }

    const TriMesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const TriMesh>& mesh_ptr() const { return mesh_; }
    Eigen::Index dof_count() const { return static_cast<Eigen::Index>(mesh_->p2_dof_count()); }
    const std::vector<fe::TriangleTensors>& tensors() const { return tensors_; }

    /// Stiffness and mass with weights ρ+stiff_shift and ρ+mass_shift.
    std::pair<SparseMatrix, SparseMatrix> assemble(const Eigen::VectorXd& rho, double stiff_shift,
                                                   double mass_shift) const
    {
        detail::require(rho.size() == static_cast<Eigen::Index>(mesh_->vertex_count()),
                        "assemble: density size does not match mesh");
        SparseMatrix M = scatter_.pattern;
        SparseMatrix K = scatter_.pattern;
        double* mv = M.valuePtr();
        double* kv = K.valuePtr();
        const auto& tris = mesh_->triangles();
        for (std::size_t e = 0; e < tris.size(); ++e) {
            const auto& T = tensors_[e];
            const auto& slot = scatter_.slots[e];
            std::array<double, 3> ws{}, wm{};
            for (std::size_t v = 0; v < 3; ++v) {
                ws[v] = rho[tris[e][v]] + stiff_shift;
                wm[v] = rho[tris[e][v]] + mass_shift;
            }
            for (std::size_t ij = 0; ij < 36; ++ij) {
                mv[slot[ij]] += ws[0] * T.stiff[0][ij] + ws[1] * T.stiff[1][ij] + ws[2] * T.stiff[2][ij];
                kv[slot[ij]] += wm[0] * T.mass[0][ij] + wm[1] * T.mass[1][ij] + wm[2] * T.mass[2][ij];
            }
        }
        return {std::move(M), std::move(K)};
    }

    /// d/dρ_l of stiffness and mass (independent of ρ and of the relaxation).
    std::pair<SparseMatrix, SparseMatrix> entry_sensitivities(Eigen::Index l) const
    {
        detail::require(l >= 0 && l < static_cast<Eigen::Index>(mesh_->vertex_count()),
                        "entry_sensitivities: vertex index out of range");
        std::vector<Eigen::Triplet<double>> ts, tm;
        const auto& tris = mesh_->triangles();
        for (std::size_t e = 0; e < tris.size(); ++e) {
            for (std::size_t v = 0; v < 3; ++v) {
                if (tris[e][v] != l) continue;
                const auto d = mesh_->p2_dofs(e);
                for (std::size_t i = 0; i < 6; ++i)
                    for (std::size_t j = 0; j < 6; ++j) {
                        ts.emplace_back(d[i], d[j], tensors_[e].stiff[v][6 * i + j]);
                        tm.emplace_back(d[i], d[j], tensors_[e].mass[v][6 * i + j]);
                    }
            }
        }
        SparseMatrix dM(dof_count(), dof_count()), dK(dof_count(), dof_count());
        dM.setFromTriplets(ts.begin(), ts.end());
        dK.setFromTriplets(tm.begin(), tm.end());
        return {std::move(dM), std::move(dK)};
    }

private:
    std::shared_ptr<const TriMesh> mesh_;
    std::vector<fe::TriangleTensors> tensors_;
    detail::ScatterMap<6> scatter_;
};

/// Assembled pencil (M, K) of the relaxed Neumann problem  M u = μ K u.
struct OperatorPair {
    SparseMatrix M;
    SparseMatrix K;
    double epsilon = 0.0;
    Scheme scheme = Scheme::EpsEps2;
    /// Set for 2D pairs; used by the sensitivity routines.
    std::shared_ptr<const TriDiscretization> disc;
    /// P1 density the pair was assembled from.
    Eigen::VectorXd rho;
};

inline OperatorPair assemble(std::shared_ptr<const TriDiscretization> disc, const Eigen::VectorXd& rho,
                             double eps, Scheme scheme)
{
    detail::require(disc != nullptr, "assemble: null discretization");
    if (scheme == Scheme::Unrelaxed) {
        detail::require(rho.size() > 0 && rho.minCoeff() > 0.0,
                        "assemble: unrelaxed scheme needs a strictly positive density");
        eps = 0.0;
    } else {
        detail::require(eps > 0.0, "assemble: relaxation parameter must be positive");
    }
    const auto [ss, ms] = scheme_shifts(scheme, eps);
    auto [M, K] = disc->assemble(rho, ss, ms);
    return OperatorPair{std::move(M), std::move(K), eps, scheme, std::move(disc), rho};
}

inline OperatorPair assemble(const DensityField& rho, double eps, Scheme scheme)
{
    return assemble(std::make_shared<const TriDiscretization>(rho.mesh_ptr()), rho.values(), eps, scheme);
}

/// Unrelaxed pair on a mesh where ρ > 0 everywhere.
inline OperatorPair assemble_unrelaxed(const DensityField& rho) { return assemble(rho, 0.0, Scheme::Unrelaxed); }

inline std::pair<SparseMatrix, SparseMatrix> entry_sensitivities(const TriDiscretization& disc, Eigen::Index l)
{
    return disc.entry_sensitivities(l);
}

/// Two-density pencil on an interval: stiffness weight ρ₁+ε, mass weight ρ₂+ε², P2 elements.
/// DOF 2i is node i, DOF 2i+1 the midpoint of cell i.
inline OperatorPair assemble_1d(const DensityField1D& rho1, const DensityField1D& rho2, double eps)
{
    const auto& mesh = rho1.mesh();
    detail::require(mesh.cells() == rho2.mesh().cells() && mesh.length() == rho2.mesh().length(),
                    "assemble_1d: densities live on different meshes");
    detail::require(eps >= 0.0, "assemble_1d: relaxation parameter must be nonnegative");
    if (eps == 0.0)
        detail::require(rho2.min_value() > 0.0,
                        "assemble_1d: mass density must be bounded below when eps = 0");
    const int n = mesh.cells();
    const auto ndof = static_cast<Eigen::Index>(mesh.p2_dof_count());
    const auto T = fe::interval_tensors(mesh.spacing());
    std::vector<Eigen::Triplet<double>> tm, tk;
    tm.reserve(static_cast<std::size_t>(9 * n));
    tk.reserve(static_cast<std::size_t>(9 * n));
    for (int c = 0; c < n; ++c) {
        const std::array<int, 3> d = {2 * c, 2 * c + 1, 2 * c + 2};
        const double s0 = rho1[c] + eps, s1 = rho1[c + 1] + eps;
        const double m0 = rho2[c] + eps * eps, m1 = rho2[c + 1] + eps * eps;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                tm.emplace_back(d[i], d[j], s0 * T.stiff[0][3 * i + j] + s1 * T.stiff[1][3 * i + j]);
                tk.emplace_back(d[i], d[j], m0 * T.mass[0][3 * i + j] + m1 * T.mass[1][3 * i + j]);
            }
    }
    OperatorPair out;
    out.M.resize(ndof, ndof);
    out.K.resize(ndof, ndof);
    out.M.setFromTriplets(tm.begin(), tm.end());
    out.K.setFromTriplets(tk.begin(), tk.end());
    out.epsilon = eps;
    out.scheme = eps > 0.0 ? Scheme::EpsEps2 : Scheme::Unrelaxed;
    out.rho = rho2.values();
    return out;
}

/// Coordinate dump "i j value", sorted by (i, j).
inline void write_matrix_coo(std::ostream& os, const SparseMatrix& A)
{
    std::vector<std::tuple<int, int, double>> entries;
    entries.reserve(static_cast<std::size_t>(A.nonZeros()));
    for (int k = 0; k < A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(A, k); it; ++it)
            entries.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    std::sort(entries.begin(), entries.end());
    const auto prec = os.precision(17);
    for (const auto& [i, j, v] : entries) os << i << ' ' << j << ' ' << v << '\n';
    os.precision(prec);
}

} // namespace densopt
