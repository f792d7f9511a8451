#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "densopt/assembly.hpp"
#include "densopt/eigensolve.hpp"
#include "densopt/error.hpp"

namespace densopt {

/// Group of eigenvalues μ_k .. μ_{k+width-1} lying within σ of μ_k.
struct ClusterSpec {
    int k = 1;
    /// Number of eigenvalues in the cluster (1 = simple).
    int width = 1;
    double sigma = 0.1;
    /// True when the cluster may continue past the last computed eigenvalue.
    bool truncated = false;
};

/// Per-P1-DOF derivative of an objective, with the objective's value.
struct GradientReport {
    Eigen::VectorXd values;
    double objective_value = 0.0;
};

/// Threshold below which neighbouring eigenvalues count as numerically equal.
inline constexpr double kSimpleGap = 1e-8;

inline ClusterSpec detect_cluster(const Spectrum& s, int k, double sigma)
{
    detail::require(k >= 0 && static_cast<std::size_t>(k) < s.size(), "detect_cluster: k outside the computed spectrum");
    ClusterSpec c{k, 1, sigma, false};
    const double base = s[static_cast<std::size_t>(k)];
    std::size_t j = static_cast<std::size_t>(k) + 1;
    while (j < s.size() && s[j] - base < sigma) ++j;
    c.width = static_cast<int>(j) - k;
    c.truncated = (j == s.size());
    return c;
}

namespace detail {

/// Element-local evaluation of  u^T (dM/dρ_l - μ dK/dρ_l) u  for every vertex l.
inline Eigen::VectorXd rayleigh_sensitivity(const TriDiscretization& disc, const Eigen::Ref<const Eigen::VectorXd>& u,
                                            double mu)
{
    const auto& mesh = disc.mesh();
    const auto& tris = mesh.triangles();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.vertex_count()));
    for (std::size_t e = 0; e < tris.size(); ++e) {
        const auto d = mesh.p2_dofs(e);
        std::array<double, 6> ue{};
        for (std::size_t i = 0; i < 6; ++i) ue[i] = u[d[i]];
        const auto& T = disc.tensors()[e];
        for (std::size_t v = 0; v < 3; ++v) {
            double qs = 0.0, qm = 0.0;
            for (std::size_t i = 0; i < 6; ++i) {
                double rs = 0.0, rm = 0.0;
                for (std::size_t j = 0; j < 6; ++j) {
                    rs += T.stiff[v][6 * i + j] * ue[j];
                    rm += T.mass[v][6 * i + j] * ue[j];
                }
                qs += ue[i] * rs;
                qm += ue[i] * rm;
            }
            g[tris[e][v]] += qs - mu * qm;
        }
    }
    return g;
}

inline void require_sensitivity_inputs(const OperatorPair& pair, const Spectrum& s)
{
    detail::require(pair.disc != nullptr, "sensitivity: operator pair carries no 2D discretization");
    detail::require(s.eigenvectors.rows() == pair.M.rows(), "sensitivity: spectrum does not match operator pair");
}

} // namespace detail

/// Gradient of a simple eigenvalue μ_k with respect to the nodal densities:
///   ∂μ_k/∂ρ_l = [u_kᵀ ∂M/∂ρ_l u_k − μ_k u_kᵀ ∂K/∂ρ_l u_k] / (u_kᵀ K u_k).
/// Throws if μ_k is numerically multiple; use cluster_objective_gradient then.
inline GradientReport eig_gradient(const OperatorPair& pair, const Spectrum& s, int k)
{
    detail::require_sensitivity_inputs(pair, s);
    detail::require(k >= 0 && static_cast<std::size_t>(k) < s.size(), "eig_gradient: k outside the computed spectrum");
    const auto ku = static_cast<std::size_t>(k);
    const double mu = s[ku];
    const double scale = std::max(1.0, std::abs(mu));
    if ((ku > 0 && mu - s[ku - 1] <= kSimpleGap * scale) || (ku + 1 < s.size() && s[ku + 1] - mu <= kSimpleGap * scale))
        throw InputError("eig_gradient: eigenvalue " + std::to_string(k) + " is multiple; use the cluster objective");
    const auto u = s.eigenvectors.col(k);
    const double norm = u.dot(pair.K * u);
    GradientReport r;
    r.values = detail::rayleigh_sensitivity(*pair.disc, u, mu) / norm;
    r.objective_value = mu;
    return r;
}

/// Smooth surrogate for a cluster of width l starting at k:
///   f = Σ_i μ_{k+i} − β Σ_{i<j} (μ_{k+i} − μ_{k+j})²,
/// differentiated with per-eigenvector Rayleigh sensitivities. The sum term only depends on the
/// eigenspace, so its gradient is the same for any K-orthonormal basis of a degenerate cluster.
inline GradientReport cluster_objective_gradient(const OperatorPair& pair, const Spectrum& s, const ClusterSpec& c,
                                                 double beta)
{
    detail::require_sensitivity_inputs(pair, s);
    detail::require(c.k >= 0 && c.width >= 1, "cluster_objective_gradient: invalid cluster");
    detail::require(static_cast<std::size_t>(c.k + c.width) <= s.size(),
                    "cluster_objective_gradient: cluster spans past the computed spectrum");
    detail::require(beta >= 0.0, "cluster_objective_gradient: beta must be nonnegative");
    const int l = c.width;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < l; ++i) {
        const double mu = s[static_cast<std::size_t>(c.k + i)];
        sum += mu;
        sumsq += mu * mu;
    }
    // Σ_{i<j} (μ_i − μ_j)² = l Σμ² − (Σμ)²,  d/dμ_i = 2 (l μ_i − Σμ)
    GradientReport r;
    r.objective_value = sum - beta * (l * sumsq - sum * sum);
    r.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pair.disc->mesh().vertex_count()));
    for (int i = 0; i < l; ++i) {
        const auto u = s.eigenvectors.col(c.k + i);
        const double mu = s[static_cast<std::size_t>(c.k + i)];
        const double weight = 1.0 - beta * 2.0 * (l * mu - sum);
        r.values += weight * detail::rayleigh_sensitivity(*pair.disc, u, mu) / u.dot(pair.K * u);
    }
    return r;
}

} // namespace densopt
