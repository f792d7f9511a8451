#include <algorithm>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace densopt;
using densopt::test::grid;

namespace {

EigenOptions tight()
{
    EigenOptions o;
    o.tol = 1e-12;
    return o;
}

/// μ_k + ... + μ_{k+width-1} of the ε–ε pencil (weights may leave [0,1]).
double pair_sum(const std::shared_ptr<const TriDiscretization>& disc, const Eigen::VectorXd& rho, double eps, int k,
                int width)
{
    const auto sp = solve_lowest(assemble(disc, rho, eps, Scheme::EpsEps), k + width + 1, tight());
    double v = 0.0;
    for (int i = k; i < k + width; ++i) v += sp[static_cast<std::size_t>(i)];
    return v;
}

} // namespace

TEST(Sensitivity, SimpleEigenvalueMatchesFiniteDifferences)
{
    const auto rho = random_smooth_field(grid(10), 13, 0.2, 0.8);
    auto disc = std::make_shared<const TriDiscretization>(rho.mesh_ptr());
    const double eps = 1e-3, delta = 1e-6;
    for (int k = 1; k <= 3; ++k) {
        const auto pair = assemble(disc, rho.values(), eps, Scheme::EpsEps2);
        const auto s = solve_lowest(pair, k + 2, tight());
        const auto g = eig_gradient(pair, s, k);
        EXPECT_EQ(g.objective_value, s[static_cast<std::size_t>(k)]);
        for (Eigen::Index l : {12, 40, 61}) {
            Eigen::VectorXd p = rho.values(), m = rho.values();
            p[l] += delta;
            m[l] -= delta;
            const double fp = solve_lowest(assemble(disc, p, eps, Scheme::EpsEps2), k + 2, tight())[static_cast<std::size_t>(k)];
            const double fm = solve_lowest(assemble(disc, m, eps, Scheme::EpsEps2), k + 2, tight())[static_cast<std::size_t>(k)];
            const double fd = (fp - fm) / (2 * delta);
            EXPECT_NEAR(g.values[l], fd, 1e-5 * std::abs(fd)) << "k=" << k << " l=" << l;
        }
    }
}

TEST(Sensitivity, ZerothEigenvalueHasNoGradient)
{
    const auto rho = random_smooth_field(grid(8), 3, 0.1, 1.0);
    const auto pair = assemble(rho, 1e-3, Scheme::EpsEps2);
    const auto s = solve_lowest(pair, 3);
    EXPECT_LT(eig_gradient(pair, s, 0).values.lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(Sensitivity, EulerRelationUnrelaxed)
{
    // μ_k(cρ) = μ_k(ρ), so Σ_l ρ_l ∂_l μ_k = 0
    const auto rho = random_smooth_field(grid(12), 21, 0.2, 1.0);
    const auto pair = assemble_unrelaxed(rho);
    const auto s = solve_lowest(pair, 5, tight());
    for (int k = 1; k <= 3; ++k) {
        const auto g = eig_gradient(pair, s, k);
        EXPECT_LT(std::abs(g.values.dot(rho.values())), 1e-8 * s[static_cast<std::size_t>(k)]);
    }
}

TEST(Sensitivity, MultipleEigenvalueRejected)
{
    const auto rho = uniform_density(test::union_jack(8), 1.0);
    const auto pair = assemble_unrelaxed(rho);
    const auto s = solve_lowest(pair, 5, tight());
    ASSERT_NEAR(s[1], s[2], 1e-10 * s[1]);
    EXPECT_THROW(eig_gradient(pair, s, 1), InputError);
    EXPECT_THROW(eig_gradient(pair, s, 2), InputError);
    EXPECT_NO_THROW(eig_gradient(pair, s, 3));
}

TEST(Sensitivity, ClusterOfOneIsTheEigenvalueGradient)
{
    const auto rho = random_smooth_field(grid(8), 5, 0.2, 1.0);
    const auto pair = assemble(rho, 1e-3, Scheme::EpsEps2);
    const auto s = solve_lowest(pair, 4);
    const auto a = eig_gradient(pair, s, 2);
    const auto b = cluster_objective_gradient(pair, s, ClusterSpec{2, 1, 0.1, false}, 0.0);
    EXPECT_LT((a.values - b.values).norm(), 1e-14 * a.values.norm());
    EXPECT_EQ(a.objective_value, b.objective_value);
}

TEST(Sensitivity, ClusterGradientIsBasisInvariant)
{
    // quarter-turn symmetric mesh: μ₁ = μ₂ for ρ ≡ 1
    const auto rho = uniform_density(test::union_jack(10), 1.0);
    const auto pair = assemble(rho, 1e-3, Scheme::EpsEps2);
    const auto s = solve_lowest(pair, 4, tight());
    ASSERT_NEAR(s[1], s[2], 1e-10 * s[1]);
    const ClusterSpec c = detect_cluster(s, 1, 0.1);
    ASSERT_EQ(c.width, 2);
    const auto ref = cluster_objective_gradient(pair, s, c, 10.0);
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
    for (int t = 0; t < 5; ++t) {
        const double th = angle(gen);
        Spectrum r = s;
        const Eigen::VectorXd u1 = s.eigenvectors.col(1), u2 = s.eigenvectors.col(2);
        r.eigenvectors.col(1) = std::cos(th) * u1 + std::sin(th) * u2;
        r.eigenvectors.col(2) = -std::sin(th) * u1 + std::cos(th) * u2;
        const auto g = cluster_objective_gradient(pair, r, c, 10.0);
        EXPECT_LT((g.values - ref.values).lpNorm<Eigen::Infinity>(), 1e-9 * ref.values.lpNorm<Eigen::Infinity>());
    }
}

TEST(Sensitivity, ClusterSumMatchesFiniteDifferences)
{
    // μ₁ + μ₂ is smooth through the double eigenvalue of the symmetric square
    const auto rho = uniform_density(grid(10), 1.0);
    auto disc = std::make_shared<const TriDiscretization>(rho.mesh_ptr());
    const double eps = 1e-3, delta = 1e-6;
    const auto pair = assemble(disc, rho.values(), eps, Scheme::EpsEps);
    const auto s = solve_lowest(pair, 4, tight());
    const auto g = cluster_objective_gradient(pair, s, ClusterSpec{1, 2, 0.1, false}, 0.0);
    for (Eigen::Index l : {14, 33, 60}) {
        Eigen::VectorXd p = rho.values(), m = rho.values();
        p[l] += delta;
        m[l] -= delta;
        const double fd = (pair_sum(disc, p, eps, 1, 2) - pair_sum(disc, m, eps, 1, 2)) / (2 * delta);
        EXPECT_NEAR(g.values[l], fd, 1e-4 * std::abs(fd)) << "l=" << l;
    }
}

TEST(Sensitivity, GradientIsLocal)
{
    const auto mesh = grid(6);
    const TriDiscretization disc(mesh);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(disc.dof_count());
    const std::size_t t = 17;
    const auto d = mesh->p2_dofs(t);
    for (std::size_t i = 0; i < 6; ++i) u[d[i]] = 1.0 + static_cast<double>(i);
    const Eigen::VectorXd g = detail::rayleigh_sensitivity(disc, u, 2.0);
    // only triangles sharing a degree of freedom with t see u
    std::vector<bool> touched(mesh->vertex_count(), false);
    for (std::size_t e = 0; e < mesh->triangle_count(); ++e) {
        const auto de = mesh->p2_dofs(e);
        if (std::ranges::any_of(de, [&](auto x) { return std::ranges::find(d, x) != d.end(); }))
            for (auto v : mesh->triangles()[e]) touched[static_cast<std::size_t>(v)] = true;
    }
    for (Eigen::Index l = 0; l < g.size(); ++l) {
        if (!touched[static_cast<std::size_t>(l)]) {
            EXPECT_EQ(g[l], 0.0) << l;
        }
    }
    EXPECT_GT(g.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Sensitivity, DetectCluster)
{
    Spectrum s;
    s.eigenvalues = {0.0, 10.0, 10.05, 10.3, 20.0};
    EXPECT_EQ(detect_cluster(s, 1, 0.1).width, 2);
    EXPECT_EQ(detect_cluster(s, 3, 0.1).width, 1);
    EXPECT_FALSE(detect_cluster(s, 3, 0.1).truncated);
    EXPECT_TRUE(detect_cluster(s, 4, 0.1).truncated);
    EXPECT_THROW(detect_cluster(s, 5, 0.1), InputError);
}
