#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace densopt;
using densopt::test::grid;

namespace {

constexpr double pi2 = std::numbers::pi * std::numbers::pi;

EigenOptions iterative()
{
    EigenOptions o;
    o.dense_threshold = 0;
    return o;
}

} // namespace

TEST(Eigensolve, NeumannSquareSpectrum)
{
    // (−1,1)²: μ = π²/4 (p² + q²)
    const auto rho = uniform_density(grid(16, Rect{-1, -1, 1, 1}), 1.0);
    const auto s = solve_lowest(assemble(rho, 1e-8, Scheme::EpsEps2), 8, iterative());
    const std::vector<double> exact = {0, 1, 1, 2, 4, 4, 5, 5};
    EXPECT_NEAR(s[0], 0.0, 1e-9);
    for (std::size_t i = 1; i < exact.size(); ++i) EXPECT_NEAR(s[i] / (pi2 / 4 * exact[i]), 1.0, 5e-3) << "i=" << i;
}

TEST(Eigensolve, DiskFirstEigenvalue)
{
    // (p'₁₁/0.4)² with p'₁₁ = 1.841184
    const double exact = std::pow(1.8411837813 / 0.4, 2);
    const auto rho = spurious_density(40);
    const auto s = solve_lowest(assemble(rho, 1e-3, Scheme::EpsEps2), 3);
    EXPECT_NEAR(s[1] / exact, 1.0, 0.03);
    EXPECT_NEAR(s[1] / s[2], 1.0, 2e-3);
}

TEST(Eigensolve, KOrthonormalSortedAndAccurate)
{
    const auto rho = random_smooth_field(grid(20), 3, 0.05, 1.0);
    const auto pair = assemble(rho, 1e-3, Scheme::EpsEps2);
    const auto s = solve_lowest(pair, 6, iterative());
    ASSERT_EQ(s.size(), 6u);
    const Eigen::MatrixXd G = s.eigenvectors.transpose() * (pair.K * s.eigenvectors);
    EXPECT_LT((G - Eigen::MatrixXd::Identity(6, 6)).norm(), 1e-8);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s[i - 1], s[i]);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_LE(s.residual_norms[i], 1e-9);
        EXPECT_NEAR(rayleigh(pair, s.eigenvectors.col(static_cast<Eigen::Index>(i))), s[i], 1e-9 * std::max(1.0, s[i]));
    }
}

TEST(Eigensolve, MatchesDenseSolver)
{
    const auto rho = random_smooth_field(grid(8), 8, 0.1, 1.0);
    const auto pair = assemble(rho, 1e-3, Scheme::EpsEps2);
    EigenOptions dense;
    dense.dense_threshold = 100000;
    const auto a = solve_lowest(pair, 7, dense);
    const auto b = solve_lowest(pair, 7, iterative());
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(a[i], b[i], 1e-8 * std::max(1.0, a[i]));
}

TEST(Eigensolve, MinMaxLowerBounds)
{
    const auto rho = random_smooth_field(grid(12), 4, 0.1, 1.0);
    const auto pair = assemble(rho, 1e-3, Scheme::EpsEps2);
    const int k = 3;
    const auto s = solve_lowest(pair, k + 1, iterative());
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd v(pair.M.rows());
        for (auto& x : v) x = nd(gen);
        EXPECT_GE(rayleigh(pair, v), s[0] - 1e-12);
        // K-orthogonal to the first k eigenvectors: quotient at least μ_k
        const Eigen::MatrixXd U = s.eigenvectors.leftCols(k);
        v -= U * (U.transpose() * (pair.K * v));
        EXPECT_GE(rayleigh(pair, v), s[static_cast<std::size_t>(k)] * (1 - 1e-9));
    }
}

TEST(Eigensolve, UnrelaxedScaleInvariance)
{
    const auto mesh = grid(14);
    const auto rho = random_smooth_field(mesh, 6, 0.2, 0.9);
    const DensityField scaled(mesh, rho.values() / 3.0);
    const auto a = solve_lowest(assemble_unrelaxed(rho), 5, iterative());
    const auto b = solve_lowest(assemble_unrelaxed(scaled), 5, iterative());
    for (std::size_t i = 1; i < 5; ++i) EXPECT_NEAR(a[i] / b[i], 1.0, 1e-9);
}

TEST(Eigensolve, Deterministic)
{
    const auto rho = disk_indicator(grid(24), {0.5, 0.5}, 0.35);
    const auto pair = assemble(rho, 1e-3, Scheme::EpsEps2);
    const auto a = solve_lowest(pair, 5, iterative());
    const auto b = solve_lowest(pair, 5, iterative());
    EXPECT_EQ(a.eigenvalues, b.eigenvalues);
    EXPECT_EQ((a.eigenvectors - b.eigenvectors).norm(), 0.0);
}

TEST(Eigensolve, WarmStartAgrees)
{
    const auto mesh = grid(24);
    const auto rho = random_smooth_field(mesh, 2, 0.0, 1.0);
    const auto pair = assemble(rho, 1e-3, Scheme::EpsEps2);
    const auto cold = solve_lowest(pair, 5, iterative());
    Eigen::VectorXd v = rho.values();
    v += 0.01 * Eigen::VectorXd::Ones(v.size());
    const auto near = assemble(DensityField(mesh, clamp_unit(v)), 1e-3, Scheme::EpsEps2);
    auto opts = iterative();
    opts.warm_start = &cold.eigenvectors;
    const auto warm = solve_lowest(near, 5, opts);
    const auto ref = solve_lowest(near, 5, iterative());
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(warm[i], ref[i], 1e-8 * std::max(1.0, ref[i]));
}

TEST(Eigensolve, ConvergesAsRelaxationVanishes)
{
    const auto rho = spurious_density(20);
    std::vector<double> mu;
    for (double eps : {1e-2, 1e-3, 1e-4, 1e-5}) mu.push_back(solve_lowest(assemble(rho, eps, Scheme::EpsEps2), 2)[1]);
    const double d1 = std::abs(mu[1] - mu[0]), d2 = std::abs(mu[2] - mu[1]), d3 = std::abs(mu[3] - mu[2]);
    EXPECT_LT(d2, d1);
    EXPECT_LT(d3, d2);
}

TEST(Eigensolve, RejectsBadCounts)
{
    const auto pair = assemble(uniform_density(grid(2), 1.0), 1e-3, Scheme::EpsEps2);
    EXPECT_THROW(solve_lowest(pair, 0), InputError);
    EXPECT_THROW(solve_lowest(pair, 1000), InputError);
}
