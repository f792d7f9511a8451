#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace densopt;
using densopt::test::grid;

TEST(Postprocess, FullDensityKeepsEverything)
{
    const auto rho = uniform_density(grid(8), 1.0);
    const auto sx = extract_support(rho);
    EXPECT_EQ(sx.kept_triangles.size(), rho.mesh().triangle_count());
    EXPECT_EQ(sx.component_count(), 1u);
    EXPECT_EQ(sx.rho.mesh().vertex_count(), rho.mesh().vertex_count());
    for (long v : sx.vertex_map) EXPECT_GE(v, 0);
}

TEST(Postprocess, FullDensityMatchesPlainNeumannSolve)
{
    const auto rho = random_smooth_field(grid(16), 3, 0.2, 1.0);
    const auto plain = solve_lowest(assemble_unrelaxed(rho), 4);
    for (int k = 1; k <= 3; ++k)
        EXPECT_NEAR(postprocessed_mu(rho, 0.01, k), plain[static_cast<std::size_t>(k)], 1e-9 * plain[static_cast<std::size_t>(k)]);
}

TEST(Postprocess, DiskSupportArea)
{
    const int n = 64;
    const auto rho = spurious_density(n);
    const auto sx = extract_support(rho);
    const double h = 1.0 / n;
    EXPECT_EQ(sx.component_count(), 1u);
    EXPECT_NEAR(sx.rho.mesh().total_area(), std::numbers::pi * 0.16, 2 * std::numbers::pi * 0.4 * 2 * h);
    EXPECT_LT(sx.rho.mesh().total_area(), std::numbers::pi * 0.16);
}

TEST(Postprocess, DiskEigenvalue)
{
    // kept triangles lie inside the disk, so the support radius is short by O(h)
    const double exact = std::pow(1.8411837813 / 0.4, 2);
    const auto mu = postprocessed_mu(spurious_density(96), 0.01, 1);
    EXPECT_GT(mu, exact);
    EXPECT_NEAR(mu / exact, 1.0, 0.03);
}

TEST(Postprocess, RenumberingIsABijection)
{
    const auto rho = disk_indicator(grid(20), {0.4, 0.5}, 0.3);
    const auto sx = extract_support(rho);
    std::vector<int> seen(sx.rho.mesh().vertex_count(), 0);
    for (std::size_t v = 0; v < sx.vertex_map.size(); ++v) {
        if (sx.vertex_map[v] < 0) continue;
        EXPECT_GT(rho[static_cast<Eigen::Index>(v)], 0.01);
        ++seen[static_cast<std::size_t>(sx.vertex_map[v])];
        EXPECT_EQ(sx.rho[sx.vertex_map[v]], rho[static_cast<Eigen::Index>(v)]);
    }
    for (int c : seen) EXPECT_EQ(c, 1);
}

TEST(Postprocess, TwoDisksGiveTwoComponents)
{
    const auto rho = disks_indicator(grid(40), {Disk{{0.27, 0.5}, 0.2}, Disk{{0.73, 0.5}, 0.2}});
    const auto sx = extract_support(rho);
    ASSERT_EQ(sx.component_count(), 2u);
    std::size_t total = 0;
    for (const auto& c : sx.components) total += c.triangles.size();
    EXPECT_EQ(total, sx.kept_triangles.size());
}

TEST(Postprocess, MergedSpectrumIsTheUnionOfComponentSpectra)
{
    const auto rho = disks_indicator(grid(32), {Disk{{0.3, 0.3}, 0.22}, Disk{{0.72, 0.7}, 0.15}});
    const auto sx = extract_support(rho);
    ASSERT_EQ(sx.component_count(), 2u);
    std::vector<double> expected;
    for (const auto& c : sx.components) {
        const auto s = unrelaxed_solve_on_support(c.rho, 6);
        expected.insert(expected.end(), s.eigenvalues.begin(), s.eigenvalues.end());
    }
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(merged_support_spectrum(sx, 6), expected);
    // two components: two zero eigenvalues
    EXPECT_NEAR(postprocessed_mu(rho, 0.01, 1), 0.0, 1e-8);
    EXPECT_GT(postprocessed_mu(rho, 0.01, 2), 1.0);
}

TEST(Postprocess, Errors)
{
    const auto mesh = grid(6);
    EXPECT_THROW(extract_support(uniform_density(mesh, 0.0)), InputError);
    EXPECT_THROW(extract_support(uniform_density(mesh, 1.0), 0.0), InputError);
    EXPECT_THROW(extract_support(uniform_density(mesh, 1.0), 1.0), InputError);
}

TEST(Postprocess, SummaryLine)
{
    const auto sx = extract_support(uniform_density(grid(2), 1.0));
    std::ostringstream os;
    write_support_summary(os, sx);
    EXPECT_EQ(os.str(), "components 1 triangles 8 vertices 9 area 1\n");
}
