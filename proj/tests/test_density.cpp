#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace densopt;
using densopt::test::grid;
using densopt::test::interval;

TEST(Density, UniformMass)
{
    EXPECT_NEAR(mass(uniform_density(grid(10), 1.0)), 1.0, 1e-13);
    EXPECT_NEAR(mass(uniform_density(grid(10), 0.4)), 0.4, 1e-13);
    EXPECT_NEAR(mass(uniform_density(grid(6, Rect{-1, -1, 1, 1}), 1.0)), 4.0, 1e-13);
}

TEST(Density, DiskMassConvergesToArea)
{
    const double exact = std::numbers::pi * 0.16;
    const auto rho = disk_indicator(grid(100, Rect{-1, -1, 1, 1}), {0.0, 0.0}, 0.4);
    const double h = 2.0 / 100;
    EXPECT_NEAR(mass(rho), exact, 2.0 * std::numbers::pi * 0.4 * h);
    EXPECT_NEAR(mass(rho), 0.5027, 0.01);
}

TEST(Density, ProjectBoxClamps)
{
    auto m = grid(1);
    Eigen::VectorXd v(4);
    v << -0.3, 0.5, 1.7, 1.0;
    const auto r = project_box(m, v);
    EXPECT_EQ(r[0], 0.0);
    EXPECT_EQ(r[1], 0.5);
    EXPECT_EQ(r[2], 1.0);
    EXPECT_EQ(r[3], 1.0);
}

TEST(Density, RejectsWrongSizeAndNonFinite)
{
    auto m = grid(2);
    EXPECT_THROW(DensityField(m, Eigen::VectorXd::Zero(3)), InputError);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(9);
    v[4] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(DensityField(m, v), InputError);
}

TEST(Density, RandomFieldRespectsBounds)
{
    const auto r = random_smooth_field(grid(20), 7, 0.1, 0.9);
    EXPECT_NEAR(r.min_value(), 0.1, 1e-12);
    EXPECT_NEAR(r.max_value(), 0.9, 1e-12);
    const auto again = random_smooth_field(grid(20), 7, 0.1, 0.9);
    EXPECT_EQ((r.values() - again.values()).norm(), 0.0);
}

TEST(Density, EqualSegmentsMass)
{
    const auto segs = equal_segments(3, 0.4);
    ASSERT_EQ(segs.size(), 3u);
    double len = 0.0;
    for (auto [l, r] : segs) len += r - l;
    EXPECT_NEAR(len, 0.4, 1e-14);
    const auto rho = segments_indicator_1d(interval(1000), segs);
    EXPECT_NEAR(mass(rho), 0.4, 3 * 2e-3);
}

TEST(Density, OverlappingSegmentsRejected)
{
    EXPECT_THROW(segments_indicator_1d(interval(10), {{0.1, 0.5}, {0.4, 0.6}}), InputError);
    EXPECT_THROW(segments_indicator_1d(interval(10), {{0.5, 1.2}}), InputError);
    EXPECT_NO_THROW(segments_indicator_1d(interval(10), {{0.1, 0.3}, {0.3, 0.6}}));
}

TEST(Density, InterpolateGridReproducesLinearFunctions)
{
    const auto coarse = grid(4);
    Eigen::VectorXd v(static_cast<Eigen::Index>(coarse->vertex_count()));
    for (std::size_t i = 0; i < coarse->vertex_count(); ++i)
        v[static_cast<Eigen::Index>(i)] = 0.2 + 0.3 * coarse->vertices()[i][0] + 0.4 * coarse->vertices()[i][1];
    const auto fine = grid(8);
    const auto r = interpolate_grid(DensityField(coarse, v), fine);
    for (std::size_t i = 0; i < fine->vertex_count(); ++i)
        EXPECT_NEAR(r[static_cast<Eigen::Index>(i)], 0.2 + 0.3 * fine->vertices()[i][0] + 0.4 * fine->vertices()[i][1],
                    1e-14);
}

TEST(Io, RoundTrip2D)
{
    const auto rho = random_smooth_field(grid(5, Rect{-0.5, -0.5, 0.5, 0.5}), 3);
    std::stringstream ss;
    write_density(ss, rho);
    const auto back = std::get<DensityField>(read_density(ss));
    EXPECT_EQ(back.mesh().vertex_count(), rho.mesh().vertex_count());
    EXPECT_EQ((back.values() - rho.values()).norm(), 0.0);
    EXPECT_EQ(back.mesh().grid()->box.x0, -0.5);
}

TEST(Io, RoundTrip1D)
{
    const auto rho = random_piecewise_1d(interval(17, 2.5), 5, 4, 0.1, 1.0);
    std::stringstream ss;
    write_density(ss, rho);
    const auto back = std::get<DensityField1D>(read_density(ss));
    EXPECT_EQ(back.mesh().cells(), 17);
    EXPECT_EQ(back.mesh().length(), 2.5);
    EXPECT_EQ((back.values() - rho.values()).norm(), 0.0);
}

TEST(Io, MalformedInputs)
{
    for (const char* text : {"", "D3 1 2", "D1 1.0", "D1 1.0 2\n0.5\n0.5\n", "D1 1.0 1\n0.5\n0.5\n0.5\n",
                             "D2 1 1 0 0 1 1\n1\n1\n1\n"}) {
        std::istringstream in(text);
        EXPECT_THROW(read_density(in), InputError) << text;
    }
    EXPECT_THROW(read_density_file("/nonexistent/density.txt"), InputError);
}

TEST(Io, CsvGridAndPgm)
{
    const auto rho = uniform_density(grid(3), 0.5);
    std::ostringstream csv;
    write_csv_grid(csv, rho);
    const auto text = csv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
    EXPECT_EQ(std::count(text.begin(), text.end(), ','), 12);
    std::ostringstream pgm;
    write_ppm(pgm, rho);
    const auto img = pgm.str();
    EXPECT_EQ(img.substr(0, 11), "P5\n4 4\n255\n");
    ASSERT_EQ(img.size(), 11u + 16u);
    EXPECT_EQ(static_cast<unsigned char>(img.back()), 128);
}
