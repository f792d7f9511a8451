#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace densopt;

TEST(Studies, ReferenceRows)
{
    EXPECT_EQ(reference_rows().size(), 8u);
    EXPECT_EQ(reference_row(1).optimal_density, 10.65);
    EXPECT_EQ(reference_row(3).union_of_discs, 31.95);
    EXPECT_EQ(reference_row(6).multiplicity, 4);
    EXPECT_THROW(reference_row(0), InputError);
    EXPECT_THROW(reference_row(9), InputError);
    for (const auto& r : reference_rows()) EXPECT_GE(r.optimal_density, r.union_of_discs - 0.05);
}

TEST(Studies, SpuriousCsvLayout)
{
    const auto rows = spurious_table(12, {0.1});
    ASSERT_EQ(rows.size(), 1u);
    // ε–ε² keeps the double first eigenvalue above the spurious ε–ε value
    EXPECT_GT(rows[0].eps_eps2[0], rows[0].eps_eps[0]);
    std::ostringstream os;
    write_spurious_csv(os, rows);
    const auto text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')),
              "eps,eps_eps_mu1,eps_eps_mu2,eps_eps_mu3,eps_eps_mu4,eps_eps_mu5,eps_eps_mu6,eps_eps_mu7,"
              "eps_eps2_mu1,eps_eps2_mu2,eps_eps2_mu3");
    EXPECT_EQ(text.substr(text.find('\n') + 1, 4), "0.1,");
}

TEST(Studies, PolyaValue)
{
    // N = 2: 4πk/m
    EXPECT_NEAR(polya_value(2, 3, 0.5), 4 * std::numbers::pi * 3 / 0.5, 1e-12);
    // N = 1: π²k²/m²
    EXPECT_NEAR(polya_value(1, 2, 0.4), sharp_bound(2, 0.4), 1e-10);
}

TEST(Studies, CorpusContents)
{
    const auto c2 = builtin_corpus_2d(8, 2);
    EXPECT_EQ(c2.size(), 8u);
    for (const auto& e : c2) EXPECT_TRUE(std::holds_alternative<DensityField>(e.rho)) << e.name;
    const auto c1 = builtin_corpus_1d(50, 2);
    EXPECT_EQ(c1.size(), 5u);
    for (const auto& e : c1) EXPECT_GT(mass(std::get<DensityField1D>(e.rho)), 0.0) << e.name;
}

TEST(Studies, AuditOfUniformSquare)
{
    const auto rows = audit_density("u", uniform_density(test::grid(10), 1.0), 4, 1e-3);
    ASSERT_EQ(rows.size(), 4u);
    for (const auto& r : rows) {
        EXPECT_FALSE(r.violation);
        EXPECT_GT(r.margin, 0.0);
        EXPECT_EQ(r.dimension, 2);
    }
    // μ₁ of the unit square is π², below the Kröger value 8π
    EXPECT_NEAR(rows[0].mu, std::numbers::pi * std::numbers::pi, 1e-3);
    EXPECT_NEAR(rows[0].bound, 8 * std::numbers::pi, 1e-9);
    std::ostringstream os;
    write_audit_csv(os, rows);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "name,N,k,mu,mass,sup_norm,bound,margin,polya,violation");
}

TEST(Studies, AuditOfSegments)
{
    const auto mesh = test::interval(800);
    const auto rows = audit_density("s", segments_indicator_1d(mesh, equal_segments(2, 0.4)), 3, 1e-4);
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) EXPECT_FALSE(r.violation) << r.k;
    // two segments are sharp for k = 2
    EXPECT_NEAR(rows[1].margin, 0.0, 1e-2);
}
