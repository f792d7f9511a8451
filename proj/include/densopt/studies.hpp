#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "densopt/assembly.hpp"
#include "densopt/density.hpp"
#include "densopt/eigensolve.hpp"
#include "densopt/error.hpp"
#include "densopt/io.hpp"
#include "densopt/mesh.hpp"
#include "densopt/oned.hpp"

namespace densopt {

namespace detail {

/// Fixed-point text for CSV cells; stable across runs.
inline std::string fixed(double v, int digits = 6)
{
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace detail

// ---------------------------------------------------------------------------------------------
// Spurious modes: disk of radius 0.4 centred in the square (-0.5, 0.5)^2, both relaxations.

inline const std::vector<double>& spurious_eps_values()
{
    static const std::vector<double> v = {0.1, 0.05, 0.01, 0.005, 0.001, 5e-4, 1e-4, 5e-5, 1e-5};
    return v;
}

struct SpuriousRow {
    double eps = 0.0;
    /// μ_1..μ_7 with stiffness and mass weights ρ+ε.
    std::array<double, 7> eps_eps{};
    /// μ_1..μ_3 with weights ρ+ε and ρ+ε².
    std::array<double, 3> eps_eps2{};
};

inline DensityField spurious_density(int cells)
{
    detail::require(cells >= 2, "spurious: mesh needs at least 2 cells per side");
    auto mesh = std::make_shared<const TriMesh>(build_tri_mesh(cells, cells, Rect{-0.5, -0.5, 0.5, 0.5}));
    return disk_indicator(mesh, Point2{0.0, 0.0}, 0.4);
}

inline std::vector<SpuriousRow> spurious_table(int cells, const std::vector<double>& eps_values,
                                               const EigenOptions& opts = {})
{
    const DensityField rho = spurious_density(cells);
    auto disc = std::make_shared<const TriDiscretization>(rho.mesh_ptr());
    std::vector<SpuriousRow> rows;
    for (double eps : eps_values) {
        SpuriousRow row;
        row.eps = eps;
        const auto a = solve_lowest(assemble(disc, rho.values(), eps, Scheme::EpsEps), 8, opts);
        for (std::size_t i = 0; i < row.eps_eps.size(); ++i) row.eps_eps[i] = a[i + 1];
        const auto b = solve_lowest(assemble(disc, rho.values(), eps, Scheme::EpsEps2), 4, opts);
        for (std::size_t i = 0; i < row.eps_eps2.size(); ++i) row.eps_eps2[i] = b[i + 1];
        rows.push_back(row);
    }
    return rows;
}

inline void write_spurious_csv(std::ostream& os, const std::vector<SpuriousRow>& rows)
{
    os << "eps";
    for (int i = 1; i <= 7; ++i) os << ",eps_eps_mu" << i;
    for (int i = 1; i <= 3; ++i) os << ",eps_eps2_mu" << i;
    os << '\n';
    for (const auto& r : rows) {
        char e[32];
        std::snprintf(e, sizeof e, "%g", r.eps);
        os << e;
        for (double v : r.eps_eps) os << ',' << detail::fixed(v, 4);
        for (double v : r.eps_eps2) os << ',' << detail::fixed(v, 4);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------------------------
// Reference values of ‖ρ‖₁μ_k for optimal densities and for the best unions of discs.

struct ReferenceRow {
    int k = 0;
    double optimal_density = 0.0;
    double union_of_discs = 0.0;
    int multiplicity = 1;
};

inline const std::vector<ReferenceRow>& reference_rows()
{
    static const std::vector<ReferenceRow> rows = {
        {1, 10.65, 10.65, 2}, {2, 21.28, 21.30, 2}, {3, 32.92, 31.95, 3}, {4, 43.90, 42.60, 3},
        {5, 54.47, 53.25, 3}, {6, 67.25, 63.90, 4}, {7, 77.96, 74.55, 4}, {8, 89.47, 88.85, 4},
    };
    return rows;
}

inline const ReferenceRow& reference_row(int k)
{
    for (const auto& r : reference_rows())
        if (r.k == k) return r;
    throw InputError("no reference values for k = " + std::to_string(k) + " (available: 1..8)");
}

// ---------------------------------------------------------------------------------------------
// Built-in density corpus.

struct CorpusEntry {
    std::string name;
    AnyDensity rho;
};

/// Uniform, single disks, two disks and smooth random fields on the unit square.
inline std::vector<CorpusEntry> builtin_corpus_2d(int cells, int random_fields = 4, std::uint64_t seed = 11)
{
    detail::require(cells >= 2, "corpus: mesh needs at least 2 cells per side");
    auto mesh = std::make_shared<const TriMesh>(build_tri_mesh(cells, cells, Rect{0.0, 0.0, 1.0, 1.0}));
    std::vector<CorpusEntry> out;
    out.push_back({"2d_uniform_1.0", uniform_density(mesh, 1.0)});
    out.push_back({"2d_uniform_0.4", uniform_density(mesh, 0.4)});
    out.push_back({"2d_disk_r0.36", disk_indicator(mesh, Point2{0.5, 0.5}, 0.36)});
    out.push_back({"2d_disk_r0.25", disk_indicator(mesh, Point2{0.4, 0.55}, 0.25)});
    out.push_back({"2d_two_disks", disks_indicator(mesh, {Disk{{0.27, 0.5}, 0.2}, Disk{{0.73, 0.5}, 0.2}})});
    out.push_back({"2d_two_disks_unequal", disks_indicator(mesh, {Disk{{0.3, 0.3}, 0.22}, Disk{{0.72, 0.7}, 0.15}})});
    for (int i = 0; i < random_fields; ++i) {
        const auto s = seed + static_cast<std::uint64_t>(i);
        const double lo = i % 2 == 0 ? 0.0 : 0.1;
        out.push_back({"2d_random_" + std::to_string(i), random_smooth_field(mesh, s, lo, 1.0)});
    }
    return out;
}

/// Equal-segment indicators (k = 1..3, mass 0.4) and random piecewise-constant densities on [0, 1].
inline std::vector<CorpusEntry> builtin_corpus_1d(int cells, int random_count = 4, std::uint64_t seed = 23)
{
    detail::require(cells >= 2, "corpus: mesh needs at least 2 cells");
    auto mesh = std::make_shared<const IntervalMesh>(1.0, cells);
    std::vector<CorpusEntry> out;
    for (int k = 1; k <= 3; ++k)
        out.push_back({"1d_segments_" + std::to_string(k), segments_indicator_1d(mesh, equal_segments(k, 0.4))});
    for (int i = 0; i < random_count; ++i)
        out.push_back({"1d_random_" + std::to_string(i),
                       random_piecewise_1d(mesh, seed + static_cast<std::uint64_t>(i), 6, 0.1, 1.0)});
    return out;
}

// ---------------------------------------------------------------------------------------------
// Upper-bound audit.

struct AuditRow {
    std::string name;
    int dimension = 2;
    int k = 0;
    double mu = 0.0;
    double mass = 0.0;
    double sup_norm = 0.0;
    /// Proved bound checked for this dimension (Kröger for N ≥ 2, π²k²/m² for N = 1).
    double bound = 0.0;
    /// Conjectured Pólya value 4π²k^{2/N}/(ω_N m)^{2/N}, reported only.
    double polya = 0.0;
    /// (bound − μ_k)/bound.
    double margin = 0.0;
    bool violation = false;
};

inline double polya_value(int N, int k, double mass)
{
    const double pi2 = std::numbers::pi * std::numbers::pi;
    return 4.0 * pi2 * std::pow(k / (unit_ball_volume(N) * mass), 2.0 / N);
}

/// μ_1..μ_kmax of one density against the proved bound. Densities with zeros are solved with
/// the ε–ε² relaxation, strictly positive ones without relaxation.
inline std::vector<AuditRow> audit_density(const std::string& name, const AnyDensity& any, int kmax, double eps,
                                           double slack = 5e-3, const EigenOptions& opts = {})
{
    detail::require(kmax >= 1, "audit: kmax must be at least 1");
    std::vector<AuditRow> rows;
    std::vector<double> mu;
    int N = 0;
    double m = 0.0, sup = 0.0;
    if (const auto* r2 = std::get_if<DensityField>(&any)) {
        N = 2;
        m = mass(*r2);
        sup = r2->max_value();
        detail::require(m > 0.0, "audit: density '" + name + "' has zero mass");
        const bool positive = r2->min_value() > 0.0;
        mu = solve_lowest(positive ? assemble_unrelaxed(*r2) : assemble(*r2, eps, Scheme::EpsEps2), kmax + 1, opts)
                 .eigenvalues;
    } else {
        const auto& r1 = std::get<DensityField1D>(any);
        N = 1;
        m = mass(r1);
        sup = r1.max_value();
        detail::require(m > 0.0, "audit: density '" + name + "' has zero mass");
        mu = spectrum_1d(r1, r1, kmax, r1.min_value() > 0.0 ? 0.0 : eps, opts).eigenvalues;
    }
    for (int k = 1; k <= kmax; ++k) {
        AuditRow row;
        row.name = name;
        row.dimension = N;
        row.k = k;
        row.mu = mu[static_cast<std::size_t>(k)];
        row.mass = m;
        row.sup_norm = sup;
        row.bound = N == 1 ? sharp_bound(k, m) : kroger_bound(N, k, sup, m);
        row.polya = polya_value(N, k, m);
        row.margin = (row.bound - row.mu) / row.bound;
        row.violation = row.mu > row.bound * (1.0 + slack);
        rows.push_back(row);
    }
    return rows;
}

inline void write_audit_csv(std::ostream& os, const std::vector<AuditRow>& rows)
{
    os << "name,N,k,mu,mass,sup_norm,bound,margin,polya,violation\n";
    for (const auto& r : rows)
        os << r.name << ',' << r.dimension << ',' << r.k << ',' << detail::fixed(r.mu) << ',' << detail::fixed(r.mass)
           << ',' << detail::fixed(r.sup_norm) << ',' << detail::fixed(r.bound) << ',' << detail::fixed(r.margin)
           << ',' << detail::fixed(r.polya) << ',' << (r.violation ? 1 : 0) << '\n';
}

} // namespace densopt
