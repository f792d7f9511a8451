#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "densopt/assembly.hpp"
#include "densopt/density.hpp"
#include "densopt/eigensolve.hpp"
#include "densopt/error.hpp"
#include "densopt/fe.hpp"
#include "densopt/mesh.hpp"
#include "densopt/quadrature.hpp"

namespace densopt {

/// π²k²/m², the largest μ_k over densities 0 ≤ ρ ≤ 1 of mass m on the line.
inline double sharp_bound(int k, double m)
{
    detail::require(k >= 1, "sharp_bound: k must be at least 1");
    detail::require(m > 0.0, "sharp_bound: mass must be positive");
    const double pk = std::numbers::pi * k;
    return pk * pk / (m * m);
}

/// Volume of the unit ball in R^N.
inline double unit_ball_volume(int N)
{
    return std::pow(std::numbers::pi, 0.5 * N) / std::tgamma(0.5 * N + 1.0);
}

/// 4π²((N+2)k/(2ω_N) · ‖ρ‖∞/‖ρ‖₁)^{2/N}, valid for N ≥ 2.
inline double kroger_bound(int N, int k, double sup_norm, double l1_norm)
{
    detail::require(N >= 2, "kroger_bound: the estimate needs N >= 2");
    detail::require(k >= 1, "kroger_bound: k must be at least 1");
    detail::require(sup_norm > 0.0 && l1_norm > 0.0, "kroger_bound: norms must be positive");
    const double base = (N + 2.0) * k / (2.0 * unit_ball_volume(N)) * sup_norm / l1_norm;
    return 4.0 * std::numbers::pi * std::numbers::pi * std::pow(base, 2.0 / N);
}

/// Upper bound for  −(ρ₁u′)′ = μ ρ₂ u  with Neumann ends:
///   (‖ρ₁‖∞/‖ρ₂‖∞) · π²k² / min(∫ρ₁/‖ρ₁‖∞, ∫ρ₂/‖ρ₂‖∞)².
inline double sturm_liouville_bound(const DensityField1D& rho1, const DensityField1D& rho2, int k)
{
    detail::require(k >= 0, "sturm_liouville_bound: k must be nonnegative");
    detail::require(rho1.min_value() > 0.0 && rho2.min_value() > 0.0,
                    "sturm_liouville_bound: densities must be positive");
    const double s1 = rho1.max_value(), s2 = rho2.max_value();
    const double m = std::min(mass(rho1) / s1, mass(rho2) / s2);
    const double pk = std::numbers::pi * k;
    return (s1 / s2) * pk * pk / (m * m);
}

/// Two weights on [0, a] given as profiles, discretized on demand.
struct TwoDensityProblem {
    double a = 1.0;
    std::function<double(double)> rho1;
    std::function<double(double)> rho2;

    DensityField1D density1(int cells) const
    {
        return sample_1d(std::make_shared<const IntervalMesh>(a, cells), rho1);
    }
    DensityField1D density2(int cells) const
    {
        return sample_1d(std::make_shared<const IntervalMesh>(a, cells), rho2);
    }
    /// min(∫ρ₁, ∫ρ₂) of the discretized weights.
    double m_min(int cells) const { return std::min(mass(density1(cells)), mass(density2(cells))); }
};

inline TwoDensityProblem same_density_problem(double a, std::function<double(double)> rho)
{
    return TwoDensityProblem{a, rho, rho};
}

/// Indicator of a union of closed segments.
inline std::function<double(double)> segments_profile(std::vector<std::pair<double, double>> segs)
{
    return [segs = std::move(segs)](double x) {
        for (const auto& [l, r] : segs)
            if (x >= l && x <= r) return 1.0;
        return 0.0;
    };
}

/// k segments of length m/k spread evenly over [0, a] with equal gaps.
inline std::vector<std::pair<double, double>> equal_segments(int k, double m, double a = 1.0)
{
    detail::require(k >= 1 && m > 0.0 && m < a, "equal_segments: need k >= 1 and 0 < m < a");
    const double len = m / k, gap = (a - m) / (k + 1);
    std::vector<std::pair<double, double>> out;
    for (int j = 0; j < k; ++j) {
        const double l = gap + j * (len + gap);
        out.emplace_back(l, l + len);
    }
    return out;
}

/// Piecewise-constant profile with `pieces` pieces on [0, a]: uniformly random breakpoints and
/// levels uniform in [lo, hi], sampled at the nodes.
inline DensityField1D random_piecewise_1d(std::shared_ptr<const IntervalMesh> mesh, std::uint64_t seed, int pieces,
                                          double lo, double hi)
{
    detail::require(pieces >= 1, "random_piecewise_1d: need at least one piece");
    detail::require(0.0 <= lo && lo <= hi && hi <= 1.0, "random_piecewise_1d: need 0 <= lo <= hi <= 1");
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double a = mesh->length();
    std::vector<double> cuts(static_cast<std::size_t>(pieces - 1));
    for (auto& c : cuts) c = a * unit(gen);
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> level(static_cast<std::size_t>(pieces));
    for (auto& l : level) l = lo + (hi - lo) * unit(gen);
    return sample_1d(mesh, [&](double x) {
        const auto piece = std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin();
        return level[static_cast<std::size_t>(piece)];
    });
}

/// Eigenpairs μ_0..μ_k of the two-density problem on a fixed mesh (ε = 0: unrelaxed).
inline Spectrum spectrum_1d(const DensityField1D& rho1, const DensityField1D& rho2, int k, double eps,
                            const EigenOptions& opts = {})
{
    detail::require(k >= 0, "spectrum_1d: k must be nonnegative");
    return solve_lowest(assemble_1d(rho1, rho2, eps), k + 1, opts);
}

inline double mu_1d(const DensityField1D& rho1, const DensityField1D& rho2, int k, double eps,
                    const EigenOptions& opts = {})
{
    return spectrum_1d(rho1, rho2, k, eps, opts)[static_cast<std::size_t>(k)];
}

struct RefineOptions {
    int initial_cells = 100;
    int max_cells = 204800;
    double rtol = 1e-3;
};

struct RefinedValue {
    double value = 0.0;
    int cells = 0;
    /// Relative change over the last doubling.
    double change = 0.0;
};

/// μ_k of the problem, uniformly refined until two successive doublings each change it by at
/// most `rtol` (a single agreement can be accidental when sampled indicators jump between nodes).
inline RefinedValue mu_1d(const TwoDensityProblem& p, int k, double eps, const RefineOptions& ro = {})
{
    detail::require(ro.initial_cells >= 1 && ro.max_cells >= ro.initial_cells, "mu_1d: invalid refinement limits");
    int n = ro.initial_cells;
    double prev = mu_1d(p.density1(n), p.density2(n), k, eps);
    bool agreed = false;
    while (2 * n <= ro.max_cells) {
        n *= 2;
        const double cur = mu_1d(p.density1(n), p.density2(n), k, eps);
        const double change = std::abs(cur - prev) / std::max(1.0, std::abs(cur));
        if (change <= ro.rtol) {
            if (agreed) return {cur, n, change};
            agreed = true;
        } else {
            agreed = false;
        }
        prev = cur;
    }
    throw SolverError("mu_1d: no convergence within " + std::to_string(ro.max_cells) + " cells");
}

/// Ramp  −1 | sin(kπx/s) | +1  with the sine on [−s/(2k), s/(2k)]; s = 1 gives the unit-mass profile.
struct RampFunction {
    int k = 1;
    double scale = 1.0;

    double half_width() const { return 0.5 * scale / k; }
    double operator()(double x) const
    {
        const double w = half_width();
        if (x < -w) return -1.0;
        if (x > w) return 1.0;
        return std::sin(k * std::numbers::pi * x / scale);
    }
    double derivative(double x) const
    {
        const double w = half_width();
        if (x < -w || x > w) return 0.0;
        const double f = k * std::numbers::pi / scale;
        return f * std::cos(f * x);
    }
};

inline RampFunction build_h(int k, double scale = 1.0)
{
    detail::require(k >= 1, "build_h: k must be at least 1");
    detail::require(scale > 0.0, "build_h: scale must be positive");
    return RampFunction{k, scale};
}

/// Sign-alternating test function: left of b_1 it is −h(x − b_1), between b_j and b_{j+1} it is
/// (−1)^j min(|h(x − b_j)|, |h(x − b_{j+1})|), right of b_k it is (−1)^k h(x − b_k).
class TestFunction {
public:
    TestFunction(std::vector<double> points, int k, double scale = 1.0) : h_(build_h(k, scale)), b_(std::move(points))
    {
        detail::require(static_cast<int>(b_.size()) == k, "build_gP: need exactly k points");
        std::sort(b_.begin(), b_.end());
    }

    const std::vector<double>& sorted_points() const { return b_; }
    const RampFunction& ramp() const { return h_; }

    double operator()(double x) const
    {
        const auto [sign, d] = locate(x);
        return sign * std::abs(h_(d));
    }

    double derivative(double x) const
    {
        const auto [sign, d] = locate(x);
        // |h(d)| grows with |d| on the ramp
        return sign * (d >= 0.0 ? 1.0 : -1.0) * std::abs(h_.derivative(d));
    }

    /// Points in [lo, hi] where the closed form changes: ramp ends, zeros and switch midpoints.
    std::vector<double> breakpoints(double lo, double hi) const
    {
        std::vector<double> out;
        const double w = h_.half_width();
        for (std::size_t j = 0; j < b_.size(); ++j) {
            for (double x : {b_[j] - w, b_[j], b_[j] + w})
                if (x > lo && x < hi) out.push_back(x);
            if (j + 1 < b_.size()) {
                const double mid = 0.5 * (b_[j] + b_[j + 1]);
                if (mid > lo && mid < hi) out.push_back(mid);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    /// Sign (−1)^{#points ≤ x} and signed offset to the nearest point.
    std::pair<double, double> locate(double x) const
    {
        const auto it = std::upper_bound(b_.begin(), b_.end(), x);
        const auto below = static_cast<std::size_t>(it - b_.begin());
        const double sign = below % 2 == 0 ? 1.0 : -1.0;
        double d;
        if (below == 0)
            d = x - b_.front();
        else if (below == b_.size())
            d = x - b_.back();
        else {
            const double l = x - b_[below - 1], r = x - b_[below];
            d = std::abs(l) <= std::abs(r) ? l : r;
        }
        return {sign, d};
    }

    RampFunction h_;
    std::vector<double> b_;
};

inline TestFunction build_gP(std::vector<double> points, int k, double scale = 1.0)
{
    return TestFunction(std::move(points), k, scale);
}

namespace detail {

/// ∫_0^a f over pieces split at mesh nodes and the test function's breakpoints, Gauss on each.
template <class F>
double integrate_pieces(const IntervalMesh& mesh, const TestFunction& g, F&& f)
{
    std::vector<double> cuts = mesh.nodes();
    const auto extra = g.breakpoints(0.0, mesh.length());
    cuts.insert(cuts.end(), extra.begin(), extra.end());
    std::sort(cuts.begin(), cuts.end());
    static const LineRule rule = gauss_legendre(8);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double l = cuts[i], r = cuts[i + 1];
        if (r <= l) continue;
        const int cell = std::clamp(static_cast<int>(std::floor(0.5 * (l + r) / mesh.spacing())), 0, mesh.cells() - 1);
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const double x = l + (r - l) * rule.points[q];
            total += (r - l) * rule.weights[q] * f(x, cell);
        }
    }
    return total;
}

inline double p1_value(const DensityField1D& rho, int cell, double x)
{
    const auto& mesh = rho.mesh();
    const double t = (x - mesh.node(cell)) / mesh.spacing();
    return (1.0 - t) * rho[cell] + t * rho[cell + 1];
}

inline double p2_value(const IntervalMesh& mesh, const Eigen::Ref<const Eigen::VectorXd>& u, int cell, double x)
{
    const double t = (x - mesh.node(cell)) / mesh.spacing();
    const auto phi = fe::p2_line_values(t);
    return phi[0] * u[2 * cell] + phi[1] * u[2 * cell + 1] + phi[2] * u[2 * cell + 2];
}

} // namespace detail

/// F_i(P) = ∫ρ g_P u_i for the columns u_i of `modes`.
inline Eigen::VectorXd orthogonality_residual(const DensityField1D& rho, const Eigen::MatrixXd& modes,
                                              const TestFunction& g)
{
    const auto& mesh = rho.mesh();
    Eigen::VectorXd F(modes.cols());
    for (Eigen::Index i = 0; i < modes.cols(); ++i) {
        const auto u = modes.col(i);
        F[i] = detail::integrate_pieces(mesh, g, [&](double x, int c) {
            return detail::p1_value(rho, c, x) * g(x) * detail::p2_value(mesh, u, c, x);
        });
    }
    return F;
}

/// ∫ρ₁ (g′)² / ∫ρ₂ g².
inline double rayleigh_quotient(const DensityField1D& rho1, const DensityField1D& rho2, const TestFunction& g)
{
    const auto& mesh = rho1.mesh();
    const double num = detail::integrate_pieces(mesh, g, [&](double x, int c) {
        const double d = g.derivative(x);
        return detail::p1_value(rho1, c, x) * d * d;
    });
    const double den = detail::integrate_pieces(mesh, g, [&](double x, int c) {
        const double v = g(x);
        return detail::p1_value(rho2, c, x) * v * v;
    });
    detail::require(den > 0.0, "rayleigh_quotient: test function vanishes on the support");
    return num / den;
}

inline double rayleigh_quotient(const DensityField1D& rho, const TestFunction& g)
{
    return rayleigh_quotient(rho, rho, g);
}

struct TestFunctionPoints {
    /// Points as found by the root iteration.
    std::vector<double> points;
    /// Ascending copy.
    std::vector<double> sorted;
    /// Ramp scale used for g_P (the mass of ρ).
    double scale = 1.0;
    double residual = 0.0;
    int iterations = 0;
    int starts = 0;
};

struct OrthogonalityOptions {
    double tol = 1e-10;
    int max_newton = 60;
    int max_starts = 24;
    std::uint64_t seed = 7;
};

/// Finds P with ∫ρ g_P u_i = 0 for i = 0..k−1 (u_i the first k eigenfunctions of ρ) by damped
/// Newton iteration with a finite-difference Jacobian, started from the mass quantiles and then
/// from deterministic perturbations of them. g_P uses ramps of half-width ∫ρ/(2k).
inline TestFunctionPoints solve_orthogonality(const DensityField1D& rho, int k, const OrthogonalityOptions& oo = {})
{
    detail::require(k >= 1, "solve_orthogonality: k must be at least 1");
    detail::require(rho.min_value() > 0.0, "solve_orthogonality: density must be bounded below");
    const auto& mesh = rho.mesh();
    const double a = mesh.length();
    const double m = mass(rho);
    const auto spec = spectrum_1d(rho, rho, k - 1, 0.0);
    const Eigen::MatrixXd modes = spec.eigenvectors.leftCols(k);
    const double w = 0.5 * m / k;

    const auto F = [&](const Eigen::VectorXd& P) {
        return orthogonality_residual(rho, modes, build_gP(std::vector<double>(P.data(), P.data() + P.size()), k, m));
    };
    const auto clamp_points = [&](Eigen::VectorXd P) {
        for (Eigen::Index i = 0; i < P.size(); ++i) P[i] = std::clamp(P[i], -w, a + w);
        std::sort(P.data(), P.data() + P.size());
        return P;
    };

    // quantiles of the mass distribution
    Eigen::VectorXd q(k);
    {
        std::vector<double> cum(static_cast<std::size_t>(mesh.cells()) + 1, 0.0);
        for (int c = 0; c < mesh.cells(); ++c)
            cum[static_cast<std::size_t>(c) + 1] = cum[static_cast<std::size_t>(c)] + 0.5 * mesh.spacing() * (rho[c] + rho[c + 1]);
        for (int j = 0; j < k; ++j) {
            const double target = (j + 0.5) * m / k;
            const auto it = std::lower_bound(cum.begin(), cum.end(), target);
            const auto c = std::clamp<long>(static_cast<long>(it - cum.begin()) - 1, 0, mesh.cells() - 1);
            const double seg = cum[static_cast<std::size_t>(c) + 1] - cum[static_cast<std::size_t>(c)];
            const double t = seg > 0.0 ? (target - cum[static_cast<std::size_t>(c)]) / seg : 0.5;
            q[j] = mesh.node(static_cast<int>(c)) + t * mesh.spacing();
        }
    }

    std::mt19937_64 gen(oo.seed);
    std::normal_distribution<double> jitter(0.0, 0.25 * w);
    TestFunctionPoints best;
    best.residual = std::numeric_limits<double>::infinity();
    best.scale = m;
    int total_iterations = 0;
    for (int s = 0; s < oo.max_starts; ++s) {
        Eigen::VectorXd P = q;
        if (s > 0)
            for (Eigen::Index i = 0; i < P.size(); ++i) P[i] += jitter(gen);
        P = clamp_points(P);
        Eigen::VectorXd Fp = F(P);
        double r = Fp.lpNorm<Eigen::Infinity>();
        for (int it = 0; it < oo.max_newton && r > oo.tol; ++it) {
            ++total_iterations;
            Eigen::MatrixXd J(k, k);
            const double h = 1e-7 * std::max(1.0, a);
            for (int j = 0; j < k; ++j) {
                Eigen::VectorXd Pp = P, Pm = P;
                Pp[j] += h;
                Pm[j] -= h;
                // unsorted copies keep the column ↔ point association
                const auto gp = build_gP(std::vector<double>(Pp.data(), Pp.data() + k), k, m);
                const auto gm = build_gP(std::vector<double>(Pm.data(), Pm.data() + k), k, m);
                J.col(j) = (orthogonality_residual(rho, modes, gp) - orthogonality_residual(rho, modes, gm)) / (2 * h);
            }
            const Eigen::VectorXd step = J.colPivHouseholderQr().solve(-Fp);
            if (!step.allFinite()) break;
            double lambda = 1.0;
            bool improved = false;
            for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
                const Eigen::VectorXd Pn = clamp_points(P + lambda * step);
                const Eigen::VectorXd Fn = F(Pn);
                const double rn = Fn.lpNorm<Eigen::Infinity>();
                if (rn < r) {
                    P = Pn;
                    Fp = Fn;
                    r = rn;
                    improved = true;
                    break;
                }
            }
            if (!improved) break;
        }
        if (r < best.residual) {
            best.points.assign(P.data(), P.data() + k);
            best.residual = r;
        }
        if (best.residual <= oo.tol) {
            best.starts = s + 1;
            break;
        }
        best.starts = s + 1;
    }
    best.iterations = total_iterations;
    best.sorted = best.points;
    std::sort(best.sorted.begin(), best.sorted.end());
    if (!(best.residual <= oo.tol))
        throw SolverError("solve_orthogonality: no root found (best residual " + std::to_string(best.residual) + ")");
    return best;
}

} // namespace densopt
