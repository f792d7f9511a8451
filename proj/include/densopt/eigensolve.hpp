#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#ifdef DENSOPT_HAS_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include "densopt/assembly.hpp"
#include "densopt/error.hpp"

namespace densopt {

/// Lowest eigenpairs of a pencil, eigenvalues nondecreasing, eigenvectors K-orthonormal.
struct Spectrum {
    std::vector<double> eigenvalues;
    Eigen::MatrixXd eigenvectors;
    /// Backward error ||M u - mu K u|| / ((||M|| + |mu| ||K||) ||u||) per pair (1-norms of the matrices).
    std::vector<double> residual_norms;
    int restarts = 0;
    int operator_applications = 0;

    std::size_t size() const { return eigenvalues.size(); }
    double operator[](std::size_t i) const { return eigenvalues[i]; }
    double max_residual() const
    {
        return residual_norms.empty() ? 0.0 : *std::max_element(residual_norms.begin(), residual_norms.end());
    }
};

struct EigenOptions {
    double tol = 1e-9;
    /// Budget on operator applications; 0 means 500 * count.
    int max_applications = 0;
    int block_size = 4;
    std::uint64_t seed = 0x5eedULL;
    /// Spectral shift s > 0 of the factorized operator M + s K. NaN selects it automatically: from
    /// the Rayleigh quotients of a warm start, or else a diagonal-based guess that is lowered once
    /// the first Ritz values show it sits above the wanted part.
    double shift = std::numeric_limits<double>::quiet_NaN();
    /// Pencils at or below this size are solved densely.
    Eigen::Index dense_threshold = 400;
    /// Optional starting vectors (e.g. the previous iterate's eigenvectors).
    const Eigen::MatrixXd* warm_start = nullptr;
    /// When the residuals stop improving (ill-conditioned M + sK puts a rounding floor under
    /// them) the iteration ends early; the result is accepted if every backward error is below this.
    double stall_tol = 1e-6;
    /// Restarts without halving the worst residual-to-target ratio that count as a stall.
    int stall_restarts = 20;
};

namespace detail {

inline double one_norm(const SparseMatrix& A)
{
    double best = 0.0;
    for (Eigen::Index c = 0; c < A.outerSize(); ++c) {
        double col = 0.0;
        for (SparseMatrix::InnerIterator it(A, c); it; ++it) col += std::abs(it.value());
        best = std::max(best, col);
    }
    return best;
}

inline double backward_error(const SparseMatrix& M, const SparseMatrix& K, double normM, double normK,
                             const Eigen::VectorXd& u, double mu)
{
    const Eigen::VectorXd r = M * u - mu * (K * u);
    const double den = (normM + std::abs(mu) * normK) * u.norm();
    return den > 0.0 ? r.norm() / den : std::numeric_limits<double>::infinity();
}

inline void finalize(Spectrum& s, const OperatorPair& pair)
{
    const auto count = static_cast<std::size_t>(s.eigenvectors.cols());
    // Rayleigh quotients are second-order accurate in the eigenvector error.
    std::vector<double> mu(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto u = s.eigenvectors.col(static_cast<Eigen::Index>(i));
        const Eigen::VectorXd Mu = pair.M * u;
        const Eigen::VectorXd Ku = pair.K * u;
        mu[i] = u.dot(Mu) / u.dot(Ku);
    }
    const double nM = one_norm(pair.M), nK = one_norm(pair.K);
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mu[a] < mu[b]; });
    Eigen::MatrixXd vecs(s.eigenvectors.rows(), static_cast<Eigen::Index>(count));
    s.eigenvalues.assign(count, 0.0);
    s.residual_norms.assign(count, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        vecs.col(static_cast<Eigen::Index>(i)) = s.eigenvectors.col(static_cast<Eigen::Index>(order[i]));
        s.eigenvalues[i] = mu[order[i]];
        s.residual_norms[i] = backward_error(pair.M, pair.K, nM, nK, vecs.col(static_cast<Eigen::Index>(i)), mu[order[i]]);
    }
    s.eigenvectors = std::move(vecs);
}

inline Spectrum solve_dense(const OperatorPair& pair, int count)
{
    const Eigen::MatrixXd M = Eigen::MatrixXd(pair.M);
    const Eigen::MatrixXd K = Eigen::MatrixXd(pair.K);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(M, K);
    if (es.info() != Eigen::Success) throw SolverError("dense generalized eigensolver failed (K not positive definite?)");
    Spectrum s;
    s.eigenvectors = es.eigenvectors().leftCols(count);
    finalize(s, pair);
    return s;
}

/// K-orthonormalize the columns of X against basis V (with KV = K V) and among themselves.
/// Block classical Gram-Schmidt, repeated while a pass still removes most of a column, so
/// nearly dependent inputs stay orthogonal to working precision. K times each column is
/// recomputed after every pass: tracking it through the projections loses accuracy when a
/// column cancels heavily. Columns that collapse are dropped. Returns the kept columns and
/// K times them.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> k_orthonormalize(const SparseMatrix& K, Eigen::MatrixXd X,
                                                                    const Eigen::Ref<const Eigen::MatrixXd>& V,
                                                                    const Eigen::Ref<const Eigen::MatrixXd>& KV)
{
    constexpr int max_passes = 4;
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd KX = K * X;
    const auto knorm = [](const auto& x, const auto& kx) { return std::sqrt(std::max(0.0, x.dot(kx))); };
    Eigen::VectorXd norm0(X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) norm0[c] = knorm(X.col(c), KX.col(c));
    if (V.cols() > 0) {
        Eigen::VectorXd before = norm0;
        for (int pass = 0; pass < max_passes; ++pass) {
            X.noalias() -= V * (KV.transpose() * X);
            KX = K * X;
            bool again = false;
            for (Eigen::Index c = 0; c < X.cols(); ++c) {
                const double after = knorm(X.col(c), KX.col(c));
                if (after < 0.5 * before[c] && after > 1e-10 * norm0[c]) again = true;
                before[c] = after;
            }
            if (pass >= 1 && !again) break;
        }
    }
    Eigen::MatrixXd Q(n, X.cols()), KQ(n, X.cols());
    Eigen::Index kept = 0;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        if (!(norm0[c] > 0.0)) continue;
        auto x = X.col(c);
        Eigen::VectorXd kx = KX.col(c);
        double norm = knorm(x, kx);
        for (int pass = 0; pass < max_passes && kept > 0; ++pass) {
            x.noalias() -= Q.leftCols(kept) * (KQ.leftCols(kept).transpose() * x);
            kx = K * x;
            const double after = knorm(x, kx);
            const bool again = after < 0.5 * norm && after > 1e-10 * norm0[c];
            norm = after;
            if (pass >= 1 && !again) break;
        }
        if (norm <= 1e-10 * norm0[c]) continue;
        Q.col(kept) = x / norm;
        KQ.col(kept) = kx / norm;
        ++kept;
    }
    return {Q.leftCols(kept), KQ.leftCols(kept)};
}

/// Sparse Cholesky of a symmetric positive definite matrix (CHOLMOD supernodal when available).
/// Solves take one step of iterative refinement: M + sK is badly conditioned when the density
/// has near-void regions, and the refined solves keep the Krylov basis consistent.
class SpdFactorization {
public:
    void compute(const SparseMatrix& A)
    {
        A_ = A;
        llt_.compute(A_);
        if (llt_.info() != Eigen::Success)
            throw SolverError("factorization of M + sK failed (K not positive definite?)");
#ifndef DENSOPT_HAS_CHOLMOD
        if (llt_.vectorD().minCoeff() <= 0.0) throw SolverError("M + sK is not positive definite (indefinite K?)");
#endif
    }

    template <class Rhs>
    Eigen::MatrixXd solve(const Rhs& b) const
    {
        Eigen::MatrixXd x = llt_.solve(b);
        const Eigen::MatrixXd r = b - A_ * x;
        x += llt_.solve(r);
        return x;
    }

private:
    SparseMatrix A_;
#ifdef DENSOPT_HAS_CHOLMOD
    Eigen::CholmodSupernodalLLT<SparseMatrix, Eigen::Lower> llt_;
#else
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
#endif
};

/// trace(M)/trace(K), the scale of the upper spectrum; 1 when M has no diagonal mass.
inline double spectral_scale(const OperatorPair& pair)
{
    const double tm = pair.M.diagonal().sum();
    const double tk = pair.K.diagonal().sum();
    if (!(tk > 0.0)) throw SolverError("mass matrix has a nonpositive trace");
    return tm > 0.0 ? tm / tk : 1.0;
}

inline double auto_shift(const OperatorPair& pair) { return 1e-4 * spectral_scale(pair); }

/// Lowered shift near the top wanted eigenvalue, kept away from a singular M + sK when the
/// wanted eigenvalues are (numerically) zero.
inline double lowered_shift(const OperatorPair& pair, double top)
{
    return std::max(0.05 * top, 1e-8 * spectral_scale(pair));
}

} // namespace detail

/// The `count` smallest eigenpairs of M u = μ K u (K symmetric positive definite,
/// M symmetric positive semidefinite).
///
/// Block Lanczos on the shift-inverted operator (M + sK)^{-1} K, self-adjoint in the K inner
/// product, with full reorthogonalization and thick restarts. Convergence is measured on the
/// transformed problem; eigenvalues are returned as Rayleigh quotients of the Ritz vectors.
/// Deterministic: the starting block comes from a fixed-seed generator.
inline Spectrum solve_lowest(const OperatorPair& pair, int count, const EigenOptions& opts = {})
{
    detail::require(count >= 1, "solve_lowest: count must be at least 1");
    const Eigen::Index n = pair.M.rows();
    detail::require(pair.K.rows() == n && pair.M.cols() == n && pair.K.cols() == n, "solve_lowest: size mismatch");
    detail::require(count <= n, "solve_lowest: more eigenpairs requested than degrees of freedom");

    if (n <= opts.dense_threshold) return detail::solve_dense(pair, count);

    const int nev = count;
    const bool warm = opts.warm_start && opts.warm_start->rows() == n && opts.warm_start->cols() > 0;
    double shift = opts.shift;
    bool shift_settled = !std::isnan(shift);
    if (!shift_settled && warm) {
        // Rayleigh quotients of the starting vectors locate the wanted part of the spectrum
        const Eigen::MatrixXd& X = *opts.warm_start;
        std::vector<double> rq;
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            const double den = X.col(j).dot(pair.K * X.col(j));
            if (den > 0.0) rq.push_back(X.col(j).dot(pair.M * X.col(j)) / den);
        }
        std::sort(rq.begin(), rq.end());
        if (static_cast<int>(rq.size()) >= nev && rq[static_cast<std::size_t>(nev - 1)] > 0.0) {
            shift = detail::lowered_shift(pair, rq[static_cast<std::size_t>(nev - 1)]);
            shift_settled = true;
        }
    }
    if (!shift_settled) shift = detail::auto_shift(pair);
    detail::SpdFactorization ldlt;
    ldlt.compute(SparseMatrix(pair.M + shift * pair.K));

    const int b = std::max(1, opts.block_size);
    const Eigen::Index m_max = std::min<Eigen::Index>(n, nev + std::max(nev, 12) + 2 * b);
    const Eigen::Index keep = std::min<Eigen::Index>(nev + b, m_max - b);
    const int budget = opts.max_applications > 0 ? opts.max_applications : 500 * count;

    Eigen::MatrixXd V(n, m_max), W(n, m_max), KV(n, m_max);
    Eigen::Index cols = 0;
    Spectrum out;

    std::mt19937_64 gen(opts.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const auto random_block = [&](Eigen::Index c) {
        Eigen::MatrixXd R(n, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < n; ++i) R(i, j) = unif(gen);
        return R;
    };

    Eigen::MatrixXd pending;
    if (warm) {
        const Eigen::Index w = std::min<Eigen::Index>(opts.warm_start->cols(), m_max - b);
        pending.resize(n, w + b);
        pending.leftCols(w) = opts.warm_start->leftCols(w);
        pending.rightCols(b) = random_block(b);
    } else {
        pending = random_block(b);
    }

    constexpr double eps_mach = std::numeric_limits<double>::epsilon();
    Eigen::VectorXd theta;
    Eigen::MatrixXd Y;
    double best_ratio = std::numeric_limits<double>::infinity();
    int restarts_at_best = 0;
    for (;;) {
        // expand the basis by one chunk; directions that do not fit are carried over
        if (cols < m_max) {
            Eigen::MatrixXd leftover;
            if (pending.cols() > m_max - cols) {
                leftover = pending.rightCols(pending.cols() - (m_max - cols));
                pending.conservativeResize(Eigen::NoChange, m_max - cols);
            }
            auto [Q, KQ] = detail::k_orthonormalize(pair.K, pending, V.leftCols(cols), KV.leftCols(cols));
            if (Q.cols() == 0) {
                pending = random_block(std::min<Eigen::Index>(b, m_max - cols));
                std::tie(Q, KQ) = detail::k_orthonormalize(pair.K, pending, V.leftCols(cols), KV.leftCols(cols));
            }
            const Eigen::Index r = Q.cols();
            if (r > 0) {
                V.middleCols(cols, r) = Q;
                KV.middleCols(cols, r) = KQ;
                Eigen::MatrixXd TQ = ldlt.solve(KQ);
                out.operator_applications += static_cast<int>(r);
                W.middleCols(cols, r) = TQ;
                pending.resize(n, leftover.cols() + TQ.cols());
                if (leftover.cols() > 0) pending.leftCols(leftover.cols()) = leftover;
                pending.rightCols(TQ.cols()) = TQ;
                cols += r;
            }
            // cold starts only test convergence once the basis is full; warm starts test every chunk
            if (r > 0 && cols < m_max && (cols < nev || !warm)) continue;
        }

        // Rayleigh-Ritz on the transformed operator
        Eigen::MatrixXd H = KV.leftCols(cols).transpose() * W.leftCols(cols);
        H = 0.5 * (H + H.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        if (es.info() != Eigen::Success) throw SolverError("projected eigenproblem failed");
        // descending θ  <=>  ascending μ
        theta = es.eigenvalues().reverse();
        Y = es.eigenvectors().rowwise().reverse();

        if (!shift_settled && cols >= nev) {
            shift_settled = true;
            // Ritz values bound the wanted eigenvalues from above
            const double top = 1.0 / theta[nev - 1] - shift;
            if (top > 0.0 && shift > top && detail::lowered_shift(pair, top) < shift) {
                shift = detail::lowered_shift(pair, top);
                ldlt.compute(SparseMatrix(pair.M + shift * pair.K));
                const Eigen::Index w = std::min<Eigen::Index>(cols, std::min<Eigen::Index>(nev + b, m_max - b));
                pending = V.leftCols(cols) * Y.leftCols(w);
                cols = 0;
                ++out.restarts;
                continue;
            }
        }

        bool converged = cols >= nev;
        double ratio = 0.0;
        if (converged) {
            const Eigen::MatrixXd Yn = Y.leftCols(nev);
            const Eigen::MatrixXd R =
                W.leftCols(cols) * Yn - (V.leftCols(cols) * Yn) * theta.head(nev).asDiagonal();
            const Eigen::MatrixXd KR = pair.K * R;
            for (int i = 0; i < nev; ++i) {
                const double rn = std::sqrt(std::max(0.0, R.col(i).dot(KR.col(i))));
                // relative to θ_i, floored at the rounding level of the operator (θ_0 ≈ its norm)
                const double bound = std::max(opts.tol * std::abs(theta[i]), 1e3 * eps_mach * std::abs(theta[0]));
                ratio = std::max(ratio, rn / bound);
            }
            converged = ratio <= 1.0;
            if (ratio < 0.5 * best_ratio) {
                best_ratio = ratio;
                restarts_at_best = out.restarts;
            }
        }
        const bool stalled = out.restarts - restarts_at_best >= opts.stall_restarts;
        const bool full = cols >= m_max || pending.cols() == 0;
        // the transformed residual can stall at the rounding level of the solves while the
        // Ritz pairs already meet the tolerance on the original pencil
        if (!converged && full && cols >= nev && ratio < 1e2) {
            Spectrum trial;
            trial.eigenvectors = V.leftCols(cols) * Y.leftCols(nev);
            detail::finalize(trial, pair);
            if (trial.max_residual() <= opts.tol) {
                trial.restarts = out.restarts;
                trial.operator_applications = out.operator_applications;
                return trial;
            }
        }
        if (converged || stalled || out.operator_applications >= budget || (full && cols <= keep)) {
            out.eigenvectors = V.leftCols(cols) * Y.leftCols(nev);
            detail::finalize(out, pair);
            if (!converged) {
                const double accept = stalled ? std::max(opts.tol, opts.stall_tol) : opts.tol;
                if (out.max_residual() <= accept) return out;
                std::ostringstream msg;
                msg << "eigensolver did not converge within " << out.operator_applications
                    << " operator applications (backward error " << out.max_residual() << ")";
                throw SolverError(msg.str());
            }
            return out;
        }

        if (!full) continue;

        // thick restart: keep the leading Ritz vectors and continue from the part of the
        // pending block orthogonal to the full basis (the Ritz residual directions)
        pending = detail::k_orthonormalize(pair.K, pending, V.leftCols(cols), KV.leftCols(cols)).first;
        // never cut through a cluster of Ritz values: its members converge only together
        Eigen::Index kept = keep;
        while (kept < m_max - b && std::abs(theta[kept - 1] - theta[kept]) < 1e-3 * std::abs(theta[kept - 1]))
            ++kept;
        const Eigen::MatrixXd Yk = Y.leftCols(kept);
        V.leftCols(kept) = (V.leftCols(cols) * Yk).eval();
        W.leftCols(kept) = (W.leftCols(cols) * Yk).eval();
        KV.leftCols(kept) = (KV.leftCols(cols) * Yk).eval();
        cols = kept;
        ++out.restarts;
    }
}

/// Rayleigh quotient vᵀMv / vᵀKv.
inline double rayleigh(const OperatorPair& pair, const Eigen::VectorXd& v)
{
    const double den = v.dot(pair.K * v);
    detail::require(den > 0.0, "rayleigh: vector has zero K-norm");
    return v.dot(pair.M * v) / den;
}

/// Spectrum report: one "k mu residual" line per eigenpair.
inline void write_spectrum(std::ostream& os, const Spectrum& s)
{
    const auto prec = os.precision(12);
    for (std::size_t i = 0; i < s.size(); ++i) os << i << ' ' << s.eigenvalues[i] << ' ' << s.residual_norms[i] << '\n';
    os.precision(prec);
}

} // namespace densopt

namespace densopt {

/// Eigenpairs of the unrelaxed problem  ∫ρ∇u·∇v = μ ∫ρuv  on the mesh carrying `rho`
/// (typically a support submesh), which must satisfy ρ > 0 at every vertex.
inline Spectrum unrelaxed_solve_on_support(const DensityField& rho, int count, const EigenOptions& opts = {})
{
    detail::require(rho.mesh().triangle_count() > 0, "unrelaxed_solve_on_support: empty mesh");
    detail::require(rho.min_value() > 0.0, "unrelaxed_solve_on_support: density must be positive on the support");
    return solve_lowest(assemble_unrelaxed(rho), count, opts);
}

} // namespace densopt
