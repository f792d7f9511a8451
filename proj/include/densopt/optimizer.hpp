#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "densopt/assembly.hpp"
#include "densopt/density.hpp"
#include "densopt/eigensolve.hpp"
#include "densopt/error.hpp"
#include "densopt/postprocess.hpp"
#include "densopt/sensitivity.hpp"

namespace densopt {

struct OptimizerConfig {
    int k = 1;
    double m = 0.4;
    double eps = 1e-3;
    /// Mass-penalty weight; 0 with `auto_alpha` picks 100·μ_k(uniform)/m.
    double alpha = 0.0;
    bool auto_alpha = true;
    double sigma = 0.1;
    /// Gap-penalty weight, applied to gaps measured relative to μ_k(uniform).
    double beta = 10.0;
    int max_beta_doublings = 4;
    /// Initial step, measured as the largest nodal density change of a trial.
    double step0 = 0.05;
    double max_step = 0.5;
    int max_iters = 400;
    /// Converged once the objective gains less than ftol (relative) over `stall_window` accepted steps.
    double ftol = 1e-4;
    int stall_window = 10;
    /// Converged when the projected ascent direction is below gtol·|μ| everywhere.
    double gtol = 1e-6;
    int max_halvings = 24;
    std::uint64_t seed = 1;
    double noise = 0.2;
    Scheme scheme = Scheme::EpsEps2;
    /// Run a first phase at ε = 1e-2 before the target ε.
    bool continuation = false;
    /// Extra eigenpairs beyond μ_k used for cluster detection.
    int extra_modes = 4;
    /// Eigensolver tolerance for the reported spectrum.
    double eig_tol = 1e-9;
    /// Looser tolerance inside the ascent: eigenvalue errors are quadratic in the residual.
    double ascent_eig_tol = 1e-5;
    double post_threshold = 0.01;
    /// On a structured grid with even sides, first optimize on the half-resolution grid and
    /// start from its interpolated result.
    bool coarse_start = true;
    /// Smallest grid side on which a coarse phase is still run.
    int coarse_min_cells = 16;
    /// Iteration cap of the coarse phase; negative means max_iters.
    int coarse_max_iters = -1;
};

struct HistoryEntry {
    int iteration = 0;
    double objective = 0.0;
    double mu_k = 0.0;
    double mass = 0.0;
    int cluster_width = 1;
    double step = 0.0;
};

enum class RunStatus { Running, Converged, Stalled, MaxIterations };

inline std::string to_string(RunStatus s)
{
    switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Converged: return "converged";
    case RunStatus::Stalled: return "stalled";
    case RunStatus::MaxIterations: return "max_iterations";
    }
    return "unknown";
}

/// Objective value and the data needed to differentiate it at one density.
struct Evaluation {
    OperatorPair pair;
    Spectrum spectrum;
    ClusterSpec cluster;
    double mass = 0.0;
    /// μ_k, or the penalized cluster mean when the cluster has more than one member.
    double mu_value = 0.0;
    double objective = 0.0;
};

struct OptimizerState {
    int iteration = 0;
    DensityField rho;
    double objective = 0.0;
    ClusterSpec cluster;
    double step = 0.0;
    double beta = 10.0;
    double alpha = 0.0;
    /// μ_k of the uniform density; scales the gap penalty.
    double mu_ref = 1.0;
    double eps = 1e-3;
    RunStatus status = RunStatus::Running;
    std::vector<HistoryEntry> history;
    Evaluation eval;
};

struct RunReport {
    OptimizerConfig config;
    double alpha = 0.0;
    RunStatus status = RunStatus::Running;
    int iterations = 0;
    /// Accepted iterations spent on the half-resolution grid.
    int coarse_iterations = 0;
    std::vector<HistoryEntry> history;
    /// μ_0 .. μ_{k+2} of the returned density.
    std::vector<double> eigenvalues;
    double mass = 0.0;
    double mu_k = 0.0;
    /// ‖ρ‖₁·μ_k, the scale-invariant value.
    double normalized = 0.0;
    int multiplicity = 1;
    double postprocessed_mu = std::numeric_limits<double>::quiet_NaN();
    double postprocessed_normalized = std::numeric_limits<double>::quiet_NaN();
    int support_components = 0;
    /// Area of {0.05 < ρ < 0.95} (lumped).
    double gray_area = 0.0;
    bool mass_within_tolerance = true;
    double wall_seconds = 0.0;
};

namespace detail {

inline void validate(const OptimizerConfig& c)
{
    require(c.k >= 1, "optimizer: k must be at least 1");
    require(c.m > 0.0, "optimizer: mass must be positive");
    require(c.eps > 0.0, "optimizer: eps must be positive");
    require(c.alpha >= 0.0 && c.sigma > 0.0 && c.beta >= 0.0, "optimizer: alpha, sigma, beta must be nonnegative");
    require(c.step0 > 0.0 && c.max_step >= c.step0, "optimizer: invalid step bounds");
    require(c.max_iters >= 0 && c.stall_window >= 1 && c.max_halvings >= 20, "optimizer: invalid iteration limits");
    require(c.scheme != Scheme::Unrelaxed, "optimizer: needs a relaxed scheme");
}

inline double penalized_cluster_value(const Spectrum& s, int k, int width, double beta)
{
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < width; ++i) {
        const double mu = s[static_cast<std::size_t>(k + i)];
        sum += mu;
        sumsq += mu * mu;
    }
    return (sum - beta * (width * sumsq - sum * sum)) / width;
}

/// Solves at `values`. With `width` set, the cluster is held at that width (trial points);
/// otherwise it is detected from the spectrum.
inline Evaluation evaluate(const std::shared_ptr<const TriDiscretization>& disc, const Eigen::VectorXd& weights,
                           const Eigen::VectorXd& values, const OptimizerConfig& cfg, double eps, double alpha,
                           double beta, std::optional<int> width, const Eigen::MatrixXd* warm)
{
    Evaluation ev;
    ev.pair = assemble(disc, values, eps, cfg.scheme);
    EigenOptions eo;
    eo.tol = std::max(cfg.eig_tol, cfg.ascent_eig_tol);
    eo.warm_start = warm;
    ev.spectrum = solve_lowest(ev.pair, cfg.k + 1 + cfg.extra_modes, eo);
    ev.cluster = detect_cluster(ev.spectrum, cfg.k, cfg.sigma);
    if (width) ev.cluster.width = std::min<int>(*width, static_cast<int>(ev.spectrum.size()) - cfg.k);
    ev.mass = weights.dot(values);
    ev.mu_value = penalized_cluster_value(ev.spectrum, cfg.k, ev.cluster.width, beta);
    ev.objective = ev.mass * ev.mu_value - alpha * (ev.mass - cfg.m) * (ev.mass - cfg.m);
    return ev;
}

inline Eigen::VectorXd initial_density(const TriMesh& mesh, const Eigen::VectorXd& weights, const OptimizerConfig& cfg)
{
    const double area = weights.sum();
    require(cfg.m < area, "optimizer: target mass must be below the domain area");
    std::mt19937_64 gen(cfg.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(mesh.vertex_count()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = cfg.m / area + cfg.noise * unit(gen);
    v = clamp_unit(v);
    for (int it = 0; it < 50; ++it) {
        const double mass = weights.dot(v);
        if (mass <= 0.0 || std::abs(mass - cfg.m) <= 1e-12 * cfg.m) break;
        v = clamp_unit(v * (cfg.m / mass));
    }
    return v;
}

} // namespace detail

/// Stateful projected-gradient ascent on one mesh.
class Optimizer {
public:
    Optimizer(std::shared_ptr<const TriMesh> mesh, OptimizerConfig cfg)
        : cfg_(cfg), disc_(std::make_shared<const TriDiscretization>(mesh)), weights_(hat_integrals(*mesh))
    {
        detail::validate(cfg_);
    }

    const OptimizerConfig& config() const { return cfg_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    const std::shared_ptr<const TriDiscretization>& discretization() const { return disc_; }

    /// μ_k of the uniform density of mass m.
    double reference_mu() const
    {
        const Eigen::VectorXd u = Eigen::VectorXd::Constant(weights_.size(), cfg_.m / weights_.sum());
        const auto ev = detail::evaluate(disc_, weights_, u, cfg_, cfg_.eps, 0.0, 0.0, 1, nullptr);
        return ev.spectrum[static_cast<std::size_t>(cfg_.k)];
    }

    /// α = 100·μ_k(uniform)/m keeps the equilibrium mass error near 1%.
    double default_alpha(double mu_ref) const { return 100.0 * mu_ref / cfg_.m; }

    OptimizerState init(const Eigen::VectorXd& values, double eps) const
    {
        OptimizerState st;
        st.mu_ref = reference_mu();
        st.alpha = (cfg_.auto_alpha && cfg_.alpha == 0.0) ? default_alpha(st.mu_ref) : cfg_.alpha;
        st.beta = cfg_.beta;
        st.eps = eps;
        st.step = cfg_.step0;
        st.rho = DensityField(disc_->mesh_ptr(), values);
        st.eval = detail::evaluate(disc_, weights_, values, cfg_, eps, st.alpha, gap_weight(st), std::nullopt, nullptr);
        st.objective = st.eval.objective;
        st.cluster = st.eval.cluster;
        record(st);
        return st;
    }

    OptimizerState init_random() const
    {
        return init(detail::initial_density(disc_->mesh(), weights_, cfg_), cfg_.continuation ? 1e-2 : cfg_.eps);
    }

    /// Ascent direction in the L² sense: nodal derivative divided by the hat-function mass.
    Eigen::VectorXd ascent_direction(const OptimizerState& st) const
    {
        const auto& ev = st.eval;
        GradientReport g = ev.cluster.width == 1
                               ? eig_gradient(ev.pair, ev.spectrum, cfg_.k)
                               : cluster_objective_gradient(ev.pair, ev.spectrum, ev.cluster, gap_weight(st));
        if (ev.cluster.width > 1) g.values /= ev.cluster.width;
        const double pen = 2.0 * st.alpha * (ev.mass - cfg_.m);
        Eigen::VectorXd d = ev.mass * g.values.cwiseQuotient(weights_);
        d.array() += ev.mu_value - pen;
        return d;
    }

    /// Zeroes components that would push an active bound further out.
    static Eigen::VectorXd projected(const Eigen::VectorXd& rho, Eigen::VectorXd d)
    {
        for (Eigen::Index i = 0; i < d.size(); ++i)
            if ((rho[i] <= 0.0 && d[i] < 0.0) || (rho[i] >= 1.0 && d[i] > 0.0)) d[i] = 0.0;
        return d;
    }

    /// One accepted step, or a terminal status.
    OptimizerState step(OptimizerState st) const
    {
        if (st.status != RunStatus::Running) return st;
        const Eigen::VectorXd d = projected(st.rho.values(), ascent_direction(st));
        const double dmax = d.lpNorm<Eigen::Infinity>();
        if (dmax <= cfg_.gtol * std::max(1.0, std::abs(st.eval.mu_value))) {
            finish_or_tighten(st);
            return st;
        }
        const Eigen::MatrixXd warm = st.eval.spectrum.eigenvectors;
        for (int h = 0; h <= cfg_.max_halvings; ++h) {
            const Eigen::VectorXd trial = clamp_unit(st.rho.values() + (st.step / dmax) * d);
            auto ev =
                detail::evaluate(disc_, weights_, trial, cfg_, st.eps, st.alpha, gap_weight(st), st.cluster.width, &warm);
            if (ev.objective > st.objective) {
                st.rho = DensityField(disc_->mesh_ptr(), trial);
                ++st.iteration;
                st.step = std::min(cfg_.max_step, 1.5 * st.step);
                // Re-detect the cluster at the accepted point; the objective follows the new width.
                const int width = detect_cluster(ev.spectrum, cfg_.k, cfg_.sigma).width;
                if (width != ev.cluster.width) {
                    ev.cluster.width = width;
                    ev.mu_value = detail::penalized_cluster_value(ev.spectrum, cfg_.k, width, gap_weight(st));
                    ev.objective = ev.mass * ev.mu_value - st.alpha * (ev.mass - cfg_.m) * (ev.mass - cfg_.m);
                }
                st.eval = std::move(ev);
                st.objective = st.eval.objective;
                st.cluster = st.eval.cluster;
                record(st);
                if (stalled_progress(st)) finish_or_tighten(st);
                return st;
            }
            st.step *= 0.5;
        }
        st.status = RunStatus::Stalled;
        return st;
    }

    /// Iterates from `st` until a terminal status.
    OptimizerState iterate(OptimizerState st, int max_iters) const
    {
        while (st.status == RunStatus::Running) {
            if (st.iteration >= max_iters) {
                st.status = RunStatus::MaxIterations;
                break;
            }
            st = step(std::move(st));
        }
        return st;
    }

    /// Switches a finished state to a new ε, keeping the density.
    OptimizerState restart_at(const OptimizerState& prev, double eps) const
    {
        OptimizerState st;
        st.alpha = prev.alpha;
        st.mu_ref = prev.mu_ref;
        st.beta = cfg_.beta;
        st.eps = eps;
        st.step = cfg_.step0;
        st.iteration = prev.iteration;
        st.history = prev.history;
        st.rho = prev.rho;
        st.eval = detail::evaluate(disc_, weights_, st.rho.values(), cfg_, eps, st.alpha, gap_weight(st), std::nullopt,
                                   &prev.eval.spectrum.eigenvectors);
        st.objective = st.eval.objective;
        st.cluster = st.eval.cluster;
        record(st);
        return st;
    }

    static double gap_weight(const OptimizerState& st) { return st.beta / st.mu_ref; }

private:
    void record(OptimizerState& st) const
    {
        st.history.push_back(HistoryEntry{st.iteration, st.objective,
                                          st.eval.spectrum[static_cast<std::size_t>(cfg_.k)], st.eval.mass,
                                          st.eval.cluster.width, st.step});
    }

    bool stalled_progress(const OptimizerState& st) const
    {
        const auto n = st.history.size();
        const auto w = static_cast<std::size_t>(cfg_.stall_window);
        if (n <= w) return false;
        const auto& a = st.history[n - 1 - w];
        const auto& b = st.history[n - 1];
        if (a.cluster_width != b.cluster_width) return false;
        return b.objective - a.objective <= cfg_.ftol * std::abs(b.objective);
    }

    /// At a stationary point of a cluster objective whose members are still spread by more than σ/2,
    /// doubles β and keeps going; otherwise marks the run converged.
    void finish_or_tighten(OptimizerState& st) const
    {
        const auto& c = st.eval.cluster;
        int doublings = 0;
        for (double b = cfg_.beta; b < st.beta; b *= 2.0) ++doublings;
        if (c.width > 1 && cfg_.beta > 0.0 && doublings < cfg_.max_beta_doublings) {
            const double spread = st.eval.spectrum[static_cast<std::size_t>(c.k + c.width - 1)] -
                                  st.eval.spectrum[static_cast<std::size_t>(c.k)];
            if (spread > 0.5 * cfg_.sigma) {
                st.beta *= 2.0;
                st.eval.mu_value = detail::penalized_cluster_value(st.eval.spectrum, cfg_.k, c.width, gap_weight(st));
                st.eval.objective =
                    st.eval.mass * st.eval.mu_value - st.alpha * (st.eval.mass - cfg_.m) * (st.eval.mass - cfg_.m);
                st.objective = st.eval.objective;
                st.step = cfg_.step0;
                record(st);
                return;
            }
        }
        st.status = RunStatus::Converged;
    }

    OptimizerConfig cfg_;
    std::shared_ptr<const TriDiscretization> disc_;
    Eigen::VectorXd weights_;
};

/// Penalized scale-invariant objective  ‖ρ‖₁ μ − α(‖ρ‖₁ − m)²,  μ being μ_k or, when μ_k sits in a
/// cluster of width l > 1, the cluster mean with gap penalty. Uses `cfg.alpha` as given.
inline double objective(const DensityField& rho, const OptimizerConfig& cfg)
{
    OptimizerConfig c = cfg;
    c.auto_alpha = false;
    return Optimizer(rho.mesh_ptr(), c).init(rho.values(), c.eps).objective;
}

namespace detail {

inline double gray_area(const DensityField& rho, const Eigen::VectorXd& weights)
{
    double a = 0.0;
    for (Eigen::Index i = 0; i < rho.size(); ++i)
        if (rho[i] > 0.05 && rho[i] < 0.95) a += weights[i];
    return a;
}

} // namespace detail

/// Fills the report fields that depend only on the final density.
inline void summarize(RunReport& r, const DensityField& rho, const OptimizerConfig& cfg, double eps)
{
    auto disc = std::make_shared<const TriDiscretization>(rho.mesh_ptr());
    const Eigen::VectorXd w = hat_integrals(rho.mesh());
    EigenOptions eo;
    eo.tol = cfg.eig_tol;
    const auto pair = assemble(disc, rho.values(), eps, cfg.scheme);
    const auto s = solve_lowest(pair, cfg.k + 1 + cfg.extra_modes, eo);
    r.eigenvalues.assign(s.eigenvalues.data(), s.eigenvalues.data() + std::min<Eigen::Index>(cfg.k + 3, s.eigenvalues.size()));
    r.mass = w.dot(rho.values());
    r.mu_k = s[static_cast<std::size_t>(cfg.k)];
    r.normalized = r.mass * r.mu_k;
    int mult = 1;
    while (static_cast<std::size_t>(cfg.k + mult) < s.size() &&
           s[static_cast<std::size_t>(cfg.k + mult)] - s[static_cast<std::size_t>(cfg.k + mult - 1)] <
               1e-2 * r.mu_k)
        ++mult;
    r.multiplicity = mult;
    r.gray_area = detail::gray_area(rho, w);
    r.mass_within_tolerance = std::abs(r.mass - cfg.m) <= 0.02 * cfg.m;
    try {
        const auto sx = extract_support(rho, cfg.post_threshold);
        r.support_components = static_cast<int>(sx.component_count());
        r.postprocessed_mu = postprocessed_mu(rho, cfg.post_threshold, cfg.k, eo);
        r.postprocessed_normalized = r.mass * r.postprocessed_mu;
    } catch (const std::exception&) {
        r.support_components = 0;
    }
}

namespace detail {

inline std::shared_ptr<const TriMesh> coarse_grid(const TriMesh& mesh, const OptimizerConfig& cfg)
{
    const auto& g = mesh.grid();
    if (!cfg.coarse_start || !g || g->nx % 2 != 0 || g->ny % 2 != 0) return nullptr;
    if (std::min(g->nx, g->ny) / 2 < cfg.coarse_min_cells) return nullptr;
    return std::make_shared<const TriMesh>(build_tri_mesh(g->nx / 2, g->ny / 2, g->box));
}

/// Ascent from `st` to a terminal status, tracking the best state at the target ε by
/// ‖ρ‖₁μ_k − α(‖ρ‖₁ − m)².
inline OptimizerState ascend(const Optimizer& opt, OptimizerState st, int max_iters, DensityField& best)
{
    const auto& cfg = opt.config();
    double best_value = -std::numeric_limits<double>::infinity();
    auto consider = [&](const OptimizerState& s) {
        if (s.eps != cfg.eps) return;
        const double mu = s.eval.spectrum[static_cast<std::size_t>(cfg.k)];
        const double v = s.eval.mass * mu - s.alpha * (s.eval.mass - cfg.m) * (s.eval.mass - cfg.m);
        if (v > best_value) {
            best_value = v;
            best = s.rho;
        }
    };
    if (cfg.continuation && st.eps != cfg.eps) {
        st = opt.iterate(std::move(st), st.iteration + max_iters / 2);
        st = opt.restart_at(st, cfg.eps);
    }
    consider(st);
    const int stop = st.iteration + max_iters;
    while (st.status == RunStatus::Running) {
        if (st.iteration >= stop) {
            st.status = RunStatus::MaxIterations;
            break;
        }
        st = opt.step(std::move(st));
        consider(st);
    }
    return st;
}

/// Ascent from the configured seed, started from the result on the half-resolution grid
/// (recursively) when one exists. Returns the terminal fine state and the best density.
inline std::pair<OptimizerState, DensityField> ascend_levels(std::shared_ptr<const TriMesh> mesh,
                                                             const OptimizerConfig& cfg, int& coarse_iterations,
                                                             std::vector<HistoryEntry>& history)
{
    Optimizer opt(mesh, cfg);
    OptimizerState st;
    if (auto coarse = coarse_grid(*mesh, cfg)) {
        OptimizerConfig cc = cfg;
        if (cfg.coarse_max_iters >= 0) cc.max_iters = cfg.coarse_max_iters;
        // the coarse result only seeds the fine run
        auto [cst, cbest] = ascend_levels(coarse, cc, coarse_iterations, history);
        for (auto& h : cst.history) h.iteration += coarse_iterations;
        history.insert(history.end(), cst.history.begin(), cst.history.end());
        coarse_iterations += cst.iteration;
        st = opt.init(interpolate_grid(cbest, mesh).values(), cfg.eps);
    } else {
        st = opt.init_random();
    }
    DensityField best = st.rho;
    st = ascend(opt, std::move(st), cfg.max_iters, best);
    return {std::move(st), std::move(best)};
}

} // namespace detail

/// Single run from the configured seed. Returns the best-seen density and a full report.
inline std::pair<DensityField, RunReport> run(std::shared_ptr<const TriMesh> mesh, const OptimizerConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    detail::validate(cfg);
    RunReport r;
    r.config = cfg;
    std::vector<HistoryEntry> history;
    auto [st, best] = detail::ascend_levels(mesh, cfg, r.coarse_iterations, history);
    for (auto& h : st.history) h.iteration += r.coarse_iterations;
    history.insert(history.end(), st.history.begin(), st.history.end());

    r.alpha = st.alpha;
    r.status = st.status;
    r.iterations = st.iteration;
    r.history = std::move(history);
    summarize(r, best, cfg, cfg.eps);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {best, r};
}

/// Runs seeds cfg.seed .. cfg.seed + seeds - 1 and keeps the highest ‖ρ‖₁μ_k.
/// `reports` receives every run's report in seed order.
inline std::pair<DensityField, RunReport> multistart(std::shared_ptr<const TriMesh> mesh, const OptimizerConfig& cfg,
                                                     int seeds, std::vector<RunReport>* reports = nullptr)
{
    detail::require(seeds >= 1, "multistart: need at least one seed");
    std::optional<std::pair<DensityField, RunReport>> best;
    for (int i = 0; i < seeds; ++i) {
        OptimizerConfig c = cfg;
        c.seed = cfg.seed + static_cast<std::uint64_t>(i);
        auto res = run(mesh, c);
        if (reports) reports->push_back(res.second);
        if (!best || res.second.normalized > best->second.normalized) best = std::move(res);
    }
    return *best;
}

} // namespace densopt
