#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "drm/bounds.hpp"
#include "drm/common.hpp"
#include "drm/geometry.hpp"
#include "drm/network.hpp"
#include "drm/problem.hpp"
#include "drm/problems.hpp"
#include "drm/ritz.hpp"
#include "drm/train.hpp"

namespace drm {

// ------------------------------------------------------------- statistics

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// ------------------------------------------------------------- H1 errors

/// Errors of u against a reference u*. Each norm carries the standard error
/// of its Monte-Carlo estimate (0 for grid quadrature). h1^2 = l2^2 + semi^2
/// holds up to rounding because all three use the same points.
struct ErrorReport {
    double l2_error = 0.0;
    double l2_stderr = 0.0;
    double h1_seminorm_error = 0.0;
    double h1_seminorm_stderr = 0.0;
    double h1_error = 0.0;
    double h1_stderr = 0.0;
    double reference_h1_norm = 0.0;  // ||u*||_H1 on the same points
    std::size_t samples = 0;
    std::string method;

    double relative_h1() const {
        return reference_h1_norm > 0.0 ? h1_error / reference_h1_norm : std::numeric_limits<double>::infinity();
    }
};

namespace detail {

// sqrt of a mean estimate with its delta-method standard error
inline std::pair<double, double> root_with_se(double m, double se) {
    const double r = std::sqrt(std::max(0.0, m));
    return {r, r > 0.0 ? se / (2.0 * r) : 0.0};
}

}  // namespace detail

/// Monte-Carlo H1 error over `n_quad` uniform interior points.
template <ScalarField U, ScalarField V>
ErrorReport h1_error(const U& u, const V& exact, const Domain& domain, std::size_t n_quad, std::uint64_t seed) {
    if (n_quad < 2) throw InvalidArgument("h1_error: n_quad must be >= 2");
    const PointSet pts = sample_interior(domain, n_quad, seed);
    const double vol = domain.interior_measure();
    detail::RunningMoments m0, m1, mh, mr;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto a = u.value_and_gradient(pts[i]);
        const auto b = exact.value_and_gradient(pts[i]);
        const double dv = a.value - b.value;
        double dg = 0.0, rg = 0.0;
        for (std::size_t k = 0; k < a.gradient.size(); ++k) {
            dg += (a.gradient[k] - b.gradient[k]) * (a.gradient[k] - b.gradient[k]);
            rg += b.gradient[k] * b.gradient[k];
        }
        m0.add(vol * dv * dv);
        m1.add(vol * dg);
        mh.add(vol * (dv * dv + dg));
        mr.add(vol * (b.value * b.value + rg));
    }
    ErrorReport r;
    r.samples = n_quad;
    r.method = "monte_carlo";
    auto [m0v, m0s] = m0.mean_se(n_quad);
    auto [m1v, m1s] = m1.mean_se(n_quad);
    auto [mhv, mhs] = mh.mean_se(n_quad);
    std::tie(r.l2_error, r.l2_stderr) = detail::root_with_se(m0v, m0s);
    std::tie(r.h1_seminorm_error, r.h1_seminorm_stderr) = detail::root_with_se(m1v, m1s);
    std::tie(r.h1_error, r.h1_stderr) = detail::root_with_se(mhv, mhs);
    r.reference_h1_norm = std::sqrt(mr.mean_se(n_quad).first);
    return r;
}

inline ErrorReport h1_error(const NetworkArch& arch, const NetworkParams& params, const ManufacturedSolution& exact,
                            const Domain& domain, std::size_t n_quad, std::uint64_t seed) {
    return h1_error(NetworkField(arch, params), exact, domain, n_quad, seed);
}

/// Deterministic d = 1 alternative: trapezoidal rule on `nodes` equispaced nodes.
template <ScalarField U, ScalarField V>
ErrorReport h1_error_grid_1d(const U& u, const V& exact, const Domain& domain, std::size_t nodes = 1025) {
    if (nodes < 512) throw InvalidArgument("h1_error_grid_1d: need at least 512 nodes");
    const auto [a, b] = interval_of(domain);
    const double h = (b - a) / static_cast<double>(nodes - 1);
    CompensatedSum s0, s1, sr;
    std::array<double, 1> x{};
    for (std::size_t i = 0; i < nodes; ++i) {
        x[0] = i + 1 == nodes ? b : a + static_cast<double>(i) * h;
        const auto p = u.value_and_gradient(x);
        const auto q = exact.value_and_gradient(x);
        const double wt = (i == 0 || i + 1 == nodes) ? 0.5 * h : h;
        const double dv = p.value - q.value;
        const double dg = p.gradient[0] - q.gradient[0];
        s0.add(wt * dv * dv);
        s1.add(wt * dg * dg);
        sr.add(wt * (q.value * q.value + q.gradient[0] * q.gradient[0]));
    }
    ErrorReport r;
    r.samples = nodes;
    r.method = "grid_trapezoid";
    r.l2_error = std::sqrt(s0.value());
    r.h1_seminorm_error = std::sqrt(s1.value());
    r.h1_error = std::sqrt(s0.value() + s1.value());
    r.reference_h1_norm = std::sqrt(sr.value());
    return r;
}

/// Reference solution of a problem: the manufactured one when known, else a
/// fine-grid solve in d = 1.
using ExactField = std::function<EvalResult(std::span<const double>)>;

struct CallableField {
    ExactField fn;
    double value(std::span<const double> x) const { return fn(x).value; }
    EvalResult value_and_gradient(std::span<const double> x) const { return fn(x); }
};

inline CallableField reference_field(const EllipticProblem& problem, std::size_t n_grid = 4096) {
    if (problem.exact) {
        auto ex = *problem.exact;
        return {[ex](std::span<const double> x) { return ex.value_and_gradient(x); }};
    }
    if (problem.dimension() == 1) {
        auto ref = solve_reference_1d(problem, n_grid);
        return {[ref](std::span<const double> x) { return ref.value_and_gradient(x); }};
    }
    throw InvalidArgument("problem '" + problem.name + "' has no known solution and d > 1");
}

/// Grid quadrature in d = 1, Monte Carlo otherwise.
template <ScalarField U>
ErrorReport measure_h1_error(const U& u, const EllipticProblem& problem, std::size_t n_quad, std::uint64_t seed) {
    const auto ref = reference_field(problem);
    if (problem.dimension() == 1) return h1_error_grid_1d(u, ref, problem.domain, std::max<std::size_t>(n_quad, 1025));
    return h1_error(u, ref, problem.domain, n_quad, seed);
}

/// |L(u) - L_hat(u)| on the training batch: quadrature reference in d = 1,
/// one fresh Monte-Carlo sample of size n_fresh otherwise.
template <ScalarField U>
double measure_gap(const U& u, const EllipticProblem& problem, const SampleBatch& batch, std::size_t n_fresh,
                   std::uint64_t seed) {
    if (problem.dimension() == 1) return generalization_gap_1d(u, problem, batch);
    return generalization_gap(u, problem, batch, n_fresh, 1, seed).mean;
}

// ------------------------------------------------------------ job pool

/// Runs fn(0..count-1) on up to `jobs` threads. Exceptions escaping fn are
/// rethrown after all workers stop.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lk(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// -------------------------------------------------------- decomposition

struct DecompositionConfig {
    NetworkArch arch = NetworkArch({1, 8, 1}, Activation::Tanh, 10.0);
    TrainConfig train;  // batch sizes give N and M
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::size_t approx_samples = 4096;  // N = M of the large-budget run
    std::size_t approx_steps = 0;       // 0: 4 * train.steps
    std::size_t n_quad = 4096;
    double C_aggregate = 1.0;
    std::size_t jobs = 1;
};

struct DecompositionReport {
    double e_app = 0.0;
    double e_sta = 0.0;
    double e_opt = 0.0;
    double e_sta_mean = 0.0;
    double e_opt_median = 0.0;
    double approx_h1_error = 0.0;
    double reference_loss = 0.0;
    std::vector<double> gaps;
    std::vector<double> opt_errors;
    std::vector<std::string> notes;
};

/// Surrogates for the approximation, statistical and optimisation errors:
///   e_app = (C / beta) * (H1 error of a large-budget run)^2,
///   e_sta = median generalisation gap over the seed ensemble,
///   e_opt = mean over seeds of (best loss - ensemble best loss).
/// The large-budget run uses its own sample size, so e_app does not depend
/// on the ensemble's N.
inline DecompositionReport decompose_errors(const EllipticProblem& problem, const DecompositionConfig& cfg) {
    if (cfg.seeds.empty()) throw InvalidArgument("decompose_errors: need at least one seed");
    DecompositionReport rep;
    const std::size_t S = cfg.seeds.size();
    std::vector<TrainResult> runs(S);
    rep.gaps.assign(S, 0.0);
    parallel_for(S, cfg.jobs, [&](std::size_t k) {
        TrainConfig tc = cfg.train;
        tc.seed = cfg.seeds[k];
        tc.batch.mode = BatchConfig::Mode::FullBatch;
        const auto batch = sample_batch(problem.domain, tc.batch.n_interior, tc.batch.n_boundary,
                                        derive_seed(tc.seed, kBatchStream));
        runs[k] = train(cfg.arch, problem, tc, batch);
        if (!runs[k].ok()) throw NumericalError("decompose_errors: seed " + std::to_string(tc.seed) + ": " + runs[k].message);
        rep.gaps[k] = measure_gap(NetworkField(cfg.arch, runs[k].params), problem, batch, cfg.n_quad,
                                  derive_seed(tc.seed, 3));
    });
    rep.reference_loss = ensemble_reference_loss(runs);
    for (const auto& r : runs) rep.opt_errors.push_back(optimization_error_estimate(r, rep.reference_loss));
    rep.e_opt = mean(rep.opt_errors);
    rep.e_opt_median = median(rep.opt_errors);
    rep.e_sta = median(rep.gaps);
    rep.e_sta_mean = mean(rep.gaps);

    TrainConfig big = cfg.train;
    big.seed = derive_seed(cfg.seeds.front(), 99);
    big.batch = {BatchConfig::Mode::FullBatch, cfg.approx_samples, cfg.approx_samples};
    big.steps = cfg.approx_steps ? cfg.approx_steps : 4 * cfg.train.steps;
    big.log_every = std::max<std::size_t>(1, big.steps / 10);
    const auto best = train(cfg.arch, problem, big);
    if (!best.ok()) throw NumericalError("decompose_errors: large-budget run: " + best.message);
    rep.approx_h1_error = measure_h1_error(NetworkField(cfg.arch, best.params), problem, cfg.n_quad,
                                           derive_seed(big.seed, 3)).h1_error;
    rep.e_app = cfg.C_aggregate / problem.bc.beta * rep.approx_h1_error * rep.approx_h1_error;

    rep.notes = {
        "e_app: (C/beta) * H1_error^2 of one run with N = M = " + std::to_string(cfg.approx_samples) + " and " +
            std::to_string(big.steps) + " steps; C = " + std::to_string(cfg.C_aggregate),
        "e_sta: median over seeds of |L(u) - L_hat(u)| at the trained network" +
            std::string(problem.dimension() == 1 ? " (quadrature reference)" : " (Monte-Carlo reference)"),
        "e_opt: mean over seeds of best L_hat minus the ensemble best; the ensemble best stands in for the "
        "unknown empirical minimiser, so this is a lower estimate",
    };
    return rep;
}

// ------------------------------------------------------ gap versus N

struct GapTrendConfig {
    NetworkArch arch = NetworkArch({1, 16, 16, 1}, Activation::Tanh, 10.0);
    TrainConfig train;
    std::vector<std::size_t> sample_sizes = {250, 1000, 4000};
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::size_t n_quad = 16384;
    std::size_t jobs = 1;
};

struct GapTrend {
    std::vector<std::size_t> sample_sizes;
    std::vector<std::vector<double>> gaps;  // [size][seed]
    std::vector<double> medians;
    std::vector<double> unit_bounds;  // statistical bound with C = 1
    double C_calibrated = 0.0;
    std::vector<double> calibrated_bounds;

    bool strictly_decreasing() const {
        for (std::size_t i = 1; i < medians.size(); ++i)
            if (!(medians[i] < medians[i - 1])) return false;
        return !medians.empty();
    }
    bool bound_dominates() const {
        for (std::size_t i = 0; i < gaps.size(); ++i)
            for (double g : gaps[i])
                if (!(g <= calibrated_bounds[i])) return false;
        return true;
    }
};

/// Trains at each sample size N = M and measures the generalisation gap. The
/// aggregate constant is calibrated once, at the smallest N, as the largest
/// gap there divided by the unit bound.
inline GapTrend gap_trend(const EllipticProblem& problem, const GapTrendConfig& cfg) {
    GapTrend out;
    out.sample_sizes = cfg.sample_sizes;
    const std::size_t S = cfg.seeds.size(), K = cfg.sample_sizes.size();
    out.gaps.assign(K, std::vector<double>(S, 0.0));
    parallel_for(K * S, cfg.jobs, [&](std::size_t idx) {
        const std::size_t i = idx / S, k = idx % S;
        TrainConfig tc = cfg.train;
        tc.seed = cfg.seeds[k];
        tc.batch = {BatchConfig::Mode::FullBatch, cfg.sample_sizes[i], cfg.sample_sizes[i]};
        const auto batch = sample_batch(problem.domain, cfg.sample_sizes[i], cfg.sample_sizes[i],
                                        derive_seed(tc.seed, kBatchStream));
        const auto run = train(cfg.arch, problem, tc, batch);
        if (!run.ok()) throw NumericalError("gap_trend: " + run.message);
        out.gaps[i][k] = measure_gap(NetworkField(cfg.arch, run.params), problem, batch, cfg.n_quad,
                                     derive_seed(tc.seed, 3));
    });
    for (std::size_t i = 0; i < K; ++i) {
        out.medians.push_back(median(out.gaps[i]));
        out.unit_bounds.push_back(statistical_error_bound(cfg.arch, cfg.sample_sizes[i], cfg.sample_sizes[i],
                                                          problem.bc.alpha, problem.bc.beta, problem.dimension())
                                      .value);
    }
    if (K > 0) {
        out.C_calibrated = *std::max_element(out.gaps[0].begin(), out.gaps[0].end()) / out.unit_bounds[0];
        for (double b : out.unit_bounds) out.calibrated_bounds.push_back(out.C_calibrated * b);
    }
    return out;
}

// ------------------------------------------------------ convergence sweep

/// One cell family of the sweep: a concrete architecture and sample count.
struct SweepPlan {
    std::string id;
    double eps = 0.0;
    NetworkArch arch;
    std::size_t N = 0, M = 0;
    std::optional<double> beta;  // overrides the problem's penalty (Dirichlet)
};

/// Instantiates a plan as a uniform-width network.
inline SweepPlan sweep_plan(const std::string& id, double eps, const HyperParamPlan& plan, std::size_t d,
                            Activation act) {
    if (!plan.samples.representable || plan.samples.value > 1e9)
        throw InvalidArgument("plan '" + id + "': sample count too large to run (log10 N = " +
                              std::to_string(plan.samples.log10()) + ")");
    const auto n = static_cast<std::size_t>(plan.samples.value);
    return {id, eps, arch_from_plan(plan, d, act), n, n, plan.beta};
}

struct SweepRow {
    std::string plan_id;
    double eps = 0.0;
    std::uint64_t seed = 0;
    std::size_t depth = 0;
    std::size_t width_total = 0;  // sum of hidden widths
    double B_theta = 0.0;
    std::size_t N = 0, M = 0;
    double beta = 0.0;
    double h1_error = std::numeric_limits<double>::quiet_NaN();
    double h1_stderr = std::numeric_limits<double>::quiet_NaN();
    double gap = std::numeric_limits<double>::quiet_NaN();
    double stat_bound = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";

    bool ok() const { return status == "ok"; }
};

struct SweepConfig {
    TrainConfig train;  // batch sizes are taken from each plan
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::size_t n_quad = 4096;
    double C_aggregate = 1.0;
    bool calibrate_first_row = true;  // replaces C_aggregate by gap/unit-bound of row 0
    std::size_t jobs = 1;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double C_aggregate = 1.0;  // value actually used for stat_bound
};

namespace detail {

inline SweepRow run_sweep_cell(const EllipticProblem& base, const SweepPlan& plan, std::uint64_t seed,
                               const SweepConfig& cfg) {
    SweepRow row;
    row.plan_id = plan.id;
    row.eps = plan.eps;
    row.seed = seed;
    row.depth = plan.arch.depth();
    for (std::size_t l = 1; l < plan.arch.depth(); ++l) row.width_total += plan.arch.width(l);
    row.B_theta = plan.arch.weight_bound();
    row.N = plan.N;
    row.M = plan.M;
    try {
        EllipticProblem problem = base;
        if (plan.beta) {
            if (problem.bc.kind != BoundaryCondition::Kind::DirichletPenalty)
                throw InvalidArgument("plan '" + plan.id + "' sets beta but the problem is not penalised Dirichlet");
            problem.bc = BoundaryCondition::dirichlet_penalty(*plan.beta);
        }
        row.beta = problem.bc.beta;
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        tc.batch = {BatchConfig::Mode::FullBatch, plan.N, plan.M};
        const auto batch = sample_batch(problem.domain, plan.N, plan.M, derive_seed(seed, kBatchStream));
        const auto run = train(plan.arch, problem, tc, batch);
        if (!run.ok()) {
            row.status = "aborted: " + run.message;
            return row;
        }
        const NetworkField u(plan.arch, run.params);
        const auto err = measure_h1_error(u, problem, cfg.n_quad, derive_seed(seed, 4));
        row.h1_error = err.h1_error;
        row.h1_stderr = err.h1_stderr;
        row.gap = measure_gap(u, problem, batch, cfg.n_quad, derive_seed(seed, 3));
        if (plan.N == plan.M)
            row.stat_bound = statistical_error_bound(plan.arch, plan.N, plan.M, problem.bc.alpha, problem.bc.beta,
                                                     problem.dimension(), 1.0)
                                 .value;
    } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
    }
    return row;
}

}  // namespace detail

/// Trains every plan x seed cell and reports H1 error, gap and the scaled
/// statistical bound. Failed cells become rows with a status message.
///
/// `on_row` receives rows in table order as soon as the completed prefix
/// grows, so a caller writing them out keeps a valid partial table if the
/// process dies mid-sweep.
inline SweepResult convergence_sweep(const EllipticProblem& problem, const std::vector<SweepPlan>& plans,
                                     const SweepConfig& cfg,
                                     const std::function<void(const SweepRow&)>& on_row = {}) {
    SweepResult res;
    res.C_aggregate = cfg.C_aggregate;
    const std::size_t S = cfg.seeds.size();
    const std::size_t total = plans.size() * S;
    if (total == 0) return res;

    std::vector<std::optional<SweepRow>> cells(total);
    std::size_t emitted = 0;
    std::mutex mu;
    auto finish = [&](std::size_t idx, SweepRow row) {
        std::lock_guard lk(mu);
        cells[idx] = std::move(row);
        while (emitted < total && cells[emitted]) {
            auto& r = *cells[emitted];
            if (r.ok() && std::isfinite(r.stat_bound)) r.stat_bound *= res.C_aggregate;
            if (on_row) on_row(r);
            ++emitted;
        }
    };

    // Row 0 runs alone because calibration must precede every scaled bound.
    SweepRow first = detail::run_sweep_cell(problem, plans[0], cfg.seeds[0], cfg);
    if (cfg.calibrate_first_row && first.ok() && first.stat_bound > 0.0 && std::isfinite(first.stat_bound))
        res.C_aggregate = first.gap / first.stat_bound;
    finish(0, std::move(first));

    parallel_for(total - 1, cfg.jobs, [&](std::size_t k) {
        const std::size_t idx = k + 1;
        finish(idx, detail::run_sweep_cell(problem, plans[idx / S], cfg.seeds[idx % S], cfg));
    });
    for (auto& c : cells) res.rows.push_back(std::move(*c));
    return res;
}

/// Median H1 error per plan, in plan order, over rows with status ok.
inline std::vector<double> median_h1_by_plan(const std::vector<SweepPlan>& plans, const std::vector<SweepRow>& rows) {
    std::vector<double> out;
    for (const auto& p : plans) {
        std::vector<double> v;
        for (const auto& r : rows)
            if (r.plan_id == p.id && r.ok()) v.push_back(r.h1_error);
        out.push_back(median(v));
    }
    return out;
}

}  // namespace drm
