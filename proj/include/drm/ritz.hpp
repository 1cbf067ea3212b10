#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "drm/common.hpp"
#include "drm/geometry.hpp"
#include "drm/network.hpp"
#include "drm/problem.hpp"

namespace drm {

/// Compensated (Kahan-Babuska/Neumaier) running sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            c_ += (sum_ - t) + x;
        else
            c_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + c_; }

private:
    double sum_ = 0.0;
    double c_ = 0.0;
};

/// The five terms of the Ritz functional:
///   l1 = |O|/2 E|grad u|^2,  l2 = |O|/2 E w u^2,  l3 = -|O| E f u,
///   l4 = alpha |dO| / (2 beta) E u^2,  l5 = -|dO| / beta E g u.
struct LossBreakdown {
    double l1 = 0.0;
    double l2 = 0.0;
    double l3 = 0.0;
    double l4 = 0.0;
    double l5 = 0.0;
    double total = 0.0;

    void finalize() {
        CompensatedSum s;
        for (double v : {l1, l2, l3, l4, l5}) s.add(v);
        total = s.value();
    }

    std::array<double, 6> as_array() const { return {l1, l2, l3, l4, l5, total}; }

    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// A sample batch with the problem data evaluated at its points.
///
/// Training evaluates the loss at the same points thousands of times; w, f
/// and g are evaluated once here.
struct PreparedBatch {
    PointSet interior;
    PointSet boundary;
    std::vector<double> w, f, g;
    double interior_scale = 0.0;  // |Omega| / N
    double boundary_scale = 0.0;  // |dOmega| / (beta M)
    double alpha = 0.0;

    std::size_t n_interior() const { return interior.size(); }
    std::size_t n_boundary() const { return boundary.size(); }
};

inline PreparedBatch prepare_batch(const SampleBatch& batch, const EllipticProblem& problem) {
    if (batch.interior.empty() || batch.boundary.empty())
        throw InvalidArgument("empirical loss needs at least one interior and one boundary point");
    if (batch.interior.dim() != problem.dimension())
        throw DimensionMismatch("batch interior", problem.dimension(), batch.interior.dim());
    if (batch.boundary.dim() != problem.dimension())
        throw DimensionMismatch("batch boundary", problem.dimension(), batch.boundary.dim());
    PreparedBatch pb;
    pb.interior = batch.interior;
    pb.boundary = batch.boundary;
    pb.w.reserve(pb.n_interior());
    pb.f.reserve(pb.n_interior());
    for (std::size_t i = 0; i < pb.n_interior(); ++i) {
        pb.w.push_back(problem.w(pb.interior[i]));
        pb.f.push_back(problem.f(pb.interior[i]));
    }
    pb.g.reserve(pb.n_boundary());
    for (std::size_t j = 0; j < pb.n_boundary(); ++j) pb.g.push_back(problem.g(pb.boundary[j]));
    pb.interior_scale = problem.domain.interior_measure() / static_cast<double>(pb.n_interior());
    pb.boundary_scale =
        problem.domain.boundary_measure() / (problem.bc.beta * static_cast<double>(pb.n_boundary()));
    pb.alpha = problem.bc.alpha;
    return pb;
}

/// Empirical loss of an arbitrary field on a batch.
template <ScalarField Field>
LossBreakdown empirical_loss(const Field& u, const SampleBatch& batch, const EllipticProblem& problem) {
    const PreparedBatch pb = prepare_batch(batch, problem);
    CompensatedSum s1, s2, s3, s4, s5;
    for (std::size_t i = 0; i < pb.n_interior(); ++i) {
        const EvalResult e = u.value_and_gradient(pb.interior[i]);
        double g2 = 0.0;
        for (double gp : e.gradient) g2 += gp * gp;
        s1.add(g2);
        s2.add(pb.w[i] * e.value * e.value);
        s3.add(pb.f[i] * e.value);
    }
    for (std::size_t j = 0; j < pb.n_boundary(); ++j) {
        const double v = u.value(pb.boundary[j]);
        s4.add(v * v);
        s5.add(pb.g[j] * v);
    }
    LossBreakdown r;
    r.l1 = 0.5 * pb.interior_scale * s1.value();
    r.l2 = 0.5 * pb.interior_scale * s2.value();
    r.l3 = -pb.interior_scale * s3.value();
    r.l4 = 0.5 * pb.alpha * pb.boundary_scale * s4.value();
    r.l5 = -pb.boundary_scale * s5.value();
    r.finalize();
    return r;
}

struct LossAndGradient {
    LossBreakdown loss;
    std::vector<double> gradient;
};

/// Empirical loss and its exact gradient in theta.
///
/// Interior points contribute through u and grad_x u, so the reverse sweep
/// runs over the dual-number forward pass (NetworkEvaluator::backward).
inline LossAndGradient loss_and_gradient(const NetworkArch& arch, const NetworkParams& params,
                                         const PreparedBatch& pb) {
    if (pb.interior.dim() != arch.input_dim()) throw DimensionMismatch("batch", arch.input_dim(), pb.interior.dim());
    NetworkEvaluator ev(arch, params);
    LossAndGradient out;
    out.gradient.assign(arch.parameter_count(), 0.0);
    const std::size_t d = arch.input_dim();
    std::vector<double> grad_bar(d);
    CompensatedSum s1, s2, s3, s4, s5;
    const double ci = pb.interior_scale;
    const double cb = pb.boundary_scale;
    for (std::size_t i = 0; i < pb.n_interior(); ++i) {
        const double u = ev.forward(pb.interior[i]);
        const auto gu = ev.gradient();
        double g2 = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
            g2 += gu[p] * gu[p];
            grad_bar[p] = ci * gu[p];
        }
        s1.add(g2);
        s2.add(pb.w[i] * u * u);
        s3.add(pb.f[i] * u);
        ev.backward(ci * (pb.w[i] * u - pb.f[i]), grad_bar, out.gradient);
    }
    for (std::size_t j = 0; j < pb.n_boundary(); ++j) {
        const double u = ev.value(pb.boundary[j]);
        s4.add(u * u);
        s5.add(pb.g[j] * u);
        ev.backward(cb * (pb.alpha * u - pb.g[j]), {}, out.gradient);
    }
    auto& r = out.loss;
    r.l1 = 0.5 * ci * s1.value();
    r.l2 = 0.5 * ci * s2.value();
    r.l3 = -ci * s3.value();
    r.l4 = 0.5 * pb.alpha * cb * s4.value();
    r.l5 = -cb * s5.value();
    r.finalize();
    return out;
}

/// Value-only variant of loss_and_gradient on a prepared batch.
inline LossBreakdown empirical_loss(const NetworkArch& arch, const NetworkParams& params, const PreparedBatch& pb) {
    NetworkEvaluator ev(arch, params);
    const std::size_t d = arch.input_dim();
    CompensatedSum s1, s2, s3, s4, s5;
    for (std::size_t i = 0; i < pb.n_interior(); ++i) {
        const double u = ev.forward(pb.interior[i]);
        const auto gu = ev.gradient();
        double g2 = 0.0;
        for (std::size_t p = 0; p < d; ++p) g2 += gu[p] * gu[p];
        s1.add(g2);
        s2.add(pb.w[i] * u * u);
        s3.add(pb.f[i] * u);
    }
    for (std::size_t j = 0; j < pb.n_boundary(); ++j) {
        const double u = ev.value(pb.boundary[j]);
        s4.add(u * u);
        s5.add(pb.g[j] * u);
    }
    LossBreakdown r;
    r.l1 = 0.5 * pb.interior_scale * s1.value();
    r.l2 = 0.5 * pb.interior_scale * s2.value();
    r.l3 = -pb.interior_scale * s3.value();
    r.l4 = 0.5 * pb.alpha * pb.boundary_scale * s4.value();
    r.l5 = -pb.boundary_scale * s5.value();
    r.finalize();
    return r;
}

inline LossBreakdown empirical_loss(const NetworkArch& arch, const NetworkParams& params, const SampleBatch& batch,
                                    const EllipticProblem& problem) {
    return empirical_loss(arch, params, prepare_batch(batch, problem));
}

inline std::vector<double> loss_param_gradient(const NetworkArch& arch, const NetworkParams& params,
                                               const SampleBatch& batch, const EllipticProblem& problem) {
    return loss_and_gradient(arch, params, prepare_batch(batch, problem)).gradient;
}

/// Monte-Carlo estimate of the continuous functional with per-term standard errors.
struct LossEstimate {
    LossBreakdown value;
    LossBreakdown stderr_;
    std::size_t samples = 0;
};

namespace detail {

struct RunningMoments {
    CompensatedSum sum, sum_sq;
    void add(double x) {
        sum.add(x);
        sum_sq.add(x * x);
    }
    // mean and standard error of the mean over n samples
    std::pair<double, double> mean_se(std::size_t n) const {
        const double nd = static_cast<double>(n);
        const double mean = sum.value() / nd;
        const double var = std::max(0.0, (sum_sq.value() - nd * mean * mean) / std::max(1.0, nd - 1.0));
        return {mean, std::sqrt(var / nd)};
    }
};

}  // namespace detail

/// Fresh-sample Monte-Carlo estimate of the continuous functional.
template <ScalarField Field>
LossEstimate continuous_loss_estimate(const Field& u, const EllipticProblem& problem, std::size_t n_quad,
                                      std::uint64_t seed) {
    if (n_quad < 1000) throw InvalidArgument("continuous_loss_estimate: n_quad must be >= 1000");
    const SampleBatch batch = sample_batch(problem.domain, n_quad, n_quad, seed);
    const double om = problem.domain.interior_measure();
    const double bd = problem.domain.boundary_measure() / problem.bc.beta;
    const double alpha = problem.bc.alpha;
    detail::RunningMoments m1, m2, m3, mi, m4, m5, mb;
    for (std::size_t i = 0; i < n_quad; ++i) {
        const auto x = batch.interior[i];
        const EvalResult e = u.value_and_gradient(x);
        double g2 = 0.0;
        for (double gp : e.gradient) g2 += gp * gp;
        const double q1 = 0.5 * om * g2;
        const double q2 = 0.5 * om * problem.w(x) * e.value * e.value;
        const double q3 = -om * problem.f(x) * e.value;
        m1.add(q1);
        m2.add(q2);
        m3.add(q3);
        mi.add(q1 + q2 + q3);
    }
    for (std::size_t j = 0; j < n_quad; ++j) {
        const auto y = batch.boundary[j];
        const double v = u.value(y);
        const double q4 = 0.5 * alpha * bd * v * v;
        const double q5 = -bd * problem.g(y) * v;
        m4.add(q4);
        m5.add(q5);
        mb.add(q4 + q5);
    }
    LossEstimate est;
    est.samples = n_quad;
    std::tie(est.value.l1, est.stderr_.l1) = m1.mean_se(n_quad);
    std::tie(est.value.l2, est.stderr_.l2) = m2.mean_se(n_quad);
    std::tie(est.value.l3, est.stderr_.l3) = m3.mean_se(n_quad);
    std::tie(est.value.l4, est.stderr_.l4) = m4.mean_se(n_quad);
    std::tie(est.value.l5, est.stderr_.l5) = m5.mean_se(n_quad);
    est.value.finalize();
    const double se_i = mi.mean_se(n_quad).second;
    const double se_b = mb.mean_se(n_quad).second;
    est.stderr_.total = std::sqrt(se_i * se_i + se_b * se_b);
    return est;
}

/// End points of a one-dimensional domain.
inline std::pair<double, double> interval_of(const Domain& domain) {
    if (domain.dimension() != 1) throw InvalidArgument("expected a one-dimensional domain");
    if (domain.kind() == DomainKind::UnitHypercube) return {0.0, 1.0};
    return {domain.center()[0] - domain.radius(), domain.center()[0] + domain.radius()};
}

/// Deterministic evaluation of the continuous functional in d = 1:
/// composite 8-point Gauss-Legendre in the interior, exact two-point boundary sum.
template <ScalarField Field>
LossBreakdown quadrature_loss_1d(const Field& u, const EllipticProblem& problem, std::size_t panels = 256) {
    const auto [a, b] = interval_of(problem.domain);
    using Rule = boost::math::quadrature::gauss<double, 8>;
    const auto& nodes = Rule::abscissa();
    const auto& weights = Rule::weights();
    const double h = (b - a) / static_cast<double>(panels);
    CompensatedSum s1, s2, s3;
    std::array<double, 1> x{};
    auto add = [&](double t, double wt) {
        x[0] = t;
        const EvalResult e = u.value_and_gradient(x);
        s1.add(wt * e.gradient[0] * e.gradient[0]);
        s2.add(wt * problem.w(x) * e.value * e.value);
        s3.add(wt * problem.f(x) * e.value);
    };
    for (std::size_t k = 0; k < panels; ++k) {
        const double mid = a + (static_cast<double>(k) + 0.5) * h;
        const double half = 0.5 * h;
        for (std::size_t q = 0; q < nodes.size(); ++q) {
            if (nodes[q] == 0.0) {
                add(mid, half * weights[q]);
            } else {
                add(mid - half * nodes[q], half * weights[q]);
                add(mid + half * nodes[q], half * weights[q]);
            }
        }
    }
    LossBreakdown r;
    r.l1 = 0.5 * s1.value();
    r.l2 = 0.5 * s2.value();
    r.l3 = -s3.value();
    const double inv_beta = 1.0 / problem.bc.beta;
    for (double e : {a, b}) {
        x[0] = e;
        const double v = u.value(x);
        r.l4 += 0.5 * problem.bc.alpha * inv_beta * v * v;
        r.l5 += -inv_beta * problem.g(x) * v;
    }
    r.finalize();
    return r;
}

/// Generalisation gap |L(u) - L_hat(u)| measured over independent fresh-sample trials.
struct GapReport {
    std::vector<double> gaps;
    double mean = 0.0;
    double stddev = 0.0;
};

namespace detail {

inline void summarize(GapReport& r) {
    if (r.gaps.empty()) return;
    const double n = static_cast<double>(r.gaps.size());
    r.mean = std::accumulate(r.gaps.begin(), r.gaps.end(), 0.0) / n;
    double ss = 0.0;
    for (double g : r.gaps) ss += (g - r.mean) * (g - r.mean);
    r.stddev = r.gaps.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

}  // namespace detail

/// Trial t uses seed + t for its fresh sample.
template <ScalarField Field>
GapReport generalization_gap(const Field& u, const EllipticProblem& problem, const SampleBatch& train_batch,
                             std::size_t n_fresh, std::size_t trials, std::uint64_t seed) {
    const double train = empirical_loss(u, train_batch, problem).total;
    GapReport r;
    for (std::size_t t = 0; t < trials; ++t)
        r.gaps.push_back(std::abs(continuous_loss_estimate(u, problem, n_fresh, seed + t).value.total - train));
    detail::summarize(r);
    return r;
}

/// d = 1 variant with a deterministic quadrature reference: a single exact-in-
/// the-limit gap with no Monte-Carlo noise on the continuous side.
template <ScalarField Field>
double generalization_gap_1d(const Field& u, const EllipticProblem& problem, const SampleBatch& train_batch) {
    return std::abs(quadrature_loss_1d(u, problem).total - empirical_loss(u, train_batch, problem).total);
}

}  // namespace drm
