#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "drm/problems.hpp"
#include "drm/rng.hpp"
#include "oracles.hpp"

using namespace drm;

namespace {

constexpr double pi = std::numbers::pi;

double max_error(const ReferenceSolution1D& s, const ManufacturedSolution& u) {
    double e = 0.0;
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
        const double x[1] = {s.grid[i]};
        e = std::max(e, std::abs(s.values[i] - u.value(x)));
    }
    return e;
}

// -Laplace(u) by central second differences.
double fd_laplacian(const ScalarFunction& u, std::vector<double> x, double h) {
    const double u0 = u(x);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double xk = x[k];
        x[k] = xk + h;
        const double up = u(x);
        x[k] = xk - h;
        const double um = u(x);
        x[k] = xk;
        s += (up - 2 * u0 + um) / (h * h);
    }
    return s;
}

// u_R - u_D = C cosh(x - 1/2) for the sin(pi x) family with alpha = 1, g = 0,
// where C = beta pi / (cosh(1/2) + beta sinh(1/2)); its H1 norm is |C| sqrt(sinh 1).
double closed_form_penalty_gap(double beta) {
    const double C = beta * pi / (std::cosh(0.5) + beta * std::sinh(0.5));
    return C * std::sqrt(std::sinh(1.0));
}

}  // namespace

TEST(Manufactured, SinRobinDataByHand) {
    const auto p = builtin_problem("sin1d_robin");
    for (double x : {0.1, 0.37, 0.8}) {
        const double xs[1] = {x};
        EXPECT_NEAR(p.f(xs), (pi * pi + 1) * std::sin(pi * x), 1e-12);
    }
    const double a[1] = {0.0}, b[1] = {1.0};
    EXPECT_NEAR(p.g(a), -pi, 1e-12);
    EXPECT_NEAR(p.g(b), -pi, 1e-12);
    ASSERT_TRUE(p.exact.has_value());
}

TEST(Manufactured, EveryBuiltinSatisfiesItsPde) {
    for (const auto& name : builtin_problem_names()) {
        const auto p = builtin_problem(name);
        Xoshiro256 rng(3);
        const std::size_t d = p.dimension();
        for (int t = 0; t < 20; ++t) {
            std::vector<double> x(d);
            for (auto& v : x) v = rng.uniform(0.05, 0.95);
            const double lap = p.exact->laplacian_u(x);
            EXPECT_NEAR(-lap + p.w(x) * p.exact->u(x) - p.f(x), 0.0, 1e-10) << name;
            EXPECT_NEAR(lap, fd_laplacian(p.exact->u, x, 1e-4), 1e-4 * (1 + std::abs(lap))) << name;
            const auto g = p.exact->grad_u(x);
            for (std::size_t k = 0; k < d; ++k)
                EXPECT_NEAR(g[k], oracle::central_difference(p.exact->u, x, k, 1e-6), 1e-7) << name;
        }
    }
}

TEST(Manufactured, RobinDataMatchesNormalDerivative) {
    auto spec = builtin_problem_spec("gauss2d_robin");
    spec.bc = BoundaryCondition::robin(2.0, 0.5);
    spec.w = ReactionCoefficient::one_plus_squared();
    const auto p = make_manufactured(spec);
    const auto pts = sample_boundary(p.domain, 200, 4);
    for (std::size_t j = 0; j < pts.size(); ++j) {
        const std::vector<double> y(pts[j].begin(), pts[j].end());
        const auto n = p.domain.outward_normal(y);
        const auto g = p.exact->grad_u(y);
        const double dn = g[0] * n[0] + g[1] * n[1];
        EXPECT_NEAR(p.g(y), 2.0 * p.exact->u(y) + 0.5 * dn, 1e-12);
    }
    const double x[2] = {0.3, 0.6};
    EXPECT_DOUBLE_EQ(p.w(x), 1.0 + 0.09 + 0.36);
}

TEST(Manufactured, DirichletTraceVanishes) {
    const auto p = builtin_problem("sin2d_dirichlet");
    const auto pts = sample_boundary(p.domain, 400, 5);
    for (std::size_t j = 0; j < pts.size(); ++j) {
        EXPECT_NEAR(p.exact->u(pts[j]), 0.0, 1e-15);
        EXPECT_EQ(p.g(pts[j]), 0.0);
    }
    EXPECT_NO_THROW(validate(p));
}

TEST(Manufactured, RejectsInvalidSetups) {
    auto spec = builtin_problem_spec("quad1d_robin");
    spec.w = ReactionCoefficient::constant_value(0.0);
    EXPECT_THROW(make_manufactured(spec), InvalidArgument);
    auto bump = builtin_problem_spec("gauss2d_robin");
    bump.bc = BoundaryCondition::dirichlet_penalty(0.1);
    EXPECT_THROW(make_manufactured(bump), InvalidArgument);
    EXPECT_THROW(builtin_problem("nope"), InvalidArgument);
    EXPECT_THROW(BoundaryCondition::robin(1.0, 0.0), InvalidArgument);
}

// ------------------------------------------------------- reference solver

TEST(ReferenceSolver, RobinSinIsSecondOrder) {
    const auto p = builtin_problem("sin1d_robin");
    const double e1 = max_error(solve_reference_1d(p, 256), *p.exact);
    const double e2 = max_error(solve_reference_1d(p, 512), *p.exact);
    EXPECT_LE(e2, 1e-4);
    EXPECT_GE(e1 / e2, 3.5);
    EXPECT_LE(e1 / e2, 4.5);
}

TEST(ReferenceSolver, DirichletMatchesSin) {
    const auto p = make_manufactured({"d", Domain::hypercube(1), SolutionKind::SinProduct,
                                      ReactionCoefficient::constant_value(1.0), BoundaryCondition::dirichlet_penalty(1.0)});
    const auto s = solve_reference_1d(p, 512);
    EXPECT_LE(max_error(s, *p.exact), 1e-4);
    EXPECT_EQ(s.values.front(), 0.0);
    EXPECT_EQ(s.values.back(), 0.0);
}

// Central differences and the ghost-node closure are exact on quadratics.
TEST(ReferenceSolver, QuadraticReproducedExactly) {
    auto spec = builtin_problem_spec("quad1d_robin");
    spec.w = ReactionCoefficient::one_plus_squared();
    spec.bc = BoundaryCondition::robin(0.5, 2.0);
    const auto p = make_manufactured(spec);
    EXPECT_LE(max_error(solve_reference_1d(p, 128), *p.exact), 1e-11);
}

TEST(ReferenceSolver, ZeroDataGivesZero) {
    for (auto bc : {BoundaryCondition::robin(1.0, 1.0), BoundaryCondition::neumann(),
                    BoundaryCondition::dirichlet_penalty(0.1)}) {
        EllipticProblem p;
        p.domain = Domain::hypercube(1);
        p.w = [](std::span<const double>) { return 2.0; };
        p.f = [](std::span<const double>) { return 0.0; };
        p.g = [](std::span<const double>) { return 0.0; };
        p.bc = bc;
        for (double v : solve_reference_1d(p, 64).values) EXPECT_EQ(v, 0.0);
    }
}

TEST(ReferenceSolver, InterpolatesBetweenNodes) {
    const auto p = builtin_problem("sin1d_robin");
    const auto s = solve_reference_1d(p, 1024);
    for (double x : {0.01234, 0.5, 0.777}) {
        const double xs[1] = {x};
        EXPECT_NEAR(s.value(xs), std::sin(pi * x), 1e-5);
        EXPECT_NEAR(s.value_and_gradient(xs).gradient[0], pi * std::cos(pi * x), 1e-2);
    }
    EXPECT_THROW(solve_reference_1d(builtin_problem("gauss2d_robin"), 64), InvalidArgument);
    EXPECT_THROW(solve_reference_1d(p, 8), InvalidArgument);
}

// ----------------------------------------------------------- penalty gaps

TEST(PenaltyGap, MatchesClosedForm) {
    const auto p = builtin_problem("sin1d_robin");
    const auto gaps = penalty_gap_1d(p, {0.2, 0.1, 0.05}, 4096);
    for (const auto& g : gaps) EXPECT_NEAR(g.h1_gap / closed_form_penalty_gap(g.beta), 1.0, 1e-3) << g.beta;
}

TEST(PenaltyGap, LinearRate) {
    const auto p = builtin_problem("sin1d_robin");
    const auto gaps = penalty_gap_1d(p, {0.2, 0.1, 0.05}, 4096);
    ASSERT_EQ(gaps.size(), 3u);
    EXPECT_GT(gaps[0].h1_gap, gaps[1].h1_gap);
    EXPECT_GT(gaps[1].h1_gap, gaps[2].h1_gap);
    const double ratio = gaps[0].h1_gap / gaps[1].h1_gap;
    EXPECT_GE(ratio, 1.8);
    EXPECT_LE(ratio, 2.2);
    std::vector<double> b, g;
    for (const auto& e : gaps) {
        b.push_back(e.beta);
        g.push_back(e.h1_gap);
    }
    const double slope = loglog_slope(b, g);
    EXPECT_GE(slope, 0.9);
    EXPECT_LE(slope, 1.1);
    const double C = fit_penalty_constant(gaps);
    for (const auto& e : gaps) EXPECT_LE(e.h1_gap, C * e.beta * (1 + 1e-15));
}

TEST(PenaltyGap, LoglogSlopeOfPowerLaw) {
    EXPECT_NEAR(loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192}), 2.0, 1e-12);
    EXPECT_THROW(loglog_slope({1}, {1}), InvalidArgument);
}
