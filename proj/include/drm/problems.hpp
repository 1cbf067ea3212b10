#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "drm/common.hpp"
#include "drm/geometry.hpp"
#include "drm/problem.hpp"
#include "drm/ritz.hpp"

namespace drm {

enum class SolutionKind { SinProduct, GaussianBump, Quadratic };

inline std::string to_string(SolutionKind k) {
    switch (k) {
        case SolutionKind::SinProduct: return "sin_product";
        case SolutionKind::GaussianBump: return "gaussian_bump";
        case SolutionKind::Quadratic: return "quadratic";
    }
    return "sin_product";
}

inline SolutionKind solution_kind_from_string(const std::string& s) {
    if (s == "sin_product") return SolutionKind::SinProduct;
    if (s == "gaussian_bump") return SolutionKind::GaussianBump;
    if (s == "quadratic") return SolutionKind::Quadratic;
    throw InvalidArgument("unknown manufactured solution '" + s + "'");
}

/// Reaction coefficient: a constant, or 1 + |x|^2.
struct ReactionCoefficient {
    enum class Kind { Constant, OnePlusSquared };
    Kind kind = Kind::Constant;
    double constant = 1.0;

    static ReactionCoefficient constant_value(double c) { return {Kind::Constant, c}; }
    static ReactionCoefficient one_plus_squared() { return {Kind::OnePlusSquared, 1.0}; }

    double lower_bound() const { return kind == Kind::Constant ? constant : 1.0; }

    ScalarFunction function() const {
        if (kind == Kind::Constant) return [c = constant](std::span<const double>) { return c; };
        return [](std::span<const double> x) {
            double s = 1.0;
            for (double v : x) s += v * v;
            return s;
        };
    }
};

/// Gaussian bump centre and width: exp(-|x - c|^2 / (2 s^2)), c = (0.5, ..., 0.5).
inline constexpr double kBumpCenter = 0.5;
inline constexpr double kBumpWidth = 0.25;

inline ManufacturedSolution manufactured_solution(SolutionKind kind, std::size_t d) {
    constexpr double pi = std::numbers::pi;
    const double dd = static_cast<double>(d);
    switch (kind) {
        case SolutionKind::SinProduct:
            return {[](std::span<const double> x) {
                        double p = 1.0;
                        for (double v : x) p *= std::sin(pi * v);
                        return p;
                    },
                    [](std::span<const double> x) {
                        std::vector<double> g(x.size());
                        for (std::size_t k = 0; k < x.size(); ++k) {
                            double p = pi * std::cos(pi * x[k]);
                            for (std::size_t j = 0; j < x.size(); ++j)
                                if (j != k) p *= std::sin(pi * x[j]);
                            g[k] = p;
                        }
                        return g;
                    },
                    [dd](std::span<const double> x) {
                        double p = 1.0;
                        for (double v : x) p *= std::sin(pi * v);
                        return -dd * pi * pi * p;
                    },
                    "prod_k sin(pi x_k)"};
        case SolutionKind::GaussianBump: {
            constexpr double s2 = kBumpWidth * kBumpWidth;
            auto r2 = [](std::span<const double> x) {
                double r = 0.0;
                for (double v : x) r += (v - kBumpCenter) * (v - kBumpCenter);
                return r;
            };
            return {[r2](std::span<const double> x) { return std::exp(-r2(x) / (2.0 * s2)); },
                    [r2](std::span<const double> x) {
                        const double u = std::exp(-r2(x) / (2.0 * s2));
                        std::vector<double> g(x.size());
                        for (std::size_t k = 0; k < x.size(); ++k) g[k] = -(x[k] - kBumpCenter) / s2 * u;
                        return g;
                    },
                    [r2, dd](std::span<const double> x) {
                        const double r = r2(x);
                        return (r / (s2 * s2) - dd / s2) * std::exp(-r / (2.0 * s2));
                    },
                    "exp(-|x-0.5|^2 / (2*0.25^2))"};
        }
        case SolutionKind::Quadratic:
            return {[](std::span<const double> x) {
                        double s = 0.0;
                        for (double v : x) s += v * (1.0 - v);
                        return s;
                    },
                    [](std::span<const double> x) {
                        std::vector<double> g(x.size());
                        for (std::size_t k = 0; k < x.size(); ++k) g[k] = 1.0 - 2.0 * x[k];
                        return g;
                    },
                    [dd](std::span<const double>) { return -2.0 * dd; },
                    "sum_k x_k (1 - x_k)"};
    }
    throw InvalidArgument("unknown manufactured solution");
}

/// Declarative description of a manufactured problem.
struct ProblemSpec {
    std::string name = "custom";
    Domain domain = Domain::hypercube(1);
    SolutionKind solution = SolutionKind::SinProduct;
    ReactionCoefficient w;
    BoundaryCondition bc;
};

/// Builds -Laplace(u) + w u = f with f and g derived from the chosen u.
///
/// Robin/Neumann data: g = alpha u + beta du/dn with the outward normal of
/// the domain. Penalised Dirichlet requires u to vanish on the boundary.
inline EllipticProblem make_manufactured(const ProblemSpec& spec) {
    const std::size_t d = spec.domain.dimension();
    auto exact = manufactured_solution(spec.solution, d);
    if (!(spec.w.lower_bound() >= kMinReactionBound))
        throw InvalidArgument("make_manufactured: w must satisfy w >= c_w with c_w >= 1e-6");

    EllipticProblem p;
    p.name = spec.name;
    p.domain = spec.domain;
    p.bc = spec.bc;
    p.c_w = spec.w.lower_bound();
    p.w = spec.w.function();
    p.f = [u = exact.u, lap = exact.laplacian_u, w = p.w](std::span<const double> x) {
        return -lap(x) + w(x) * u(x);
    };
    if (spec.bc.kind == BoundaryCondition::Kind::DirichletPenalty) {
        const auto pts = sample_boundary(spec.domain, 512, 0xd1c7ULL);
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (std::abs(exact.u(pts[j])) > 1e-10)
                throw InvalidArgument("make_manufactured: penalised Dirichlet needs u = 0 on the boundary, but " +
                                      exact.description + " does not vanish there");
        p.g = [](std::span<const double>) { return 0.0; };
    } else {
        p.g = [u = exact.u, grad = exact.grad_u, dom = spec.domain, a = spec.bc.alpha,
               b = spec.bc.beta](std::span<const double> x) {
            const auto n = dom.outward_normal(x);
            const auto gu = grad(x);
            double dn = 0.0;
            for (std::size_t k = 0; k < n.size(); ++k) dn += gu[k] * n[k];
            return a * u(x) + b * dn;
        };
    }
    p.exact = std::move(exact);
    validate(p);
    return p;
}

/// Default penalty for the built-in penalised Dirichlet problem.
inline constexpr double kDefaultPenaltyBeta = 0.05;

inline std::vector<std::string> builtin_problem_names() {
    return {"sin1d_robin", "sin2d_dirichlet", "gauss2d_robin", "quad1d_robin"};
}

inline ProblemSpec builtin_problem_spec(const std::string& name) {
    ProblemSpec s;
    s.name = name;
    s.w = ReactionCoefficient::constant_value(1.0);
    if (name == "sin1d_robin") {
        s.domain = Domain::hypercube(1);
        s.solution = SolutionKind::SinProduct;
        s.bc = BoundaryCondition::robin(1.0, 1.0);
    } else if (name == "sin2d_dirichlet") {
        s.domain = Domain::hypercube(2);
        s.solution = SolutionKind::SinProduct;
        s.bc = BoundaryCondition::dirichlet_penalty(kDefaultPenaltyBeta);
    } else if (name == "gauss2d_robin") {
        s.domain = Domain::hypercube(2);
        s.solution = SolutionKind::GaussianBump;
        s.bc = BoundaryCondition::robin(1.0, 1.0);
    } else if (name == "quad1d_robin") {
        s.domain = Domain::hypercube(1);
        s.solution = SolutionKind::Quadratic;
        s.bc = BoundaryCondition::robin(1.0, 1.0);
    } else {
        throw InvalidArgument("unknown built-in problem '" + name + "'");
    }
    return s;
}

inline EllipticProblem builtin_problem(const std::string& name) { return make_manufactured(builtin_problem_spec(name)); }

/// Grid solution of a one-dimensional problem. Between nodes both the value
/// and the derivative are interpolated linearly.
struct ReferenceSolution1D {
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<double> derivatives;
    BoundaryCondition bc;

    double h() const { return grid[1] - grid[0]; }

    double value(std::span<const double> x) const { return interpolate(values, x[0]); }
    EvalResult value_and_gradient(std::span<const double> x) const {
        return {interpolate(values, x[0]), {interpolate(derivatives, x[0])}};
    }

private:
    double interpolate(const std::vector<double>& v, double t) const {
        const double a = grid.front();
        const std::size_t n = grid.size() - 1;
        double s = (t - a) / h();
        if (s <= 0.0) return v.front();
        if (s >= static_cast<double>(n)) return v.back();
        const auto i = static_cast<std::size_t>(s);
        const double frac = s - static_cast<double>(i);
        return (1.0 - frac) * v[i] + frac * v[i + 1];
    }
};

namespace detail {

/// Thomas algorithm; lower[0] and upper[n-1] are ignored.
inline std::vector<double> solve_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                                             std::vector<double> upper, std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(diag[i - 1]) < 1e-300) throw NumericalError("reference solver: singular tridiagonal system");
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    if (std::abs(diag[n - 1]) < 1e-300) throw NumericalError("reference solver: singular tridiagonal system");
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}

}  // namespace detail

/// Second-order central differences for -u'' + w u = f on an interval.
///
/// Robin/Neumann ends use a ghost node eliminated through the boundary
/// condition (second order, keeps the system tridiagonal and symmetric up to
/// scaling). Penalised Dirichlet problems are solved with exact Dirichlet
/// ends u = 0, which makes this the u_D reference.
inline ReferenceSolution1D solve_reference_1d(const EllipticProblem& problem, std::size_t n_grid) {
    if (problem.dimension() != 1) throw InvalidArgument("solve_reference_1d: problem must be one-dimensional");
    if (n_grid < 16) throw InvalidArgument("solve_reference_1d: n_grid must be >= 16");
    const auto [a, b] = interval_of(problem.domain);
    const std::size_t n = n_grid;
    const double h = (b - a) / static_cast<double>(n);
    const double ih2 = 1.0 / (h * h);

    ReferenceSolution1D sol;
    sol.bc = problem.bc;
    sol.grid.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) sol.grid[i] = a + h * static_cast<double>(i);

    std::vector<double> lower(n + 1, -ih2), diag(n + 1), upper(n + 1, -ih2), rhs(n + 1);
    std::array<double, 1> x{};
    for (std::size_t i = 0; i <= n; ++i) {
        x[0] = sol.grid[i];
        diag[i] = 2.0 * ih2 + problem.w(x);
        rhs[i] = problem.f(x);
    }
    if (problem.bc.kind == BoundaryCondition::Kind::DirichletPenalty) {
        for (std::size_t i : {std::size_t{0}, n}) {
            diag[i] = 1.0;
            rhs[i] = 0.0;
        }
        upper[0] = 0.0;
        lower[n] = 0.0;
        // keep the first/last interior rows consistent with u_0 = u_n = 0
        lower[1] = 0.0;
        upper[n - 1] = 0.0;
    } else {
        const double alpha = problem.bc.alpha, beta = problem.bc.beta;
        x[0] = a;
        const double ga = problem.g(x);
        x[0] = b;
        const double gb = problem.g(x);
        diag[0] += 2.0 * alpha / (beta * h);
        upper[0] = -2.0 * ih2;
        rhs[0] += 2.0 * ga / (beta * h);
        diag[n] += 2.0 * alpha / (beta * h);
        lower[n] = -2.0 * ih2;
        rhs[n] += 2.0 * gb / (beta * h);
    }
    sol.values = detail::solve_tridiagonal(std::move(lower), std::move(diag), std::move(upper), std::move(rhs));

    const auto& u = sol.values;
    sol.derivatives.resize(n + 1);
    sol.derivatives[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    sol.derivatives[n] = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
    for (std::size_t i = 1; i < n; ++i) sol.derivatives[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    return sol;
}

/// H1 distance between two grid functions on the same grid (trapezoidal rule).
inline double grid_h1_distance(const ReferenceSolution1D& a, const ReferenceSolution1D& b) {
    if (a.grid.size() != b.grid.size()) throw InvalidArgument("grid_h1_distance: grids differ");
    const std::size_t n = a.grid.size() - 1;
    const double h = a.h();
    CompensatedSum s;
    for (std::size_t i = 0; i <= n; ++i) {
        const double dv = a.values[i] - b.values[i];
        const double dd = a.derivatives[i] - b.derivatives[i];
        const double wt = (i == 0 || i == n) ? 0.5 * h : h;
        s.add(wt * (dv * dv + dd * dd));
    }
    return std::sqrt(s.value());
}

struct PenaltyGap {
    double beta;
    double h1_gap;
};

/// ||u_R(beta) - u_D||_H1 for each beta, where u_R(beta) solves the Robin
/// problem with alpha = 1, g = 0 and u_D the homogeneous Dirichlet problem.
/// Only w and f of `family` are used.
inline std::vector<PenaltyGap> penalty_gap_1d(const EllipticProblem& family, const std::vector<double>& betas,
                                              std::size_t n_grid) {
    EllipticProblem dirichlet = family;
    dirichlet.bc = BoundaryCondition::dirichlet_penalty(1.0);
    dirichlet.g = [](std::span<const double>) { return 0.0; };
    const auto u_d = solve_reference_1d(dirichlet, n_grid);
    std::vector<PenaltyGap> out;
    for (double beta : betas) {
        EllipticProblem robin = dirichlet;
        robin.bc = BoundaryCondition::robin(1.0, beta);
        const auto u_r = solve_reference_1d(robin, n_grid);
        out.push_back({beta, grid_h1_distance(u_r, u_d)});
    }
    return out;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw InvalidArgument("loglog_slope: need >= 2 paired values");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Smallest C with gap <= C * beta for every entry.
inline double fit_penalty_constant(const std::vector<PenaltyGap>& gaps) {
    double c = 0.0;
    for (const auto& g : gaps) c = std::max(c, g.h1_gap / g.beta);
    return c;
}

}  // namespace drm
