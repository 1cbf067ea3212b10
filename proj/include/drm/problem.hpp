#pragma once

#include <concepts>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drm/common.hpp"
#include "drm/geometry.hpp"
#include "drm/network.hpp"

namespace drm {

using ScalarFunction = std::function<double(std::span<const double>)>;
using VectorFunction = std::function<std::vector<double>(std::span<const double>)>;

/// Anything that can be evaluated together with its spatial gradient.
template <class F>
concept ScalarField = requires(const F& f, std::span<const double> x) {
    { f.value(x) } -> std::convertible_to<double>;
    { f.value_and_gradient(x) } -> std::same_as<EvalResult>;
};

/// Closed-form field with known gradient and Laplacian.
struct ManufacturedSolution {
    ScalarFunction u;
    VectorFunction grad_u;
    ScalarFunction laplacian_u;
    std::string description;

    double value(std::span<const double> x) const { return u(x); }
    EvalResult value_and_gradient(std::span<const double> x) const { return {u(x), grad_u(x)}; }
};

/// Field given by plain callables; used for hand-built test functions.
struct FunctionField {
    ScalarFunction u;
    VectorFunction grad_u;

    double value(std::span<const double> x) const { return u(x); }
    EvalResult value_and_gradient(std::span<const double> x) const { return {u(x), grad_u(x)}; }
};

/// alpha*u + beta*du/dn = g on the boundary.
///
/// Neumann is Robin with alpha = 0, beta = 1. DirichletPenalty is the penalised
/// homogeneous Dirichlet problem: alpha = 1, g = 0, small beta.
struct BoundaryCondition {
    enum class Kind { Robin, Neumann, DirichletPenalty };

    Kind kind = Kind::Robin;
    double alpha = 1.0;
    double beta = 1.0;

    static BoundaryCondition robin(double alpha, double beta) {
        if (!(beta > 0.0)) throw InvalidArgument("Robin condition requires beta > 0");
        return {Kind::Robin, alpha, beta};
    }
    static BoundaryCondition neumann() { return {Kind::Neumann, 0.0, 1.0}; }
    static BoundaryCondition dirichlet_penalty(double beta) {
        if (!(beta > 0.0)) throw InvalidArgument("penalty parameter beta must be > 0");
        return {Kind::DirichletPenalty, 1.0, beta};
    }
};

inline std::string to_string(BoundaryCondition::Kind k) {
    switch (k) {
        case BoundaryCondition::Kind::Robin: return "robin";
        case BoundaryCondition::Kind::Neumann: return "neumann";
        case BoundaryCondition::Kind::DirichletPenalty: return "dirichlet_penalty";
    }
    return "robin";
}

/// Smallest admissible lower bound for the reaction coefficient w.
inline constexpr double kMinReactionBound = 1e-6;

/// -Laplace(u) + w u = f in Omega with a Robin-type boundary condition.
struct EllipticProblem {
    std::string name;
    Domain domain = Domain::hypercube(1);
    ScalarFunction w;
    ScalarFunction f;
    ScalarFunction g;
    BoundaryCondition bc;
    double c_w = 1.0;
    std::optional<ManufacturedSolution> exact;

    std::size_t dimension() const { return domain.dimension(); }
};

/// Checks the structural assumptions on a problem; throws InvalidArgument.
///
/// w >= c_w is checked at `probes` interior samples, which is the only
/// feasible check for an opaque coefficient.
inline void validate(const EllipticProblem& p, std::size_t probes = 1024) {
    if (!p.w || !p.f || !p.g) throw InvalidArgument("problem '" + p.name + "': w, f and g must all be set");
    if (!(p.c_w >= kMinReactionBound))
        throw InvalidArgument("problem '" + p.name + "': c_w must be >= 1e-6 (w >= c_w > 0 is required)");
    if (p.bc.beta == 0.0) throw InvalidArgument("problem '" + p.name + "': beta must be nonzero");
    if (p.bc.kind == BoundaryCondition::Kind::DirichletPenalty && p.bc.alpha != 1.0)
        throw InvalidArgument("problem '" + p.name + "': penalised Dirichlet requires alpha = 1");
    const auto pts = sample_interior(p.domain, probes, 0x5eedULL);
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (!(p.w(pts[i]) >= p.c_w))
            throw InvalidArgument("problem '" + p.name + "': w < c_w at a sampled interior point");
    if (p.bc.kind == BoundaryCondition::Kind::DirichletPenalty) {
        const auto bpts = sample_boundary(p.domain, probes, 0xb0bdULL);
        for (std::size_t j = 0; j < bpts.size(); ++j)
            if (p.g(bpts[j]) != 0.0) throw InvalidArgument("problem '" + p.name + "': penalised Dirichlet requires g = 0");
    }
}

}  // namespace drm
