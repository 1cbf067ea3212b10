#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "drm/common.hpp"
#include "drm/network.hpp"
#include "drm/problem.hpp"
#include "drm/rng.hpp"

namespace drm {

/// A nonnegative quantity kept as its natural log, plus the plain value when
/// that fits in a double. `value` is +inf when `representable` is false.
struct BoundValue {
    double log = -std::numeric_limits<double>::infinity();
    double value = 0.0;
    bool representable = true;

    /// Exact value; the log is derived from it.
    static BoundValue from_value(double v) {
        if (!(v >= 0.0)) throw NumericalError("bound value must be nonnegative");
        return {std::log(v), v, std::isfinite(v)};
    }
    static BoundValue from_log(double lg) {
        const double v = std::exp(lg);
        return {lg, v, std::isfinite(v)};
    }
    /// Prefers a directly evaluated value when it is finite, so small cases
    /// keep full precision; otherwise falls back to the log form.
    static BoundValue from_parts(double direct, double lg) {
        if (std::isfinite(direct) && direct >= 0.0 && (direct > 0.0 || lg == -std::numeric_limits<double>::infinity()))
            return {std::log(direct), direct, true};
        return from_log(lg);
    }

    double log10() const { return log / std::numbers::ln10; }
    bool operator==(const BoundValue&) const = default;
};

/// The unnamed constants of the error analysis. None is ever instantiated
/// by the theory, so all default to 1 and are echoed in every report.
struct BoundConstants {
    double C_depth = 1.0;
    double C_width = 1.0;
    double C_weight = 1.0;
    double C_samples = 1.0;
    double C_samples_exponent = 1.0;
    double C_coe = 1.0;
    double C_aggregate = 1.0;

    static const std::vector<std::string>& names() {
        static const std::vector<std::string> n = {"C_depth",            "C_width", "C_weight",   "C_samples",
                                                   "C_samples_exponent", "C_coe",   "C_aggregate"};
        return n;
    }
    double& at(const std::string& name) {
        if (name == "C_depth") return C_depth;
        if (name == "C_width") return C_width;
        if (name == "C_weight") return C_weight;
        if (name == "C_samples") return C_samples;
        if (name == "C_samples_exponent") return C_samples_exponent;
        if (name == "C_coe") return C_coe;
        if (name == "C_aggregate") return C_aggregate;
        throw InvalidArgument("unknown constant '" + name + "'");
    }
    double get(const std::string& name) const { return const_cast<BoundConstants*>(this)->at(name); }
    void set(const std::string& name, double v) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("constant '" + name + "' must be positive and finite");
        at(name) = v;
    }
    bool operator==(const BoundConstants&) const = default;
};

// ---------------------------------------------------------------- planning

struct HyperParamRequest {
    double epsilon = 0.1;
    std::size_t dimension = 1;
    double mu = 0.5;
    BoundConstants constants;

    void validate() const {
        if (!(epsilon > 0.0)) throw InvalidArgument("target accuracy epsilon must be > 0");
        if (!(mu > 0.0 && mu < 1.0)) throw InvalidArgument("mu must lie in (0, 1)");
        if (dimension < 1) throw InvalidArgument("dimension must be >= 1");
    }
};

struct HyperParamPlan {
    std::size_t depth = 2;
    BoundValue weight_count;  // integer-valued target for the parameter count
    BoundValue weight_bound;
    BoundValue samples;  // N = M
    std::optional<double> beta;
    BoundConstants constants;
    std::vector<std::string> warnings;
};

namespace detail {

/// ceil(c * base^e) when that is an exactly representable integer, else the
/// log of c * base^e (the ceiling is immaterial at that scale).
inline BoundValue ceil_scaled_power(double c, double base, double e) {
    const double lg = std::log(c) + e * std::log(base);
    const double direct = c * std::pow(base, e);
    if (std::isfinite(direct) && direct <= 9007199254740992.0) return BoundValue::from_value(std::ceil(direct));
    return BoundValue::from_log(lg);
}

inline BoundValue scaled_power(double c, double base, double e) {
    return BoundValue::from_parts(c * std::pow(base, e), std::log(c) + e * std::log(base));
}

}  // namespace detail

/// Depth, parameter count, weight bound and sample count prescribed for a
/// target accuracy. The Dirichlet variant also fixes beta = C_coe * eps and
/// uses the steeper width and weight exponents that follow from it.
inline HyperParamPlan plan_hyperparams(const HyperParamRequest& req, BoundaryCondition::Kind kind) {
    req.validate();
    const auto& c = req.constants;
    const double d = static_cast<double>(req.dimension);
    const double one_minus_mu = 1.0 - req.mu;
    const bool dirichlet = kind == BoundaryCondition::Kind::DirichletPenalty;

    HyperParamPlan plan;
    plan.constants = c;
    if (req.epsilon >= 1.0)
        plan.warnings.push_back("epsilon >= 1: the prescriptions are asymptotic as epsilon -> 0 and may be meaningless");

    const double raw_depth = std::ceil(c.C_depth * std::log(d + 1.0));
    plan.depth = raw_depth < 2.0 ? 2 : static_cast<std::size_t>(raw_depth);

    const double width_exp = dirichlet ? -5.0 * d / (2.0 * one_minus_mu) : -d / one_minus_mu;
    const double weight_exp = dirichlet ? -(45.0 * d + 40.0) / (4.0 * one_minus_mu) : -(9.0 * d + 8.0) / (2.0 * one_minus_mu);
    const double sample_exp = -c.C_samples_exponent * d * std::log(d + 1.0) / one_minus_mu;

    plan.weight_count = detail::ceil_scaled_power(c.C_width, req.epsilon, width_exp);
    plan.weight_bound = detail::scaled_power(c.C_weight, req.epsilon, weight_exp);
    plan.samples = detail::ceil_scaled_power(c.C_samples, req.epsilon, sample_exp);
    if (dirichlet) plan.beta = c.C_coe * req.epsilon;
    return plan;
}

/// Parameter count of a network with `depth` layers and uniform hidden width.
inline std::size_t uniform_parameter_count(std::size_t d, std::size_t width, std::size_t depth) {
    return width * (d + 1) + (depth - 2) * width * (width + 1) + width + 1;
}

/// Uniform-width architecture whose parameter count is the largest one not
/// exceeding the plan's target (width 1 if even that overshoots).
inline NetworkArch arch_from_plan(const HyperParamPlan& plan, std::size_t d, Activation act,
                                  std::size_t max_width = 4096) {
    if (!plan.weight_count.representable || !plan.weight_bound.representable)
        throw InvalidArgument("plan is too large to instantiate (log10 parameter count " +
                              std::to_string(plan.weight_count.log10()) + ")");
    const double target = plan.weight_count.value;
    std::size_t w = 1;
    while (w < max_width && static_cast<double>(uniform_parameter_count(d, w + 1, plan.depth)) <= target) ++w;
    if (w == max_width && static_cast<double>(uniform_parameter_count(d, w + 1, plan.depth)) <= target)
        throw InvalidArgument("plan requires hidden width above " + std::to_string(max_width));
    std::vector<std::size_t> widths(plan.depth + 1, w);
    widths.front() = d;
    widths.back() = 1;
    return NetworkArch(std::move(widths), act, std::max(1.0, plan.weight_bound.value));
}

// ------------------------------------------------------- class constants

/// Value bounds B_i and theta-Lipschitz constants L_i of the five function
/// classes entering the loss (index 0 is class 1).
struct ClassConstants {
    std::array<BoundValue, 5> B;
    std::array<BoundValue, 5> L;
};

inline ClassConstants class_constants(const NetworkArch& arch) {
    const double d = static_cast<double>(arch.input_dim());
    const double D = static_cast<double>(arch.depth());
    const double Bt = arch.weight_bound();
    const double n = static_cast<double>(arch.parameter_count());
    const double last = static_cast<double>(arch.width(arch.depth() - 1)) + 1.0;

    double log_prod = 0.0;
    for (std::size_t l = 1; l < arch.depth(); ++l) log_prod += std::log(static_cast<double>(arch.width(l)));
    const double prod = arch.hidden_width_product();
    const double lB = std::log(Bt);
    const double sn = std::sqrt(n);

    ClassConstants c;
    c.B[0] = BoundValue::from_parts(d * prod * prod * std::pow(Bt, 2 * D), std::log(d) + 2 * log_prod + 2 * D * lB);
    c.B[2] = BoundValue::from_parts(last * Bt, std::log(last) + lB);
    c.B[4] = c.B[2];
    c.B[1] = BoundValue::from_parts(c.B[2].value * c.B[2].value, 2 * c.B[2].log);
    c.B[3] = c.B[1];

    c.L[0] = BoundValue::from_parts(2 * d * sn * (D + 1) * std::pow(Bt, 3 * D) * prod * prod * prod,
                                    std::log(2 * d) + 0.5 * std::log(n) + std::log(D + 1) + 3 * D * lB + 3 * log_prod);
    c.L[1] = BoundValue::from_parts(2 * sn * std::pow(Bt, D) * last * prod,
                                    std::log(2.0) + 0.5 * std::log(n) + D * lB + std::log(last) + log_prod);
    c.L[3] = c.L[1];
    c.L[2] = BoundValue::from_parts(sn * std::pow(Bt, D - 1) * prod, 0.5 * std::log(n) + (D - 1) * lB + log_prod);
    c.L[4] = c.L[2];
    return c;
}

inline ClassConstants class_constants(const NetworkArch& arch, std::size_t d) {
    if (d != arch.input_dim()) throw DimensionMismatch("class_constants: dimension", arch.input_dim(), d);
    return class_constants(arch);
}

inline void check_class_index(int i) {
    if (i < 1 || i > 5) throw InvalidArgument("function class index must be in 1..5, got " + std::to_string(i));
}

// ------------------------------------------------------ Lipschitz probes

struct LipschitzCheck {
    double value_ratio = 0.0;       // max |f(x;t) - f(x;t')| / |t - t'|
    double derivative_ratio = 0.0;  // same for max_p |d_p f|
    BoundValue value_bound;
    BoundValue derivative_bound;
    std::size_t probes = 0;
    std::size_t skipped = 0;  // pairs with t == t'

    bool ok() const {
        return value_ratio <= value_bound.value && derivative_ratio <= derivative_bound.value;
    }
};

/// Empirical theta-Lipschitz ratios of the network value and its input
/// derivatives against the closed-form constants. Half the probes pair a
/// random parameter with a small perturbation of itself, which is where the
/// local ratio peaks; the rest pair two independent parameters.
inline LipschitzCheck lipschitz_in_theta_check(const NetworkArch& arch, std::size_t n_probes, std::uint64_t seed) {
    if (n_probes < 10) throw InvalidArgument("lipschitz_in_theta_check: need at least 10 probes");
    const double D = static_cast<double>(arch.depth());
    const double Bt = arch.weight_bound();
    const double n = static_cast<double>(arch.parameter_count());
    const double prod = arch.hidden_width_product();
    double log_prod = 0.0;
    for (std::size_t l = 1; l < arch.depth(); ++l) log_prod += std::log(static_cast<double>(arch.width(l)));

    LipschitzCheck out;
    out.value_bound = BoundValue::from_parts(std::sqrt(n) * std::pow(Bt, D - 1) * prod,
                                             0.5 * std::log(n) + (D - 1) * std::log(Bt) + log_prod);
    out.derivative_bound = BoundValue::from_parts(std::sqrt(n) * (D + 1) * std::pow(Bt, 2 * D) * prod * prod,
                                                  0.5 * std::log(n) + std::log(D + 1) + 2 * D * std::log(Bt) + 2 * log_prod);

    Xoshiro256 rng(seed);
    const std::size_t P = arch.parameter_count();
    const std::size_t d = arch.input_dim();
    NetworkParams a{std::vector<double>(P)}, b{std::vector<double>(P)};
    std::vector<double> x(d);
    NetworkEvaluator ea(arch, a), eb(arch, b);
    for (std::size_t k = 0; k < n_probes; ++k) {
        for (auto& t : a.theta) t = rng.uniform(-Bt, Bt);
        if (k % 2 == 0) {
            const double step = std::pow(10.0, rng.uniform(-6.0, -1.0)) * Bt;
            for (std::size_t q = 0; q < P; ++q) b.theta[q] = std::clamp(a.theta[q] + step * rng.uniform(-1.0, 1.0), -Bt, Bt);
        } else {
            for (auto& t : b.theta) t = rng.uniform(-Bt, Bt);
        }
        for (auto& xi : x) xi = rng.uniform_open();

        double dist2 = 0.0;
        for (std::size_t q = 0; q < P; ++q) dist2 += (a.theta[q] - b.theta[q]) * (a.theta[q] - b.theta[q]);
        ++out.probes;
        if (dist2 == 0.0) {
            ++out.skipped;
            continue;
        }
        const double dist = std::sqrt(dist2);
        const double ua = ea.forward(x);
        const double ub = eb.forward(x);
        out.value_ratio = std::max(out.value_ratio, std::abs(ua - ub) / dist);
        const auto ga = ea.gradient();
        const auto gb = eb.gradient();
        for (std::size_t p = 0; p < d; ++p)
            out.derivative_ratio = std::max(out.derivative_ratio, std::abs(ga[p] - gb[p]) / dist);
    }
    return out;
}

// ------------------------------------------------------- covering numbers

/// (2 B sqrt(n) / eps)^n: cover size of the radius-B ball in R^n.
inline BoundValue covering_bound_euclidean(double eps, double radius, std::size_t n) {
    if (!(eps > 0.0)) throw InvalidArgument("covering bound: eps must be > 0");
    if (!(radius > 0.0)) throw InvalidArgument("covering bound: radius must be > 0");
    if (n < 1) throw InvalidArgument("covering bound: dimension must be >= 1");
    const double dn = static_cast<double>(n);
    const double base = 2.0 * radius * std::sqrt(dn) / eps;
    return BoundValue::from_parts(std::pow(base, dn), dn * std::log(base));
}

/// Sup-norm cover of class i obtained from a parameter-space cover at eps/L_i.
/// A negative log is clamped to 0 (a single ball suffices).
inline BoundValue covering_bound_class(int i, const NetworkArch& arch, double eps) {
    check_class_index(i);
    if (!(eps > 0.0)) throw InvalidArgument("covering bound: eps must be > 0");
    const auto c = class_constants(arch);
    const double n = static_cast<double>(arch.parameter_count());
    const double lg = n * (std::log(2.0) + c.L[i - 1].log + std::log(arch.weight_bound()) + 0.5 * std::log(n) - std::log(eps));
    return BoundValue::from_log(std::max(0.0, lg));
}

// ---------------------------------------------------- Rademacher bounds

/// (D / N) sqrt(2 log |A|) with D the largest Euclidean norm in A.
inline double massart_bound(const std::vector<std::vector<double>>& set) {
    if (set.empty()) throw InvalidArgument("massart_bound: empty set");
    const std::size_t N = set.front().size();
    if (N == 0) throw InvalidArgument("massart_bound: vectors must be nonempty");
    double dmax = 0.0;
    for (const auto& a : set) {
        if (a.size() != N) throw DimensionMismatch("massart_bound: vector length", N, a.size());
        double s = 0.0;
        for (double v : a) s += v * v;
        dmax = std::max(dmax, std::sqrt(s));
    }
    return dmax / static_cast<double>(N) * std::sqrt(2.0 * std::log(static_cast<double>(set.size())));
}

namespace detail {

inline double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == -std::numeric_limits<double>::infinity()) return a;
    return a + std::log1p(std::exp(b - a));
}

}  // namespace detail

/// Chaining bound for class i with the lower cutoff delta = 1/sqrt(N):
/// 4/sqrt(N) + (6 sqrt(n) B_i / sqrt(N)) sqrt(log(2 L_i B sqrt(n) sqrt(N))).
inline BoundValue chaining_rademacher_bound(int i, const NetworkArch& arch, std::size_t N) {
    check_class_index(i);
    if (N < 1) throw InvalidArgument("chaining bound: N must be >= 1");
    const auto c = class_constants(arch);
    const double dN = static_cast<double>(N);
    const double n = static_cast<double>(arch.parameter_count());
    const auto& Bi = c.B[i - 1];
    if (-0.5 * std::log(dN) >= Bi.log - std::log(2.0))
        throw InvalidArgument("chaining bound: delta = 1/sqrt(N) is not below B_" + std::to_string(i) +
                              "/2; N = " + std::to_string(N) + " is too small for this class");
    const double inner = std::log(2.0) + c.L[i - 1].log + std::log(arch.weight_bound()) + 0.5 * std::log(n) + 0.5 * std::log(dN);
    if (!(inner > 0.0)) throw NumericalError("chaining bound: covering log is not positive");
    const double first = 4.0 / std::sqrt(dN);
    if (Bi.representable) {
        const double direct = first + 6.0 * std::sqrt(n) * Bi.value / std::sqrt(dN) * std::sqrt(inner);
        if (std::isfinite(direct)) return BoundValue::from_value(direct);
    }
    const double log_second = std::log(6.0) + 0.5 * std::log(n) + Bi.log - 0.5 * std::log(dN) + 0.5 * std::log(inner);
    return BoundValue::from_log(detail::log_add(std::log(first), log_second));
}

struct OptimizedChaining {
    double delta = 0.0;
    double bound = 0.0;
};

/// The chaining integral minimised over the cutoff delta in (0, B_i/2),
/// for comparison with the fixed-cutoff closed form. Requires B_i and L_i
/// to be representable.
inline OptimizedChaining chaining_rademacher_bound_optimized(int i, const NetworkArch& arch, std::size_t N) {
    check_class_index(i);
    if (N < 1) throw InvalidArgument("chaining bound: N must be >= 1");
    const auto c = class_constants(arch);
    if (!c.B[i - 1].representable || !c.L[i - 1].representable)
        throw NumericalError("optimized chaining bound needs representable class constants");
    const double n = static_cast<double>(arch.parameter_count());
    const double K = 2.0 * c.L[i - 1].value * arch.weight_bound() * std::sqrt(n);
    const double top = c.B[i - 1].value / 2.0;
    const double scale = 12.0 / std::sqrt(static_cast<double>(N));
    const double upper = std::min(top, K);  // integrand vanishes beyond K

    auto integrand = [&](double e) { return std::sqrt(std::max(0.0, n * std::log(K / e))); };
    auto objective = [&](double delta) {
        double integral = 0.0;
        if (delta < upper)
            integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, delta, upper, 15, 1e-12);
        return 4.0 * delta + scale * integral;
    };
    const auto [delta, value] = boost::math::tools::brent_find_minima(objective, top * 1e-12, top, 52);
    return {delta, value};
}

// ------------------------------------------------ aggregate statistical

/// (C / beta) d sqrt(D) n^{2D} B^{2D} / sqrt(N) sqrt(log(d D n B N)), where
/// D is the depth, n the parameter count and B the weight bound. The theory
/// covers N = M only. alpha enters through C alone.
inline BoundValue statistical_error_bound(const NetworkArch& arch, std::size_t N, std::size_t M, double alpha,
                                          double beta, std::size_t d, double C_aggregate = 1.0) {
    (void)alpha;
    if (N != M) throw InvalidArgument("statistical error bound requires N = M (got N = " + std::to_string(N) +
                                      ", M = " + std::to_string(M) + ")");
    if (N < 1) throw InvalidArgument("statistical error bound: N must be >= 1");
    if (!(beta > 0.0)) throw InvalidArgument("statistical error bound: beta must be > 0");
    if (!(C_aggregate > 0.0)) throw InvalidArgument("statistical error bound: C must be > 0");
    if (d != arch.input_dim()) throw DimensionMismatch("statistical error bound: dimension", arch.input_dim(), d);
    const double dd = static_cast<double>(d);
    const double D = static_cast<double>(arch.depth());
    const double n = static_cast<double>(arch.parameter_count());
    const double B = arch.weight_bound();
    const double dN = static_cast<double>(N);
    const double inner = std::log(dd) + std::log(D) + std::log(n) + std::log(B) + std::log(dN);
    const double lg = std::log(C_aggregate) - std::log(beta) + std::log(dd) + 0.5 * std::log(D) + 2 * D * std::log(n) +
                      2 * D * std::log(B) - 0.5 * std::log(dN) + 0.5 * std::log(inner);
    const double direct = C_aggregate / beta * dd * std::sqrt(D) * std::pow(n, 2 * D) * std::pow(B, 2 * D) /
                          std::sqrt(dN) * std::sqrt(inner);
    return BoundValue::from_parts(direct, lg);
}

/// H1 distance between the Robin and Dirichlet solutions is at most C_coe * beta.
inline double penalty_gap_bound(double beta, double C_coe = 1.0) {
    if (!(beta >= 0.0)) throw InvalidArgument("penalty gap bound: beta must be >= 0");
    if (!(C_coe > 0.0)) throw InvalidArgument("penalty gap bound: C_coe must be > 0");
    return C_coe * beta;
}

// ------------------------------------------------------------- report

struct ClassBound {
    BoundValue cover_at_delta;  // covering number at eps = 1/sqrt(N)
    std::optional<BoundValue> rademacher;
    std::string rademacher_error;
};

struct BoundReport {
    NetworkArch arch;
    std::size_t N = 0, M = 0;
    double alpha = 1.0, beta = 1.0;
    std::size_t d = 1;
    BoundConstants constants;
    ClassConstants class_constants;
    std::array<ClassBound, 5> classes;
    BoundValue statistical;
    std::optional<double> penalty;  // set for penalised Dirichlet
};

/// Every bound for one architecture and sample size. Classes whose chaining
/// cutoff is out of range record the reason instead of failing the report.
inline BoundReport bound_report(const NetworkArch& arch, std::size_t N, std::size_t M, const BoundaryCondition& bc,
                                const BoundConstants& constants = {}) {
    BoundReport r{arch, N, M, bc.alpha, bc.beta, arch.input_dim(), constants, class_constants(arch), {}, {}, {}};
    for (int i = 1; i <= 5; ++i) {
        auto& cb = r.classes[i - 1];
        cb.cover_at_delta = covering_bound_class(i, arch, 1.0 / std::sqrt(static_cast<double>(N)));
        try {
            cb.rademacher = chaining_rademacher_bound(i, arch, N);
        } catch (const InvalidArgument& e) {
            cb.rademacher_error = e.what();
        }
    }
    r.statistical = statistical_error_bound(arch, N, M, bc.alpha, bc.beta, r.d, constants.C_aggregate);
    if (bc.kind == BoundaryCondition::Kind::DirichletPenalty) r.penalty = penalty_gap_bound(bc.beta, constants.C_coe);
    return r;
}

}  // namespace drm
