#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drm/common.hpp"
#include "drm/rng.hpp"

namespace drm {

enum class DomainKind { UnitHypercube, Ball };

/// A sampleable domain inside the unit cube [0,1]^d.
///
/// Two shapes are supported: the unit hypercube itself and a Euclidean ball.
/// The ball's radius is clipped so the ball stays inside [0,1]^d.
class Domain {
public:
    static Domain hypercube(std::size_t d) {
        if (d == 0) throw InvalidArgument("hypercube: dimension must be positive");
        Domain dom;
        dom.kind_ = DomainKind::UnitHypercube;
        dom.dim_ = d;
        return dom;
    }

    static Domain ball(std::vector<double> center, double radius) {
        if (center.empty()) throw InvalidArgument("ball: dimension must be positive");
        if (!(radius > 0.0)) throw InvalidArgument("ball: radius must be positive");
        double room = radius;
        for (double c : center) {
            if (!(c > 0.0 && c < 1.0)) throw InvalidArgument("ball: center must lie in (0,1)^d");
            room = std::min({room, c, 1.0 - c});
        }
        Domain dom;
        dom.kind_ = DomainKind::Ball;
        dom.dim_ = center.size();
        dom.center_ = std::move(center);
        dom.radius_ = room;
        return dom;
    }

    DomainKind kind() const { return kind_; }
    std::size_t dimension() const { return dim_; }
    const std::vector<double>& center() const { return center_; }
    double radius() const { return radius_; }

    /// |Omega|
    double interior_measure() const {
        if (kind_ == DomainKind::UnitHypercube) return 1.0;
        const double d = static_cast<double>(dim_);
        return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0) * std::pow(radius_, d);
    }

    /// |dOmega|; counting measure in d = 1.
    double boundary_measure() const {
        if (kind_ == DomainKind::UnitHypercube) return 2.0 * static_cast<double>(dim_);
        return static_cast<double>(dim_) * interior_measure() / radius_;
    }

    /// Strict interior membership.
    bool contains(std::span<const double> x) const {
        check_dim(x);
        if (kind_ == DomainKind::UnitHypercube)
            return std::all_of(x.begin(), x.end(), [](double v) { return v > 0.0 && v < 1.0; });
        return distance_to_center(x) < radius_;
    }

    bool on_boundary(std::span<const double> x, double tol = 1e-12) const {
        check_dim(x);
        if (kind_ == DomainKind::Ball) return std::abs(distance_to_center(x) - radius_) <= tol;
        bool on_face = false;
        for (double v : x) {
            if (v < -tol || v > 1.0 + tol) return false;
            if (std::abs(v) <= tol || std::abs(v - 1.0) <= tol) on_face = true;
        }
        return on_face;
    }

    /// Outward unit normal at a boundary point. On the cube the face is the
    /// first coordinate found at 0 or 1 (corners have measure zero).
    std::vector<double> outward_normal(std::span<const double> x) const {
        check_dim(x);
        std::vector<double> n(dim_, 0.0);
        if (kind_ == DomainKind::Ball) {
            for (std::size_t k = 0; k < dim_; ++k) n[k] = (x[k] - center_[k]) / radius_;
            return n;
        }
        std::size_t best = 0;
        double best_dist = 2.0;
        double sign = 1.0;
        for (std::size_t k = 0; k < dim_; ++k) {
            const double lo = std::abs(x[k]);
            const double hi = std::abs(1.0 - x[k]);
            if (lo < best_dist) { best_dist = lo; best = k; sign = -1.0; }
            if (hi < best_dist) { best_dist = hi; best = k; sign = 1.0; }
        }
        n[best] = sign;
        return n;
    }

    std::string describe() const {
        if (kind_ == DomainKind::UnitHypercube) return "hypercube(d=" + std::to_string(dim_) + ")";
        return "ball(d=" + std::to_string(dim_) + ", r=" + std::to_string(radius_) + ")";
    }

    friend bool operator==(const Domain&, const Domain&) = default;

private:
    Domain() = default;

    void check_dim(std::span<const double> x) const {
        if (x.size() != dim_) throw DimensionMismatch("Domain", dim_, x.size());
    }

    double distance_to_center(std::span<const double> x) const {
        double s = 0.0;
        for (std::size_t k = 0; k < dim_; ++k) s += (x[k] - center_[k]) * (x[k] - center_[k]);
        return std::sqrt(s);
    }

    DomainKind kind_ = DomainKind::UnitHypercube;
    std::size_t dim_ = 1;
    std::vector<double> center_;
    double radius_ = 0.0;
};

namespace detail {

inline void random_direction(Xoshiro256& rng, std::span<double> out) {
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& v : out) {
            v = rng.normal();
            norm2 += v * v;
        }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : out) v *= inv;
}

}  // namespace detail

/// n i.i.d. points from U(Omega). Deterministic in (domain, n, seed).
inline PointSet sample_interior(const Domain& domain, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InvalidArgument("sample_interior: n must be >= 1");
    const std::size_t d = domain.dimension();
    Xoshiro256 rng(seed);
    PointSet out(d);
    out.reserve(n);
    std::vector<double> p(d);
    for (std::size_t i = 0; i < n; ++i) {
        if (domain.kind() == DomainKind::UnitHypercube) {
            for (double& v : p) v = rng.uniform_open();
        } else {
            detail::random_direction(rng, p);
            const double r = domain.radius() * std::pow(rng.uniform_open(), 1.0 / static_cast<double>(d));
            for (std::size_t k = 0; k < d; ++k) p[k] = domain.center()[k] + r * p[k];
        }
        out.push_back(p);
    }
    return out;
}

/// m i.i.d. points from U(dOmega). Deterministic in (domain, m, seed).
inline PointSet sample_boundary(const Domain& domain, std::size_t m, std::uint64_t seed) {
    if (m == 0) throw InvalidArgument("sample_boundary: m must be >= 1");
    const std::size_t d = domain.dimension();
    Xoshiro256 rng(seed);
    PointSet out(d);
    out.reserve(m);
    std::vector<double> p(d);
    for (std::size_t j = 0; j < m; ++j) {
        if (domain.kind() == DomainKind::UnitHypercube) {
            // all 2d faces have unit (d-1)-measure, so faces are equiprobable
            const auto face = rng.below(2 * d);
            const std::size_t axis = face / 2;
            for (std::size_t k = 0; k < d; ++k) p[k] = (k == axis) ? static_cast<double>(face % 2) : rng.uniform_open();
        } else {
            detail::random_direction(rng, p);
            for (std::size_t k = 0; k < d; ++k) p[k] = domain.center()[k] + domain.radius() * p[k];
        }
        out.push_back(p);
    }
    return out;
}

/// Interior points {X_i} and boundary points {Y_j} for the empirical loss.
struct SampleBatch {
    PointSet interior;
    PointSet boundary;
    std::uint64_t seed = 0;

    std::size_t n_interior() const { return interior.size(); }
    std::size_t n_boundary() const { return boundary.size(); }

    friend bool operator==(const SampleBatch&, const SampleBatch&) = default;
};

inline SampleBatch sample_batch(const Domain& domain, std::size_t n, std::size_t m, std::uint64_t seed) {
    return SampleBatch{sample_interior(domain, n, derive_seed(seed, 0)),
                       sample_boundary(domain, m, derive_seed(seed, 1)), seed};
}

}  // namespace drm
