#pragma once

// Independent brute-force references used only by the tests.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <tuple>
#include <vector>

namespace oracle {

/// E_sigma sup_{a in A} (1/N) sum_i sigma_i a_i by enumerating all 2^N signs.
inline double rademacher_exact(const std::vector<std::vector<double>>& set) {
    const std::size_t N = set.front().size();
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << N); ++mask) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& a : set) {
            double s = 0.0;
            for (std::size_t i = 0; i < N; ++i) s += ((mask >> i) & 1 ? 1.0 : -1.0) * a[i];
            best = std::max(best, s);
        }
        total += best;
    }
    return total / static_cast<double>(std::uint64_t{1} << N) / static_cast<double>(N);
}

/// Greedy epsilon-net of the lattice points (spacing h) inside the closed
/// radius-r ball in R^n: a lattice point becomes a centre when it is farther
/// than eps from every centre chosen so far. Every lattice point ends up
/// within eps of a centre, and centres are pairwise more than eps apart.
inline std::size_t greedy_cover_ball(std::size_t n, double r, double eps, double h) {
    const long steps = static_cast<long>(std::floor(r / h + 1e-9));
    // bucket centres by cell of side eps so each query scans 3^n cells
    std::map<std::vector<long>, std::vector<std::vector<double>>> grid;
    std::size_t count = 0;
    std::vector<long> idx(n, -steps);
    auto cell_of = [&](const std::vector<double>& p) {
        std::vector<long> c(n);
        for (std::size_t k = 0; k < n; ++k) c[k] = static_cast<long>(std::floor(p[k] / eps));
        return c;
    };
    while (true) {
        std::vector<double> p(n);
        double norm2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            p[k] = static_cast<double>(idx[k]) * h;
            norm2 += p[k] * p[k];
        }
        if (norm2 <= r * r * (1 + 1e-12)) {
            const auto c = cell_of(p);
            bool covered = false;
            std::vector<long> off(n, -1);
            while (!covered) {
                std::vector<long> q(n);
                for (std::size_t k = 0; k < n; ++k) q[k] = c[k] + off[k];
                auto it = grid.find(q);
                if (it != grid.end()) {
                    for (const auto& z : it->second) {
                        double d2 = 0.0;
                        for (std::size_t k = 0; k < n; ++k) d2 += (z[k] - p[k]) * (z[k] - p[k]);
                        if (d2 <= eps * eps) {
                            covered = true;
                            break;
                        }
                    }
                }
                std::size_t k = 0;
                while (k < n && off[k] == 1) off[k++] = -1;
                if (k == n) break;
                ++off[k];
            }
            if (!covered) {
                grid[c].push_back(p);
                ++count;
            }
        }
        std::size_t k = 0;
        while (k < n && idx[k] == steps) idx[k++] = -steps;
        if (k == n) break;
        ++idx[k];
    }
    return count;
}

/// Same greedy rule on the lattice points of the cube [-r, r]^n.
inline std::size_t greedy_cover_cube(std::size_t n, double r, double eps, double h) {
    const long steps = static_cast<long>(std::floor(r / h + 1e-9));
    std::vector<std::vector<double>> centres;
    std::vector<long> idx(n, -steps);
    while (true) {
        std::vector<double> p(n);
        for (std::size_t k = 0; k < n; ++k) p[k] = static_cast<double>(idx[k]) * h;
        bool covered = false;
        for (const auto& z : centres) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < n; ++k) d2 += (z[k] - p[k]) * (z[k] - p[k]);
            if (d2 <= eps * eps) {
                covered = true;
                break;
            }
        }
        if (!covered) centres.push_back(p);
        std::size_t k = 0;
        while (k < n && idx[k] == steps) idx[k++] = -steps;
        if (k == n) break;
        ++idx[k];
    }
    return centres.size();
}

/// Central difference of f along coordinate k of x.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t k, double h) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const double fp = f(x);
    x[k] = x0 - h;
    const double fm = f(x);
    return (fp - fm) / (2.0 * h);
}

/// |a - b| <= max(rel * max(|a|, |b|), abs)
inline bool close(double a, double b, double rel, double abs) {
    return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs);
}

}  // namespace oracle
