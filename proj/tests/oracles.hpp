#pragma once
// Independent reference implementations used only by tests.

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace oracle {

// Minimize ||x - v||^2 over the simplex by trying every support set S:
// on S the KKT solution is x_i = v_i - tau with tau = (sum_S v - 1)/|S|.
inline std::vector<double> simplex_projection(std::span<const double> v) {
    const std::size_t d = v.size();
    std::vector<double> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (unsigned long mask = 1; mask < (1UL << d); ++mask) {
        double sum = 0.0;
        std::size_t k = 0;
        for (std::size_t i = 0; i < d; ++i)
            if (mask >> i & 1UL) {
                sum += v[i];
                ++k;
            }
        const double tau = (sum - 1.0) / static_cast<double>(k);
        std::vector<double> x(d, 0.0);
        bool feasible = true;
        for (std::size_t i = 0; i < d; ++i)
            if (mask >> i & 1UL) {
                x[i] = v[i] - tau;
                if (x[i] < -1e-15) feasible = false;
            }
        if (!feasible) continue;
        double dist = 0.0;
        for (std::size_t i = 0; i < d; ++i) dist += (x[i] - v[i]) * (x[i] - v[i]);
        if (dist < best_dist) {
            best_dist = dist;
            best = x;
        }
    }
    return best;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        scale += analytic[i] * analytic[i] + numeric[i] * numeric[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(scale), 1e-12);
}

inline std::vector<double> random_simplex_point(std::size_t d, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w(d);
    double s = 0.0;
    for (auto& x : w) s += (x = e(rng) + 1e-3);
    for (auto& x : w) x /= s;
    return w;
}

}  // namespace oracle
