#pragma once

// Piecewise-linear duration distribution reconstructed from the seven
// percentile knots (p0,0) (p1,.01) (p25,.25) (p50,.5) (p75,.75) (p99,.99)
// (p100,1). Zero-width segments act as point masses.

#include <array>
#include <cmath>
#include <random>

#include "core.hpp"
#include "rng.hpp"

namespace faasched {

class PiecewiseCdf {
public:
    explicit PiecewiseCdf(const DurationPercentiles& p) : x_(p.knots()) {
        for (std::size_t i = 0; i < 7; ++i)
            q_[i] = static_cast<double>(percentile_levels[i]) / 100.0;
    }

    // F(x). Below the lowest knot the mass is zero; at a shared knot value the
    // highest quantile wins, which is what gives point masses their jump.
    double at(Duration x) const {
        if (x < x_[0]) return 0.0;
        if (x >= x_[6]) return 1.0;
        std::size_t i = 6;
        while (x_[i] > x) --i;
        if (x_[i] == x) return q_[i];
        return q_[i] + (q_[i + 1] - q_[i]) * static_cast<double>(x - x_[i]) /
                           static_cast<double>(x_[i + 1] - x_[i]);
    }

    // Generalized inverse: the smallest x with F(x) >= u. A zero-width
    // segment swallows its whole u-subinterval.
    double quantile(double u) const {
        for (std::size_t i = 0; i < 6; ++i) {
            if (u <= q_[i + 1]) {
                if (x_[i] == x_[i + 1]) return static_cast<double>(x_[i]);
                return static_cast<double>(x_[i]) +
                       (u - q_[i]) / (q_[i + 1] - q_[i]) * static_cast<double>(x_[i + 1] - x_[i]);
            }
        }
        return static_cast<double>(x_[6]);
    }

    // Inverse-transform draw, rounded half-up with a 1 us floor so sampled
    // work is always schedulable.
    Duration sample(std::mt19937_64& g) const {
        const Duration v = round_half_up(quantile(uniform_open01(g)));
        return v < 1 ? 1 : v;
    }

    // Exact mean: sum of segment masses times segment midpoints. Each segment
    // carries mass c/100, so 200 * mean = sum(c_i * (x_i + x_{i+1})).
    Ratio mean_ratio() const {
        std::int64_t num = 0;
        for (std::size_t i = 0; i < 6; ++i)
            num += (percentile_levels[i + 1] - percentile_levels[i]) * (x_[i] + x_[i + 1]);
        return Ratio{num, 200};
    }

    Duration mean() const {
        const Ratio m = mean_ratio();
        return (m.num + m.den / 2) / m.den;
    }

    // E[X - p | X >= p]: expected residual work after p microseconds of
    // service. Segments wholly below p drop out; the segment containing p is
    // truncated; point masses at or above p keep their full weight.
    Duration expected_remaining(Duration p) const {
        if (p >= x_[6]) return 0;
        if (p <= x_[0]) return mean() - p < 0 ? 0 : mean() - p;
        double mass = 0.0;
        double weighted = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            const double w = q_[i + 1] - q_[i];
            if (x_[i] == x_[i + 1]) {
                if (x_[i] >= p) {
                    mass += w;
                    weighted += w * static_cast<double>(x_[i]);
                }
                continue;
            }
            if (x_[i + 1] <= p) continue;
            const Duration a = x_[i] > p ? x_[i] : p;
            const double frac = static_cast<double>(x_[i + 1] - a) /
                                static_cast<double>(x_[i + 1] - x_[i]);
            mass += w * frac;
            weighted += w * frac * 0.5 * static_cast<double>(a + x_[i + 1]);
        }
        const double rem = weighted / mass - static_cast<double>(p);
        const Duration v = round_half_up(rem < 0.0 ? 0.0 : rem);
        return v < 0 ? 0 : v;
    }

    Duration lowest() const { return x_[0]; }
    Duration highest() const { return x_[6]; }

private:
    std::array<Duration, 7> x_;
    std::array<double, 7> q_;
};

} // namespace faasched
