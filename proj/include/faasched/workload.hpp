#pragma once

// Workload synthesis: per-minute Poisson arrivals, inverse-transform
// durations, and the fill loop that packs randomly chosen functions into an
// instance until the load target is met.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "core.hpp"
#include "distribution.hpp"
#include "rng.hpp"

namespace faasched {

struct GenerationConfig {
    TimePoint window_start{0};
    TimePoint window_end{0}; // window length must be a whole number of minutes
    int processors{1};
    double load{1.0};            // target utilisation chi
    double tolerance{0.02};      // overshoot allowance epsilon
    std::uint64_t seed{0};
};

// Poisson process restricted to [start, end): exponential gaps with mean
// 60e6/rate microseconds, restarted fresh at the window start. Times are
// rounded half-up; a gap never carries over into the next window.
inline std::vector<TimePoint> generate_arrivals(std::int64_t rate_per_minute, TimePoint start,
                                                TimePoint end, std::mt19937_64& rng) {
    std::vector<TimePoint> out;
    if (rate_per_minute <= 0) return out;
    const double mean_gap = static_cast<double>(us_per_minute) / static_cast<double>(rate_per_minute);
    double offset = 0.0;
    for (;;) {
        offset += exponential_sample(rng, mean_gap);
        const TimePoint t = start + round_half_up(offset);
        if (t >= end) return out;
        out.push_back(t);
    }
}

struct FunctionSequence {
    std::vector<TimePoint> releases;  // within [window_start, window_end), ascending
    std::vector<Duration> durations;  // parallel to releases
    Duration load{0};                 // sum of durations
};

// The full invocation sequence one function would contribute. Arrival and
// duration draws use substreams keyed by (seed, function key) so the result
// is independent of the order functions are tried in.
inline FunctionSequence synthesize_function(const FunctionProfile& profile,
                                            const GenerationConfig& cfg) {
    FunctionSequence seq;
    const std::uint64_t key_hash = fnv1a64(profile.key);
    std::mt19937_64 arrival_rng = make_rng(mix_seed(cfg.seed, key_hash, 1));
    std::mt19937_64 duration_rng = make_rng(mix_seed(cfg.seed, key_hash, 2));
    const PiecewiseCdf cdf(profile.durations);
    const std::int64_t minutes = (cfg.window_end - cfg.window_start) / us_per_minute;
    for (std::int64_t k = 0; k < minutes; ++k) {
        const std::int64_t rate = k < static_cast<std::int64_t>(profile.rates.size())
                                      ? profile.rates[k]
                                      : 0;
        const TimePoint lo = cfg.window_start + k * us_per_minute;
        const TimePoint hi = lo + us_per_minute;
        for (TimePoint t : generate_arrivals(rate, lo, hi, arrival_rng)) {
            seq.releases.push_back(t);
            const Duration d = cdf.sample(duration_rng);
            seq.durations.push_back(d);
            seq.load += d;
        }
    }
    return seq;
}

struct GenerationResult {
    Instance instance;
    bool below_target{false}; // ran out of functions before reaching the load target
    Duration total_load{0};
};

using SequenceSource = std::function<FunctionSequence(const FunctionProfile&)>;

// Fill: draw a uniformly random untried function, admit its whole sequence
// iff the running load stays within (1 + tolerance) of the target, and stop
// once the target is reached or every function has been tried. Rejected
// functions are never re-drawn. The result is re-based to [0, T).
inline GenerationResult fill_instance(const std::vector<FunctionProfile>& profiles,
                                      const GenerationConfig& cfg, const SequenceSource& source) {
    const TimePoint frame = cfg.window_end - cfg.window_start;
    const double target = cfg.load * cfg.processors * static_cast<double>(frame);
    const double cap = (1.0 + cfg.tolerance) * target;

    std::mt19937_64 pick_rng = make_rng(mix_seed(cfg.seed, 0x66696c6cULL));
    std::vector<std::size_t> untried(profiles.size());
    std::iota(untried.begin(), untried.end(), 0);

    struct Admitted {
        std::size_t profile_index;
        FunctionSequence seq;
    };
    std::vector<Admitted> admitted;
    Duration load = 0;

    while (static_cast<double>(load) < target && !untried.empty()) {
        const std::uint64_t at = uniform_below(pick_rng, untried.size());
        const std::size_t chosen = untried[at];
        untried.erase(untried.begin() + static_cast<std::ptrdiff_t>(at));
        FunctionSequence seq = source(profiles[chosen]);
        if (static_cast<double>(load) + static_cast<double>(seq.load) <= cap) {
            load += seq.load;
            admitted.push_back(Admitted{chosen, std::move(seq)});
        }
    }

    std::sort(admitted.begin(), admitted.end(),
              [](const Admitted& a, const Admitted& b) { return a.profile_index < b.profile_index; });

    GenerationResult out;
    out.below_target = static_cast<double>(load) < target;
    out.total_load = load;
    out.instance.horizon = frame;
    out.instance.processors = cfg.processors;

    struct Pending {
        TimePoint release;
        FunctionId func;
        std::size_t ordinal; // per-function arrival index, for a stable merge
        Duration duration;
    };
    std::vector<Pending> pending;
    for (const Admitted& a : admitted) {
        const FunctionId id = static_cast<FunctionId>(out.instance.profiles.size());
        FunctionProfile p = profiles[a.profile_index];
        p.id = id;
        out.instance.profiles.push_back(std::move(p));
        for (std::size_t i = 0; i < a.seq.releases.size(); ++i)
            pending.push_back(Pending{a.seq.releases[i] - cfg.window_start, id, i,
                                      a.seq.durations[i]});
    }
    std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
        if (a.release != b.release) return a.release < b.release;
        if (a.func != b.func) return a.func < b.func;
        return a.ordinal < b.ordinal;
    });
    out.instance.invocations.reserve(pending.size());
    for (const Pending& p : pending)
        out.instance.invocations.push_back(Invocation{
            static_cast<SeqNo>(out.instance.invocations.size()), p.func, p.release, p.duration});
    return out;
}

inline GenerationResult generate_instance(const std::vector<FunctionProfile>& profiles,
                                          const GenerationConfig& cfg) {
    return fill_instance(profiles, cfg,
                         [&cfg](const FunctionProfile& p) { return synthesize_function(p, cfg); });
}

// Synthetic profile pool: heavy-tailed durations from log-uniform percentile
// knots, bursty arrivals from a zero-inflated geometric rate per minute.
// Each function owns a window of duration_spread_decades placed log-uniformly
// inside [duration_low, duration_high] and draws its knots there, so
// functions have distinct scales but stay internally consistent.
struct SyntheticConfig {
    int functions{400};
    int minutes{1440};
    Duration duration_low{1'000};        // 1 ms
    Duration duration_high{60'000'000};  // 60 s
    double duration_spread_decades{1.0};
    double zero_rate_probability{0.5};
    double geometric_mean{4.0};          // mean rate in active minutes
};

inline std::vector<FunctionProfile> make_synthetic_profiles(const SyntheticConfig& cfg,
                                                            std::uint64_t seed) {
    std::vector<FunctionProfile> out;
    out.reserve(static_cast<std::size_t>(cfg.functions));
    const double lo = std::log(static_cast<double>(cfg.duration_low));
    const double hi = std::log(static_cast<double>(cfg.duration_high));
    const double spread = cfg.duration_spread_decades < 0.0 ? 0.0 : cfg.duration_spread_decades;
    const double width = std::min(hi - lo, spread * std::log(10.0));
    const double keep = 1.0 - 1.0 / (cfg.geometric_mean < 1.0 ? 1.0 : cfg.geometric_mean);
    for (int j = 0; j < cfg.functions; ++j) {
        FunctionProfile p;
        p.id = static_cast<FunctionId>(j);
        p.key = "synth-" + std::to_string(j);
        std::mt19937_64 rng = make_rng(mix_seed(seed, fnv1a64(p.key), 3));
        const double base = lo + (hi - lo - width) * uniform_open01(rng);
        std::array<Duration, 7> knots{};
        for (auto& k : knots) {
            const double v = std::exp(base + width * uniform_open01(rng));
            k = std::max<Duration>(1, round_half_up(v));
        }
        std::sort(knots.begin(), knots.end());
        p.durations = DurationPercentiles::from_knots(knots);
        p.rates.resize(static_cast<std::size_t>(cfg.minutes));
        for (auto& r : p.rates) {
            if (uniform_open01(rng) < cfg.zero_rate_probability) {
                r = 0;
            } else if (keep <= 0.0) {
                r = 1;
            } else {
                r = 1 + static_cast<std::int64_t>(std::floor(std::log(uniform_open01(rng)) /
                                                             std::log(keep)));
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace faasched
