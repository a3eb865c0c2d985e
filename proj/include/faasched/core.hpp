#pragma once

// Core value types shared by every layer: integer-microsecond time, exact
// rational priorities, function profiles, instances and completion records.

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace faasched {

// All times are microseconds from the start of the instance frame.
// Integer time keeps event ordering deterministic and replay bit-exact.
using TimePoint = std::int64_t;
using Duration = std::int64_t;
using FunctionId = std::int32_t;
using SeqNo = std::int64_t;

inline constexpr Duration us_per_ms = 1'000;
inline constexpr Duration us_per_minute = 60'000'000;

inline constexpr Duration from_millis(std::int64_t ms) { return ms * us_per_ms; }

// 1-based index of the minute window [60s*(k-1), 60s*k) containing t.
inline std::int64_t minute_index(TimePoint t) { return t / us_per_minute + 1; }

inline TimePoint minute_start(std::int64_t k) { return (k - 1) * us_per_minute; }

class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Non-negative rational, compared exactly by cross multiplication so that
// priority ties are real ties and never an artifact of float rounding.
struct Ratio {
    std::int64_t num{0};
    std::int64_t den{1};

    static Ratio of(std::int64_t value) { return Ratio{value, 1}; }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline int compare(const Ratio& a, const Ratio& b) {
    __int128 lhs = static_cast<__int128>(a.num) * b.den;
    __int128 rhs = static_cast<__int128>(b.num) * a.den;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

inline bool operator<(const Ratio& a, const Ratio& b) { return compare(a, b) < 0; }
inline bool operator==(const Ratio& a, const Ratio& b) { return compare(a, b) == 0; }
inline bool operator!=(const Ratio& a, const Ratio& b) { return compare(a, b) != 0; }
inline bool operator<=(const Ratio& a, const Ratio& b) { return compare(a, b) <= 0; }

inline Ratio max(const Ratio& a, const Ratio& b) { return a < b ? b : a; }

// Quantile levels of the seven duration percentiles, in hundredths.
inline constexpr std::array<std::int64_t, 7> percentile_levels = {0, 1, 25, 50, 75, 99, 100};

// p0 <= p1 <= p25 <= p50 <= p75 <= p99 <= p100, microseconds.
struct DurationPercentiles {
    Duration p0{0};
    Duration p1{0};
    Duration p25{0};
    Duration p50{0};
    Duration p75{0};
    Duration p99{0};
    Duration p100{0};

    std::array<Duration, 7> knots() const { return {p0, p1, p25, p50, p75, p99, p100}; }

    static DurationPercentiles from_knots(const std::array<Duration, 7>& k) {
        return DurationPercentiles{k[0], k[1], k[2], k[3], k[4], k[5], k[6]};
    }

    bool operator==(const DurationPercentiles&) const = default;
};

struct FunctionProfile {
    FunctionId id{0};
    std::string key;                 // stable identity, seeds the per-function RNG substreams
    std::vector<std::int64_t> rates; // invocations per minute, one entry per frame minute
    DurationPercentiles durations;

    bool operator==(const FunctionProfile&) const = default;
};

struct Invocation {
    SeqNo seq{0};
    FunctionId func{0};
    TimePoint release{0};
    Duration processing{0}; // ground truth, hidden from non-clairvoyant policies

    bool operator==(const Invocation&) const = default;
};

struct Instance {
    TimePoint horizon{0}; // frame length T, a whole number of minutes
    int processors{1};
    std::vector<FunctionProfile> profiles;
    std::vector<Invocation> invocations; // sorted by (release, seq), seq unique

    bool operator==(const Instance&) const = default;
};

struct CompletionRecord {
    SeqNo seq{0};
    FunctionId func{0};
    TimePoint release{0};
    TimePoint completion{0};
    Duration processing{0};

    bool operator==(const CompletionRecord&) const = default;
};

struct Violation {
    std::int64_t index{-1}; // invocation seq or profile id; -1 for instance-level faults
    std::string reason;
};

inline std::vector<Violation> validate_instance(const Instance& inst) {
    std::vector<Violation> out;
    auto flag = [&out](std::int64_t index, std::string reason) {
        out.push_back(Violation{index, std::move(reason)});
    };

    if (inst.processors < 1) flag(-1, "processors must be >= 1");
    if (inst.horizon <= 0) {
        flag(-1, "horizon must be positive");
    } else if (inst.horizon % us_per_minute != 0) {
        flag(-1, "horizon must be a whole number of minutes");
    }

    const std::int64_t minutes = inst.horizon > 0 ? inst.horizon / us_per_minute : 0;
    for (std::size_t i = 0; i < inst.profiles.size(); ++i) {
        const FunctionProfile& p = inst.profiles[i];
        if (p.id != static_cast<FunctionId>(i))
            flag(p.id, "profile ids must be 0..n-1 in order");
        if (minutes > 0 && static_cast<std::int64_t>(p.rates.size()) != minutes)
            flag(p.id, "rates length must equal the frame minute count");
        for (std::int64_t r : p.rates)
            if (r < 0) { flag(p.id, "rates must be non-negative"); break; }
        const auto k = p.durations.knots();
        for (std::size_t j = 0; j + 1 < k.size(); ++j)
            if (k[j] > k[j + 1]) { flag(p.id, "duration percentiles must be non-decreasing"); break; }
        if (k[0] < 0) flag(p.id, "duration percentiles must be non-negative");
        if (p.durations.p100 <= 0) flag(p.id, "p100 must be positive");
    }

    const Invocation* prev = nullptr;
    for (const Invocation& inv : inst.invocations) {
        if (inv.func < 0 || inv.func >= static_cast<FunctionId>(inst.profiles.size()))
            flag(inv.seq, "func does not reference a profile");
        if (inv.release < 0 || inv.release >= inst.horizon)
            flag(inv.seq, "release must lie in [0, horizon)");
        if (inv.processing <= 0)
            flag(inv.seq, "processing must be positive");
        if (prev) {
            if (inv.release < prev->release ||
                (inv.release == prev->release && inv.seq <= prev->seq))
                flag(inv.seq, "invocations must be sorted by (release, seq)");
        }
        prev = &inv;
    }

    std::vector<SeqNo> seqs;
    seqs.reserve(inst.invocations.size());
    for (const Invocation& inv : inst.invocations) seqs.push_back(inv.seq);
    std::sort(seqs.begin(), seqs.end());
    for (std::size_t i = 0; i + 1 < seqs.size(); ++i)
        if (seqs[i] == seqs[i + 1]) { flag(seqs[i], "seq values must be unique"); break; }

    return out;
}

} // namespace faasched
