#pragma once

// Production-trace ingestion: per-minute invocation counts and duration
// percentiles, the preprocessing filters that turn them into per-day
// function profiles, and the minute-over-minute arrival variability study.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "csv.hpp"
#include "rng.hpp"

namespace faasched {

inline constexpr int minutes_per_day = 1440;

enum class Trigger { http, timer, queue, other };

inline Trigger parse_trigger(std::string_view s) {
    if (s == "http") return Trigger::http;
    if (s == "timer") return Trigger::timer;
    if (s == "queue") return Trigger::queue;
    return Trigger::other;
}

struct RawInvocationRow {
    std::string key;
    int day{1};
    Trigger trigger{Trigger::other};
    std::vector<std::int32_t> counts; // one entry per minute of the day
};

struct RawDurationRow {
    std::string key;
    int day{1};
    DurationPercentiles percentiles; // trace milliseconds scaled to microseconds
};

struct RowError {
    std::int64_t line{0};
    std::string reason;
};

// Column-name mapping, overridable through a key=value file so the parser
// survives dataset revisions that rename columns.
struct TraceSchema {
    std::string function_key_column = "HashFunction";
    std::string trigger_column = "Trigger";
    std::string percentile_prefix = "percentile_Average_";
    std::string invocations_file = "invocations_per_function_md.anon.d{day}.csv";
    std::string durations_file = "function_durations_percentiles.anon.d{day}.csv";

    static TraceSchema from_kv(const std::map<std::string, std::string>& kv) {
        TraceSchema s;
        auto pick = [&kv](const char* key, std::string& slot) {
            auto it = kv.find(key);
            if (it != kv.end()) slot = it->second;
        };
        pick("function_key_column", s.function_key_column);
        pick("trigger_column", s.trigger_column);
        pick("percentile_prefix", s.percentile_prefix);
        pick("invocations_file", s.invocations_file);
        pick("durations_file", s.durations_file);
        return s;
    }

    std::string file_for_day(const std::string& pattern, int day) const {
        std::string name = pattern;
        const std::size_t pos = name.find("{day}");
        if (pos != std::string::npos) {
            char buf[3];
            std::snprintf(buf, sizeof(buf), "%02d", day);
            name.replace(pos, 5, buf);
        }
        return name;
    }
};

namespace detail {

inline std::vector<std::string> read_header(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("trace file is empty");
    std::vector<std::string> out;
    for (std::string_view col : split_csv(strip_cr(line))) out.emplace_back(col);
    return out;
}

inline std::size_t column_of(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::runtime_error("missing trace column: " + name);
}

} // namespace detail

// One row per function record: key, trigger and 1440 per-minute counts.
// Malformed rows are skipped and reported with their line number.
inline std::vector<RawInvocationRow> parse_invocation_trace(std::istream& in, int day,
                                                            const TraceSchema& schema = {},
                                                            std::vector<RowError>* errors = nullptr) {
    const auto header = detail::read_header(in);
    const std::size_t key_col = detail::column_of(header, schema.function_key_column);
    const std::size_t trig_col = detail::column_of(header, schema.trigger_column);
    std::vector<std::size_t> minute_cols(minutes_per_day);
    for (int m = 1; m <= minutes_per_day; ++m)
        minute_cols[m - 1] = detail::column_of(header, std::to_string(m));

    std::vector<RawInvocationRow> rows;
    std::string line;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view body = strip_cr(line);
        if (body.empty()) continue;
        const auto cells = split_csv(body);
        if (cells.size() != header.size()) {
            if (errors) errors->push_back({line_no, "expected " + std::to_string(header.size()) +
                                                        " columns, got " + std::to_string(cells.size())});
            continue;
        }
        RawInvocationRow row;
        row.key = std::string(cells[key_col]);
        row.day = day;
        row.trigger = parse_trigger(cells[trig_col]);
        row.counts.resize(minutes_per_day);
        bool ok = true;
        for (int m = 0; m < minutes_per_day; ++m) {
            std::int64_t v = 0;
            if (!parse_int(cells[minute_cols[m]], v) || v < 0) {
                if (errors) errors->push_back({line_no, "bad count in minute " + std::to_string(m + 1)});
                ok = false;
                break;
            }
            row.counts[m] = static_cast<std::int32_t>(v);
        }
        if (ok) rows.push_back(std::move(row));
    }
    return rows;
}

// Duration percentiles arrive as milliseconds (possibly fractional) and are
// scaled to integer microseconds. Rows missing any percentile, with negative
// or non-monotone values, or with p100 = 0 are dropped as missing data.
inline std::vector<RawDurationRow> parse_duration_trace(std::istream& in, int day,
                                                        const TraceSchema& schema = {},
                                                        std::vector<RowError>* errors = nullptr) {
    const auto header = detail::read_header(in);
    const std::size_t key_col = detail::column_of(header, schema.function_key_column);
    std::array<std::size_t, 7> pct_cols{};
    for (std::size_t i = 0; i < 7; ++i)
        pct_cols[i] = detail::column_of(header, schema.percentile_prefix +
                                                    std::to_string(percentile_levels[i]));

    std::vector<RawDurationRow> rows;
    std::string line;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view body = strip_cr(line);
        if (body.empty()) continue;
        const auto cells = split_csv(body);
        if (cells.size() != header.size()) {
            if (errors) errors->push_back({line_no, "expected " + std::to_string(header.size()) +
                                                        " columns, got " + std::to_string(cells.size())});
            continue;
        }
        std::array<Duration, 7> knots{};
        bool ok = true;
        for (std::size_t i = 0; i < 7; ++i) {
            double ms = 0.0;
            if (!parse_double(cells[pct_cols[i]], ms) || !(ms >= 0.0)) {
                ok = false;
                break;
            }
            knots[i] = round_half_up(ms * 1000.0);
        }
        for (std::size_t i = 0; ok && i + 1 < 7; ++i)
            if (knots[i] > knots[i + 1]) ok = false;
        if (ok && knots[6] <= 0) ok = false;
        if (!ok) {
            if (errors) errors->push_back({line_no, "missing or invalid duration percentiles"});
            continue;
        }
        rows.push_back(RawDurationRow{std::string(cells[key_col]), day,
                                      DurationPercentiles::from_knots(knots)});
    }
    return rows;
}

// |cur - prev| / (cur + prev), with the all-quiet case pinned to zero.
inline double relative_difference(std::int64_t prev, std::int64_t cur) {
    if (prev == 0 && cur == 0) return 0.0;
    const std::int64_t diff = cur > prev ? cur - prev : prev - cur;
    return static_cast<double>(diff) / static_cast<double>(cur + prev);
}

struct DeltaSample {
    std::string key;
    int day{1};
    int minute{2}; // 1-based; minute 1 has no predecessor and is never sampled
    std::int64_t lambda_prev{0};
    std::int64_t lambda_cur{0};
    double delta{0.0};
};

struct DeltaSampleResult {
    std::vector<DeltaSample> samples;
    std::int64_t population{0};
    bool exhausted{false}; // fewer eligible pairs than requested
};

// Uniform sample without replacement over all (function, minute) pairs with
// at least one call in the minute or its predecessor. Minutes never pair
// across a day boundary. Single-pass reservoir keeps it deterministic and
// memory-flat.
inline DeltaSampleResult sample_delta_pairs(const std::vector<RawInvocationRow>& rows,
                                            std::size_t n, std::uint64_t seed) {
    DeltaSampleResult out;
    std::mt19937_64 rng = make_rng(mix_seed(seed, 0x64656c7461ULL));
    std::int64_t seen = 0;
    for (const RawInvocationRow& row : rows) {
        for (int m = 2; m <= static_cast<int>(row.counts.size()); ++m) {
            const std::int64_t prev = row.counts[m - 2];
            const std::int64_t cur = row.counts[m - 1];
            if (prev + cur == 0) continue;
            ++seen;
            DeltaSample s{row.key, row.day, m, prev, cur, relative_difference(prev, cur)};
            if (out.samples.size() < n) {
                out.samples.push_back(std::move(s));
            } else if (n > 0) {
                const std::uint64_t j = uniform_below(rng, static_cast<std::uint64_t>(seen));
                if (j < n) out.samples[j] = std::move(s);
            }
        }
    }
    out.population = seen;
    out.exhausted = out.samples.size() < n;
    return out;
}

struct PreprocessStats {
    std::int64_t invocation_rows_in{0};
    std::int64_t dropped_multiple_records{0};
    std::int64_t dropped_non_http{0};
    std::int64_t dropped_missing_durations{0};
    std::int64_t profiles_out{0};
};

// Per-day simulation inputs surviving the three filters: (a) functions with
// more than one record in any single day are dropped everywhere, (b) only
// http-triggered rows are kept, (c) a complete duration row for the same
// (function, day) must exist.
inline std::vector<FunctionProfile> preprocess(const std::vector<RawInvocationRow>& invocations,
                                               const std::vector<RawDurationRow>& durations,
                                               int day, PreprocessStats* stats = nullptr) {
    PreprocessStats local;
    std::map<std::pair<std::string, int>, int> record_count;
    for (const RawInvocationRow& r : invocations)
        ++record_count[{r.key, r.day}];
    std::map<std::string, bool> duplicated;
    for (const auto& [key_day, count] : record_count)
        if (count > 1) duplicated[key_day.first] = true;

    std::map<std::string, const DurationPercentiles*> day_durations;
    for (const RawDurationRow& d : durations)
        if (d.day == day) day_durations.emplace(d.key, &d.percentiles);

    std::vector<const RawInvocationRow*> kept;
    for (const RawInvocationRow& r : invocations) {
        if (r.day != day) continue;
        ++local.invocation_rows_in;
        if (duplicated.count(r.key)) {
            ++local.dropped_multiple_records;
            continue;
        }
        if (r.trigger != Trigger::http) {
            ++local.dropped_non_http;
            continue;
        }
        if (!day_durations.count(r.key)) {
            ++local.dropped_missing_durations;
            continue;
        }
        kept.push_back(&r);
    }
    std::sort(kept.begin(), kept.end(),
              [](const RawInvocationRow* a, const RawInvocationRow* b) { return a->key < b->key; });

    std::vector<FunctionProfile> profiles;
    profiles.reserve(kept.size());
    for (const RawInvocationRow* r : kept) {
        FunctionProfile p;
        p.id = static_cast<FunctionId>(profiles.size());
        p.key = r->key;
        p.rates.assign(r->counts.begin(), r->counts.end());
        p.durations = *day_durations.at(r->key);
        profiles.push_back(std::move(p));
    }
    local.profiles_out = static_cast<std::int64_t>(profiles.size());
    if (stats) *stats = local;
    return profiles;
}

} // namespace faasched
