#pragma once

// Response-time metrics over completion records: flow (completion minus
// release), stretch (flow over processing), their means, 99th percentiles
// and per-function fairness averages, plus baseline normalization.

#include <algorithm>
#include <map>
#include <vector>

#include "core.hpp"

namespace faasched {

inline Duration flow_of(const CompletionRecord& r) { return r.completion - r.release; }

inline double stretch_of(const CompletionRecord& r) {
    return static_cast<double>(flow_of(r)) / static_cast<double>(r.processing);
}

struct MetricReport {
    double avg_flow_us{0};      // AF
    double avg_stretch{0};      // AS
    double flow_p99_us{0};      // F99
    double stretch_p99{0};      // S99
    double func_avg_flow_us{0}; // FF: mean over functions of their mean flow
    double func_avg_stretch{0}; // FS: mean over functions of sum(flow)/sum(processing)
    std::int64_t invocations{0};
    std::int64_t functions{0};
};

namespace detail {

// Nearest-rank percentile: the ceil(q * n)-th smallest, 1-based.
inline double nearest_rank_p99(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const std::size_t rank = (99 * n + 99) / 100;
    return values[rank - 1];
}

} // namespace detail

inline MetricReport aggregate(const std::vector<CompletionRecord>& records) {
    if (records.empty()) throw ContractViolation("cannot aggregate zero completion records");
    MetricReport rep;
    rep.invocations = static_cast<std::int64_t>(records.size());

    std::vector<double> flows;
    std::vector<double> stretches;
    flows.reserve(records.size());
    stretches.reserve(records.size());
    struct FuncAcc {
        double flow_sum{0};
        double processing_sum{0};
        std::int64_t count{0};
    };
    std::map<FunctionId, FuncAcc> by_func;

    double flow_sum = 0;
    double stretch_sum = 0;
    for (const CompletionRecord& r : records) {
        if (r.completion < r.release + r.processing)
            throw ContractViolation("completion earlier than release plus processing");
        const double f = static_cast<double>(flow_of(r));
        const double s = stretch_of(r);
        flows.push_back(f);
        stretches.push_back(s);
        flow_sum += f;
        stretch_sum += s;
        FuncAcc& acc = by_func[r.func];
        acc.flow_sum += f;
        acc.processing_sum += static_cast<double>(r.processing);
        acc.count += 1;
    }

    rep.avg_flow_us = flow_sum / static_cast<double>(records.size());
    rep.avg_stretch = stretch_sum / static_cast<double>(records.size());
    rep.flow_p99_us = detail::nearest_rank_p99(flows);
    rep.stretch_p99 = detail::nearest_rank_p99(stretches);

    rep.functions = static_cast<std::int64_t>(by_func.size());
    double ff = 0;
    double fs = 0;
    for (const auto& [func, acc] : by_func) {
        ff += acc.flow_sum / static_cast<double>(acc.count);
        fs += acc.flow_sum / acc.processing_sum;
    }
    rep.func_avg_flow_us = ff / static_cast<double>(by_func.size());
    rep.func_avg_stretch = fs / static_cast<double>(by_func.size());
    return rep;
}

// Element-wise ratios against a baseline run over the same instance.
// Invocation and function counts are carried over, not divided.
inline MetricReport normalize(const MetricReport& report, const MetricReport& baseline) {
    const double fields[6] = {baseline.avg_flow_us,      baseline.avg_stretch,
                              baseline.flow_p99_us,      baseline.stretch_p99,
                              baseline.func_avg_flow_us, baseline.func_avg_stretch};
    for (double f : fields)
        if (f == 0.0) throw ContractViolation("degenerate baseline: zero metric field");
    MetricReport out = report;
    out.avg_flow_us = report.avg_flow_us / baseline.avg_flow_us;
    out.avg_stretch = report.avg_stretch / baseline.avg_stretch;
    out.flow_p99_us = report.flow_p99_us / baseline.flow_p99_us;
    out.stretch_p99 = report.stretch_p99 / baseline.stretch_p99;
    out.func_avg_flow_us = report.func_avg_flow_us / baseline.func_avg_flow_us;
    out.func_avg_stretch = report.func_avg_stretch / baseline.func_avg_stretch;
    return out;
}

} // namespace faasched
