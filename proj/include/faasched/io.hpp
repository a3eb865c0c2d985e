#pragma once

// On-disk formats. An instance is a CSV of invocations plus a key=value
// sidecar carrying the frame, processor count and per-function profiles, so
// a stored instance replays bit-exactly and still feeds foresight policies.
// Profile pools travel as JSON.

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "csv.hpp"
#include "metrics.hpp"

namespace faasched {

inline std::string meta_path_for(const std::string& csv_path) {
    if (csv_path.size() > 4 && csv_path.substr(csv_path.size() - 4) == ".csv")
        return csv_path.substr(0, csv_path.size() - 4) + ".meta";
    return csv_path + ".meta";
}

struct StoredInstance {
    Instance instance;
    std::uint64_t seed{0};
    bool below_target{false};
};

inline void save_instance(const StoredInstance& stored, const std::string& csv_path) {
    const Instance& inst = stored.instance;
    {
        std::ofstream out = open_output(csv_path);
        out << "seq,func,release_us,processing_us\n";
        for (const Invocation& inv : inst.invocations)
            out << inv.seq << ',' << inv.func << ',' << inv.release << ',' << inv.processing
                << '\n';
    }
    std::ofstream meta = open_output(meta_path_for(csv_path));
    meta << "horizon_us=" << inst.horizon << '\n';
    meta << "processors=" << inst.processors << '\n';
    meta << "seed=" << stored.seed << '\n';
    meta << "below_target=" << (stored.below_target ? 1 : 0) << '\n';
    meta << "functions=" << inst.profiles.size() << '\n';
    for (const FunctionProfile& p : inst.profiles) {
        const std::string prefix = "function." + std::to_string(p.id) + ".";
        meta << prefix << "key=" << p.key << '\n';
        meta << prefix << "rates=" << join_ints(p.rates) << '\n';
        const auto ks = p.durations.knots();
        meta << prefix << "percentiles_us=" << join_ints({ks.begin(), ks.end()}) << '\n';
    }
}

inline StoredInstance load_instance(const std::string& csv_path) {
    StoredInstance stored;
    Instance& inst = stored.instance;

    std::ifstream meta_in = open_input(meta_path_for(csv_path));
    const auto kv = parse_kv(meta_in);
    auto need = [&kv, &csv_path](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw std::runtime_error("instance sidecar for " + csv_path + " lacks key " + key);
        return it->second;
    };
    std::int64_t v = 0;
    if (!parse_int(need("horizon_us"), v)) throw std::runtime_error("bad horizon_us");
    inst.horizon = v;
    if (!parse_int(need("processors"), v)) throw std::runtime_error("bad processors");
    inst.processors = static_cast<int>(v);
    std::uint64_t seed = 0;
    if (!parse_uint(need("seed"), seed)) throw std::runtime_error("bad seed");
    stored.seed = seed;
    if (!parse_int(need("below_target"), v)) throw std::runtime_error("bad below_target");
    stored.below_target = v != 0;
    if (!parse_int(need("functions"), v)) throw std::runtime_error("bad functions");
    const std::int64_t n = v;
    for (std::int64_t f = 0; f < n; ++f) {
        const std::string prefix = "function." + std::to_string(f) + ".";
        FunctionProfile p;
        p.id = static_cast<FunctionId>(f);
        p.key = need(prefix + "key");
        p.rates = parse_int_list(need(prefix + "rates"));
        const auto knots = parse_int_list(need(prefix + "percentiles_us"));
        if (knots.size() != 7)
            throw std::runtime_error("expected 7 percentile knots for function " +
                                     std::to_string(f));
        std::array<Duration, 7> k{};
        std::copy(knots.begin(), knots.end(), k.begin());
        p.durations = DurationPercentiles::from_knots(k);
        inst.profiles.push_back(std::move(p));
    }

    std::ifstream in = open_input(csv_path);
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != "seq,func,release_us,processing_us")
        throw std::runtime_error("bad instance header in " + csv_path);
    while (std::getline(in, line)) {
        const std::string_view body = strip_cr(line);
        if (body.empty()) continue;
        const auto cells = split_csv(body);
        std::int64_t seq = 0, func = 0, release = 0, processing = 0;
        if (cells.size() != 4 || !parse_int(cells[0], seq) || !parse_int(cells[1], func) ||
            !parse_int(cells[2], release) || !parse_int(cells[3], processing))
            throw std::runtime_error("bad instance row in " + csv_path + ": " + line);
        inst.invocations.push_back(
            Invocation{seq, static_cast<FunctionId>(func), release, processing});
    }
    return stored;
}

inline void save_completions(const std::vector<CompletionRecord>& records,
                             const std::string& path) {
    std::ofstream out = open_output(path);
    out << "seq,func,release_us,completion_us,processing_us\n";
    for (const CompletionRecord& r : records)
        out << r.seq << ',' << r.func << ',' << r.release << ',' << r.completion << ','
            << r.processing << '\n';
}

inline std::vector<CompletionRecord> load_completions(const std::string& path) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line) ||
        strip_cr(line) != "seq,func,release_us,completion_us,processing_us")
        throw std::runtime_error("bad completion header in " + path);
    std::vector<CompletionRecord> out;
    while (std::getline(in, line)) {
        const std::string_view body = strip_cr(line);
        if (body.empty()) continue;
        const auto cells = split_csv(body);
        std::int64_t seq = 0, func = 0, release = 0, completion = 0, processing = 0;
        if (cells.size() != 5 || !parse_int(cells[0], seq) || !parse_int(cells[1], func) ||
            !parse_int(cells[2], release) || !parse_int(cells[3], completion) ||
            !parse_int(cells[4], processing))
            throw std::runtime_error("bad completion row in " + path + ": " + line);
        out.push_back(CompletionRecord{seq, static_cast<FunctionId>(func), release, completion,
                                       processing});
    }
    return out;
}

struct ProfilePool {
    int day{0}; // 0 when the pool is synthetic
    std::vector<FunctionProfile> profiles;
};

inline void save_profiles(const ProfilePool& pool, const std::string& path) {
    nlohmann::json doc;
    doc["day"] = pool.day;
    doc["minutes"] = pool.profiles.empty() ? 0 : pool.profiles.front().rates.size();
    nlohmann::json funcs = nlohmann::json::array();
    for (const FunctionProfile& p : pool.profiles) {
        nlohmann::json f;
        f["key"] = p.key;
        f["rates"] = p.rates;
        f["percentiles_us"] = p.durations.knots();
        funcs.push_back(std::move(f));
    }
    doc["functions"] = std::move(funcs);
    std::ofstream out = open_output(path);
    out << doc.dump(1) << '\n';
}

inline ProfilePool load_profiles(const std::string& path) {
    std::ifstream in = open_input(path);
    nlohmann::json doc;
    in >> doc;
    ProfilePool pool;
    pool.day = doc.value("day", 0);
    for (const auto& f : doc.at("functions")) {
        FunctionProfile p;
        p.id = static_cast<FunctionId>(pool.profiles.size());
        p.key = f.at("key").get<std::string>();
        p.rates = f.at("rates").get<std::vector<std::int64_t>>();
        const auto knots = f.at("percentiles_us").get<std::vector<std::int64_t>>();
        if (knots.size() != 7)
            throw std::runtime_error("profile " + p.key + " must carry 7 percentile knots");
        std::array<Duration, 7> k{};
        std::copy(knots.begin(), knots.end(), k.begin());
        p.durations = DurationPercentiles::from_knots(k);
        pool.profiles.push_back(std::move(p));
    }
    return pool;
}

inline constexpr const char* metric_row_header =
    "policy,variant,m,load,T_min,seed,AF_us,AS,F99_us,S99,FF_us,FS,below_target";

struct MetricRowContext {
    std::string policy;
    std::string variant;
    int processors{0};
    double load{0};
    int minutes{0};
    std::uint64_t seed{0};
    bool below_target{false};
};

inline std::string format_metric_row(const MetricRowContext& ctx, const MetricReport& rep) {
    std::string out;
    out += ctx.policy;
    out += ',';
    out += ctx.variant;
    out += ',';
    out += std::to_string(ctx.processors);
    out += ',';
    out += format_double(ctx.load);
    out += ',';
    out += std::to_string(ctx.minutes);
    out += ',';
    out += std::to_string(ctx.seed);
    for (double v : {rep.avg_flow_us, rep.avg_stretch, rep.flow_p99_us, rep.stretch_p99,
                     rep.func_avg_flow_us, rep.func_avg_stretch}) {
        out += ',';
        out += format_double(v);
    }
    out += ',';
    out += ctx.below_target ? '1' : '0';
    return out;
}

} // namespace faasched
