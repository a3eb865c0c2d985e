#pragma once

// Experiment harness: sweeps the (processors, load, frame length) grid,
// draws per-instance windows from a profile pool, runs every policy on the
// identical instance, and emits raw, normalized and summary tables. All
// randomness is derived from one master seed, so a rerun is byte-identical
// regardless of worker count.

#include <array>
#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "engine.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "trace.hpp"
#include "workload.hpp"

namespace faasched {

struct ExperimentConfig {
    std::vector<int> processors{10, 20, 50, 100};
    std::vector<double> loads{0.7, 0.8, 0.9, 1.0};
    std::vector<int> durations_min{30, 60, 100};
    int instances_per_config{20};
    std::vector<std::string> policies;
    std::uint64_t seed{1};
    double tolerance{0.02};
    int threads{1};

    enum class Source { synthetic, file, trace };
    Source source{Source::synthetic};
    SyntheticConfig synthetic;
    std::string profiles_path;
    std::string trace_dir;
    std::string mapping_path;

    static ExperimentConfig from_json(const nlohmann::json& doc);
};

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
    ExperimentConfig cfg;
    if (doc.contains("processors")) cfg.processors = doc.at("processors").get<std::vector<int>>();
    if (doc.contains("loads")) cfg.loads = doc.at("loads").get<std::vector<double>>();
    if (doc.contains("durations_min"))
        cfg.durations_min = doc.at("durations_min").get<std::vector<int>>();
    if (doc.contains("instances_per_config"))
        cfg.instances_per_config = doc.at("instances_per_config").get<int>();
    if (doc.contains("policies")) cfg.policies = doc.at("policies").get<std::vector<std::string>>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("tolerance")) cfg.tolerance = doc.at("tolerance").get<double>();
    if (doc.contains("threads")) cfg.threads = doc.at("threads").get<int>();
    if (doc.contains("source")) {
        const std::string s = doc.at("source").get<std::string>();
        if (s == "synthetic") cfg.source = Source::synthetic;
        else if (s == "file") cfg.source = Source::file;
        else if (s == "trace") cfg.source = Source::trace;
        else throw std::runtime_error("unknown profile source: " + s);
    }
    if (doc.contains("profiles_path")) cfg.profiles_path = doc.at("profiles_path").get<std::string>();
    if (doc.contains("trace_dir")) cfg.trace_dir = doc.at("trace_dir").get<std::string>();
    if (doc.contains("mapping_path")) cfg.mapping_path = doc.at("mapping_path").get<std::string>();
    if (doc.contains("synthetic")) {
        const auto& s = doc.at("synthetic");
        if (s.contains("functions")) cfg.synthetic.functions = s.at("functions").get<int>();
        if (s.contains("minutes")) cfg.synthetic.minutes = s.at("minutes").get<int>();
        if (s.contains("duration_low_us"))
            cfg.synthetic.duration_low = s.at("duration_low_us").get<Duration>();
        if (s.contains("duration_high_us"))
            cfg.synthetic.duration_high = s.at("duration_high_us").get<Duration>();
        if (s.contains("duration_spread_decades"))
            cfg.synthetic.duration_spread_decades = s.at("duration_spread_decades").get<double>();
        if (s.contains("zero_rate_probability"))
            cfg.synthetic.zero_rate_probability = s.at("zero_rate_probability").get<double>();
        if (s.contains("geometric_mean"))
            cfg.synthetic.geometric_mean = s.at("geometric_mean").get<double>();
    }
    if (cfg.processors.empty() || cfg.loads.empty() || cfg.durations_min.empty())
        throw std::runtime_error("processors, loads and durations_min must be non-empty");
    if (cfg.instances_per_config < 1) throw std::runtime_error("instances_per_config must be >= 1");
    if (cfg.policies.empty()) throw std::runtime_error("policies must be non-empty");
    return cfg;
}

inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (std::thread& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// Restrict a pool to the window [start_min, start_min + len_min), keeping
// only functions with at least one expected call inside it, re-indexed.
inline std::vector<FunctionProfile> window_slice(const std::vector<FunctionProfile>& pool,
                                                 std::size_t start_min, std::size_t len_min) {
    std::vector<FunctionProfile> out;
    for (const FunctionProfile& p : pool) {
        if (start_min + len_min > p.rates.size()) continue;
        std::int64_t sum = 0;
        for (std::size_t k = 0; k < len_min; ++k) sum += p.rates[start_min + k];
        if (sum == 0) continue;
        FunctionProfile sliced;
        sliced.id = static_cast<FunctionId>(out.size());
        sliced.key = p.key;
        sliced.durations = p.durations;
        sliced.rates.assign(p.rates.begin() + static_cast<std::ptrdiff_t>(start_min),
                            p.rates.begin() + static_cast<std::ptrdiff_t>(start_min + len_min));
        out.push_back(std::move(sliced));
    }
    return out;
}

inline std::vector<ProfilePool> resolve_profile_pools(const ExperimentConfig& cfg) {
    std::vector<ProfilePool> pools;
    switch (cfg.source) {
        case ExperimentConfig::Source::synthetic:
            pools.push_back(ProfilePool{
                0, make_synthetic_profiles(cfg.synthetic, mix_seed(cfg.seed, 0x73796e7468ULL))});
            break;
        case ExperimentConfig::Source::file:
            pools.push_back(load_profiles(cfg.profiles_path));
            break;
        case ExperimentConfig::Source::trace: {
            TraceSchema schema;
            if (!cfg.mapping_path.empty()) {
                std::ifstream map_in = open_input(cfg.mapping_path);
                schema = TraceSchema::from_kv(parse_kv(map_in));
            }
            const std::filesystem::path dir(cfg.trace_dir);
            std::vector<RawInvocationRow> invocations;
            std::vector<RawDurationRow> durations;
            std::vector<int> days;
            for (int day = 1; day <= 14; ++day) {
                const auto inv_path = dir / schema.file_for_day(schema.invocations_file, day);
                const auto dur_path = dir / schema.file_for_day(schema.durations_file, day);
                if (!std::filesystem::exists(inv_path) || !std::filesystem::exists(dur_path))
                    continue;
                std::ifstream inv_in = open_input(inv_path.string());
                auto rows = parse_invocation_trace(inv_in, day, schema);
                invocations.insert(invocations.end(), std::make_move_iterator(rows.begin()),
                                   std::make_move_iterator(rows.end()));
                std::ifstream dur_in = open_input(dur_path.string());
                auto drows = parse_duration_trace(dur_in, day, schema);
                durations.insert(durations.end(), std::make_move_iterator(drows.begin()),
                                 std::make_move_iterator(drows.end()));
                days.push_back(day);
            }
            if (days.empty())
                throw std::runtime_error("no trace day files found under " + cfg.trace_dir);
            for (int day : days)
                pools.push_back(ProfilePool{day, preprocess(invocations, durations, day)});
            break;
        }
    }
    for (const ProfilePool& pool : pools)
        if (pool.profiles.empty()) throw std::runtime_error("profile pool is empty");
    return pools;
}

struct RunRow {
    int processors{0};
    double load{0};
    int minutes{0};
    int instance_index{0};
    std::uint64_t instance_seed{0};
    bool below_target{false};
    PolicySpec spec;
    MetricReport raw;
    MetricReport normalized;
};

// The policy list with fifo and rr:10ms baselines appended when absent, in
// stable order, so every run has its normalization partner on hand.
inline std::vector<PolicySpec> with_baselines(const std::vector<std::string>& names) {
    std::vector<PolicySpec> specs;
    specs.reserve(names.size() + 2);
    for (const std::string& n : names) specs.push_back(PolicySpec::parse(n));
    bool has_fifo = false;
    bool has_rr10 = false;
    for (const PolicySpec& s : specs) {
        if (s.family == PolicyFamily::fifo) has_fifo = true;
        if (s.family == PolicyFamily::round_robin && s.quantum == from_millis(10)) has_rr10 = true;
    }
    if (!has_fifo) specs.push_back(PolicySpec::parse("fifo"));
    if (!has_rr10) specs.push_back(PolicySpec::parse("rr:10ms"));
    return specs;
}

inline std::vector<RunRow> run_experiment(const ExperimentConfig& cfg) {
    const std::vector<ProfilePool> pools = resolve_profile_pools(cfg);
    const std::vector<PolicySpec> specs = with_baselines(cfg.policies);
    std::size_t fifo_at = 0, rr10_at = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].family == PolicyFamily::fifo) fifo_at = i;
        if (specs[i].family == PolicyFamily::round_robin && specs[i].quantum == from_millis(10))
            rr10_at = i;
    }

    std::vector<RunRow> rows;
    std::size_t config_index = 0;
    for (int m : cfg.processors) {
        for (double load : cfg.loads) {
            for (int t_min : cfg.durations_min) {
                const std::size_t instances = static_cast<std::size_t>(cfg.instances_per_config);

                std::vector<GenerationResult> generated(instances);
                std::vector<std::uint64_t> instance_seeds(instances);
                parallel_for(instances, cfg.threads, [&](std::size_t i) {
                    const std::uint64_t instance_seed = mix_seed(cfg.seed, config_index + 1, i + 1);
                    instance_seeds[i] = instance_seed;
                    std::mt19937_64 rng = make_rng(mix_seed(instance_seed, 0x77696e64ULL));
                    const std::size_t day_at =
                        pools.size() > 1 ? uniform_below(rng, pools.size()) : 0;
                    const ProfilePool& pool = pools[day_at];
                    const std::size_t pool_minutes = pool.profiles.front().rates.size();
                    if (pool_minutes < static_cast<std::size_t>(t_min))
                        throw std::runtime_error("profile pool is shorter than the frame length");
                    const std::size_t start_min = uniform_below(
                        rng, pool_minutes - static_cast<std::size_t>(t_min) + 1);
                    const auto sliced =
                        window_slice(pool.profiles, start_min, static_cast<std::size_t>(t_min));
                    GenerationConfig gen;
                    gen.window_start = 0;
                    gen.window_end = static_cast<TimePoint>(t_min) * us_per_minute;
                    gen.processors = m;
                    gen.load = load;
                    gen.tolerance = cfg.tolerance;
                    gen.seed = mix_seed(instance_seed, 0x66696c6cULL);
                    generated[i] = generate_instance(sliced, gen);
                });

                std::vector<std::vector<MetricReport>> reports(
                    instances, std::vector<MetricReport>(specs.size()));
                std::vector<std::vector<bool>> usable(instances,
                                                      std::vector<bool>(specs.size(), false));
                parallel_for(instances * specs.size(), cfg.threads, [&](std::size_t flat) {
                    const std::size_t i = flat / specs.size();
                    const std::size_t s = flat % specs.size();
                    const Instance& inst = generated[i].instance;
                    if (inst.invocations.empty()) return;
                    const auto records = simulate(inst, specs[s]);
                    reports[i][s] = aggregate(records);
                    usable[i][s] = true;
                });

                for (std::size_t i = 0; i < instances; ++i) {
                    for (std::size_t s = 0; s < specs.size(); ++s) {
                        if (!usable[i][s]) continue;
                        const std::size_t base_at = specs[s].preemptive ? rr10_at : fifo_at;
                        RunRow row;
                        row.processors = m;
                        row.load = load;
                        row.minutes = t_min;
                        row.instance_index = static_cast<int>(i);
                        row.instance_seed = instance_seeds[i];
                        row.below_target = generated[i].below_target;
                        row.spec = specs[s];
                        row.raw = reports[i][s];
                        row.normalized = normalize(reports[i][s], reports[i][base_at]);
                        rows.push_back(row);
                    }
                }
                ++config_index;
            }
        }
    }
    return rows;
}

struct BoxStats {
    double min{0}, q1{0}, median{0}, q3{0}, max{0};
    std::size_t n{0};
};

// Quartiles by linear interpolation on the sorted sample (the common
// spreadsheet convention).
inline BoxStats box_stats(std::vector<double> v) {
    BoxStats out;
    if (v.empty()) return out;
    std::sort(v.begin(), v.end());
    out.n = v.size();
    out.min = v.front();
    out.max = v.back();
    auto quantile = [&v](double p) {
        const double h = p * static_cast<double>(v.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(h);
        if (lo + 1 >= v.size()) return v.back();
        const double frac = h - static_cast<double>(lo);
        return v[lo] + frac * (v[lo + 1] - v[lo]);
    };
    out.q1 = quantile(0.25);
    out.median = quantile(0.5);
    out.q3 = quantile(0.75);
    return out;
}

namespace detail {

inline double metric_field(const MetricReport& r, int idx) {
    switch (idx) {
        case 0: return r.avg_flow_us;
        case 1: return r.avg_stretch;
        case 2: return r.flow_p99_us;
        case 3: return r.stretch_p99;
        case 4: return r.func_avg_flow_us;
        default: return r.func_avg_stretch;
    }
}

inline constexpr std::array<const char*, 6> metric_names = {"AF", "AS", "F99", "S99", "FF", "FS"};

} // namespace detail

inline void write_experiment_outputs(const std::vector<RunRow>& rows, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);

    auto row_context = [](const RunRow& row) {
        MetricRowContext ctx;
        ctx.policy = row.spec.family_name();
        ctx.variant = row.spec.variant_name();
        ctx.processors = row.processors;
        ctx.load = row.load;
        ctx.minutes = row.minutes;
        ctx.seed = row.instance_seed;
        ctx.below_target = row.below_target;
        return ctx;
    };

    {
        std::ofstream raw = open_output((dir / "raw.csv").string());
        raw << metric_row_header << '\n';
        for (const RunRow& row : rows) raw << format_metric_row(row_context(row), row.raw) << '\n';
    }
    {
        std::ofstream norm = open_output((dir / "normalized.csv").string());
        norm << metric_row_header << '\n';
        for (const RunRow& row : rows)
            norm << format_metric_row(row_context(row), row.normalized) << '\n';
    }

    std::ofstream summary = open_output((dir / "summary.csv").string());
    summary << "policy,variant,m,load,T_min,space,metric,min,q1,median,q3,max,n\n";
    // group rows by (config, policy) preserving first-seen order
    std::vector<std::pair<std::string, std::vector<const RunRow*>>> groups;
    for (const RunRow& row : rows) {
        const std::string key = row.spec.to_string() + "|" + std::to_string(row.processors) + "|" +
                                format_double(row.load) + "|" + std::to_string(row.minutes);
        bool found = false;
        for (auto& g : groups)
            if (g.first == key) {
                g.second.push_back(&row);
                found = true;
                break;
            }
        if (!found) groups.push_back({key, {&row}});
    }
    for (const auto& g : groups) {
        const RunRow& head = *g.second.front();
        for (int space = 0; space < 2; ++space) {
            for (int metric = 0; metric < 6; ++metric) {
                std::vector<double> values;
                values.reserve(g.second.size());
                for (const RunRow* row : g.second)
                    values.push_back(
                        detail::metric_field(space == 0 ? row->raw : row->normalized, metric));
                const BoxStats bs = box_stats(std::move(values));
                summary << head.spec.family_name() << ',' << head.spec.variant_name() << ','
                        << head.processors << ',' << format_double(head.load) << ','
                        << head.minutes << ',' << (space == 0 ? "raw" : "normalized") << ','
                        << detail::metric_names[static_cast<std::size_t>(metric)] << ','
                        << format_double(bs.min) << ',' << format_double(bs.q1) << ','
                        << format_double(bs.median) << ',' << format_double(bs.q3) << ','
                        << format_double(bs.max) << ',' << bs.n << '\n';
            }
        }
    }
}

struct MetricRow {
    std::string policy;
    std::string variant;
    int processors{0};
    double load{0};
    int minutes{0};
    std::uint64_t seed{0};
    MetricReport report;
    bool below_target{false};
};

inline std::vector<MetricRow> load_metric_rows(const std::string& path) {
    std::ifstream in = open_input(path);
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != metric_row_header)
        throw std::runtime_error("bad metric header in " + path);
    std::vector<MetricRow> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view body = strip_cr(line);
        if (body.empty()) continue;
        const auto f = split_csv(body);
        if (f.size() != 13)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 13 fields");
        MetricRow row;
        row.policy = f[0];
        row.variant = f[1];
        std::int64_t iv = 0;
        std::uint64_t uv = 0;
        bool ok = parse_int(f[2], iv);
        row.processors = static_cast<int>(iv);
        ok = ok && parse_double(f[3], row.load);
        ok = ok && parse_int(f[4], iv);
        row.minutes = static_cast<int>(iv);
        ok = ok && parse_uint(f[5], uv);
        row.seed = uv;
        ok = ok && parse_double(f[6], row.report.avg_flow_us);
        ok = ok && parse_double(f[7], row.report.avg_stretch);
        ok = ok && parse_double(f[8], row.report.flow_p99_us);
        ok = ok && parse_double(f[9], row.report.stretch_p99);
        ok = ok && parse_double(f[10], row.report.func_avg_flow_us);
        ok = ok && parse_double(f[11], row.report.func_avg_stretch);
        if (!ok || (f[12] != "0" && f[12] != "1"))
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed row");
        row.below_target = f[12] == "1";
        out.push_back(std::move(row));
    }
    return out;
}

// One file per metric, one row of box statistics per (policy, variant,
// m, load, T_min) group, groups in first-seen order.
inline void write_report(const std::vector<MetricRow>& rows, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    std::vector<std::pair<std::string, std::vector<const MetricRow*>>> groups;
    for (const MetricRow& row : rows) {
        const std::string key = row.policy + "|" + row.variant + "|" +
                                std::to_string(row.processors) + "|" + format_double(row.load) +
                                "|" + std::to_string(row.minutes);
        bool found = false;
        for (auto& g : groups)
            if (g.first == key) {
                g.second.push_back(&row);
                found = true;
                break;
            }
        if (!found) groups.push_back({key, {&row}});
    }
    for (int metric = 0; metric < 6; ++metric) {
        const std::string name = detail::metric_names[static_cast<std::size_t>(metric)];
        std::ofstream out = open_output((dir / (name + ".csv")).string());
        out << "policy,variant,m,load,T_min,min,q1,median,q3,max,n\n";
        for (const auto& g : groups) {
            const MetricRow& head = *g.second.front();
            std::vector<double> values;
            values.reserve(g.second.size());
            for (const MetricRow* row : g.second)
                values.push_back(detail::metric_field(row->report, metric));
            const BoxStats bs = box_stats(std::move(values));
            out << head.policy << ',' << head.variant << ',' << head.processors << ','
                << format_double(head.load) << ',' << head.minutes << ',' << format_double(bs.min)
                << ',' << format_double(bs.q1) << ',' << format_double(bs.median) << ','
                << format_double(bs.q3) << ',' << format_double(bs.max) << ',' << bs.n << '\n';
        }
    }
}

} // namespace faasched
