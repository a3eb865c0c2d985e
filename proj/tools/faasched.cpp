// Command line front end. Each subcommand maps onto one library entry point;
// all real logic lives under include/faasched/.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include <faasched/experiment.hpp>

namespace {

using namespace faasched;

TraceSchema schema_from(const std::string& mapping_path) {
    if (mapping_path.empty()) return {};
    std::ifstream in = open_input(mapping_path);
    return TraceSchema::from_kv(parse_kv(in));
}

void report_row_errors(const std::vector<RowError>& errors, const std::string& what) {
    if (errors.empty()) return;
    std::cerr << what << ": skipped " << errors.size() << " malformed rows";
    const std::size_t shown = std::min<std::size_t>(errors.size(), 5);
    for (std::size_t i = 0; i < shown; ++i)
        std::cerr << "\n  line " << errors[i].line << ": " << errors[i].reason;
    if (errors.size() > shown) std::cerr << "\n  ...";
    std::cerr << '\n';
}

int cmd_analyze_trace(const std::string& invocations_path, const std::string& mapping_path,
                      int day, std::size_t samples, std::uint64_t seed,
                      const std::string& out_dir) {
    const TraceSchema schema = schema_from(mapping_path);
    std::ifstream in = open_input(invocations_path);
    std::vector<RowError> errors;
    const auto rows = parse_invocation_trace(in, day, schema, &errors);
    report_row_errors(errors, invocations_path);

    const DeltaSampleResult result = sample_delta_pairs(rows, samples, seed);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);

    {
        std::ofstream out = open_output((dir / "delta_samples.csv").string());
        out << "key,day,minute,lambda_prev,lambda_cur,delta\n";
        for (const DeltaSample& s : result.samples)
            out << s.key << ',' << s.day << ',' << s.minute << ',' << s.lambda_prev << ','
                << s.lambda_cur << ',' << format_double(s.delta) << '\n';
    }
    {
        std::vector<double> deltas;
        deltas.reserve(result.samples.size());
        for (const DeltaSample& s : result.samples) deltas.push_back(s.delta);
        std::sort(deltas.begin(), deltas.end());
        std::ofstream out = open_output((dir / "delta_cdf.csv").string());
        out << "delta,cum_fraction\n";
        for (std::size_t i = 0; i < deltas.size(); ++i)
            out << format_double(deltas[i]) << ','
                << format_double(static_cast<double>(i + 1) / static_cast<double>(deltas.size()))
                << '\n';
    }
    {
        std::ofstream out = open_output((dir / "delta_vs_lambda.csv").string());
        out << "lambda_prev,delta\n";
        for (const DeltaSample& s : result.samples)
            out << s.lambda_prev << ',' << format_double(s.delta) << '\n';
    }

    std::cout << "functions: " << rows.size() << '\n'
              << "eligible pairs: " << result.population << '\n'
              << "samples written: " << result.samples.size()
              << (result.exhausted ? " (population exhausted)" : "") << '\n';
    return 0;
}

int cmd_preprocess(const std::string& trace_dir, const std::string& mapping_path,
                   const std::vector<int>& days, const std::string& out_dir) {
    const TraceSchema schema = schema_from(mapping_path);
    const std::filesystem::path dir(trace_dir);

    std::vector<RawInvocationRow> invocations;
    std::vector<RawDurationRow> durations;
    std::vector<int> found;
    for (int day : days) {
        const auto inv_path = dir / schema.file_for_day(schema.invocations_file, day);
        const auto dur_path = dir / schema.file_for_day(schema.durations_file, day);
        if (!std::filesystem::exists(inv_path) || !std::filesystem::exists(dur_path)) {
            std::cerr << "day " << day << ": files missing, skipped\n";
            continue;
        }
        std::vector<RowError> errors;
        std::ifstream inv_in = open_input(inv_path.string());
        auto rows = parse_invocation_trace(inv_in, day, schema, &errors);
        report_row_errors(errors, inv_path.string());
        errors.clear();
        invocations.insert(invocations.end(), std::make_move_iterator(rows.begin()),
                           std::make_move_iterator(rows.end()));
        std::ifstream dur_in = open_input(dur_path.string());
        auto drows = parse_duration_trace(dur_in, day, schema, &errors);
        report_row_errors(errors, dur_path.string());
        durations.insert(durations.end(), std::make_move_iterator(drows.begin()),
                         std::make_move_iterator(drows.end()));
        found.push_back(day);
    }
    if (found.empty()) {
        std::cerr << "no usable trace days under " << trace_dir << '\n';
        return 1;
    }

    std::filesystem::create_directories(out_dir);
    for (int day : found) {
        PreprocessStats stats;
        ProfilePool pool{day, preprocess(invocations, durations, day, &stats)};
        char name[32];
        std::snprintf(name, sizeof(name), "profiles_d%02d.json", day);
        save_profiles(pool, (std::filesystem::path(out_dir) / name).string());
        std::cout << "day " << day << ": " << stats.invocation_rows_in << " rows in, dropped "
                  << stats.dropped_multiple_records << " multi-record, " << stats.dropped_non_http
                  << " non-http, " << stats.dropped_missing_durations << " without durations, "
                  << stats.profiles_out << " profiles out\n";
    }
    return 0;
}

int cmd_generate(const std::string& profiles_path, int processors, double load, int minutes,
                 double tolerance, std::uint64_t seed, const std::string& out_path) {
    const ProfilePool pool = load_profiles(profiles_path);
    const std::size_t pool_minutes =
        pool.profiles.empty() ? 0 : pool.profiles.front().rates.size();
    if (pool_minutes < static_cast<std::size_t>(minutes)) {
        std::cerr << "profile pool covers " << pool_minutes << " minutes, need " << minutes << '\n';
        return 1;
    }
    std::mt19937_64 rng = make_rng(mix_seed(seed, 0x77696e64ULL));
    const std::size_t start_min =
        uniform_below(rng, pool_minutes - static_cast<std::size_t>(minutes) + 1);
    const auto sliced = window_slice(pool.profiles, start_min, static_cast<std::size_t>(minutes));

    GenerationConfig gen;
    gen.window_start = 0;
    gen.window_end = static_cast<TimePoint>(minutes) * us_per_minute;
    gen.processors = processors;
    gen.load = load;
    gen.tolerance = tolerance;
    gen.seed = mix_seed(seed, 0x66696c6cULL);
    const GenerationResult result = generate_instance(sliced, gen);

    save_instance(StoredInstance{result.instance, seed, result.below_target}, out_path);
    std::cout << "window start minute: " << start_min << '\n'
              << "functions in window: " << sliced.size() << '\n'
              << "invocations: " << result.instance.invocations.size() << '\n'
              << "load: " << format_double(static_cast<double>(result.total_load) /
                                           (static_cast<double>(processors) *
                                            static_cast<double>(gen.window_end)))
              << (result.below_target ? " (below target)" : "") << '\n';
    return 0;
}

int cmd_simulate(const std::string& instance_path, const std::string& policy,
                 const std::string& records_path) {
    const StoredInstance stored = load_instance(instance_path);
    const auto violations = validate_instance(stored.instance);
    if (!violations.empty()) {
        std::cerr << instance_path << " failed validation:\n";
        for (const Violation& v : violations)
            std::cerr << "  [" << v.index << "] " << v.reason << '\n';
        return 1;
    }
    const PolicySpec spec = PolicySpec::parse(policy);
    const auto records = simulate(stored.instance, spec);
    if (!records_path.empty()) save_completions(records, records_path);

    MetricRowContext ctx;
    ctx.policy = spec.family_name();
    ctx.variant = spec.variant_name();
    ctx.processors = stored.instance.processors;
    const TimePoint horizon = stored.instance.horizon;
    Duration work = 0;
    for (const Invocation& inv : stored.instance.invocations) work += inv.processing;
    ctx.load = static_cast<double>(work) /
               (static_cast<double>(stored.instance.processors) * static_cast<double>(horizon));
    ctx.minutes = static_cast<int>(horizon / us_per_minute);
    ctx.seed = stored.seed;
    ctx.below_target = stored.below_target;
    std::cout << metric_row_header << '\n' << format_metric_row(ctx, aggregate(records)) << '\n';
    return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_dir, int threads) {
    std::ifstream in = open_input(config_path);
    nlohmann::json doc;
    in >> doc;
    ExperimentConfig cfg = ExperimentConfig::from_json(doc);
    if (threads > 0) cfg.threads = threads;
    const auto rows = run_experiment(cfg);
    write_experiment_outputs(rows, out_dir);
    std::cout << rows.size() << " runs written to " << out_dir << '\n';
    return 0;
}

int cmd_report(const std::string& input_path, const std::string& out_dir) {
    const auto rows = load_metric_rows(input_path);
    write_report(rows, out_dir);
    std::cout << rows.size() << " rows summarised into " << out_dir << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"single-node FaaS scheduling simulator"};
    app.require_subcommand(1);

    std::string invocations_path, mapping_path, out_dir = "out";
    int day = 1;
    std::size_t samples = 50000;
    std::uint64_t seed = 1;
    auto* analyze = app.add_subcommand(
        "analyze-trace", "sample minute-over-minute arrival rate changes from a trace");
    analyze->add_option("--invocations", invocations_path, "per-function invocation counts CSV")
        ->required();
    analyze->add_option("--mapping", mapping_path, "column mapping key=value file");
    analyze->add_option("--day", day, "day label for the output rows");
    analyze->add_option("--samples", samples, "sample size");
    analyze->add_option("--seed", seed, "sampling seed");
    analyze->add_option("--out", out_dir, "output directory");

    std::string trace_dir;
    std::vector<int> days{1};
    auto* prep = app.add_subcommand("preprocess", "turn raw trace days into profile pools");
    prep->add_option("--trace-dir", trace_dir, "directory holding the trace CSVs")->required();
    prep->add_option("--mapping", mapping_path, "column mapping key=value file");
    prep->add_option("--days", days, "day numbers to process");
    prep->add_option("--out", out_dir, "output directory");

    std::string profiles_path, out_path = "instance.csv";
    int processors = 20;
    double load = 0.9;
    int minutes = 30;
    double tolerance = 0.02;
    auto* gen = app.add_subcommand("generate", "draw one workload instance from a profile pool");
    gen->add_option("--profiles", profiles_path, "profile pool JSON")->required();
    gen->add_option("--processors", processors, "processor count");
    gen->add_option("--load", load, "target system load");
    gen->add_option("--minutes", minutes, "frame length in minutes");
    gen->add_option("--tolerance", tolerance, "admission overshoot tolerance");
    gen->add_option("--seed", seed, "generation seed");
    gen->add_option("--out", out_path, "instance CSV path");

    std::string instance_path, policy = "fifo", records_path;
    auto* sim = app.add_subcommand("simulate", "run one policy over a stored instance");
    sim->add_option("--instance", instance_path, "instance CSV path")->required();
    sim->add_option("--policy", policy, "policy spec, e.g. fifo, rr:10ms, sept:re, serpt:for");
    sim->add_option("--records", records_path, "write per-invocation completion records here");

    std::string config_path;
    int threads = 0;
    auto* exp = app.add_subcommand("experiment", "sweep a policy grid from a JSON config");
    exp->add_option("--config", config_path, "experiment config JSON")->required();
    exp->add_option("--out", out_dir, "output directory");
    exp->add_option("--threads", threads, "worker threads (overrides the config)");

    std::string input_path;
    auto* rep = app.add_subcommand("report", "box statistics per metric from a run table");
    rep->add_option("--input", input_path, "raw.csv or normalized.csv from an experiment")
        ->required();
    rep->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed())
            return cmd_analyze_trace(invocations_path, mapping_path, day, samples, seed, out_dir);
        if (prep->parsed()) return cmd_preprocess(trace_dir, mapping_path, days, out_dir);
        if (gen->parsed())
            return cmd_generate(profiles_path, processors, load, minutes, tolerance, seed,
                                out_path);
        if (sim->parsed()) return cmd_simulate(instance_path, policy, records_path);
        if (exp->parsed()) return cmd_experiment(config_path, out_dir, threads);
        if (rep->parsed()) return cmd_report(input_path, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
