#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include <faasched/io.hpp>

using namespace faasched;

namespace {

// Fresh scratch directory per run; removed up front so stale files from an
// aborted run cannot leak into assertions.
std::filesystem::path scratch_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "faasched-io-tests";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

FunctionProfile profile(FunctionId id, const std::string& key, std::vector<std::int64_t> rates,
                        std::array<Duration, 7> knots) {
    FunctionProfile p;
    p.id = id;
    p.key = key;
    p.rates = std::move(rates);
    p.durations = DurationPercentiles::from_knots(knots);
    return p;
}

StoredInstance sample_stored() {
    StoredInstance stored;
    stored.seed = 0xdeadbeef1234ULL;
    stored.below_target = true;
    Instance& inst = stored.instance;
    inst.horizon = 2 * us_per_minute;
    inst.processors = 4;
    inst.profiles.push_back(
        profile(0, "alpha", {3, 0}, {1'000, 1'000, 2'000, 4'000, 8'000, 20'000, 50'000}));
    inst.profiles.push_back(
        profile(1, "beta", {0, 7}, {500, 600, 700, 800, 900, 1'000, 1'100}));
    inst.invocations = {
        Invocation{0, 0, 0, 4'000},
        Invocation{1, 1, 250, 900},
        Invocation{2, 0, 60'000'000, 17'345},
    };
    return stored;
}

} // namespace

TEST_CASE("meta path derivation") {
    CHECK(meta_path_for("inst.csv") == "inst.meta");
    CHECK(meta_path_for("runs/day3/inst.csv") == "runs/day3/inst.meta");
    CHECK(meta_path_for("inst.dat") == "inst.dat.meta");
}

TEST_CASE("instance round trip is exact") {
    const auto dir = scratch_dir();
    const std::string path = (dir / "inst.csv").string();
    const StoredInstance stored = sample_stored();
    save_instance(stored, path);
    CHECK(std::filesystem::exists(dir / "inst.meta"));

    const StoredInstance loaded = load_instance(path);
    CHECK(loaded.instance == stored.instance);
    CHECK(loaded.seed == stored.seed);
    CHECK(loaded.below_target == stored.below_target);
    CHECK(validate_instance(loaded.instance).empty());
}

TEST_CASE("instance loading rejects damaged files") {
    const auto dir = scratch_dir();
    const std::string path = (dir / "inst.csv").string();
    save_instance(sample_stored(), path);

    SECTION("wrong csv header") {
        std::ofstream out(path, std::ios::trunc);
        out << "seq,func,release,processing\n0,0,0,1000\n";
        out.close();
        CHECK_THROWS_AS(load_instance(path), std::runtime_error);
    }
    SECTION("missing sidecar key") {
        std::ifstream in(meta_path_for(path));
        std::string meta((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        const auto pos = meta.find("processors=");
        REQUIRE(pos != std::string::npos);
        meta.erase(pos, meta.find('\n', pos) - pos + 1);
        std::ofstream out(meta_path_for(path), std::ios::trunc);
        out << meta;
        out.close();
        CHECK_THROWS_WITH(load_instance(path),
                          Catch::Matchers::ContainsSubstring("processors"));
    }
    SECTION("unparsable invocation row") {
        std::ofstream out(path, std::ios::app);
        out << "9,0,abc,1000\n";
        out.close();
        CHECK_THROWS_AS(load_instance(path), std::runtime_error);
    }
}

TEST_CASE("completion records round trip") {
    const auto dir = scratch_dir();
    const std::string path = (dir / "records.csv").string();
    const std::vector<CompletionRecord> records = {
        CompletionRecord{0, 0, 0, 4'000, 4'000},
        CompletionRecord{1, 1, 250, 9'000, 900},
        CompletionRecord{2, 0, 1'000, 31'000, 17'345},
    };
    save_completions(records, path);
    CHECK(load_completions(path) == records);
}

TEST_CASE("completion loading tolerates CRLF and blank lines") {
    const auto dir = scratch_dir();
    const std::string path = (dir / "crlf.csv").string();
    std::ofstream out(path, std::ios::binary);
    out << "seq,func,release_us,completion_us,processing_us\r\n";
    out << "5,2,100,900,800\r\n";
    out << "\r\n";
    out.close();
    const auto records = load_completions(path);
    REQUIRE(records.size() == 1);
    CHECK(records[0] == (CompletionRecord{5, 2, 100, 900, 800}));
}

TEST_CASE("completion loading rejects a foreign header") {
    const auto dir = scratch_dir();
    const std::string path = (dir / "bad.csv").string();
    std::ofstream out(path);
    out << "seq,func,release_us,processing_us\n";
    out.close();
    CHECK_THROWS_AS(load_completions(path), std::runtime_error);
}

TEST_CASE("profile pool json round trip") {
    const auto dir = scratch_dir();
    const std::string path = (dir / "profiles.json").string();
    ProfilePool pool;
    pool.day = 3;
    pool.profiles.push_back(
        profile(0, "f-one", {0, 0, 4}, {1'000, 2'000, 3'000, 4'000, 5'000, 6'000, 7'000}));
    pool.profiles.push_back(
        profile(1, "f-two", {12, 1, 0}, {2'500, 2'500, 2'500, 2'500, 2'500, 2'500, 2'500}));
    save_profiles(pool, path);

    const ProfilePool loaded = load_profiles(path);
    CHECK(loaded.day == 3);
    REQUIRE(loaded.profiles.size() == 2);
    CHECK(loaded.profiles[0] == pool.profiles[0]);
    CHECK(loaded.profiles[1] == pool.profiles[1]);
}

TEST_CASE("profile pool loading insists on seven knots") {
    const auto dir = scratch_dir();
    const std::string path = (dir / "short.json").string();
    std::ofstream out(path);
    out << R"({"day":1,"functions":[{"key":"x","rates":[1],"percentiles_us":[1,2,3]}]})";
    out.close();
    CHECK_THROWS_WITH(load_profiles(path), Catch::Matchers::ContainsSubstring("7 percentile"));
}

TEST_CASE("metric rows render with stable formatting") {
    CHECK(std::string(metric_row_header) ==
          "policy,variant,m,load,T_min,seed,AF_us,AS,F99_us,S99,FF_us,FS,below_target");

    MetricRowContext ctx;
    ctx.policy = "sept";
    ctx.variant = "re";
    ctx.processors = 20;
    ctx.load = 0.9;
    ctx.minutes = 30;
    ctx.seed = 7;
    ctx.below_target = false;

    MetricReport rep;
    rep.avg_flow_us = 12'500.0;
    rep.avg_stretch = 1.25;
    rep.flow_p99_us = 30'000.0;
    rep.stretch_p99 = 2.0;
    rep.func_avg_flow_us = 22'500.0;
    rep.func_avg_stretch = 1.5;
    CHECK(format_metric_row(ctx, rep) == "sept,re,20,0.9,30,7,12500,1.25,30000,2,22500,1.5,0");

    ctx.variant = "10ms";
    ctx.load = 0.7;
    ctx.below_target = true;
    rep.avg_stretch = 0.5;
    CHECK(format_metric_row(ctx, rep) == "sept,10ms,20,0.7,30,7,12500,0.5,30000,2,22500,1.5,1");
}
