#include <catch2/catch_amalgamated.hpp>

#include <faasched/core.hpp>

using namespace faasched;

TEST_CASE("ratio comparison is exact") {
    CHECK(Ratio{1, 3} == Ratio{2, 6});
    CHECK(Ratio{1, 3} < Ratio{34, 100});
    CHECK(Ratio{34, 100} != Ratio{1, 3});
    CHECK(Ratio{0, 1} <= Ratio{0, 5});
    CHECK(compare(Ratio{7, 2}, Ratio{7, 2}) == 0);

    // cross multiplication must survive values near the 64-bit limit
    const std::int64_t big = 3'000'000'000'000'000'000;
    CHECK(Ratio{big, big - 1} != Ratio{big - 1, big});
    CHECK(Ratio{big - 1, big} < Ratio{big, big - 1});
}

TEST_CASE("ratio max picks the larger side") {
    CHECK(max(Ratio{1, 2}, Ratio{2, 3}) == Ratio{2, 3});
    CHECK(max(Ratio{5, 1}, Ratio{5, 1}) == Ratio{5, 1});
    CHECK(max(Ratio::of(7), Ratio::of(3)) == Ratio::of(7));
}

TEST_CASE("minute arithmetic") {
    CHECK(minute_index(0) == 1);
    CHECK(minute_index(59'999'999) == 1);
    CHECK(minute_index(60'000'000) == 2);
    CHECK(minute_index(119'999'999) == 2);
    CHECK(minute_start(1) == 0);
    CHECK(minute_start(3) == 120'000'000);
    CHECK(from_millis(10) == 10'000);
}

TEST_CASE("percentile knots round trip") {
    DurationPercentiles p{1, 2, 3, 4, 5, 6, 7};
    CHECK(DurationPercentiles::from_knots(p.knots()) == p);
}

namespace {

Instance small_valid_instance() {
    Instance inst;
    inst.horizon = us_per_minute;
    inst.processors = 2;
    FunctionProfile f;
    f.id = 0;
    f.key = "fn";
    f.rates = {3};
    f.durations = DurationPercentiles{100, 200, 300, 400, 500, 600, 700};
    inst.profiles.push_back(f);
    inst.invocations = {
        Invocation{0, 0, 0, 500},
        Invocation{1, 0, 1'000, 500},
        Invocation{2, 0, 1'000, 300},
    };
    return inst;
}

bool flags(const Instance& inst, const std::string& needle) {
    for (const Violation& v : validate_instance(inst))
        if (v.reason.find(needle) != std::string::npos) return true;
    return false;
}

} // namespace

TEST_CASE("validate_instance accepts a well-formed instance") {
    CHECK(validate_instance(small_valid_instance()).empty());
}

TEST_CASE("validate_instance flags each defect class") {
    Instance inst = small_valid_instance();
    inst.processors = 0;
    CHECK(flags(inst, "processors"));

    inst = small_valid_instance();
    inst.horizon = 0;
    CHECK(flags(inst, "positive"));

    inst = small_valid_instance();
    inst.horizon = us_per_minute + 5;
    CHECK(flags(inst, "whole number of minutes"));

    inst = small_valid_instance();
    inst.profiles[0].id = 3;
    CHECK(flags(inst, "0..n-1"));

    inst = small_valid_instance();
    inst.profiles[0].rates = {1, 1};
    CHECK(flags(inst, "rates length"));

    inst = small_valid_instance();
    inst.profiles[0].rates = {-1};
    CHECK(flags(inst, "non-negative"));

    inst = small_valid_instance();
    inst.profiles[0].durations.p50 = 50; // below p25
    CHECK(flags(inst, "non-decreasing"));

    inst = small_valid_instance();
    inst.profiles[0].durations = DurationPercentiles{0, 0, 0, 0, 0, 0, 0};
    CHECK(flags(inst, "p100"));

    inst = small_valid_instance();
    inst.invocations[0].func = 9;
    CHECK(flags(inst, "reference a profile"));

    inst = small_valid_instance();
    inst.invocations[0].release = -1;
    CHECK(flags(inst, "[0, horizon)"));

    inst = small_valid_instance();
    inst.invocations[2].release = inst.horizon;
    CHECK(flags(inst, "[0, horizon)"));

    inst = small_valid_instance();
    inst.invocations[1].processing = 0;
    CHECK(flags(inst, "processing"));

    inst = small_valid_instance();
    std::swap(inst.invocations[0], inst.invocations[2]);
    CHECK(flags(inst, "sorted"));

    inst = small_valid_instance();
    inst.invocations[2].seq = 1;
    CHECK(flags(inst, "unique"));
}
