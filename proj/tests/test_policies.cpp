#include <catch2/catch_amalgamated.hpp>

#include <deque>

#include <faasched/policies.hpp>
#include <faasched/rng.hpp>

using namespace faasched;

namespace {

DurationPercentiles constant_knots(Duration c) { return DurationPercentiles{c, c, c, c, c, c, c}; }

Instance policy_instance(int functions, std::vector<Duration> durations_f0 = {},
                         std::vector<std::int64_t> rates = {1}) {
    Instance inst;
    inst.horizon = static_cast<TimePoint>(rates.size()) * us_per_minute;
    inst.processors = 1;
    for (int f = 0; f < functions; ++f) {
        FunctionProfile p;
        p.id = f;
        p.key = "p" + std::to_string(f);
        p.rates = rates;
        p.durations = constant_knots(10'000);
        inst.profiles.push_back(std::move(p));
    }
    SeqNo seq = 0;
    for (Duration d : durations_f0)
        inst.invocations.push_back(Invocation{seq++, 0, 0, d});
    return inst;
}

PositionQuery query(FunctionId f, Duration elapsed, TimePoint now) {
    return PositionQuery(f, 0, 0, elapsed, now, 0, false);
}

} // namespace

TEST_CASE("policy specs parse and print canonically") {
    struct Row {
        const char* in;
        PolicyFamily family;
        EstimatorVariant variant;
        bool preemptive;
        const char* canonical;
    };
    const Row rows[] = {
        {"fifo", PolicyFamily::fifo, EstimatorVariant::none, false, "fifo"},
        {"spt", PolicyFamily::spt, EstimatorVariant::exact, false, "spt"},
        {"srpt", PolicyFamily::srpt, EstimatorVariant::exact, true, "srpt"},
        {"rr:10ms", PolicyFamily::round_robin, EstimatorVariant::none, true, "rr:10ms"},
        {"rr:1000ms", PolicyFamily::round_robin, EstimatorVariant::none, true, "rr:1000ms"},
        {"sept:re", PolicyFamily::sept, EstimatorVariant::reactive, false, "sept:re"},
        {"sept:for", PolicyFamily::sept, EstimatorVariant::foresight, false, "sept:for"},
        {"serpt:re-lim", PolicyFamily::serpt, EstimatorVariant::reactive_limited, true,
         "serpt:re-lim:1000"},
        {"serpt:re-lim:500", PolicyFamily::serpt, EstimatorVariant::reactive_limited, true,
         "serpt:re-lim:500"},
        {"fcn:re", PolicyFamily::fair_count, EstimatorVariant::reactive, true, "fcn:re"},
        {"fc#:re", PolicyFamily::fair_count, EstimatorVariant::reactive, true, "fcn:re"},
        {"fcp:for:np", PolicyFamily::fair_work, EstimatorVariant::foresight, false, "fcp:for:np"},
        {"fcn:re-lim:25:np", PolicyFamily::fair_count, EstimatorVariant::reactive_limited, false,
         "fcn:re-lim:25:np"},
    };
    for (const Row& r : rows) {
        const PolicySpec spec = PolicySpec::parse(r.in);
        INFO(r.in);
        CHECK(spec.family == r.family);
        CHECK(spec.variant == r.variant);
        CHECK(spec.preemptive == r.preemptive);
        CHECK(spec.to_string() == r.canonical);
        CHECK(PolicySpec::parse(spec.to_string()).to_string() == r.canonical);
    }
    CHECK(PolicySpec::parse("rr:10ms").quantum == 10'000);
    CHECK(PolicySpec::parse("serpt:re-lim:500").history_cap == 500);
    CHECK(PolicySpec::parse("spt").clairvoyant());
    CHECK_FALSE(PolicySpec::parse("sept:re").clairvoyant());
}

TEST_CASE("bad policy specs are rejected") {
    for (const char* bad : {"", "rr", "rr:0ms", "rr:xms", "sept", "sept:zz", "fifo:x",
                            "serpt:re:np", "fcn:re:np:x", "blah", "fcn:re-lim:0"})
        CHECK_THROWS_AS(PolicySpec::parse(bad), std::invalid_argument);
    CHECK_THROWS_AS(make_policy(PolicySpec::parse("rr:10ms"), policy_instance(1)),
                    ContractViolation);
}

TEST_CASE("mean estimator learns per function with a global fallback") {
    MeanEstimator est(2);
    CHECK(est.estimate(0) == Ratio{0, 1}); // cold start
    est.add(0, 10'000);
    est.add(0, 10'000);
    est.add(0, 10'000);
    CHECK(est.estimate(0) == Ratio::of(10'000));
    // function 1 has no history and borrows the global mean
    est.add(0, 70'000);
    CHECK(est.estimate(1) == Ratio{100'000, 4});
    CHECK(est.estimate(1) == Ratio::of(25'000));
}

TEST_CASE("bounded mean estimator evicts oldest first") {
    MeanEstimator est(1, 3);
    est.add(0, 1'000);
    est.add(0, 2'000);
    est.add(0, 3'000);
    CHECK(est.estimate(0) == Ratio::of(2'000));
    est.add(0, 4'000);
    CHECK(est.estimate(0) == Ratio::of(3'000)); // window is now {2,3,4} ms
}

TEST_CASE("sept positions are mean estimates") {
    Instance inst = policy_instance(2);
    auto policy = make_policy(PolicySpec::parse("sept:re"), inst);
    CHECK(policy->position(query(0, 0, 0)) == Ratio{0, 1});
    for (int i = 0; i < 3; ++i) policy->update(Invocation{i, 0, 0, 10'000}, 10'000);
    CHECK(policy->position(query(0, 0, 30'000)) == Ratio::of(10'000));
    policy->update(Invocation{3, 0, 0, 70'000}, 80'000);
    CHECK(policy->position(query(1, 0, 80'000)) == Ratio{100'000, 4});
}

TEST_CASE("sept foresight uses the exact distribution mean and ignores updates") {
    Instance inst = policy_instance(1);
    inst.profiles[0].durations = DurationPercentiles{0, 100, 100, 100, 100, 100, 200};
    auto policy = make_policy(PolicySpec::parse("sept:for"), inst);
    CHECK(policy->position(query(0, 0, 0)) == Ratio{20'000, 200});
    policy->update(Invocation{0, 0, 0, 999'999}, 999'999);
    CHECK(policy->position(query(0, 0, 0)) == Ratio::of(100));
}

TEST_CASE("serpt averages the residuals of qualifying samples") {
    Instance inst = policy_instance(1, {5'000, 10'000, 20'000});
    auto policy = make_policy(PolicySpec::parse("serpt:re"), inst);
    CHECK(policy->position(query(0, 0, 0)) == Ratio{0, 1});
    for (const Invocation& inv : inst.invocations) policy->update(inv, inv.release + inv.processing);

    // samples >= 8ms are 10ms and 20ms; mean residual (2 + 12) / 2 = 7ms
    CHECK(policy->position(query(0, 8'000, 50'000)) == Ratio::of(7'000));
    // with no service yet this is plain sept on the same history
    CHECK(policy->position(query(0, 0, 50'000)) == Ratio{35'000, 3});
    // past every sample the per-function history is empty and the global pool
    // is the same pool, so the estimate drops to zero via the final fallback
    CHECK(policy->position(query(0, 21'000, 50'000)) == Ratio{0, 1});
}

TEST_CASE("serpt borrows the global pool for cold functions") {
    Instance inst = policy_instance(2, {6'000, 12'000});
    auto policy = make_policy(PolicySpec::parse("serpt:re"), inst);
    for (const Invocation& inv : inst.invocations) policy->update(inv, inv.release + inv.processing);
    CHECK(policy->position(query(1, 0, 0)) == Ratio{18'000, 2});
    CHECK(policy->position(query(1, 7'000, 0)) == Ratio::of(5'000));
}

TEST_CASE("bounded serpt history evicts oldest first") {
    Instance inst = policy_instance(1, {5'000, 10'000, 20'000});
    auto policy = make_policy(PolicySpec::parse("serpt:re-lim:2"), inst);
    for (const Invocation& inv : inst.invocations) policy->update(inv, inv.release + inv.processing);
    CHECK(policy->position(query(0, 0, 0)) == Ratio{30'000, 2}); // 5ms evicted
}

TEST_CASE("serpt foresight reads residuals off the distribution") {
    Instance inst = policy_instance(1);
    inst.profiles[0].durations = DurationPercentiles{1'000, 5'000, 20'000, 50'000, 90'000,
                                                     150'000, 200'000};
    const PiecewiseCdf cdf(inst.profiles[0].durations);
    auto policy = make_policy(PolicySpec::parse("serpt:for"), inst);
    for (Duration e : {0, 3'000, 60'000, 199'999})
        CHECK(policy->position(query(0, e, 0)) == Ratio::of(cdf.expected_remaining(e)));
}

TEST_CASE("serpt history rejects durations it never saw in the instance") {
    Instance inst = policy_instance(1, {5'000});
    auto policy = make_policy(PolicySpec::parse("serpt:re"), inst);
    CHECK_THROWS_AS(policy->update(Invocation{9, 0, 0, 777}, 777), ContractViolation);
}

namespace {

// Brute-force mirror of RemainingWorkHistory: flat vectors, linear scans.
class LiteralHistory {
public:
    LiteralHistory(std::size_t functions, std::int64_t cap) : funcs_(functions), cap_(cap) {}

    void add(FunctionId f, Duration p) {
        auto& w = funcs_.at(static_cast<std::size_t>(f));
        w.push_back(p);
        if (cap_ > 0 && static_cast<std::int64_t>(w.size()) > cap_) w.pop_front();
    }

    Ratio position(FunctionId f, Duration elapsed) const {
        Ratio r;
        if (mean_over(funcs_.at(static_cast<std::size_t>(f)), elapsed, r)) return r;
        std::deque<Duration> pooled;
        for (const auto& w : funcs_) pooled.insert(pooled.end(), w.begin(), w.end());
        if (mean_over(pooled, elapsed, r)) return r;
        return Ratio{0, 1};
    }

private:
    static bool mean_over(const std::deque<Duration>& w, Duration elapsed, Ratio& out) {
        std::int64_t c = 0, s = 0;
        for (Duration v : w)
            if (v >= elapsed) {
                ++c;
                s += v;
            }
        if (c == 0) return false;
        out = Ratio{s - c * elapsed, c};
        return true;
    }

    std::vector<std::deque<Duration>> funcs_;
    std::int64_t cap_;
};

} // namespace

TEST_CASE("indexed serpt history agrees with the literal scan") {
    std::mt19937_64 rng = make_rng(71);
    for (const std::int64_t cap : {0LL, 4LL}) {
        Instance inst;
        inst.horizon = us_per_minute;
        inst.processors = 1;
        for (int f = 0; f < 3; ++f) {
            FunctionProfile p;
            p.id = f;
            p.key = "f" + std::to_string(f);
            p.rates = {1};
            p.durations = constant_knots(10'000);
            inst.profiles.push_back(std::move(p));
        }
        for (int i = 0; i < 150; ++i)
            inst.invocations.push_back(
                Invocation{i, static_cast<FunctionId>(uniform_below(rng, 3)), 0,
                           1'000 * (1 + static_cast<Duration>(uniform_below(rng, 12)))});

        RemainingWorkHistory fast(inst, cap);
        LiteralHistory slow(3, cap);
        for (const Invocation& inv : inst.invocations) {
            if (uniform_below(rng, 3) != 0) {
                fast.add(inv.func, inv.processing);
                slow.add(inv.func, inv.processing);
            }
            const FunctionId f = static_cast<FunctionId>(uniform_below(rng, 3));
            const Duration e = static_cast<Duration>(uniform_below(rng, 15'000));
            INFO("cap " << cap << " func " << f << " elapsed " << e);
            CHECK(fast.position(f, e) == slow.position(f, e));
        }
    }
}

TEST_CASE("minute ledger forecasts from the previous minute") {
    MinuteLedger ledger(2, nullptr);
    CHECK(ledger.minute() == 1);
    CHECK(ledger.forecast(0) == 1); // first minute default
    CHECK(ledger.forecast(1) == 1);

    ledger.note_release(Invocation{0, 0, 0, 1});
    ledger.note_release(Invocation{1, 0, 1'000, 1});
    ledger.note_release(Invocation{2, 0, 2'000, 1});
    CHECK(ledger.observed_count(0) == 3);

    ledger.advance(2);
    CHECK(ledger.forecast(0) == 3);
    CHECK(ledger.forecast(1) == 0);
    CHECK(ledger.observed_count(0) == 0);

    ledger.advance(4); // two quiet minutes later the forecast decays to zero
    CHECK(ledger.forecast(0) == 0);
}

TEST_CASE("minute ledger with foresight reads the profile rates") {
    std::vector<FunctionProfile> profiles(1);
    profiles[0].id = 0;
    profiles[0].key = "f";
    profiles[0].rates = {4, 7};
    profiles[0].durations = constant_knots(1);
    MinuteLedger ledger(1, &profiles);
    CHECK(ledger.forecast(0) == 4);
    ledger.advance(2);
    CHECK(ledger.forecast(0) == 7);
    ledger.advance(3); // off the end of the frame there is no forecast
    CHECK(ledger.forecast(0) == 0);
}

TEST_CASE("minute ledger enforces its ordering contracts") {
    MinuteLedger ledger(1, nullptr);
    ledger.note_release(Invocation{0, 0, 5'000, 1});
    CHECK_THROWS_AS(ledger.note_release(Invocation{1, 0, 4'000, 1}), ContractViolation);
    ledger.advance(3);
    CHECK_THROWS_AS(ledger.advance(2), ContractViolation);
}

TEST_CASE("count-based fair choice takes the larger of forecast and observation") {
    Instance inst = policy_instance(1, {}, {5, 0});
    auto policy = make_policy(PolicySpec::parse("fcn:re"), inst);
    for (SeqNo s = 0; s < 3; ++s)
        policy->on_release(Invocation{s, 0, 1'000 * s, 1'000});
    CHECK(policy->position(query(0, 0, 3'000)) == Ratio::of(3)); // max(1, 3)
    CHECK(policy->position(query(0, 0, us_per_minute + 1)) == Ratio::of(3)); // carried forecast
    CHECK(policy->position(query(0, 0, 2 * us_per_minute + 1)) == Ratio::of(0));
}

TEST_CASE("count-based fair choice with foresight reads true rates") {
    Instance inst = policy_instance(1, {}, {5, 2});
    auto policy = make_policy(PolicySpec::parse("fcn:for"), inst);
    CHECK(policy->position(query(0, 0, 0)) == Ratio::of(5));
    for (SeqNo s = 0; s < 7; ++s)
        policy->on_release(Invocation{s, 0, 1'000 * s, 1'000});
    CHECK(policy->position(query(0, 0, 10'000)) == Ratio::of(7)); // observation beat the forecast
    CHECK(policy->position(query(0, 0, us_per_minute)) == Ratio::of(2));
}

TEST_CASE("work-based fair choice with foresight counts released true work") {
    Instance inst = policy_instance(1, {}, {2, 1});
    auto policy = make_policy(PolicySpec::parse("fcp:for"), inst);
    // forecast: 2 calls/minute at the exact 10ms mean
    CHECK(policy->position(query(0, 0, 0)) == Ratio{2 * 2'000'000, 200});
    policy->on_release(Invocation{0, 0, 0, 5'000});
    policy->on_release(Invocation{1, 0, 1'000, 10'000});
    CHECK(policy->position(query(0, 0, 2'000)) == Ratio::of(20'000)); // max(2*10ms, 15ms)
    policy->on_release(Invocation{2, 0, 2'000, 10'000});
    CHECK(policy->position(query(0, 0, 3'000)) == Ratio::of(25'000)); // released work now leads
}

TEST_CASE("work-based fair choice learns mean work reactively") {
    Instance inst = policy_instance(1, {}, {2, 1});
    auto policy = make_policy(PolicySpec::parse("fcp:re"), inst);
    CHECK(policy->position(query(0, 0, 0)) == Ratio{0, 1}); // no estimate, no work
    policy->on_release(Invocation{0, 0, 0, 10'000});
    policy->on_release(Invocation{1, 0, 1'000, 10'000});
    // open calls carry no weight while the mean is unknown
    CHECK(policy->position(query(0, 0, 2'000)) == Ratio{0, 1});
    policy->update(Invocation{0, 0, 0, 10'000}, 11'000);
    // one settled call (10ms done) plus one open call at the 10ms estimate
    CHECK(policy->position(query(0, 0, 12'000)) == Ratio::of(20'000));
}

TEST_CASE("clairvoyant policies read the gated truth") {
    auto spt = make_policy(PolicySpec::parse("spt"), policy_instance(1));
    auto srpt = make_policy(PolicySpec::parse("srpt"), policy_instance(1));
    const PositionQuery q(0, 0, 0, 3'000, 9'000, 10'000, true);
    CHECK(spt->position(q) == Ratio::of(10'000));
    CHECK(srpt->position(q) == Ratio::of(7'000));

    const PositionQuery gated(0, 0, 0, 3'000, 9'000, 10'000, false);
    CHECK_THROWS_AS(spt->position(gated), ContractViolation);
}
