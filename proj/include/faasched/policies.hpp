#pragma once

// Scheduling policies. Each policy reduces to a position function: lower
// values run first, ties fall back to (release, seq). Estimator variants:
// reactive (re) learns from completions, optionally over a bounded window
// (re-lim), foresight (for) is handed the true distribution parameters.

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "core.hpp"
#include "csv.hpp"
#include "distribution.hpp"

namespace faasched {

enum class PolicyFamily { fifo, round_robin, sept, serpt, fair_count, fair_work, spt, srpt };
enum class EstimatorVariant { none, reactive, reactive_limited, foresight, exact };

struct PolicySpec {
    PolicyFamily family{PolicyFamily::fifo};
    EstimatorVariant variant{EstimatorVariant::none};
    Duration quantum{0};          // round robin only
    std::int64_t history_cap{1000}; // reactive_limited only
    bool preemptive{false};

    bool clairvoyant() const {
        return family == PolicyFamily::spt || family == PolicyFamily::srpt;
    }

    static PolicySpec parse(std::string_view text);
    std::string to_string() const;
    std::string family_name() const;
    std::string variant_name() const;
};

namespace detail {

inline std::vector<std::string_view> split_spec(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(':', start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

[[noreturn]] inline void bad_spec(std::string_view text, const char* why) {
    throw std::invalid_argument("bad policy spec '" + std::string(text) + "': " + why);
}

} // namespace detail

inline PolicySpec PolicySpec::parse(std::string_view text) {
    const auto tok = detail::split_spec(text);
    PolicySpec spec;
    std::size_t next = 1;
    const std::string_view head = tok[0];

    if (head == "fifo" || head == "spt" || head == "srpt" || head == "rr") {
        if (head == "fifo") {
            spec.family = PolicyFamily::fifo;
        } else if (head == "rr") {
            spec.family = PolicyFamily::round_robin;
            spec.preemptive = true;
            if (tok.size() < 2) detail::bad_spec(text, "rr needs a quantum, e.g. rr:10ms");
            std::string_view q = tok[next++];
            if (q.size() > 2 && q.substr(q.size() - 2) == "ms") q.remove_suffix(2);
            std::int64_t ms = 0;
            if (!parse_int(q, ms) || ms <= 0) detail::bad_spec(text, "quantum must be a positive ms count");
            spec.quantum = from_millis(ms);
        } else {
            spec.family = head == "spt" ? PolicyFamily::spt : PolicyFamily::srpt;
            spec.variant = EstimatorVariant::exact;
            spec.preemptive = head == "srpt";
        }
    } else if (head == "sept" || head == "serpt" || head == "fcn" || head == "fc#" ||
               head == "fcp") {
        if (head == "sept") spec.family = PolicyFamily::sept;
        else if (head == "serpt") spec.family = PolicyFamily::serpt;
        else if (head == "fcp") spec.family = PolicyFamily::fair_work;
        else spec.family = PolicyFamily::fair_count;
        spec.preemptive = spec.family != PolicyFamily::sept;
        if (tok.size() < 2) detail::bad_spec(text, "missing estimator variant (re, re-lim, for)");
        const std::string_view var = tok[next++];
        if (var == "re") {
            spec.variant = EstimatorVariant::reactive;
        } else if (var == "re-lim") {
            spec.variant = EstimatorVariant::reactive_limited;
            if (next < tok.size() && tok[next] != "np") {
                std::int64_t cap = 0;
                if (!parse_int(tok[next], cap) || cap <= 0)
                    detail::bad_spec(text, "history cap must be a positive integer");
                spec.history_cap = cap;
                ++next;
            }
        } else if (var == "for") {
            spec.variant = EstimatorVariant::foresight;
        } else {
            detail::bad_spec(text, "unknown estimator variant");
        }
        const bool fair = spec.family == PolicyFamily::fair_count ||
                          spec.family == PolicyFamily::fair_work;
        if (next < tok.size() && tok[next] == "np") {
            if (!fair) detail::bad_spec(text, "only fcn/fcp accept :np");
            spec.preemptive = false;
            ++next;
        }
    } else {
        detail::bad_spec(text, "unknown family");
    }
    if (next != tok.size()) detail::bad_spec(text, "trailing tokens");
    return spec;
}

inline std::string PolicySpec::family_name() const {
    switch (family) {
        case PolicyFamily::fifo: return "fifo";
        case PolicyFamily::round_robin: return "rr";
        case PolicyFamily::sept: return "sept";
        case PolicyFamily::serpt: return "serpt";
        case PolicyFamily::fair_count: return "fcn";
        case PolicyFamily::fair_work: return "fcp";
        case PolicyFamily::spt: return "spt";
        case PolicyFamily::srpt: return "srpt";
    }
    return "?";
}

inline std::string PolicySpec::variant_name() const {
    switch (variant) {
        case EstimatorVariant::none:
            return family == PolicyFamily::round_robin
                       ? std::to_string(quantum / us_per_ms) + "ms"
                       : "-";
        case EstimatorVariant::reactive: return "re";
        case EstimatorVariant::reactive_limited: return "re-lim";
        case EstimatorVariant::foresight: return "for";
        case EstimatorVariant::exact: return "exact";
    }
    return "?";
}

inline std::string PolicySpec::to_string() const {
    switch (family) {
        case PolicyFamily::fifo: return "fifo";
        case PolicyFamily::spt: return "spt";
        case PolicyFamily::srpt: return "srpt";
        case PolicyFamily::round_robin:
            return "rr:" + std::to_string(quantum / us_per_ms) + "ms";
        default: break;
    }
    std::string out = family_name() + ":";
    if (variant == EstimatorVariant::reactive) out += "re";
    else if (variant == EstimatorVariant::reactive_limited)
        out += "re-lim:" + std::to_string(history_cap);
    else out += "for";
    const bool fair = family == PolicyFamily::fair_count || family == PolicyFamily::fair_work;
    if (fair && !preemptive) out += ":np";
    return out;
}

// What the engine exposes when asking for a position. The ground-truth
// duration is gated: only clairvoyant specs may read it.
class PositionQuery {
public:
    PositionQuery(FunctionId func, TimePoint release, SeqNo seq, Duration elapsed, TimePoint now,
                  Duration true_processing, bool clairvoyant)
        : func(func), release(release), seq(seq), elapsed(elapsed), now(now),
          true_processing_(true_processing), clairvoyant_(clairvoyant) {}

    FunctionId func;
    TimePoint release;
    SeqNo seq;
    Duration elapsed; // service already received
    TimePoint now;

    Duration true_processing() const {
        if (!clairvoyant_)
            throw ContractViolation("true processing time requested by a non-clairvoyant policy");
        return true_processing_;
    }

private:
    Duration true_processing_;
    bool clairvoyant_;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual Ratio position(const PositionQuery& q) = 0;
    virtual void on_release(const Invocation&) {}
    virtual void update(const Invocation&, TimePoint) {}
};

// Running mean of completed processing times per function, with the global
// mean as a cold-start fallback. A positive cap bounds the history window
// per function, oldest evicted first.
class MeanEstimator {
public:
    MeanEstimator(std::size_t functions, std::int64_t cap = 0)
        : per_func_(functions), cap_(cap) {}

    void add(FunctionId f, Duration p) {
        Acc& a = per_func_.at(static_cast<std::size_t>(f));
        a.total += p;
        a.count += 1;
        total_ += p;
        count_ += 1;
        if (cap_ > 0) {
            a.window.push_back(p);
            if (static_cast<std::int64_t>(a.window.size()) > cap_) {
                const Duration old = a.window.front();
                a.window.pop_front();
                a.total -= old;
                a.count -= 1;
                total_ -= old;
                count_ -= 1;
            }
        }
    }

    Ratio estimate(FunctionId f) const {
        const Acc& a = per_func_.at(static_cast<std::size_t>(f));
        if (a.count > 0) return Ratio{a.total, a.count};
        if (count_ == 0) return Ratio{0, 1};
        return Ratio{total_, count_};
    }

private:
    struct Acc {
        std::int64_t total{0};
        std::int64_t count{0};
        std::deque<Duration> window;
    };
    std::vector<Acc> per_func_;
    std::int64_t total_{0};
    std::int64_t count_{0};
    std::int64_t cap_;
};

namespace detail {

// Fenwick tree holding (count, sum) per value rank; suffix queries answer
// "how many recorded durations are >= x and what do they add up to".
class FenwickSums {
public:
    explicit FenwickSums(std::size_t n = 0) : count_(n + 1, 0), sum_(n + 1, 0) {}

    void add(std::size_t rank, std::int64_t c, std::int64_t s) {
        for (std::size_t i = rank + 1; i < count_.size(); i += i & (~i + 1)) {
            count_[i] += c;
            sum_[i] += s;
        }
    }

    // totals over ranks [0, rank)
    std::pair<std::int64_t, std::int64_t> prefix(std::size_t rank) const {
        std::int64_t c = 0, s = 0;
        for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) {
            c += count_[i];
            s += sum_[i];
        }
        return {c, s};
    }

    std::pair<std::int64_t, std::int64_t> total() const { return prefix(count_.size() - 1); }

private:
    std::vector<std::int64_t> count_;
    std::vector<std::int64_t> sum_;
};

} // namespace detail

// Completed-duration history for residual-work estimates. Values are indexed
// against the durations the instance can ever produce, so inserts and the
// mean-of-qualifying-samples query are both logarithmic.
class RemainingWorkHistory {
public:
    RemainingWorkHistory(const Instance& inst, std::int64_t cap) : cap_(cap) {
        funcs_.resize(inst.profiles.size());
        std::vector<std::vector<Duration>> per(inst.profiles.size());
        all_values_.reserve(inst.invocations.size());
        for (const Invocation& inv : inst.invocations) {
            per.at(static_cast<std::size_t>(inv.func)).push_back(inv.processing);
            all_values_.push_back(inv.processing);
        }
        std::sort(all_values_.begin(), all_values_.end());
        all_values_.erase(std::unique(all_values_.begin(), all_values_.end()), all_values_.end());
        global_ = detail::FenwickSums(all_values_.size());
        for (std::size_t f = 0; f < per.size(); ++f) {
            auto& vs = per[f];
            std::sort(vs.begin(), vs.end());
            vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
            funcs_[f].values = std::move(vs);
            funcs_[f].fen = detail::FenwickSums(funcs_[f].values.size());
        }
    }

    void add(FunctionId f, Duration p) {
        PerFunction& pf = funcs_.at(static_cast<std::size_t>(f));
        const std::size_t rank = rank_of(pf.values, p);
        pf.fen.add(rank, 1, p);
        global_.add(rank_of(all_values_, p), 1, p);
        if (cap_ > 0) {
            pf.window.push_back(static_cast<std::int32_t>(rank));
            if (static_cast<std::int64_t>(pf.window.size()) > cap_) {
                const std::size_t old_rank = static_cast<std::size_t>(pf.window.front());
                pf.window.pop_front();
                const Duration old = pf.values[old_rank];
                pf.fen.add(old_rank, -1, -old);
                global_.add(rank_of(all_values_, old), -1, -old);
            }
        }
    }

    // Mean of (sample - elapsed) over per-function samples with
    // sample >= elapsed; falls back to the pooled history of every function,
    // then to zero.
    Ratio position(FunctionId f, Duration elapsed) const {
        const PerFunction& pf = funcs_.at(static_cast<std::size_t>(f));
        Ratio r;
        if (suffix_mean(pf.fen, pf.values, elapsed, r)) return r;
        if (suffix_mean(global_, all_values_, elapsed, r)) return r;
        return Ratio{0, 1};
    }

private:
    struct PerFunction {
        std::vector<Duration> values;
        detail::FenwickSums fen;
        std::deque<std::int32_t> window;
    };

    static std::size_t rank_of(const std::vector<Duration>& values, Duration p) {
        const auto it = std::lower_bound(values.begin(), values.end(), p);
        if (it == values.end() || *it != p)
            throw ContractViolation("duration was never registered with this history");
        return static_cast<std::size_t>(it - values.begin());
    }

    static bool suffix_mean(const detail::FenwickSums& fen, const std::vector<Duration>& values,
                            Duration elapsed, Ratio& out) {
        const std::size_t from =
            static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), elapsed) -
                                     values.begin());
        const auto [all_c, all_s] = fen.total();
        const auto [lo_c, lo_s] = fen.prefix(from);
        const std::int64_t c = all_c - lo_c;
        if (c <= 0) return false;
        const std::int64_t s = all_s - lo_s;
        out = Ratio{s - c * elapsed, c};
        return true;
    }

    std::vector<PerFunction> funcs_;
    std::vector<Duration> all_values_;
    detail::FenwickSums global_;
    std::int64_t cap_;
};

// Per-minute arrival bookkeeping for the fair-choice families: the rate
// forecast for the current minute plus what has actually been observed in
// it. Counters reset at each minute boundary.
class MinuteLedger {
public:
    MinuteLedger(std::size_t functions, const std::vector<FunctionProfile>* foresight_profiles)
        : lambda_(functions, 1), count_(functions, 0), done_work_(functions, 0),
          open_calls_(functions, 0), profiles_(foresight_profiles) {
        if (profiles_)
            for (std::size_t f = 0; f < functions; ++f) lambda_[f] = rate_at(f, 1);
    }

    void advance(std::int64_t k) {
        if (k < minute_) throw ContractViolation("minute ledger asked to move backwards");
        while (minute_ < k) {
            ++minute_;
            for (std::size_t f = 0; f < lambda_.size(); ++f) {
                lambda_[f] = profiles_ ? rate_at(f, minute_) : count_[f];
                count_[f] = 0;
                done_work_[f] = 0;
                open_calls_[f] = 0;
            }
        }
    }

    void note_release(const Invocation& inv) {
        if (inv.release < last_release_)
            throw ContractViolation("releases must be observed in order");
        last_release_ = inv.release;
        advance(minute_index(inv.release));
        ++count_[static_cast<std::size_t>(inv.func)];
    }

    std::int64_t minute() const { return minute_; }
    std::int64_t forecast(FunctionId f) const { return lambda_[static_cast<std::size_t>(f)]; }
    std::int64_t observed_count(FunctionId f) const { return count_[static_cast<std::size_t>(f)]; }
    std::int64_t done_work(FunctionId f) const { return done_work_[static_cast<std::size_t>(f)]; }
    std::int64_t open_calls(FunctionId f) const { return open_calls_[static_cast<std::size_t>(f)]; }

    void add_done_work(FunctionId f, Duration p) { done_work_[static_cast<std::size_t>(f)] += p; }
    void add_open_call(FunctionId f) { ++open_calls_[static_cast<std::size_t>(f)]; }
    void settle_open_call(FunctionId f, Duration p) {
        --open_calls_[static_cast<std::size_t>(f)];
        done_work_[static_cast<std::size_t>(f)] += p;
    }

private:
    std::int64_t rate_at(std::size_t f, std::int64_t k) const {
        const auto& rates = (*profiles_)[f].rates;
        if (k < 1 || k > static_cast<std::int64_t>(rates.size())) return 0;
        return rates[static_cast<std::size_t>(k - 1)];
    }

    std::vector<std::int64_t> lambda_;
    std::vector<std::int64_t> count_;
    std::vector<std::int64_t> done_work_;
    std::vector<std::int64_t> open_calls_;
    const std::vector<FunctionProfile>* profiles_;
    std::int64_t minute_{1};
    TimePoint last_release_{0};
};

class FifoPolicy final : public Policy {
public:
    Ratio position(const PositionQuery& q) override { return Ratio::of(q.release); }
};

class SeptPolicy final : public Policy {
public:
    SeptPolicy(const Instance& inst, EstimatorVariant variant, std::int64_t cap)
        : estimator_(inst.profiles.size(),
                     variant == EstimatorVariant::reactive_limited ? cap : 0),
          foresight_(variant == EstimatorVariant::foresight) {
        if (foresight_)
            for (const FunctionProfile& p : inst.profiles)
                means_.push_back(PiecewiseCdf(p.durations).mean_ratio());
    }

    Ratio position(const PositionQuery& q) override {
        if (foresight_) return means_.at(static_cast<std::size_t>(q.func));
        return estimator_.estimate(q.func);
    }

    void update(const Invocation& inv, TimePoint) override {
        if (!foresight_) estimator_.add(inv.func, inv.processing);
    }

private:
    MeanEstimator estimator_;
    std::vector<Ratio> means_;
    bool foresight_;
};

class SerptPolicy final : public Policy {
public:
    SerptPolicy(const Instance& inst, EstimatorVariant variant, std::int64_t cap)
        : foresight_(variant == EstimatorVariant::foresight) {
        if (foresight_) {
            for (const FunctionProfile& p : inst.profiles) cdfs_.emplace_back(p.durations);
        } else {
            history_ = std::make_unique<RemainingWorkHistory>(
                inst, variant == EstimatorVariant::reactive_limited ? cap : 0);
        }
    }

    Ratio position(const PositionQuery& q) override {
        if (foresight_)
            return Ratio::of(cdfs_.at(static_cast<std::size_t>(q.func)).expected_remaining(q.elapsed));
        return history_->position(q.func, q.elapsed);
    }

    void update(const Invocation& inv, TimePoint) override {
        if (!foresight_) history_->add(inv.func, inv.processing);
    }

private:
    std::unique_ptr<RemainingWorkHistory> history_;
    std::vector<PiecewiseCdf> cdfs_;
    bool foresight_;
};

// Runs the least expected invocations first: position is the larger of the
// minute's forecast and what the minute has already shown, counted in calls
// (fcn) or in work (fcp).
class FairChoicePolicy final : public Policy {
public:
    FairChoicePolicy(const Instance& inst, bool work_based, EstimatorVariant variant,
                     std::int64_t cap)
        : work_based_(work_based), foresight_(variant == EstimatorVariant::foresight),
          ledger_(inst.profiles.size(), variant == EstimatorVariant::foresight ? &inst.profiles : nullptr),
          estimator_(inst.profiles.size(),
                     variant == EstimatorVariant::reactive_limited ? cap : 0) {
        if (foresight_ && work_based_)
            for (const FunctionProfile& p : inst.profiles)
                means_.push_back(PiecewiseCdf(p.durations).mean_ratio());
    }

    Ratio position(const PositionQuery& q) override {
        ledger_.advance(minute_index(q.now));
        const std::int64_t lambda = ledger_.forecast(q.func);
        if (!work_based_)
            return max(Ratio::of(lambda), Ratio::of(ledger_.observed_count(q.func)));
        if (foresight_) {
            const Ratio& m = means_.at(static_cast<std::size_t>(q.func));
            return max(Ratio{lambda * m.num, m.den}, Ratio::of(ledger_.done_work(q.func)));
        }
        // Released-but-unfinished work is unknown; stand in the current mean
        // estimate for each open call until its completion reveals the truth.
        const Ratio e = estimator_.estimate(q.func);
        const Ratio forecast{lambda * e.num, e.den};
        const Ratio observed{ledger_.done_work(q.func) * e.den + ledger_.open_calls(q.func) * e.num,
                             e.den};
        return max(forecast, observed);
    }

    void on_release(const Invocation& inv) override {
        ledger_.note_release(inv);
        if (!work_based_) return;
        if (foresight_) ledger_.add_done_work(inv.func, inv.processing);
        else ledger_.add_open_call(inv.func);
    }

    void update(const Invocation& inv, TimePoint now) override {
        ledger_.advance(minute_index(now));
        if (work_based_ && !foresight_) {
            if (minute_index(inv.release) == ledger_.minute())
                ledger_.settle_open_call(inv.func, inv.processing);
            estimator_.add(inv.func, inv.processing);
        }
    }

private:
    bool work_based_;
    bool foresight_;
    MinuteLedger ledger_;
    MeanEstimator estimator_;
    std::vector<Ratio> means_;
};

class ClairvoyantPolicy final : public Policy {
public:
    explicit ClairvoyantPolicy(bool residual) : residual_(residual) {}

    Ratio position(const PositionQuery& q) override {
        return Ratio::of(residual_ ? q.true_processing() - q.elapsed : q.true_processing());
    }

private:
    bool residual_;
};

inline std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const Instance& inst) {
    switch (spec.family) {
        case PolicyFamily::fifo:
            return std::make_unique<FifoPolicy>();
        case PolicyFamily::sept:
            return std::make_unique<SeptPolicy>(inst, spec.variant, spec.history_cap);
        case PolicyFamily::serpt:
            return std::make_unique<SerptPolicy>(inst, spec.variant, spec.history_cap);
        case PolicyFamily::fair_count:
            return std::make_unique<FairChoicePolicy>(inst, false, spec.variant, spec.history_cap);
        case PolicyFamily::fair_work:
            return std::make_unique<FairChoicePolicy>(inst, true, spec.variant, spec.history_cap);
        case PolicyFamily::spt:
            return std::make_unique<ClairvoyantPolicy>(false);
        case PolicyFamily::srpt:
            return std::make_unique<ClairvoyantPolicy>(true);
        case PolicyFamily::round_robin:
            throw ContractViolation("round robin does not take positions; use the rr loop");
    }
    throw ContractViolation("unknown policy family");
}

} // namespace faasched
