#pragma once

// Discrete-event execution over m parallel processors. The framework loop
// re-decides only at scheduling points (completions and arrivals): finished
// work is reported to the policy, new arrivals are admitted, in preemptive
// mode the running set is thrown back into the pending pool, and free
// processors then repeatedly take the lowest-position invocation. Round
// robin does not fit that shape and runs its own quantum loop.

#include <algorithm>
#include <deque>
#include <limits>
#include <memory>
#include <vector>

#include "core.hpp"
#include "policies.hpp"

namespace faasched {

struct ServiceSegment {
    SeqNo seq{0};
    int processor{0};
    TimePoint start{0};
    TimePoint end{0};
};

namespace detail {

inline constexpr TimePoint no_event = std::numeric_limits<TimePoint>::max();

struct PendingCall {
    SeqNo seq{0};
    FunctionId func{0};
    TimePoint release{0};
    Duration processing{0};
    Duration served{0};
    int last_proc{-1};
};

struct Processor {
    bool busy{false};
    PendingCall run{};
    TimePoint started{0};   // when the current service stint began
    TimePoint seg_start{0}; // when the current contiguous segment began
    bool hold{false};       // free, but the last segment is still open for reuse
    SeqNo hold_seq{-1};
    TimePoint hold_start{0};
};

inline Invocation to_invocation(const PendingCall& c) {
    return Invocation{c.seq, c.func, c.release, c.processing};
}

inline void emit(std::vector<ServiceSegment>* segments, SeqNo seq, int proc, TimePoint start,
                 TimePoint end) {
    if (segments && start < end) segments->push_back(ServiceSegment{seq, proc, start, end});
}

// Take an invocation onto a processor, stitching the segment back together
// when the processor would just be resuming the same invocation.
inline void occupy(Processor& proc, int proc_index, const PendingCall& call, TimePoint t,
                   std::vector<ServiceSegment>* segments) {
    if (proc.hold && proc.hold_seq != call.seq)
        emit(segments, proc.hold_seq, proc_index, proc.hold_start, t);
    proc.seg_start = proc.hold && proc.hold_seq == call.seq ? proc.hold_start : t;
    proc.hold = false;
    proc.busy = true;
    proc.run = call;
    proc.started = t;
}

inline void close_stale_holds(std::vector<Processor>& procs, TimePoint t,
                              std::vector<ServiceSegment>* segments) {
    for (std::size_t p = 0; p < procs.size(); ++p) {
        if (!procs[p].busy && procs[p].hold) {
            emit(segments, procs[p].hold_seq, static_cast<int>(p), procs[p].hold_start, t);
            procs[p].hold = false;
        }
    }
}

inline std::vector<CompletionRecord> run_framework(const Instance& inst, const PolicySpec& spec,
                                                   std::vector<ServiceSegment>* segments) {
    const std::size_t total = inst.invocations.size();
    std::unique_ptr<Policy> policy = make_policy(spec, inst);
    std::vector<Processor> procs(static_cast<std::size_t>(inst.processors));
    std::vector<PendingCall> pool; // the acknowledged-and-waiting set
    std::vector<CompletionRecord> records;
    records.reserve(total);
    std::size_t next_arrival = 0;
    std::size_t done = 0;

    struct Key {
        Ratio pos;
        TimePoint release;
        SeqNo seq;
        std::size_t pool_index;
    };
    std::vector<Key> keys;

    while (done < total) {
        TimePoint t = next_arrival < total ? inst.invocations[next_arrival].release : no_event;
        for (const Processor& p : procs) {
            if (!p.busy) continue;
            const TimePoint finish = p.started + (p.run.processing - p.run.served);
            if (finish < t) t = finish;
        }

        // 1. completions at t, reported before anything else may react
        for (std::size_t pi = 0; pi < procs.size(); ++pi) {
            Processor& p = procs[pi];
            if (!p.busy) continue;
            if (p.started + (p.run.processing - p.run.served) != t) continue;
            emit(segments, p.run.seq, static_cast<int>(pi), p.seg_start, t);
            records.push_back(CompletionRecord{p.run.seq, p.run.func, p.run.release, t,
                                               p.run.processing});
            policy->update(to_invocation(p.run), t);
            p.busy = false;
            p.hold = false;
            ++done;
        }

        // 2. arrivals at t join the pool
        while (next_arrival < total && inst.invocations[next_arrival].release == t) {
            const Invocation& inv = inst.invocations[next_arrival];
            policy->on_release(inv);
            pool.push_back(PendingCall{inv.seq, inv.func, inv.release, inv.processing, 0, -1});
            ++next_arrival;
        }

        // 3. preemptive mode returns the whole running set to the pool
        if (spec.preemptive) {
            for (std::size_t pi = 0; pi < procs.size(); ++pi) {
                Processor& p = procs[pi];
                if (!p.busy) continue;
                p.run.served += t - p.started;
                p.run.last_proc = static_cast<int>(pi);
                pool.push_back(p.run);
                p.busy = false;
                p.hold = true;
                p.hold_seq = p.run.seq;
                p.hold_start = p.seg_start;
            }
        }

        // 4. free processors take the pool in position order. Positions are
        // fixed between scheduling points, so one evaluation per candidate
        // is exactly the repeated-argmin of the framework.
        if (!pool.empty()) {
            std::size_t free_count = 0;
            for (const Processor& p : procs)
                if (!p.busy) ++free_count;
            if (free_count > 0) {
                keys.clear();
                keys.reserve(pool.size());
                for (std::size_t i = 0; i < pool.size(); ++i) {
                    const PendingCall& c = pool[i];
                    const PositionQuery q(c.func, c.release, c.seq, c.served, t, c.processing,
                                          spec.clairvoyant());
                    keys.push_back(Key{policy->position(q), c.release, c.seq, i});
                }
                std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
                    const int c = compare(a.pos, b.pos);
                    if (c != 0) return c < 0;
                    if (a.release != b.release) return a.release < b.release;
                    return a.seq < b.seq;
                });
                std::vector<bool> taken(pool.size(), false);
                for (const Key& k : keys) {
                    if (free_count == 0) break;
                    const PendingCall& call = pool[k.pool_index];
                    int target = -1;
                    if (call.last_proc >= 0 && !procs[static_cast<std::size_t>(call.last_proc)].busy)
                        target = call.last_proc;
                    else
                        for (std::size_t pi = 0; pi < procs.size(); ++pi)
                            if (!procs[pi].busy) { target = static_cast<int>(pi); break; }
                    occupy(procs[static_cast<std::size_t>(target)], target, call, t, segments);
                    taken[k.pool_index] = true;
                    --free_count;
                }
                std::size_t w = 0;
                for (std::size_t i = 0; i < pool.size(); ++i)
                    if (!taken[i]) pool[w++] = pool[i];
                pool.resize(w);
            }
        }

        close_stale_holds(procs, t, segments);
    }

    std::sort(records.begin(), records.end(),
              [](const CompletionRecord& a, const CompletionRecord& b) { return a.seq < b.seq; });
    return records;
}

} // namespace detail

// Single global FIFO queue; a freed processor takes the head and runs it for
// one quantum or to completion, an expired invocation rejoins the tail, and
// arrivals never preempt. At equal times completions settle before expiries,
// expiries before arrivals.
inline std::vector<CompletionRecord> simulate_rr(const Instance& inst, Duration quantum,
                                                 std::vector<ServiceSegment>* segments = nullptr) {
    if (quantum <= 0) throw ContractViolation("round robin quantum must be positive");
    const std::size_t total = inst.invocations.size();
    std::vector<detail::Processor> procs(static_cast<std::size_t>(inst.processors));
    std::deque<detail::PendingCall> queue;
    std::vector<CompletionRecord> records;
    records.reserve(total);
    std::size_t next_arrival = 0;
    std::size_t done = 0;

    auto slice_end = [quantum](const detail::Processor& p) {
        const Duration rest = p.run.processing - p.run.served;
        return p.started + (rest < quantum ? rest : quantum);
    };

    while (done < total) {
        TimePoint t = next_arrival < total ? inst.invocations[next_arrival].release
                                           : detail::no_event;
        for (const detail::Processor& p : procs) {
            if (!p.busy) continue;
            const TimePoint boundary = slice_end(p);
            if (boundary < t) t = boundary;
        }

        // completions
        for (std::size_t pi = 0; pi < procs.size(); ++pi) {
            detail::Processor& p = procs[pi];
            if (!p.busy || slice_end(p) != t) continue;
            if (p.run.processing - p.run.served > quantum) continue;
            detail::emit(segments, p.run.seq, static_cast<int>(pi), p.seg_start, t);
            records.push_back(CompletionRecord{p.run.seq, p.run.func, p.run.release, t,
                                               p.run.processing});
            p.busy = false;
            p.hold = false;
            ++done;
        }
        // quantum expiries rejoin the tail, in processor order
        for (std::size_t pi = 0; pi < procs.size(); ++pi) {
            detail::Processor& p = procs[pi];
            if (!p.busy || slice_end(p) != t) continue;
            p.run.served += quantum;
            queue.push_back(p.run);
            p.busy = false;
            p.hold = true;
            p.hold_seq = p.run.seq;
            p.hold_start = p.seg_start;
        }
        // arrivals
        while (next_arrival < total && inst.invocations[next_arrival].release == t) {
            const Invocation& inv = inst.invocations[next_arrival];
            queue.push_back(detail::PendingCall{inv.seq, inv.func, inv.release, inv.processing,
                                                0, -1});
            ++next_arrival;
        }
        // freed processors take the head, lowest index first
        for (std::size_t pi = 0; pi < procs.size() && !queue.empty(); ++pi) {
            if (procs[pi].busy) continue;
            detail::occupy(procs[pi], static_cast<int>(pi), queue.front(), t, segments);
            queue.pop_front();
        }
        detail::close_stale_holds(procs, t, segments);
    }

    std::sort(records.begin(), records.end(),
              [](const CompletionRecord& a, const CompletionRecord& b) { return a.seq < b.seq; });
    return records;
}

// Run one policy over one instance to drain: every invocation completes,
// however far past the horizon that takes.
inline std::vector<CompletionRecord> simulate(const Instance& inst, const PolicySpec& spec,
                                              std::vector<ServiceSegment>* segments = nullptr) {
    if (spec.family == PolicyFamily::round_robin)
        return simulate_rr(inst, spec.quantum, segments);
    return detail::run_framework(inst, spec, segments);
}

} // namespace faasched
