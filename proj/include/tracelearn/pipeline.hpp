#pragma once

// Top-level synthesis loop: learn a regex stream from the abstracted demos,
// translate each candidate into a sketch stream, and complete sketches
// concurrently until one yields a consistent program or the budget runs out.
//
// Exploration policy. Regex candidates are materialized up front and their
// sketch streams drained one sketch at a time in rotation, so cheap sketches
// of a late regex are not starved by expensive variants of an early one.
// Each admitted sketch becomes a resumable completion session; workers
// advance the sessions round-robin in fixed node quanta, which splits the
// global timeout evenly across the active sketches. The first completed
// consistent program cancels everything else.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_set>
#include <vector>

#include "tracelearn/completer.hpp"
#include "tracelearn/learner.hpp"
#include "tracelearn/sketcher.hpp"

namespace tracelearn {

struct SynthOptions {
    double timeout_seconds = 120.0;   // global wall-clock budget
    int jobs = 0;                     // worker threads; 0 = hardware
    int max_regexes = RegexCandidateStream::kDefaultMaxRegexes;
    int max_extra_lets = kDefaultMaxExtraLets;
    const CompletionModel* model = nullptr;   // null: the default scorer
    // Per-sketch search knobs; deadline and cancel are overwritten per task.
    CompleteOptions complete;
};

struct SynthReport {
    std::string outcome = "exhausted";   // solved | timeout | exhausted
    NodePtr program;                     // set when outcome == solved
    std::uint64_t sketches_tried = 0;
    std::uint64_t partials_dequeued = 0;
    std::uint64_t pruned_count = 0;
    double wall_seconds = 0.0;
};

namespace detail {

// Interleaved pull over the per-regex sketch streams. Every regex keeps its
// own canonical sketch order, but the cursor rotates across regexes so each
// one contributes its next sketch in turn. Structurally identical sketches
// from different regexes (rewrites often collapse to the same program shape)
// are emitted once.
class SketchFeed {
  public:
    SketchFeed(std::vector<AbstractString> samples, int max_regexes,
               int max_extra_lets) {
        RegexCandidateStream regexes(std::move(samples), max_regexes);
        while (auto rc = regexes.next()) {
            try {
                lanes_.push_back(
                    Lane{SketchStream(rc->regex, max_extra_lets), false});
            } catch (const Error&) {
                // regex has no sketch form (e.g. too many loops); skip it
            }
        }
        live_ = lanes_.size();
    }

    std::optional<Sketch> next() {
        while (live_ > 0) {
            Lane& lane = lanes_[cursor_];
            cursor_ = (cursor_ + 1) % lanes_.size();
            if (lane.done) continue;
            while (auto s = lane.stream->next()) {
                if (seen_.insert(print_program(s->prog)).second) return s;
            }
            lane.done = true;
            lane.stream.reset();
            --live_;
        }
        return std::nullopt;
    }

  private:
    struct Lane {
        std::optional<SketchStream> stream;
        bool done;
    };
    std::vector<Lane> lanes_;
    std::unordered_set<std::string> seen_;
    size_t cursor_ = 0;
    size_t live_ = 0;
};

}  // namespace detail

inline SynthReport synthesize(const std::vector<Demonstration>& demos,
                              const SynthOptions& opt = {}) {
    if (demos.empty())
        fail("BadArgument", "synthesize requires at least one demonstration");
    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
            .count();
    };

    SynthReport rep;
    if (opt.timeout_seconds <= 0.0) {
        rep.outcome = "timeout";
        rep.wall_seconds = elapsed();
        return rep;
    }
    auto deadline = t0 + std::chrono::duration_cast<
                             std::chrono::steady_clock::duration>(
                             std::chrono::duration<double>(opt.timeout_seconds));

    std::vector<AbstractString> samples;
    samples.reserve(demos.size());
    for (const auto& d : demos) samples.push_back(abstract_trace(d.trace, d.env));

    detail::SketchFeed feed(std::move(samples), opt.max_regexes,
                            opt.max_extra_lets);

    DefaultModel fallback_model;
    const CompletionModel& model = opt.model ? *opt.model : fallback_model;

    std::atomic<bool> cancel{false};
    CompleteOptions copt = opt.complete;
    copt.deadline = deadline;
    copt.cancel = &cancel;

    // Nodes advanced per scheduling slice, and the cap on sessions held open
    // at once. A wider pool lets more sketches share the clock but every
    // parked session keeps its whole worklist resident, so the cap is what
    // bounds peak memory; a smaller quantum keeps the rotation responsive.
    constexpr std::uint64_t kQuantumNodes = 128;
    constexpr size_t kPoolCap = 12;

    struct Active {
        std::unique_ptr<CompletionSession> sess;
        CompleteStats last;   // counters already folded into the report
    };

    std::mutex mu;
    std::deque<Active> pool;
    size_t live = 0;        // admitted and not yet terminal
    bool feed_done = false;
    bool timed_out = false;
    NodePtr winner;

    auto fold_stats = [&rep](Active& a) {
        const CompleteStats& now = a.sess->stats();
        rep.partials_dequeued += now.dequeued - a.last.dequeued;
        rep.pruned_count += now.pruned - a.last.pruned;
        a.last = now;
    };

    auto worker = [&] {
        while (!cancel.load(std::memory_order_relaxed)) {
            Active cur;
            {
                std::unique_lock<std::mutex> lock(mu);
                while (live < kPoolCap && !feed_done) {
                    auto sk = feed.next();
                    if (!sk) {
                        feed_done = true;
                        break;
                    }
                    Active a;
                    a.sess = std::make_unique<CompletionSession>(
                        sk->prog, demos, model, copt);
                    ++rep.sketches_tried;
                    ++live;
                    // Fresh sessions go to the front: a sketch whose root is
                    // already incompatible dies within its first quantum, so
                    // giving newcomers the next slice clears them out fast
                    // while long-running sessions wait their turn at the back.
                    pool.push_front(std::move(a));
                }
                if (pool.empty()) {
                    if (live == 0 && feed_done) return;
                    lock.unlock();
                    std::this_thread::sleep_for(std::chrono::milliseconds(1));
                    continue;
                }
                cur = std::move(pool.front());
                pool.pop_front();
            }
            if (std::chrono::steady_clock::now() > deadline) {
                std::lock_guard<std::mutex> lock(mu);
                timed_out = true;
                cancel.store(true, std::memory_order_relaxed);
                fold_stats(cur);
                pool.push_back(std::move(cur));
                return;
            }
            CompleteResult r = cur.sess->step(kQuantumNodes);
            std::lock_guard<std::mutex> lock(mu);
            fold_stats(cur);
            if (r.reason == "running") {
                pool.push_back(std::move(cur));
                continue;
            }
            --live;
            if (r.reason == "solved") {
                if (!winner) winner = r.program;
                cancel.store(true, std::memory_order_relaxed);
                return;
            }
            if (r.reason == "deadline") {
                timed_out = true;
                cancel.store(true, std::memory_order_relaxed);
                return;
            }
            // exhausted, node-budget or cancelled: drop the session
        }
    };

    int jobs = opt.jobs;
    if (jobs <= 0) jobs = (int)std::thread::hardware_concurrency();
    if (jobs < 1) jobs = 1;
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(jobs);
        for (int i = 0; i < jobs; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    for (auto& a : pool) fold_stats(a);   // sessions parked at shutdown

    if (winner) {
        rep.outcome = "solved";
        rep.program = winner;
    } else {
        rep.outcome = (timed_out || std::chrono::steady_clock::now() > deadline)
                          ? "timeout"
                          : "exhausted";
    }
    rep.wall_seconds = elapsed();
    return rep;
}

}  // namespace tracelearn
